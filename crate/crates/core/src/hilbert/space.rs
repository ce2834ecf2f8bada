use serde::{Deserialize, Serialize};

use crate::error::{Result, SdsError};

/// Truncated Fock space with levels `0..n_max`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModeSpace {
    n_max: usize,
}

impl ModeSpace {
    pub fn new(n_max: usize) -> Result<Self> {
        if n_max < 2 {
            return Err(SdsError::InvalidParameter(format!(
                "Fock truncation must keep at least two levels, got {n_max}"
            )));
        }
        Ok(Self { n_max })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dim(&self) -> usize {
        self.n_max
    }

    /// First Fock level of the tail window `[n_max - ceil(0.05 n_max), n_max)`.
    pub fn tail_start(&self) -> usize {
        let width = (0.05 * self.n_max as f64).ceil() as usize;
        self.n_max - width.max(1)
    }
}

/// Symmetric Dicke sector of `N` spin-1/2 particles, basis ordered `m = -N/2 ..= N/2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpinSpace {
    n_spins: usize,
}

impl SpinSpace {
    pub fn new(n_spins: usize) -> Result<Self> {
        if n_spins == 0 {
            return Err(SdsError::InvalidParameter("need at least one spin".into()));
        }
        Ok(Self { n_spins })
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn dim(&self) -> usize {
        self.n_spins + 1
    }

    /// Total angular momentum `j = N/2`.
    pub fn j(&self) -> f64 {
        self.n_spins as f64 / 2.0
    }

    /// Magnetization of basis index `k`.
    pub fn m(&self, k: usize) -> f64 {
        k as f64 - self.j()
    }

    pub fn magnetizations(&self) -> Vec<f64> {
        (0..self.dim()).map(|k| self.m(k)).collect()
    }

    /// Basis index of magnetization `m`, if `m` is a valid (half-)integer in range.
    pub fn index_of(&self, m: f64) -> Option<usize> {
        let k = m + self.j();
        let r = k.round();
        if (k - r).abs() > 1e-9 || r < 0.0 || r as usize >= self.dim() {
            None
        } else {
            Some(r as usize)
        }
    }
}

/// Spin ⊗ mode ⊗ ancilla₁ ⊗ ancilla₂, with the rightmost factor varying fastest.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HybridSpace {
    spin: SpinSpace,
    mode: ModeSpace,
    ancillas: usize,
}

pub const FACTOR_ORDERING: &str = "spin(m=-N/2..N/2) x mode(n=0..n_max-1) x ancilla1 x ancilla2";

impl HybridSpace {
    pub fn new(spin: SpinSpace, mode: ModeSpace, ancillas: usize) -> Result<Self> {
        if ancillas > 2 {
            return Err(SdsError::InvalidParameter(format!(
                "at most two ancilla qubits are supported, got {ancillas}"
            )));
        }
        Ok(Self { spin, mode, ancillas })
    }

    pub fn spin_mode(n_spins: usize, n_max: usize) -> Result<Self> {
        Self::new(SpinSpace::new(n_spins)?, ModeSpace::new(n_max)?, 0)
    }

    pub fn spin(&self) -> SpinSpace {
        self.spin
    }

    pub fn mode(&self) -> ModeSpace {
        self.mode
    }

    pub fn ancillas(&self) -> usize {
        self.ancillas
    }

    pub fn ancilla_dim(&self) -> usize {
        1 << self.ancillas
    }

    pub fn dim(&self) -> usize {
        self.spin.dim() * self.mode.dim() * self.ancilla_dim()
    }

    /// Flat index of (spin index, Fock level, ancilla bit pattern).
    /// Ancilla bit 1 is the most significant bit of `anc`.
    pub fn index(&self, k: usize, n: usize, anc: usize) -> usize {
        (k * self.mode.dim() + n) * self.ancilla_dim() + anc
    }

    /// Inverse of [`HybridSpace::index`].
    pub fn split(&self, idx: usize) -> (usize, usize, usize) {
        let a = self.ancilla_dim();
        let anc = idx % a;
        let rest = idx / a;
        (rest / self.mode.dim(), rest % self.mode.dim(), anc)
    }

    pub fn with_mode(&self, mode: ModeSpace) -> Self {
        Self { mode, ..*self }
    }
}

/// Any of the spaces operators and kets can live on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Space {
    Mode(ModeSpace),
    Spin(SpinSpace),
    Hybrid(HybridSpace),
}

impl Space {
    pub fn dim(&self) -> usize {
        match self {
            Space::Mode(m) => m.dim(),
            Space::Spin(s) => s.dim(),
            Space::Hybrid(h) => h.dim(),
        }
    }

    pub fn mode(&self) -> Option<ModeSpace> {
        match self {
            Space::Mode(m) => Some(*m),
            Space::Spin(_) => None,
            Space::Hybrid(h) => Some(h.mode()),
        }
    }

    /// Fock level of a flat basis index, when the space contains a mode.
    pub fn fock_level(&self, idx: usize) -> Option<usize> {
        match self {
            Space::Mode(_) => Some(idx),
            Space::Spin(_) => None,
            Space::Hybrid(h) => Some(h.split(idx).1),
        }
    }
}

impl From<ModeSpace> for Space {
    fn from(m: ModeSpace) -> Self {
        Space::Mode(m)
    }
}

impl From<SpinSpace> for Space {
    fn from(s: SpinSpace) -> Self {
        Space::Spin(s)
    }
}

impl From<HybridSpace> for Space {
    fn from(h: HybridSpace) -> Self {
        Space::Hybrid(h)
    }
}

/// Smallest truncation recommended for squeezing `z = |zeta| N / 2`.
pub fn n_max_for_squeezing(z: f64) -> usize {
    let needed = (8.0 * (2.0 * z.abs()).exp()).ceil() as usize;
    needed.max(32)
}

/// Next truncation to try after a truncation error.
pub fn grow_n_max(n_max: usize) -> usize {
    ((n_max as f64) * 1.5).ceil() as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_truncation() {
        assert!(ModeSpace::new(1).is_err());
        assert!(ModeSpace::new(2).is_ok());
        assert!(SpinSpace::new(0).is_err());
        assert!(HybridSpace::new(SpinSpace::new(1).unwrap(), ModeSpace::new(4).unwrap(), 3).is_err());
    }

    #[test]
    fn hybrid_dimension_and_indexing() {
        let h = HybridSpace::new(SpinSpace::new(3).unwrap(), ModeSpace::new(10).unwrap(), 2).unwrap();
        assert_eq!(h.dim(), 4 * 10 * 4);
        for idx in 0..h.dim() {
            let (k, n, a) = h.split(idx);
            assert_eq!(h.index(k, n, a), idx);
        }
        assert_eq!(h.index(1, 0, 0), 40);
    }

    #[test]
    fn magnetization_labels() {
        let s = SpinSpace::new(3).unwrap();
        assert_eq!(s.magnetizations(), vec![-1.5, -0.5, 0.5, 1.5]);
        assert_eq!(s.index_of(0.5), Some(2));
        assert_eq!(s.index_of(0.0), None);
        assert_eq!(s.index_of(2.5), None);
    }

    #[test]
    fn tail_window() {
        assert_eq!(ModeSpace::new(100).unwrap().tail_start(), 95);
        assert_eq!(ModeSpace::new(10).unwrap().tail_start(), 9);
        assert_eq!(n_max_for_squeezing(0.1), 32);
        assert_eq!(n_max_for_squeezing(1.0), 60);
        assert_eq!(grow_n_max(60), 90);
    }
}
