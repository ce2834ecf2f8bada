//! Hybrid spin-boson spaces, kets and the dense operator algebra.

mod krylov;
mod operators;
mod space;
mod sparse;

pub use krylov::*;
pub use operators::*;
pub use space::*;
pub use sparse::SparseOp;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SdsError};
use crate::C64;

/// Default ceiling on the population of the top 5% of Fock levels.
pub const DEFAULT_TAIL_THRESHOLD: f64 = 1e-8;

const FLAG_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct Ket {
    space: Space,
    amplitudes: DVector<C64>,
}

impl Ket {
    /// Normalizes `amplitudes`; fails on a zero vector or wrong length.
    pub fn new(space: impl Into<Space>, amplitudes: DVector<C64>) -> Result<Self> {
        let space = space.into();
        if amplitudes.len() != space.dim() {
            return Err(SdsError::DimensionMismatch {
                expected: space.dim(),
                found: amplitudes.len(),
            });
        }
        let norm = amplitudes.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(SdsError::InvalidParameter(
                "cannot normalize a zero or non-finite vector".into(),
            ));
        }
        Ok(Self {
            space,
            amplitudes: amplitudes / C64::from(norm),
        })
    }

    /// Wraps amplitudes as-is. Callers guarantee unit norm.
    pub(crate) fn from_raw(space: Space, amplitudes: DVector<C64>) -> Self {
        debug_assert_eq!(space.dim(), amplitudes.len());
        Self { space, amplitudes }
    }

    pub fn basis(space: impl Into<Space>, idx: usize) -> Result<Self> {
        let space = space.into();
        if idx >= space.dim() {
            return Err(SdsError::InvalidParameter(format!(
                "basis index {idx} outside dimension {}",
                space.dim()
            )));
        }
        let mut v = DVector::zeros(space.dim());
        v[idx] = C64::new(1.0, 0.0);
        Ok(Self::from_raw(space, v))
    }

    pub fn fock(mode: ModeSpace, n: usize) -> Result<Self> {
        Self::basis(mode, n)
    }

    pub fn vacuum(mode: ModeSpace) -> Self {
        Self::basis(mode, 0).expect("n_max >= 2")
    }

    /// `|mode⟩ ⊗ Σ c_k |k⟩` laid out in spin ⊗ mode order, ancillas all in `|0⟩`.
    pub fn product(space: HybridSpace, spin_weights: &[C64], mode_state: &Ket) -> Result<Self> {
        if spin_weights.len() != space.spin().dim() {
            return Err(SdsError::DimensionMismatch {
                expected: space.spin().dim(),
                found: spin_weights.len(),
            });
        }
        if mode_state.dim() != space.mode().dim() {
            return Err(SdsError::DimensionMismatch {
                expected: space.mode().dim(),
                found: mode_state.dim(),
            });
        }
        let anc = vec![C64::new(1.0, 0.0)]
            .into_iter()
            .chain(std::iter::repeat_n(C64::new(0.0, 0.0), space.ancilla_dim() - 1))
            .collect::<Vec<_>>();
        Self::product_with_ancillas(space, spin_weights, mode_state, &anc)
    }

    /// Like [`Ket::product`] with an explicit ancilla register state.
    pub fn product_with_ancillas(
        space: HybridSpace,
        spin_weights: &[C64],
        mode_state: &Ket,
        ancilla_state: &[C64],
    ) -> Result<Self> {
        if ancilla_state.len() != space.ancilla_dim() {
            return Err(SdsError::DimensionMismatch {
                expected: space.ancilla_dim(),
                found: ancilla_state.len(),
            });
        }
        let mut v = DVector::zeros(space.dim());
        for (k, &c) in spin_weights.iter().enumerate() {
            for n in 0..space.mode().dim() {
                for (a, &s) in ancilla_state.iter().enumerate() {
                    v[space.index(k, n, a)] = c * mode_state.amplitudes[n] * s;
                }
            }
        }
        Self::new(space, v)
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> DVector<C64> {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Ket) -> Result<C64> {
        self.check_same(other.dim())?;
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// Population in the top `⌈0.05 n_max⌉` Fock levels; zero for spin-only spaces.
    pub fn tail_population(&self) -> f64 {
        let Some(mode) = self.space.mode() else {
            return 0.0;
        };
        let start = mode.tail_start();
        self.amplitudes
            .iter()
            .enumerate()
            .filter(|(i, _)| self.space.fock_level(*i).unwrap() >= start)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    pub fn check_truncation(&self, threshold: f64) -> Result<()> {
        let tail = self.tail_population();
        if tail > threshold {
            let n_max = self.space.mode().map(|m| m.n_max()).unwrap_or(0);
            return Err(SdsError::Truncation { tail, threshold, n_max });
        }
        Ok(())
    }

    /// `op|self⟩` followed by the default truncation check.
    pub fn apply(&self, op: &LinOp) -> Result<Ket> {
        let out = self.apply_unchecked(op)?;
        out.check_truncation(DEFAULT_TAIL_THRESHOLD)?;
        Ok(out)
    }

    pub fn apply_unchecked(&self, op: &LinOp) -> Result<Ket> {
        self.check_same(op.dim())?;
        Ok(Ket::from_raw(self.space, &op.matrix * &self.amplitudes))
    }

    /// Mode amplitudes of spin block `k` (ancillas must be absent).
    pub fn mode_block(&self, k: usize) -> Result<DVector<C64>> {
        let Space::Hybrid(h) = self.space else {
            return Err(SdsError::InvalidParameter("mode blocks need a hybrid space".into()));
        };
        if h.ancillas() != 0 {
            return Err(SdsError::InvalidParameter(
                "mode blocks are defined without ancillas".into(),
            ));
        }
        let n = h.mode().dim();
        Ok(self.amplitudes.rows(k * n, n).into_owned())
    }

    /// Serializable amplitude dump with the basis ordering recorded.
    pub fn to_dump(&self) -> AmplitudeDump {
        AmplitudeDump {
            space: self.space,
            ordering: FACTOR_ORDERING.to_string(),
            amplitudes: self.amplitudes.iter().map(|a| [a.re, a.im]).collect(),
        }
    }

    pub fn from_dump(dump: &AmplitudeDump) -> Result<Self> {
        let v = DVector::from_iterator(
            dump.amplitudes.len(),
            dump.amplitudes.iter().map(|&[re, im]| C64::new(re, im)),
        );
        Self::new(dump.space, v)
    }

    fn check_same(&self, dim: usize) -> Result<()> {
        if dim != self.dim() {
            return Err(SdsError::DimensionMismatch {
                expected: self.dim(),
                found: dim,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeDump {
    pub space: Space,
    pub ordering: String,
    pub amplitudes: Vec<[f64; 2]>,
}

/// Dense operator with optional, verified hermiticity and unitarity flags.
#[derive(Clone, Debug, PartialEq)]
pub struct LinOp {
    space: Space,
    matrix: DMatrix<C64>,
    hermitian: bool,
    unitary: bool,
}

impl LinOp {
    pub fn new(space: impl Into<Space>, matrix: DMatrix<C64>) -> Result<Self> {
        let space = space.into();
        if matrix.nrows() != space.dim() || matrix.ncols() != space.dim() {
            return Err(SdsError::DimensionMismatch {
                expected: space.dim(),
                found: matrix.nrows(),
            });
        }
        Ok(Self {
            space,
            matrix,
            hermitian: false,
            unitary: false,
        })
    }

    pub(crate) fn from_parts(space: Space, matrix: DMatrix<C64>) -> Self {
        debug_assert_eq!(matrix.nrows(), space.dim());
        Self {
            space,
            matrix,
            hermitian: false,
            unitary: false,
        }
    }

    pub fn identity(space: impl Into<Space>) -> Self {
        let space = space.into();
        let mut op = Self::from_parts(space, DMatrix::identity(space.dim(), space.dim()));
        op.hermitian = true;
        op.unitary = true;
        op
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn is_unitary(&self) -> bool {
        self.unitary
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint()).norm()
    }

    /// `‖U†U − I‖` over columns below the Fock tail window.
    pub fn unitarity_error(&self) -> f64 {
        let prod = self.matrix.adjoint() * &self.matrix;
        let interior: Vec<usize> = (0..self.dim())
            .filter(|&i| match (self.space.mode(), self.space.fock_level(i)) {
                (Some(m), Some(n)) => n < m.tail_start(),
                _ => true,
            })
            .collect();
        let mut err = 0.0;
        for &c in &interior {
            for &r in &interior {
                let target = if r == c { 1.0 } else { 0.0 };
                err += (prod[(r, c)] - C64::from(target)).norm_sqr();
            }
        }
        err.sqrt()
    }

    pub fn mark_hermitian(mut self) -> Result<Self> {
        let e = self.hermiticity_error();
        if e >= FLAG_TOL {
            return Err(SdsError::Verification(format!(
                "operator is not Hermitian: ‖A−A†‖ = {e:.3e}"
            )));
        }
        self.hermitian = true;
        Ok(self)
    }

    pub fn mark_unitary(mut self) -> Result<Self> {
        let e = self.unitarity_error();
        if e >= FLAG_TOL {
            return Err(SdsError::Verification(format!(
                "operator is not unitary: ‖U†U−I‖ = {e:.3e}"
            )));
        }
        self.unitary = true;
        Ok(self)
    }

    pub fn adjoint(&self) -> Self {
        Self {
            space: self.space,
            matrix: self.matrix.adjoint(),
            hermitian: self.hermitian,
            unitary: self.unitary,
        }
    }

    /// `self · other`; the product of two unitaries stays flagged unitary.
    pub fn compose(&self, other: &LinOp) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(SdsError::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(Self {
            space: self.space,
            matrix: &self.matrix * &other.matrix,
            hermitian: false,
            unitary: self.unitary && other.unitary,
        })
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::from_parts(self.space, &self.matrix * s)
    }

    pub fn add(&self, other: &LinOp) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(SdsError::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(Self::from_parts(self.space, &self.matrix + &other.matrix))
    }

    pub fn commutator(&self, other: &LinOp) -> Result<Self> {
        let ab = self.compose(other)?;
        let ba = other.compose(self)?;
        Ok(Self::from_parts(self.space, ab.matrix - ba.matrix))
    }

    pub fn to_sparse(&self) -> SparseOp {
        SparseOp::from_dense(&self.matrix)
    }
}

/// `⟨ψ|A|ψ⟩`.
pub fn expectation(ket: &Ket, op: &LinOp) -> Result<C64> {
    ket.check_same(op.dim())?;
    Ok(ket.amplitudes.dotc(&(&op.matrix * &ket.amplitudes)))
}

/// `|⟨a|b⟩|²`, clamped to `[0, 1]`.
pub fn fidelity(a: &Ket, b: &Ket) -> Result<f64> {
    let ov = a.inner(b)?;
    Ok(ov.norm_sqr().clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fidelity_basics() {
        let m = ModeSpace::new(8).unwrap();
        let v0 = Ket::vacuum(m);
        let v1 = Ket::fock(m, 1).unwrap();
        assert_eq!(fidelity(&v0, &v0).unwrap(), 1.0);
        assert_eq!(fidelity(&v0, &v1).unwrap(), 0.0);
        let s = SpinSpace::new(2).unwrap();
        assert!(matches!(
            fidelity(&v0, &Ket::basis(s, 0).unwrap()),
            Err(SdsError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn global_phase_is_invisible() {
        let m = ModeSpace::new(4).unwrap();
        let v = DVector::from_vec(vec![
            C64::new(0.3, 0.1),
            C64::new(-0.2, 0.5),
            C64::new(0.0, 0.4),
            C64::new(0.1, 0.0),
        ]);
        let a = Ket::new(m, v.clone()).unwrap();
        let b = Ket::new(m, v * C64::from_polar(1.0, 0.7)).unwrap();
        assert!((fidelity(&a, &b).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn tail_check_flags_top_levels() {
        let m = ModeSpace::new(20).unwrap();
        let top = Ket::fock(m, 19).unwrap();
        assert!(matches!(
            top.check_truncation(1e-8),
            Err(SdsError::Truncation { n_max: 20, .. })
        ));
        assert!(Ket::fock(m, 18).unwrap().check_truncation(1e-8).is_ok());
    }

    #[test]
    fn flags_are_verified() {
        let m = ModeSpace::new(5).unwrap();
        let a = destroy(m);
        assert!(a.clone().mark_hermitian().is_err());
        assert!(a.clone().mark_unitary().is_err());
        let x = quadratures(m).0;
        assert!(x.is_hermitian());
    }

    #[test]
    fn amplitude_dump_round_trip() {
        let h = HybridSpace::spin_mode(1, 4).unwrap();
        let w = [C64::new(0.6, 0.0), C64::new(0.0, 0.8)];
        let k = Ket::product(h, &w, &Ket::vacuum(h.mode())).unwrap();
        let json = serde_json::to_string(&k.to_dump()).unwrap();
        let back: AmplitudeDump = serde_json::from_str(&json).unwrap();
        assert_eq!(Ket::from_dump(&back).unwrap(), k);
        assert!(json.contains("\"kind\":\"hybrid\""));
    }
}
