//! Closed-form QFIMs for spin-dependent squeezed references, SQL/HL limits and
//! finite-difference oracles.

mod numeric;
mod table;

pub use numeric::*;
pub use table::*;

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SdsError};
use crate::C64;

const NORM_TOL: f64 = 1e-12;
const SYM_TOL: f64 = 1e-12;

/// Dicke-basis coefficients `c_m`, indexed `m = −N/2..N/2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DickeWeights {
    n_spins: usize,
    weights: Vec<C64>,
    symmetric: bool,
}

impl DickeWeights {
    /// Normalizes `weights`, which must have length `N + 1`.
    pub fn new(n_spins: usize, weights: Vec<C64>) -> Result<Self> {
        if n_spins == 0 {
            return Err(SdsError::InvalidParameter("need at least one spin".into()));
        }
        if weights.len() != n_spins + 1 {
            return Err(SdsError::DimensionMismatch {
                expected: n_spins + 1,
                found: weights.len(),
            });
        }
        let norm = weights.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(SdsError::InvalidParameter(
                "Dicke weights must be nonzero and finite".into(),
            ));
        }
        let weights: Vec<C64> = weights.into_iter().map(|c| c / norm).collect();
        let symmetric = (0..=n_spins).all(|k| (weights[k].norm() - weights[n_spins - k].norm()).abs() < SYM_TOL);
        Ok(Self {
            n_spins,
            weights,
            symmetric,
        })
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn weights(&self) -> &[C64] {
        &self.weights
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn m(&self, k: usize) -> f64 {
        k as f64 - self.n_spins as f64 / 2.0
    }

    /// `(m, |c_m|²)` pairs.
    pub fn populations(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.weights.iter().enumerate().map(|(k, c)| (self.m(k), c.norm_sqr()))
    }

    pub fn is_normalized(&self) -> bool {
        (self.populations().map(|(_, p)| p).sum::<f64>() - 1.0).abs() < NORM_TOL
    }

    pub(crate) fn require_symmetric(&self) -> Result<()> {
        if self.symmetric {
            Ok(())
        } else {
            Err(SdsError::NonSymmetricWeights)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpinStateKind {
    Ghz,
    CoherentX,
}

impl std::str::FromStr for SpinStateKind {
    type Err = SdsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ghz" => Ok(Self::Ghz),
            "coherent_x" | "coherent" => Ok(Self::CoherentX),
            other => Err(SdsError::InvalidParameter(format!("unknown spin state kind {other:?}"))),
        }
    }
}

fn ln_binomial(n: usize, k: usize) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

pub(crate) fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

pub fn spin_states(kind: SpinStateKind, n_spins: usize) -> Result<DickeWeights> {
    if n_spins == 0 {
        return Err(SdsError::InvalidParameter("need at least one spin".into()));
    }
    let w = match kind {
        SpinStateKind::Ghz => {
            let mut w = vec![C64::new(0.0, 0.0); n_spins + 1];
            w[0] = C64::from(std::f64::consts::FRAC_1_SQRT_2);
            w[n_spins] = C64::from(std::f64::consts::FRAC_1_SQRT_2);
            w
        }
        SpinStateKind::CoherentX => {
            let half_ln2n = 0.5 * n_spins as f64 * std::f64::consts::LN_2;
            (0..=n_spins)
                .map(|k| C64::from((0.5 * ln_binomial(n_spins, k) - half_ln2n).exp()))
                .collect()
        }
    };
    DickeWeights::new(n_spins, w)
}

/// `⟨n⟩ = Σ_m |c_m|² sinh²(ζm)`; equals `2Σ_{m>0}|c_m|² sinh²(ζm)` for symmetric weights.
pub fn mode_occupation_sds(w: &DickeWeights, zeta: f64) -> Result<f64> {
    w.require_symmetric()?;
    Ok(w.populations().map(|(m, p)| p * (zeta * m).sinh().powi(2)).sum())
}

/// Phase-insensitive QFI for `|β|`: `4Σ_m |c_m|² cosh(2ζm)`.
pub fn qfi_abs_beta(w: &DickeWeights, zeta: f64) -> Result<f64> {
    w.require_symmetric()?;
    Ok(4.0 * w.populations().map(|(m, p)| p * (2.0 * zeta * m).cosh()).sum::<f64>())
}

/// 2×2 Fisher matrix over `(β_re, β_im)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Qfim {
    pub entries: [[f64; 2]; 2],
}

impl Qfim {
    pub fn from_matrix(m: Matrix2<f64>) -> Self {
        Self {
            entries: [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]],
        }
    }

    pub fn diagonal(a: f64, b: f64) -> Self {
        Self {
            entries: [[a, 0.0], [0.0, b]],
        }
    }

    pub fn matrix(&self) -> Matrix2<f64> {
        Matrix2::new(
            self.entries[0][0],
            self.entries[0][1],
            self.entries[1][0],
            self.entries[1][1],
        )
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i][j]
    }

    /// `Tr(Q⁻¹)`, the multi-parameter Cramér-Rao bound on `V(β_re) + V(β_im)`.
    pub fn trace_inverse(&self) -> f64 {
        match self.matrix().try_inverse() {
            Some(inv) => inv.trace(),
            None => f64::INFINITY,
        }
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        let m = self.matrix();
        let sym = (m + m.transpose()) * 0.5;
        sym.symmetric_eigenvalues().iter().all(|&l| l >= -tol)
    }

    pub fn max_abs_diff(&self, other: &Qfim) -> f64 {
        (self.matrix() - other.matrix()).abs().max()
    }
}

/// `Q = (8⟨n⟩ + 4) 𝟙`.
pub fn qfim_multiparam_sds(w: &DickeWeights, zeta: f64) -> Result<Qfim> {
    let q = qfi_abs_beta(w, zeta)?;
    Ok(Qfim::diagonal(q, q))
}

/// QFIM of the spin-dependent squeezed and displaced reference with `γ_m = 2αm + β`.
/// Accepts any weights.
pub fn qfim_general(w: &DickeWeights, alpha: C64, zeta: f64, beta: C64) -> Qfim {
    // with α = 0 every γ_m equals β and the covariance vanishes identically
    let (k_ii, k_rr, k_ir) = if alpha == C64::new(0.0, 0.0) {
        (0.0, 0.0, 0.0)
    } else {
        let gammas: Vec<(f64, C64)> = w.populations().map(|(m, p)| (p, alpha * (2.0 * m) + beta)).collect();
        let mean_im: f64 = gammas.iter().map(|(p, g)| p * g.im).sum();
        let mean_re: f64 = gammas.iter().map(|(p, g)| p * g.re).sum();
        let cov = |f: &dyn Fn(&C64) -> (f64, f64)| -> f64 {
            gammas
                .iter()
                .map(|(p, g)| {
                    let (x, y) = f(g);
                    p * x * y
                })
                .sum()
        };
        (
            cov(&|g| (g.im - mean_im, g.im - mean_im)),
            cov(&|g| (g.re - mean_re, g.re - mean_re)),
            cov(&|g| (g.im - mean_im, g.re - mean_re)),
        )
    };
    let e_plus: f64 = w.populations().map(|(m, p)| p * (2.0 * zeta * m).exp()).sum();
    let e_minus: f64 = w.populations().map(|(m, p)| p * (-2.0 * zeta * m).exp()).sum();
    let q12 = -4.0 * k_ir;
    Qfim {
        entries: [[4.0 * k_ii + 4.0 * e_plus, q12], [q12, 4.0 * k_rr + 4.0 * e_minus]],
    }
}

/// Re-expresses a Cartesian QFIM in `(|β|, arg β)` coordinates as `JᵀQJ` with
/// `J = ∂(β_re, β_im)/∂(|β|, arg β)`.
pub fn polar_qfim(q: &Qfim, beta: C64) -> Result<Qfim> {
    let r = beta.norm();
    if r == 0.0 {
        // the |β| direction is ill-defined too, so report the isotropic average
        let abs_entry = 0.5 * (q.get(0, 0) + q.get(1, 1));
        return Err(SdsError::DegeneratePhase { abs_entry });
    }
    let (s, c) = beta.arg().sin_cos();
    let j = Matrix2::new(c, -r * s, s, r * c);
    Ok(Qfim::from_matrix(j.transpose() * q.matrix() * j))
}

/// `R = 1/(2⟨n⟩ + 1)`.
pub fn incompatibility_sds(w: &DickeWeights, zeta: f64) -> Result<f64> {
    let n = mode_occupation_sds(w, zeta)?;
    Ok(1.0 / (2.0 * n + 1.0))
}

/// `R = max |eig(i Q⁻¹ D)|` for a QFIM and antisymmetric Uhlmann matrix.
pub fn incompatibility(q: &Qfim, uhlmann: &Matrix2<f64>) -> Result<f64> {
    let inv = q
        .matrix()
        .try_inverse()
        .ok_or_else(|| SdsError::IllConditioned("singular QFIM".into()))?;
    let m = inv * uhlmann;
    // eigenvalues of i·M for real 2×2 M: i·(tr/2 ± sqrt(tr²/4 − det))
    let tr = m.trace();
    let det = m.determinant();
    let disc = C64::from(tr * tr / 4.0 - det).sqrt();
    let l1 = (C64::from(tr / 2.0) + disc) * C64::i();
    let l2 = (C64::from(tr / 2.0) - disc) * C64::i();
    Ok(l1.norm().max(l2.norm()))
}
