//! Two-ancilla readout for joint estimation of `(β_re, β_im)` with one system spin.
//!
//! The sequence follows the σx-conditioned form: ancillas start in `|↑⟩`, the
//! time-reversal sequence is wrapped in `D(±gσx⁽²⁾)` and `D(±igσx⁽¹⁾)`, and each
//! ancilla is read out in the σz basis. Outcome `+` means `|↑⟩`. Conjugating
//! every ancilla operation by [`ancilla_basis_rotation`] gives the σz-conditioned
//! form with ancillas prepared and read out in `|+⟩`; probabilities coincide.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{braided_amplitude, cfim_extrapolated, check_tail, precise_n_max, CfiResult, OutcomeDistribution};
use crate::error::{Result, SdsError};
use crate::hilbert::{expm_chebyshev_apply, grow_n_max, SparseOp};
use crate::C64;

/// Joint ancilla outcomes, ancilla 1 first.
pub const ANCILLA_LABELS: [&str; 4] = ["++", "+-", "-+", "--"];

const EXPM_TOL: f64 = 1e-13;
const MAX_N_MAX: usize = 6000;

/// Hadamard: maps σx-conditioned displacements and `|↑⟩` to the σz-conditioned form and `|+⟩`.
pub fn ancilla_basis_rotation() -> DMatrix<C64> {
    let h = C64::from(std::f64::consts::FRAC_1_SQRT_2);
    DMatrix::from_row_slice(2, 2, &[h, h, h, -h])
}

/// Result of one ancilla readout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AncillaReadout {
    /// Probability of `+` on ancilla 1 and ancilla 2.
    pub p_plus: [f64; 2],
    pub joint: OutcomeDistribution,
}

impl AncillaReadout {
    fn from_joint(joint: [f64; 4]) -> Result<Self> {
        Self::with_marginals([joint[0] + joint[1], joint[0] + joint[2]], joint)
    }

    fn with_marginals(p_plus: [f64; 2], joint: [f64; 4]) -> Result<Self> {
        Ok(Self {
            p_plus,
            joint: OutcomeDistribution::new(ANCILLA_LABELS.iter().map(|s| s.to_string()).collect(), joint.to_vec())?,
        })
    }

    /// Two-outcome distribution of ancilla `which` (1 or 2).
    pub fn marginal(&self, which: usize) -> Result<OutcomeDistribution> {
        let p = self.p_plus[which - 1];
        OutcomeDistribution::new(vec!["+".into(), "-".into()], vec![p, 1.0 - p])
    }
}

/// Per-block squeezing of the system spin: `−ζ` on `|↑⟩` and `+ζ` on `|↓⟩` after braiding.
fn block_zeta(zeta: f64, k: usize) -> f64 {
    // k = 0 is m = −1/2
    if k == 0 {
        -zeta
    } else {
        zeta
    }
}

/// Large-squeezing limit `½[1 + cos²φᵢ]`, `φ₁ = 2g e^ζ β_re`, `φ₂ = −2g e^ζ β_im`.
pub fn ancilla_closed_form(zeta: f64, g: f64, beta: C64) -> [f64; 2] {
    let phi1 = 2.0 * g * zeta.exp() * beta.re;
    let phi2 = -2.0 * g * zeta.exp() * beta.im;
    [0.5 * (1.0 + phi1.cos().powi(2)), 0.5 * (1.0 + phi2.cos().powi(2))]
}

/// Exact readout from the braided displacements, keeping the `e^{−ζ}` blocks.
pub fn ancilla_probabilities_exact(zeta: f64, g: f64, beta: C64) -> Result<AncillaReadout> {
    let mut joint = [0.0; 4];
    let mut p_plus = [0.0; 2];
    for k in 0..2 {
        let m = k as f64 - 0.5;
        let bh = braided_amplitude(beta, 2.0 * zeta, m);
        let p1 = (2.0 * g * bh.re).cos().powi(2);
        let p2 = (2.0 * g * bh.im).cos().powi(2);
        p_plus[0] += 0.5 * p1;
        p_plus[1] += 0.5 * p2;
        let q = [[p1 * p2, p1 * (1.0 - p2)], [(1.0 - p1) * p2, (1.0 - p1) * (1.0 - p2)]];
        for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            joint[2 * i + j] += 0.5 * q[i][j];
        }
    }
    // marginals kept separate so each depends on one quadrature only
    AncillaReadout::with_marginals(p_plus, joint)
}

/// `(P₊¹, P₊²)` by simulating the full sequence.
pub fn ancilla_multiparam_distribution(zeta: f64, g: f64, beta: C64) -> Result<[f64; 2]> {
    Ok(AncillaSimulator::new(zeta, g)?.readout(beta)?.p_plus)
}

/// Mean occupation of `S(−ζĴz)D(−igσz⁽¹⁾)D(−gσz⁽²⁾)|0⟩|+⟩|+⟩|+⟩`, by direct expectation.
pub fn reference_state_occupation_mp(zeta: f64, g: f64) -> Result<f64> {
    Ok(AncillaSimulator::new(zeta, g)?.reference_occupation())
}

/// Ancilla CFIM from the two single-ancilla distributions, extrapolated to `β → 0`.
pub fn ancilla_cfim(readout: impl Fn(C64) -> Result<AncillaReadout>, zeta: f64, g: f64) -> Result<CfiResult> {
    let scale = 1.0 / (2.0 * g * zeta.abs().exp()).max(1e-300);
    cfim_extrapolated(
        |b| {
            let r = readout(b)?;
            Ok(vec![r.marginal(1)?, r.marginal(2)?])
        },
        scale,
    )
}

/// Large-squeezing limit of the ancilla CFIM diagonal, `8g²e^{2ζ}`.
pub fn ancilla_cfim_limit(zeta: f64, g: f64) -> f64 {
    8.0 * g * g * (2.0 * zeta).exp()
}

/// Sparse mode generators and the Chebyshev exponentials built from them.
struct ModeOps {
    a: SparseOp,
    ad: SparseOp,
    a2: SparseOp,
    ad2: SparseOp,
    bound1: f64,
    bound2: f64,
}

impl ModeOps {
    fn new(n: usize) -> Self {
        let a = SparseOp::from_triplets(n, (1..n).map(|k| (k - 1, k, C64::from((k as f64).sqrt()))).collect());
        let a2 = SparseOp::from_triplets(
            n,
            (2..n)
                .map(|k| (k - 2, k, C64::from((k as f64 * (k - 1) as f64).sqrt())))
                .collect(),
        );
        let (ad, ad2) = (a.adjoint(), a2.adjoint());
        Self {
            bound1: a.row_sum_bound() + ad.row_sum_bound(),
            bound2: a2.row_sum_bound() + ad2.row_sum_bound(),
            ad,
            ad2,
            a,
            a2,
        }
    }

    fn n(&self) -> usize {
        self.a.dim()
    }

    /// `D(γ)v`.
    fn displace(&self, gamma: C64, v: &DVector<C64>) -> Result<DVector<C64>> {
        if gamma.norm() == 0.0 {
            return Ok(v.clone());
        }
        let i = C64::i();
        // H = i(γa† − γ*a), D = exp(−iH)
        let mv = |x: &[C64], y: &mut [C64]| {
            y.iter_mut().for_each(|e| *e = C64::new(0.0, 0.0));
            self.ad.mul_acc(i * gamma, x, y);
            self.a.mul_acc(-i * gamma.conj(), x, y);
        };
        let out = expm_chebyshev_apply(mv, 1.0, v, gamma.norm() * self.bound1, EXPM_TOL)?;
        check_tail(&out, self.n())?;
        Ok(out)
    }

    /// `S(r)v` for real `r`.
    fn squeeze(&self, r: f64, v: &DVector<C64>) -> Result<DVector<C64>> {
        if r == 0.0 {
            return Ok(v.clone());
        }
        let c = C64::new(0.0, 0.5 * r);
        let mv = |x: &[C64], y: &mut [C64]| {
            y.iter_mut().for_each(|e| *e = C64::new(0.0, 0.0));
            self.a2.mul_acc(c, x, y);
            self.ad2.mul_acc(-c, x, y);
        };
        let out = expm_chebyshev_apply(mv, 1.0, v, 0.5 * r.abs() * self.bound2, EXPM_TOL)?;
        check_tail(&out, self.n())?;
        Ok(out)
    }
}

/// Block-by-block simulator of the two-ancilla sequence.
///
/// The system spin starts in `|+⟩`, so the hybrid state splits into eight mode
/// blocks labelled by the spin and the two σx eigenvalues. The signal-independent
/// reference blocks are prepared once and reused for every `β`.
pub struct AncillaSimulator {
    zeta: f64,
    g: f64,
    ops: ModeOps,
    /// Indexed by `4k + 2i + j` with `s₁ = ±1` at `i = 0, 1` and likewise `s₂`.
    references: Vec<DVector<C64>>,
}

const SIGNS: [f64; 2] = [1.0, -1.0];

impl AncillaSimulator {
    pub fn new(zeta: f64, g: f64) -> Result<Self> {
        let amp = std::f64::consts::SQRT_2 * g * zeta.abs().exp() + 1.0;
        let mut n = precise_n_max(zeta, amp);
        loop {
            match Self::with_n_max(zeta, g, n) {
                Err(SdsError::Truncation { .. }) if grow_n_max(n) <= MAX_N_MAX => n = grow_n_max(n),
                other => return other,
            }
        }
    }

    pub fn with_n_max(zeta: f64, g: f64, n_max: usize) -> Result<Self> {
        if !(zeta.is_finite() && g.is_finite()) {
            return Err(SdsError::InvalidParameter("ζ and g must be finite".into()));
        }
        let ops = ModeOps::new(n_max);
        let mut vac = DVector::zeros(n_max);
        vac[0] = C64::new(1.0, 0.0);
        let jobs: Vec<(usize, f64, f64)> = (0..2)
            .flat_map(|k| {
                SIGNS
                    .iter()
                    .flat_map(move |&s1| SIGNS.iter().map(move |&s2| (k, s1, s2)))
            })
            .collect();
        let references = jobs
            .par_iter()
            .map(|&(k, s1, s2)| {
                let v = ops.displace(C64::new(-g * s2, 0.0), &vac)?;
                let v = ops.displace(C64::new(0.0, -g * s1), &v)?;
                ops.squeeze(-block_zeta(zeta, k), &v)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            zeta,
            g,
            ops,
            references,
        })
    }

    pub fn n_max(&self) -> usize {
        self.ops.n()
    }

    /// Occupation of the reference state, averaged over the eight equally weighted blocks.
    pub fn reference_occupation(&self) -> f64 {
        self.references
            .iter()
            .map(|v| v.iter().enumerate().map(|(n, c)| n as f64 * c.norm_sqr()).sum::<f64>())
            .sum::<f64>()
            / self.references.len() as f64
    }

    pub fn readout(&self, beta: C64) -> Result<AncillaReadout> {
        let finals = self
            .references
            .par_iter()
            .enumerate()
            .map(|(idx, r)| {
                let (k, s1, s2) = (idx / 4, SIGNS[(idx / 2) % 2], SIGNS[idx % 2]);
                let v = self.ops.displace(beta, r)?;
                let v = self.ops.squeeze(block_zeta(self.zeta, k), &v)?;
                let v = self.ops.displace(C64::new(0.0, self.g * s1), &v)?;
                self.ops.displace(C64::new(self.g * s2, 0.0), &v)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut joint = [0.0; 4];
        for (o, slot) in joint.iter_mut().enumerate() {
            // ⟨↑|s⟩ = 1/√2, ⟨↓|s⟩ = s/√2
            let (down1, down2) = (o / 2 == 1, o % 2 == 1);
            for k in 0..2 {
                let mut acc = DVector::<C64>::zeros(self.n_max());
                for i in 0..2 {
                    for j in 0..2 {
                        let mut sign = 1.0;
                        if down1 {
                            sign *= SIGNS[i];
                        }
                        if down2 {
                            sign *= SIGNS[j];
                        }
                        acc.axpy(C64::from(sign), &finals[4 * k + 2 * i + j], C64::new(1.0, 0.0));
                    }
                }
                // spin weight ½, ancilla amplitudes ½ in and ½ out
                *slot += acc.norm_squared() / 32.0;
            }
        }
        AncillaReadout::from_joint(joint)
    }
}
