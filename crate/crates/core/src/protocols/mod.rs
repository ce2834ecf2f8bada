//! Time-reversal readout sequences, their outcome distributions and Fisher information.

mod ancilla;
mod cfi;
mod wigner;

pub use ancilla::*;
pub use cfi::*;
pub use wigner::*;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SdsError};
use crate::hilbert::{
    displacement_matrix, grow_n_max, n_max_for_squeezing, spin_matrix, spin_rotation, squeeze_matrix, Axis,
    HybridSpace, Ket, ModeSpace, SpinSpace, DEFAULT_TAIL_THRESHOLD,
};
use crate::metrology::{ln_factorial, spin_states, DickeWeights, SpinStateKind};
use crate::C64;

const PROB_TOL: f64 = 1e-10;

/// Outcome labels with their probabilities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDistribution {
    pub labels: Vec<String>,
    pub probabilities: Vec<f64>,
}

impl OutcomeDistribution {
    pub fn new(labels: Vec<String>, probabilities: Vec<f64>) -> Result<Self> {
        if labels.len() != probabilities.len() {
            return Err(SdsError::DimensionMismatch {
                expected: labels.len(),
                found: probabilities.len(),
            });
        }
        let d = Self { labels, probabilities };
        d.validate()?;
        Ok(d)
    }

    /// Dicke outcomes `m = −N/2..N/2`.
    pub fn dicke(n_spins: usize, probabilities: Vec<f64>) -> Result<Self> {
        let labels = (0..=n_spins)
            .map(|k| dicke_label(k as f64 - n_spins as f64 / 2.0))
            .collect();
        Self::new(labels, probabilities)
    }

    pub fn validate(&self) -> Result<()> {
        let total: f64 = self.probabilities.iter().sum();
        if self.probabilities.iter().any(|&p| p < -PROB_TOL || !p.is_finite()) || (total - 1.0).abs() > PROB_TOL {
            return Err(SdsError::Verification(format!(
                "invalid outcome distribution (sum = {total})"
            )));
        }
        Ok(())
    }

    pub fn get(&self, label: &str) -> Option<f64> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| self.probabilities[i])
    }

    /// Probability of Dicke outcome `m`.
    pub fn dicke_probability(&self, m: f64) -> Option<f64> {
        self.get(&dicke_label(m))
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }
}

/// `"-3/2"`, `"0"`, `"2"`, ...
pub fn dicke_label(m: f64) -> String {
    let twice = (2.0 * m).round() as i64;
    if twice % 2 == 0 {
        format!("{}", twice / 2)
    } else {
        format!("{twice}/2")
    }
}

/// `⟨α|β⟩` for coherent states.
pub fn coherent_overlap(a: C64, b: C64) -> C64 {
    coherent_overlap_exponent(a, b).exp()
}

/// `ln⟨α|β⟩ = −½|α − β|² + i Im(α*β)`.
fn coherent_overlap_exponent(a: C64, b: C64) -> C64 {
    C64::new(-0.5 * (a - b).norm_sqr(), (a.conj() * b).im)
}

/// `e^z − 1` without cancellation for small `z`.
fn expm1_complex(z: C64) -> C64 {
    let (s, c) = z.im.sin_cos();
    let half = (0.5 * z.im).sin();
    C64::new(z.re.exp_m1() * c - 2.0 * half * half, z.re.exp() * s)
}

/// Spin-dependent displacement `β cosh(ζm) − β* sinh(ζm)` produced by the
/// sequence `S(ζJz) D(β) S(−ζJz)` in block `m`.
pub fn braided_amplitude(beta: C64, zeta: f64, m: f64) -> C64 {
    beta * (zeta * m).cosh() - beta.conj() * (zeta * m).sinh()
}

/// Simulates `S(ζJz) D(β) S(−ζJz) |0⟩|ψ₀⟩` block by block with dense exponentials.
pub fn time_reversal_state(w: &DickeWeights, zeta: f64, beta: C64, space: HybridSpace) -> Result<Ket> {
    if space.spin().n_spins() != w.n_spins() || space.ancillas() != 0 {
        return Err(SdsError::InvalidParameter(
            "time-reversal state needs a spin ⊗ mode space matching the weights".into(),
        ));
    }
    let n = space.mode().n_max();
    let disp = displacement_matrix(n, beta);
    let mut amps = DVector::zeros(space.dim());
    for (k, c) in w.weights().iter().enumerate() {
        if c.norm() == 0.0 {
            continue;
        }
        let m = space.spin().m(k);
        let s = squeeze_matrix(n, C64::from(zeta * m));
        // S(−ζm) = S(ζm)†
        let reference = s.adjoint().column(0).into_owned();
        check_tail(&reference, n)?;
        let displaced = &disp * reference;
        check_tail(&displaced, n)?;
        let out = &s * displaced;
        check_tail(&out, n)?;
        amps.rows_mut(k * n, n).copy_from(&(out * *c));
    }
    Ket::new(space, amps)
}

fn check_tail(v: &DVector<C64>, n_max: usize) -> Result<()> {
    let start = ModeSpace::new(n_max)?.tail_start();
    let tail: f64 = v.iter().skip(start).map(|a| a.norm_sqr()).sum();
    if tail > DEFAULT_TAIL_THRESHOLD {
        return Err(SdsError::Truncation {
            tail,
            threshold: DEFAULT_TAIL_THRESHOLD,
            n_max,
        });
    }
    Ok(())
}

/// Runs `f` with growing truncation until it stops reporting truncation errors.
pub fn with_truncation_growth<T>(n_max: usize, limit: usize, mut f: impl FnMut(usize) -> Result<T>) -> Result<T> {
    let mut n = n_max;
    loop {
        match f(n) {
            Err(SdsError::Truncation { .. }) if grow_n_max(n) <= limit => n = grow_n_max(n),
            other => return other,
        }
    }
}

/// Default Fock truncation for a time-reversal simulation.
pub fn time_reversal_n_max(n_spins: usize, zeta: f64, beta: C64) -> usize {
    let z = zeta.abs() * n_spins as f64 / 2.0;
    let amp = beta.norm() * z.exp();
    precise_n_max(z, amp)
}

/// Truncation keeping squeezing `z` plus displacement `amp` accurate to near machine precision.
pub fn precise_n_max(z: f64, amp: f64) -> usize {
    let squeeze = (2.0 * n_max_for_squeezing(z) as f64).max(14.0 * (2.0 * z.abs()).exp());
    squeeze as usize + (4.0 * amp * amp + 20.0 * amp) as usize + 8
}

pub const MAX_SIMULATION_N_MAX: usize = 4000;

/// Dicke-basis distribution of `R ⊗ 𝟙` applied to a spin ⊗ mode ket.
pub fn measure_after_rotation(ket: &Ket, rotation: &DMatrix<C64>) -> Result<OutcomeDistribution> {
    let crate::hilbert::Space::Hybrid(h) = ket.space() else {
        return Err(SdsError::InvalidParameter("measurement needs a spin ⊗ mode ket".into()));
    };
    let d = h.spin().dim();
    if rotation.nrows() != d || h.ancillas() != 0 {
        return Err(SdsError::DimensionMismatch {
            expected: d,
            found: rotation.nrows(),
        });
    }
    let n = h.mode().dim();
    let blocks: Vec<DVector<C64>> = (0..d).map(|k| ket.mode_block(k)).collect::<Result<_>>()?;
    let probs = (0..d)
        .map(|mp| {
            let mut v = DVector::<C64>::zeros(n);
            for (k, b) in blocks.iter().enumerate() {
                v.axpy(rotation[(mp, k)], b, C64::new(1.0, 0.0));
            }
            v.norm_squared()
        })
        .collect();
    OutcomeDistribution::dicke(h.spin().n_spins(), probs)
}

/// Exact distribution via coherent-state overlaps: the braided state is
/// `Σ_m c_m |β̂_m⟩|m⟩`, so no Fock truncation is involved.
pub fn measure_braided_exact(
    w: &DickeWeights,
    zeta: f64,
    beta: C64,
    rotation: &DMatrix<C64>,
) -> Result<OutcomeDistribution> {
    let d = w.n_spins() + 1;
    if rotation.nrows() != d {
        return Err(SdsError::DimensionMismatch {
            expected: d,
            found: rotation.nrows(),
        });
    }
    let amps: Vec<C64> = (0..d).map(|k| braided_amplitude(beta, zeta, w.m(k))).collect();
    // ⟨β̂_k|β̂_l⟩ − 1, so that outcomes dark at zero signal keep full relative precision
    let gram = DMatrix::from_fn(d, d, |k, l| expm1_complex(coherent_overlap_exponent(amps[k], amps[l])));
    let probs = (0..d)
        .map(|mp| {
            let a: Vec<C64> = (0..d).map(|k| rotation[(mp, k)] * w.weights()[k]).collect();
            let mut p = a.iter().sum::<C64>().norm_sqr();
            for k in 0..d {
                if a[k].norm() == 0.0 {
                    continue;
                }
                for l in 0..d {
                    p += (a[k].conj() * a[l] * gram[(k, l)]).re;
                }
            }
            p.max(0.0)
        })
        .collect();
    OutcomeDistribution::dicke(w.n_spins(), probs)
}

/// `d^{N/2}_{m',m}(π/2)` from the factorial sum, i.e. the matrix of `exp(+iπ/2 J_y)`.
pub fn wigner_d_half_pi(n_spins: usize) -> DMatrix<f64> {
    let j2 = n_spins as i64;
    let d = n_spins + 1;
    let use_logs = n_spins > 20;
    let fact = |n: i64| -> f64 { (2..=n).map(|i| i as f64).product() };
    DMatrix::from_fn(d, d, |row, col| {
        // twice-magnetizations keep everything integral
        let (mp2, m2) = (2 * row as i64 - j2, 2 * col as i64 - j2);
        let jp_mp = (j2 + mp2) / 2;
        let jm_mp = (j2 - mp2) / 2;
        let jp_m = (j2 + m2) / 2;
        let jm_m = (j2 - m2) / 2;
        let diff = (mp2 - m2) / 2;
        let k_min = 0.max(diff);
        let k_max = jp_mp.min(jm_m);
        let mut total = 0.0;
        for k in k_min..=k_max {
            let sign = if (k - diff).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            let term = if use_logs {
                let ln = 0.5
                    * (ln_factorial(jp_m as usize)
                        + ln_factorial(jm_m as usize)
                        + ln_factorial(jp_mp as usize)
                        + ln_factorial(jm_mp as usize))
                    - ln_factorial((jp_mp - k) as usize)
                    - ln_factorial(k as usize)
                    - ln_factorial((jm_m - k) as usize)
                    - ln_factorial((k - diff) as usize)
                    - 0.5 * j2 as f64 * std::f64::consts::LN_2;
                ln.exp()
            } else {
                (fact(jp_m) * fact(jm_m) * fact(jp_mp) * fact(jm_mp)).sqrt()
                    / (fact(jp_mp - k) * fact(k) * fact(jm_m - k) * fact(k - diff))
                    * 0.5f64.powf(j2 as f64 / 2.0)
            };
            total += sign * term;
        }
        total
    })
}

fn complexify(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(C64::from)
}

/// `exp(+iπ/2 J_y)` for a single spin.
fn half_pi_y(spin: SpinSpace) -> DMatrix<C64> {
    spin_rotation(spin, Axis::Y, -std::f64::consts::FRAC_PI_2).into_matrix()
}

/// `exp(−iφJz) exp(−iπJx²/2) exp(iφJz)` with `φ = (−1)^{N/2} π/(2N)`.
pub fn rotated_twisting_unitary(n_spins: usize) -> Result<DMatrix<C64>> {
    if !n_spins.is_multiple_of(2) {
        return Err(SdsError::UnsupportedParity(n_spins));
    }
    let spin = SpinSpace::new(n_spins)?;
    let sign = if (n_spins / 2).is_multiple_of(2) { 1.0 } else { -1.0 };
    let phi = sign * std::f64::consts::PI / (2.0 * n_spins as f64);
    let jx = spin_matrix(spin, Axis::X);
    let twist = crate::hilbert::expm_antihermitian(&(&jx * &jx * C64::new(0.0, -std::f64::consts::FRAC_PI_2)));
    let rz = |angle: f64| spin_rotation(spin, Axis::Z, angle).into_matrix();
    Ok(rz(phi) * twist * rz(-phi))
}

/// Simulated single-spin protocol: time reversal, then `exp(+iπ/2 J_y)`, then Dicke readout.
pub fn single_spin_probability(zeta: f64, beta: C64) -> Result<OutcomeDistribution> {
    let w = spin_states(SpinStateKind::Ghz, 1)?;
    let rot = half_pi_y(SpinSpace::new(1)?);
    with_truncation_growth(time_reversal_n_max(1, zeta, beta), MAX_SIMULATION_N_MAX, |n| {
        let space = HybridSpace::spin_mode(1, n)?;
        measure_after_rotation(&time_reversal_state(&w, zeta, beta, space)?, &rot)
    })
}

/// Exact single-spin distribution through coherent overlaps.
pub fn single_spin_probability_exact(zeta: f64, beta: C64) -> Result<OutcomeDistribution> {
    let w = spin_states(SpinStateKind::Ghz, 1)?;
    measure_braided_exact(&w, zeta, beta, &half_pi_y(SpinSpace::new(1)?))
}

/// `P_{1/2} = ½[1 + e^{−|β|²(cosh ζ − 1)} cos(2 β_re β_im sinh ζ)]`.
pub fn single_spin_closed_form(zeta: f64, beta: C64) -> f64 {
    0.5 * (1.0 + (-beta.norm_sqr() * (zeta.cosh() - 1.0)).exp() * (2.0 * beta.re * beta.im * zeta.sinh()).cos())
}

/// Simulated GHZ protocol with the rotated one-axis-twisting readout (even `N` only).
pub fn ghz_protocol_probability(n_spins: usize, zeta: f64, beta: C64) -> Result<OutcomeDistribution> {
    let u = rotated_twisting_unitary(n_spins)?;
    let w = spin_states(SpinStateKind::Ghz, n_spins)?;
    with_truncation_growth(time_reversal_n_max(n_spins, zeta, beta), MAX_SIMULATION_N_MAX, |n| {
        let space = HybridSpace::spin_mode(n_spins, n)?;
        measure_after_rotation(&time_reversal_state(&w, zeta, beta, space)?, &u)
    })
}

/// GHZ protocol through coherent overlaps.
pub fn ghz_protocol_probability_exact(n_spins: usize, zeta: f64, beta: C64) -> Result<OutcomeDistribution> {
    let u = rotated_twisting_unitary(n_spins)?;
    measure_braided_exact(&spin_states(SpinStateKind::Ghz, n_spins)?, zeta, beta, &u)
}

/// Coherent-spin-state protocol with the Wigner-d rotation, via coherent overlaps.
/// Valid for any `ζ` and `N`.
pub fn coherent_protocol_distribution(n_spins: usize, zeta: f64, beta: C64) -> Result<OutcomeDistribution> {
    let w = spin_states(SpinStateKind::CoherentX, n_spins)?;
    measure_braided_exact(&w, zeta, beta, &complexify(&wigner_d_half_pi(n_spins)))
}

/// Coherent-spin-state protocol by explicit three-step simulation on a truncated mode.
pub fn coherent_protocol_simulated(n_spins: usize, zeta: f64, beta: C64) -> Result<OutcomeDistribution> {
    let w = spin_states(SpinStateKind::CoherentX, n_spins)?;
    let rot = complexify(&wigner_d_half_pi(n_spins));
    with_truncation_growth(time_reversal_n_max(n_spins, zeta, beta), MAX_SIMULATION_N_MAX, |n| {
        let space = HybridSpace::spin_mode(n_spins, n)?;
        measure_after_rotation(&time_reversal_state(&w, zeta, beta, space)?, &rot)
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionRow {
    #[serde(rename = "N")]
    pub n_spins: usize,
    pub zeta: f64,
    pub g: f64,
    pub beta_re: f64,
    pub beta_im: f64,
    pub label: String,
    pub probability: f64,
}

impl DistributionRow {
    pub fn from_distribution(n_spins: usize, zeta: f64, g: f64, beta: C64, d: &OutcomeDistribution) -> Vec<Self> {
        d.labels
            .iter()
            .zip(&d.probabilities)
            .map(|(label, &probability)| Self {
                n_spins,
                zeta,
                g,
                beta_re: beta.re,
                beta_im: beta.im,
                label: label.clone(),
                probability,
            })
            .collect()
    }
}
