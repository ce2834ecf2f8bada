use serde::{Deserialize, Serialize};

use super::{
    coherent_protocol_distribution, coherent_protocol_simulated, ghz_protocol_probability,
    ghz_protocol_probability_exact, single_spin_probability, single_spin_probability_exact, OutcomeDistribution,
};
use crate::error::{Result, SdsError};
use crate::metrology::{Qfim, Setting};
use crate::C64;

/// Probabilities below this are treated as structural zeros.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

/// Signal magnitudes (in units of the protocol scale) used for extrapolation.
pub const EXTRAPOLATION_POINTS: [f64; 3] = [1e-2, 5e-3, 2.5e-3];

/// Ratio of the central-difference half-step to the evaluation point.
const STEP_FRACTION: f64 = 0.125;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum FisherValue {
    Scalar(f64),
    Matrix(Qfim),
}

/// Classical Fisher information extrapolated to vanishing signal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CfiResult {
    pub setting: Setting,
    pub value: FisherValue,
    /// Signal magnitudes where the raw CFI was evaluated.
    pub evaluated_at: Vec<f64>,
    /// Finite-difference half-steps matching `evaluated_at`.
    pub steps: Vec<f64>,
    /// Difference between the extrapolated value and the last first-order estimate.
    pub residual: f64,
}

impl CfiResult {
    pub fn scalar(&self) -> Option<f64> {
        match self.value {
            FisherValue::Scalar(v) => Some(v),
            FisherValue::Matrix(_) => None,
        }
    }

    pub fn matrix(&self) -> Option<&Qfim> {
        match &self.value {
            FisherValue::Matrix(m) => Some(m),
            FisherValue::Scalar(_) => None,
        }
    }
}

/// Readout sequences available for the phase-insensitive setting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    SingleSpin,
    Ghz,
    Coherent,
}

impl std::str::FromStr for Protocol {
    type Err = SdsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single_spin" | "single" => Ok(Self::SingleSpin),
            "ghz" => Ok(Self::Ghz),
            "coherent" | "coherent_x" => Ok(Self::Coherent),
            other => Err(SdsError::InvalidParameter(format!("unknown protocol {other:?}"))),
        }
    }
}

/// How outcome probabilities are obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    /// Coherent-state overlaps, no truncation.
    Exact,
    /// Step-by-step evolution on a truncated Fock space.
    Simulated,
}

/// Outcome distribution of `protocol` for `N` spins.
pub fn protocol_distribution(
    protocol: Protocol,
    n_spins: usize,
    zeta: f64,
    beta: C64,
    route: Route,
) -> Result<OutcomeDistribution> {
    match (protocol, route) {
        (Protocol::SingleSpin, _) if n_spins != 1 => Err(SdsError::InvalidParameter(
            "the single-spin protocol needs N = 1".into(),
        )),
        (Protocol::SingleSpin, Route::Exact) => single_spin_probability_exact(zeta, beta),
        (Protocol::SingleSpin, Route::Simulated) => single_spin_probability(zeta, beta),
        (Protocol::Ghz, Route::Exact) => ghz_protocol_probability_exact(n_spins, zeta, beta),
        (Protocol::Ghz, Route::Simulated) => ghz_protocol_probability(n_spins, zeta, beta),
        (Protocol::Coherent, Route::Exact) => coherent_protocol_distribution(n_spins, zeta, beta),
        (Protocol::Coherent, Route::Simulated) => coherent_protocol_simulated(n_spins, zeta, beta),
    }
}

/// Signal scale keeping the largest braided amplitude `~|β| e^{|ζ|N/2}` near `3|β|/scale`.
///
/// Smaller scales push weak outcomes below [`PROBABILITY_FLOOR`], where they are dropped.
pub fn signal_scale(n_spins: usize, zeta: f64) -> f64 {
    3.0 * (-zeta.abs() * n_spins as f64 / 2.0).exp()
}

fn fisher_term(minus: f64, center: f64, plus: f64, delta: f64) -> Result<Option<f64>> {
    let below = [minus, center, plus].iter().filter(|&&p| p < PROBABILITY_FLOOR).count();
    if below == 3 {
        return Ok(None);
    }
    if center <= 0.0 {
        return Err(SdsError::IllConditioned(format!(
            "outcome vanishes at the evaluation point but not at its neighbours ({minus:.3e}, {plus:.3e})"
        )));
    }
    let d = (plus - minus) / (2.0 * delta);
    Ok(Some(d * d / center))
}

/// Three-point Richardson extrapolation in `b²` for points `b, b/2, b/4`.
fn richardson(values: [f64; 3]) -> (f64, f64) {
    let r1 = (4.0 * values[1] - values[0]) / 3.0;
    let r2 = (4.0 * values[2] - values[1]) / 3.0;
    let v = (16.0 * r2 - r1) / 15.0;
    (v, (v - r2).abs())
}

/// CFI for the signal magnitude, extrapolated to `|β| → 0`.
///
/// `distribution_fn` maps a magnitude to the outcome distribution at fixed phase;
/// `scale` sets the evaluation magnitudes `scale · {1e−2, 5e−3, 2.5e−3}`.
pub fn cfi_abs_beta(distribution_fn: impl Fn(f64) -> Result<OutcomeDistribution>, scale: f64) -> Result<CfiResult> {
    let mut raw = [0.0; 3];
    let mut at = Vec::new();
    let mut steps = Vec::new();
    for (i, f) in EXTRAPOLATION_POINTS.iter().enumerate() {
        let b = f * scale;
        let delta = STEP_FRACTION * b;
        let (lo, mid, hi) = (
            distribution_fn(b - delta)?,
            distribution_fn(b)?,
            distribution_fn(b + delta)?,
        );
        let mut total = 0.0;
        for k in 0..mid.len() {
            if let Some(t) = fisher_term(lo.probabilities[k], mid.probabilities[k], hi.probabilities[k], delta)? {
                total += t;
            }
        }
        raw[i] = total;
        at.push(b);
        steps.push(delta);
    }
    let (value, residual) = richardson(raw);
    Ok(CfiResult {
        setting: Setting::Abs,
        value: FisherValue::Scalar(value.max(0.0)),
        evaluated_at: at,
        steps,
        residual,
    })
}

/// Phase-insensitive CFI of a named protocol at phase `phase`.
pub fn protocol_cfi(protocol: Protocol, n_spins: usize, zeta: f64, phase: f64, route: Route) -> Result<CfiResult> {
    cfi_abs_beta(
        |r| protocol_distribution(protocol, n_spins, zeta, C64::from_polar(r, phase), route),
        signal_scale(n_spins, zeta),
    )
}

/// Classical Fisher matrix for `(β_re, β_im)` along the diagonal `β = b(1+i)/√2`,
/// extrapolated to `β → 0`.
///
/// `distributions_fn` returns one or more independent outcome distributions whose
/// Fisher matrices add.
pub fn cfim_extrapolated(
    distributions_fn: impl Fn(C64) -> Result<Vec<OutcomeDistribution>>,
    scale: f64,
) -> Result<CfiResult> {
    let dir = C64::new(1.0, 1.0) / 2f64.sqrt();
    let mut raw = [[[0.0; 2]; 2]; 3];
    let mut at = Vec::new();
    let mut steps = Vec::new();
    for (i, f) in EXTRAPOLATION_POINTS.iter().enumerate() {
        let b = f * scale;
        let delta = STEP_FRACTION * b;
        let center = dir * b;
        let mid = distributions_fn(center)?;
        let shifts = [C64::new(delta, 0.0), C64::new(0.0, delta)];
        let mut derivs: Vec<Vec<Vec<Option<f64>>>> = Vec::new();
        for s in shifts {
            let (lo, hi) = (distributions_fn(center - s)?, distributions_fn(center + s)?);
            let per_dist = mid
                .iter()
                .zip(lo.iter().zip(&hi))
                .map(|(m, (l, h))| {
                    (0..m.len())
                        .map(|k| {
                            let (pl, pm, ph) = (l.probabilities[k], m.probabilities[k], h.probabilities[k]);
                            fisher_term(pl, pm, ph, delta).map(|t| t.map(|_| (ph - pl) / (2.0 * delta)))
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            derivs.push(per_dist);
        }
        for (d, dist) in mid.iter().enumerate() {
            for k in 0..dist.len() {
                let (Some(dx), Some(dy)) = (derivs[0][d][k], derivs[1][d][k]) else {
                    continue;
                };
                let p = dist.probabilities[k];
                let g = [dx, dy];
                for r in 0..2 {
                    for c in 0..2 {
                        raw[i][r][c] += g[r] * g[c] / p;
                    }
                }
            }
        }
        at.push(b);
        steps.push(delta);
    }
    let mut entries = [[0.0; 2]; 2];
    let mut residual: f64 = 0.0;
    for r in 0..2 {
        for c in 0..2 {
            let (v, res) = richardson([raw[0][r][c], raw[1][r][c], raw[2][r][c]]);
            entries[r][c] = v;
            residual = residual.max(res);
        }
    }
    let sym = 0.5 * (entries[0][1] + entries[1][0]);
    entries[0][1] = sym;
    entries[1][0] = sym;
    Ok(CfiResult {
        setting: Setting::Multi,
        value: FisherValue::Matrix(Qfim { entries }),
        evaluated_at: at,
        steps,
        residual,
    })
}

/// Closed-form CFI of the coherent-spin-state protocol for odd `N ≤ 7`.
pub fn coherent_cfi_closed_form(n_spins: usize, zeta: f64) -> Option<f64> {
    let c = |k: f64| (k * zeta).cosh();
    let s2 = (zeta / 2.0).sinh().powi(2);
    let poly = match n_spins {
        1 => 4.0,
        3 => 0.5 * (9.0 + 8.0 * c(1.0) + 7.0 * c(2.0)),
        5 => (165.0 + 204.0 * c(1.0) + 188.0 * c(2.0) + 52.0 * c(3.0) + 31.0 * c(4.0)) / 32.0,
        7 => {
            (2954.0
                + 4192.0 * c(1.0)
                + 3953.0 * c(2.0)
                + 1712.0 * c(3.0)
                + 1158.0 * c(4.0)
                + 240.0 * c(5.0)
                + 127.0 * c(6.0))
                / 512.0
        }
        _ => return None,
    };
    Some(poly * s2)
}

/// Large-squeezing limit of QFI/CFI for the coherent-spin-state protocol.
pub fn coherent_qfi_cfi_ratio_limit(n_spins: usize) -> f64 {
    let p = 2f64.powi(n_spins as i32);
    p / (p - 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CfiRow {
    pub setting: Setting,
    #[serde(rename = "N")]
    pub n_spins: usize,
    pub zeta: f64,
    pub n_mean: f64,
    pub cfi: f64,
    pub ccrb: f64,
}

impl CfiRow {
    pub fn new(setting: Setting, n_spins: usize, zeta: f64, n_mean: f64, cfi: f64) -> Self {
        Self {
            setting,
            n_spins,
            zeta,
            n_mean,
            cfi,
            ccrb: if cfi > 0.0 { 1.0 / cfi } else { f64::INFINITY },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrology::{mode_occupation_sds, qfi_abs_beta, spin_states, SpinStateKind};

    #[test]
    fn richardson_removes_two_orders() {
        let f = |b: f64| 3.0 + 2.0 * b * b - 7.0 * b.powi(4);
        let (v, _) = richardson([f(0.1), f(0.05), f(0.025)]);
        assert!((v - 3.0).abs() < 1e-13);
    }

    #[test]
    fn single_spin_cfi_is_four_occupations() {
        for zeta in [0.5, 1.0, 2.0] {
            let w = spin_states(SpinStateKind::Ghz, 1).unwrap();
            let want = 4.0 * mode_occupation_sds(&w, zeta).unwrap();
            let got = protocol_cfi(Protocol::SingleSpin, 1, zeta, 0.4, Route::Exact).unwrap();
            assert!(
                (got.scalar().unwrap() / want - 1.0).abs() < 1e-6,
                "{zeta}: {got:?} vs {want}"
            );
            assert!((want - 4.0 * (zeta / 2.0).sinh().powi(2)).abs() < 1e-12);
        }
    }

    #[test]
    fn coherent_cfi_matches_closed_forms() {
        for n in [1, 3, 5, 7] {
            for zeta in [0.5, 1.0] {
                let got = protocol_cfi(Protocol::Coherent, n, zeta, 0.3, Route::Exact).unwrap();
                let want = coherent_cfi_closed_form(n, zeta).unwrap();
                assert!((got.scalar().unwrap() / want - 1.0).abs() < 1e-5, "N={n} ζ={zeta}");
            }
        }
    }

    #[test]
    fn ghz_cfi_saturates_qfi() {
        for n in [2, 4] {
            let zeta = 0.4;
            let got = protocol_cfi(Protocol::Ghz, n, zeta, 1.0, Route::Exact).unwrap();
            let q = qfi_abs_beta(&spin_states(SpinStateKind::Ghz, n).unwrap(), zeta).unwrap();
            let want = 4.0 * (n as f64 * zeta / 2.0).sinh().powi(2);
            assert!((got.scalar().unwrap() / want - 1.0).abs() < 1e-6);
            assert!(got.scalar().unwrap() <= q + 1e-8);
        }
    }

    #[test]
    fn large_squeezing_ratio() {
        for n in [1, 3, 5] {
            let zeta = 10.0;
            let f = protocol_cfi(Protocol::Coherent, n, zeta, 0.2, Route::Exact)
                .unwrap()
                .scalar()
                .unwrap();
            let q = qfi_abs_beta(&spin_states(SpinStateKind::CoherentX, n).unwrap(), zeta).unwrap();
            assert!(
                (q / f - coherent_qfi_cfi_ratio_limit(n)).abs() < 1e-3,
                "N={n}: {}",
                q / f
            );
        }
    }

    #[test]
    fn structural_zero_rules() {
        assert_eq!(fisher_term(0.0, 0.0, 1e-13, 1e-3).unwrap(), None);
        assert!(fisher_term(1e-6, 0.0, 1e-6, 1e-3).is_err());
        assert!(fisher_term(0.5, 0.5, 0.5, 1e-3).unwrap().unwrap() == 0.0);
    }

    #[test]
    fn closed_form_ratio_limit() {
        // large-ζ closed forms approach Q/F → 2^N/(2^N−1)
        let w = spin_states(SpinStateKind::CoherentX, 3).unwrap();
        let q = qfi_abs_beta(&w, 12.0).unwrap();
        let f = coherent_cfi_closed_form(3, 12.0).unwrap();
        assert!((q / f - 8.0 / 7.0).abs() < 1e-3);
    }
}
