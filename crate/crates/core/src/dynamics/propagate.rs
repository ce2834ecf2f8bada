use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DriveOperators, DriveSchedule};
use crate::error::{Result, SdsError};
use crate::hilbert::{
    expm_chebyshev_apply, fidelity, HybridSpace, Ket, LinOp, Space, SparseOp, DEFAULT_TAIL_THRESHOLD,
};
use crate::C64;

/// Integrator settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagationConfig {
    /// Target global error in the final state, relative to its norm.
    pub rel_tol: f64,
    /// Upper bound on a single step, in seconds.
    pub max_step: Option<f64>,
    /// Tail population that raises a truncation error; `None` disables the check.
    pub tail_threshold: Option<f64>,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            max_step: None,
            tail_threshold: Some(DEFAULT_TAIL_THRESHOLD),
        }
    }
}

impl PropagationConfig {
    pub fn with_tol(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(SdsError::InvalidParameter(format!(
                "tolerance must lie in (0, 1), got {}",
                self.rel_tol
            )));
        }
        if let Some(h) = self.max_step {
            if !(h > 0.0) {
                return Err(SdsError::InvalidParameter(format!(
                    "max step must be positive, got {h}"
                )));
            }
        }
        Ok(())
    }
}

/// Final state of a propagation with its diagnostics.
#[derive(Clone, Debug)]
pub struct Propagation {
    pub ket: Ket,
    /// Accumulated local error estimate.
    pub error_estimate: f64,
    /// `|‖ψ‖ − 1|` before renormalization.
    pub norm_error: f64,
    pub steps: usize,
    pub rejected: usize,
}

/// One sample of a trajectory, taken at segment boundaries.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub fidelity: f64,
    pub n_mean: f64,
    pub norm_error: f64,
}

// fourth-order commutator-free Magnus coefficients
const SQRT3: f64 = 1.732_050_807_568_877_2;
const NODE_LO: f64 = 0.5 - SQRT3 / 6.0;
const NODE_HI: f64 = 0.5 + SQRT3 / 6.0;
const WEIGHT_SMALL: f64 = (3.0 - 2.0 * SQRT3) / 12.0;
const WEIGHT_LARGE: f64 = (3.0 + 2.0 * SQRT3) / 12.0;

const MAX_STEPS: usize = 50_000_000;

const ROUNDING_FLOOR: f64 = 64.0 * f64::EPSILON;

struct Stepper<'a> {
    x: &'a SparseOp,
    xd: &'a SparseOp,
    /// Row-sum bound of `X` plus that of `X†`.
    bound: f64,
    delta: f64,
    tol_scale: f64,
}

impl Stepper<'_> {
    /// `exp(−ih(cX + c̄X†)) v`.
    fn exp(&self, c: C64, h: f64, v: &DVector<C64>, tol: f64) -> Result<DVector<C64>> {
        let (x, xd) = (self.x, self.xd);
        let mv = |src: &[C64], dst: &mut [C64]| {
            dst.iter_mut().for_each(|e| *e = C64::new(0.0, 0.0));
            x.mul_acc(c, src, dst);
            xd.mul_acc(c.conj(), src, dst);
        };
        expm_chebyshev_apply(mv, h, v, c.norm() * self.bound, tol)
    }

    fn step(&self, v: &DVector<C64>, t: f64, h: f64, tol: f64) -> Result<DVector<C64>> {
        let p1 = C64::from_polar(1.0, -self.delta * (t + NODE_LO * h));
        let p2 = C64::from_polar(1.0, -self.delta * (t + NODE_HI * h));
        let first = self.exp(p1 * WEIGHT_LARGE + p2 * WEIGHT_SMALL, h, v, tol)?;
        self.exp(p1 * WEIGHT_SMALL + p2 * WEIGHT_LARGE, h, &first, tol)
    }
}

/// Step-doubling control over one segment; returns (state, error, accepted, rejected).
fn propagate_segment(
    stepper: &Stepper,
    mut v: DVector<C64>,
    t0: f64,
    duration: f64,
    h_init: f64,
    config: &PropagationConfig,
) -> Result<(DVector<C64>, f64, usize, usize)> {
    let t_end = t0 + duration;
    let mut t = t0;
    let mut h = h_init.min(duration);
    let (mut err_total, mut accepted, mut rejected) = (0.0, 0usize, 0usize);
    while t_end - t > 1e-14 * duration {
        if accepted + rejected > MAX_STEPS {
            return Err(SdsError::ToleranceNotMet("step budget exhausted".into()));
        }
        let h_use = h.min(t_end - t);
        // differences at rounding level carry no information about the step
        let budget = (config.rel_tol * stepper.tol_scale * h_use).max(ROUNDING_FLOOR);
        let ktol = 1e-3 * config.rel_tol;
        let full = stepper.step(&v, t, h_use, ktol)?;
        let half = stepper.step(&v, t, 0.5 * h_use, ktol)?;
        let half = stepper.step(&half, t + 0.5 * h_use, 0.5 * h_use, ktol)?;
        let err = (&full - &half).norm() / 15.0;
        let factor = if err == 0.0 {
            4.0
        } else {
            (0.9 * (budget / err).powf(0.2)).clamp(0.2, 4.0)
        };
        if err <= budget {
            v = half;
            t += h_use;
            err_total += err;
            accepted += 1;
            h = h_use * factor;
        } else {
            rejected += 1;
            h = h_use * factor;
            if h < 1e-14 * duration {
                return Err(SdsError::ToleranceNotMet(format!("step size underflow at t = {t:.6e}")));
            }
        }
        if let Some(m) = config.max_step {
            h = h.min(m);
        }
    }
    Ok((v, err_total, accepted, rejected))
}

fn hybrid_space(ket: &Ket) -> Result<HybridSpace> {
    match ket.space() {
        Space::Hybrid(h) if h.ancillas() == 0 => Ok(h),
        _ => Err(SdsError::InvalidParameter("propagation needs a spin ⊗ mode ket".into())),
    }
}

/// Integrates the Schrödinger equation through `schedule`, calling `observe` after each segment.
pub fn propagate_observed(
    ket: &Ket,
    schedule: &DriveSchedule,
    config: &PropagationConfig,
    mut observe: impl FnMut(usize, f64, &Ket) -> Result<()>,
) -> Result<Propagation> {
    config.validate()?;
    let space = hybrid_space(ket)?;
    let ops = DriveOperators::new(space)?;
    let total = schedule.total_duration();
    let mut v = ket.amplitudes().clone();
    let (mut err, mut steps, mut rejected) = (0.0, 0, 0);
    let starts = schedule.start_times();
    for (i, (seg, &t0)) in schedule.segments().iter().zip(&starts).enumerate() {
        let t_seg = seg.duration();
        if seg.coupling != 0.0 {
            let x = seg.positive_part(&ops);
            let xd = x.adjoint();
            let stepper = Stepper {
                x: &x,
                xd: &xd,
                bound: x.row_sum_bound() + xd.row_sum_bound(),
                delta: seg.detuning,
                tol_scale: 1.0 / total,
            };
            // a sixteenth of a loop resolves the drive phase
            let h0 = config
                .max_step
                .unwrap_or(f64::INFINITY)
                .min(t_seg / (16.0 * seg.loops as f64));
            let (out, e, a, r) = propagate_segment(&stepper, v, t0, t_seg, h0, config)?;
            v = out;
            err += e;
            steps += a;
            rejected += r;
        }
        let current = Ket::from_raw(ket.space(), v.clone());
        if let Some(th) = config.tail_threshold {
            current.check_truncation(th)?;
        }
        observe(i, t0 + t_seg, &current)?;
    }
    let norm = v.norm();
    let norm_error = (norm - 1.0).abs();
    if norm_error > 1e-9_f64.max(10.0 * config.rel_tol) {
        return Err(SdsError::ToleranceNotMet(format!("norm drifted by {norm_error:.2e}")));
    }
    Ok(Propagation {
        ket: Ket::new(ket.space(), v)?,
        error_estimate: err,
        norm_error,
        steps,
        rejected,
    })
}

pub fn propagate(ket: &Ket, schedule: &DriveSchedule, config: &PropagationConfig) -> Result<Propagation> {
    propagate_observed(ket, schedule, config, |_, _, _| Ok(()))
}

/// Propagation sampled at every segment boundary against `target`.
pub fn trajectory(
    ket: &Ket,
    schedule: &DriveSchedule,
    config: &PropagationConfig,
    target: &Ket,
) -> Result<(Propagation, Vec<TrajectoryPoint>)> {
    let space = hybrid_space(ket)?;
    let n_max = space.mode().n_max();
    let mut points = vec![TrajectoryPoint {
        t: 0.0,
        fidelity: fidelity(ket, target)?,
        n_mean: mean_occupation(ket, n_max),
        norm_error: (ket.norm() - 1.0).abs(),
    }];
    let prop = propagate_observed(ket, schedule, config, |_, t, k| {
        points.push(TrajectoryPoint {
            t,
            fidelity: fidelity(k, target)? / k.norm().powi(2),
            n_mean: mean_occupation(k, n_max) / k.norm().powi(2),
            norm_error: (k.norm() - 1.0).abs(),
        });
        Ok(())
    })?;
    Ok((prop, points))
}

/// `⟨a†a⟩` on a spin ⊗ mode ket.
pub fn mean_occupation(ket: &Ket, n_max: usize) -> f64 {
    ket.amplitudes()
        .iter()
        .enumerate()
        .map(|(i, c)| (i % n_max) as f64 * c.norm_sqr())
        .sum()
}

/// Full propagator of `schedule` on `space`, column by column.
pub fn propagator(space: HybridSpace, schedule: &DriveSchedule, config: &PropagationConfig) -> Result<LinOp> {
    let config = PropagationConfig {
        tail_threshold: None,
        ..*config
    };
    let cols: Vec<DVector<C64>> = (0..space.dim())
        .into_par_iter()
        .map(|j| {
            Ok(propagate(&Ket::basis(space, j)?, schedule, &config)?
                .ket
                .into_amplitudes())
        })
        .collect::<Result<_>>()?;
    LinOp::new(space, DMatrix::from_columns(&cols))
}
