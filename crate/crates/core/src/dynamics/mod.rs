//! First-sideband drive: schedules, Hamiltonian, propagation and Magnus terms.

mod magnus;
mod propagate;

pub use magnus::*;
pub use propagate::*;

use std::f64::consts::{LN_10, PI};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SdsError};
use crate::hilbert::{destroy_matrix, spin_matrix, Axis, HybridSpace, LinOp, SparseOp};
use crate::C64;

/// Drive parameters; frequencies in rad/s.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveParams {
    pub g: f64,
    pub delta: f64,
    pub phi1: f64,
    pub phi2: f64,
    pub ell: u32,
    #[serde(rename = "P")]
    pub reps: u32,
}

impl DriveParams {
    pub fn new(g: f64, delta: f64, phi1: f64, phi2: f64, ell: u32, reps: u32) -> Result<Self> {
        let p = Self {
            g,
            delta,
            phi1,
            phi2,
            ell,
            reps,
        };
        p.validate()?;
        Ok(p)
    }

    /// Antipodal phases `φ₂ = φ₁ − π` with `Δ` solved from the target `|ζ|`.
    pub fn for_target(g: f64, zeta_abs: f64, phi1: f64, ell: u32, reps: u32) -> Result<Self> {
        let delta = detuning_for_zeta(g, zeta_abs, ell, reps)?;
        Self::new(g, delta, phi1, phi1 - PI, ell, reps)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.g.is_finite() {
            return Err(SdsError::InvalidParameter(format!(
                "coupling must be finite, got {}",
                self.g
            )));
        }
        if !(self.delta.is_finite() && self.delta != 0.0) {
            return Err(SdsError::InvalidParameter(format!(
                "detuning must be finite and nonzero, got {}",
                self.delta
            )));
        }
        if !(self.phi1.is_finite() && self.phi2.is_finite()) {
            return Err(SdsError::InvalidParameter("phases must be finite".into()));
        }
        if self.ell == 0 || self.reps == 0 {
            return Err(SdsError::InvalidParameter(
                "loop and repetition counts must be positive".into(),
            ));
        }
        Ok(())
    }

    /// `τ = 2πℓ/|Δ|`.
    pub fn segment_duration(&self) -> f64 {
        2.0 * PI * self.ell as f64 / self.delta.abs()
    }

    /// `t_f = 8πℓP/|Δ|`.
    pub fn total_duration(&self) -> f64 {
        8.0 * PI * self.ell as f64 * self.reps as f64 / self.delta.abs()
    }
}

/// One piecewise-constant stretch of the drive.
///
/// The Hamiltonian is `g a [Jx e^{−iφ₀ − iΔt} + Jy e^{iΔt − iφ}] + h.c.` with the
/// signed coupling `g`; `base_phase` is `φ₀` and is zero unless the sign flip is
/// realized by phases.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub detuning: f64,
    pub phase: f64,
    pub base_phase: f64,
    pub coupling: f64,
    pub loops: u32,
}

impl Segment {
    pub fn duration(&self) -> f64 {
        2.0 * PI * self.loops as f64 / self.detuning.abs()
    }

    /// Coefficient operator `X` in `H(t) = e^{−iΔt} X + e^{iΔt} X†`.
    fn positive_part(&self, ops: &DriveOperators) -> SparseOp {
        let u = C64::from_polar(self.coupling, -self.base_phase);
        let v = C64::from_polar(self.coupling, self.phase);
        ops.a_jx.scaled_sum(u, &ops.ad_jy, v)
    }
}

/// Ordered drive segments with absolute start times at multiples of whole loops.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveSchedule {
    segments: Vec<Segment>,
}

impl DriveSchedule {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        for s in &segments {
            if !(s.detuning.is_finite() && s.detuning != 0.0) || s.loops == 0 || !s.coupling.is_finite() {
                return Err(SdsError::InvalidParameter(format!("invalid segment {s:?}")));
            }
        }
        Ok(Self { segments })
    }

    /// `P` repetitions of `(+Δ,φ₁,+g), (−Δ,φ₂,+g), (+Δ,φ₁,−g), (−Δ,φ₂,−g)`.
    pub fn stroboscopic(p: &DriveParams) -> Result<Self> {
        p.validate()?;
        let seg = |sign_delta: f64, phase: f64, coupling: f64| Segment {
            detuning: sign_delta * p.delta,
            phase,
            base_phase: 0.0,
            coupling,
            loops: p.ell,
        };
        let block = [
            seg(1.0, p.phi1, p.g),
            seg(-1.0, p.phi2, p.g),
            seg(1.0, p.phi1, -p.g),
            seg(-1.0, p.phi2, -p.g),
        ];
        Self::new(block.iter().cycle().take(4 * p.reps as usize).copied().collect())
    }

    /// Same sequence with the coupling sign flip realized as `φ → φ + π` on both tones.
    pub fn stroboscopic_phase_flipped(p: &DriveParams) -> Result<Self> {
        let segments = Self::stroboscopic(p)?
            .segments
            .into_iter()
            .map(|s| {
                if s.coupling < 0.0 {
                    Segment {
                        coupling: -s.coupling,
                        base_phase: s.base_phase + PI,
                        phase: s.phase + PI,
                        ..s
                    }
                } else {
                    s
                }
            })
            .collect();
        Self::new(segments)
    }

    /// The first `count` segments of the sequence.
    pub fn truncated(&self, count: usize) -> Self {
        Self {
            segments: self.segments[..count.min(self.segments.len())].to_vec(),
        }
    }

    /// Every coupling sign reversed.
    pub fn mirrored(&self) -> Self {
        Self {
            segments: self
                .segments
                .iter()
                .map(|s| Segment {
                    coupling: -s.coupling,
                    ..*s
                })
                .collect(),
        }
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(Segment::duration).sum()
    }

    /// Start time of each segment.
    pub fn start_times(&self) -> Vec<f64> {
        let mut t = 0.0;
        self.segments
            .iter()
            .map(|s| {
                let start = t;
                t += s.duration();
                start
            })
            .collect()
    }
}

/// Schedule file with frequencies in Hz (`ω = 2π f`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct ScheduleFile {
    pub g_Hz: f64,
    pub Delta_Hz: f64,
    pub phi1: f64,
    pub phi2: f64,
    pub ell: u32,
    pub P: u32,
    pub N: usize,
    pub n_max: usize,
}

impl ScheduleFile {
    pub fn params(&self) -> Result<DriveParams> {
        DriveParams::new(
            2.0 * PI * self.g_Hz,
            2.0 * PI * self.Delta_Hz,
            self.phi1,
            self.phi2,
            self.ell,
            self.P,
        )
    }

    pub fn from_params(p: &DriveParams, n_spins: usize, n_max: usize) -> Self {
        Self {
            g_Hz: p.g / (2.0 * PI),
            Delta_Hz: p.delta / (2.0 * PI),
            phi1: p.phi1,
            phi2: p.phi2,
            ell: p.ell,
            P: p.reps,
            N: n_spins,
            n_max,
        }
    }

    pub fn space(&self) -> Result<HybridSpace> {
        HybridSpace::spin_mode(self.N, self.n_max)
    }
}

/// Sparse `Jx ⊗ a` and `Jy ⊗ a†` on a spin ⊗ mode space.
#[derive(Clone, Debug)]
pub(crate) struct DriveOperators {
    a_jx: SparseOp,
    ad_jy: SparseOp,
}

impl DriveOperators {
    pub(crate) fn new(space: HybridSpace) -> Result<Self> {
        require_no_ancillas(space)?;
        let a = SparseOp::from_dense(&destroy_matrix(space.mode().n_max()));
        let jx = SparseOp::from_dense(&spin_matrix(space.spin(), Axis::X));
        let jy = SparseOp::from_dense(&spin_matrix(space.spin(), Axis::Y));
        Ok(Self {
            a_jx: jx.kron(&a),
            ad_jy: jy.kron(&a.adjoint()),
        })
    }
}

fn require_no_ancillas(space: HybridSpace) -> Result<()> {
    if space.ancillas() != 0 {
        return Err(SdsError::InvalidParameter("the drive acts on spin ⊗ mode only".into()));
    }
    Ok(())
}

/// `H(t)` for `segment`, with `t` the absolute time.
pub fn hamiltonian_at(t: f64, segment: &Segment, space: HybridSpace) -> Result<LinOp> {
    let x = segment.positive_part(&DriveOperators::new(space)?).to_dense();
    let phase = C64::from_polar(1.0, -segment.detuning * t);
    let h = &x * phase + x.adjoint() * phase.conj();
    LinOp::new(space, h)?.mark_hermitian()
}

/// Phases of the four first-sideband tones.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TonePhases {
    pub red1: f64,
    pub red2: f64,
    pub blue1: f64,
    pub blue2: f64,
}

impl TonePhases {
    /// Assignment that reduces the four tones to the two-quadrature drive of `segment`.
    pub fn for_segment(segment: &Segment) -> Self {
        Self {
            red1: segment.base_phase,
            blue1: -segment.base_phase,
            red2: segment.phase + PI / 2.0,
            blue2: -segment.phase + PI / 2.0,
        }
    }
}

/// Sum of the two red and two blue sideband Hamiltonians.
pub fn four_tone_hamiltonian(t: f64, segment: &Segment, phases: TonePhases, space: HybridSpace) -> Result<LinOp> {
    require_no_ancillas(space)?;
    let n = space.mode().n_max();
    let a = destroy_matrix(n);
    let ad = a.adjoint();
    let jp = crate::hilbert::spin_raising_matrix(space.spin());
    let jm = jp.adjoint();
    let d = segment.detuning;
    let half = 0.5 * segment.coupling;
    let term =
        |spin: &DMatrix<C64>, mode: &DMatrix<C64>, angle: f64| spin.kronecker(mode) * C64::from_polar(half, angle);
    let h = term(&jp, &a, -phases.red1 - t * d)
        + term(&jm, &ad, phases.red1 + t * d)
        + term(&jp, &a, -phases.red2 + t * d)
        + term(&jm, &ad, phases.red2 - t * d)
        + term(&jp, &ad, -phases.blue1 + t * d)
        + term(&jm, &a, phases.blue1 - t * d)
        + term(&jp, &ad, -phases.blue2 - t * d)
        + term(&jm, &a, phases.blue2 + t * d);
    LinOp::new(space, h)
}

/// `ζ = −8πg²ℓP(e^{iφ₁} − e^{iφ₂})/Δ²`.
pub fn effective_zeta(p: &DriveParams) -> C64 {
    let phases = C64::from_polar(1.0, p.phi1) - C64::from_polar(1.0, p.phi2);
    -phases * (8.0 * PI * p.g * p.g * p.ell as f64 * p.reps as f64 / (p.delta * p.delta))
}

/// `|Δ| = √(16πg²ℓP/|ζ|)`, the detuning reaching `|ζ|` with antipodal phases.
pub fn detuning_for_zeta(g: f64, zeta_abs: f64, ell: u32, reps: u32) -> Result<f64> {
    if !(zeta_abs > 0.0 && zeta_abs.is_finite()) {
        return Err(SdsError::InvalidParameter(format!(
            "target |zeta| must be positive, got {zeta_abs}"
        )));
    }
    if !(g.is_finite() && g != 0.0) {
        return Err(SdsError::InvalidParameter(format!("coupling must be nonzero, got {g}")));
    }
    Ok((16.0 * PI * g * g * ell as f64 * reps as f64 / zeta_abs).sqrt())
}

/// Squeezing parameter per unit magnetization for bosonic squeezing `z` on `N` spins.
pub fn target_zeta(z: f64, n_spins: usize) -> f64 {
    2.0 * z / n_spins as f64
}

/// `t_f* = √(πz)/(2g√(N/2))`.
pub fn speed_limit(z: f64, g: f64, n_spins: usize) -> f64 {
    (PI * z).sqrt() / (2.0 * g.abs() * (0.5 * n_spins as f64).sqrt())
}

/// `4z/(η²Ω)`.
pub fn second_sideband_duration(z: f64, eta: f64, omega: f64) -> f64 {
    4.0 * z / (eta * eta * omega)
}

/// `−10 log₁₀(e^{−2z})`.
pub fn squeezing_db(z: f64) -> f64 {
    20.0 * z / LN_10
}

/// Coupling `ηΩ/√N`.
pub fn coupling_strength(eta: f64, omega: f64, n_spins: usize) -> f64 {
    eta * omega / (n_spins as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space(n: usize, n_max: usize) -> HybridSpace {
        HybridSpace::spin_mode(n, n_max).unwrap()
    }

    fn seg(delta: f64, phase: f64, coupling: f64) -> Segment {
        Segment {
            detuning: delta,
            phase,
            base_phase: 0.0,
            coupling,
            loops: 1,
        }
    }

    #[test]
    fn hamiltonian_at_origin() {
        let sp = space(2, 6);
        let h = hamiltonian_at(0.0, &seg(3.0, 0.0, 0.7), sp).unwrap();
        let a = destroy_matrix(6);
        let j = spin_matrix(sp.spin(), Axis::X) + spin_matrix(sp.spin(), Axis::Y);
        let expected = j.kronecker(&a) * C64::from(0.7);
        let expected = &expected + expected.adjoint();
        assert!((h.matrix() - expected).norm() < 1e-14);
    }

    #[test]
    fn hamiltonian_is_hermitian() {
        let sp = space(3, 7);
        for i in 0..20 {
            let x = i as f64;
            let s = seg(1.0 + 0.37 * x, 0.9 * x, 0.3 - 0.05 * x);
            let h = hamiltonian_at(0.11 * x * x, &s, sp).unwrap();
            assert!(h.hermiticity_error() < 1e-12);
        }
    }

    #[test]
    fn four_tones_reduce_to_drive() {
        let sp = space(3, 8);
        for (i, s) in [seg(2.0, 0.4, 0.8), seg(-1.3, 2.9, -0.5)].iter().enumerate() {
            for t in [0.0, 0.37, 1.9 + i as f64] {
                let h = hamiltonian_at(t, s, sp).unwrap();
                let four = four_tone_hamiltonian(t, s, TonePhases::for_segment(s), sp).unwrap();
                assert!((h.matrix() - four.matrix()).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn phase_flip_equals_sign_flip() {
        let p = DriveParams::new(0.3, 5.0, PI, 0.0, 1, 2).unwrap();
        let a = DriveSchedule::stroboscopic(&p).unwrap();
        let b = DriveSchedule::stroboscopic_phase_flipped(&p).unwrap();
        let sp = space(2, 6);
        for (sa, sb) in a.segments().iter().zip(b.segments()) {
            for t in [0.1, 0.8] {
                let ha = hamiltonian_at(t, sa, sp).unwrap();
                let hb = hamiltonian_at(t, sb, sp).unwrap();
                assert!((ha.matrix() - hb.matrix()).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn schedule_layout() {
        let p = DriveParams::new(0.2, -4.0, 0.3, 0.3 - PI, 2, 3).unwrap();
        let s = DriveSchedule::stroboscopic(&p).unwrap();
        assert_eq!(s.segments().len(), 12);
        let signs: Vec<(f64, f64)> = s.segments()[..4]
            .iter()
            .map(|x| (x.detuning.signum(), x.coupling.signum()))
            .collect();
        assert_eq!(signs, vec![(-1.0, 1.0), (1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)]);
        assert_eq!(s.segments()[5].phase, p.phi2);
        assert!((s.total_duration() - p.total_duration()).abs() < 1e-12 * p.total_duration());
        assert!((p.segment_duration() * 4.0 * 3.0 - p.total_duration()).abs() < 1e-12);
        assert!((s.start_times()[4] - 4.0 * p.segment_duration()).abs() < 1e-12);
    }

    #[test]
    fn zeta_formula() {
        let g = 2.0 * PI * 5000.0;
        let delta = 1.7e5;
        let p = DriveParams::new(g, delta, PI, 0.0, 1, 1).unwrap();
        let z = effective_zeta(&p);
        assert!((z.re - 16.0 * PI * g * g / (delta * delta)).abs() < 1e-12 * z.re);
        assert!(z.im.abs() < 1e-12 * z.re);
        let same = DriveParams::new(g, delta, 0.4, 0.4, 1, 1).unwrap();
        assert_eq!(effective_zeta(&same).norm(), 0.0);
        let inv = DriveParams::for_target(g, 0.8, 1.1, 2, 3).unwrap();
        assert!((effective_zeta(&inv).norm() - 0.8).abs() < 1e-12);
        // antipodal phases give the largest |ζ|
        for k in 1..12 {
            let q = DriveParams {
                phi2: inv.phi1 - PI + 0.25 * k as f64,
                ..inv
            };
            assert!(effective_zeta(&q).norm() < 0.8);
        }
    }

    #[test]
    fn durations() {
        let g = 2.0 * PI * 5000.0;
        let t = speed_limit(1.0, g, 1);
        assert!((t - PI.sqrt() / (2.0 * g * 0.5f64.sqrt())).abs() < 1e-18);
        assert!((t - 3.99e-5).abs() < 1e-7);
        assert!((speed_limit(4.0, g, 1) - 2.0 * t).abs() < 1e-15);
        let eta_omega = 2.0 * PI * 5000.0;
        let ts: Vec<f64> = [1, 4, 16]
            .iter()
            .map(|&n| speed_limit(0.7, eta_omega / (n as f64).sqrt(), n))
            .collect();
        assert!((ts[0] - ts[1]).abs() < 1e-15 && (ts[0] - ts[2]).abs() < 1e-15);

        let omega = 2.0 * PI * 1e5;
        let t2 = second_sideband_duration(1.0, 0.05, omega);
        assert!((t2 - 4.0 / (0.0025 * omega)).abs() < 1e-15);
        assert!((t2 - 2.55e-3).abs() < 1e-5);
        assert_eq!(second_sideband_duration(2.0, 0.05, omega), 2.0 * t2);
        let ideal = second_sideband_duration(1.0, 0.05, omega) / speed_limit(1.0, coupling_strength(0.05, omega, 1), 1);
        assert!((ideal - 4.0 * 2f64.sqrt() / (PI.sqrt() * 0.05)).abs() < 1e-9);
        assert!((ideal - 64.0).abs() < 1.0);
    }

    #[test]
    fn decibels() {
        assert_eq!(squeezing_db(0.0), 0.0);
        assert!((squeezing_db(1.0) - 8.686).abs() < 1e-3);
        assert!((squeezing_db(2.5) - 21.71).abs() < 5e-3);
        assert!((squeezing_db(1.0) + 10.0 * (-2.0f64).exp().log10()).abs() < 1e-12);
    }

    #[test]
    fn schedule_file_round_trip() {
        let f = ScheduleFile {
            g_Hz: 5000.0,
            Delta_Hz: 21000.0,
            phi1: PI,
            phi2: 0.0,
            ell: 1,
            P: 2,
            N: 2,
            n_max: 40,
        };
        let json = serde_json::to_string(&f).unwrap();
        assert!(json.contains("\"Delta_Hz\"") && json.contains("\"P\""));
        let back: ScheduleFile = serde_json::from_str(&json).unwrap();
        assert_eq!(back, f);
        let p = f.params().unwrap();
        assert!((p.g - 2.0 * PI * 5000.0).abs() < 1e-9);
        let again = ScheduleFile::from_params(&p, 2, 40);
        assert!((again.Delta_Hz - 21000.0).abs() < 1e-9);
    }
}
