use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{DriveOperators, Segment};
use crate::error::{Result, SdsError};
use crate::hilbert::{destroy_matrix, spin_matrix, Axis, HybridSpace, LinOp, SparseOp, SpinSpace};
use crate::C64;

const I: C64 = C64::new(0.0, 1.0);

/// Closed-form second Magnus term of one segment spanning whole loops,
/// `(4πℓg²/(Δ|Δ|)) [(e^{−i(φ+φ₀)} a² − h.c.) Jz − i(Jx² − Jy²)]`.
pub fn magnus_theta2_segment(segment: &Segment, space: HybridSpace) -> Result<LinOp> {
    if space.ancillas() != 0 {
        return Err(SdsError::InvalidParameter("the drive acts on spin ⊗ mode only".into()));
    }
    let a = destroy_matrix(space.mode().n_max());
    let a2 = &a * &a;
    let spin = space.spin();
    let (jx, jy, jz) = (
        spin_matrix(spin, Axis::X),
        spin_matrix(spin, Axis::Y),
        spin_matrix(spin, Axis::Z),
    );
    let phase = C64::from_polar(1.0, -(segment.phase + segment.base_phase));
    let sq = &a2 * phase - a2.adjoint() * phase.conj();
    let twist = (&jx * &jx - &jy * &jy) * (-I);
    let id_mode = DMatrix::<C64>::identity(a.nrows(), a.nrows());
    let d = segment.detuning;
    let scale = 4.0 * PI * segment.loops as f64 * segment.coupling.powi(2) / (d * d.abs());
    let m = (jz.kronecker(&sq) + twist.kronecker(&id_mode)) * C64::from(scale);
    LinOp::new(space, m)
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            dp = n as f64 * (x * p - p0) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

const QUAD_ORDER: usize = 20;
const PANELS_PER_LOOP: usize = 4;

/// Dense `H(t) = e^{−iΔt}X + e^{iΔt}X†` for quadrature.
struct DenseDrive {
    x: DMatrix<C64>,
    xd: DMatrix<C64>,
    delta: f64,
}

impl DenseDrive {
    fn new(segment: &Segment, space: HybridSpace) -> Result<Self> {
        let x = segment.positive_part(&DriveOperators::new(space)?).to_dense();
        Ok(Self {
            xd: x.adjoint(),
            x,
            delta: segment.detuning,
        })
    }

    fn at(&self, t: f64) -> DMatrix<C64> {
        let p = C64::from_polar(1.0, -self.delta * t);
        &self.x * p + &self.xd * p.conj()
    }
}

/// Composite Gauss–Legendre rule on `[a, b]` with `panels` equal panels.
fn composite(a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(QUAD_ORDER);
    let h = (b - a) / panels as f64;
    (0..panels)
        .flat_map(|p| {
            let lo = a + p as f64 * h;
            x.iter()
                .zip(&w)
                .map(move |(xi, wi)| (lo + 0.5 * h * (xi + 1.0), 0.5 * h * wi))
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Running integral `∫_{t0}^{t} H` at arbitrary `t` inside the segment.
struct RunningIntegral<'a> {
    drive: &'a DenseDrive,
    t0: f64,
    panel: f64,
    prefix: Vec<DMatrix<C64>>,
}

impl<'a> RunningIntegral<'a> {
    fn new(drive: &'a DenseDrive, t0: f64, duration: f64, panels: usize) -> Self {
        let panel = duration / panels as f64;
        let dim = drive.x.nrows();
        let mut prefix = vec![DMatrix::zeros(dim, dim)];
        for p in 0..panels {
            let lo = t0 + p as f64 * panel;
            let mut acc = prefix[p].clone();
            for (t, w) in composite(lo, lo + panel, 1) {
                acc += drive.at(t) * C64::from(w);
            }
            prefix.push(acc);
        }
        Self {
            drive,
            t0,
            panel,
            prefix,
        }
    }

    fn at(&self, t: f64) -> DMatrix<C64> {
        let p = (((t - self.t0) / self.panel).floor() as usize).min(self.prefix.len() - 1);
        let lo = self.t0 + p as f64 * self.panel;
        let mut acc = self.prefix[p].clone();
        if t > lo {
            for (s, w) in composite(lo, t, 1) {
                acc += self.drive.at(s) * C64::from(w);
            }
        }
        acc
    }
}

fn comm(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    a * b - b * a
}

fn panels(segment: &Segment) -> usize {
    PANELS_PER_LOOP * segment.loops as usize
}

/// `∫ H dt` over the segment starting at `t0`, by quadrature.
pub fn magnus_theta1_quadrature(segment: &Segment, t0: f64, space: HybridSpace) -> Result<DMatrix<C64>> {
    let drive = DenseDrive::new(segment, space)?;
    let dim = space.dim();
    let mut acc = DMatrix::zeros(dim, dim);
    for (t, w) in composite(t0, t0 + segment.duration(), panels(segment)) {
        acc += drive.at(t) * C64::from(w);
    }
    Ok(acc)
}

/// `∫dt₁ ∫^{t₁}dt₂ [H(t₁), H(t₂)]` over the segment starting at `t0`, by nested quadrature.
pub fn magnus_theta2_quadrature(segment: &Segment, t0: f64, space: HybridSpace) -> Result<DMatrix<C64>> {
    let drive = DenseDrive::new(segment, space)?;
    let duration = segment.duration();
    let running = RunningIntegral::new(&drive, t0, duration, panels(segment));
    let dim = space.dim();
    let mut acc = DMatrix::zeros(dim, dim);
    for (t, w) in composite(t0, t0 + duration, panels(segment)) {
        acc += comm(&drive.at(t), &running.at(t)) * C64::from(w);
    }
    Ok(acc)
}

/// Third term `Ω₃` of `U = exp(Ω₁ + Ω₂ + Ω₃ + …)` over the segment, by triple quadrature.
///
/// `Ω₃ = (1/6)∫∫∫ ([A₁,[A₂,A₃]] + [A₃,[A₂,A₁]])` with `A = −iH` and `t₁ > t₂ > t₃`.
pub fn magnus_omega3_quadrature(segment: &Segment, t0: f64, space: HybridSpace) -> Result<DMatrix<C64>> {
    let drive = DenseDrive::new(segment, space)?;
    let duration = segment.duration();
    let np = panels(segment);
    let running = RunningIntegral::new(&drive, t0, duration, np);
    let panel = duration / np as f64;
    let dim = space.dim();
    let mut acc = DMatrix::zeros(dim, dim);
    let minus_i = C64::new(0.0, -1.0);
    for (t1, w1) in composite(t0, t0 + duration, np) {
        let a1 = drive.at(t1) * minus_i;
        // inner rule over [t0, t1]: whole panels plus the partial one
        let whole = ((t1 - t0) / panel).floor() as usize;
        let split = t0 + whole as f64 * panel;
        let mut inner = if whole > 0 {
            composite(t0, split, whole)
        } else {
            Vec::new()
        };
        if t1 > split {
            inner.extend(composite(split, t1, 1));
        }
        for (t2, w2) in inner {
            let a2 = drive.at(t2) * minus_i;
            let k3 = running.at(t2) * minus_i;
            let term = comm(&a1, &comm(&a2, &k3)) + comm(&k3, &comm(&a2, &a1));
            acc += term * C64::from(w1 * w2 / 6.0);
        }
    }
    Ok(acc)
}

/// Principal logarithm of a unitary matrix; fails when an eigenphase is within `margin` of ±π.
///
/// The commuting Hermitian parts `(U+U†)/2` and `(U−U†)/2i` are diagonalized
/// together through a generic real combination, which stays well conditioned
/// for the clustered spectra of near-identity propagators.
pub fn log_unitary(u: &DMatrix<C64>, margin: f64) -> Result<DMatrix<C64>> {
    let n = u.nrows();
    let ud = u.adjoint();
    let re = (u + &ud) * C64::from(0.5);
    let im = (u - &ud) * C64::new(0.0, -0.5);
    let mix = &re + &im * C64::from(std::f64::consts::SQRT_2 - 1.0);
    let eig = mix.symmetric_eigen();
    let v = eig.eigenvectors;
    let d = v.adjoint() * u * &v;
    let off = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|(i, j)| i != j)
        .map(|(i, j)| d[(i, j)].norm())
        .fold(0.0, f64::max);
    if off > 1e-8 {
        return Err(SdsError::InvalidParameter(format!(
            "matrix is not unitary (off-diagonal residue {off:.2e})"
        )));
    }
    let mut logs = DMatrix::zeros(n, n);
    for i in 0..n {
        let l = d[(i, i)];
        if PI - l.arg().abs() < margin {
            return Err(SdsError::InvalidParameter(
                "eigenphase too close to the branch cut".into(),
            ));
        }
        logs[(i, i)] = C64::new(l.norm().ln(), l.arg());
    }
    Ok(&v * logs * v.adjoint())
}

/// Hilbert–Schmidt coefficient of `op` along `direction`.
pub fn operator_projection(op: &DMatrix<C64>, direction: &DMatrix<C64>) -> C64 {
    direction.dotc(op) / direction.norm_squared()
}

/// `i(Jx² − Jy²) ⊗ 1`, the two-axis-twisting direction.
pub fn twisting_direction(space: HybridSpace) -> DMatrix<C64> {
    let spin = space.spin();
    let (jx, jy) = (spin_matrix(spin, Axis::X), spin_matrix(spin, Axis::Y));
    let id = DMatrix::<C64>::identity(space.mode().dim(), space.mode().dim());
    ((&jx * &jx - &jy * &jy) * I).kronecker(&id)
}

/// Restriction of an operator to Fock levels below `keep`, where truncation does not act.
pub fn low_fock_block(op: &DMatrix<C64>, space: HybridSpace, keep: usize) -> DMatrix<C64> {
    let idx: Vec<usize> = (0..space.dim()).filter(|&i| space.split(i).1 < keep).collect();
    DMatrix::from_fn(idx.len(), idx.len(), |r, c| op[(idx[r], idx[c])])
}

/// Spin factor of a higher-order Magnus term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum HigherOrderTerm {
    /// `a³ Jx`
    CubicJx,
    /// `a Jx Jz`
    LinearJxJz,
    /// `a⁴ Jz`
    QuarticJz,
    /// `a² Jx²`
    QuadraticJx2,
    /// `a² Jz`
    QuadraticJz,
    /// `a² Jz Jx`
    QuadraticJzJx,
    /// `Jx²`
    SpinJx2,
    /// `Jz Jx Jy`
    SpinJzJxJy,
}

impl HigherOrderTerm {
    pub const ALL: [HigherOrderTerm; 8] = [
        Self::CubicJx,
        Self::LinearJxJz,
        Self::QuarticJz,
        Self::QuadraticJx2,
        Self::QuadraticJz,
        Self::QuadraticJzJx,
        Self::SpinJx2,
        Self::SpinJzJxJy,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Self::CubicJx => "a^3 Jx",
            Self::LinearJxJz => "a Jx Jz",
            Self::QuarticJz => "a^4 Jz",
            Self::QuadraticJx2 => "a^2 Jx^2",
            Self::QuadraticJz => "a^2 Jz",
            Self::QuadraticJzJx => "a^2 Jz Jx",
            Self::SpinJx2 => "Jx^2",
            Self::SpinJzJxJy => "Jz Jx Jy",
        }
    }

    /// Magnus order the term first appears at.
    pub fn order(&self) -> u32 {
        match self {
            Self::CubicJx | Self::LinearJxJz => 3,
            _ => 4,
        }
    }

    /// Spin factors, leftmost first.
    fn spin_factors(&self) -> &'static [Axis] {
        match self {
            Self::CubicJx => &[Axis::X],
            Self::LinearJxJz => &[Axis::X, Axis::Z],
            Self::QuarticJz | Self::QuadraticJz => &[Axis::Z],
            Self::QuadraticJx2 | Self::SpinJx2 => &[Axis::X, Axis::X],
            Self::QuadraticJzJx => &[Axis::Z, Axis::X],
            Self::SpinJzJxJy => &[Axis::Z, Axis::X, Axis::Y],
        }
    }

    /// Largest amplitude out of `|N/2⟩` (the diagonal one for diagonal operators),
    /// scaled by `N^{−order/2}` for the coupling `g = ηΩ/√N` at fixed `ηΩ`.
    pub fn scaled_matrix_element(&self, n_spins: usize) -> Result<f64> {
        let spin = SpinSpace::new(n_spins)?;
        let top = spin.dim() - 1;
        let mut v = nalgebra::DVector::<C64>::zeros(spin.dim());
        v[top] = C64::from(1.0);
        for axis in self.spin_factors().iter().rev() {
            v = SparseOp::from_dense(&spin_matrix(spin, *axis)).apply(&v);
        }
        let out = (0..top).map(|k| v[k].norm()).fold(0.0, f64::max);
        let elem = if out > 1e-12 { out } else { v[top].norm() };
        Ok(elem * (n_spins as f64).powf(-(self.order() as f64) / 2.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{propagator, DriveParams, DriveSchedule, PropagationConfig};
    use crate::hilbert::expm_antihermitian;

    fn space(n: usize, n_max: usize) -> HybridSpace {
        HybridSpace::spin_mode(n, n_max).unwrap()
    }

    fn seg(delta: f64, phase: f64, coupling: f64, loops: u32) -> Segment {
        Segment {
            detuning: delta,
            phase,
            base_phase: 0.0,
            coupling,
            loops,
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(QUAD_ORDER);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        let p38: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(38)).sum();
        assert!((p38 - 2.0 / 39.0).abs() < 1e-14);
    }

    #[test]
    fn first_term_vanishes_over_loops() {
        let sp = space(2, 8);
        for (loops, delta) in [(1, 3.0), (2, -5.0), (3, 7.5)] {
            let s = seg(delta, 0.7, 0.4, loops);
            let t0 = 2.0 * PI * 5.0 / delta.abs();
            let theta1 = magnus_theta1_quadrature(&s, t0, sp).unwrap();
            assert!(theta1.norm() < 1e-10 * s.coupling * s.duration());
        }
    }

    #[test]
    fn second_term_matches_quadrature() {
        for (n, delta, phase, loops) in [(1, 10.0, 0.3, 1), (2, -7.0, 2.0, 1), (3, 12.0, PI, 2)] {
            let sp = space(n, 8);
            let s = seg(delta, phase, 0.1, loops);
            let closed = magnus_theta2_segment(&s, sp).unwrap().into_matrix();
            let quad = magnus_theta2_quadrature(&s, 0.0, sp).unwrap();
            // the top Fock level feels the truncated commutator
            let keep = 7;
            let (c, q) = (low_fock_block(&closed, sp, keep), low_fock_block(&quad, sp, keep));
            assert!(
                (&c - &q).norm() < 1e-8 * c.norm(),
                "{n}: {:e}",
                (&c - &q).norm() / c.norm()
            );
        }
    }

    #[test]
    fn twisting_cancels_across_segment_pair() {
        let sp = space(3, 6);
        let (phi1, phi2) = (0.6, 0.6 - PI);
        let first = magnus_theta2_segment(&seg(9.0, phi1, 0.2, 1), sp)
            .unwrap()
            .into_matrix();
        let second = magnus_theta2_segment(&seg(-9.0, phi2, 0.2, 1), sp)
            .unwrap()
            .into_matrix();
        let sum = &first + &second;
        let dir = twisting_direction(sp);
        assert!(operator_projection(&first, &dir).norm() > 1e-3);
        assert!(operator_projection(&sum, &dir).norm() < 1e-16);
        // what remains is the doubled squeezing term
        let scale = 8.0 * PI * 0.04 / 81.0;
        let a = destroy_matrix(6);
        let a2 = &a * &a;
        let p = C64::from_polar(1.0, -phi1);
        let sq = &a2 * p - a2.adjoint() * p.conj();
        let expected = spin_matrix(sp.spin(), Axis::Z).kronecker(&sq) * C64::from(scale);
        assert!((sum - expected).norm() < 1e-14);
        // equal phases cancel the squeezing too
        let same = magnus_theta2_segment(&seg(-9.0, phi1, 0.2, 1), sp)
            .unwrap()
            .into_matrix();
        assert!((first + same).norm() < 1e-14);
    }

    #[test]
    fn third_term_explains_propagator() {
        let sp = space(1, 12);
        for ratio in [0.01, 0.02] {
            let s = seg(1.0 / ratio, 0.9, 1.0, 1);
            let u = propagator(
                sp,
                &DriveSchedule::new(vec![s]).unwrap(),
                &PropagationConfig::with_tol(1e-12),
            )
            .unwrap()
            .into_matrix();
            let log_u = log_unitary(&u, 1e-3).unwrap();
            let omega2 = magnus_theta2_segment(&s, sp).unwrap().into_matrix() * C64::from(-0.5);
            let omega3 = magnus_omega3_quadrature(&s, 0.0, sp).unwrap();
            let keep = 6;
            let rest = low_fock_block(&(&log_u - &omega2), sp, keep);
            let o3 = low_fock_block(&omega3, sp, keep);
            // Ω₃ carries the residual beyond Ω₂ up to fourth order
            assert!(
                (&rest - &o3).norm() < 0.08 * o3.norm(),
                "{ratio}: {} vs {}",
                (&rest - &o3).norm(),
                o3.norm()
            );
        }
    }

    #[test]
    fn one_segment_follows_second_term() {
        use crate::dynamics::propagate;
        use crate::hilbert::{fidelity, Ket};
        for n in 1..=3 {
            let sp = space(n, 30);
            let s = seg(100.0, 0.4, 1.0, 1);
            let mut w = vec![C64::new(0.0, 0.0); n + 1];
            w[0] = C64::from(1.0);
            w[n] = C64::from(1.0);
            let k = Ket::product(sp, &w, &Ket::vacuum(sp.mode())).unwrap();
            let exact = propagate(&k, &DriveSchedule::new(vec![s]).unwrap(), &PropagationConfig::default()).unwrap();
            let theta2 = magnus_theta2_segment(&s, sp).unwrap().into_matrix();
            let approx = Ket::new(sp, expm_antihermitian(&(theta2 * C64::from(-0.5))) * k.amplitudes()).unwrap();
            assert!(fidelity(&exact.ket, &approx).unwrap() > 1.0 - 1e-4);
        }
    }

    #[test]
    fn log_unitary_inverts_exponential() {
        let sp = space(1, 5);
        let g = magnus_theta2_segment(&seg(2.0, 0.3, 0.5, 1), sp).unwrap().into_matrix();
        let u = expm_antihermitian(&g);
        assert!((log_unitary(&u, 1e-6).unwrap() - g).norm() < 1e-12);
    }

    #[test]
    fn twisting_suppressed_after_second_segment() {
        let sp = space(3, 8);
        let p = DriveParams::new(1.0, 100.0, 0.5, 0.5 - PI, 1, 1).unwrap();
        let schedule = DriveSchedule::stroboscopic(&p).unwrap();
        let dir = twisting_direction(sp);
        let cfg = PropagationConfig::with_tol(1e-12);
        let proj = |count| {
            let u = propagator(sp, &schedule.truncated(count), &cfg).unwrap().into_matrix();
            operator_projection(&log_unitary(&u, 1e-3).unwrap(), &dir).norm()
        };
        let (one, two) = (proj(1), proj(2));
        assert!(one > 10.0 * two, "{one} vs {two}");
    }

    #[test]
    fn matrix_element_scaling() {
        for term in HigherOrderTerm::ALL {
            let vals: Vec<f64> = (1..=256).map(|n| term.scaled_matrix_element(n).unwrap()).collect();
            // bounded: nothing beyond N = 64 exceeds the early values by more than 10%
            let early = vals[7..64].iter().cloned().fold(0.0, f64::max);
            let late = term.scaled_matrix_element(1024).unwrap();
            assert!(
                vals[255] <= 1.1 * early && late <= 1.1 * early,
                "{} grows",
                term.label()
            );
            if matches!(term, HigherOrderTerm::CubicJx | HigherOrderTerm::QuarticJz) {
                assert!(
                    vals[7..].windows(2).all(|w| w[1] < w[0]),
                    "{} not decreasing",
                    term.label()
                );
                assert!((vals[255] * 256.0 - vals[127] * 128.0).abs() < 1e-9);
            }
        }
        assert!((HigherOrderTerm::CubicJx.scaled_matrix_element(4).unwrap() - 0.125).abs() < 1e-12);
    }
}
