//! Dataset builders behind the command-line subcommands.
//!
//! Every builder takes a serde config with defaults for a desk-scale run and
//! returns plain rows; writing and provenance stamping live in [`crate::io`].

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    log_unitary, low_fock_block, magnus_theta2_quadrature, magnus_theta2_segment, operator_projection, propagate,
    propagator, trajectory, twisting_direction, DriveParams, DriveSchedule, PropagationConfig, ScheduleFile, Segment,
    TrajectoryPoint,
};
use crate::error::{Result, SdsError};
use crate::hilbert::{
    expm_antihermitian, fidelity, n_max_for_squeezing, HybridSpace, Ket, ModeSpace, DEFAULT_TAIL_THRESHOLD,
};
use crate::io::Record;
use crate::metrology::{
    bounds_report, incompatibility_sds, mode_occupation_sds, qfi_abs_beta, reference_limits, reference_table,
    sds_zeta_for_occupation, spin_states, BoundsReport, DickeWeights, Setting, SpinStateKind,
};
use crate::optimize::{search_states, SearchResult, SearchSpec, SweepGrid, SweepRow};
use crate::protocols::{
    ancilla_cfim, ancilla_probabilities_exact, bosonic_analogue, protocol_cfi, protocol_distribution,
    reference_state_occupation_mp, wigner, with_truncation_growth, AncillaReadout, AncillaSimulator, CfiRow,
    DistributionRow, PhaseGrid, Protocol, Route, MAX_SIMULATION_N_MAX,
};
use crate::C64;

/// Inclusive evenly spaced range.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Range {
    pub fn values(&self) -> Vec<f64> {
        SweepGrid::linspace(self.start, self.stop, self.count)
    }
}

pub const STATUS_OK: &str = "ok";

fn status_of<T>(r: &Result<T>) -> String {
    match r {
        Ok(_) => STATUS_OK.into(),
        Err(e) => format!("error: {e}"),
    }
}

fn ccrb_of(cfi: f64) -> f64 {
    if cfi > 0.0 {
        1.0 / cfi
    } else {
        f64::INFINITY
    }
}

// --- bounds -----------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsConfig {
    pub state: SpinStateKind,
    pub n_spins: Vec<usize>,
    pub zeta: Range,
    /// Signal phase for the phase-insensitive readout.
    pub phase: f64,
    /// Ancilla displacement strengths for the joint setting (one system spin).
    pub multi_g: Vec<f64>,
    pub multi_zeta: Range,
    pub route: Route,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        Self {
            state: SpinStateKind::CoherentX,
            n_spins: vec![1, 2, 3, 5, 7],
            zeta: Range {
                start: 0.1,
                stop: 4.0,
                count: 40,
            },
            phase: 0.0,
            multi_g: vec![0.2, 0.4, 0.6],
            multi_zeta: Range {
                start: 0.2,
                stop: 1.4,
                count: 7,
            },
            route: Route::Exact,
        }
    }
}

/// One bound comparison. `R` is the incompatibility of the spin-dependent squeezed
/// reference at the row's occupation; `g` is zero for phase-insensitive rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct BoundsRow {
    pub setting: Setting,
    pub N: usize,
    pub zeta: f64,
    pub g: f64,
    pub n_mean: f64,
    pub QCRB: f64,
    pub CCRB: f64,
    pub SQL: f64,
    pub HL: f64,
    pub R: f64,
    pub status: String,
}

impl Record for BoundsRow {
    const COLUMNS: &'static [&'static str] = &[
        "setting", "N", "zeta", "g", "n_mean", "QCRB", "CCRB", "SQL", "HL", "R", "status",
    ];
}

/// Readout used for the phase-insensitive rows of a given spin state.
pub fn readout_for(state: SpinStateKind, n_spins: usize) -> Result<Protocol> {
    match state {
        SpinStateKind::Ghz if n_spins == 1 => Ok(Protocol::SingleSpin),
        SpinStateKind::Ghz if n_spins.is_multiple_of(2) => Ok(Protocol::Ghz),
        SpinStateKind::Ghz => Err(SdsError::UnsupportedParity(n_spins)),
        SpinStateKind::CoherentX => Ok(Protocol::Coherent),
    }
}

fn abs_row(config: &BoundsConfig, n: usize, zeta: f64) -> BoundsRow {
    let computed = (|| -> Result<(f64, f64, f64, f64)> {
        let w = spin_states(config.state, n)?;
        let n_mean = mode_occupation_sds(&w, zeta)?;
        let qcrb = 1.0 / qfi_abs_beta(&w, zeta)?;
        let r = incompatibility_sds(&w, zeta)?;
        let protocol = readout_for(config.state, n)?;
        let cfi = protocol_cfi(protocol, n, zeta, config.phase, config.route)?
            .scalar()
            .unwrap_or(0.0);
        Ok((n_mean, qcrb, ccrb_of(cfi), r))
    })();
    let (n_mean, qcrb, ccrb, r) = computed.clone().unwrap_or((f64::NAN, f64::NAN, f64::NAN, f64::NAN));
    let (sql, hl) = reference_limits(Setting::Abs, n_mean);
    BoundsRow {
        setting: Setting::Abs,
        N: n,
        zeta,
        g: 0.0,
        n_mean,
        QCRB: qcrb,
        CCRB: ccrb,
        SQL: sql,
        HL: hl,
        R: r,
        status: status_of(&computed),
    }
}

/// Ancilla readout on one system spin, by closed-form braiding or full simulation.
pub fn ancilla_readout_fn(
    zeta: f64,
    g: f64,
    route: Route,
) -> Result<Box<dyn Fn(C64) -> Result<AncillaReadout> + Sync>> {
    Ok(match route {
        Route::Exact => Box::new(move |b| ancilla_probabilities_exact(zeta, g, b)),
        Route::Simulated => {
            let sim = AncillaSimulator::new(zeta, g)?;
            Box::new(move |b| sim.readout(b))
        }
    })
}

fn multi_row(zeta: f64, g: f64, route: Route) -> BoundsRow {
    let computed = (|| -> Result<(f64, f64)> {
        let n_mean = reference_state_occupation_mp(zeta, g)?;
        let f = ancilla_cfim(ancilla_readout_fn(zeta, g, route)?, zeta, g)?;
        let ccrb = f.matrix().map_or(f64::INFINITY, |m| m.trace_inverse());
        Ok((n_mean, ccrb))
    })();
    let (n_mean, ccrb) = computed.clone().unwrap_or((f64::NAN, f64::NAN));
    let (sql, hl) = reference_limits(Setting::Multi, n_mean);
    BoundsRow {
        setting: Setting::Multi,
        N: 1,
        zeta,
        g,
        n_mean,
        // the symmetric-weight reference saturates the joint Heisenberg limit
        QCRB: hl,
        CCRB: ccrb,
        SQL: sql,
        HL: hl,
        R: 1.0 / (2.0 * n_mean + 1.0),
        status: status_of(&computed),
    }
}

pub fn bounds_rows(config: &BoundsConfig) -> Vec<BoundsRow> {
    let zetas = config.zeta.values();
    let abs: Vec<(usize, f64)> = config
        .n_spins
        .iter()
        .flat_map(|&n| zetas.iter().map(move |&z| (n, z)))
        .collect();
    let multi_zetas = config.multi_zeta.values();
    let multi: Vec<(f64, f64)> = config
        .multi_g
        .iter()
        .flat_map(|&g| multi_zetas.iter().map(move |&z| (g, z)))
        .collect();
    let mut rows: Vec<BoundsRow> = abs.par_iter().map(|&(n, z)| abs_row(config, n, z)).collect();
    rows.extend(
        multi
            .par_iter()
            .map(|&(g, z)| multi_row(z, g, config.route))
            .collect::<Vec<_>>(),
    );
    rows
}

// --- protocol ---------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    pub protocol: Protocol,
    pub n_spins: usize,
    pub zeta: Vec<f64>,
    /// Signals `[re, im]` at which distributions are tabulated.
    pub betas: Vec<[f64; 2]>,
    pub phase: f64,
    pub route: Route,
    /// Ancilla strengths; each adds joint-setting rows for one system spin.
    pub ancilla_g: Vec<f64>,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            protocol: Protocol::SingleSpin,
            n_spins: 1,
            zeta: vec![0.5, 1.0, 2.0],
            betas: vec![[0.1, 0.0], [0.0, 0.1], [0.2, 0.1]],
            phase: 0.0,
            route: Route::Simulated,
            ancilla_g: vec![0.2],
        }
    }
}

impl Record for DistributionRow {
    const COLUMNS: &'static [&'static str] = &["N", "zeta", "g", "beta_re", "beta_im", "label", "probability"];
}

/// For joint-setting rows `cfi` is the `β_re` diagonal entry and `ccrb` is `Tr F⁻¹`.
impl Record for CfiRow {
    const COLUMNS: &'static [&'static str] = &["setting", "N", "zeta", "n_mean", "cfi", "ccrb"];
}

pub fn protocol_rows(config: &ProtocolConfig) -> Result<(Vec<DistributionRow>, Vec<CfiRow>)> {
    if config.zeta.iter().any(|z| !z.is_finite()) {
        return Err(SdsError::InvalidParameter("squeezing values must be finite".into()));
    }
    let n = config.n_spins;
    let w = spin_states(SpinStateKind::Ghz, n)?;
    let per_zeta: Vec<(Vec<DistributionRow>, Vec<CfiRow>)> = config
        .zeta
        .par_iter()
        .map(|&zeta| -> Result<_> {
            let mut dist = Vec::new();
            for &[re, im] in &config.betas {
                let beta = C64::new(re, im);
                let d = protocol_distribution(config.protocol, n, zeta, beta, config.route)?;
                dist.extend(DistributionRow::from_distribution(n, zeta, 0.0, beta, &d));
            }
            let occupation = match config.protocol {
                Protocol::Coherent => mode_occupation_sds(&spin_states(SpinStateKind::CoherentX, n)?, zeta)?,
                _ => mode_occupation_sds(&w, zeta)?,
            };
            let cfi = protocol_cfi(config.protocol, n, zeta, config.phase, config.route)?
                .scalar()
                .unwrap_or(0.0);
            let mut cfis = vec![CfiRow::new(Setting::Abs, n, zeta, occupation, cfi)];
            for &g in &config.ancilla_g {
                let readout = ancilla_readout_fn(zeta, g, config.route)?;
                for &[re, im] in &config.betas {
                    let beta = C64::new(re, im);
                    dist.extend(DistributionRow::from_distribution(
                        1,
                        zeta,
                        g,
                        beta,
                        &readout(beta)?.joint,
                    ));
                }
                let f = ancilla_cfim(readout, zeta, g)?;
                let m = f
                    .matrix()
                    .ok_or_else(|| SdsError::Verification("expected a Fisher matrix".into()))?;
                cfis.push(CfiRow {
                    setting: Setting::Multi,
                    n_spins: 1,
                    zeta,
                    n_mean: reference_state_occupation_mp(zeta, g)?,
                    cfi: m.get(0, 0),
                    ccrb: m.trace_inverse(),
                });
            }
            Ok((dist, cfis))
        })
        .collect::<Result<_>>()?;
    Ok(per_zeta
        .into_iter()
        .fold((Vec::new(), Vec::new()), |(mut d, mut c), (dz, cz)| {
            d.extend(dz);
            c.extend(cz);
            (d, c)
        }))
}

// --- wigner -----------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WignerConfig {
    pub state: SpinStateKind,
    pub n_spins: usize,
    pub zeta: f64,
    pub half_width: f64,
    pub resolution: usize,
    pub n_max: Option<usize>,
}

impl Default for WignerConfig {
    fn default() -> Self {
        Self {
            state: SpinStateKind::CoherentX,
            n_spins: 10,
            zeta: 0.3,
            half_width: 6.0,
            resolution: 121,
            n_max: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WignerRow {
    pub x: f64,
    pub p: f64,
    pub w: f64,
}

impl Record for WignerRow {
    const COLUMNS: &'static [&'static str] = &["x", "p", "w"];
}

/// Bosonic analogue of the configured state and its Wigner function, row-major in `x`.
pub fn wigner_rows(config: &WignerConfig) -> Result<(Ket, Vec<WignerRow>)> {
    if config.resolution == 0 || !(config.half_width > 0.0) {
        return Err(SdsError::InvalidParameter(
            "need a positive grid width and resolution".into(),
        ));
    }
    let w = spin_states(config.state, config.n_spins)?;
    let z = config.zeta.abs() * config.n_spins as f64 / 2.0;
    let start = config.n_max.unwrap_or_else(|| n_max_for_squeezing(z));
    let ket = with_truncation_growth(start, MAX_SIMULATION_N_MAX, |n| {
        let ket = bosonic_analogue(&w, config.zeta, ModeSpace::new(n)?)?;
        ket.check_truncation(DEFAULT_TAIL_THRESHOLD)?;
        Ok(ket)
    })?;
    let field = wigner(
        ket.amplitudes(),
        PhaseGrid::square(config.half_width, config.resolution),
    )?;
    let (xs, ps) = (field.grid.xs(), field.grid.ps());
    let rows = xs
        .iter()
        .enumerate()
        .flat_map(|(i, &x)| ps.iter().enumerate().map(move |(j, &p)| (i, j, x, p)))
        .map(|(i, j, x, p)| WignerRow {
            x,
            p,
            w: field.values[(i, j)],
        })
        .collect();
    Ok((ket, rows))
}

// --- magnus check -------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MagnusConfig {
    pub n_spins: Vec<usize>,
    pub g_over_delta: f64,
    pub ell: u32,
    pub phase: f64,
    /// Truncation for state propagation.
    pub n_max: usize,
    /// Truncation for operator-level checks; residuals use the levels below the top one.
    pub operator_n_max: usize,
    pub propagation: PropagationConfig,
}

impl Default for MagnusConfig {
    fn default() -> Self {
        Self {
            n_spins: vec![1, 2, 3],
            g_over_delta: 0.01,
            ell: 1,
            phase: 0.4,
            n_max: 30,
            operator_n_max: 8,
            propagation: PropagationConfig::with_tol(1e-12),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MagnusCheck {
    #[serde(rename = "N")]
    pub n_spins: usize,
    /// Relative difference between the closed-form second term and nested quadrature.
    pub theta2_residual: f64,
    /// Fidelity of one propagated segment with `exp(−½Θ₂)` on GHZ ⊗ vacuum.
    pub segment_fidelity: f64,
    /// Twisting projections; absent for one spin, where `Jx² − Jy²` vanishes.
    pub twisting_one_segment: Option<f64>,
    pub twisting_two_segments: Option<f64>,
    pub twisting_suppression: Option<f64>,
    /// `1 − F` between the four-segment echo and its sign-flipped mirror.
    pub echo_infidelity: f64,
    pub passed: bool,
}

/// Pass thresholds of a Magnus check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MagnusThresholds {
    pub theta2_residual: f64,
    pub segment_infidelity: f64,
    pub twisting_suppression: f64,
    pub echo_infidelity: f64,
}

impl MagnusThresholds {
    /// Echo agreement is judged against the integrator tolerance.
    pub fn for_tolerance(rel_tol: f64) -> Self {
        Self {
            theta2_residual: 1e-8,
            segment_infidelity: 1e-4,
            twisting_suppression: 10.0,
            echo_infidelity: rel_tol.max(1e-12),
        }
    }

    pub fn accepts(&self, c: &MagnusCheck) -> bool {
        c.theta2_residual < self.theta2_residual
            && c.segment_fidelity >= 1.0 - self.segment_infidelity
            && c.twisting_suppression.is_none_or(|r| r >= self.twisting_suppression)
            && c.echo_infidelity <= self.echo_infidelity
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MagnusReport {
    pub g_over_delta: f64,
    pub ell: u32,
    pub thresholds: MagnusThresholds,
    pub checks: Vec<MagnusCheck>,
}

impl MagnusReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn ghz_vacuum(space: HybridSpace) -> Result<Ket> {
    let n = space.spin().n_spins();
    let w = spin_states(SpinStateKind::Ghz, n)?;
    Ket::product(space, w.weights(), &Ket::vacuum(space.mode()))
}

fn magnus_check(config: &MagnusConfig, n: usize) -> Result<MagnusCheck> {
    let delta = 1.0 / config.g_over_delta;
    let segment = Segment {
        detuning: delta,
        phase: config.phase,
        base_phase: 0.0,
        coupling: 1.0,
        loops: config.ell,
    };
    let op_space = HybridSpace::spin_mode(n, config.operator_n_max)?;
    let keep = config.operator_n_max - 1;
    let closed = magnus_theta2_segment(&segment, op_space)?.into_matrix();
    let quad = magnus_theta2_quadrature(&segment, 0.0, op_space)?;
    let (c, q) = (
        low_fock_block(&closed, op_space, keep),
        low_fock_block(&quad, op_space, keep),
    );
    let theta2_residual = (&c - &q).norm() / c.norm();

    let space = HybridSpace::spin_mode(n, config.n_max)?;
    let ket = ghz_vacuum(space)?;
    let one = DriveSchedule::new(vec![segment])?;
    let exact = propagate(&ket, &one, &config.propagation)?;
    let theta2 = magnus_theta2_segment(&segment, space)?.into_matrix();
    let approx = Ket::new(
        space,
        expm_antihermitian(&(theta2 * C64::from(-0.5))) * ket.amplitudes(),
    )?;
    let segment_fidelity = fidelity(&exact.ket, &approx)?;

    let params = DriveParams::new(1.0, delta, config.phase, config.phase - PI, config.ell, 1)?;
    let schedule = DriveSchedule::stroboscopic(&params)?;
    let dir = twisting_direction(op_space);
    let projection = |count: usize| -> Result<f64> {
        let u = propagator(op_space, &schedule.truncated(count), &config.propagation)?.into_matrix();
        Ok(operator_projection(&log_unitary(&u, 1e-3)?, &dir).norm())
    };
    let (t1, t2) = if dir.norm() > 0.0 {
        (Some(projection(1)?), Some(projection(2)?))
    } else {
        (None, None)
    };

    let echo = propagate(&ket, &schedule, &config.propagation)?;
    let mirror = propagate(&ket, &schedule.mirrored(), &config.propagation)?;
    let echo_infidelity = (1.0 - fidelity(&echo.ket, &mirror.ket)?).max(0.0);

    let mut check = MagnusCheck {
        n_spins: n,
        theta2_residual,
        segment_fidelity,
        twisting_one_segment: t1,
        twisting_two_segments: t2,
        twisting_suppression: t1.zip(t2).map(|(a, b)| a / b),
        echo_infidelity,
        passed: false,
    };
    check.passed = MagnusThresholds::for_tolerance(config.propagation.rel_tol).accepts(&check);
    Ok(check)
}

pub fn magnus_report(config: &MagnusConfig) -> Result<MagnusReport> {
    if !(config.g_over_delta > 0.0) || config.operator_n_max < 2 {
        return Err(SdsError::InvalidParameter(
            "need g/Δ > 0 and an operator truncation ≥ 2".into(),
        ));
    }
    config.propagation.validate()?;
    let checks = config
        .n_spins
        .par_iter()
        .map(|&n| magnus_check(config, n))
        .collect::<Result<_>>()?;
    Ok(MagnusReport {
        g_over_delta: config.g_over_delta,
        ell: config.ell,
        thresholds: MagnusThresholds::for_tolerance(config.propagation.rel_tol),
        checks,
    })
}

// --- reference table ----------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TableConfig {
    pub state: SpinStateKind,
    pub n_spins: Vec<usize>,
    pub occupations: Vec<f64>,
}

impl Default for TableConfig {
    fn default() -> Self {
        Self {
            state: SpinStateKind::Ghz,
            n_spins: vec![1, 2, 4],
            occupations: vec![1.0, 3.0, 10.0],
        }
    }
}

/// Reference-state QCRBs; empty cells mark settings without a known bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct TableCsvRow {
    pub N: usize,
    pub state: String,
    pub n_mean: f64,
    pub v_single: Option<f64>,
    pub v_abs: Option<f64>,
    pub v_multi: Option<f64>,
}

impl Record for TableCsvRow {
    const COLUMNS: &'static [&'static str] = &["N", "state", "n_mean", "v_single", "v_abs", "v_multi"];
}

pub fn table_rows(config: &TableConfig) -> Result<(Vec<TableCsvRow>, Vec<BoundsReport>)> {
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for &n in &config.n_spins {
        let w: DickeWeights = spin_states(config.state, n)?;
        for &occ in &config.occupations {
            rows.extend(reference_table(&w, occ)?.into_iter().map(|r| TableCsvRow {
                N: n,
                state: r.state,
                n_mean: r.mode_occupation,
                v_single: r.v_single,
                v_abs: r.v_abs,
                v_multi: r.v_multi,
            }));
            reports.push(bounds_report(&w, sds_zeta_for_occupation(&w, occ)?)?);
        }
    }
    Ok((rows, reports))
}

// --- minimum-time dataset -------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig4Config {
    pub grid: SweepGrid,
    /// Settings shared by every grid point; its `N`, `z` and `g` are overridden.
    pub search: SearchSpec,
    /// Write the schedule and trajectory of every feasible point.
    pub trajectories: bool,
}

impl Default for Fig4Config {
    fn default() -> Self {
        Self {
            grid: SweepGrid::default(),
            search: SearchSpec::default(),
            trajectories: true,
        }
    }
}

impl Record for TrajectoryPoint {
    const COLUMNS: &'static [&'static str] = &["t", "fidelity", "n_mean", "norm_error"];
}

impl Fig4Config {
    /// Search spec of a finished row.
    pub fn spec_for(&self, row: &SweepRow) -> SearchSpec {
        SearchSpec {
            n_spins: row.N,
            z: row.z,
            g: row.g_Hz * 2.0 * PI,
            ..self.search.clone()
        }
    }
}

/// Schedule file and segment-resolved trajectory for a feasible row.
pub fn row_trajectory(config: &Fig4Config, row: &SweepRow) -> Result<(ScheduleFile, Vec<TrajectoryPoint>)> {
    let reps = row
        .P
        .ok_or_else(|| SdsError::InvalidParameter("row has no feasible repetition count".into()))?;
    let spec = config.spec_for(row);
    let params = spec.params(reps)?;
    let (init, target) = search_states(&spec, &params, row.n_max)?;
    let schedule = DriveSchedule::stroboscopic(&params)?;
    let (_, points) = trajectory(&init, &schedule, &spec.propagation, &target)?;
    Ok((ScheduleFile::from_params(&params, row.N, row.n_max), points))
}

/// Rebuilds the search result a row records.
pub fn row_result(config: &Fig4Config, row: &SweepRow) -> Result<SearchResult> {
    let spec = config.spec_for(row);
    let reps = row
        .P
        .ok_or_else(|| SdsError::InvalidParameter("row has no feasible repetition count".into()))?;
    let params = spec.params(reps)?;
    Ok(SearchResult {
        params,
        t_min: params.total_duration(),
        fidelity: row.fidelity,
        n_max: row.n_max,
        speed_limit: row.t_f_star_s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_squeezing_bound_diverges() {
        let row = abs_row(&BoundsConfig::default(), 1, 0.0);
        assert_eq!(row.status, STATUS_OK);
        assert!(row.CCRB.is_infinite() && row.CCRB > 0.0);
        assert!((row.QCRB - row.SQL).abs() < 1e-12);
    }

    #[test]
    fn odd_ghz_rows_are_flagged() {
        let ghz = BoundsConfig {
            state: SpinStateKind::Ghz,
            ..BoundsConfig::default()
        };
        let row = abs_row(&ghz, 3, 0.5);
        assert!(row.status.starts_with("error"));
        assert!(row.CCRB.is_nan());
    }

    #[test]
    fn single_spin_ccrb_near_two_qcrb() {
        // CCRB/QCRB = 2 + 1/⟨n⟩ for one spin
        let row = abs_row(&BoundsConfig::default(), 1, 2.0);
        let ratio = row.CCRB / row.QCRB;
        assert!((ratio - (2.0 + 1.0 / row.n_mean)).abs() < 1e-4 * ratio, "{ratio}");
    }

    #[test]
    fn ccrb_decibels_below_sql() {
        // ⟨n⟩ = sinh²(ζ/2) = 10 for one spin, CCRB = 1/(4⟨n⟩)
        let zeta = 2.0 * 10f64.sqrt().asinh();
        let row = abs_row(&BoundsConfig::default(), 1, zeta);
        assert!((row.n_mean - 10.0).abs() < 1e-9);
        let db = 10.0 * (row.CCRB / row.SQL).log10();
        assert!((db + 10.0).abs() < 1e-3, "{db}");
        // never below the Heisenberg limit
        assert!(row.CCRB > row.HL);
    }

    #[test]
    fn magnus_report_passes_at_small_ratio() {
        let r = magnus_report(&MagnusConfig {
            n_spins: vec![1, 2],
            n_max: 20,
            operator_n_max: 6,
            ..MagnusConfig::default()
        })
        .unwrap();
        assert!(r.passed(), "{r:?}");
        assert!(r.checks[0].twisting_suppression.is_none());
        assert!(r.checks[1].theta2_residual < 1e-8);
    }

    #[test]
    fn table_covers_every_state() {
        let (rows, reports) = table_rows(&TableConfig {
            n_spins: vec![2],
            occupations: vec![3.0],
            ..TableConfig::default()
        })
        .unwrap();
        assert_eq!(reports.len(), 1);
        assert!((reports[0].mode_occupation - 3.0).abs() < 1e-9);
        assert!(rows
            .iter()
            .any(|r| r.state == "spin_dependent_squeezed" && r.v_abs.is_some()));
    }

    #[test]
    fn wigner_grid_is_complete() {
        let cfg = WignerConfig {
            resolution: 11,
            ..WignerConfig::default()
        };
        let (ket, rows) = wigner_rows(&cfg).unwrap();
        assert_eq!(rows.len(), 121);
        assert!((ket.norm() - 1.0).abs() < 1e-8);
        assert!(rows.iter().any(|r| r.w < 0.0));
    }
}
