use serde::{Deserialize, Serialize};

use super::{incompatibility_sds, mode_occupation_sds, qfi_abs_beta, qfim_general, DickeWeights};
use crate::error::{Result, SdsError};
use crate::C64;

/// Estimation setting: phase-aligned `β_re`, phase-insensitive `|β|`, or joint `(β_re, β_im)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Setting {
    Single,
    Abs,
    Multi,
}

impl Setting {
    pub fn as_str(&self) -> &'static str {
        match self {
            Setting::Single => "single",
            Setting::Abs => "abs",
            Setting::Multi => "multi",
        }
    }
}

impl std::str::FromStr for Setting {
    type Err = SdsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(Self::Single),
            "abs" => Ok(Self::Abs),
            "multi" => Ok(Self::Multi),
            other => Err(SdsError::InvalidParameter(format!("unknown setting {other:?}"))),
        }
    }
}

/// `(SQL, HL)` for a single bosonic mode with mean occupation `n_avg`.
pub fn reference_limits(setting: Setting, n_avg: f64) -> (f64, f64) {
    match setting {
        Setting::Single => (0.25, 1.0 / (16.0 * n_avg + 4.0)),
        Setting::Abs => (0.25, 1.0 / (8.0 * n_avg + 4.0)),
        Setting::Multi => (0.5, 1.0 / (4.0 * n_avg + 2.0)),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SettingBounds {
    pub setting: Setting,
    pub qcrb: f64,
    pub sql: f64,
    pub hl: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub n_spins: usize,
    pub zeta: f64,
    pub mode_occupation: f64,
    pub settings: Vec<SettingBounds>,
    pub r: f64,
}

/// Closed-form QCRBs of the spin-dependent squeezed reference for every setting.
pub fn bounds_report(w: &DickeWeights, zeta: f64) -> Result<BoundsReport> {
    let n = mode_occupation_sds(w, zeta)?;
    let q = qfi_abs_beta(w, zeta)?;
    let settings = [Setting::Single, Setting::Abs, Setting::Multi]
        .into_iter()
        .map(|setting| {
            let (sql, hl) = reference_limits(setting, n);
            let qcrb = match setting {
                Setting::Single | Setting::Abs => 1.0 / q,
                Setting::Multi => 2.0 / q,
            };
            SettingBounds { setting, qcrb, sql, hl }
        })
        .collect();
    Ok(BoundsReport {
        n_spins: w.n_spins(),
        zeta,
        mode_occupation: n,
        settings,
        r: incompatibility_sds(w, zeta)?,
    })
}

/// One reference-state row of the comparison table; `None` where no bound is given.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub state: String,
    pub mode_occupation: f64,
    pub v_single: Option<f64>,
    pub v_abs: Option<f64>,
    pub v_multi: Option<f64>,
}

/// Exact QCRBs at occupation `n_avg` for the coherent, squeezed, spin-dependent
/// displaced and spin-dependent squeezed references, plus the SQL and HL rows.
pub fn reference_table(w: &DickeWeights, n_avg: f64) -> Result<Vec<TableRow>> {
    if !(n_avg >= 0.0) {
        return Err(SdsError::InvalidParameter(format!(
            "mean occupation must be >= 0, got {n_avg}"
        )));
    }
    let row = |state: &str, s: Option<f64>, a: Option<f64>, m: Option<f64>| TableRow {
        state: state.to_string(),
        mode_occupation: n_avg,
        v_single: s,
        v_abs: a,
        v_multi: m,
    };
    let (sql1, hl1) = reference_limits(Setting::Single, n_avg);
    let (sqla, hla) = reference_limits(Setting::Abs, n_avg);
    let (sqlm, hlm) = reference_limits(Setting::Multi, n_avg);

    // squeezed vacuum with sinh²r = n
    let r = n_avg.sqrt().asinh();
    let squeezed = row(
        "squeezed",
        Some((-2.0 * r).exp() / 4.0),
        None,
        Some(((2.0 * r).exp() + (-2.0 * r).exp()) / 4.0),
    );

    // spin-dependent displacement D(αJz) along the imaginary axis with Σ|c_m|²|αm|² = n
    w.require_symmetric()?;
    let jz2: f64 = w.populations().map(|(m, p)| p * m * m).sum();
    let sdd = if jz2 > 0.0 {
        let a = (n_avg / jz2).sqrt();
        let q = qfim_general(w, C64::new(0.0, a), 0.0, C64::new(0.0, 0.0));
        row(
            "spin_dependent_displaced",
            Some(1.0 / q.get(0, 0)),
            None,
            Some(q.trace_inverse()),
        )
    } else {
        row("spin_dependent_displaced", None, None, None)
    };

    let zeta = sds_zeta_for_occupation(w, n_avg)?;
    let q = qfi_abs_beta(w, zeta)?;
    let sds = row("spin_dependent_squeezed", Some(1.0 / q), Some(1.0 / q), Some(2.0 / q));

    Ok(vec![
        row("sql", Some(sql1), Some(sqla), Some(sqlm)),
        row("heisenberg", Some(hl1), Some(hla), Some(hlm)),
        squeezed,
        sdd,
        sds,
    ])
}

/// Smallest `ζ ≥ 0` with `mode_occupation_sds(w, ζ) = n_avg`, by bisection.
pub fn sds_zeta_for_occupation(w: &DickeWeights, n_avg: f64) -> Result<f64> {
    if n_avg == 0.0 {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    while mode_occupation_sds(w, hi)? < n_avg {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(SdsError::InvalidParameter(
                "spin state cannot reach the requested occupation".into(),
            ));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mode_occupation_sds(w, mid)? < n_avg {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrology::{spin_states, SpinStateKind};

    #[test]
    fn limits_constants() {
        for n in [0.0, 1.0, 7.5] {
            assert_eq!(reference_limits(Setting::Abs, n).0, 0.25);
            assert_eq!(reference_limits(Setting::Single, n).0, 0.25);
            assert_eq!(reference_limits(Setting::Multi, n).0, 0.5);
        }
        assert!((reference_limits(Setting::Multi, 1.0).1 - 1.0 / 6.0).abs() < 1e-16);
    }

    #[test]
    fn report_saturates_heisenberg() {
        let w = spin_states(SpinStateKind::CoherentX, 5).unwrap();
        let rep = bounds_report(&w, 0.6).unwrap();
        for s in &rep.settings {
            assert!(s.qcrb >= s.hl * (1.0 - 1e-12));
            if s.setting != Setting::Single {
                assert!((s.qcrb - s.hl).abs() < 1e-12 * s.hl);
            }
        }
    }

    #[test]
    fn table_rows_match_closed_forms() {
        let w = spin_states(SpinStateKind::Ghz, 2).unwrap();
        let n = 3.0;
        let rows = reference_table(&w, n).unwrap();
        let get = |name: &str| rows.iter().find(|r| r.state == name).unwrap().clone();
        let sq = get("squeezed");
        assert!((sq.v_multi.unwrap() - (n + 0.5)).abs() < 1e-12);
        let sdd = get("spin_dependent_displaced");
        assert!((sdd.v_single.unwrap() - 1.0 / (16.0 * n + 4.0)).abs() < 1e-14);
        assert!((sdd.v_multi.unwrap() - (1.0 / (16.0 * n + 4.0) + 0.25)).abs() < 1e-14);
        let sds = get("spin_dependent_squeezed");
        assert!((sds.v_abs.unwrap() - 1.0 / (8.0 * n + 4.0)).abs() < 1e-12);
        assert!((sds.v_multi.unwrap() - 1.0 / (4.0 * n + 2.0)).abs() < 1e-12);
    }
}
