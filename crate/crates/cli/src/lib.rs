//! Subcommands of the `sds` dataset generator.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use sds_core::datasets::{
    bounds_rows, magnus_report, protocol_rows, row_trajectory, table_rows, wigner_rows, BoundsConfig, Fig4Config,
    MagnusConfig, ProtocolConfig, TableConfig, WignerConfig,
};
use sds_core::io::{read_rows, write_json, write_rows, Provenance, Record, Stamped};
use sds_core::optimize::{sweep, SweepRow};
use sds_core::SdsError;

#[derive(Debug, Parser)]
#[command(name = "sds", version, about = "Datasets for spin-dependent squeezed states")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// JSON parameter file for the subcommand; omitted fields take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Integrator tolerance override.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Quantum and classical bounds per setting.
    Bounds,
    /// Readout distributions and Fisher information.
    Protocol,
    /// Minimum-time drive search over an (N, z) grid; resumes from an existing dataset.
    Fig4,
    /// Wigner function of the bosonic analogue.
    Wigner,
    /// Magnus-expansion verification report.
    MagnusCheck,
    /// Reference-state bound table.
    SdsTable,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Bounds => "bounds",
            Command::Protocol => "protocol",
            Command::Fig4 => "fig4",
            Command::Wigner => "wigner",
            Command::MagnusCheck => "magnus-check",
            Command::SdsTable => "sds-table",
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<SdsError> for CliError {
    fn from(e: SdsError) -> Self {
        match e {
            SdsError::InvalidParameter(_)
            | SdsError::Format(_)
            | SdsError::Io(_)
            | SdsError::NonSymmetricWeights
            | SdsError::UnsupportedParity(_)
            | SdsError::DimensionMismatch { .. } => CliError::Config(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Files written by a subcommand.
#[derive(Debug, Default)]
pub struct Outputs {
    pub files: Vec<PathBuf>,
}

fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

struct Emitter {
    dir: PathBuf,
    outputs: Outputs,
}

impl Emitter {
    fn new(dir: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Config(format!("{}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            outputs: Outputs::default(),
        })
    }

    fn csv<T: Record>(&mut self, name: &str, provenance: &Provenance, rows: &[T]) -> CliResult<()> {
        let path = self.dir.join(name);
        write_rows(&path, provenance, rows)?;
        self.outputs.files.push(path);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, provenance: &Provenance, payload: T) -> CliResult<()> {
        let path = self.dir.join(name);
        write_json(
            &path,
            &Stamped {
                provenance: provenance.clone(),
                payload,
            },
        )?;
        self.outputs.files.push(path);
        Ok(())
    }
}

/// Fails with a numerical error when every row failed.
fn require_some_ok<'a>(statuses: impl Iterator<Item = &'a str>) -> CliResult<()> {
    let (mut total, mut ok) = (0, 0);
    for s in statuses {
        total += 1;
        ok += usize::from(s == "ok");
    }
    if total > 0 && ok == 0 {
        Err(CliError::Numerical(format!("all {total} rows failed")))
    } else {
        Ok(())
    }
}

pub fn run(command: Command, args: &RunArgs) -> CliResult<Outputs> {
    if let Some(tol) = args.tol {
        if !(tol > 0.0 && tol < 1.0) {
            return Err(CliError::Config(format!("--tol must lie in (0, 1), got {tol}")));
        }
    }
    match args.workers {
        Some(0) => Err(CliError::Config("--workers must be positive".into())),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| CliError::Config(e.to_string()))?;
            pool.install(|| dispatch(command, args))
        }
        None => dispatch(command, args),
    }
}

fn dispatch(command: Command, args: &RunArgs) -> CliResult<Outputs> {
    let mut out = Emitter::new(&args.out)?;
    let config = args.config.as_deref();
    match command {
        Command::Bounds => {
            let cfg: BoundsConfig = load_config(config)?;
            let prov = Provenance::new("bounds/1", &cfg)?;
            let rows = bounds_rows(&cfg);
            out.csv("bounds.csv", &prov, &rows)?;
            require_some_ok(rows.iter().map(|r| r.status.as_str()))?;
        }
        Command::Protocol => {
            let cfg: ProtocolConfig = load_config(config)?;
            let (dist, cfi) = protocol_rows(&cfg)?;
            out.csv(
                "protocol_distributions.csv",
                &Provenance::new("distribution/1", &cfg)?,
                &dist,
            )?;
            out.csv("protocol_cfi.csv", &Provenance::new("cfi/1", &cfg)?, &cfi)?;
        }
        Command::Fig4 => {
            let mut cfg: Fig4Config = load_config(config)?;
            if let Some(tol) = args.tol {
                cfg.search.propagation.rel_tol = tol;
            }
            cfg.search.propagation.validate()?;
            if !(cfg.grid.eta > 0.0) {
                return Err(CliError::Config(format!("eta must be positive, got {}", cfg.grid.eta)));
            }
            let prov = Provenance::new("fig4/1", &cfg)?;
            let path = args.out.join("fig4.csv");
            let done = previous_rows(&path, &prov);
            let rows = sweep(&cfg.grid, &cfg.search, &done);
            out.csv("fig4.csv", &prov, &rows)?;
            if cfg.trajectories {
                let dir = args.out.join("fig4");
                std::fs::create_dir_all(&dir).map_err(|e| CliError::Config(e.to_string()))?;
                let traj_prov = Provenance::new("trajectory/1", &cfg)?;
                let mut sub = Emitter {
                    dir,
                    outputs: Outputs::default(),
                };
                for row in rows.iter().filter(|r| r.is_ok()) {
                    let stem = format!("N{}_z{:.3}", row.N, row.z);
                    let (schedule, points) = row_trajectory(&cfg, row)?;
                    sub.json(&format!("schedule_{stem}.json"), &traj_prov, schedule)?;
                    sub.csv(&format!("trajectory_{stem}.csv"), &traj_prov, &points)?;
                }
                out.outputs.files.extend(sub.outputs.files);
            }
            require_some_ok(rows.iter().map(|r| r.status.as_str()))?;
        }
        Command::Wigner => {
            let cfg: WignerConfig = load_config(config)?;
            let prov = Provenance::new("wigner/1", &cfg)?;
            let (ket, rows) = wigner_rows(&cfg)?;
            out.csv("wigner.csv", &prov, &rows)?;
            out.json("wigner_amplitudes.json", &prov, ket.to_dump())?;
        }
        Command::MagnusCheck => {
            let mut cfg: MagnusConfig = load_config(config)?;
            if let Some(tol) = args.tol {
                cfg.propagation.rel_tol = tol;
            }
            let prov = Provenance::new("magnus/1", &cfg)?;
            let report = magnus_report(&cfg)?;
            let passed = report.passed();
            out.json("magnus_check.json", &prov, &report)?;
            if !passed {
                return Err(CliError::Numerical(
                    "Magnus checks failed; see magnus_check.json".into(),
                ));
            }
        }
        Command::SdsTable => {
            let cfg: TableConfig = load_config(config)?;
            let (rows, reports) = table_rows(&cfg)?;
            let prov = Provenance::new("sds_table/1", &cfg)?;
            out.csv("sds_table.csv", &prov, &rows)?;
            out.json("sds_bounds.json", &prov, serde_json::json!({ "reports": reports }))?;
        }
    }
    Ok(out.outputs)
}

/// Completed rows of an earlier run with the same configuration.
fn previous_rows(path: &Path, provenance: &Provenance) -> Vec<SweepRow> {
    match read_rows::<SweepRow>(path) {
        Ok((prev, rows)) if prev.schema == provenance.schema && prev.config_sha256 == provenance.config_sha256 => rows,
        _ => Vec::new(),
    }
}
