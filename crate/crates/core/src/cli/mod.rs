//! Command-line front end: sweeps, critical-coupling tables, fits, maps and
//! an invariant check, with results cached on disk.

mod commands;
mod tables;
mod verify;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::critical::{Gc2Variant, DEFAULT_DC1, DEFAULT_FIT_GRID};
use crate::error::QrmError;
use crate::ed::{EdOptions, DEFAULT_CUTOFF_LIMIT};
use crate::qfi::QfiOptions;
use crate::store::GridSpec;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_PARTIAL: i32 = 3;
pub const EXIT_NONCONVERGENCE: i32 = 4;

/// Fraction of failed points above which a run exits with `EXIT_PARTIAL`.
pub const MAX_FAILED_FRACTION: f64 = 0.1;

pub const CACHE_ENV: &str = "QRM_CACHE_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "qrm",
    version,
    about = "Quantum Rabi model transition: QFI sweeps, critical couplings, fits and maps",
    after_help = "Exit codes: 0 success, 2 configuration error, 3 partial failure \
                  (more than 10% of points failed, a failed check, or an I/O error), 4 nonconvergence.\n\
                  The QRM_CACHE_DIR environment variable overrides --cache."
)]
pub struct Cli {
    /// Worker threads [default: number of logical cores]
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// QFI curves, one record per frequency ratio
    QfiSweep(SweepArgs),
    /// Polaron sweep: ansatz parameters, QFI, velocity and acceleration
    PpSweep(SweepArgs),
    /// Table of critical couplings, with cached peak and a=0 estimates
    Gc(GcArgs),
    /// Series fits of cached QFI-peak couplings in both bases
    Fit(FitArgs),
    /// Row-normalized QFI and susceptibility maps over (ω/Ω, ḡ)
    Map(MapArgs),
    /// Run the invariant checks
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Ed,
    Pp,
    Both,
}

impl MethodArg {
    pub fn name(self) -> &'static str {
        match self {
            MethodArg::Ed => "ed",
            MethodArg::Pp => "pp",
            MethodArg::Both => "both",
        }
    }

    pub fn runs_ed(self) -> bool {
        self != MethodArg::Pp
    }

    pub fn runs_pp(self) -> bool {
        self != MethodArg::Ed
    }
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Frequency ratios ω/Ω, comma separated [default: depends on the subcommand]
    #[arg(long = "omega-ratio", alias = "freq", value_delimiter = ',', allow_negative_numbers = true)]
    pub omega_ratio: Vec<f64>,

    /// Qubit splitting Ω; ω = ratio·Ω
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub splitting: f64,

    /// Relative ground-energy tolerance between successive photon cutoffs
    #[arg(long, default_value_t = crate::ed::DEFAULT_ENERGY_TOL)]
    pub tol: f64,

    /// Largest photon cutoff tried
    #[arg(long, default_value_t = DEFAULT_CUTOFF_LIMIT)]
    pub cutoff_limit: usize,

    /// Finite-difference step for the QFI, in units of g_c0
    #[arg(long = "step-h", default_value_t = 1e-4)]
    pub step_h: f64,

    /// Output directory
    #[arg(long, default_value = "qrm-out")]
    pub out: PathBuf,

    /// Cache directory
    #[arg(long, default_value = ".qrm-cache")]
    pub cache: PathBuf,

    /// Ignore cached records (results are still stored)
    #[arg(long)]
    pub no_cache: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub gbar_min: f64,

    #[arg(long, default_value_t = 2.0)]
    pub gbar_max: f64,

    /// Number of ḡ points including both ends
    #[arg(long, default_value_t = 151)]
    pub gbar_steps: usize,

    #[arg(long, value_enum, default_value_t = MethodArg::Ed)]
    pub method: MethodArg,

    /// g_c2 variant used for the g/g_c2 column (alphaFS, fourThirds, fitted)
    #[arg(long = "gc2-variant", default_value = "alphaFS")]
    pub gc2_variant: Gc2Variant,
}

#[derive(Debug, Clone, Args)]
pub struct GcArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Renormalized critical displacement used by g_cξ
    #[arg(long, default_value_t = DEFAULT_DC1)]
    pub dc1: f64,

    /// g_c2 variant used for the g/g_c2 scaling (alphaFS, fourThirds, fitted)
    #[arg(long = "gc2-variant", default_value = "alphaFS")]
    pub gc2_variant: Gc2Variant,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Source of the peak couplings
    #[arg(long, value_enum, default_value_t = MethodArg::Ed)]
    pub method: MethodArg,

    /// Largest series order n_f; every order from 2 up is fitted
    #[arg(long, default_value_t = 9)]
    pub max_order: usize,
}

#[derive(Debug, Clone, Args)]
pub struct MapArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    #[arg(long, default_value_t = 0.8, allow_negative_numbers = true)]
    pub gbar_min: f64,

    #[arg(long, default_value_t = 2.0)]
    pub gbar_max: f64,

    #[arg(long, default_value_t = 121)]
    pub gbar_steps: usize,

    /// Number of log-spaced rows in [0.02, 0.5] when --omega-ratio is not given
    #[arg(long, default_value_t = 25)]
    pub rows: usize,
}

/// Validated settings shared by every subcommand.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub ratios: Vec<f64>,
    pub splitting: f64,
    pub qfi: QfiOptions,
    pub out: PathBuf,
    pub cache: PathBuf,
    pub use_cache: bool,
}

fn config_error(msg: impl Into<String>) -> QrmError {
    QrmError::Domain(msg.into())
}

impl RunConfig {
    pub fn from_common(c: &CommonArgs, default_ratios: &[f64]) -> Result<Self, QrmError> {
        let ratios = if c.omega_ratio.is_empty() {
            default_ratios.to_vec()
        } else {
            c.omega_ratio.clone()
        };
        if ratios.is_empty() || ratios.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(config_error("--omega-ratio values must be positive and finite"));
        }
        if !(c.splitting > 0.0 && c.splitting.is_finite()) {
            return Err(config_error("--splitting must be positive"));
        }
        if !(c.tol > 0.0) {
            return Err(config_error("--tol must be positive"));
        }
        if !(c.step_h > 0.0 && c.step_h < 0.1) {
            return Err(config_error("--step-h must lie in (0, 0.1)"));
        }
        if c.cutoff_limit < 32 {
            return Err(config_error("--cutoff-limit must be at least 32"));
        }
        let cache = std::env::var_os(CACHE_ENV).map(PathBuf::from).unwrap_or_else(|| c.cache.clone());
        Ok(RunConfig {
            ratios,
            splitting: c.splitting,
            qfi: QfiOptions {
                step_gbar: c.step_h,
                ed: EdOptions {
                    energy_tol: c.tol,
                    cutoff_limit: c.cutoff_limit,
                },
                ..QfiOptions::default()
            },
            out: c.out.clone(),
            cache,
            use_cache: !c.no_cache,
        })
    }
}

fn sorted_ratios(mut r: Vec<f64>) -> Vec<f64> {
    r.sort_by(f64::total_cmp);
    r.dedup();
    r
}

/// Log-spaced default map rows.
pub fn default_map_ratios(rows: usize) -> Vec<f64> {
    if rows == 1 {
        return vec![0.02];
    }
    (0..rows)
        .map(|k| 0.02 * (0.5f64 / 0.02).powf(k as f64 / (rows - 1) as f64))
        .collect()
}

fn exit_code(e: &QrmError) -> i32 {
    match e {
        QrmError::Domain(_) | QrmError::UnknownVariant(_) | QrmError::RankDeficient { .. } => EXIT_CONFIG,
        QrmError::NonConvergence { .. } | QrmError::OptimizerNonConvergence { .. } => EXIT_NONCONVERGENCE,
        QrmError::AtGridIndex { source, .. } => exit_code(source),
        _ => EXIT_PARTIAL,
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    if let Some(n) = cli.jobs {
        if n == 0 {
            eprintln!("error: --jobs must be at least 1");
            return EXIT_CONFIG;
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    let result = match &cli.command {
        Command::QfiSweep(a) => sweep_config(a).and_then(|(cfg, grid)| commands::qfi_sweep(&cfg, grid, a, "qfi-sweep")),
        Command::PpSweep(a) => {
            let a = SweepArgs {
                method: MethodArg::Pp,
                ..a.clone()
            };
            sweep_config(&a).and_then(|(cfg, grid)| commands::qfi_sweep(&cfg, grid, &a, "pp-sweep"))
        }
        Command::Gc(a) => {
            if !(a.dc1 > 0.0) {
                Err(config_error("--dc1 must be positive"))
            } else {
                RunConfig::from_common(&a.common, &DEFAULT_FIT_GRID).and_then(|cfg| commands::gc_table(&cfg, a))
            }
        }
        Command::Fit(a) => {
            if a.max_order < 2 {
                Err(config_error("--max-order must be at least 2"))
            } else {
                RunConfig::from_common(&a.common, &DEFAULT_FIT_GRID).and_then(|cfg| commands::fit(&cfg, a))
            }
        }
        Command::Map(a) => {
            if a.rows == 0 {
                Err(config_error("--rows must be at least 1"))
            } else {
                let defaults = default_map_ratios(a.rows);
                RunConfig::from_common(&a.common, &defaults).and_then(|cfg| {
                    let grid = GridSpec::new(a.gbar_min, a.gbar_max, a.gbar_steps)?;
                    commands::map(&cfg, grid)
                })
            }
        }
        Command::Verify => verify::run(),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn sweep_config(a: &SweepArgs) -> Result<(RunConfig, GridSpec), QrmError> {
    let cfg = RunConfig::from_common(&a.common, &DEFAULT_FIT_GRID)?;
    let grid = GridSpec::new(a.gbar_min, a.gbar_max, a.gbar_steps)?;
    Ok((
        RunConfig {
            ratios: sorted_ratios(cfg.ratios.clone()),
            ..cfg
        },
        grid,
    ))
}

/// Parses `std::env::args`, runs, and returns the exit code.
pub fn main() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    run(cli)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn parses_flags() {
        let cli = Cli::try_parse_from([
            "qrm",
            "--jobs",
            "2",
            "qfi-sweep",
            "--omega-ratio",
            "0.1,0.05",
            "--method",
            "both",
            "--gc2-variant",
            "fitted",
        ])
        .unwrap();
        match cli.command {
            Command::QfiSweep(a) => {
                assert_eq!(a.common.omega_ratio, vec![0.1, 0.05]);
                assert_eq!(a.method, MethodArg::Both);
                assert_eq!(a.gc2_variant, Gc2Variant::Fitted);
                let (cfg, grid) = sweep_config(&a).unwrap();
                assert_eq!(cfg.ratios, vec![0.05, 0.1]);
                assert_eq!(grid.steps, 151);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_bad_values() {
        assert!(Cli::try_parse_from(["qrm", "gc", "--gc2-variant", "nope"]).is_err());
        let cli = Cli::try_parse_from(["qrm", "qfi-sweep", "--omega-ratio", "-0.1"]).unwrap();
        assert_eq!(run(cli), EXIT_CONFIG);
        let cli = Cli::try_parse_from(["qrm", "qfi-sweep", "--gbar-min", "2", "--gbar-max", "1"]).unwrap();
        assert_eq!(run(cli), EXIT_CONFIG);
    }

    #[test]
    fn default_rows_span_the_map_range() {
        let r = default_map_ratios(25);
        assert_eq!(r.len(), 25);
        assert!((r[0] - 0.02).abs() < 1e-15 && (r[24] - 0.5).abs() < 1e-12);
    }
}
