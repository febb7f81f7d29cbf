//! Library side of the `bdris` command-line tool: configuration files, CSV
//! codecs and the subcommand runner. `main.rs` only parses flags.

pub mod config;
pub mod csvio;

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::SystemTime;

use bdris_core::evaluation::{
    run_channel_gain, run_sum_rate, run_timing, ExperimentResult, StrategySpec,
};
use bdris_core::projections::{self, Architecture};
use bdris_core::{CMatrix, ScenarioConfig};
use thiserror::Error;

pub use config::parse_config;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] bdris_core::Error),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Write(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    ChannelGain,
    SumRate,
    Timing,
    Project,
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Subcommand::ChannelGain => "channel-gain",
            Subcommand::SumRate => "sum-rate",
            Subcommand::Timing => "timing",
            Subcommand::Project => "project",
        })
    }
}

pub const DEFAULT_N_LIST: [usize; 5] = [4, 8, 16, 32, 64];

/// Strategy labels run when `--strategies` is not given.
pub fn default_strategies(sub: Subcommand) -> &'static [&'static str] {
    match sub {
        Subcommand::ChannelGain => &[
            "NoRIS", "PoP-FC", "PoP-GC", "PoP-SC", "PoO-FC", "PoO-GC", "PoO-SC",
        ],
        Subcommand::SumRate => &["PoP-FC+FP", "PoP-FC+RZF", "PoO-FC+FP", "NoRIS+FP"],
        Subcommand::Timing => &["PoP-FC+FP", "PoP-FC+RZF", "PoO-FC+FP"],
        Subcommand::Project => &[],
    }
}

/// Everything one sweep invocation needs, after flag/config merging.
///
/// Precedence, lowest first: built-in defaults, the `--config` file, then
/// the individual flags (`--seed`, `--trials`, `--strategies`, `--n-list`).
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub config_path: Option<PathBuf>,
    pub subcommand: Subcommand,
    pub out: PathBuf,
    pub config: ScenarioConfig,
    pub strategies: Vec<StrategySpec>,
    /// True when the strategy list came from the user rather than the
    /// subcommand defaults.
    pub strategies_explicit: bool,
    pub n_list: Vec<usize>,
    pub seed_override: Option<u64>,
    pub timestamp: SystemTime,
}

/// Raw user choices before merging.
#[derive(Debug, Clone, Default)]
pub struct SweepArgs {
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub strategies: Option<Vec<String>>,
    pub n_list: Option<Vec<usize>>,
    pub trials: Option<usize>,
}

pub fn load_config(path: Option<&Path>) -> Result<ScenarioConfig, CliError> {
    match path {
        None => Ok(ScenarioConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| CliError::Io {
                path: p.to_path_buf(),
                source,
            })?;
            parse_config(&text)
        }
    }
}

impl RunManifest {
    pub fn build(subcommand: Subcommand, args: SweepArgs) -> Result<Self, CliError> {
        let mut config = load_config(args.config.as_deref())?;
        if let Some(seed) = args.seed {
            config.seed = seed;
        }
        if let Some(trials) = args.trials {
            config.trials = trials;
        }
        config::validate(&config)?;

        let strategies_explicit = args.strategies.is_some();
        let labels: Vec<String> = match args.strategies {
            Some(list) => list,
            None => default_strategies(subcommand)
                .iter()
                .map(|s| s.to_string())
                .collect(),
        };
        let strategies = labels
            .iter()
            .map(|s| StrategySpec::parse_with_group(s, config.group_size))
            .collect::<Result<Vec<_>, _>>()?;

        let n_list = args.n_list.unwrap_or_else(|| DEFAULT_N_LIST.to_vec());
        if n_list.is_empty() || n_list.contains(&0) {
            return Err(CliError::Usage(
                "--n-list needs positive surface sizes".into(),
            ));
        }
        if strategies_explicit {
            if let Some(&n) = n_list.iter().find(|&&n| n > config.poo_max_n) {
                if let Some(s) = strategies.iter().find(|s| s.uses_optimal_relaxation()) {
                    return Err(CliError::Usage(format!(
                        "{s} is limited to N <= poo_max_n = {} (requested N = {n}); \
                         raise `poo_max_n` in the config file to allow it",
                        config.poo_max_n
                    )));
                }
            }
        }

        Ok(Self {
            config_path: args.config,
            subcommand,
            out: args.out,
            config,
            strategies,
            strategies_explicit,
            n_list,
            seed_override: args.seed,
            timestamp: SystemTime::now(),
        })
    }
}

pub fn run_experiment(manifest: &RunManifest) -> Result<ExperimentResult, CliError> {
    let (cfg, s, n) = (&manifest.config, &manifest.strategies, &manifest.n_list);
    let result = match manifest.subcommand {
        Subcommand::ChannelGain => run_channel_gain(cfg, s, n)?,
        Subcommand::SumRate => run_sum_rate(cfg, s, n)?,
        Subcommand::Timing => run_timing(cfg, s, n)?,
        Subcommand::Project => {
            return Err(CliError::Usage(
                "`project` is not a sweep subcommand".into(),
            ))
        }
    };
    Ok(result)
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })
}

/// Runs a sweep subcommand and writes its CSV. Returns the row count.
pub fn run(manifest: &RunManifest) -> Result<usize, CliError> {
    // Open the output first so an unwritable path fails before the sweep.
    let out = create(&manifest.out)?;
    let result = run_experiment(manifest)?;
    csvio::write_results(out, &result)?;
    Ok(result.rows.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionOp {
    Sym,
    Uni,
    Symuni,
    Group(usize),
    Single,
}

impl ProjectionOp {
    pub fn parse(name: &str, group_size: Option<usize>) -> Result<Self, CliError> {
        match name {
            "sym" => Ok(Self::Sym),
            "uni" => Ok(Self::Uni),
            "symuni" => Ok(Self::Symuni),
            "single" => Ok(Self::Single),
            "group" => group_size
                .map(Self::Group)
                .ok_or_else(|| CliError::Usage("--op group requires --group-size".into())),
            other => Err(CliError::Usage(format!(
                "unknown projection `{other}` (expected sym, uni, symuni, group or single)"
            ))),
        }
    }
}

/// Projection result with the residuals of the set it targets.
#[derive(Debug, Clone)]
pub struct ProjectionOutput {
    pub matrix: CMatrix,
    /// `(name, value)` pairs in output order.
    pub residuals: Vec<(&'static str, f64)>,
}

pub fn apply_projection(z: &CMatrix, op: ProjectionOp) -> Result<ProjectionOutput, CliError> {
    let full = |m: CMatrix, arch: Architecture| {
        let r = projections::residuals(&m, arch);
        ProjectionOutput {
            matrix: m,
            residuals: vec![
                ("symmetry", r.symmetry),
                ("unitarity", r.unitarity),
                ("structure", r.structure),
            ],
        }
    };
    Ok(match op {
        ProjectionOp::Sym => {
            let m = projections::sym(z)?;
            let r = bdris_core::linalg::symmetry_residual(&m);
            ProjectionOutput {
                matrix: m,
                residuals: vec![("symmetry", r)],
            }
        }
        ProjectionOp::Uni => {
            let m = projections::uni(z)?;
            let r = bdris_core::linalg::unitarity_residual(&m);
            ProjectionOutput {
                matrix: m,
                residuals: vec![("unitarity", r)],
            }
        }
        ProjectionOp::Symuni => full(
            projections::symuni(z)?.into_inner(),
            Architecture::FullyConnected,
        ),
        ProjectionOp::Group(g) => full(
            projections::project_group(z, g)?.into_inner(),
            Architecture::GroupConnected(g),
        ),
        ProjectionOp::Single => full(
            projections::project_single(z)?.into_inner(),
            Architecture::SingleConnected,
        ),
    })
}

/// `project` subcommand: reads `input`, writes the projected matrix to `out`
/// and the residuals as `residual,value` CSV to `residual_sink`.
pub fn run_project<W: Write>(
    input: &Path,
    op: ProjectionOp,
    out: &Path,
    residual_sink: W,
) -> Result<ProjectionOutput, CliError> {
    let file = File::open(input).map_err(|source| CliError::Io {
        path: input.to_path_buf(),
        source,
    })?;
    let z = csvio::read_matrix(file)?;
    let result = apply_projection(&z, op)?;
    csvio::write_matrix(create(out)?, &result.matrix)?;
    let mut w = csv::Writer::from_writer(residual_sink);
    w.write_record(["residual", "value"])?;
    for (name, v) in &result.residuals {
        w.write_record([name.to_string(), csvio::format_f64(*v)])?;
    }
    w.flush()?;
    Ok(result)
}
