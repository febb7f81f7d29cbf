use std::path::PathBuf;
use std::process::ExitCode;

use bdris_cli::{run, run_project, CliError, ProjectionOp, RunManifest, Subcommand, SweepArgs};
use clap::{Args, Parser};

#[derive(Parser)]
#[command(
    name = "bdris",
    version,
    about = "BD-RIS passive beamforming experiments"
)]
enum Cli {
    /// Sum channel gain versus surface size.
    ChannelGain(Sweep),
    /// Sum rate of two-stage designs versus surface size.
    SumRate(Sweep),
    /// Wall-clock time of two-stage designs versus surface size.
    Timing(Sweep),
    /// Project a complex matrix read from CSV onto a scattering-matrix set.
    Project(Project),
}

#[derive(Args)]
struct Sweep {
    /// TOML scenario file; absent keys keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Overrides `seed` from the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `trials` from the config file.
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated labels such as `PoP-FC,PoO-GC4` or `PoP-FC+FP`.
    #[arg(long, value_delimiter = ',')]
    strategies: Option<Vec<String>>,
    /// Comma-separated surface sizes.
    #[arg(long, value_delimiter = ',')]
    n_list: Option<Vec<usize>>,
}

#[derive(Args)]
struct Project {
    /// Matrix CSV, one row per line, entries like `0.5-1.2j`.
    #[arg(long)]
    input: PathBuf,
    /// sym, uni, symuni, group or single.
    #[arg(long)]
    op: String,
    /// Block size for `--op group`.
    #[arg(long)]
    group_size: Option<usize>,
    /// Where to write the projected matrix.
    #[arg(long)]
    out: PathBuf,
}

fn sweep(sub: Subcommand, s: Sweep) -> Result<(), CliError> {
    let manifest = RunManifest::build(
        sub,
        SweepArgs {
            config: s.config,
            out: s.out,
            seed: s.seed,
            strategies: s.strategies,
            n_list: s.n_list,
            trials: s.trials,
        },
    )?;
    let rows = run(&manifest)?;
    eprintln!("{sub}: wrote {rows} rows to {}", manifest.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let outcome = match Cli::parse() {
        Cli::ChannelGain(s) => sweep(Subcommand::ChannelGain, s),
        Cli::SumRate(s) => sweep(Subcommand::SumRate, s),
        Cli::Timing(s) => sweep(Subcommand::Timing, s),
        Cli::Project(p) => ProjectionOp::parse(&p.op, p.group_size)
            .and_then(|op| run_project(&p.input, op, &p.out, std::io::stdout().lock()))
            .map(|_| ()),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
