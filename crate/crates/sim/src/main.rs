use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ed_sim::config::{preset, ExperimentConfig, Kind, PRESETS};
use ed_sim::{run, SimError};

#[derive(Parser)]
#[command(name = "edsim", version, about = "Entropic dynamics simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Source {
    /// Experiment config (TOML).
    #[arg(long, short, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Named preset instead of a config file.
    #[arg(long, short)]
    preset: Option<String>,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct Output {
    /// Run directory (default: <out-root>/<config name>).
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[arg(long, env = "EDSIM_OUT", default_value = "runs")]
    out_root: PathBuf,
    /// Worker threads (default: one per core).
    #[arg(long, short = 'j')]
    threads: Option<usize>,
    /// Exit with status 3 if any recorded check failed.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    output: Output,
}

#[derive(Subcommand)]
enum Command {
    /// Crank-Nicolson evolution with observables and snapshots.
    Evolve(RunArgs),
    /// Trajectory ensembles compared against |psi|^2.
    Ensemble(RunArgs),
    /// Symplectic, metric and Killing properties of the simplex.
    GeometryCheck(RunArgs),
    /// Fluctuation laws, Bohmian and centre-of-mass limits.
    Limits(RunArgs),
    /// One maximum-entropy step, composition and maximizer checks.
    EntropicStep(RunArgs),
    /// Merge finished runs into consolidated tables.
    Report {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// List the named presets.
    Presets,
    /// Print the canonical form of a config (seed included).
    ShowConfig {
        #[command(flatten)]
        source: Source,
    },
}

fn load(source: &Source) -> Result<ExperimentConfig, SimError> {
    let cfg = match (&source.config, &source.preset) {
        (Some(path), _) => ExperimentConfig::from_file(path)?,
        (None, Some(name)) => preset(name)?,
        (None, None) => {
            return Err(SimError::Config {
                field: "--config".into(),
                message: "give a config file or --preset".into(),
            })
        }
    };
    cfg.resolve_seed(source.seed)
}

fn execute(cfg: ExperimentConfig, output: &Output) -> Result<ExitCode, SimError> {
    let dir = output.out.clone().unwrap_or_else(|| output.out_root.join(&cfg.name));
    let result = run(&cfg, &dir, output.threads)?;
    let rows = ed_sim::report::read_ledger(&dir)?;
    let failed = rows.iter().filter(|r| r.passed == Some(false)).count();
    let passed = rows.iter().filter(|r| r.passed == Some(true)).count();
    println!(
        "{} ({}) -> {}\nconfig {} seed {}\nchecks: {passed} passed, {failed} failed",
        cfg.name,
        cfg.kind.as_str(),
        dir.display(),
        result.manifest.config_hash,
        result.manifest.seed
    );
    Ok(if output.strict && failed > 0 {
        ExitCode::from(3)
    } else {
        ExitCode::SUCCESS
    })
}

fn dispatch(cli: Cli) -> Result<ExitCode, SimError> {
    let (kind, args) = match cli.command {
        Command::Evolve(a) => (Kind::Evolve, a),
        Command::Ensemble(a) => (Kind::Ensemble, a),
        Command::GeometryCheck(a) => (Kind::GeometryCheck, a),
        Command::Limits(a) => (Kind::Limits, a),
        Command::EntropicStep(a) => (Kind::EntropicStep, a),
        Command::Report { runs, output } => {
            let cfg = ExperimentConfig::report(runs.iter().map(|p| p.display().to_string()).collect());
            return execute(cfg, &output);
        }
        Command::Presets => {
            for p in PRESETS {
                let cfg = preset(p)?;
                println!("{p:18} {}", cfg.kind.as_str());
            }
            return Ok(ExitCode::SUCCESS);
        }
        Command::ShowConfig { source } => {
            print!("{}", load(&source)?.canonical()?);
            return Ok(ExitCode::SUCCESS);
        }
    };
    let cfg = load(&args.source)?;
    if cfg.kind != kind {
        return Err(SimError::Config {
            field: "kind".into(),
            message: format!("config `{}` is a {} run, not {}", cfg.name, cfg.kind.as_str(), kind.as_str()),
        });
    }
    execute(cfg, &args.output)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("edsim: {e}");
            ExitCode::from(match e {
                SimError::Config { .. } | SimError::Parse(_) | SimError::UnknownPreset(_) => 2,
                _ => 1,
            })
        }
    }
}
