use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use parcelforge::PipelineConfig;

mod commands;

#[derive(Parser, Debug)]
#[command(
    name = "parcelforge",
    version,
    about = "Synthetic parcel data generation, evaluation and damage analysis"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalArgs {
    /// TOML configuration; missing fields take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: logical cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Directory that receives every output.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Scores models by cuboid similarity and classifies them.
    Classify(commands::ModelsArgs),
    /// Writes randomly scaled copies of one mesh.
    Variants(commands::VariantsArgs),
    /// Drops one mesh and records the trajectory.
    Simulate(commands::SimulateArgs),
    /// Builds the asset pool and writes scenes plus a manifest.
    Generate(commands::GenerateArgs),
    /// Scores predictions against a manifest.
    Evaluate(commands::EvaluateArgs),
    /// Compares an original mesh with its current state.
    Damage(commands::DamageArgs),
    /// Crops every visible box face to a head-on view.
    Rectify(commands::RectifyArgs),
}

fn resolve_config(g: &GlobalArgs) -> anyhow::Result<PipelineConfig> {
    let mut cfg = match &g.config {
        Some(p) => PipelineConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = g.seed {
        cfg.seed = s;
        cfg.damage.seed = s;
        cfg.pool.sim.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = resolve_config(&cli.global)?;
    if let Some(n) = cli.global.jobs {
        anyhow::ensure!(n > 0, "--jobs must be at least 1");
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let resolved = cfg.to_toml_string()?;
    log::info!("resolved config:\n{resolved}");
    std::fs::create_dir_all(&cli.global.out).with_context(|| format!("creating {}", cli.global.out.display()))?;
    std::fs::write(cli.global.out.join("config.resolved.toml"), &resolved)?;
    let out = &cli.global.out;
    match cli.command {
        Command::Classify(a) => commands::classify(&cfg, out, &a),
        Command::Variants(a) => commands::variants(&cfg, out, &a),
        Command::Simulate(a) => commands::simulate(&cfg, out, &a),
        Command::Generate(a) => commands::generate(&cfg, out, &a),
        Command::Evaluate(a) => commands::evaluate(&cfg, out, &a),
        Command::Damage(a) => commands::damage(&cfg, out, &a),
        Command::Rectify(a) => commands::rectify(&cfg, out, &a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
