use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::Parser;

use cellfree::harness::{preset, run_experiment, summarize, write_outputs, ExperimentConfig, PRESETS};

/// Monte Carlo simulator for combined DL-UL distributed beamforming with
/// iterative bi-directional training.
#[derive(Debug, Parser)]
#[command(name = "simulate", version)]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Built-in protocol; a `--config` file, if given, is used instead.
    #[arg(long, value_parser = PRESETS)]
    preset: Option<String>,
    /// Root seed (overrides the configuration)
    #[arg(long)]
    seed: Option<u64>,
    /// Number of Monte Carlo drops
    #[arg(long)]
    drops: Option<usize>,
    /// Resource blocks per drop
    #[arg(long)]
    blocks: Option<usize>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Use multiplier-style power scaling instead of the power-exact rule.
    #[arg(long)]
    literal_scaling: bool,
    /// Also write the per-block training trace.
    #[arg(long)]
    trace: bool,
    /// Also write a matplotlib script for the summary.
    #[arg(long)]
    plot_script: bool,
}

fn load(cli: &Cli) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match (&cli.config, &cli.preset) {
        (Some(path), _) => ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
        (None, Some(name)) => preset(name)?,
        (None, None) => bail!("either --config or --preset is required"),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(d) = cli.drops {
        cfg.drops = d;
    }
    if let Some(b) = cli.blocks {
        cfg.blocks = b;
    }
    if let Some(o) = &cli.out {
        cfg.output.dir = o.clone();
    }
    cfg.ibt.scaling.literal |= cli.literal_scaling;
    cfg.output.trace |= cli.trace;
    cfg.output.plot_script |= cli.plot_script;
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let cfg = load(cli)?;
    let start = Instant::now();
    let result = run_experiment(&cfg).context("simulation failed")?;
    let written = write_outputs(&result, &cfg.output.dir)?;
    let last = summarize(&result.rows)
        .into_iter()
        .filter(|r| r.block == cfg.blocks)
        .collect::<Vec<_>>();
    eprintln!(
        "{}: {} drops x {} blocks in {:.1} s",
        cfg.name,
        cfg.drops,
        cfg.blocks,
        start.elapsed().as_secs_f64()
    );
    for r in &last {
        eprintln!(
            "  point {:>2} ({:>7}) {:<18} R_eff {:8.3} +- {:.3}",
            r.point, r.point_value, r.method.name(), r.mean_r_eff, r.se_r_eff
        );
    }
    for p in written {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
