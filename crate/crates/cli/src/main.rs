//! `tensorid`: runs the identification experiments and writes NMSE curves,
//! or prints the per-sample arithmetic cost table.

mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::builder::{PossibleValuesParser, TypedValueParser};
use clap::{CommandFactory, Parser};
use log::info;
use tensorid::complexity::{report_csv, report_text, ComplexityRow};
use tensorid::experiments::{run_experiment, Algorithm, ExperimentSpec, Structure};

use crate::config::ConfigFile;

const ALG_NAMES: [&str; 7] = ["lms", "tensor", "itensor", "tlms", "itlms", "lmst", "ilmst"];
const DEFAULT_SMOOTHING: usize = 201;

#[derive(Debug, Parser)]
#[command(name = "tensorid", version, about = "Interpolated tensor system identification experiments")]
struct Cli {
    /// Experiment to run (1-6).
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=6), required_unless_present = "complexity_report")]
    experiment: Option<u8>,

    /// Algorithm to run; repeat for several. Defaults to the four tensor-based
    /// models offered for the experiment's system structure.
    #[arg(
        long = "alg",
        value_parser = PossibleValuesParser::new(ALG_NAMES).map(|s| s.parse::<Algorithm>().expect("listed name"))
    )]
    algs: Vec<Algorithm>,

    /// Monte-Carlo runs.
    #[arg(long)]
    runs: Option<usize>,

    /// Samples per run.
    #[arg(long)]
    samples: Option<usize>,

    /// Base seed; run l uses seed + l.
    #[arg(long, env = "TENSORID_SEED")]
    seed: Option<u64>,

    /// TOML file overriding experiment and model settings.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output CSV path.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Moving-average window used by the emitted plot script (display only).
    #[arg(long)]
    smoothing: Option<usize>,

    /// Skip writing the plot script next to the CSV.
    #[arg(long)]
    no_plot: bool,

    /// Print the operation-count table (and write it as CSV) instead of
    /// running simulations. Covers all six experiments unless
    /// `--experiment` is given.
    #[arg(long)]
    complexity_report: bool,
}

/// Errors caused by the invocation rather than by the run itself.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct Usage(String);

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn pairing_rule() -> &'static str {
    "TLMS models are offered for Hammerstein systems (experiments 1, 4, 5), LMST models for Wiener systems \
     (experiments 2, 3, 6), and LMS and tensor-only models for both"
}

fn default_algs(structure: Structure) -> Vec<Algorithm> {
    let (classical, interpolated) = match structure {
        Structure::Hammerstein => (Algorithm::Tlms, Algorithm::ITlms),
        Structure::Wiener => (Algorithm::Lmst, Algorithm::ILmst),
    };
    vec![Algorithm::Tensor, Algorithm::ITensor, classical, interpolated]
}

fn load_config(cli: &Cli) -> Result<ConfigFile> {
    match &cli.config {
        Some(path) => ConfigFile::load(path).map_err(|e| usage(format!("{e:#}"))),
        None => Ok(ConfigFile::default()),
    }
}

fn spec_for(id: u8, cli: &Cli, cfg: &ConfigFile) -> Result<ExperimentSpec> {
    let mut spec = ExperimentSpec::standard(id).map_err(|e| usage(e.to_string()))?;
    cfg.apply(&mut spec).map_err(|e| usage(format!("{e:#}")))?;
    if let Some(n) = cli.samples {
        spec.n_samples = n;
    }
    if let Some(l) = cli.runs {
        spec.runs = l;
    }
    spec.validate().map_err(|e| usage(e.to_string()))?;
    Ok(spec)
}

fn complexity_report(cli: &Cli, cfg: &ConfigFile) -> Result<()> {
    let ids: Vec<u8> = cli.experiment.map_or_else(|| (1..=6).collect(), |id| vec![id]);
    let rows = ids
        .iter()
        .map(|&id| {
            let spec = spec_for(id, cli, cfg)?;
            ComplexityRow::compute(id, &spec.report_shapes()).map_err(|e| usage(e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    print!("{}", report_text(&rows));
    let path = cli.out.clone().unwrap_or_else(|| PathBuf::from("complexity.csv"));
    std::fs::write(&path, report_csv(&rows)).with_context(|| format!("writing {}", path.display()))?;
    info!("wrote {}", path.display());
    Ok(())
}

fn simulate(cli: &Cli, cfg: &ConfigFile) -> Result<()> {
    let id = cli.experiment.expect("clap requires --experiment here");
    let spec = spec_for(id, cli, cfg)?;
    let algs = if cli.algs.is_empty() { default_algs(spec.structure) } else { cli.algs.clone() };
    if let Some(bad) = algs.iter().find(|a| !a.fits(spec.structure)) {
        return Err(usage(format!(
            "{bad} cannot be used in experiment {id} ({:?} system): {}",
            spec.structure,
            pairing_rule()
        )));
    }
    let seed = cli.seed.or(cfg.run.seed).unwrap_or(0);
    info!(
        "experiment {id}: {} runs x {} samples, seed {seed}, algorithms {}",
        spec.runs,
        spec.n_samples,
        algs.iter().map(Algorithm::name).collect::<Vec<_>>().join(",")
    );

    let series = run_experiment(&spec, &algs, seed)?;

    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from(format!("nmse_exp{id}.csv")));
    let names: Vec<&str> = algs.iter().map(Algorithm::name).collect();
    output::write_csv(&out, &names, &series)?;
    if !cli.no_plot {
        let smoothing = cli.smoothing.or(cfg.run.smoothing).unwrap_or(DEFAULT_SMOOTHING);
        let script = output::plot_script_path(&out);
        std::fs::write(&script, output::plot_script(&out, &format!("Experiment {id}"), smoothing))
            .with_context(|| format!("writing {}", script.display()))?;
    }

    println!("experiment {id}: steady-state NMSE over the last 10% of {} samples", spec.n_samples);
    println!("{:<8} {:>14} {:>14} {:>10}", "alg", "per-sample dB", "pooled dB", "excluded");
    for (alg, s) in algs.iter().zip(&series) {
        println!(
            "{:<8} {:>14.2} {:>14.2} {:>10}",
            alg.name(),
            s.steady_state_db(),
            s.steady_state_pooled_db(),
            s.excluded
        );
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    if cli.complexity_report {
        complexity_report(cli, &cfg)
    } else {
        simulate(cli, &cfg)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<Usage>() => {
            eprintln!("error: {e}\n");
            eprintln!("{}", Cli::command().render_usage());
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
