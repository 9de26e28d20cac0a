use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use pvd_core::config::{ExperimentConfig, Method, Preset};
use pvd_core::eval::{ErrorReport, Metrics};
use pvd_core::gradcheck::run_suite;
use pvd_core::runner;

#[derive(Parser)]
#[command(name = "pvd", version, about = "Matched-asymptotic neural solvers for boundary-layer problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train, evaluate and write a run directory.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Method key; overrides the config file.
        #[arg(long)]
        method: Option<Method>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// desk or full.
        #[arg(long)]
        preset: Option<Preset>,
    },
    /// Re-evaluate the stored weights of a run directory.
    Eval {
        #[arg(long)]
        out: PathBuf,
    },
    /// Operator predictions for boundary-value pairs read from a file.
    Infer {
        #[arg(long)]
        out: PathBuf,
        /// One `alpha beta` pair per line.
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long, default_value_t = 101)]
        points: usize,
        /// CSV destination; stdout when absent.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Redraw plot.svg from curves.csv.
    Plot {
        #[arg(long)]
        out: PathBuf,
    },
    /// Finite-difference check of every loss gradient on tiny random networks.
    Gradcheck {
        #[arg(long, default_value_t = 50)]
        cases: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-5)]
        tolerance: f64,
    },
}

fn print_report(r: &ErrorReport) {
    let tag = if r.per_pair.is_empty() { "" } else { "mean " };
    println!("{} on {} (seed {}), junction x_j = {}", r.method, r.problem, r.seed, r.junction);
    for (name, v) in Metrics::NAMES.iter().zip(r.summary.values()) {
        println!("  {tag}{name:<14} {v:.4e}");
    }
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("PVD_THREADS") {
        let n: usize = v.parse().with_context(|| format!("PVD_THREADS={v} is not a count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global()?;
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, method, seed, out, preset } => {
            let mut cfg = match &config {
                Some(path) => {
                    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                    ExperimentConfig::from_toml(&text)?
                }
                None => ExperimentConfig::default(),
            };
            if let Some(m) = method {
                cfg.method = m;
            }
            if let Some(p) = preset {
                cfg.apply_preset(p);
            }
            if let Some(s) = seed {
                cfg.training.seed = s;
            }
            if let Some(o) = out {
                cfg.output.dir = o.to_string_lossy().into_owned();
            }
            let dir = PathBuf::from(&cfg.output.dir);
            log::info!("{} for {} iterations into {}", cfg.method, cfg.training.iterations, dir.display());
            let outcome = runner::run(&cfg, &dir)?;
            print_report(&outcome.report);
        }
        Command::Eval { out } => print_report(&runner::eval_run(&out)?),
        Command::Infer { out, pairs, points, csv } => {
            let text = std::fs::read_to_string(&pairs).with_context(|| format!("reading {}", pairs.display()))?;
            let pairs = runner::parse_pairs(&text)?;
            if pairs.is_empty() {
                bail!("no boundary-value pairs in the input");
            }
            let table = runner::infer(&out, &pairs, points)?;
            match csv {
                Some(path) => std::fs::write(&path, table).with_context(|| format!("writing {}", path.display()))?,
                None => print!("{table}"),
            }
        }
        Command::Plot { out } => println!("{}", runner::plot_run(&out)?.display()),
        Command::Gradcheck { cases, seed, tolerance } => {
            let results = run_suite(cases, seed)?;
            let mut failed = false;
            for (variant, worst) in &results {
                let ok = *worst <= tolerance;
                failed |= !ok;
                println!("{:<16} worst rel. error {worst:.3e} {}", variant.name(), if ok { "ok" } else { "FAIL" });
            }
            if failed {
                bail!("gradient check above tolerance {tolerance:e}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Err(e) = init_threads().and_then(|_| execute(cli)) {
        eprintln!("error: {e:#}");
        return ExitCode::FAILURE;
    }
    ExitCode::SUCCESS
}
