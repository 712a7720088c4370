use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lipbandit::adaptive::{theorem1_lower_bound, theorem2_bound};
use lipbandit::harness::{fit_scaling_exponent, run_experiment, validate_lemmas, ExperimentConfig, ExperimentSummary};
use lipbandit::Result;

/// Continuum-armed Lipschitz bandit experiments.
#[derive(Parser)]
#[command(name = "lipbandit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its traces and summary.
    Run { config: PathBuf },
    /// Check the grid approximation and estimation bounds on the config's environment.
    ValidateLemmas { config: PathBuf },
    /// Run an experiment and fit the exponent of mean final regret against T.
    Scaling {
        config: PathBuf,
        #[arg(long, default_value_t = 0.55)]
        min: f64,
        #[arg(long, default_value_t = 0.85)]
        max: f64,
    },
    /// Print the lower and upper reference bounds.
    Bounds {
        #[arg(long = "T")]
        horizon: f64,
        #[arg(long)]
        d: usize,
        #[arg(long = "L")]
        lipschitz: f64,
        #[arg(long = "M")]
        hessian: f64,
        #[arg(long, default_value_t = lipbandit::harness::DEFAULT_GAMMA)]
        gamma: f64,
    },
}

fn print_summary(summary: &ExperimentSummary) {
    println!("{} on {} ({})", summary.strategy_id, summary.env.family, summary.env.id);
    for h in &summary.horizons {
        let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.4}"));
        match (h.mean_final_regret, h.std_final_regret) {
            (Some(mean), Some(std)) => println!(
                "T = {:>10}  regret {mean:.4} ± {std:.4}  lower {}  upper {}",
                h.horizon,
                fmt(h.theorem1_lower_bound),
                fmt(h.theorem2_bound)
            ),
            _ => println!(
                "T = {:>10}  refused: {}  (warm-up bound {})",
                h.horizon,
                h.refusal.as_deref().unwrap_or("?"),
                fmt(h.theorem2_warmup)
            ),
        }
    }
}

/// `Ok(true)` when every validation passed.
fn execute(command: Command) -> Result<bool> {
    match command {
        Command::Run { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let summary = run_experiment(&cfg)?;
            print_summary(&summary);
            println!("wrote {}", lipbandit::harness::experiment_dir(&cfg).display());
            Ok(true)
        }
        Command::ValidateLemmas { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let report = validate_lemmas(&cfg)?;
            print!("{report}");
            Ok(report.all_passed())
        }
        Command::Scaling { config, min, max } => {
            let cfg = ExperimentConfig::load(&config)?;
            let summary = run_experiment(&cfg)?;
            print_summary(&summary);
            let (ts, rs): (Vec<f64>, Vec<f64>) =
                summary.mean_curve().into_iter().map(|(t, r)| (t as f64, r)).unzip();
            let slope = fit_scaling_exponent(&ts, &rs)?;
            let d = summary.env.d as f64;
            let ok = (min..=max).contains(&slope);
            println!(
                "{} fitted exponent {slope:.4} (target {:.4}, accepted [{min}, {max}])",
                if ok { "PASS" } else { "FAIL" },
                (d + 1.0) / (d + 2.0)
            );
            Ok(ok)
        }
        Command::Bounds { horizon, d, lipschitz, hessian, gamma } => {
            match theorem1_lower_bound(horizon, d, lipschitz) {
                Some(v) => println!("lower bound: {v}"),
                None => println!("lower bound: not applicable"),
            }
            println!("upper bound: {}", theorem2_bound(horizon, d, lipschitz, hessian, gamma)?);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
