use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, StrategyKind, DEFAULT_GAMMA};
use super::trace::RegretTrace;
use crate::adaptive::{self, LipschitzEstimate};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::rng_from_seed;

/// Version of the summary JSON layout.
pub const SUMMARY_SCHEMA_VERSION: u32 = 1;

/// Version of the trace CSV layout (`t,cum_regret`).
pub const TRACE_SCHEMA_VERSION: u32 = 1;

/// Per-run seed: the first 8 bytes of
/// `SHA-256(base_seed ␟ env ␟ strategy ␟ T ␟ replication)`, little endian.
///
/// Adding horizons, replications or strategies never changes the seeds of
/// existing runs.
pub fn derive_seed(base_seed: u64, env_id: &str, strategy_id: &str, horizon: u64, replication: u64) -> u64 {
    let mut h = Sha256::new();
    for part in [
        base_seed.to_string().as_bytes(),
        env_id.as_bytes(),
        strategy_id.as_bytes(),
        horizon.to_string().as_bytes(),
        replication.to_string().as_bytes(),
    ] {
        h.update(part);
        h.update([0x1f]);
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Summary of one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub replication: usize,
    pub seed: u64,
    pub final_regret: f64,
    /// bins per axis of the grid the bandit played on
    pub grid_m: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lipschitz_estimate: Option<LipschitzEstimate>,
}

/// Aggregate over the replications of one horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonSummary {
    pub horizon: u64,
    /// `"ok"`, or `"refused"` when the exploration phase does not fit
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refusal: Option<String>,
    pub mean_final_regret: Option<f64>,
    pub std_final_regret: Option<f64>,
    pub theorem1_lower_bound: Option<f64>,
    pub theorem2_bound: Option<f64>,
    /// `(8M/L + 1)^{1/α}`, the bound's value below its warm-up horizon
    pub theorem2_warmup: Option<f64>,
    pub runs: Vec<RunRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSummary {
    pub id: String,
    pub family: String,
    pub d: usize,
    pub lipschitz: f64,
    /// `null` when the Hessian is unbounded
    pub hessian_bound: Option<f64>,
    pub f_star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub schema_version: u32,
    pub trace_schema_version: u32,
    pub name: String,
    pub env: EnvSummary,
    pub strategy_id: String,
    pub strategy: super::config::StrategySpec,
    pub base_seed: u64,
    pub replications: usize,
    pub horizons: Vec<HorizonSummary>,
}

impl ExperimentSummary {
    /// Mean final regret per horizon, skipping refused horizons.
    pub fn mean_curve(&self) -> Vec<(u64, f64)> {
        self.horizons
            .iter()
            .filter_map(|h| h.mean_final_regret.map(|r| (h.horizon, r)))
            .collect()
    }
}

/// Outcome of one replication.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trace: RegretTrace,
    pub grid_m: u64,
    pub estimate: Option<LipschitzEstimate>,
}

/// Runs one replication of `kind` with the given seed.
pub fn run_strategy(
    env: &Environment,
    strategy: &super::config::StrategySpec,
    horizon: u64,
    seed: u64,
) -> Result<RunOutcome> {
    let mut rng = rng_from_seed(seed);
    let mab = strategy.mab;
    let (trace, grid_m, estimate) = match strategy.kind {
        StrategyKind::TwoPhase { gamma } => {
            let run = adaptive::run_two_phase(env, horizon, gamma, mab, &mut rng)?;
            (run.trace, run.estimate.m_tilde_used, Some(run.estimate))
        }
        StrategyKind::KnownL { lipschitz } => {
            let l = lipschitz.unwrap_or(env.lipschitz());
            let trace = adaptive::run_known_l(env, horizon, l, mab, &mut rng)?;
            (trace, adaptive::known_l_grid(l, horizon, env.dim()), None)
        }
        StrategyKind::FixedGrid { m } => {
            (adaptive::run_fixed_grid(env, horizon, m, mab, &mut rng)?, m as u64, None)
        }
    };
    let trace = trace.with_labels(seed, strategy.id(), env.id());
    trace.check_invariants()?;
    Ok(RunOutcome { trace, grid_m, estimate })
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn trace_file_name(strategy_id: &str, horizon: u64, replication: usize) -> String {
    format!("{strategy_id}_T{horizon}_r{replication:04}.csv")
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Directory receiving the outputs of `cfg`.
pub fn experiment_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output.dir.join(&cfg.name)
}

/// Runs every (horizon, replication) pair of `cfg`, writes the trace CSVs
/// and `summary.json` under [`experiment_dir`], and returns the summary.
///
/// Two-phase horizons too short for the exploration phase are reported as
/// refused together with the warm-up value of the upper bound.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentSummary> {
    cfg.validate()?;
    let env = cfg.env.build()?;
    let env_id = env.id();
    let strategy_id = cfg.strategy.id();
    let out_dir = experiment_dir(cfg);
    let trace_dir = out_dir.join("traces");

    let gamma = match cfg.strategy.kind {
        StrategyKind::TwoPhase { gamma } => gamma,
        _ => DEFAULT_GAMMA,
    };
    let (l, m_bound, d) = (env.lipschitz(), env.hessian_bound(), env.dim());

    let mut horizons = Vec::with_capacity(cfg.horizons.len());
    for &horizon in &cfg.horizons {
        let t = horizon as f64;
        let theorem1 = adaptive::theorem1_lower_bound(t, d, l);
        let (theorem2, warmup) = if m_bound.is_bounded() && l > 0.0 {
            let b = adaptive::theorem2_bound(t, d, l, m_bound.value(), gamma)?;
            let w = (8.0 * m_bound.value() / l + 1.0).powf(1.0 / adaptive::alpha_for(d, gamma));
            (Some(b), Some(w))
        } else {
            (None, None)
        };
        let mut summary = HorizonSummary {
            horizon,
            status: "ok".into(),
            refusal: None,
            mean_final_regret: None,
            std_final_regret: None,
            theorem1_lower_bound: theorem1,
            theorem2_bound: theorem2,
            theorem2_warmup: warmup,
            runs: Vec::new(),
        };
        if let StrategyKind::TwoPhase { gamma } = cfg.strategy.kind {
            let fits = adaptive::choose_phase_params(horizon, d, gamma).and_then(|p| {
                if p.m < 3 {
                    Err(Error::HorizonTooSmall {
                        horizon,
                        reason: format!("exploration grid has m = {} < 3 bins per axis", p.m),
                    })
                } else {
                    Ok(p)
                }
            });
            if let Err(e) = fits {
                log::warn!("T = {horizon}: two-phase strategy refused: {e}");
                summary.status = "refused".into();
                summary.refusal = Some(e.to_string());
                horizons.push(summary);
                continue;
            }
        }

        let runs: Vec<RunRecord> = (0..cfg.replications)
            .into_par_iter()
            .map(|rep| {
                let seed = derive_seed(cfg.base_seed, &env_id, &strategy_id, horizon, rep as u64);
                let outcome = run_strategy(&env, &cfg.strategy, horizon, seed)?;
                let trace_file = if cfg.output.traces {
                    let name = trace_file_name(&strategy_id, horizon, rep);
                    write_file(&trace_dir.join(&name), outcome.trace.to_csv()?.as_bytes())?;
                    Some(format!("traces/{name}"))
                } else {
                    None
                };
                Ok(RunRecord {
                    replication: rep,
                    seed,
                    final_regret: outcome.trace.final_regret(),
                    grid_m: outcome.grid_m,
                    trace_file,
                    lipschitz_estimate: outcome.estimate,
                })
            })
            .collect::<Result<_>>()?;
        let finals: Vec<f64> = runs.iter().map(|r| r.final_regret).collect();
        let (mean, std) = mean_std(&finals);
        summary.mean_final_regret = Some(mean);
        summary.std_final_regret = Some(std);
        summary.runs = runs;
        horizons.push(summary);
    }

    let summary = ExperimentSummary {
        schema_version: SUMMARY_SCHEMA_VERSION,
        trace_schema_version: TRACE_SCHEMA_VERSION,
        name: cfg.name.clone(),
        env: EnvSummary {
            id: env_id,
            family: env.family().name().into(),
            d,
            lipschitz: l,
            hessian_bound: m_bound.is_bounded().then(|| m_bound.value()),
            f_star: env.f_star(),
        },
        strategy_id,
        strategy: cfg.strategy.clone(),
        base_seed: cfg.base_seed,
        replications: cfg.replications,
        horizons,
    };
    let json = serde_json::to_string_pretty(&summary)? + "\n";
    check_grid_round_trip(&json)?;
    write_file(&out_dir.join("summary.json"), json.as_bytes())?;
    Ok(summary)
}

/// Re-reads a serialized summary and checks that every two-phase grid size
/// follows from the serialized inflated estimate.
pub fn check_grid_round_trip(json: &str) -> Result<()> {
    let parsed: ExperimentSummary = serde_json::from_str(json)?;
    for h in &parsed.horizons {
        for run in &h.runs {
            if let Some(est) = &run.lipschitz_estimate {
                let expected = adaptive::grid_size_for(est.l_tilde, h.horizon, parsed.env.d);
                if expected != est.m_tilde {
                    return Err(Error::TraceInvariant(format!(
                        "T = {}, replication {}: serialized m̃ = {} but L̃ = {} gives {expected}",
                        h.horizon, run.replication, est.m_tilde, est.l_tilde
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Least-squares slope of `ln r` against `ln T`.
pub fn fit_scaling_exponent(horizons: &[f64], regrets: &[f64]) -> Result<f64> {
    if horizons.len() != regrets.len() {
        return Err(Error::ScalingFit("horizons and regrets differ in length".into()));
    }
    if horizons.len() < 4 {
        return Err(Error::ScalingFit(format!("need at least 4 horizons, got {}", horizons.len())));
    }
    if let Some(r) = regrets.iter().find(|&&r| !(r > 0.0 && r.is_finite())) {
        return Err(Error::ScalingFit(format!("mean regret {r} is not positive")));
    }
    if horizons.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
        return Err(Error::ScalingFit("horizons must be positive".into()));
    }
    let xs: Vec<f64> = horizons.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = regrets.iter().map(|r| r.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::ScalingFit("horizons must not all be equal".into()));
    }
    Ok(sxy / sxx)
}
