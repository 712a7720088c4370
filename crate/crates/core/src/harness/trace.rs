use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Horizons above this are written at geometric checkpoints only.
pub const FULL_TRACE_LIMIT: u64 = 100_000;

/// Ratio between consecutive checkpoints of a downsampled trace.
pub const CHECKPOINT_RATIO: f64 = 1.01;

/// Cumulative pseudo-regret `Σ_{s ≤ t} (f* - f(I_s))` after every round of
/// one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretTrace {
    pub horizon: u64,
    cumulative: Vec<f64>,
    pub seed: u64,
    pub strategy: String,
    pub env: String,
}

impl RegretTrace {
    pub fn new(cumulative: Vec<f64>) -> Self {
        Self {
            horizon: cumulative.len() as u64,
            cumulative,
            seed: 0,
            strategy: String::new(),
            env: String::new(),
        }
    }

    pub fn with_labels(mut self, seed: u64, strategy: impl Into<String>, env: impl Into<String>) -> Self {
        self.seed = seed;
        self.strategy = strategy.into();
        self.env = env.into();
        self
    }

    /// `cumulative()[t - 1]` is the regret after round `t`.
    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn len(&self) -> usize {
        self.cumulative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cumulative.is_empty()
    }

    pub fn final_regret(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    /// Nondecreasing, nonnegative, and at most `t` after round `t`.
    pub fn check_invariants(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::TraceInvariant(msg));
        if self.cumulative.len() as u64 != self.horizon {
            return bad(format!("{} entries for T = {}", self.cumulative.len(), self.horizon));
        }
        let mut prev = 0.0;
        for (i, &c) in self.cumulative.iter().enumerate() {
            let t = (i + 1) as f64;
            if !c.is_finite() || c < prev {
                return bad(format!("regret decreases at t = {}: {prev} -> {c}", i + 1));
            }
            // summation error only; each increment is at most 1
            if c > t * (1.0 + 1e-12) {
                return bad(format!("regret {c} exceeds t = {}", i + 1));
            }
            prev = c;
        }
        Ok(())
    }

    /// Rounds (1-based) written to disk: all of them up to
    /// [`FULL_TRACE_LIMIT`], geometric checkpoints plus the final round beyond.
    pub fn checkpoints(&self) -> Vec<u64> {
        checkpoints(self.horizon)
    }

    /// `t,cum_regret` rows at the checkpoints, after checking the invariants.
    pub fn to_csv(&self) -> Result<String> {
        self.check_invariants()?;
        let mut out = String::from("t,cum_regret\n");
        for t in self.checkpoints() {
            let c = self.cumulative[(t - 1) as usize];
            writeln!(out, "{t},{c}").expect("writing to a String");
        }
        Ok(out)
    }
}

pub(crate) fn checkpoints(horizon: u64) -> Vec<u64> {
    if horizon <= FULL_TRACE_LIMIT {
        return (1..=horizon).collect();
    }
    let mut out = Vec::new();
    let mut t = 1u64;
    while t < horizon {
        out.push(t);
        t = ((t as f64 * CHECKPOINT_RATIO) as u64).max(t + 1);
    }
    out.push(horizon);
    out
}
