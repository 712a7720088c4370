//! Discretization strategies for the continuum-armed problem.
//!
//! * [`run_fixed_grid`]: a finite-armed bandit over the bins of a fixed
//!   `m`-grid, each pull landing uniformly inside the chosen bin.
//! * [`run_known_l`]: the same with `m = ⌈L^{2/(d+2)} T^{1/(d+2)}⌉`.
//! * [`run_two_phase`]: pulls every bin of an `m`-grid `E` times, estimates
//!   the Lipschitz constant from neighbouring bin means, inflates it by a
//!   Hoeffding deviation term and plays the rest of the horizon on the grid
//!   sized from that estimate.
//!
//! The module also evaluates the reference curves: the minimax lower bound
//! and the upper bound guaranteed for the two-phase strategy run with INF.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::Environment;
use crate::error::{Error, Result};
use crate::grid::{bin_count, sample_in_linear_bin};
use crate::harness::RegretTrace;
use crate::mab::{MabKind, MabState};

/// Relative distance within which a real is treated as the nearest integer
/// before taking floors and ceilings, so that e.g. `729^{1/3}` counts as 9.
const INTEGER_SNAP: f64 = 1e-9;

fn snap(x: f64) -> Option<f64> {
    let r = x.round();
    ((x - r).abs() <= INTEGER_SNAP * r.abs().max(1.0)).then_some(r)
}

pub(crate) fn ceil_snapped(x: f64) -> f64 {
    snap(x).unwrap_or_else(|| x.ceil())
}

pub(crate) fn floor_snapped(x: f64) -> f64 {
    snap(x).unwrap_or_else(|| x.floor())
}

/// Upper end of the admissible `γ` interval, `d(d+1) / ((3d+2)(d+2))`.
pub fn gamma_upper(d: usize) -> f64 {
    let d = d as f64;
    d * (d + 1.0) / ((3.0 * d + 2.0) * (d + 2.0))
}

/// `α = ((d+1)/(d+2) - γ (3d+2)/d) / (d+2)`.
pub fn alpha_for(d: usize, gamma: f64) -> f64 {
    let d = d as f64;
    ((d + 1.0) / (d + 2.0) - gamma * (3.0 * d + 2.0) / d) / (d + 2.0)
}

fn check_gamma(d: usize, gamma: f64) -> Result<()> {
    if d == 0 {
        return Err(Error::InvalidParameter("dimension must be at least 1".into()));
    }
    let upper = gamma_upper(d);
    if gamma > 0.0 && gamma < upper {
        Ok(())
    } else {
        Err(Error::GammaOutOfRange { gamma, upper, d })
    }
}

/// Exploration schedule of the two-phase strategy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseParams {
    pub horizon: u64,
    pub d: usize,
    pub gamma: f64,
    pub alpha: f64,
    /// bins per axis during exploration
    pub m: usize,
    /// pulls per exploration bin, `E`
    pub pulls_per_bin: u64,
}

impl PhaseParams {
    /// Length `E m^d` of the exploration phase.
    pub fn exploration_rounds(&self) -> u64 {
        self.pulls_per_bin * (self.m as u64).pow(self.d as u32)
    }
}

/// `m = ⌊T^α⌋`, `E = m² ⌈T^{2γ(d+2)/d}⌉`, rejecting schedules whose
/// exploration phase does not fit in the horizon.
pub fn choose_phase_params(horizon: u64, d: usize, gamma: f64) -> Result<PhaseParams> {
    check_gamma(d, gamma)?;
    if horizon == 0 {
        return Err(Error::HorizonTooSmall { horizon, reason: "T must be at least 1".into() });
    }
    let t = horizon as f64;
    let alpha = alpha_for(d, gamma);
    let m = floor_snapped(t.powf(alpha)).max(1.0) as usize;
    let df = d as f64;
    let repeat = ceil_snapped(t.powf(2.0 * gamma * (df + 2.0) / df)) as u128;
    let too_long = |reason: String| Error::HorizonTooSmall { horizon, reason };
    let pulls = (m as u128 * m as u128)
        .checked_mul(repeat)
        .filter(|&e| e <= u64::MAX as u128)
        .ok_or_else(|| too_long("pulls per bin overflow".into()))?;
    let bins = bin_count(m, d).ok_or_else(|| too_long("bin count overflow".into()))?;
    let rounds = pulls.checked_mul(bins as u128);
    match rounds {
        Some(r) if r <= horizon as u128 => Ok(PhaseParams {
            horizon,
            d,
            gamma,
            alpha,
            m,
            pulls_per_bin: pulls as u64,
        }),
        _ => Err(too_long(format!(
            "exploration needs E·m^d = {pulls}·{bins} rounds (m = {m})"
        ))),
    }
}

/// Outcome of the exploration phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzEstimate {
    pub m: usize,
    pub pulls_per_bin: u64,
    /// per-bin reward means, lexicographic bin order
    pub mu_hat: Vec<f64>,
    pub l_hat: f64,
    pub l_tilde: f64,
    /// `⌈L̃^{2/(d+2)} T^{1/(d+2)}⌉`
    pub m_tilde: u64,
    /// grid actually played after capping `m̃^d` at the remaining horizon
    pub m_tilde_used: u64,
    pub capped: bool,
}

/// `m · max |μ̂_k - μ̂_{k+s}|` over interior bins `k ∈ {1..m-2}^d` and
/// diagonal neighbours `s ∈ {-1,1}^d`.
pub fn estimate_lhat(mu_hat: &[f64], m: usize, d: usize) -> Result<f64> {
    if m < 3 {
        return Err(Error::GridTooCoarse(m));
    }
    let n = bin_count(m, d).filter(|&n| n == mu_hat.len()).ok_or_else(|| {
        Error::InvalidParameter(format!(
            "expected m^d = {m}^{d} bin means, got {}",
            mu_hat.len()
        ))
    })?;
    // stride of axis a in lexicographic order
    let strides: Vec<usize> = (0..d).map(|a| m.pow((d - 1 - a) as u32)).collect();
    let mut coord = vec![0usize; d];
    let mut best = 0.0f64;
    for lin in 0..n {
        let mut rest = lin;
        for (c, s) in coord.iter_mut().zip(&strides) {
            *c = rest / s;
            rest %= s;
        }
        if coord.iter().any(|&c| c == 0 || c == m - 1) {
            continue;
        }
        for mask in 0u32..(1 << d) {
            let mut other = lin;
            for (a, s) in strides.iter().enumerate() {
                if mask >> a & 1 == 1 {
                    other += s;
                } else {
                    other -= s;
                }
            }
            best = best.max((mu_hat[lin] - mu_hat[other]).abs());
        }
    }
    Ok(m as f64 * best)
}

/// Hoeffding deviation term `m sqrt((2/E) ln(2 m^d T))`.
pub fn deviation_term(m: usize, pulls_per_bin: u64, horizon: u64, d: usize) -> f64 {
    let log_term = std::f64::consts::LN_2 + d as f64 * (m as f64).ln() + (horizon as f64).ln();
    m as f64 * (2.0 / pulls_per_bin as f64 * log_term).sqrt()
}

/// `⌈L^{2/(d+2)} T^{1/(d+2)}⌉`, at least 1.
pub fn grid_size_for(lipschitz: f64, horizon: u64, d: usize) -> u64 {
    let df = d as f64;
    let x = lipschitz.powf(2.0 / (df + 2.0)) * (horizon as f64).powf(1.0 / (df + 2.0));
    (ceil_snapped(x) as u64).max(1)
}

/// Inflated estimate `L̃ = L̂ + m sqrt((2/E) ln(2 m^d T))` and the grid size
/// `m̃` derived from it.
pub fn inflate_and_discretize(l_hat: f64, m: usize, pulls_per_bin: u64, horizon: u64, d: usize) -> (f64, u64) {
    let l_tilde = l_hat + deviation_term(m, pulls_per_bin, horizon, d);
    (l_tilde, grid_size_for(l_tilde, horizon, d))
}

/// Largest `n` with `n^d ≤ rounds`.
fn largest_grid_within(rounds: u64, d: usize) -> u64 {
    if rounds == 0 {
        return 0;
    }
    let mut n = floor_snapped((rounds as f64).powf(1.0 / d as f64)) as u64;
    let fits = |n: u64| (n as u128).checked_pow(d as u32).is_some_and(|p| p <= rounds as u128);
    while n > 1 && !fits(n) {
        n -= 1;
    }
    while fits(n + 1) {
        n += 1;
    }
    n.max(1)
}

/// Plays `rounds` rounds of `kind` on the bins of the `m`-grid, appending
/// cumulative pseudo-regret to `cumulative`.
fn play_grid<R: Rng + ?Sized>(
    env: &Environment,
    m: usize,
    rounds: u64,
    kind: MabKind,
    rng: &mut R,
    cumulative: &mut Vec<f64>,
) -> Result<()> {
    if rounds == 0 {
        return Ok(());
    }
    let d = env.dim();
    let n_arms = bin_count(m, d)
        .ok_or_else(|| Error::InvalidParameter(format!("{m}^{d} bins overflow")))?;
    let mut mab = MabState::new(kind, n_arms, rounds)?;
    let mut x = vec![0.0; d];
    let mut total = cumulative.last().copied().unwrap_or(0.0);
    for _ in 0..rounds {
        let arm = mab.select(rng)?;
        sample_in_linear_bin(arm, m, &mut x, rng);
        let reward = env.draw_reward(&x, rng);
        total += env.gap(&x);
        cumulative.push(total);
        mab.update(arm, reward)?;
    }
    Ok(())
}

/// Pulls every bin `pulls_per_bin` times, bins in lexicographic order, and
/// returns the per-bin reward means. Pseudo-regret is appended to `cumulative`.
fn explore<R: Rng + ?Sized>(
    env: &Environment,
    m: usize,
    pulls_per_bin: u64,
    rng: &mut R,
    cumulative: &mut Vec<f64>,
) -> Result<Vec<f64>> {
    let d = env.dim();
    let n = bin_count(m, d).ok_or_else(|| Error::InvalidParameter(format!("{m}^{d} bins overflow")))?;
    let mut x = vec![0.0; d];
    let mut total = cumulative.last().copied().unwrap_or(0.0);
    let mut means = Vec::with_capacity(n);
    for bin in 0..n {
        let mut sum = 0.0;
        for _ in 0..pulls_per_bin {
            sample_in_linear_bin(bin, m, &mut x, rng);
            sum += env.draw_reward(&x, rng);
            total += env.gap(&x);
            cumulative.push(total);
        }
        means.push(sum / pulls_per_bin as f64);
    }
    Ok(means)
}

/// Exploration phase alone: per-bin means from `pulls_per_bin` uniform pulls
/// in each bin of the `m`-grid.
pub fn pure_exploration<R: Rng + ?Sized>(
    env: &Environment,
    m: usize,
    pulls_per_bin: u64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if m == 0 || pulls_per_bin == 0 {
        return Err(Error::InvalidParameter("need m ≥ 1 and E ≥ 1".into()));
    }
    let mut sink = Vec::new();
    explore(env, m, pulls_per_bin, rng, &mut sink)
}

/// Result of a two-phase run.
#[derive(Debug, Clone)]
pub struct TwoPhaseRun {
    pub params: PhaseParams,
    pub estimate: LipschitzEstimate,
    pub trace: RegretTrace,
}

/// Two-phase strategy with the default schedule of [`choose_phase_params`].
pub fn run_two_phase<R: Rng + ?Sized>(
    env: &Environment,
    horizon: u64,
    gamma: f64,
    kind: MabKind,
    rng: &mut R,
) -> Result<TwoPhaseRun> {
    let params = choose_phase_params(horizon, env.dim(), gamma)?;
    run_two_phase_with(env, &params, kind, rng)
}

/// Two-phase strategy with an explicit schedule.
pub fn run_two_phase_with<R: Rng + ?Sized>(
    env: &Environment,
    params: &PhaseParams,
    kind: MabKind,
    rng: &mut R,
) -> Result<TwoPhaseRun> {
    let (horizon, d, m, e) = (params.horizon, env.dim(), params.m, params.pulls_per_bin);
    if params.d != d {
        return Err(Error::InvalidParameter(format!(
            "schedule built for d = {}, environment has d = {d}",
            params.d
        )));
    }
    if m < 3 {
        // the estimate compares interior bins with their neighbours
        return Err(Error::HorizonTooSmall {
            horizon,
            reason: format!("exploration grid has m = {m} < 3 bins per axis"),
        });
    }
    let explore_rounds = e
        .checked_mul(bin_count(m, d).unwrap_or(usize::MAX) as u64)
        .filter(|&r| r <= horizon && e > 0)
        .ok_or_else(|| Error::HorizonTooSmall {
            horizon,
            reason: format!("exploration phase does not fit (m = {m}, E = {e})"),
        })?;

    let mut cumulative = Vec::with_capacity(horizon as usize);
    let mu_hat = explore(env, m, e, rng, &mut cumulative)?;
    let l_hat = estimate_lhat(&mu_hat, m, d)?;
    let (l_tilde, m_tilde) = inflate_and_discretize(l_hat, m, e, horizon, d);

    let remaining = horizon - explore_rounds;
    let cap = largest_grid_within(remaining, d);
    let capped = m_tilde > cap;
    let m_used = m_tilde.min(cap);
    if capped {
        log::info!("grid size m̃ = {m_tilde} capped at {m_used} for {remaining} remaining rounds (d = {d})");
    }
    if remaining > 0 {
        play_grid(env, m_used as usize, remaining, kind, rng, &mut cumulative)?;
    }
    Ok(TwoPhaseRun {
        params: *params,
        estimate: LipschitzEstimate {
            m,
            pulls_per_bin: e,
            mu_hat,
            l_hat,
            l_tilde,
            m_tilde,
            m_tilde_used: m_used,
            capped,
        },
        trace: RegretTrace::new(cumulative),
    })
}

/// Finite-armed bandit on the fixed `m`-grid for `horizon` rounds.
pub fn run_fixed_grid<R: Rng + ?Sized>(
    env: &Environment,
    horizon: u64,
    m: usize,
    kind: MabKind,
    rng: &mut R,
) -> Result<RegretTrace> {
    if horizon == 0 || m == 0 {
        return Err(Error::InvalidParameter("need T ≥ 1 and m ≥ 1".into()));
    }
    let mut cumulative = Vec::with_capacity(horizon as usize);
    play_grid(env, m, horizon, kind, rng, &mut cumulative)?;
    Ok(RegretTrace::new(cumulative))
}

/// Grid size `⌈L^{2/(d+2)} T^{1/(d+2)}⌉` of the known-`L` strategy, capped so
/// that the grid has at most `T` bins.
pub fn known_l_grid(lipschitz: f64, horizon: u64, d: usize) -> u64 {
    let m = grid_size_for(lipschitz, horizon, d);
    let cap = largest_grid_within(horizon, d);
    if m > cap {
        log::info!("known-L grid size {m} capped at {cap} for T = {horizon} (d = {d})");
    }
    m.min(cap)
}

/// Discretization strategy tuned with a known Lipschitz constant.
pub fn run_known_l<R: Rng + ?Sized>(
    env: &Environment,
    horizon: u64,
    lipschitz: f64,
    kind: MabKind,
    rng: &mut R,
) -> Result<RegretTrace> {
    if !(lipschitz.is_finite() && lipschitz > 0.0) {
        return Err(Error::InvalidParameter(format!("known L must be positive, got {lipschitz}")));
    }
    if horizon == 0 {
        return Err(Error::InvalidParameter("T must be at least 1".into()));
    }
    let m = known_l_grid(lipschitz, horizon, env.dim());
    run_fixed_grid(env, horizon, m as usize, kind, rng)
}

/// Vanishing term of the two-phase upper bound,
/// `5 T^{-γ} (ln 2T^d)^{d/(d+2)} + T^{-γ} + (2 sqrt(2 d^d T) + 1) T^{-(d+1)/(d+2)}`.
///
/// The last term is taken with a negative exponent; with the positive one it
/// would grow with `T` instead of vanishing.
pub fn theorem2_epsilon(horizon: f64, d: usize, gamma: f64) -> f64 {
    let df = d as f64;
    let t_gamma = horizon.powf(-gamma);
    let log_term = std::f64::consts::LN_2 + df * horizon.ln();
    5.0 * t_gamma * log_term.powf(df / (df + 2.0))
        + t_gamma
        + (2.0 * (2.0 * df.powf(df) * horizon).sqrt() + 1.0) * horizon.powf(-(df + 1.0) / (df + 2.0))
}

/// Regret upper bound of the two-phase strategy with INF over environments
/// with Lipschitz constant `L` and Hessian bound `M`:
/// `max{(8M/L + 1)^{1/α}, L^{d/(d+2)} T^{(d+1)/(d+2)} (9 + ε(T, d))}`.
pub fn theorem2_bound(horizon: f64, d: usize, lipschitz: f64, hessian: f64, gamma: f64) -> Result<f64> {
    check_gamma(d, gamma)?;
    if !(lipschitz > 0.0) || hessian < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "need L > 0 and M ≥ 0, got L = {lipschitz}, M = {hessian}"
        )));
    }
    let df = d as f64;
    let warmup = (8.0 * hessian / lipschitz + 1.0).powf(1.0 / alpha_for(d, gamma));
    let main = lipschitz.powf(df / (df + 2.0))
        * horizon.powf((df + 1.0) / (df + 2.0))
        * (9.0 + theorem2_epsilon(horizon, d, gamma));
    Ok(warmup.max(main))
}

/// Minimax lower bound `0.15 L^{d/(d+2)} T^{(d+1)/(d+2)}`, defined for
/// `T ≥ max{L^d, (0.15 L^{2/(d+2)} / max{d,2})^d}`.
pub fn theorem1_lower_bound(horizon: f64, d: usize, lipschitz: f64) -> Option<f64> {
    if d == 0 || !(lipschitz > 0.0) {
        return None;
    }
    let df = d as f64;
    let threshold = lipschitz
        .powf(df)
        .max((0.15 * lipschitz.powf(2.0 / (df + 2.0)) / df.max(2.0)).powf(df));
    (horizon >= threshold && horizon >= 1.0)
        .then(|| 0.15 * lipschitz.powf(df / (df + 2.0)) * horizon.powf((df + 1.0) / (df + 2.0)))
}
