//! Continuum-armed stochastic bandits on `[0, 1]^d` with Lipschitz mean payoffs.
//!
//! The crate provides:
//!
//! * [`env`]: mean-payoff families with exact smoothness metadata, bounded
//!   reward noise and the cone-bump hard instances;
//! * [`grid`]: the regular `m^d` hypercube partition, in-bin sampling, bin
//!   averages and the deterministic grid approximation of the Lipschitz
//!   constant;
//! * [`mab`]: finite-armed strategies (UCB1, EXP3, INF) behind one
//!   sequential interface;
//! * [`adaptive`]: the fixed-grid and known-`L` discretization strategies,
//!   and the two-phase strategy that first estimates `L` by uniform
//!   exploration and then runs a bandit on an adaptively sized grid;
//! * [`harness`]: replicated Monte Carlo experiments, lemma validation,
//!   CSV/JSON output and the scaling-exponent fit used by the CLI.

pub mod adaptive;
pub mod env;
pub mod error;
pub mod grid;
pub mod harness;
pub mod mab;
pub mod quadrature;

pub use error::{Error, Result};

/// Random stream used by every simulation in the crate.
pub type SimRng = rand_chacha::ChaCha8Rng;

/// Builds a [`SimRng`] from a 64-bit seed.
pub fn rng_from_seed(seed: u64) -> SimRng {
    use rand::SeedableRng;
    SimRng::seed_from_u64(seed)
}
