use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::env::{Environment, Family, NoiseSpec};
use crate::error::{Error, Result};
use crate::mab::MabKind;

/// Environment variable overriding `output.dir` of every config.
pub const OUTPUT_DIR_ENV: &str = "LIPBANDIT_OUTPUT_DIR";

/// Exploration exponent used when a two-phase config leaves `gamma` out.
pub const DEFAULT_GAMMA: f64 = 0.05;

/// `[env]` section: a built-in family plus dimension and noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub d: usize,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(flatten)]
    pub family: Family,
}

impl EnvSpec {
    pub fn build(&self) -> Result<Environment> {
        Environment::from_family(&self.family, self.d, self.noise)
            .map_err(|e| Error::config("env", e.to_string()))
    }
}

/// Discretization strategy of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StrategyKind {
    TwoPhase {
        #[serde(default = "default_gamma")]
        gamma: f64,
    },
    /// Single-phase grid tuned with `lipschitz`; the environment's own
    /// constant when omitted.
    #[serde(rename = "known_l")]
    KnownL { lipschitz: Option<f64> },
    FixedGrid { m: usize },
}

fn default_gamma() -> f64 {
    DEFAULT_GAMMA
}

fn default_mab() -> MabKind {
    MabKind::Inf
}

/// `[strategy]` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySpec {
    #[serde(flatten)]
    pub kind: StrategyKind,
    #[serde(default = "default_mab")]
    pub mab: MabKind,
}

impl StrategySpec {
    /// Stable identifier used in seeds, file names and summaries.
    pub fn id(&self) -> String {
        match &self.kind {
            StrategyKind::TwoPhase { gamma } => format!("two_phase-{}-g{gamma}", self.mab),
            StrategyKind::KnownL { lipschitz: Some(l) } => format!("known_l-{}-L{l}", self.mab),
            StrategyKind::KnownL { lipschitz: None } => format!("known_l-{}", self.mab),
            StrategyKind::FixedGrid { m } => format!("fixed_grid-{}-m{m}", self.mab),
        }
    }
}

/// `[output]` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSpec {
    #[serde(default = "default_output_dir")]
    pub dir: PathBuf,
    /// write one trace CSV per run
    #[serde(default = "default_true")]
    pub traces: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { dir: default_output_dir(), traces: true }
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("lipbandit-out")
}

fn default_true() -> bool {
    true
}

/// `[lemmas]` section, read by `validate-lemmas`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaSpec {
    /// grid sizes of the deterministic suite
    #[serde(default = "default_lemma_grids")]
    pub grids: Vec<usize>,
    /// bins per axis of the estimation suites
    #[serde(default = "default_lemma_m")]
    pub m: usize,
    #[serde(default = "default_lemma_pulls")]
    pub pulls_per_bin: u64,
    #[serde(default = "default_lemma_delta")]
    pub delta: f64,
    #[serde(default = "default_lemma_replays")]
    pub replays: usize,
    /// horizon entering the deviation term of the coverage suite
    #[serde(default = "default_lemma_horizon")]
    pub horizon: u64,
    /// allowed excess of an empirical failure rate over its nominal value
    #[serde(default = "default_lemma_slack")]
    pub slack: f64,
}

impl Default for LemmaSpec {
    fn default() -> Self {
        Self {
            grids: default_lemma_grids(),
            m: default_lemma_m(),
            pulls_per_bin: default_lemma_pulls(),
            delta: default_lemma_delta(),
            replays: default_lemma_replays(),
            horizon: default_lemma_horizon(),
            slack: default_lemma_slack(),
        }
    }
}

fn default_lemma_grids() -> Vec<usize> {
    (3..=50).collect()
}
fn default_lemma_m() -> usize {
    5
}
fn default_lemma_pulls() -> u64 {
    200
}
fn default_lemma_delta() -> f64 {
    0.05
}
fn default_lemma_replays() -> usize {
    400
}
fn default_lemma_horizon() -> u64 {
    1000
}
fn default_lemma_slack() -> f64 {
    0.03
}

/// One experiment: an environment, a strategy, a list of horizons and a
/// number of replications per horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub env: EnvSpec,
    pub strategy: StrategySpec,
    pub horizons: Vec<u64>,
    pub replications: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub lemmas: LemmaSpec,
}

fn default_name() -> String {
    "experiment".into()
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config file, then applies [`OUTPUT_DIR_ENV`].
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV).filter(|d| !d.is_empty()) {
            cfg.output.dir = PathBuf::from(dir);
        }
        Ok(cfg)
    }

    /// Checks every field, naming the offending one on failure.
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
            return Err(Error::config("name", "use letters, digits, `-`, `_` or `.`"));
        }
        if self.replications == 0 {
            return Err(Error::config("replications", "must be at least 1"));
        }
        if self.horizons.is_empty() {
            return Err(Error::config("horizons", "needs at least one horizon"));
        }
        if self.horizons[0] == 0 {
            return Err(Error::config("horizons[0]", "horizons must be positive"));
        }
        if let Some(i) = self.horizons.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::config(format!("horizons[{}]", i + 1), "horizons must be strictly increasing"));
        }
        let env = self.env.build()?;
        match self.strategy.kind {
            StrategyKind::TwoPhase { gamma } => {
                let upper = crate::adaptive::gamma_upper(env.dim());
                if !(gamma > 0.0 && gamma < upper) {
                    return Err(Error::config("strategy.gamma", format!("must lie in (0, {upper})")));
                }
            }
            StrategyKind::KnownL { lipschitz } => match lipschitz {
                Some(l) if !(l.is_finite() && l > 0.0) => {
                    return Err(Error::config("strategy.lipschitz", "must be positive"));
                }
                None if !(env.lipschitz() > 0.0) => {
                    return Err(Error::config(
                        "strategy.lipschitz",
                        "required when the environment is constant",
                    ));
                }
                _ => {}
            },
            StrategyKind::FixedGrid { m } => {
                if m == 0 {
                    return Err(Error::config("strategy.m", "must be at least 1"));
                }
            }
        }
        let l = &self.lemmas;
        if l.grids.iter().any(|&m| m < 3) {
            return Err(Error::config("lemmas.grids", "grid sizes must be at least 3"));
        }
        if l.m < 3 {
            return Err(Error::config("lemmas.m", "must be at least 3"));
        }
        if l.pulls_per_bin == 0 || l.replays == 0 || l.horizon == 0 {
            return Err(Error::config("lemmas", "pulls_per_bin, replays and horizon must be positive"));
        }
        if !(l.delta > 0.0 && l.delta < 1.0) {
            return Err(Error::config("lemmas.delta", "must lie in (0, 1)"));
        }
        if !(l.slack >= 0.0) {
            return Err(Error::config("lemmas.slack", "must be nonnegative"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
        name = "square"
        horizons = [1000, 10000]
        replications = 3
        base_seed = 7

        [env]
        family = "quadratic"
        coef = [1.0]
        center = [0.0]
        offset = 0.0
        d = 1

        [strategy]
        kind = "two_phase"
        gamma = 0.02
    "#;

    #[test]
    fn parses_a_full_config() {
        let cfg = ExperimentConfig::from_toml_str(BASIC).unwrap();
        assert_eq!(cfg.horizons, vec![1000, 10000]);
        assert_eq!(cfg.env.noise, NoiseSpec::Bernoulli);
        assert_eq!(cfg.strategy.mab, MabKind::Inf);
        assert_eq!(cfg.strategy.kind, StrategyKind::TwoPhase { gamma: 0.02 });
        assert_eq!(cfg.output, OutputSpec::default());
        assert_eq!(cfg.lemmas, LemmaSpec::default());
        assert_eq!(cfg.env.build().unwrap().lipschitz(), 2.0);
    }

    #[test]
    fn defaults_and_integer_literals() {
        let text = r#"
            horizons = [100]
            replications = 1
            [env]
            family = "affine"
            slope = [0]
            intercept = 1
            d = 2
            noise = { kind = "zero" }
            [strategy]
            kind = "known_l"
            lipschitz = 1
            mab = "ucb1"
        "#;
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.name, "experiment");
        assert_eq!(cfg.strategy.kind, StrategyKind::KnownL { lipschitz: Some(1.0) });
        assert_eq!(cfg.strategy.id(), "known_l-ucb1-L1");
        let two = ExperimentConfig::from_toml_str(&BASIC.replace("gamma = 0.02", "")).unwrap();
        assert_eq!(two.strategy.kind, StrategyKind::TwoPhase { gamma: DEFAULT_GAMMA });
    }

    fn field_of(err: Error) -> String {
        match err {
            Error::Config { path, .. } => path,
            other => panic!("expected a config error, got {other}"),
        }
    }

    #[test]
    fn semantic_errors_name_the_field() {
        let cases = [
            ("replications = 3", "replications = 0", "replications"),
            ("[1000, 10000]", "[1000, 1000]", "horizons[1]"),
            ("gamma = 0.02", "gamma = 0.5", "strategy.gamma"),
            ("offset = 0.0", "offset = 0.5", "env"),
            ("name = \"square\"", "name = \"a b\"", "name"),
        ];
        for (from, to, path) in cases {
            let err = ExperimentConfig::from_toml_str(&BASIC.replace(from, to)).unwrap_err();
            assert_eq!(field_of(err), path, "{to}");
        }
    }

    #[test]
    fn syntax_errors_point_at_the_key() {
        let err = ExperimentConfig::from_toml_str(&BASIC.replace("replications = 3", "replications = \"x\""))
            .unwrap_err();
        assert!(matches!(err, Error::ConfigParse(_)));
        assert!(err.to_string().contains("replications"), "{err}");
    }
}
