//! Experiment files.
//!
//! An experiment is a JSON file mirroring [`ExperimentSpec`]: a base trial
//! configuration, a list of delay conditions, the two agents, and batch
//! bookkeeping. Every numeric field of the base configuration has a
//! default, so a minimal experiment names only the agents and the delays:
//!
//! ```json
//! {
//!   "delays": [0, 5, 10, 15, 20],
//!   "agent_a": {"kind": "probabilistic", "p": 0.9, "alpha": 0.1},
//!   "agent_b": {"kind": "probabilistic", "p": 0.9, "alpha": 0.1}
//! }
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use cpd_core::model::{ConfigError, TrialConfig};
use cpd_core::seed::{splitmix64, trial_seed};
use cpd_core::strategies::{Agent, AgentBuildError, AgentSpec};
use cpd_core::Scalar;
use cpd_llm::{LlmAgentSpec, LlmError};

/// One delay condition: a single number applies to both players, a pair
/// sets them separately.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DelaySpec<S> {
    Symmetric(S),
    PerPlayer { a: S, b: S },
}

impl<S: Copy> DelaySpec<S> {
    /// The `(delay_a, delay_b)` pair this condition stands for.
    pub fn pair(&self) -> (S, S) {
        match *self {
            DelaySpec::Symmetric(d) => (d, d),
            DelaySpec::PerPlayer { a, b } => (a, b),
        }
    }
}

impl<S: Scalar> DelaySpec<S> {
    /// Seed key of this condition, derived from the delay values
    /// themselves. Keying by value rather than list position means
    /// reordering the delay list permutes output rows without changing
    /// any trial's stream.
    pub fn seed_key(&self) -> u64 {
        let (a, b) = self.pair();
        splitmix64(a.as_f64().to_bits()) ^ b.as_f64().to_bits()
    }
}

/// Any agent the runner can seat: a built-in strategy or an
/// endpoint-backed one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
#[serde(bound(serialize = "S: Scalar", deserialize = "S: Scalar"))]
pub enum AnyAgentSpec<S: Scalar> {
    Builtin(AgentSpec<S>),
    Llm(LlmAgentSpec<S>),
}

/// An [`AnyAgentSpec`] that cannot be built.
#[derive(Debug, Error)]
pub enum BuildAgentError {
    #[error(transparent)]
    Builtin(#[from] AgentBuildError),
    #[error(transparent)]
    Llm(#[from] LlmError),
}

impl<S: Scalar> AnyAgentSpec<S> {
    /// Instantiates the agent for a trial.
    pub fn build(&self, config: &TrialConfig<S>) -> Result<Box<dyn Agent<S>>, BuildAgentError> {
        match self {
            AnyAgentSpec::Builtin(spec) => Ok(spec.build(config)?),
            AnyAgentSpec::Llm(spec) => Ok(Box::new(spec.build(config)?)),
        }
    }
}

fn default_trials_per_delay() -> u64 {
    10
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

/// A sweep: the base configuration, the delay conditions to visit, the two
/// seats, and how many seeded trials to run per condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "S: Scalar", deserialize = "S: Scalar"))]
pub struct ExperimentSpec<S: Scalar> {
    /// Trial configuration shared by every condition; the per-condition
    /// delays and per-trial seeds are filled in by the runner.
    #[serde(default)]
    pub base: TrialConfig<S>,
    /// Delay conditions, visited in order.
    pub delays: Vec<DelaySpec<S>>,
    pub agent_a: AnyAgentSpec<S>,
    pub agent_b: AnyAgentSpec<S>,
    /// Trials per delay condition.
    #[serde(default = "default_trials_per_delay")]
    pub trials_per_delay: u64,
    /// Root seed; each trial derives its own seed from this, its delay
    /// condition's [`DelaySpec::seed_key`], and its trial index, so
    /// reordering the delay list or running trials concurrently cannot
    /// change any trial's stream.
    #[serde(default)]
    pub base_seed: u64,
    /// Where artifacts go.
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

/// An experiment file the runner refuses to start.
#[derive(Debug, Error)]
pub enum SpecError {
    #[error("experiment needs at least one delay condition")]
    NoDelays,
    #[error("trials_per_delay must be at least 1")]
    NoTrials,
    #[error("delay condition {index}: {source}")]
    Condition { index: usize, source: ConfigError },
}

impl<S: Scalar> ExperimentSpec<S> {
    /// Checks the sweep bookkeeping and every per-condition configuration.
    pub fn validate(&self) -> Result<(), SpecError> {
        if self.delays.is_empty() {
            return Err(SpecError::NoDelays);
        }
        if self.trials_per_delay == 0 {
            return Err(SpecError::NoTrials);
        }
        for index in 0..self.delays.len() {
            self.trial_config(index, 0)
                .validated()
                .map_err(|source| SpecError::Condition { index, source })?;
        }
        Ok(())
    }

    /// The configuration of one trial: the base with the condition's
    /// delays and the derived seed.
    pub fn trial_config(&self, delay_index: usize, trial_index: u64) -> TrialConfig<S> {
        let condition = self.delays[delay_index];
        let (delay_a, delay_b) = condition.pair();
        TrialConfig {
            delay_a,
            delay_b,
            seed: trial_seed(self.base_seed, condition.seed_key(), trial_index),
            ..self.base
        }
    }
}

/// Reads and parses an experiment file.
pub fn load_experiment<S: Scalar>(path: &Path) -> Result<ExperimentSpec<S>, LoadError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| LoadError::Read { path: path.to_owned(), source })?;
    serde_json::from_str(&text).map_err(|source| LoadError::Parse { path: path.to_owned(), source })
}

/// An experiment file that cannot be read or understood.
#[derive(Debug, Error)]
pub enum LoadError {
    #[error("reading {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("parsing {path}: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
}
