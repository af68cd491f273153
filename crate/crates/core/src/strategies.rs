//! The [`Agent`] trait and the built-in decision rules.
//!
//! Agents are pure policies: given an observation and the player's own
//! random stream they pick the strategy to hold next. They carry no mutable
//! state of their own, so a single agent value can serve many trials (and
//! threads) at once, and replaying a trial only requires the same
//! observation sequence and seed.
//!
//! The random-draw protocol is part of each agent's contract, because the
//! seeded streams make draw counts observable: an agent that consumed a
//! different number of draws per tick would shift every later draw and
//! change the trial. The built-in agents document exactly when they draw.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Observation, Strategy, TrialConfig};
use crate::scalar::Scalar;

/// An agent failed to produce a decision. Carries a human-readable reason;
/// the engine wraps it with the failing player and tick.
#[derive(Debug, Error)]
#[error("{0}")]
pub struct AgentError(pub String);

/// A decision rule for one seat.
pub trait Agent<S: Scalar>: Send + Sync {
    /// Short machine-readable name, matching the `kind` tag of
    /// [`AgentSpec`] where one exists.
    fn kind(&self) -> &'static str;

    /// Picks the strategy to hold next.
    ///
    /// `rng` is the player's own seeded stream. Decisions must depend only
    /// on `observation` and the draws taken from `rng`, and the number of
    /// draws must be a deterministic function of the same, or trials stop
    /// being reproducible.
    fn decide(
        &self,
        observation: &Observation<S>,
        rng: &mut dyn RngCore,
    ) -> Result<Strategy, AgentError>;
}

/// Plays one fixed strategy forever. Draws nothing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AlwaysAgent {
    pub strategy: Strategy,
}

/// An agent that always holds `strategy`.
pub fn always(strategy: Strategy) -> AlwaysAgent {
    AlwaysAgent { strategy }
}

impl<S: Scalar> Agent<S> for AlwaysAgent {
    fn kind(&self) -> &'static str {
        "always"
    }

    fn decide(&self, _: &Observation<S>, _: &mut dyn RngCore) -> Result<Strategy, AgentError> {
        Ok(self.strategy)
    }
}

/// Mirrors the opponent's currently visible strategy. Draws nothing.
///
/// "Visible" is the key word: under commit delays the opponent's standing
/// strategy lags its intent, so this is tit-for-tat against the delayed
/// picture, not the opponent's latest choice.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TitForTatAgent;

/// A tit-for-tat agent.
pub fn tit_for_tat() -> TitForTatAgent {
    TitForTatAgent
}

impl<S: Scalar> Agent<S> for TitForTatAgent {
    fn kind(&self) -> &'static str {
        "tit_for_tat"
    }

    fn decide(&self, obs: &Observation<S>, _: &mut dyn RngCore) -> Result<Strategy, AgentError> {
        Ok(obs.opponent_strategy())
    }
}

/// Parameters of the probabilistic rule: follow tit-for-tat with
/// probability `p`, otherwise defect with a probability that grows with the
/// player's own commit delay at rate `alpha`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbabilisticParams<S> {
    pub p: S,
    pub alpha: S,
}

/// Rejected [`ProbabilisticParams`].
#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct InvalidParams(pub String);

impl<S: Scalar> ProbabilisticParams<S> {
    /// Requires `p` in `[0, 1]` and `alpha` non-negative and finite.
    pub fn validate(&self) -> Result<(), InvalidParams> {
        if !(self.p >= S::zero() && self.p <= S::one()) {
            return Err(InvalidParams(format!("p must lie in [0, 1], got {}", self.p)));
        }
        if !(self.alpha >= S::zero()) || !self.alpha.is_finite() {
            return Err(InvalidParams(format!(
                "alpha must be non-negative and finite, got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// The probabilistic rule behind the delay sweeps.
///
/// Each tick, with probability `p`, the agent mirrors the opponent's
/// visible strategy. Otherwise it defects with probability
/// `min(alpha * delay_self, 1)` and cooperates with the remainder, the idea
/// being that a player facing a long commit delay has less to gain from
/// staying aligned.
///
/// Draw protocol: one uniform draw decides the mirror-vs-not branch; a
/// second is taken only on the non-mirror branch. All draws are `f64`
/// regardless of the scalar, so the same seed produces the same decisions
/// under `f32` and `f64`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbabilisticAgent<S> {
    pub params: ProbabilisticParams<S>,
}

/// A probabilistic agent with validated parameters.
pub fn probabilistic<S: Scalar>(
    params: ProbabilisticParams<S>,
) -> Result<ProbabilisticAgent<S>, InvalidParams> {
    params.validate()?;
    Ok(ProbabilisticAgent { params })
}

impl<S: Scalar> Agent<S> for ProbabilisticAgent<S> {
    fn kind(&self) -> &'static str {
        "probabilistic"
    }

    fn decide(&self, obs: &Observation<S>, rng: &mut dyn RngCore) -> Result<Strategy, AgentError> {
        let mirror: f64 = rng.gen();
        if mirror < self.params.p.as_f64() {
            return Ok(obs.opponent_strategy());
        }
        let defect_prob =
            (self.params.alpha.as_f64() * obs.delay_self.as_f64()).clamp(0.0, 1.0);
        let draw: f64 = rng.gen();
        Ok(if draw < defect_prob { Strategy::Defect } else { Strategy::Cooperate })
    }
}

/// Plays back a fixed per-tick script, repeating the last entry once the
/// script runs out. Draws nothing.
#[derive(Clone, Debug, PartialEq)]
pub struct ScriptedAgent<S> {
    sequence: Vec<Strategy>,
    dt: S,
}

/// A scripted agent. The script is indexed by tick, so the agent needs the
/// trial's `dt` to recover the tick from the observed server time.
///
/// Panics on an empty script; [`AgentSpec::build`] rejects those with a
/// proper error before getting here.
pub fn scripted<S: Scalar>(sequence: Vec<Strategy>, dt: S) -> ScriptedAgent<S> {
    assert!(!sequence.is_empty(), "scripted agent needs at least one entry");
    ScriptedAgent { sequence, dt }
}

impl<S: Scalar> Agent<S> for ScriptedAgent<S> {
    fn kind(&self) -> &'static str {
        "scripted"
    }

    fn decide(&self, obs: &Observation<S>, _: &mut dyn RngCore) -> Result<Strategy, AgentError> {
        let tick = (obs.server_time / self.dt).as_f64().round();
        if !(tick >= 0.0) || !tick.is_finite() {
            return Err(AgentError(format!("bad server time {}", obs.server_time)));
        }
        let index = (tick as usize).min(self.sequence.len() - 1);
        Ok(self.sequence[index])
    }
}

/// Declarative form of the built-in agents, as found in experiment files.
///
/// ```json
/// {"kind": "always", "strategy": "D"}
/// {"kind": "tit_for_tat"}
/// {"kind": "probabilistic", "p": 0.9, "alpha": 0.1}
/// {"kind": "scripted", "sequence": ["C", "C", "D"]}
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgentSpec<S> {
    Always { strategy: Strategy },
    TitForTat,
    Probabilistic { p: S, alpha: S },
    Scripted { sequence: Vec<Strategy> },
}

/// An [`AgentSpec`] that cannot be built into an agent.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum AgentBuildError {
    #[error(transparent)]
    InvalidParams(#[from] InvalidParams),
    #[error("scripted agent needs at least one entry")]
    EmptyScript,
}

impl<S: Scalar> AgentSpec<S> {
    /// Instantiates the agent for a trial with the given configuration.
    pub fn build(&self, config: &TrialConfig<S>) -> Result<Box<dyn Agent<S>>, AgentBuildError> {
        match self {
            AgentSpec::Always { strategy } => Ok(Box::new(always(*strategy))),
            AgentSpec::TitForTat => Ok(Box::new(tit_for_tat())),
            AgentSpec::Probabilistic { p, alpha } => {
                Ok(Box::new(probabilistic(ProbabilisticParams { p: *p, alpha: *alpha })?))
            }
            AgentSpec::Scripted { sequence } => {
                if sequence.is_empty() {
                    return Err(AgentBuildError::EmptyScript);
                }
                Ok(Box::new(scripted(sequence.clone(), config.dt)))
            }
        }
    }
}
