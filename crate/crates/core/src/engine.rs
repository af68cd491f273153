//! The tick loop: delayed commits, observations, payoff accrual.
//!
//! A trial runs for `trial_duration / dt` ticks, numbered from 0. Tick `t`
//! covers server time `t * dt` and proceeds in a fixed order:
//!
//! 1. Delayed submissions whose commit time is `t * dt` take effect and are
//!    logged (player A's before player B's).
//! 2. Both players observe: the standing strategies, cumulative rewards
//!    over *completed* ticks, and the change history within the memory
//!    horizon.
//! 3. Both players submit the strategy they want to hold. A submission at
//!    tick `t` with delay `d` takes effect at the top of tick `t + d/dt`;
//!    with zero delay it takes effect immediately, before this tick's
//!    payoffs.
//! 4. The tick's outcome is classified from the standing strategies and
//!    both payoffs accrue.
//!
//! Both players therefore move simultaneously within a tick: neither
//! observation can see the other's same-tick submission. Submissions whose
//! commit time falls beyond the end of the trial are discarded. The standing
//! strategies start at mutual cooperation, which is not logged as a change.
//!
//! [`run_trial`] packages the loop for in-process agents; the network
//! harness drives an [`Engine`] through the same methods step by step, which
//! is what keeps the two execution modes bit-identical.

use std::collections::VecDeque;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    classify, ConfigError, Observation, OutcomeCode, PlayerId, ServerState, StateChangeEvent,
    Strategy, TrialConfig,
};
use crate::scalar::{from_f64, Scalar};
use crate::seed::agent_rng;
use crate::strategies::{Agent, AgentError};

/// A submission waiting to take effect.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PendingCommit<S> {
    pub player: PlayerId,
    pub strategy: Strategy,
    /// Server time at which the strategy becomes standing.
    pub commit_time: S,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Phase {
    /// Between ticks: the next call must be `begin_tick`.
    Idle,
    /// Inside a tick: observations may be taken, then `commit_decisions`.
    Deciding,
}

/// Complete record of one finished trial: the per-tick outcomes, the final
/// cumulative rewards in seat order `(A, B)`, and every strategy change
/// that took effect.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "S: Scalar", deserialize = "S: Scalar"))]
pub struct TrialResult<S: Scalar> {
    pub config: TrialConfig<S>,
    pub outcomes: Vec<OutcomeCode>,
    pub final_rewards: (S, S),
    pub change_log: Vec<StateChangeEvent<S>>,
}

impl<S: Scalar> TrialResult<S> {
    /// Re-derives the final rewards from the outcome sequence. Always equals
    /// `final_rewards` for results produced by this crate; exposed so audits
    /// and tests can check the invariant cheaply.
    pub fn rewards_from_outcomes(&self) -> (S, S) {
        let mut a = S::zero();
        let mut b = S::zero();
        for outcome in &self.outcomes {
            let (pa, pb) = self.config.payoffs.payoffs(*outcome);
            a = a + pa;
            b = b + pb;
        }
        (a, b)
    }

    /// Writes the per-tick trace as CSV: one row per tick with both standing
    /// strategies, both tick payoffs, and both cumulative rewards, then a
    /// `# final_rewards,<a>,<b>` footer.
    pub fn write_trace<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "tick,strategy_a,strategy_b,payoff_a,payoff_b,cum_reward_a,cum_reward_b")?;
        let mut cum_a = S::zero();
        let mut cum_b = S::zero();
        for (tick, outcome) in self.outcomes.iter().enumerate() {
            let (sa, sb) = outcome.strategies();
            let (pa, pb) = self.config.payoffs.payoffs(*outcome);
            cum_a = cum_a + pa;
            cum_b = cum_b + pb;
            writeln!(w, "{tick},{sa},{sb},{pa},{pb},{cum_a},{cum_b}")?;
        }
        writeln!(w, "# final_rewards,{},{}", self.final_rewards.0, self.final_rewards.1)
    }

    /// Writes the change log as a JSON array, one trailing newline.
    pub fn write_change_log<W: Write>(&self, mut w: W) -> io::Result<()> {
        serde_json::to_writer(&mut w, &self.change_log)?;
        writeln!(w)
    }
}

/// Step-by-step trial state machine.
///
/// One tick is `begin_tick` → `observe` (any number of times) →
/// `commit_decisions`. Calling out of order is a caller bug and panics.
/// After `begin_tick` returns `None` the trial is finished and
/// [`into_result`](Engine::into_result) may be taken.
#[derive(Clone, Debug)]
pub struct Engine<S: Scalar> {
    config: TrialConfig<S>,
    total_ticks: u64,
    delay_ticks: [u64; 2],
    tick: u64,
    phase: Phase,
    strategies: [Strategy; 2],
    rewards: [S; 2],
    /// Commit tick and strategy, oldest first; commit ticks are strictly
    /// increasing within a queue because each tick books at most one.
    pending: [VecDeque<(u64, Strategy)>; 2],
    events: Vec<StateChangeEvent<S>>,
    /// Index into `events` marking what `take_new_events` has handed out.
    events_taken: usize,
    outcomes: Vec<OutcomeCode>,
}

impl<S: Scalar> Engine<S> {
    /// Validates the configuration and sets up an unstarted trial.
    pub fn new(config: TrialConfig<S>) -> Result<Self, ConfigError> {
        config.validated()?;
        let total_ticks = config.ticks();
        let delay_ticks = [config.delay_ticks(PlayerId::A), config.delay_ticks(PlayerId::B)];
        Ok(Engine {
            config,
            total_ticks,
            delay_ticks,
            tick: 0,
            phase: Phase::Idle,
            strategies: [Strategy::Cooperate, Strategy::Cooperate],
            rewards: [S::zero(), S::zero()],
            pending: [VecDeque::new(), VecDeque::new()],
            events: Vec::new(),
            events_taken: 0,
            outcomes: Vec::with_capacity(total_ticks as usize),
        })
    }

    pub fn config(&self) -> &TrialConfig<S> {
        &self.config
    }

    /// The next tick to run, which is also the number of completed ticks.
    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn total_ticks(&self) -> u64 {
        self.total_ticks
    }

    pub fn is_finished(&self) -> bool {
        self.phase == Phase::Idle && self.tick == self.total_ticks
    }

    fn time_of(&self, tick: u64) -> S {
        from_f64::<S>(tick as f64) * self.config.dt
    }

    /// Current public state. After the final tick this is the end-of-trial
    /// state: final strategies, final rewards, `server_time` equal to the
    /// trial duration.
    pub fn state(&self) -> ServerState<S> {
        ServerState {
            strategy_a: self.strategies[0],
            strategy_b: self.strategies[1],
            cum_reward_a: self.rewards[0],
            cum_reward_b: self.rewards[1],
            server_time: self.time_of(self.tick),
        }
    }

    /// Submissions booked but not yet in effect, seat A's first.
    pub fn pending_commits(&self) -> Vec<PendingCommit<S>> {
        let mut out = Vec::new();
        for player in [PlayerId::A, PlayerId::B] {
            for &(commit_tick, strategy) in &self.pending[player.index()] {
                out.push(PendingCommit { player, strategy, commit_time: self.time_of(commit_tick) });
            }
        }
        out
    }

    /// Strategy changes that took effect since the last call; the network
    /// server drains this after `begin_tick` and after `commit_decisions`
    /// to relay state updates.
    pub fn take_new_events(&mut self) -> Vec<StateChangeEvent<S>> {
        let new = self.events[self.events_taken..].to_vec();
        self.events_taken = self.events.len();
        new
    }

    fn apply_commit(&mut self, player: PlayerId, strategy: Strategy, tick: u64) {
        let seat = player.index();
        if self.strategies[seat] != strategy {
            self.strategies[seat] = strategy;
            self.events.push(StateChangeEvent { player, strategy, server_time: self.time_of(tick) });
        }
    }

    /// Opens the next tick: applies due commits and returns the tick index,
    /// or `None` when the trial is over.
    pub fn begin_tick(&mut self) -> Option<u64> {
        assert!(self.phase == Phase::Idle, "begin_tick called while a tick is open");
        if self.tick == self.total_ticks {
            return None;
        }
        let tick = self.tick;
        for player in [PlayerId::A, PlayerId::B] {
            loop {
                let queue = &mut self.pending[player.index()];
                let due = match queue.front() {
                    Some(&(commit_tick, _)) if commit_tick == tick => queue.pop_front(),
                    _ => None,
                };
                match due {
                    Some((_, strategy)) => self.apply_commit(player, strategy, tick),
                    None => break,
                }
            }
        }
        self.phase = Phase::Deciding;
        Some(tick)
    }

    /// What `player` sees before deciding this tick. Valid only inside an
    /// open tick, before `commit_decisions`.
    pub fn observe(&self, player: PlayerId) -> Observation<S> {
        assert!(self.phase == Phase::Deciding, "observe called outside an open tick");
        let now = self.time_of(self.tick);
        let cutoff = now - self.config.memory_horizon;
        let history: Vec<_> =
            self.events.iter().filter(|e| e.server_time > cutoff).copied().collect();
        Observation {
            self_id: player,
            server_time: now,
            history,
            current: self.state(),
            delay_self: self.config.delay(player),
            delay_opponent: self.config.delay(player.opponent()),
        }
    }

    /// Books both submissions, applies zero-delay commits, classifies the
    /// tick, and accrues payoffs. Closes the tick.
    pub fn commit_decisions(&mut self, decision_a: Strategy, decision_b: Strategy) {
        assert!(self.phase == Phase::Deciding, "commit_decisions called outside an open tick");
        let tick = self.tick;
        for (player, decision) in [(PlayerId::A, decision_a), (PlayerId::B, decision_b)] {
            let delay = self.delay_ticks[player.index()];
            let commit_tick = tick + delay;
            if commit_tick >= self.total_ticks {
                continue; // would land after the end: discarded
            }
            if delay == 0 {
                self.apply_commit(player, decision, tick);
            } else {
                self.pending[player.index()].push_back((commit_tick, decision));
            }
        }
        let outcome = classify(self.strategies[0], self.strategies[1]);
        let (pay_a, pay_b) = self.config.payoffs.payoffs(outcome);
        self.rewards[0] = self.rewards[0] + pay_a;
        self.rewards[1] = self.rewards[1] + pay_b;
        self.outcomes.push(outcome);
        self.tick += 1;
        self.phase = Phase::Idle;
    }

    /// Consumes a finished trial. Panics if ticks remain.
    pub fn into_result(self) -> TrialResult<S> {
        assert!(self.is_finished(), "into_result called before the trial finished");
        TrialResult {
            config: self.config,
            outcomes: self.outcomes,
            final_rewards: (self.rewards[0], self.rewards[1]),
            change_log: self.events,
        }
    }
}

/// Why a trial could not run to completion.
#[derive(Debug, Error)]
pub enum TrialError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("agent {player} failed at tick {tick}: {source}")]
    Agent {
        player: PlayerId,
        tick: u64,
        #[source]
        source: AgentError,
    },
}

/// Runs a full trial with two in-process agents.
///
/// Each agent draws from its own seeded stream (see [`crate::seed`]), so the
/// result is a pure function of the configuration and the agents: re-running
/// with equal inputs yields a bit-identical [`TrialResult`].
pub fn run_trial<S: Scalar>(
    config: &TrialConfig<S>,
    agent_a: &dyn Agent<S>,
    agent_b: &dyn Agent<S>,
) -> Result<TrialResult<S>, TrialError> {
    let mut engine = Engine::new(*config)?;
    let mut rng_a = agent_rng(config.seed, PlayerId::A);
    let mut rng_b = agent_rng(config.seed, PlayerId::B);
    while let Some(tick) = engine.begin_tick() {
        let obs_a = engine.observe(PlayerId::A);
        let obs_b = engine.observe(PlayerId::B);
        let decision_a = agent_a
            .decide(&obs_a, &mut rng_a)
            .map_err(|source| TrialError::Agent { player: PlayerId::A, tick, source })?;
        let decision_b = agent_b
            .decide(&obs_b, &mut rng_b)
            .map_err(|source| TrialError::Agent { player: PlayerId::B, tick, source })?;
        engine.commit_decisions(decision_a, decision_b);
    }
    Ok(engine.into_result())
}

/// Why a replay did not reproduce a recorded result.
#[derive(Debug, Error)]
pub enum ReplayError {
    #[error(transparent)]
    Trial(#[from] TrialError),
    #[error("outcome diverges at tick {tick}: recorded {recorded}, replayed {replayed}")]
    OutcomeDivergence { tick: u64, recorded: OutcomeCode, replayed: OutcomeCode },
    #[error("replayed {replayed} outcomes, recorded {recorded}")]
    LengthMismatch { recorded: usize, replayed: usize },
    #[error("change log diverges at entry {index}")]
    ChangeLogDivergence { index: usize },
    #[error("final rewards diverge: recorded {recorded}, replayed {replayed}")]
    RewardDivergence { recorded: String, replayed: String },
}

/// Re-runs a recorded trial with the given agents and verifies the replay
/// reproduces it exactly, reporting the first divergence otherwise.
pub fn replay<S: Scalar>(
    recorded: &TrialResult<S>,
    agent_a: &dyn Agent<S>,
    agent_b: &dyn Agent<S>,
) -> Result<(), ReplayError> {
    let replayed = run_trial(&recorded.config, agent_a, agent_b)?;
    for (tick, (r, p)) in recorded.outcomes.iter().zip(&replayed.outcomes).enumerate() {
        if r != p {
            return Err(ReplayError::OutcomeDivergence {
                tick: tick as u64,
                recorded: *r,
                replayed: *p,
            });
        }
    }
    if recorded.outcomes.len() != replayed.outcomes.len() {
        return Err(ReplayError::LengthMismatch {
            recorded: recorded.outcomes.len(),
            replayed: replayed.outcomes.len(),
        });
    }
    for (index, (r, p)) in recorded.change_log.iter().zip(&replayed.change_log).enumerate() {
        if r != p {
            return Err(ReplayError::ChangeLogDivergence { index });
        }
    }
    if recorded.change_log.len() != replayed.change_log.len() {
        return Err(ReplayError::ChangeLogDivergence {
            index: recorded.change_log.len().min(replayed.change_log.len()),
        });
    }
    if recorded.final_rewards != replayed.final_rewards {
        return Err(ReplayError::RewardDivergence {
            recorded: format!("{:?}", recorded.final_rewards),
            replayed: format!("{:?}", replayed.final_rewards),
        });
    }
    Ok(())
}
