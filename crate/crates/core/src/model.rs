//! Domain types: strategies, players, payoffs, trial configuration, and the
//! state snapshots agents observe.
//!
//! Everything here is plain data with stable serde names; the tick loop that
//! animates these types lives in [`crate::engine`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{from_f64, Scalar};

/// A standing strategy: cooperate or defect.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "C")]
    Cooperate,
    #[serde(rename = "D")]
    Defect,
}

impl Strategy {
    /// One-letter code used in traces and wire messages.
    pub fn code(self) -> char {
        match self {
            Strategy::Cooperate => 'C',
            Strategy::Defect => 'D',
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code())
    }
}

/// Error for strings that name no strategy.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("unknown strategy {0:?}, expected C, D, cooperate, or defect")]
pub struct ParseStrategyError(pub String);

impl FromStr for Strategy {
    type Err = ParseStrategyError;

    /// Accepts the single-letter codes and the spelled-out words, in any
    /// case: `C`, `D`, `cooperate`, `defect`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "c" | "cooperate" => Ok(Strategy::Cooperate),
            "d" | "defect" => Ok(Strategy::Defect),
            _ => Err(ParseStrategyError(s.to_owned())),
        }
    }
}

/// The two seats in a trial. `A` is always the first player in pairs and
/// tuples; payoff and outcome orderings follow seat order, not merit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PlayerId {
    A,
    B,
}

impl PlayerId {
    /// The other seat.
    pub fn opponent(self) -> PlayerId {
        match self {
            PlayerId::A => PlayerId::B,
            PlayerId::B => PlayerId::A,
        }
    }

    /// Index into `[A, B]`-ordered arrays.
    pub fn index(self) -> usize {
        match self {
            PlayerId::A => 0,
            PlayerId::B => 1,
        }
    }
}

impl fmt::Display for PlayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlayerId::A => write!(f, "A"),
            PlayerId::B => write!(f, "B"),
        }
    }
}

/// Joint outcome of one tick, written `<A's strategy><B's strategy>`.
///
/// `Dc` means A defected while B cooperated, so A collected the temptation
/// payoff and B the sucker payoff.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OutcomeCode {
    #[serde(rename = "CC")]
    Cc,
    #[serde(rename = "DD")]
    Dd,
    #[serde(rename = "DC")]
    Dc,
    #[serde(rename = "CD")]
    Cd,
}

impl OutcomeCode {
    /// Classifies a pair of standing strategies, seat order `(A, B)`.
    pub fn from_pair(a: Strategy, b: Strategy) -> OutcomeCode {
        use Strategy::*;
        match (a, b) {
            (Cooperate, Cooperate) => OutcomeCode::Cc,
            (Defect, Defect) => OutcomeCode::Dd,
            (Defect, Cooperate) => OutcomeCode::Dc,
            (Cooperate, Defect) => OutcomeCode::Cd,
        }
    }

    /// The strategy pair back, seat order `(A, B)`.
    pub fn strategies(self) -> (Strategy, Strategy) {
        use Strategy::*;
        match self {
            OutcomeCode::Cc => (Cooperate, Cooperate),
            OutcomeCode::Dd => (Defect, Defect),
            OutcomeCode::Dc => (Defect, Cooperate),
            OutcomeCode::Cd => (Cooperate, Defect),
        }
    }

    /// The same outcome seen from the other seat: `DC` and `CD` swap, the
    /// symmetric outcomes stay.
    pub fn swap_players(self) -> OutcomeCode {
        match self {
            OutcomeCode::Dc => OutcomeCode::Cd,
            OutcomeCode::Cd => OutcomeCode::Dc,
            sym => sym,
        }
    }

    /// Two-letter code used in raster CSVs.
    pub fn code(self) -> &'static str {
        match self {
            OutcomeCode::Cc => "CC",
            OutcomeCode::Dd => "DD",
            OutcomeCode::Dc => "DC",
            OutcomeCode::Cd => "CD",
        }
    }
}

impl fmt::Display for OutcomeCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Classifies the standing strategies of one tick, seat order `(A, B)`.
pub fn classify(a: Strategy, b: Strategy) -> OutcomeCode {
    OutcomeCode::from_pair(a, b)
}

/// Per-tick payoff matrix. Field names follow the conventional
/// temptation/reward/punishment/sucker labels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PayoffMatrix<S> {
    /// Temptation: defect against a cooperator.
    #[serde(rename = "T")]
    pub t: S,
    /// Reward: mutual cooperation.
    #[serde(rename = "R")]
    pub r: S,
    /// Punishment: mutual defection.
    #[serde(rename = "P")]
    pub p: S,
    /// Sucker: cooperate against a defector.
    #[serde(rename = "S")]
    pub s: S,
}

impl<S: Scalar> Default for PayoffMatrix<S> {
    /// The classic `(T, R, P, S) = (5, 3, 1, 0)` matrix.
    fn default() -> Self {
        PayoffMatrix {
            t: from_f64(5.0),
            r: from_f64(3.0),
            p: from_f64(1.0),
            s: from_f64(0.0),
        }
    }
}

impl<S: Scalar> PayoffMatrix<S> {
    /// Payoff to a player holding `own` while the opponent holds `opponent`.
    pub fn payoff(&self, own: Strategy, opponent: Strategy) -> S {
        use Strategy::*;
        match (own, opponent) {
            (Cooperate, Cooperate) => self.r,
            (Cooperate, Defect) => self.s,
            (Defect, Cooperate) => self.t,
            (Defect, Defect) => self.p,
        }
    }

    /// Payoffs to both seats for a joint outcome, seat order `(A, B)`.
    pub fn payoffs(&self, outcome: OutcomeCode) -> (S, S) {
        let (a, b) = outcome.strategies();
        (self.payoff(a, b), self.payoff(b, a))
    }
}

/// Full description of one trial. All durations are in seconds and must be
/// compatible with the tick length `dt`; see [`TrialConfig::validate`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "S: Scalar", deserialize = "S: Scalar"))]
pub struct TrialConfig<S: Scalar> {
    /// Tick length in seconds.
    #[serde(default = "default_dt")]
    pub dt: S,
    /// Total trial length in seconds; must be a positive multiple of `dt`.
    #[serde(default = "default_trial_duration")]
    pub trial_duration: S,
    /// How far back the observation history reaches, in seconds.
    #[serde(default = "default_memory_horizon")]
    pub memory_horizon: S,
    /// Commit delay for player A in seconds; a submission at time `t` takes
    /// effect at `t + delay_a`.
    #[serde(default = "default_delay")]
    pub delay_a: S,
    /// Commit delay for player B in seconds.
    #[serde(default = "default_delay")]
    pub delay_b: S,
    /// Per-tick payoff matrix.
    #[serde(default)]
    pub payoffs: PayoffMatrix<S>,
    /// Length of the tail window used by outcome-proportion metrics.
    #[serde(default = "default_analysis_window")]
    pub analysis_window: S,
    /// Seed for the trial's random streams.
    #[serde(default)]
    pub seed: u64,
}

fn default_dt<S: Scalar>() -> S {
    from_f64(1.0)
}

fn default_trial_duration<S: Scalar>() -> S {
    from_f64(60.0)
}

fn default_memory_horizon<S: Scalar>() -> S {
    from_f64(15.0)
}

fn default_delay<S: Scalar>() -> S {
    from_f64(0.0)
}

fn default_analysis_window<S: Scalar>() -> S {
    from_f64(20.0)
}

impl<S: Scalar> Default for TrialConfig<S> {
    /// One-second ticks, a sixty-second trial, a fifteen-second memory
    /// horizon, zero delays, the classic payoff matrix, a twenty-second
    /// analysis window, and seed 0.
    fn default() -> Self {
        TrialConfig {
            dt: default_dt(),
            trial_duration: default_trial_duration(),
            memory_horizon: default_memory_horizon(),
            delay_a: default_delay(),
            delay_b: default_delay(),
            payoffs: PayoffMatrix::default(),
            analysis_window: default_analysis_window(),
            seed: 0,
        }
    }
}

/// Interprets `value` as a whole number of ticks of length `dt`.
///
/// Returns `None` when the ratio is negative, non-finite, or further from an
/// integer than a small relative tolerance (32 ulps of the working scalar,
/// so `f32` configs with inexact decimals still validate).
pub(crate) fn tick_multiple<S: Scalar>(value: S, dt: S) -> Option<u64> {
    if !(dt > S::zero()) || !dt.is_finite() || !value.is_finite() {
        return None;
    }
    let ratio = (value / dt).as_f64();
    if !ratio.is_finite() || ratio < -0.5 {
        return None;
    }
    let rounded = ratio.round();
    let tolerance = S::epsilon().as_f64() * 32.0 * ratio.abs().max(1.0);
    if (ratio - rounded).abs() > tolerance || rounded < 0.0 {
        return None;
    }
    Some(rounded as u64)
}

impl<S: Scalar> TrialConfig<S> {
    /// All the ways this configuration is malformed; empty means valid.
    pub fn validate(&self) -> Vec<ConfigViolation> {
        let mut violations = Vec::new();
        let dt_ok = self.dt > S::zero() && self.dt.is_finite();
        if !dt_ok {
            violations.push(ConfigViolation::NonPositiveDt);
        }
        if dt_ok {
            match tick_multiple(self.trial_duration, self.dt) {
                Some(k) if k >= 1 => {}
                _ => violations.push(ConfigViolation::DurationNotMultiple),
            }
            for player in [PlayerId::A, PlayerId::B] {
                if tick_multiple(self.delay(player), self.dt).is_none() {
                    violations.push(ConfigViolation::DelayNotMultiple(player));
                }
            }
        }
        if !(self.memory_horizon >= S::zero()) || !self.memory_horizon.is_finite() {
            violations.push(ConfigViolation::NegativeMemoryHorizon);
        }
        if !(self.analysis_window > S::zero() && self.analysis_window <= self.trial_duration) {
            violations.push(ConfigViolation::AnalysisWindowOutOfRange);
        }
        let PayoffMatrix { t, r, p, s } = self.payoffs;
        for (ok, relation) in [(t > r, "T > R"), (r > p, "R > P"), (p > s, "P > S")] {
            if !ok {
                violations.push(ConfigViolation::PayoffOrder(relation));
            }
        }
        if !(r + r > t + s) {
            violations.push(ConfigViolation::PayoffPremium);
        }
        violations
    }

    /// Like [`validate`](Self::validate), packaged as a `Result`.
    pub fn validated(&self) -> Result<(), ConfigError> {
        let violations = self.validate();
        if violations.is_empty() {
            Ok(())
        } else {
            Err(ConfigError { violations })
        }
    }

    /// Commit delay of one seat.
    pub fn delay(&self, player: PlayerId) -> S {
        match player {
            PlayerId::A => self.delay_a,
            PlayerId::B => self.delay_b,
        }
    }

    /// Number of ticks in the trial. Meaningful only for a valid config.
    pub fn ticks(&self) -> u64 {
        tick_multiple(self.trial_duration, self.dt).unwrap_or(0)
    }

    /// Commit delay of one seat in whole ticks. Meaningful only for a valid
    /// config.
    pub fn delay_ticks(&self, player: PlayerId) -> u64 {
        tick_multiple(self.delay(player), self.dt).unwrap_or(0)
    }
}

/// One way a [`TrialConfig`] can be malformed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConfigViolation {
    /// `dt` is zero, negative, or not finite.
    NonPositiveDt,
    /// `trial_duration` is not a positive whole number of ticks.
    DurationNotMultiple,
    /// `memory_horizon` is negative or not finite.
    NegativeMemoryHorizon,
    /// A commit delay is not a non-negative whole number of ticks.
    DelayNotMultiple(PlayerId),
    /// `analysis_window` is outside `(0, trial_duration]`.
    AnalysisWindowOutOfRange,
    /// One of the strict orderings `T > R > P > S` fails; the payload names
    /// the violated relation.
    PayoffOrder(&'static str),
    /// `2R > T + S` fails, so alternating exploitation would pay at least as
    /// much as mutual cooperation.
    PayoffPremium,
}

impl fmt::Display for ConfigViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigViolation::NonPositiveDt => write!(f, "dt must be positive and finite"),
            ConfigViolation::DurationNotMultiple => {
                write!(f, "trial_duration must be a positive multiple of dt")
            }
            ConfigViolation::NegativeMemoryHorizon => {
                write!(f, "memory_horizon must be non-negative and finite")
            }
            ConfigViolation::DelayNotMultiple(player) => {
                let field = match player {
                    PlayerId::A => "delay_a",
                    PlayerId::B => "delay_b",
                };
                write!(f, "{field} must be a non-negative multiple of dt")
            }
            ConfigViolation::AnalysisWindowOutOfRange => {
                write!(f, "analysis_window must satisfy 0 < analysis_window <= trial_duration")
            }
            ConfigViolation::PayoffOrder(relation) => {
                write!(f, "payoffs must satisfy T > R > P > S (violated: {relation})")
            }
            ConfigViolation::PayoffPremium => write!(f, "payoffs must satisfy 2R > T + S"),
        }
    }
}

/// A configuration rejected by validation, with every violation listed.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub struct ConfigError {
    pub violations: Vec<ConfigViolation>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid trial config: ")?;
        for (i, violation) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{violation}")?;
        }
        Ok(())
    }
}

/// A strategy change that took effect, stamped with the server time at which
/// it became the player's standing strategy (not the time it was submitted).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateChangeEvent<S> {
    pub player: PlayerId,
    pub strategy: Strategy,
    pub server_time: S,
}

/// Snapshot of the public game state at the top of a tick, before that
/// tick's payoffs accrue: `cum_reward_*` cover completed ticks only.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ServerState<S> {
    pub strategy_a: Strategy,
    pub strategy_b: Strategy,
    pub cum_reward_a: S,
    pub cum_reward_b: S,
    pub server_time: S,
}

impl<S> ServerState<S> {
    /// Standing strategy of one seat.
    pub fn strategy(&self, player: PlayerId) -> Strategy {
        match player {
            PlayerId::A => self.strategy_a,
            PlayerId::B => self.strategy_b,
        }
    }

    /// Cumulative reward of one seat.
    pub fn cum_reward(&self, player: PlayerId) -> S
    where
        S: Copy,
    {
        match player {
            PlayerId::A => self.cum_reward_a,
            PlayerId::B => self.cum_reward_b,
        }
    }

    /// Outcome code of the standing strategy pair.
    pub fn classify(&self) -> OutcomeCode {
        OutcomeCode::from_pair(self.strategy_a, self.strategy_b)
    }
}

/// Everything one player is shown before deciding: the current state, the
/// recent change history, and both commit delays (the delays are public).
///
/// `history` holds the changes whose effect time lies in the half-open
/// window `(server_time - memory_horizon, server_time]`, oldest first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation<S> {
    pub self_id: PlayerId,
    pub server_time: S,
    pub history: Vec<StateChangeEvent<S>>,
    pub current: ServerState<S>,
    pub delay_self: S,
    pub delay_opponent: S,
}

impl<S: Copy> Observation<S> {
    /// The observing player's own standing strategy.
    pub fn own_strategy(&self) -> Strategy {
        self.current.strategy(self.self_id)
    }

    /// The opponent's standing strategy as currently visible.
    pub fn opponent_strategy(&self) -> Strategy {
        self.current.strategy(self.self_id.opponent())
    }

    /// The observing player's cumulative reward so far.
    pub fn own_reward(&self) -> S {
        self.current.cum_reward(self.self_id)
    }

    /// The opponent's cumulative reward so far.
    pub fn opponent_reward(&self) -> S {
        self.current.cum_reward(self.self_id.opponent())
    }
}

/// Big Five-style trait levels for persona-driven agents, each in `[-1, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PersonaTraits<S> {
    pub agreeableness: S,
    pub conscientiousness: S,
    pub neuroticism: S,
}

/// One or more persona traits outside `[-1, 1]`.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("persona traits out of range: {}", fields.join(", "))]
pub struct TraitRangeError {
    pub fields: Vec<String>,
}

impl<S: Scalar> PersonaTraits<S> {
    /// Checks every trait lies in `[-1, 1]`.
    pub fn validate(&self) -> Result<(), TraitRangeError> {
        let one = S::one();
        let mut fields = Vec::new();
        for (name, value) in [
            ("agreeableness", self.agreeableness),
            ("conscientiousness", self.conscientiousness),
            ("neuroticism", self.neuroticism),
        ] {
            if !(value >= -one && value <= one) {
                fields.push(format!("{name}={value}"));
            }
        }
        if fields.is_empty() {
            Ok(())
        } else {
            Err(TraitRangeError { fields })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn violation_text(config: &TrialConfig<f64>) -> String {
        config
            .validate()
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join("; ")
    }

    #[test]
    fn default_config_matches_reference_setup() {
        let config = TrialConfig::<f64>::default();
        assert_eq!(config.dt, 1.0);
        assert_eq!(config.trial_duration, 60.0);
        assert_eq!(config.memory_horizon, 15.0);
        assert_eq!(config.delay_a, 0.0);
        assert_eq!(config.delay_b, 0.0);
        assert_eq!(config.payoffs, PayoffMatrix { t: 5.0, r: 3.0, p: 1.0, s: 0.0 });
        assert_eq!(config.analysis_window, 20.0);
        assert_eq!(config.seed, 0);
        assert!(config.validate().is_empty());
        assert_eq!(config.ticks(), 60);
    }

    #[test]
    fn payoff_covers_all_pairs() {
        let m = PayoffMatrix::<f64>::default();
        use Strategy::*;
        assert_eq!(m.payoff(Cooperate, Cooperate), 3.0);
        assert_eq!(m.payoff(Defect, Cooperate), 5.0);
        assert_eq!(m.payoff(Cooperate, Defect), 0.0);
        assert_eq!(m.payoff(Defect, Defect), 1.0);
        assert_eq!(m.payoffs(OutcomeCode::Dc), (5.0, 0.0));
        assert_eq!(m.payoffs(OutcomeCode::Cd), (0.0, 5.0));
    }

    #[test]
    fn classify_and_swap() {
        use Strategy::*;
        assert_eq!(classify(Cooperate, Cooperate), OutcomeCode::Cc);
        assert_eq!(classify(Defect, Defect), OutcomeCode::Dd);
        assert_eq!(classify(Defect, Cooperate), OutcomeCode::Dc);
        assert_eq!(classify(Cooperate, Defect), OutcomeCode::Cd);
        assert_eq!(OutcomeCode::Dc.swap_players(), OutcomeCode::Cd);
        assert_eq!(OutcomeCode::Cd.swap_players(), OutcomeCode::Dc);
        assert_eq!(OutcomeCode::Cc.swap_players(), OutcomeCode::Cc);
        assert_eq!(OutcomeCode::Dd.swap_players(), OutcomeCode::Dd);
        assert_eq!(OutcomeCode::Dc.strategies(), (Defect, Cooperate));
    }

    #[test]
    fn strategy_parses_letters_and_words() {
        assert_eq!("C".parse::<Strategy>().unwrap(), Strategy::Cooperate);
        assert_eq!("d".parse::<Strategy>().unwrap(), Strategy::Defect);
        assert_eq!("Cooperate".parse::<Strategy>().unwrap(), Strategy::Cooperate);
        assert_eq!(" DEFECT ".parse::<Strategy>().unwrap(), Strategy::Defect);
        assert!("x".parse::<Strategy>().is_err());
    }

    #[test]
    fn serde_names_are_stable() {
        assert_eq!(serde_json::to_string(&Strategy::Cooperate).unwrap(), "\"C\"");
        assert_eq!(serde_json::to_string(&Strategy::Defect).unwrap(), "\"D\"");
        assert_eq!(serde_json::to_string(&PlayerId::A).unwrap(), "\"A\"");
        assert_eq!(serde_json::to_string(&OutcomeCode::Dc).unwrap(), "\"DC\"");

        let matrix = serde_json::to_value(PayoffMatrix::<f64>::default()).unwrap();
        assert_eq!(matrix["T"], 5.0);
        assert_eq!(matrix["R"], 3.0);
        assert_eq!(matrix["P"], 1.0);
        assert_eq!(matrix["S"], 0.0);

        let config = serde_json::to_value(TrialConfig::<f64>::default()).unwrap();
        for key in [
            "dt",
            "trial_duration",
            "memory_horizon",
            "delay_a",
            "delay_b",
            "payoffs",
            "analysis_window",
            "seed",
        ] {
            assert!(config.get(key).is_some(), "missing key {key}");
        }
    }

    #[test]
    fn config_deserializes_with_defaults_filled_in() {
        let config: TrialConfig<f64> = serde_json::from_str("{}").unwrap();
        assert_eq!(config, TrialConfig::default());

        let config: TrialConfig<f64> =
            serde_json::from_str(r#"{"delay_a": 5.0, "seed": 7}"#).unwrap();
        assert_eq!(config.delay_a, 5.0);
        assert_eq!(config.seed, 7);
        assert_eq!(config.trial_duration, 60.0);
    }

    #[test]
    fn validate_accepts_fractional_ticks_that_divide_evenly() {
        let config = TrialConfig::<f64> {
            dt: 0.5,
            trial_duration: 45.0,
            delay_a: 2.5,
            analysis_window: 10.0,
            ..TrialConfig::default()
        };
        assert!(config.validate().is_empty(), "{}", violation_text(&config));
        assert_eq!(config.ticks(), 90);
        assert_eq!(config.delay_ticks(PlayerId::A), 5);

        let config32 = TrialConfig::<f32> { dt: 0.1, trial_duration: 6.0, ..TrialConfig::default() };
        assert!(
            config32.validate().iter().all(|v| *v != ConfigViolation::DurationNotMultiple),
            "f32 rounding must not fail the multiple check"
        );
        assert_eq!(config32.ticks(), 60);
    }

    #[test]
    fn validate_flags_bad_tick_grid() {
        let config = TrialConfig::<f64> { dt: 0.0, ..TrialConfig::default() };
        assert!(config.validate().contains(&ConfigViolation::NonPositiveDt));

        let config = TrialConfig::<f64> { trial_duration: 60.5, ..TrialConfig::default() };
        assert!(config.validate().contains(&ConfigViolation::DurationNotMultiple));

        let config = TrialConfig::<f64> { trial_duration: 0.0, ..TrialConfig::default() };
        assert!(config.validate().contains(&ConfigViolation::DurationNotMultiple));

        let config = TrialConfig::<f64> { delay_b: 2.5, ..TrialConfig::default() };
        let text = violation_text(&config);
        assert!(text.contains("delay_b"), "{text}");

        let config = TrialConfig::<f64> { delay_a: -1.0, ..TrialConfig::default() };
        assert!(config.validate().contains(&ConfigViolation::DelayNotMultiple(PlayerId::A)));

        let config = TrialConfig::<f64> { delay_a: f64::NAN, ..TrialConfig::default() };
        assert!(config.validate().contains(&ConfigViolation::DelayNotMultiple(PlayerId::A)));
    }

    #[test]
    fn validate_flags_window_and_memory() {
        let config = TrialConfig::<f64> { analysis_window: 0.0, ..TrialConfig::default() };
        assert!(config.validate().contains(&ConfigViolation::AnalysisWindowOutOfRange));

        let config = TrialConfig::<f64> { analysis_window: 61.0, ..TrialConfig::default() };
        assert!(config.validate().contains(&ConfigViolation::AnalysisWindowOutOfRange));

        let config = TrialConfig::<f64> { memory_horizon: -1.0, ..TrialConfig::default() };
        assert!(config.validate().contains(&ConfigViolation::NegativeMemoryHorizon));
    }

    #[test]
    fn validate_flags_payoff_orderings() {
        let config = TrialConfig::<f64> {
            payoffs: PayoffMatrix { t: 3.0, r: 3.0, p: 1.0, s: 0.0 },
            ..TrialConfig::default()
        };
        let text = violation_text(&config);
        assert!(text.contains("T > R"), "{text}");

        let config = TrialConfig::<f64> {
            payoffs: PayoffMatrix { t: 5.0, r: 2.4, p: 1.0, s: 0.0 },
            ..TrialConfig::default()
        };
        assert!(config.validate().contains(&ConfigViolation::PayoffPremium));
        assert!(violation_text(&config).contains("2R > T + S"));

        let err = config.validated().unwrap_err();
        assert!(err.to_string().starts_with("invalid trial config:"));
    }

    #[test]
    fn observation_helpers_pick_the_right_seat() {
        let obs = Observation {
            self_id: PlayerId::B,
            server_time: 4.0,
            history: vec![],
            current: ServerState {
                strategy_a: Strategy::Defect,
                strategy_b: Strategy::Cooperate,
                cum_reward_a: 9.0,
                cum_reward_b: 2.0,
                server_time: 4.0,
            },
            delay_self: 5.0,
            delay_opponent: 0.0,
        };
        assert_eq!(obs.own_strategy(), Strategy::Cooperate);
        assert_eq!(obs.opponent_strategy(), Strategy::Defect);
        assert_eq!(obs.own_reward(), 2.0);
        assert_eq!(obs.opponent_reward(), 9.0);
        assert_eq!(obs.current.classify(), OutcomeCode::Dc);
    }

    #[test]
    fn persona_traits_validate_range() {
        let ok = PersonaTraits { agreeableness: 0.8, conscientiousness: -1.0, neuroticism: 1.0 };
        assert!(ok.validate().is_ok());

        let bad =
            PersonaTraits { agreeableness: 1.5, conscientiousness: 0.0, neuroticism: f64::NAN };
        let err = bad.validate().unwrap_err();
        assert_eq!(err.fields.len(), 2);
        assert!(err.to_string().contains("agreeableness=1.5"));
    }
}
