//! Deterministic engine for a continuous-time prisoner's dilemma in which
//! strategy changes take effect only after a per-player commit delay.
//!
//! Two players each hold a standing strategy, cooperate (`C`) or defect (`D`).
//! Time advances in fixed ticks of `dt` seconds. Every tick each player
//! observes the server state, submits the strategy it wants to hold next, and
//! the submission becomes the player's standing strategy `delay` seconds
//! later. Payoffs accrue every tick from the pair of standing strategies, so
//! a player acts on information that is stale by its opponent's delay and
//! steers a state that lags its own intent by its own delay.
//!
//! The crate is split by concern:
//!
//! * [`model`]: plain data: strategies, payoff matrices, trial
//!   configuration, observations, outcome codes.
//! * [`engine`]: the tick loop. [`engine::run_trial`] drives two agents
//!   through a configured trial and yields a [`engine::TrialResult`] that is
//!   bit-identical for a given `(config, agents)` pair.
//! * [`strategies`]: the [`strategies::Agent`] trait and the built-in
//!   agents (fixed, tit-for-tat, probabilistic, scripted).
//! * [`metrics`]: outcome proportions over the tail window of a trial,
//!   cross-trial aggregation, and raster/CSV export.
//! * [`seed`]: the seeding discipline that keeps trials reproducible and
//!   the two players' random streams independent.
//!
//! All quantities that carry units (seconds, payoffs) are generic over a
//! floating-point scalar via [`Scalar`]; `f64` is the default throughout the
//! companion crates and the aliases below.

// Validation predicates negate float comparisons on purpose: `!(x > 0)`
// rejects NaN along with the out-of-range values, `x <= 0` would not.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod engine;
pub mod metrics;
pub mod model;
pub mod scalar;
pub mod seed;
pub mod strategies;

pub use scalar::Scalar;

/// `f64` trial configuration, the usual instantiation.
pub type TrialConfigF64 = model::TrialConfig<f64>;
/// `f32` trial configuration.
pub type TrialConfigF32 = model::TrialConfig<f32>;
/// `f64` payoff matrix.
pub type PayoffMatrixF64 = model::PayoffMatrix<f64>;
/// `f32` payoff matrix.
pub type PayoffMatrixF32 = model::PayoffMatrix<f32>;
/// `f64` trial result.
pub type TrialResultF64 = engine::TrialResult<f64>;
/// `f32` trial result.
pub type TrialResultF32 = engine::TrialResult<f32>;
/// `f64` observation handed to agents.
pub type ObservationF64 = model::Observation<f64>;
/// `f64` tail-window proportions.
pub type WindowProportionsF64 = metrics::WindowProportions<f64>;
