//! Seeding discipline.
//!
//! Reproducibility rests on two rules:
//!
//! 1. Each trial owns a single `u64` seed. The two players draw from
//!    independent ChaCha12 streams derived from that seed (stream 0 for A,
//!    stream 1 for B), so one player's draw count never perturbs the other's
//!    sequence.
//! 2. In a sweep, each trial's seed is mixed from the experiment base seed,
//!    a key identifying its delay condition, and its trial index with
//!    SplitMix64, so adding or reordering delay conditions never reshuffles
//!    existing seeds, and the same trial can be re-run in isolation.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::model::PlayerId;

/// Random stream for one player within one trial.
pub type AgentRng = ChaCha12Rng;

/// SplitMix64 mixing step. Fast, well-distributed, and stable across
/// platforms; used only for deriving seeds, never for gameplay draws.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for the trial at `(delay_key, trial_index)` of a sweep, where
/// `delay_key` identifies the delay condition.
///
/// Chained SplitMix64 over the three coordinates; injective enough that
/// distinct positions collide with probability ~2^-64.
pub fn trial_seed(base_seed: u64, delay_key: u64, trial_index: u64) -> u64 {
    let mut state = splitmix64(base_seed);
    state = splitmix64(state ^ delay_key);
    splitmix64(state ^ trial_index)
}

/// The random stream one player draws from during a trial.
///
/// Both players share the trial seed but sit on different ChaCha12 streams,
/// so their draw sequences are independent and individually reproducible.
pub fn agent_rng(trial_seed: u64, player: PlayerId) -> AgentRng {
    let mut rng = ChaCha12Rng::seed_from_u64(trial_seed);
    rng.set_stream(player.index() as u64);
    rng
}
