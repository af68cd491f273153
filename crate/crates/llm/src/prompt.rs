//! The per-tick user prompt.
//!
//! [`render_user_prompt`] lays out, in a fixed order: the rules including
//! both commit delays, the payoff matrix, the current state, the recent
//! change history, the required reply format, and the objective. It states
//! facts only. Strategy advice is out of bounds, and
//! [`default_forbidden_nudges`] enumerates the phrasings that reviews and
//! tests scan for; run [`find_forbidden`] over any template change.

use cpd_core::model::{Observation, PayoffMatrix};
use cpd_core::Scalar;

/// The line announcing an empty change history. Kept as a constant because
/// tests and downstream parsers key on it.
pub const NO_CHANGES_MARKER: &str = "No strategy changes recorded.";

/// Renders the user prompt for one decision.
pub fn render_user_prompt<S: Scalar>(
    observation: &Observation<S>,
    payoffs: &PayoffMatrix<S>,
) -> String {
    let mut out = String::with_capacity(1024);

    out.push_str(
        "You are playing a repeated two-player game against a single opponent.\n\
         Rules:\n\
         - Each second, you and the opponent each hold one standing strategy: \
         C (cooperate) or D (defect).\n\
         - Each second, both of you collect a payoff determined by the pair of \
         standing strategies.\n",
    );
    out.push_str(&format!(
        "- You may submit a new strategy at any step, but your submission takes \
         effect {} seconds later.\n\
         - The opponent's submissions take effect {} seconds after they are made.\n\n",
        observation.delay_self, observation.delay_opponent
    ));

    out.push_str(&format!(
        "Payoff per second, written (you, opponent):\n\
         - you C, opponent C: ({r}, {r})\n\
         - you C, opponent D: ({s}, {t})\n\
         - you D, opponent C: ({t}, {s})\n\
         - you D, opponent D: ({p}, {p})\n\n",
        t = payoffs.t,
        r = payoffs.r,
        p = payoffs.p,
        s = payoffs.s,
    ));

    out.push_str(&format!(
        "Current state at time {}s:\n\
         - Your current strategy: {}\n\
         - Opponent's current strategy: {}\n\
         - Your cumulative reward: {}\n\
         - Opponent's cumulative reward: {}\n\n",
        observation.server_time,
        observation.own_strategy(),
        observation.opponent_strategy(),
        observation.own_reward(),
        observation.opponent_reward(),
    ));

    out.push_str("Recent strategy changes, oldest first:\n");
    if observation.history.is_empty() {
        out.push_str(NO_CHANGES_MARKER);
        out.push('\n');
    } else {
        for event in &observation.history {
            let who = if event.player == observation.self_id { "you" } else { "the opponent" };
            out.push_str(&format!(
                "- at {}s, {} switched to {}\n",
                event.server_time, who, event.strategy
            ));
        }
    }
    out.push('\n');

    out.push_str(
        "Reply with a single JSON object and nothing else:\n\
         {\"opponent_inference\": \"...\", \"predictions\": \"...\", \"next_strategy\": \"C\" or \"D\"}\n\
         - opponent_inference: what you believe the opponent is doing and why.\n\
         - predictions: what you expect to happen over the next few seconds.\n\
         - next_strategy: the strategy you will hold next.\n\n",
    );

    out.push_str(
        "Your sole objective is to maximize your own cumulative reward by the end \
         of the game.\n",
    );

    out
}

/// Phrasings that would tell the model what to play. None of them may
/// appear in any prompt this crate renders; the scan is case-insensitive.
pub fn default_forbidden_nudges() -> &'static [&'static str] {
    &[
        "you should cooperate",
        "you should defect",
        "always cooperate",
        "always defect",
        "never cooperate",
        "never defect",
        "cooperation is the best",
        "defection is the best",
        "cooperation is optimal",
        "defection is optimal",
        "choose cooperation",
        "choose defection",
        "we recommend",
        "the correct strategy",
        "the right strategy",
        "tit for tat",
        "tit-for-tat",
    ]
}

/// Returns the first listed phrase found in `text`, case-insensitively.
pub fn find_forbidden<'a>(text: &str, phrases: &'a [&'a str]) -> Option<&'a str> {
    let lowered = text.to_lowercase();
    phrases.iter().copied().find(|phrase| lowered.contains(&phrase.to_lowercase()))
}
