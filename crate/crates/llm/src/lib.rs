//! Language-model agents for delayed-commit trials.
//!
//! An [`agent::LlmAgent`] plays a seat by sending two messages to an
//! OpenAI-style chat-completions endpoint every tick: a fixed persona as
//! the system prompt ([`persona`]) and a rendering of the current
//! observation as the user prompt ([`prompt`]). The reply is expected to
//! contain one JSON object with the next strategy ([`parse`]).
//!
//! Two properties are load-bearing for experiments:
//!
//! * Prompts are pure functions of the persona and the observation. The
//!   trial protocol, payoffs, both commit delays, and the recent change
//!   history are all disclosed; nothing about the "right" strategy is.
//!   [`prompt::default_forbidden_nudges`] lists the phrasings the templates
//!   must never contain, and tests scan for them.
//! * Every exchange can be captured to a JSON-lines audit log, so a trial
//!   can be audited or reconstructed after the fact.
//!
//! [`mock`] hosts a tiny in-process endpoint used by the tests and handy
//! for dry-running a setup without an API key.

pub mod agent;
pub mod mock;
pub mod parse;
pub mod persona;
pub mod prompt;

pub use agent::{EndpointConfig, LlmAgent, LlmAgentSpec, LlmError};
pub use parse::{parse_decision, LlmDecision, ParseError};
pub use persona::{render_persona, PersonaPrompt, TraitBand};
