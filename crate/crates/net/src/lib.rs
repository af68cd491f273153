//! TCP harness for running trials against out-of-process agents.
//!
//! The server owns the engine and is the single source of truth; clients
//! are thin: they observe, decide, and submit. One tick is one
//! request/response round per player, and the server does not advance until
//! both submissions arrive, so a slow client stalls the clock instead of
//! missing turns. Commit delays are game semantics applied inside the
//! engine; they are never emulated by delaying packets.
//!
//! Because the server drives the same [`cpd_core::engine::Engine`] stepping
//! sequence as [`cpd_core::engine::run_trial`], and clients draw from the
//! same per-player streams, a networked trial reproduces the in-process
//! result bit for bit.
//!
//! The framing is deliberately boring: a 4-byte big-endian length followed
//! by one JSON envelope (see [`wire`]).

pub mod client;
pub mod server;
pub mod wire;

pub use client::{run_client, ClientError, ClientOptions, ClientOutcome};
pub use server::{serve, ServeError, ServeOptions};
