//! Message framing and the envelope schema.
//!
//! Every frame is a 4-byte big-endian payload length followed by exactly
//! that many bytes of JSON, one [`Envelope`] per frame. The envelope pins
//! the protocol version, carries the server-issued session id, and tags the
//! payload with a `kind` field:
//!
//! ```json
//! {"version":1,"session":"01c3…","kind":"submit","tick":4,"strategy":"D"}
//! ```
//!
//! A conversation is `hello` → `assign`, then per tick `tick` → `submit`
//! (with `state_update` pushed whenever the opponent's standing strategy
//! changes), and finally `trial_end`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use cpd_core::model::{Observation, PlayerId, ServerState, StateChangeEvent, Strategy, TrialConfig};
use cpd_core::Scalar;

/// Version spoken by this crate. Mismatches are rejected at the handshake.
pub const PROTOCOL_VERSION: u32 = 1;

/// Upper bound on a frame's JSON payload. Well above any message this
/// protocol produces; a larger length prefix means a corrupt or hostile
/// peer and is rejected before allocation.
pub const MAX_FRAME: usize = 1 << 20;

/// One frame on the wire.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "S: Scalar", deserialize = "S: Scalar"))]
pub struct Envelope<S: Scalar> {
    pub version: u32,
    /// Server-issued session id; empty in the client's `hello`, echoed by
    /// the client everywhere after `assign`.
    pub session: String,
    #[serde(flatten)]
    pub message: Message<S>,
}

/// The payload of a frame, tagged by `kind`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[serde(bound(serialize = "S: Scalar", deserialize = "S: Scalar"))]
pub enum Message<S: Scalar> {
    /// Client's opening message.
    Hello,
    /// Server's reply: the seat this client plays and the full trial
    /// configuration (including the seed its decision stream derives from).
    Assign { player: PlayerId, config: TrialConfig<S> },
    /// A tick is open; here is what your seat observes.
    Tick { tick: u64, observation: Observation<S> },
    /// The client's decision for an open tick.
    Submit { tick: u64, strategy: Strategy },
    /// The opponent's standing strategy changed when `event` took effect;
    /// `state` is the snapshot after the change.
    StateUpdate { tick: u64, event: StateChangeEvent<S>, state: ServerState<S> },
    /// The trial is over; the final strategies and rewards.
    TrialEnd { final_state: ServerState<S> },
}

impl<S: Scalar> Message<S> {
    /// The `kind` tag, for diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Message::Hello => "hello",
            Message::Assign { .. } => "assign",
            Message::Tick { .. } => "tick",
            Message::Submit { .. } => "submit",
            Message::StateUpdate { .. } => "state_update",
            Message::TrialEnd { .. } => "trial_end",
        }
    }
}

/// Framing or encoding failure.
#[derive(Debug, Error)]
pub enum WireError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("frame of {len} bytes exceeds the {MAX_FRAME}-byte limit")]
    TooLarge { len: usize },
    #[error("malformed frame: {0}")]
    Json(#[from] serde_json::Error),
}

/// Writes one frame and flushes it.
pub fn write_frame<S: Scalar, W: Write>(w: &mut W, envelope: &Envelope<S>) -> Result<(), WireError> {
    let payload = serde_json::to_vec(envelope)?;
    if payload.len() > MAX_FRAME {
        return Err(WireError::TooLarge { len: payload.len() });
    }
    w.write_all(&(payload.len() as u32).to_be_bytes())?;
    w.write_all(&payload)?;
    w.flush()?;
    Ok(())
}

/// Reads one frame. Blocks per the reader's timeout configuration.
pub fn read_frame<S: Scalar, R: Read>(r: &mut R) -> Result<Envelope<S>, WireError> {
    let mut len_bytes = [0u8; 4];
    r.read_exact(&mut len_bytes)?;
    let len = u32::from_be_bytes(len_bytes) as usize;
    if len > MAX_FRAME {
        return Err(WireError::TooLarge { len });
    }
    let mut payload = vec![0u8; len];
    r.read_exact(&mut payload)?;
    Ok(serde_json::from_slice(&payload)?)
}
