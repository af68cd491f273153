//! The playing side: connect, take a seat, answer every tick.
//!
//! A client is deliberately thin. It learns its seat and the full trial
//! configuration from `assign`, seeds its decision stream from the
//! configured seed and seat exactly as the in-process runner does, and then
//! answers each `tick` with a `submit`. There is no reconnect logic: if the
//! connection or the protocol breaks, the trial is unsalvageable anyway,
//! so the error is returned to the caller.

use std::io;
use std::net::TcpStream;
use std::time::Duration;

use thiserror::Error;

use cpd_core::model::{ConfigError, PlayerId, ServerState, TrialConfig};
use cpd_core::seed::agent_rng;
use cpd_core::strategies::{Agent, AgentError};
use cpd_core::Scalar;

use crate::wire::{read_frame, write_frame, Envelope, Message, WireError, PROTOCOL_VERSION};

/// Knobs for one client run.
#[derive(Clone, Debug, Default)]
pub struct ClientOptions {
    /// Give up if the server stays silent this long; `None` waits forever.
    pub read_timeout: Option<Duration>,
}

/// What the client knows once the trial is over.
#[derive(Clone, Debug, PartialEq)]
pub struct ClientOutcome<S: Scalar> {
    /// The seat this client played.
    pub player: PlayerId,
    /// The configuration the server assigned.
    pub config: TrialConfig<S>,
    /// Final strategies, rewards, and server time.
    pub final_state: ServerState<S>,
    /// Number of ticks this client answered.
    pub ticks_submitted: u64,
}

/// Why a client run failed.
#[derive(Debug, Error)]
pub enum ClientError {
    #[error("connecting to {addr}: {source}")]
    Connect {
        addr: String,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error("server speaks protocol version {got}, this client speaks {PROTOCOL_VERSION}")]
    Version { got: u32 },
    #[error("server broke protocol: {0}")]
    Protocol(String),
    #[error("assigned configuration is invalid: {0}")]
    Config(#[from] ConfigError),
    #[error("agent failed at tick {tick}: {source}")]
    Agent {
        tick: u64,
        #[source]
        source: AgentError,
    },
}

/// Connects to a server, plays the assigned seat with `agent`, and returns
/// once the server declares the trial over.
pub fn run_client<S: Scalar>(
    addr: &str,
    agent: &dyn Agent<S>,
    options: &ClientOptions,
) -> Result<ClientOutcome<S>, ClientError> {
    let mut stream = TcpStream::connect(addr)
        .map_err(|source| ClientError::Connect { addr: addr.to_owned(), source })?;
    stream.set_read_timeout(options.read_timeout).map_err(WireError::Io)?;
    stream.set_nodelay(true).map_err(WireError::Io)?;

    write_frame(
        &mut stream,
        &Envelope::<S> { version: PROTOCOL_VERSION, session: String::new(), message: Message::Hello },
    )?;

    let assign: Envelope<S> = read_frame(&mut stream)?;
    if assign.version != PROTOCOL_VERSION {
        return Err(ClientError::Version { got: assign.version });
    }
    let session = assign.session;
    let (player, config) = match assign.message {
        Message::Assign { player, config } => (player, config),
        other => return Err(ClientError::Protocol(format!("expected assign, got {}", other.kind()))),
    };
    config.validated()?;

    let mut rng = agent_rng(config.seed, player);
    let mut ticks_submitted = 0u64;

    loop {
        let envelope: Envelope<S> = read_frame(&mut stream)?;
        if envelope.version != PROTOCOL_VERSION {
            return Err(ClientError::Version { got: envelope.version });
        }
        match envelope.message {
            Message::Tick { tick, observation } => {
                if observation.self_id != player {
                    return Err(ClientError::Protocol(format!(
                        "tick {tick} observation is for {}, this client plays {player}",
                        observation.self_id
                    )));
                }
                let strategy = agent
                    .decide(&observation, &mut rng)
                    .map_err(|source| ClientError::Agent { tick, source })?;
                write_frame(
                    &mut stream,
                    &Envelope::<S> {
                        version: PROTOCOL_VERSION,
                        session: session.clone(),
                        message: Message::Submit { tick, strategy },
                    },
                )?;
                ticks_submitted += 1;
            }
            // Opponent strategy changes are already reflected in the next
            // observation; nothing to do for a scripted client.
            Message::StateUpdate { .. } => {}
            Message::TrialEnd { final_state } => {
                return Ok(ClientOutcome { player, config, final_state, ticks_submitted });
            }
            other => {
                return Err(ClientError::Protocol(format!("unexpected {}", other.kind())));
            }
        }
    }
}
