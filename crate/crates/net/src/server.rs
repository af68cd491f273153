//! The serving side: owns the engine, assigns seats, enforces the barrier.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use thiserror::Error;

use cpd_core::engine::{Engine, TrialResult};
use cpd_core::model::{ConfigError, PlayerId, StateChangeEvent, Strategy, TrialConfig};
use cpd_core::seed::splitmix64;
use cpd_core::Scalar;

use crate::wire::{read_frame, write_frame, Envelope, Message, WireError, PROTOCOL_VERSION};

/// Knobs for one served trial.
#[derive(Clone, Debug)]
pub struct ServeOptions {
    /// How long each client gets to open with `hello`.
    pub handshake_timeout: Duration,
    /// How long each client gets to answer a `tick` with `submit`.
    pub submit_timeout: Duration,
    /// Pace ticks to real time: tick `t` opens no earlier than `t * dt`
    /// seconds after the first. Off by default; the barrier alone keeps
    /// trials correct, pacing only makes them watchable.
    pub wall_clock: bool,
    /// If set, every frame sent or received is appended to this file as
    /// JSON lines for debugging.
    pub transcript: Option<PathBuf>,
}

impl Default for ServeOptions {
    fn default() -> Self {
        ServeOptions {
            handshake_timeout: Duration::from_secs(10),
            submit_timeout: Duration::from_secs(60),
            wall_clock: false,
            transcript: None,
        }
    }
}

/// Why a served trial aborted. Mid-trial variants name the offending seat
/// and the tick, since that is what post-mortems need first.
#[derive(Debug, Error)]
pub enum ServeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("accepting connection: {0}")]
    Accept(#[source] io::Error),
    #[error("handshake with {peer} failed: {reason}")]
    Handshake { peer: String, reason: String },
    #[error("player {player} at tick {tick}: {source}")]
    Wire {
        player: PlayerId,
        tick: u64,
        #[source]
        source: WireError,
    },
    #[error("player {player} did not submit for tick {tick} within {timeout:?}")]
    SubmitTimeout { player: PlayerId, tick: u64, timeout: Duration },
    #[error("player {player} broke protocol at tick {tick}: {reason}")]
    Violation { player: PlayerId, tick: u64, reason: String },
    #[error("writing transcript: {0}")]
    Transcript(#[source] io::Error),
}

struct Link {
    stream: TcpStream,
    peer: SocketAddr,
}

struct Harness {
    session: String,
    links: [Link; 2],
    transcript: Option<BufWriter<File>>,
}

impl Harness {
    fn log<S: Scalar>(
        &mut self,
        direction: &str,
        seat: PlayerId,
        envelope: &Envelope<S>,
    ) -> io::Result<()> {
        if let Some(out) = self.transcript.as_mut() {
            let line = serde_json::json!({
                "dir": direction,
                "seat": seat.to_string(),
                "envelope": envelope,
            });
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    fn send<S: Scalar>(&mut self, seat: PlayerId, message: Message<S>) -> Result<(), WireError> {
        let envelope =
            Envelope { version: PROTOCOL_VERSION, session: self.session.clone(), message };
        write_frame(&mut self.links[seat.index()].stream, &envelope)?;
        self.log("send", seat, &envelope).map_err(WireError::Io)?;
        Ok(())
    }

    fn recv<S: Scalar>(&mut self, seat: PlayerId) -> Result<Envelope<S>, WireError> {
        let envelope = read_frame(&mut self.links[seat.index()].stream)?;
        self.log("recv", seat, &envelope).map_err(WireError::Io)?;
        Ok(envelope)
    }

    fn flush_transcript(&mut self) -> Result<(), ServeError> {
        if let Some(out) = self.transcript.as_mut() {
            out.flush().map_err(ServeError::Transcript)?;
        }
        Ok(())
    }
}

fn is_timeout(error: &WireError) -> bool {
    matches!(
        error,
        WireError::Io(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut)
    )
}

fn accept_seat<S: Scalar>(
    listener: &TcpListener,
    timeout: Duration,
) -> Result<Link, ServeError> {
    let (stream, peer) = listener.accept().map_err(ServeError::Accept)?;
    stream.set_read_timeout(Some(timeout)).map_err(ServeError::Accept)?;
    stream.set_nodelay(true).map_err(ServeError::Accept)?;
    let mut link = Link { stream, peer };
    let hello: Envelope<S> = read_frame(&mut link.stream).map_err(|e| ServeError::Handshake {
        peer: peer.to_string(),
        reason: e.to_string(),
    })?;
    if hello.version != PROTOCOL_VERSION {
        return Err(ServeError::Handshake {
            peer: peer.to_string(),
            reason: format!(
                "protocol version {} not supported, this server speaks {PROTOCOL_VERSION}",
                hello.version
            ),
        });
    }
    if !matches!(hello.message, Message::Hello) {
        return Err(ServeError::Handshake {
            peer: peer.to_string(),
            reason: format!("expected hello, got {}", hello.message.kind()),
        });
    }
    Ok(link)
}

/// Serves one trial: accepts two clients (first `hello` plays A, second
/// plays B), runs the barrier-synchronized tick loop, and returns the same
/// [`TrialResult`] an in-process run of the configuration would produce.
pub fn serve<S: Scalar>(
    config: &TrialConfig<S>,
    listener: TcpListener,
    options: &ServeOptions,
) -> Result<TrialResult<S>, ServeError> {
    let mut engine = Engine::new(*config)?;
    let session = format!("{:016x}", splitmix64(config.seed));

    let link_a = accept_seat::<S>(&listener, options.handshake_timeout)?;
    let link_b = accept_seat::<S>(&listener, options.handshake_timeout)?;

    let transcript = match &options.transcript {
        Some(path) => {
            Some(BufWriter::new(File::create(path).map_err(ServeError::Transcript)?))
        }
        None => None,
    };
    let mut harness = Harness { session, links: [link_a, link_b], transcript };

    for player in [PlayerId::A, PlayerId::B] {
        harness
            .send(player, Message::Assign { player, config: *config })
            .map_err(|e| ServeError::Handshake {
                peer: harness.links[player.index()].peer.to_string(),
                reason: e.to_string(),
            })?;
        harness.links[player.index()]
            .stream
            .set_read_timeout(Some(options.submit_timeout))
            .map_err(|e| ServeError::Wire { player, tick: 0, source: WireError::Io(e) })?;
    }

    let start = Instant::now();
    let dt_wall = Duration::from_secs_f64(config.dt.as_f64());

    while let Some(tick) = engine.begin_tick() {
        relay_changes(&mut harness, &mut engine, tick)?;

        if options.wall_clock {
            let target = dt_wall.checked_mul(tick as u32).unwrap_or_default();
            if let Some(wait) = target.checked_sub(start.elapsed()) {
                std::thread::sleep(wait);
            }
        }

        for player in [PlayerId::A, PlayerId::B] {
            let observation = engine.observe(player);
            harness
                .send(player, Message::Tick { tick, observation })
                .map_err(|source| ServeError::Wire { player, tick, source })?;
        }

        let mut decisions = [Strategy::Cooperate; 2];
        for player in [PlayerId::A, PlayerId::B] {
            decisions[player.index()] =
                await_submission::<S>(&mut harness, player, tick, options.submit_timeout)?;
        }
        engine.commit_decisions(decisions[0], decisions[1]);

        relay_changes(&mut harness, &mut engine, tick)?;
    }

    let final_state = engine.state();
    for player in [PlayerId::A, PlayerId::B] {
        harness
            .send(player, Message::TrialEnd { final_state })
            .map_err(|source| ServeError::Wire { player, tick: engine.tick(), source })?;
    }
    harness.flush_transcript()?;
    Ok(engine.into_result())
}

/// Pushes every strategy change that just took effect to the seat that did
/// not make it.
fn relay_changes<S: Scalar>(
    harness: &mut Harness,
    engine: &mut Engine<S>,
    tick: u64,
) -> Result<(), ServeError> {
    let events: Vec<StateChangeEvent<S>> = engine.take_new_events();
    for event in events {
        let target = event.player.opponent();
        let state = engine.state();
        harness
            .send(target, Message::StateUpdate { tick, event, state })
            .map_err(|source| ServeError::Wire { player: target, tick, source })?;
    }
    Ok(())
}

fn await_submission<S: Scalar>(
    harness: &mut Harness,
    player: PlayerId,
    tick: u64,
    timeout: Duration,
) -> Result<Strategy, ServeError> {
    let envelope: Envelope<S> = harness.recv(player).map_err(|source| {
        if is_timeout(&source) {
            ServeError::SubmitTimeout { player, tick, timeout }
        } else {
            ServeError::Wire { player, tick, source }
        }
    })?;
    if envelope.version != PROTOCOL_VERSION {
        return Err(ServeError::Violation {
            player,
            tick,
            reason: format!("protocol version {}", envelope.version),
        });
    }
    if envelope.session != harness.session {
        return Err(ServeError::Violation {
            player,
            tick,
            reason: format!("session {:?} does not match {:?}", envelope.session, harness.session),
        });
    }
    match envelope.message {
        Message::Submit { tick: submitted, strategy } if submitted == tick => Ok(strategy),
        Message::Submit { tick: submitted, .. } => Err(ServeError::Violation {
            player,
            tick,
            reason: format!("submit for tick {submitted} while tick {tick} is open"),
        }),
        other => Err(ServeError::Violation {
            player,
            tick,
            reason: format!("expected submit, got {}", other.kind()),
        }),
    }
}
