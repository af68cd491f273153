//! Networked trials: hosting the server side and joining as a client.

use std::io::{self, Write};
use std::net::TcpListener;
use std::path::Path;

use thiserror::Error;

use cpd_core::engine::TrialResult;
use cpd_core::metrics::{analysis_proportions, MetricsError, WindowProportions};
use cpd_core::model::PlayerId;
use cpd_core::Scalar;
use cpd_net::{run_client, ClientError, ClientOptions, ClientOutcome, serve, ServeError, ServeOptions};

use crate::config::{AnyAgentSpec, BuildAgentError, ExperimentSpec, SpecError};
use crate::single::{write_artifacts, SingleError};

/// What a hosted trial hands back for display.
pub struct HostOutcome<S: Scalar> {
    pub result: TrialResult<S>,
    pub proportions: WindowProportions<S>,
}

/// A hosted trial that could not start or finish.
#[derive(Debug, Error)]
pub enum HostError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("delay index {index} out of range, experiment has {len} conditions")]
    DelayIndex { index: usize, len: usize },
    #[error("binding {addr}: {source}")]
    Bind { addr: String, source: io::Error },
    #[error(transparent)]
    Serve(#[from] ServeError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Artifacts(#[from] SingleError),
}

/// Binds `listen`, announces the bound address on stdout, and hosts the
/// trial at `(delay_index, trial_index)` of the experiment for two
/// clients. Artifacts go to `out_dir` when given.
pub fn host_trial<S: Scalar>(
    spec: &ExperimentSpec<S>,
    listen: &str,
    delay_index: usize,
    trial_index: u64,
    options: &ServeOptions,
    out_dir: Option<&Path>,
) -> Result<HostOutcome<S>, HostError> {
    spec.validate()?;
    if delay_index >= spec.delays.len() {
        return Err(HostError::DelayIndex { index: delay_index, len: spec.delays.len() });
    }
    let config = spec.trial_config(delay_index, trial_index);
    let bind_at = |source| HostError::Bind { addr: listen.to_owned(), source };
    let listener = TcpListener::bind(listen).map_err(bind_at)?;
    let local = listener.local_addr().map_err(bind_at)?;
    // Announced before blocking on accept so callers can read the port
    // when listening on port 0.
    println!("listening on {local}");
    io::stdout().flush().ok();

    let result = serve(&config, listener, options)?;
    let proportions = analysis_proportions(&result)?;
    if let Some(dir) = out_dir {
        write_artifacts(&result, &proportions, dir)?;
    }
    Ok(HostOutcome { result, proportions })
}

/// A joined trial that could not start or finish.
#[derive(Debug, Error)]
pub enum JoinError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("delay index {index} out of range, experiment has {len} conditions")]
    DelayIndex { index: usize, len: usize },
    #[error("building the agent: {0}")]
    Seat(#[from] BuildAgentError),
    #[error(transparent)]
    Client(#[from] ClientError),
}

/// Connects to a server and plays the experiment's `which` agent spec.
///
/// The actual seat is assigned by the server in connection order; `which`
/// only selects the local agent. The agent is built from the local
/// experiment file's trial configuration, which must describe the same
/// trial the server is hosting.
pub fn join_trial<S: Scalar>(
    spec: &ExperimentSpec<S>,
    addr: &str,
    which: PlayerId,
    delay_index: usize,
    trial_index: u64,
    options: &ClientOptions,
) -> Result<ClientOutcome<S>, JoinError> {
    spec.validate()?;
    if delay_index >= spec.delays.len() {
        return Err(JoinError::DelayIndex { index: delay_index, len: spec.delays.len() });
    }
    let config = spec.trial_config(delay_index, trial_index);
    let agent_spec: &AnyAgentSpec<S> = match which {
        PlayerId::A => &spec.agent_a,
        PlayerId::B => &spec.agent_b,
    };
    let agent = agent_spec.build(&config)?;
    Ok(run_client(addr, agent.as_ref(), options)?)
}
