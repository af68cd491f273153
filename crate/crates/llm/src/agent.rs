//! The endpoint-backed agent.
//!
//! [`LlmAgent`] implements [`Agent`] by asking an OpenAI-style
//! chat-completions endpoint for every decision: the persona is the system
//! prompt, the rendered observation is the user prompt, and the reply must
//! contain the next strategy (see [`crate::parse`]). Transport failures,
//! bad statuses, and unreadable replies are retried up to
//! [`EndpointConfig::max_retries`] times; after that the agent reports
//! failure and the engine aborts the trial, naming the seat and tick.
//!
//! The agent never draws from the trial's random stream; whatever
//! randomness the decisions have lives in the endpoint's sampling
//! temperature. Trials against a language model are therefore exactly as
//! reproducible as the endpoint itself, no more.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::Duration;

use rand::RngCore;
use reqwest::blocking::Client;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use cpd_core::model::{Observation, PayoffMatrix, PersonaTraits, Strategy, TrialConfig};
use cpd_core::strategies::{Agent, AgentError};
use cpd_core::Scalar;

use crate::parse::{parse_decision, LlmDecision, ParseError};
use crate::persona::{render_persona, render_persona_via_endpoint, PersonaPrompt};
use crate::prompt::render_user_prompt;

/// Where and how to reach the chat-completions endpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    /// Base URL up to but not including `/chat/completions`, for example
    /// `https://api.openai.com/v1` or a local proxy.
    pub base_url: String,
    /// Model name passed through verbatim.
    pub model: String,
    /// Sampling temperature; 1.0 unless an experiment says otherwise.
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    /// Per-request timeout.
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: f64,
    /// How many times to retry a failed exchange before giving up.
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    /// Environment variable holding the bearer token. Unset or empty means
    /// the endpoint is called without authentication.
    #[serde(default = "default_api_key_env")]
    pub api_key_env: String,
}

fn default_temperature() -> f64 {
    1.0
}

fn default_timeout_secs() -> f64 {
    30.0
}

fn default_max_retries() -> u32 {
    2
}

fn default_api_key_env() -> String {
    "OPENAI_API_KEY".to_owned()
}

/// Anything that can go wrong talking to the endpoint.
#[derive(Debug, Error)]
pub enum LlmError {
    #[error("building http client: {0}")]
    Client(#[source] reqwest::Error),
    #[error("request to {url} failed: {source}")]
    Transport {
        url: String,
        #[source]
        source: reqwest::Error,
    },
    #[error("endpoint returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("endpoint reply carried no message content")]
    NoContent,
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("invalid persona traits: {0}")]
    BadTraits(String),
    #[error("audit log: {0}")]
    Audit(#[source] io::Error),
}

/// One seat played by a language model.
pub struct LlmAgent<S: Scalar> {
    endpoint: EndpointConfig,
    persona: PersonaPrompt<S>,
    payoffs: PayoffMatrix<S>,
    client: Client,
    url: String,
    api_key: Option<String>,
    audit: Option<Mutex<BufWriter<File>>>,
}

impl<S: Scalar> LlmAgent<S> {
    /// Builds the agent. The payoff matrix is disclosed in every prompt, so
    /// it must be the one the trial actually uses; [`LlmAgentSpec::build`]
    /// wires that up from the trial configuration.
    pub fn new(
        endpoint: EndpointConfig,
        persona: PersonaPrompt<S>,
        payoffs: PayoffMatrix<S>,
    ) -> Result<Self, LlmError> {
        let client = Client::builder()
            .timeout(Duration::from_secs_f64(endpoint.timeout_secs))
            .build()
            .map_err(LlmError::Client)?;
        let url = chat_url(&endpoint.base_url);
        let api_key = std::env::var(&endpoint.api_key_env).ok().filter(|k| !k.is_empty());
        Ok(LlmAgent { endpoint, persona, payoffs, client, url, api_key, audit: None })
    }

    /// Captures every exchange (including failed attempts) to `path` as
    /// JSON lines. A write failure aborts the trial: an experiment that
    /// silently lost its audit trail is worse than one that stopped.
    pub fn with_audit_log(mut self, path: &PathBuf) -> Result<Self, LlmError> {
        let file = File::create(path).map_err(LlmError::Audit)?;
        self.audit = Some(Mutex::new(BufWriter::new(file)));
        Ok(self)
    }

    /// The persona this agent plays.
    pub fn persona(&self) -> &PersonaPrompt<S> {
        &self.persona
    }

    fn exchange(&self, user_prompt: &str) -> Result<(String, LlmDecision), LlmError> {
        let raw = complete(
            &self.client,
            &self.url,
            self.api_key.as_deref(),
            &self.endpoint,
            &self.persona.rendered_text,
            user_prompt,
        )?;
        let decision = parse_decision(&raw)?;
        Ok((raw, decision))
    }

    fn audit_line(
        &self,
        observation: &Observation<S>,
        attempt: u32,
        user_prompt: &str,
        response: Option<&str>,
        decision: Option<Strategy>,
        error: Option<&str>,
    ) -> Result<(), LlmError> {
        let Some(audit) = &self.audit else { return Ok(()) };
        let line = serde_json::json!({
            "server_time": observation.server_time.as_f64(),
            "player": observation.self_id,
            "attempt": attempt,
            "system_prompt": self.persona.rendered_text,
            "user_prompt": user_prompt,
            "response": response,
            "decision": decision,
            "error": error,
        });
        let mut out = audit.lock().expect("audit log poisoned");
        writeln!(out, "{line}").and_then(|()| out.flush()).map_err(LlmError::Audit)
    }
}

impl<S: Scalar> Agent<S> for LlmAgent<S> {
    fn kind(&self) -> &'static str {
        "llm"
    }

    fn decide(
        &self,
        observation: &Observation<S>,
        _rng: &mut dyn RngCore,
    ) -> Result<Strategy, AgentError> {
        let user_prompt = render_user_prompt(observation, &self.payoffs);
        let attempts = self.endpoint.max_retries + 1;
        let mut last_error = String::new();
        for attempt in 1..=attempts {
            match self.exchange(&user_prompt) {
                Ok((raw, decision)) => {
                    self.audit_line(
                        observation,
                        attempt,
                        &user_prompt,
                        Some(&raw),
                        Some(decision.next_strategy),
                        None,
                    )
                    .map_err(|e| AgentError(e.to_string()))?;
                    return Ok(decision.next_strategy);
                }
                Err(error) => {
                    let raw = match &error {
                        LlmError::Parse(parse) => Some(parse.raw.as_str()),
                        _ => None,
                    };
                    last_error = error.to_string();
                    self.audit_line(
                        observation,
                        attempt,
                        &user_prompt,
                        raw,
                        None,
                        Some(&last_error),
                    )
                    .map_err(|e| AgentError(e.to_string()))?;
                    if attempt < attempts {
                        std::thread::sleep(Duration::from_millis(50 * attempt as u64));
                    }
                }
            }
        }
        Err(AgentError(format!("endpoint failed after {attempts} attempts: {last_error}")))
    }
}

fn chat_url(base_url: &str) -> String {
    format!("{}/chat/completions", base_url.trim_end_matches('/'))
}

fn complete(
    client: &Client,
    url: &str,
    api_key: Option<&str>,
    endpoint: &EndpointConfig,
    system: &str,
    user: &str,
) -> Result<String, LlmError> {
    let body = serde_json::json!({
        "model": endpoint.model,
        "temperature": endpoint.temperature,
        "messages": [
            {"role": "system", "content": system},
            {"role": "user", "content": user},
        ],
    });
    let mut request = client.post(url).json(&body);
    if let Some(key) = api_key {
        request = request.bearer_auth(key);
    }
    let response = request
        .send()
        .map_err(|source| LlmError::Transport { url: url.to_owned(), source })?;
    let status = response.status();
    let text = response
        .text()
        .map_err(|source| LlmError::Transport { url: url.to_owned(), source })?;
    if !status.is_success() {
        return Err(LlmError::Status { status: status.as_u16(), body: text });
    }
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|_| LlmError::NoContent)?;
    value["choices"][0]["message"]["content"]
        .as_str()
        .map(str::to_owned)
        .ok_or(LlmError::NoContent)
}

/// One non-retried completion with a throwaway client; used for persona
/// generation, where a failure is fine to surface immediately.
pub(crate) fn complete_once(
    endpoint: &EndpointConfig,
    system: &str,
    user: &str,
) -> Result<String, LlmError> {
    let client = Client::builder()
        .timeout(Duration::from_secs_f64(endpoint.timeout_secs))
        .build()
        .map_err(LlmError::Client)?;
    let api_key = std::env::var(&endpoint.api_key_env).ok().filter(|k| !k.is_empty());
    complete(&client, &chat_url(&endpoint.base_url), api_key.as_deref(), endpoint, system, user)
}

/// Declarative form of an endpoint-backed seat, the `llm` counterpart of
/// the built-in agent specs:
///
/// ```json
/// {"kind": "llm",
///  "endpoint": {"base_url": "http://127.0.0.1:8080/v1", "model": "test"},
///  "traits": {"agreeableness": 0.8, "conscientiousness": 0.0, "neuroticism": -0.4}}
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[serde(bound(serialize = "S: Scalar", deserialize = "S: Scalar"))]
pub enum LlmAgentSpec<S: Scalar> {
    Llm {
        endpoint: EndpointConfig,
        traits: PersonaTraits<S>,
        /// Render the persona through the endpoint instead of the fixed
        /// template.
        #[serde(default)]
        persona_via_endpoint: bool,
        /// Capture every exchange to this JSON-lines file.
        #[serde(default)]
        audit_log: Option<PathBuf>,
    },
}

impl<S: Scalar> LlmAgentSpec<S> {
    /// Instantiates the agent for a trial, disclosing the trial's payoff
    /// matrix in its prompts.
    pub fn build(&self, config: &TrialConfig<S>) -> Result<LlmAgent<S>, LlmError> {
        let LlmAgentSpec::Llm { endpoint, traits, persona_via_endpoint, audit_log } = self;
        let persona = if *persona_via_endpoint {
            render_persona_via_endpoint(endpoint, traits)?
        } else {
            render_persona(traits).map_err(|e| LlmError::BadTraits(e.to_string()))?
        };
        let agent = LlmAgent::new(endpoint.clone(), persona, config.payoffs)?;
        match audit_log {
            Some(path) => agent.with_audit_log(path),
            None => Ok(agent),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chat_url_joins_cleanly() {
        assert_eq!(chat_url("http://h:1/v1"), "http://h:1/v1/chat/completions");
        assert_eq!(chat_url("http://h:1/v1/"), "http://h:1/v1/chat/completions");
    }

    #[test]
    fn endpoint_config_fills_defaults() {
        let config: EndpointConfig =
            serde_json::from_str(r#"{"base_url": "http://h", "model": "m"}"#).unwrap();
        assert_eq!(config.temperature, 1.0);
        assert_eq!(config.timeout_secs, 30.0);
        assert_eq!(config.max_retries, 2);
        assert_eq!(config.api_key_env, "OPENAI_API_KEY");
    }

    #[test]
    fn spec_round_trips() {
        let json = r#"{
            "kind": "llm",
            "endpoint": {"base_url": "http://127.0.0.1:9/v1", "model": "test"},
            "traits": {"agreeableness": 0.8, "conscientiousness": 0.0, "neuroticism": -0.4}
        }"#;
        let spec: LlmAgentSpec<f64> = serde_json::from_str(json).unwrap();
        let LlmAgentSpec::Llm { endpoint, traits, persona_via_endpoint, audit_log } = &spec;
        assert_eq!(endpoint.model, "test");
        assert_eq!(traits.agreeableness, 0.8);
        assert!(!persona_via_endpoint);
        assert!(audit_log.is_none());
        let text = serde_json::to_string(&spec).unwrap();
        let back: LlmAgentSpec<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
    }
}
