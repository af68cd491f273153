//! End-to-end tests of the endpoint agent against the in-process mock:
//! full trials, retry behavior, failure reporting, and the audit log.

use std::sync::{Arc, Mutex};

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use cpd_core::engine::{run_trial, TrialError};
use cpd_core::model::{Observation, PersonaTraits, PlayerId, ServerState, Strategy, TrialConfig};
use cpd_core::strategies::{always, tit_for_tat, Agent};
use cpd_llm::mock::{scripted_policy, tit_for_tat_policy, MockEndpoint, MockReply};
use cpd_llm::{EndpointConfig, LlmAgent, LlmAgentSpec};

fn endpoint_config(base_url: String) -> EndpointConfig {
    EndpointConfig {
        base_url,
        model: "mock".to_owned(),
        temperature: 0.0,
        timeout_secs: 10.0,
        max_retries: 2,
        api_key_env: "CPD_TEST_NO_SUCH_KEY".to_owned(),
    }
}

fn neutral_traits() -> PersonaTraits<f64> {
    PersonaTraits { agreeableness: 0.0, conscientiousness: 0.0, neuroticism: 0.0 }
}

fn agent_on(mock: &MockEndpoint) -> LlmAgent<f64> {
    let spec = LlmAgentSpec::Llm {
        endpoint: endpoint_config(mock.base_url()),
        traits: neutral_traits(),
        persona_via_endpoint: false,
        audit_log: None,
    };
    spec.build(&TrialConfig::<f64>::default()).expect("build agent")
}

/// A one-tick observation to exercise `decide` directly.
fn observation_at_start() -> Observation<f64> {
    Observation {
        self_id: PlayerId::A,
        server_time: 0.0,
        history: Vec::new(),
        current: ServerState {
            strategy_a: Strategy::Cooperate,
            strategy_b: Strategy::Cooperate,
            cum_reward_a: 0.0,
            cum_reward_b: 0.0,
            server_time: 0.0,
        },
        delay_self: 5.0,
        delay_opponent: 5.0,
    }
}

#[test]
fn a_mirroring_endpoint_reproduces_the_tit_for_tat_trial() {
    let mock = MockEndpoint::spawn(tit_for_tat_policy());
    let config = TrialConfig::<f64> {
        trial_duration: 20.0,
        delay_a: 0.0,
        delay_b: 3.0,
        analysis_window: 10.0,
        seed: 7,
        ..TrialConfig::default()
    };
    let llm_seat = agent_on(&mock);
    let lone_defector = always(Strategy::Defect);

    let played = run_trial(&config, &llm_seat, &lone_defector).expect("llm trial");
    let expected = run_trial(&config, &tit_for_tat(), &lone_defector).expect("reference trial");

    assert_eq!(played.outcomes, expected.outcomes);
    assert_eq!(played.final_rewards, expected.final_rewards);
    assert_eq!(played.change_log, expected.change_log);
    assert_eq!(mock.hits(), 20, "one completion per tick");
}

#[test]
fn a_transient_failure_is_retried() {
    let mock = MockEndpoint::spawn(scripted_policy(vec![
        MockReply::Raw { status: 500, body: "flake".to_owned() },
        MockReply::Content(r#"{"next_strategy": "D"}"#.to_owned()),
    ]));
    let agent = agent_on(&mock);
    let mut rng = ChaCha12Rng::seed_from_u64(0);

    let strategy = agent.decide(&observation_at_start(), &mut rng).expect("retried decision");

    assert_eq!(strategy, Strategy::Defect);
    assert_eq!(mock.hits(), 2, "first attempt failed, second answered");
}

#[test]
fn an_unreadable_reply_is_retried_like_a_transport_failure() {
    let mock = MockEndpoint::spawn(scripted_policy(vec![
        MockReply::Content("going with my gut here".to_owned()),
        MockReply::Content(r#"{"next_strategy": "C"}"#.to_owned()),
    ]));
    let agent = agent_on(&mock);
    let mut rng = ChaCha12Rng::seed_from_u64(0);

    let strategy = agent.decide(&observation_at_start(), &mut rng).expect("retried decision");

    assert_eq!(strategy, Strategy::Cooperate);
    assert_eq!(mock.hits(), 2);
}

#[test]
fn exhausted_retries_abort_the_trial_naming_seat_and_tick() {
    let mock = MockEndpoint::spawn(scripted_policy(vec![MockReply::Raw {
        status: 503,
        body: "down".to_owned(),
    }]));
    let config =
        TrialConfig::<f64> { trial_duration: 3.0, analysis_window: 3.0, ..TrialConfig::default() };
    let llm_seat = agent_on(&mock);
    let cooperator = always(Strategy::Cooperate);

    let error = run_trial(&config, &llm_seat, &cooperator).expect_err("trial must abort");

    let TrialError::Agent { player, tick, source } = &error else {
        panic!("expected an agent failure, got {error}");
    };
    assert_eq!(*player, PlayerId::A);
    assert_eq!(*tick, 0);
    assert!(source.0.contains("after 3 attempts"), "unexpected message: {}", source.0);
    assert!(source.0.contains("status 503"), "unexpected message: {}", source.0);
    assert_eq!(mock.hits(), 3, "initial attempt plus two retries");
}

#[test]
fn the_audit_log_records_every_attempt() {
    let dir = tempfile::tempdir().expect("tempdir");
    let path = dir.path().join("audit.jsonl");
    let mock = MockEndpoint::spawn(scripted_policy(vec![
        MockReply::Raw { status: 500, body: "flake".to_owned() },
        MockReply::Content(r#"{"next_strategy": "D"}"#.to_owned()),
    ]));
    let spec = LlmAgentSpec::Llm {
        endpoint: endpoint_config(mock.base_url()),
        traits: neutral_traits(),
        persona_via_endpoint: false,
        audit_log: Some(path.clone()),
    };
    let agent = spec.build(&TrialConfig::<f64>::default()).expect("build agent");
    let mut rng = ChaCha12Rng::seed_from_u64(0);

    agent.decide(&observation_at_start(), &mut rng).expect("decision");

    let log = std::fs::read_to_string(&path).expect("audit file");
    let lines: Vec<serde_json::Value> =
        log.lines().map(|l| serde_json::from_str(l).expect("audit line is json")).collect();
    assert_eq!(lines.len(), 2, "one line per attempt");

    let failed = &lines[0];
    assert_eq!(failed["attempt"], 1);
    assert_eq!(failed["player"], "A");
    assert_eq!(failed["decision"], serde_json::Value::Null);
    assert!(failed["error"].as_str().unwrap().contains("status 500"));

    let succeeded = &lines[1];
    assert_eq!(succeeded["attempt"], 2);
    assert_eq!(succeeded["decision"], "D");
    assert_eq!(succeeded["error"], serde_json::Value::Null);
    assert!(succeeded["user_prompt"].as_str().unwrap().contains("Opponent's current strategy"));
    assert!(!succeeded["system_prompt"].as_str().unwrap().is_empty());
}

#[test]
fn the_persona_can_be_written_by_the_endpoint_itself() {
    let seen_prompts = Arc::new(Mutex::new(Vec::<String>::new()));
    let recorder = Arc::clone(&seen_prompts);
    let mock = MockEndpoint::spawn(move |request| {
        recorder.lock().unwrap().push(request.user.clone());
        MockReply::Content("You are a cheerful participant who trusts easily.".to_owned())
    });
    let spec = LlmAgentSpec::Llm {
        endpoint: endpoint_config(mock.base_url()),
        traits: PersonaTraits { agreeableness: 0.8, conscientiousness: 0.0, neuroticism: -0.4 },
        persona_via_endpoint: true,
        audit_log: None,
    };

    let agent = spec.build(&TrialConfig::<f64>::default()).expect("build agent");

    assert_eq!(agent.persona().rendered_text, "You are a cheerful participant who trusts easily.");
    assert_eq!(mock.hits(), 1, "persona generation is a single completion");
    let prompts = seen_prompts.lock().unwrap();
    assert!(prompts[0].contains("agreeableness"), "persona request names the traits");
}
