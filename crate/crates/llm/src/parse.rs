//! Decision extraction from model replies.
//!
//! Models are asked for a bare JSON object but routinely wrap it in code
//! fences or prose. The parser therefore tries, in order: each fenced code
//! block, the whole reply, and finally every balanced `{...}` region. The
//! first candidate containing a readable `next_strategy` wins. Anything
//! short of that is a [`ParseError`] that keeps the raw reply for the audit
//! trail.

use cpd_core::model::Strategy;
use serde_json::Value;
use thiserror::Error;

/// A parsed reply: the free-text fields are kept for audit logs, the
/// strategy drives the game.
#[derive(Clone, Debug, PartialEq)]
pub struct LlmDecision {
    pub opponent_inference: String,
    pub predictions: String,
    pub next_strategy: Strategy,
}

/// A reply no candidate extraction could read.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("no usable decision in reply: {reason}")]
pub struct ParseError {
    pub reason: String,
    /// The reply exactly as received.
    pub raw: String,
}

/// Extracts the decision from a raw model reply.
pub fn parse_decision(raw: &str) -> Result<LlmDecision, ParseError> {
    let mut reason = String::from("no JSON object found");
    for candidate in candidates(raw) {
        match try_candidate(&candidate) {
            Ok(decision) => return Ok(decision),
            Err(r) => reason = r,
        }
    }
    Err(ParseError { reason, raw: raw.to_owned() })
}

/// Candidate JSON texts, most explicit first: fenced blocks, the whole
/// reply, balanced brace regions.
fn candidates(raw: &str) -> Vec<String> {
    let mut out = Vec::new();
    for block in fenced_blocks(raw) {
        out.push(block);
    }
    out.push(raw.trim().to_owned());
    for region in brace_regions(raw) {
        out.push(region);
    }
    out
}

/// The contents of every ``` fence, language tags stripped.
fn fenced_blocks(raw: &str) -> Vec<String> {
    let mut blocks = Vec::new();
    let mut rest = raw;
    while let Some(open) = rest.find("```") {
        let after_open = &rest[open + 3..];
        let Some(close) = after_open.find("```") else { break };
        let mut inner = &after_open[..close];
        // Drop a language tag like `json` on the opening line.
        if let Some(newline) = inner.find('\n') {
            let first_line = inner[..newline].trim();
            if !first_line.is_empty() && !first_line.contains('{') {
                inner = &inner[newline + 1..];
            }
        }
        blocks.push(inner.trim().to_owned());
        rest = &after_open[close + 3..];
    }
    blocks
}

/// Every balanced top-level `{...}` region, honoring JSON string escapes.
fn brace_regions(raw: &str) -> Vec<String> {
    let bytes = raw.as_bytes();
    let mut regions = Vec::new();
    let mut depth = 0usize;
    let mut start = None;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate() {
        if in_string {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                in_string = false;
            }
            continue;
        }
        match b {
            b'"' if depth > 0 => in_string = true,
            b'{' => {
                if depth == 0 {
                    start = Some(i);
                }
                depth += 1;
            }
            b'}' if depth > 0 => {
                depth -= 1;
                if depth == 0 {
                    if let Some(s) = start.take() {
                        regions.push(raw[s..=i].to_owned());
                    }
                }
            }
            _ => {}
        }
    }
    regions
}

fn try_candidate(candidate: &str) -> Result<LlmDecision, String> {
    let value: Value =
        serde_json::from_str(candidate).map_err(|e| format!("not JSON: {e}"))?;
    let object = value.as_object().ok_or_else(|| "JSON is not an object".to_owned())?;
    let strategy_text = match object.get("next_strategy") {
        Some(Value::String(s)) => s.clone(),
        Some(other) => other.to_string(),
        None => return Err("missing next_strategy".to_owned()),
    };
    let next_strategy: Strategy =
        strategy_text.trim_matches('"').parse().map_err(|e| format!("{e}"))?;
    Ok(LlmDecision {
        opponent_inference: field_text(object.get("opponent_inference")),
        predictions: field_text(object.get("predictions")),
        next_strategy,
    })
}

/// Free-text field: strings verbatim, other JSON stringified, absent empty.
fn field_text(value: Option<&Value>) -> String {
    match value {
        Some(Value::String(s)) => s.clone(),
        Some(other) => other.to_string(),
        None => String::new(),
    }
}
