//! An in-process chat-completions endpoint for tests.
//!
//! [`MockEndpoint::spawn`] starts a tiny HTTP/1.1 server on a loopback
//! port and answers each request by calling a policy closure with the
//! extracted system and user prompts. Tests drive [`LlmAgent`] against it
//! to exercise the full request, retry, parse, and audit pipeline without
//! a network or a real model.
//!
//! [`LlmAgent`]: crate::agent::LlmAgent

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

/// One request as the policy sees it.
#[derive(Clone, Debug)]
pub struct MockRequest {
    /// Content of the `system` message, empty if absent.
    pub system: String,
    /// Content of the `user` message, empty if absent.
    pub user: String,
    /// The full request body.
    pub body: serde_json::Value,
}

/// What the policy wants sent back.
#[derive(Clone, Debug)]
pub enum MockReply {
    /// A 200 response wrapping `content` in the standard completion shape.
    Content(String),
    /// An arbitrary status and body, for exercising failure handling.
    Raw { status: u16, body: String },
}

/// A loopback chat-completions server that answers with a policy closure.
pub struct MockEndpoint {
    addr: std::net::SocketAddr,
    hits: Arc<AtomicUsize>,
    shutdown: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl MockEndpoint {
    /// Starts the server. The policy runs on the server thread, one
    /// request at a time, and may carry mutable state (scripted replies,
    /// counters).
    pub fn spawn<F>(mut policy: F) -> Self
    where
        F: FnMut(&MockRequest) -> MockReply + Send + 'static,
    {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind loopback");
        let addr = listener.local_addr().expect("local addr");
        let hits = Arc::new(AtomicUsize::new(0));
        let shutdown = Arc::new(AtomicBool::new(false));
        let thread_hits = Arc::clone(&hits);
        let thread_shutdown = Arc::clone(&shutdown);
        let handle = std::thread::spawn(move || {
            for stream in listener.incoming() {
                if thread_shutdown.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { break };
                serve_connection(stream, &mut policy, &thread_hits);
            }
        });
        MockEndpoint { addr, hits, shutdown, handle: Some(handle) }
    }

    /// Base URL to hand to an [`EndpointConfig`].
    ///
    /// [`EndpointConfig`]: crate::agent::EndpointConfig
    pub fn base_url(&self) -> String {
        format!("http://{}/v1", self.addr)
    }

    /// How many requests the policy has answered.
    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }
}

impl Drop for MockEndpoint {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        // Unblock the accept loop so the thread can observe the flag.
        let _ = TcpStream::connect(self.addr);
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

fn serve_connection<F>(mut stream: TcpStream, policy: &mut F, hits: &AtomicUsize)
where
    F: FnMut(&MockRequest) -> MockReply,
{
    let Some(body) = read_request_body(&mut stream) else { return };
    let Ok(value) = serde_json::from_slice::<serde_json::Value>(&body) else { return };
    let request = MockRequest {
        system: message_content(&value, "system"),
        user: message_content(&value, "user"),
        body: value,
    };
    hits.fetch_add(1, Ordering::SeqCst);
    let (status, reason, body) = match policy(&request) {
        MockReply::Content(content) => {
            let wrapped = serde_json::json!({
                "choices": [{"message": {"role": "assistant", "content": content}}],
            });
            (200, "OK", wrapped.to_string())
        }
        MockReply::Raw { status, body } => (status, "Policy", body),
    };
    let response = format!(
        "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len(),
    );
    let _ = stream.write_all(response.as_bytes());
    let _ = stream.flush();
}

/// Reads one request and returns its body, or `None` if the request never
/// arrives whole (a shutdown poke, a hung-up client).
fn read_request_body(stream: &mut TcpStream) -> Option<Vec<u8>> {
    let mut buffer = Vec::new();
    let mut chunk = [0u8; 4096];
    let header_end = loop {
        if let Some(pos) = find_blank_line(&buffer) {
            break pos;
        }
        let n = stream.read(&mut chunk).ok()?;
        if n == 0 {
            return None;
        }
        buffer.extend_from_slice(&chunk[..n]);
    };
    let head = String::from_utf8_lossy(&buffer[..header_end]);
    let length: usize = head
        .lines()
        .find_map(|line| {
            let (name, value) = line.split_once(':')?;
            name.eq_ignore_ascii_case("content-length").then(|| value.trim().parse().ok())?
        })
        .unwrap_or(0);
    let body_start = header_end + 4;
    let mut body = buffer[body_start.min(buffer.len())..].to_vec();
    while body.len() < length {
        let n = stream.read(&mut chunk).ok()?;
        if n == 0 {
            return None;
        }
        body.extend_from_slice(&chunk[..n]);
    }
    body.truncate(length);
    Some(body)
}

fn find_blank_line(buffer: &[u8]) -> Option<usize> {
    buffer.windows(4).position(|w| w == b"\r\n\r\n")
}

fn message_content(body: &serde_json::Value, role: &str) -> String {
    body["messages"]
        .as_array()
        .into_iter()
        .flatten()
        .find(|m| m["role"] == role)
        .and_then(|m| m["content"].as_str())
        .unwrap_or_default()
        .to_owned()
}

/// A policy that mirrors the opponent: it reads the opponent's current
/// strategy out of the user prompt and answers with that strategy, so an
/// endpoint-backed seat behaves exactly like the tit-for-tat agent.
pub fn tit_for_tat_policy() -> impl FnMut(&MockRequest) -> MockReply + Send + 'static {
    |request: &MockRequest| {
        let Some(rest) = request.user.split("Opponent's current strategy: ").nth(1) else {
            return MockReply::Raw { status: 500, body: "prompt shape changed".to_owned() };
        };
        let strategy = rest.chars().next().unwrap_or('?');
        if strategy != 'C' && strategy != 'D' {
            return MockReply::Raw { status: 500, body: "prompt shape changed".to_owned() };
        }
        MockReply::Content(format!(
            r#"{{"opponent_inference": "mirroring", "predictions": "mirroring", "next_strategy": "{strategy}"}}"#,
        ))
    }
}

/// A policy that plays back `replies` in order, repeating the last one
/// once the script runs out.
pub fn scripted_policy(replies: Vec<MockReply>) -> impl FnMut(&MockRequest) -> MockReply + Send + 'static {
    assert!(!replies.is_empty(), "scripted policy needs at least one reply");
    let mut next = 0usize;
    move |_: &MockRequest| {
        let reply = replies[next.min(replies.len() - 1)].clone();
        next += 1;
        reply
    }
}
