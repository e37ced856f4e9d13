//! Completion backends behind one trait.
//!
//! `MockBackend` answers from the rule engine and keeps everything
//! hermetic; `ScriptBackend` shells out to a user command (prompt on stdin,
//! completion on stdout); `HttpBackend` posts JSON to a configured endpoint.
//! All implementations must be deterministic at temperature 0.

use std::io::Write;
use std::process::{Command, Stdio};
use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::qa::fallback::fallback_generate;
use crate::qa::parse::render_response;
use crate::qa::template::target_source_of_prompt;

/// Environment variables configuring [`HttpBackend`].
pub const HTTP_ENDPOINT_ENV: &str = "MMTVQA_HTTP_ENDPOINT";
pub const HTTP_TOKEN_ENV: &str = "MMTVQA_HTTP_TOKEN";

/// A text-completion service.
pub trait GenerationBackend: Send + Sync {
    /// Complete a prompt. Implementations must be deterministic for a fixed
    /// prompt at temperature 0.
    fn complete(&self, prompt: &str, temperature: f64) -> Result<String>;

    fn backend_name(&self) -> &str;
}

/// Offline backend: extracts the final source sentence from the prompt and
/// answers it with the deterministic rule engine, rendered canonically.
#[derive(Debug, Clone, Default)]
pub struct MockBackend {
    pub seed: u64,
}

impl MockBackend {
    pub fn new(seed: u64) -> Self {
        MockBackend { seed }
    }
}

impl GenerationBackend for MockBackend {
    fn complete(&self, prompt: &str, _temperature: f64) -> Result<String> {
        let source = target_source_of_prompt(prompt).ok_or_else(|| Error::Transport {
            backend: "mock".into(),
            message: "prompt has no final Source: line".into(),
        })?;
        let pair = fallback_generate(source, self.seed)?;
        Ok(render_response(&pair))
    }

    fn backend_name(&self) -> &str {
        "mock"
    }
}

/// Replays a fixed list of responses in call order. Test double for the
/// pipeline's parsing/validation/retry paths.
pub struct ScriptedBackend {
    responses: Mutex<Vec<Result<String>>>,
}

impl ScriptedBackend {
    pub fn new(responses: Vec<Result<String>>) -> Self {
        let mut responses = responses;
        responses.reverse(); // pop from the back in call order
        ScriptedBackend { responses: Mutex::new(responses) }
    }
}

impl GenerationBackend for ScriptedBackend {
    fn complete(&self, _prompt: &str, _temperature: f64) -> Result<String> {
        self.responses.lock().unwrap().pop().unwrap_or_else(|| {
            Err(Error::Transport { backend: "scripted".into(), message: "script exhausted".into() })
        })
    }

    fn backend_name(&self) -> &str {
        "scripted"
    }
}

/// Runs a shell command per prompt: prompt on stdin, completion on stdout.
pub struct ScriptBackend {
    pub command: String,
}

impl ScriptBackend {
    pub fn new(command: impl Into<String>) -> Self {
        ScriptBackend { command: command.into() }
    }
}

impl GenerationBackend for ScriptBackend {
    fn complete(&self, prompt: &str, temperature: f64) -> Result<String> {
        let transport = |message: String| Error::Transport { backend: "script".into(), message };
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&self.command)
            .env("MMTVQA_TEMPERATURE", temperature.to_string())
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| transport(format!("spawn failed: {e}")))?;
        child
            .stdin
            .take()
            .expect("stdin piped")
            .write_all(prompt.as_bytes())
            .map_err(|e| transport(format!("write failed: {e}")))?;
        let out = child.wait_with_output().map_err(|e| transport(format!("wait failed: {e}")))?;
        if !out.status.success() {
            return Err(transport(format!(
                "command exited with {}: {}",
                out.status,
                String::from_utf8_lossy(&out.stderr)
            )));
        }
        String::from_utf8(out.stdout).map_err(|_| transport("stdout is not UTF-8".into()))
    }

    fn backend_name(&self) -> &str {
        "script"
    }
}

/// Posts `{"prompt": ..., "temperature": ...}` and expects `{"text": ...}`.
/// Endpoint and bearer token come from [`HTTP_ENDPOINT_ENV`] and
/// [`HTTP_TOKEN_ENV`].
pub struct HttpBackend {
    endpoint: String,
    token: Option<String>,
}

impl HttpBackend {
    pub fn from_env() -> Result<Self> {
        let endpoint = std::env::var(HTTP_ENDPOINT_ENV).map_err(|_| {
            Error::Config(format!("{HTTP_ENDPOINT_ENV} must point at the completion endpoint"))
        })?;
        let token = std::env::var(HTTP_TOKEN_ENV).ok();
        Ok(HttpBackend { endpoint, token })
    }

    pub fn new(endpoint: impl Into<String>, token: Option<String>) -> Self {
        HttpBackend { endpoint: endpoint.into(), token }
    }
}

impl GenerationBackend for HttpBackend {
    fn complete(&self, prompt: &str, temperature: f64) -> Result<String> {
        let transport = |message: String| Error::Transport { backend: "http".into(), message };
        let mut req = ureq::post(&self.endpoint);
        if let Some(token) = &self.token {
            req = req.set("Authorization", &format!("Bearer {token}"));
        }
        let resp = req
            .send_json(ureq::json!({ "prompt": prompt, "temperature": temperature }))
            .map_err(|e| transport(e.to_string()))?;
        let body: serde_json::Value =
            resp.into_json().map_err(|e| transport(format!("invalid JSON response: {e}")))?;
        body.get("text")
            .and_then(|t| t.as_str())
            .map(|s| s.to_string())
            .ok_or_else(|| transport("response JSON lacks a \"text\" string".into()))
    }

    fn backend_name(&self) -> &str {
        "http"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qa::template::{build_prompt, default_template};

    #[test]
    fn mock_is_deterministic_and_parseable() {
        let backend = MockBackend::new(0);
        let prompt = build_prompt(&default_template(), "a man in a blue shirt .").unwrap();
        let a = backend.complete(&prompt, 0.0).unwrap();
        let b = backend.complete(&prompt, 0.0).unwrap();
        assert_eq!(a, b);
        let pair = crate::qa::parse::parse_response(&a).unwrap();
        assert_eq!(pair.answer, "Blue.");
    }

    #[test]
    fn script_backend_pipes_prompt_through_command() {
        let backend = ScriptBackend::new("sed s/ignored//; echo 'Type: Noun'");
        // `cat`-like command: everything echoed back plus a marker line
        let out = backend.complete("Question: q?\nAnswer: A.", 0.0).unwrap();
        assert!(out.contains("Type: Noun"));
    }

    #[test]
    fn script_failure_is_transport_error() {
        let backend = ScriptBackend::new("exit 3");
        assert!(matches!(backend.complete("x", 0.0), Err(Error::Transport { .. })));
    }
}
