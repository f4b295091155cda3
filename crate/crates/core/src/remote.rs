//! The remote answer oracle: forwards story questions to an HTTP
//! chat-completions endpoint and returns the model's text.
//!
//! The request body follows the widely used chat-completions shape
//! (`model`, `messages`, `temperature`, `max_tokens`); authentication is a
//! bearer token read from an environment variable at call time, so secrets
//! never appear in specs, configs, or reports. Transport failures,
//! non-success statuses, and malformed bodies are retried with a linear
//! backoff, then surfaced as an error — a story is never silently graded
//! against a missing response.

use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use crate::oracle::{Oracle, OracleError};
use crate::question::QAItem;
use crate::state::StoryState;

/// Environment variable consulted for the bearer token by default.
pub const DEFAULT_AUTH_ENV: &str = "ORACLE_API_KEY";

/// A retrying chat-completions client: one prompt in, one completion out.
/// Shared by the remote oracle, remote context sampling, and story
/// infilling.
pub struct RemoteClient {
    model: String,
    url: String,
    auth_env: String,
    attempts: u32,
    backoff: Duration,
    client: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: String,
}

impl RemoteClient {
    pub fn new(model: &str, url: &str) -> Self {
        RemoteClient {
            model: model.to_string(),
            url: url.to_string(),
            auth_env: DEFAULT_AUTH_ENV.to_string(),
            attempts: 3,
            backoff: Duration::from_millis(250),
            client: reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(60))
                .build()
                .expect("default client construction cannot fail"),
        }
    }

    /// Overrides the environment variable holding the bearer token.
    pub fn with_auth_env(mut self, var: &str) -> Self {
        self.auth_env = var.to_string();
        self
    }

    /// Overrides the retry budget (total attempts, minimum 1).
    pub fn with_attempts(mut self, attempts: u32) -> Self {
        self.attempts = attempts.max(1);
        self
    }

    /// Overrides the linear backoff unit between attempts.
    pub fn with_backoff(mut self, backoff: Duration) -> Self {
        self.backoff = backoff;
        self
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    fn try_once(&self, system: Option<&str>, prompt: &str, max_tokens: u32)
        -> Result<String, String> {
        let mut messages = Vec::new();
        if let Some(system) = system {
            messages.push(json!({"role": "system", "content": system}));
        }
        messages.push(json!({"role": "user", "content": prompt}));
        let body = json!({
            "model": self.model,
            "messages": messages,
            "temperature": 0.0,
            "max_tokens": max_tokens,
        });
        let mut request = self.client.post(&self.url).json(&body);
        if let Ok(key) = std::env::var(&self.auth_env) {
            if !key.is_empty() {
                request = request.bearer_auth(key);
            }
        }
        let response = request.send().map_err(|e| format!("transport: {e}"))?;
        let status = response.status();
        if !status.is_success() {
            return Err(format!("status {status}"));
        }
        let parsed: ChatResponse = response
            .json()
            .map_err(|e| format!("malformed response body: {e}"))?;
        parsed
            .choices
            .first()
            .map(|c| c.message.content.clone())
            .ok_or_else(|| "response carried no choices".to_string())
    }

    /// Sends one prompt (optionally under a system prompt) and returns the
    /// completion text, retrying with linear backoff.
    ///
    /// # Errors
    ///
    /// [`OracleError::Remote`] after the retry budget is exhausted.
    pub fn chat(&self, system: Option<&str>, prompt: &str, max_tokens: u32)
        -> Result<String, OracleError> {
        let mut last_error = String::new();
        for attempt in 1..=self.attempts {
            match self.try_once(system, prompt, max_tokens) {
                Ok(text) => return Ok(text),
                Err(e) => last_error = e,
            }
            if attempt < self.attempts {
                std::thread::sleep(self.backoff * attempt);
            }
        }
        Err(OracleError::Remote {
            attempts: self.attempts,
            message: last_error,
        })
    }
}

/// An oracle backed by a chat-completions HTTP endpoint.
pub struct RemoteOracle {
    client: RemoteClient,
}

impl RemoteOracle {
    pub fn new(model: &str, url: &str) -> Self {
        RemoteOracle {
            client: RemoteClient::new(model, url),
        }
    }

    /// Overrides the environment variable holding the bearer token.
    pub fn with_auth_env(mut self, var: &str) -> Self {
        self.client = self.client.with_auth_env(var);
        self
    }

    /// Overrides the retry budget (total attempts, minimum 1).
    pub fn with_attempts(mut self, attempts: u32) -> Self {
        self.client = self.client.with_attempts(attempts);
        self
    }

    /// Overrides the linear backoff unit between attempts.
    pub fn with_backoff(mut self, backoff: Duration) -> Self {
        self.client = self.client.with_backoff(backoff);
        self
    }

    /// The prompt sent for one question.
    pub fn prompt(story_text: &str, item: &QAItem) -> String {
        format!(
            "Read the story and answer the question.\n\nStory:\n{story_text}\n\nQuestion: {} Short Answer.",
            item.question
        )
    }
}

impl Oracle for RemoteOracle {
    fn spec(&self) -> String {
        format!("remote:{}@{}", self.client.model, self.client.url)
    }

    fn answer(&self, story_text: &str, _: &StoryState, item: &QAItem)
        -> Result<String, OracleError> {
        self.client.chat(None, &Self::prompt(story_text, item), 64)
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
