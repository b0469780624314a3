//! Text-completion backend abstraction and the HTTP chat-completion client.

use std::env;
use std::fmt;
use std::thread;
use std::time::Duration;

use serde_json::json;
use thiserror::Error;

use crate::prompt::AgentPrompt;

/// Default environment variable holding the API key.
pub const DEFAULT_API_KEY_ENV: &str = "CLOUDANO_API_KEY";

const BACKOFF_BASE_MS: u64 = 200;

/// Failures a backend can report. Retries happen inside the backend; these
/// surface only once the retry policy is spent.
#[derive(Debug, Error)]
pub enum BackendError {
    #[error("api key environment variable {var} is not set")]
    MissingApiKey { var: String },
    #[error("authentication rejected with http {status} on attempt {attempts}")]
    Auth { status: u16, attempts: u32 },
    #[error("request timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("transport failed after {attempts} attempt(s): {last}")]
    TransportExhausted { attempts: u32, last: String },
    #[error("malformed completion response: {0}")]
    BadResponse(String),
}

/// Connection parameters for the HTTP backend.
#[derive(Debug, Clone, PartialEq)]
pub struct BackendConfig {
    pub endpoint_url: String,
    pub model_name: String,
    /// Name of the environment variable the API key is read from.
    pub api_key_env: String,
    pub timeout_seconds: u64,
    pub max_attempts: u32,
    /// Sampling temperature; `None` leaves the vendor default in place.
    pub temperature: Option<f64>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            endpoint_url: "https://api.openai.com/v1/chat/completions".to_string(),
            model_name: "gpt-4o-mini".to_string(),
            api_key_env: DEFAULT_API_KEY_ENV.to_string(),
            timeout_seconds: 60,
            max_attempts: 3,
            temperature: None,
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), BackendError> {
        if self.max_attempts == 0 {
            return Err(BackendError::BadResponse(
                "max_attempts must be at least 1".to_string(),
            ));
        }
        Ok(())
    }
}

/// A text-completion service the agents can call. Implementations must be
/// callable from multiple evaluation workers at once.
pub trait Backend: Send + Sync {
    fn complete(&self, prompt: &AgentPrompt) -> Result<String, BackendError>;

    /// Short identifier for logs and reports.
    fn name(&self) -> &str {
        "backend"
    }
}

/// Chat-completion HTTP client: POSTs the prompt as a two-message
/// conversation and reads the first choice's content. Transport failures
/// and server errors retry with exponential backoff up to `max_attempts`;
/// authentication rejections and malformed bodies do not retry.
pub struct HttpBackend {
    config: BackendConfig,
    api_key: String,
    client: reqwest::blocking::Client,
}

impl fmt::Debug for HttpBackend {
    /// Never prints the API key.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HttpBackend")
            .field("config", &self.config)
            .field("api_key", &"<redacted>")
            .finish_non_exhaustive()
    }
}

impl HttpBackend {
    /// Builds the client, resolving the API key from the configured
    /// environment variable. The key is held in memory and never logged.
    pub fn new(config: BackendConfig) -> Result<Self, BackendError> {
        config.validate()?;
        let api_key = env::var(&config.api_key_env).map_err(|_| BackendError::MissingApiKey {
            var: config.api_key_env.clone(),
        })?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_seconds))
            .build()
            .map_err(|e| BackendError::BadResponse(format!("client build failed: {e}")))?;
        Ok(HttpBackend {
            config,
            api_key,
            client,
        })
    }

    fn request_body(&self, prompt: &AgentPrompt) -> serde_json::Value {
        let mut body = json!({
            "model": self.config.model_name,
            "messages": [
                {"role": "system", "content": prompt.system_text},
                {"role": "user", "content": prompt.user_text},
            ],
        });
        if let Some(t) = self.config.temperature {
            body["temperature"] = json!(t);
        }
        body
    }

    fn extract_content(body: &str) -> Result<String, BackendError> {
        let doc: serde_json::Value = serde_json::from_str(body)
            .map_err(|e| BackendError::BadResponse(format!("response is not json: {e}")))?;
        doc["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| {
                BackendError::BadResponse("response has no choices[0].message.content".to_string())
            })
    }
}

impl Backend for HttpBackend {
    fn complete(&self, prompt: &AgentPrompt) -> Result<String, BackendError> {
        let body = self.request_body(prompt);
        let mut last_error = String::new();
        let mut timed_out = false;
        for attempt in 1..=self.config.max_attempts {
            if attempt > 1 {
                thread::sleep(Duration::from_millis(
                    BACKOFF_BASE_MS << (attempt - 2).min(6),
                ));
            }
            let sent = self
                .client
                .post(&self.config.endpoint_url)
                .bearer_auth(&self.api_key)
                .json(&body)
                .send();
            match sent {
                Err(e) => {
                    timed_out = e.is_timeout();
                    last_error = e.without_url().to_string();
                }
                Ok(response) => {
                    let status = response.status();
                    if status.as_u16() == 401 || status.as_u16() == 403 {
                        return Err(BackendError::Auth {
                            status: status.as_u16(),
                            attempts: attempt,
                        });
                    }
                    if status.is_server_error() || status.as_u16() == 429 {
                        timed_out = false;
                        last_error = format!("http {status}");
                        continue;
                    }
                    if !status.is_success() {
                        return Err(BackendError::BadResponse(format!("http {status}")));
                    }
                    let text = response
                        .text()
                        .map_err(|e| BackendError::BadResponse(format!("body read failed: {e}")))?;
                    return Self::extract_content(&text);
                }
            }
        }
        if timed_out {
            Err(BackendError::Timeout {
                attempts: self.config.max_attempts,
            })
        } else {
            Err(BackendError::TransportExhausted {
                attempts: self.config.max_attempts,
                last: last_error,
            })
        }
    }

    fn name(&self) -> &str {
        "http"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt::Schema;

    use std::io::{Read, Write};
    use std::net::TcpListener;
    use std::sync::atomic::{AtomicU32, Ordering};
    use std::sync::Arc;

    fn prompt() -> AgentPrompt {
        AgentPrompt {
            system_text: "system".to_string(),
            user_text: "user".to_string(),
            expected_schema: Schema::Verdict,
        }
    }

    /// Serves one canned HTTP response per accepted connection, cycling
    /// through `responses`, and counts the requests seen.
    fn serve(responses: Vec<String>) -> (String, Arc<AtomicU32>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let hits = Arc::new(AtomicU32::new(0));
        let handle_hits = hits.clone();
        std::thread::spawn(move || {
            for response in responses {
                let Ok((mut stream, _)) = listener.accept() else {
                    return;
                };
                let mut buf = vec![0u8; 65536];
                let mut read = 0usize;
                loop {
                    match stream.read(&mut buf[read..]) {
                        Ok(0) => break,
                        Ok(n) => {
                            read += n;
                            let head = String::from_utf8_lossy(&buf[..read]);
                            if let Some(header_end) = head.find("\r\n\r\n") {
                                let content_length = head
                                    .lines()
                                    .find_map(|l| {
                                        l.to_ascii_lowercase()
                                            .strip_prefix("content-length:")
                                            .map(|v| v.trim().parse::<usize>().unwrap_or(0))
                                    })
                                    .unwrap_or(0);
                                if read >= header_end + 4 + content_length {
                                    break;
                                }
                            }
                        }
                        Err(_) => break,
                    }
                }
                handle_hits.fetch_add(1, Ordering::SeqCst);
                let _ = stream.write_all(response.as_bytes());
            }
        });
        (format!("http://{addr}/v1/chat/completions"), hits)
    }

    fn http_response(status: &str, body: &str) -> String {
        format!(
            "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
            body.len()
        )
    }

    fn config_for(endpoint: String, key_env: &str, max_attempts: u32) -> BackendConfig {
        BackendConfig {
            endpoint_url: endpoint,
            model_name: "test-model".to_string(),
            api_key_env: key_env.to_string(),
            timeout_seconds: 5,
            max_attempts,
            temperature: Some(0.0),
        }
    }

    #[test]
    fn missing_api_key_is_reported_with_the_variable_name() {
        let config = config_for(
            "http://127.0.0.1:1/x".to_string(),
            "CLOUDANO_TEST_NO_SUCH_KEY",
            1,
        );
        match HttpBackend::new(config) {
            Err(BackendError::MissingApiKey { var }) => {
                assert_eq!(var, "CLOUDANO_TEST_NO_SUCH_KEY");
            }
            other => panic!("expected MissingApiKey, got {other:?}"),
        }
    }

    #[test]
    fn successful_round_trip_reads_the_first_choice() {
        let body =
            r#"{"choices":[{"message":{"role":"assistant","content":"is_anomaly: false"}}]}"#;
        let (endpoint, hits) = serve(vec![http_response("200 OK", body)]);
        std::env::set_var("CLOUDANO_TEST_KEY_OK", "k");
        let backend = HttpBackend::new(config_for(endpoint, "CLOUDANO_TEST_KEY_OK", 3)).unwrap();
        let out = backend.complete(&prompt()).unwrap();
        assert_eq!(out, "is_anomaly: false");
        assert_eq!(hits.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn auth_rejection_does_not_retry() {
        let (endpoint, hits) = serve(vec![
            http_response("401 Unauthorized", "{}"),
            http_response("401 Unauthorized", "{}"),
        ]);
        std::env::set_var("CLOUDANO_TEST_KEY_AUTH", "bad");
        let backend = HttpBackend::new(config_for(endpoint, "CLOUDANO_TEST_KEY_AUTH", 3)).unwrap();
        match backend.complete(&prompt()) {
            Err(BackendError::Auth {
                status: 401,
                attempts: 1,
            }) => {}
            other => panic!("expected Auth error, got {other:?}"),
        }
        assert_eq!(hits.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn server_errors_retry_then_succeed() {
        let body = r#"{"choices":[{"message":{"content":"ok"}}]}"#;
        let (endpoint, hits) = serve(vec![
            http_response("500 Internal Server Error", "{}"),
            http_response("200 OK", body),
        ]);
        std::env::set_var("CLOUDANO_TEST_KEY_RETRY", "k");
        let backend = HttpBackend::new(config_for(endpoint, "CLOUDANO_TEST_KEY_RETRY", 3)).unwrap();
        assert_eq!(backend.complete(&prompt()).unwrap(), "ok");
        assert_eq!(hits.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn unreachable_endpoint_exhausts_transport_attempts() {
        std::env::set_var("CLOUDANO_TEST_KEY_DOWN", "k");
        let config = config_for(
            "http://127.0.0.1:9/unreachable".to_string(),
            "CLOUDANO_TEST_KEY_DOWN",
            2,
        );
        let backend = HttpBackend::new(config).unwrap();
        match backend.complete(&prompt()) {
            Err(BackendError::TransportExhausted { attempts: 2, .. }) => {}
            Err(BackendError::Timeout { attempts: 2 }) => {}
            other => panic!("expected transport exhaustion, got {other:?}"),
        }
    }

    #[test]
    fn parse_failures_do_not_retry() {
        let (endpoint, hits) = serve(vec![
            http_response("200 OK", r#"{"unexpected": true}"#),
            http_response("200 OK", r#"{"unexpected": true}"#),
        ]);
        std::env::set_var("CLOUDANO_TEST_KEY_PARSE", "k");
        let backend = HttpBackend::new(config_for(endpoint, "CLOUDANO_TEST_KEY_PARSE", 3)).unwrap();
        match backend.complete(&prompt()) {
            Err(BackendError::BadResponse(_)) => {}
            other => panic!("expected BadResponse, got {other:?}"),
        }
        assert_eq!(hits.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn temperature_is_included_only_when_set() {
        std::env::set_var("CLOUDANO_TEST_KEY_BODY", "k");
        let mut config = config_for(
            "http://127.0.0.1:1/x".to_string(),
            "CLOUDANO_TEST_KEY_BODY",
            1,
        );
        config.temperature = None;
        let backend = HttpBackend::new(config).unwrap();
        let body = backend.request_body(&prompt());
        assert!(body.get("temperature").is_none());
        assert_eq!(body["model"], "test-model");
        assert_eq!(body["messages"][1]["content"], "user");
    }
}
