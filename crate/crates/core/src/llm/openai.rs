//! Client for OpenAI-compatible `/chat/completions` endpoints.

use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};

use super::{BackendError, ChatBackend, ChatMessage};

#[derive(Debug, Clone)]
pub struct OpenAiSettings {
    pub temperature: f64,
    pub timeout: Duration,
    /// Extra attempts after HTTP 429 before giving up with `RateLimited`.
    pub rate_limit_retries: u32,
    pub backoff: Duration,
    pub context_limit: Option<usize>,
}

impl Default for OpenAiSettings {
    fn default() -> Self {
        OpenAiSettings {
            temperature: 0.0,
            timeout: Duration::from_secs(120),
            rate_limit_retries: 3,
            backoff: Duration::from_secs(1),
            context_limit: None,
        }
    }
}

#[derive(Debug)]
pub struct OpenAiBackend {
    endpoint: String,
    model: String,
    api_key: String,
    settings: OpenAiSettings,
    client: Client,
    identity: String,
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ReplyMessage,
}

#[derive(Deserialize)]
struct ReplyMessage {
    content: Option<String>,
}

/// Builds a backend for `base_url` (for example `https://api.openai.com/v1`).
/// A missing or empty key is rejected here, before any request is made.
pub fn openai_compatible_backend(
    base_url: &str,
    model: &str,
    api_key: Option<String>,
    settings: OpenAiSettings,
) -> Result<OpenAiBackend, BackendError> {
    let api_key = api_key
        .filter(|k| !k.trim().is_empty())
        .ok_or_else(|| BackendError::Auth("no API key configured (set COMCAT_API_KEY)".into()))?;
    let base = reqwest::Url::parse(base_url)
        .map_err(|e| BackendError::Config(format!("invalid base URL {base_url:?}: {e}")))?;
    if model.trim().is_empty() {
        return Err(BackendError::Config("model name is empty".into()));
    }
    let client = Client::builder()
        .timeout(settings.timeout)
        .build()
        .map_err(|e| BackendError::Config(e.to_string()))?;
    let endpoint = format!("{}/chat/completions", base.as_str().trim_end_matches('/'));
    Ok(OpenAiBackend {
        identity: format!("openai:{model}"),
        endpoint,
        model: model.to_string(),
        api_key,
        settings,
        client,
    })
}

impl OpenAiBackend {
    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn post_once(
        &self,
        conversation: &[ChatMessage],
    ) -> Result<Result<String, BackendError>, StatusCode> {
        let response = self
            .client
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .json(&CompletionRequest {
                model: &self.model,
                messages: conversation,
                temperature: self.settings.temperature,
            })
            .send();
        let response = match response {
            Ok(r) => r,
            Err(e) => return Ok(Err(BackendError::Unavailable(e.to_string()))),
        };
        let status = response.status();
        if status == StatusCode::TOO_MANY_REQUESTS {
            return Err(status);
        }
        let body = response.text().unwrap_or_default();
        Ok(match status.as_u16() {
            200..=299 => parse_reply(&body),
            401 | 403 => Err(BackendError::Auth(format!("HTTP {status}"))),
            400..=499 => Err(BackendError::BadRequest(format!(
                "HTTP {status}: {}",
                excerpt(&body)
            ))),
            _ => Err(BackendError::Unavailable(format!("HTTP {status}"))),
        })
    }
}

fn parse_reply(body: &str) -> Result<String, BackendError> {
    let parsed: CompletionResponse = serde_json::from_str(body)
        .map_err(|e| BackendError::Unavailable(format!("unreadable completion: {e}")))?;
    parsed
        .choices
        .into_iter()
        .next()
        .and_then(|c| c.message.content)
        .ok_or_else(|| BackendError::Unavailable("completion has no content".into()))
}

fn excerpt(body: &str) -> String {
    body.chars().take(200).collect()
}

impl ChatBackend for OpenAiBackend {
    fn identity(&self) -> &str {
        &self.identity
    }

    fn send(&self, conversation: &[ChatMessage]) -> Result<String, BackendError> {
        let mut pause = self.settings.backoff;
        for attempt in 0..=self.settings.rate_limit_retries {
            match self.post_once(conversation) {
                Ok(result) => return result,
                Err(_) if attempt < self.settings.rate_limit_retries => {
                    log::warn!("{}: HTTP 429, retrying in {pause:?}", self.identity);
                    std::thread::sleep(pause);
                    pause = pause.saturating_mul(2);
                }
                Err(_) => {}
            }
        }
        Err(BackendError::RateLimited(format!(
            "HTTP 429 after {} retries",
            self.settings.rate_limit_retries
        )))
    }

    fn context_limit(&self) -> Option<usize> {
        self.settings.context_limit
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_key_is_auth_error() {
        let err = openai_compatible_backend(
            "http://127.0.0.1:9/v1",
            "m",
            None,
            OpenAiSettings::default(),
        )
        .unwrap_err();
        assert!(matches!(err, BackendError::Auth(_)));
        let err = openai_compatible_backend(
            "http://127.0.0.1:9/v1",
            "m",
            Some(" ".into()),
            OpenAiSettings::default(),
        )
        .unwrap_err();
        assert!(matches!(err, BackendError::Auth(_)));
    }

    #[test]
    fn endpoint_joins_path() {
        let b = openai_compatible_backend(
            "http://localhost:8080/v1/",
            "m",
            Some("k".into()),
            OpenAiSettings::default(),
        )
        .unwrap();
        assert_eq!(b.endpoint(), "http://localhost:8080/v1/chat/completions");
        assert_eq!(b.identity(), "openai:m");
    }

    #[test]
    fn reply_parsing() {
        let body = r#"{"choices":[{"message":{"role":"assistant","content":"// x: y."}}]}"#;
        assert_eq!(parse_reply(body).unwrap(), "// x: y.");
        assert!(parse_reply(r#"{"choices":[]}"#).is_err());
    }
}
