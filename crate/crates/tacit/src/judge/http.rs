//! HTTP provider speaking the common chat-completions wire shape.

use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::judge::{JudgeRequest, Provider};

/// Remote chat-completions endpoint.
pub struct HttpProvider {
    url: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: String,
}

impl HttpProvider {
    /// `api_key_env`, when set, names the environment variable holding the key.
    pub fn new(url: &str, api_key_env: Option<&str>) -> Result<Self> {
        let api_key = match api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                Error::InvalidConfig(format!("environment variable {var} is not set"))
            })?),
            None => None,
        };
        Ok(HttpProvider {
            url: url.to_string(),
            api_key,
            client: reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(120))
                .build()
                .map_err(|e| Error::Transport {
                    request_key: String::new(),
                    message: e.to_string(),
                })?,
        })
    }
}

impl Provider for HttpProvider {
    fn complete(&self, request: &JudgeRequest) -> Result<String> {
        let body = json!({
            "model": request.model_id,
            "temperature": request.temperature,
            "messages": [{"role": "user", "content": request.rendered_prompt}],
        });
        let mut builder = self.client.post(&self.url).json(&body);
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let transport_err = |message: String| Error::Transport {
            request_key: request.cache_key(),
            message,
        };
        let response = builder.send().map_err(|e| transport_err(e.to_string()))?;
        if !response.status().is_success() {
            return Err(transport_err(format!("HTTP {}", response.status())));
        }
        let parsed: ChatResponse = response
            .json()
            .map_err(|e| transport_err(format!("bad response body: {e}")))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| transport_err("response had no choices".into()))
    }
}
