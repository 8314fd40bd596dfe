//! Provider-agnostic judge client: prompt rendering, verdict parsing,
//! retries, rate limiting, and content-addressed caching.

pub mod cache;
pub mod http;
pub mod parse;
pub mod template;

use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use cache::{CacheMeta, ResponseCache};
pub use parse::{parse_judge_response, JudgeResponse, ParseStatus};
pub use template::{render_prompt, PromptTemplate, TemplateId};

/// Which paper sits in the `{content2}` slot of an evaluation prompt.
///
/// `HighFirst` binds the higher-scored paper to content 2, so the parsed
/// label already means "the hypothesis explains the higher-scored paper's
/// advantage". `LowFirst` swaps the contents, and the parsed label must be
/// inverted before storage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresentationOrder {
    LowFirst,
    HighFirst,
}

/// One fully rendered request to the judge.
#[derive(Debug, Clone)]
pub struct JudgeRequest {
    pub template_id: TemplateId,
    pub rendered_prompt: String,
    pub model_id: String,
    pub temperature: f64,
    /// Fold index 0..=2 for evaluation requests; reused as a simulation or
    /// attempt nonce for generation requests.
    pub fold_nonce: u64,
    pub presentation_order: PresentationOrder,
}

impl JudgeRequest {
    pub fn cache_key(&self) -> String {
        ResponseCache::key(
            &self.model_id,
            &self.rendered_prompt,
            self.temperature,
            self.fold_nonce,
        )
    }
}

/// Remote judge endpoint settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub provider_url: String,
    pub model_id: String,
    pub temperature_generate: f64,
    pub temperature_evaluate: f64,
    pub max_retries: u32,
    pub requests_per_minute: u32,
    /// Name of the environment variable holding the API key.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
}

impl ProviderConfig {
    /// Settings used when the judge is a local scripted one.
    pub fn scripted() -> Self {
        ProviderConfig {
            provider_url: String::new(),
            model_id: "scripted".to_string(),
            temperature_generate: 1.0,
            temperature_evaluate: 0.0,
            max_retries: 3,
            requests_per_minute: 0,
            api_key_env: None,
        }
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// Temperature for a given template role.
    pub fn temperature_for(&self, id: TemplateId) -> f64 {
        if id.is_generation() {
            self.temperature_generate
        } else {
            self.temperature_evaluate
        }
    }

    /// Build a request with the configured model and temperature.
    pub fn request(
        &self,
        template_id: TemplateId,
        rendered_prompt: String,
        fold_nonce: u64,
        presentation_order: PresentationOrder,
    ) -> JudgeRequest {
        JudgeRequest {
            template_id,
            rendered_prompt,
            model_id: self.model_id.clone(),
            temperature: self.temperature_for(template_id),
            fold_nonce,
            presentation_order,
        }
    }
}

/// Transport layer: turns a request into raw response text.
pub trait Provider: Send + Sync {
    fn complete(&self, request: &JudgeRequest) -> Result<String>;
}

/// Token-bucket rate limiter (requests per minute).
pub struct TokenBucket {
    capacity: f64,
    refill_per_sec: f64,
    state: Mutex<(f64, Instant)>,
}

impl TokenBucket {
    pub fn per_minute(requests: u32) -> Self {
        let capacity = requests as f64;
        TokenBucket {
            capacity,
            refill_per_sec: capacity / 60.0,
            state: Mutex::new((capacity, Instant::now())),
        }
    }

    /// Block until a token is available.
    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut state = self.state.lock().unwrap();
                let (ref mut tokens, ref mut last) = *state;
                let now = Instant::now();
                *tokens = (*tokens + now.duration_since(*last).as_secs_f64() * self.refill_per_sec)
                    .min(self.capacity);
                *last = now;
                if *tokens >= 1.0 {
                    *tokens -= 1.0;
                    None
                } else {
                    Some(Duration::from_secs_f64(
                        (1.0 - *tokens) / self.refill_per_sec,
                    ))
                }
            };
            match wait {
                None => return,
                Some(d) => std::thread::sleep(d.min(Duration::from_millis(200))),
            }
        }
    }
}

/// Judge client combining a provider with caching, retries, and rate limits.
pub struct JudgeClient {
    provider: Arc<dyn Provider>,
    cache: Option<ResponseCache>,
    limiter: Option<TokenBucket>,
    max_retries: u32,
    backoff_base: Duration,
}

impl JudgeClient {
    pub fn new(provider: Arc<dyn Provider>) -> Self {
        JudgeClient {
            provider,
            cache: None,
            limiter: None,
            max_retries: 3,
            backoff_base: Duration::from_millis(250),
        }
    }

    pub fn with_cache(mut self, cache: ResponseCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_rate_limit(mut self, requests_per_minute: u32) -> Self {
        if requests_per_minute > 0 {
            self.limiter = Some(TokenBucket::per_minute(requests_per_minute));
        }
        self
    }

    pub fn with_max_retries(mut self, max_retries: u32) -> Self {
        self.max_retries = max_retries.max(1);
        self
    }

    pub fn with_backoff_base(mut self, base: Duration) -> Self {
        self.backoff_base = base;
        self
    }

    fn parse_for(template_id: TemplateId, raw: String) -> JudgeResponse {
        if template_id.expects_verdict() {
            parse_judge_response(&raw)
        } else {
            JudgeResponse::text(raw)
        }
    }

    /// One transport call with bounded retries and exponential backoff.
    fn call(&self, request: &JudgeRequest, attempts_used: &mut u32) -> Result<String> {
        let mut last_err = None;
        for attempt in 0..self.max_retries {
            if let Some(limiter) = &self.limiter {
                limiter.acquire();
            }
            *attempts_used += 1;
            match self.provider.complete(request) {
                Ok(text) => return Ok(text),
                Err(e) => {
                    last_err = Some(e);
                    if attempt + 1 < self.max_retries {
                        std::thread::sleep(self.backoff_base * 2u32.pow(attempt));
                    }
                }
            }
        }
        Err(Error::Transport {
            request_key: request.cache_key(),
            message: last_err.map_or_else(|| "no attempts made".into(), |e| e.to_string()),
        })
    }

    /// Submit a request, consulting the cache first.
    ///
    /// On a miss the provider is called with bounded retries; a malformed
    /// verdict triggers fresh requests up to the same bound before the
    /// malformed response is accepted and cached.
    pub fn submit(&self, request: &JudgeRequest) -> Result<JudgeResponse> {
        let key = request.cache_key();
        if let Some(cache) = &self.cache {
            if let Some(entry) = cache.get(&key)? {
                return Ok(Self::parse_for(request.template_id, entry.raw_text));
            }
        }

        let mut attempts = 0u32;
        let mut raw = self.call(request, &mut attempts)?;
        let mut response = Self::parse_for(request.template_id, raw.clone());
        let mut parse_tries = 1;
        while request.template_id.expects_verdict()
            && !response.is_ok()
            && parse_tries < self.max_retries
        {
            raw = self.call(request, &mut attempts)?;
            response = Self::parse_for(request.template_id, raw.clone());
            parse_tries += 1;
        }

        if let Some(cache) = &self.cache {
            cache.put(
                &key,
                &CacheMeta {
                    model_id: request.model_id.clone(),
                    temperature: request.temperature,
                    fold_nonce: request.fold_nonce,
                    attempts,
                },
                &raw,
            )?;
        }
        Ok(response)
    }
}
