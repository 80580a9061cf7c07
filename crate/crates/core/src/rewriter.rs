//! Clients that rewrite easy reasoning units into compressed drafts.
//!
//! The curator hands each easy unit to a [`RewriterClient`] together with a
//! prompt template; the client returns a shorter rewrite (or the original
//! text when nothing can be dropped). [`MockRewriter`] is deterministic and
//! offline; [`HttpRewriter`] calls a completion endpoint with retries and a
//! content-addressed cache so repeated runs are cheap and reproducible.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::Duration;

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Prompt template for compressing one easy unit; `{{unit}}` is the slot.
pub const SHORTEN_TEMPLATE: &str = include_str!("../assets/templates/cod_shorten.txt");

/// Prompt template for generating a tagged trace from a raw problem;
/// `{{unit}}` is the slot.
pub const HYBRID_GENERATE_TEMPLATE: &str =
    include_str!("../assets/templates/hybrid_generate.txt");

#[derive(Debug, Error)]
pub enum RewriterError {
    #[error("rewrite request failed: {0}")]
    Request(String),
    #[error("rewrite response invalid: {0}")]
    InvalidResponse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Fills the `{{unit}}` slot of a prompt template.
pub fn render_template(template: &str, unit_text: &str) -> String {
    template.replace("{{unit}}", unit_text)
}

/// Anything that can rewrite a reasoning unit into a shorter draft.
pub trait RewriterClient: Send + Sync {
    fn shorten(&self, unit_text: &str, template: &str) -> Result<String, RewriterError>;
}

/// Sentence prefixes the mock treats as droppable hedging.
const HEDGE_PREFIXES: [&str; 11] = [
    "let me think",
    "let me see",
    "let's see",
    "let's think",
    "okay",
    "ok,",
    "hmm",
    "i think",
    "well,",
    "so basically",
    "as we know",
];

/// Splits on `.`, `!`, `?` only when followed by whitespace or the end of
/// the text, so decimals like `3.14` stay intact.
fn split_sentences(text: &str) -> Vec<&str> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut start = 0usize;
    for i in 0..bytes.len() {
        let b = bytes[i];
        let ends = matches!(b, b'.' | b'!' | b'?')
            && (i + 1 >= bytes.len() || bytes[i + 1].is_ascii_whitespace());
        if ends {
            out.push(&text[start..=i]);
            start = i + 1;
        }
    }
    if start < text.len() {
        out.push(&text[start..]);
    }
    out
}

/// Offline rewriter: drops hedging sentences and squeezes whitespace. It is
/// deterministic and never returns an empty string; if every sentence is
/// hedging, the trimmed original comes back unchanged.
#[derive(Debug, Clone, Default)]
pub struct MockRewriter;

impl MockRewriter {
    pub fn new() -> Self {
        Self
    }
}

impl RewriterClient for MockRewriter {
    fn shorten(&self, unit_text: &str, _template: &str) -> Result<String, RewriterError> {
        let kept: Vec<&str> = split_sentences(unit_text)
            .into_iter()
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .filter(|s| {
                let lower = s.to_lowercase();
                !HEDGE_PREFIXES.iter().any(|p| lower.starts_with(p))
            })
            .collect();
        if kept.is_empty() {
            let original = unit_text.split_whitespace().collect::<Vec<_>>().join(" ");
            return Ok(original);
        }
        Ok(kept.join(" ").split_whitespace().collect::<Vec<_>>().join(" "))
    }
}

#[derive(Serialize)]
struct RewriteRequest<'a> {
    prompt: &'a str,
}

/// Rewriter backed by an HTTP completion endpoint. Requests POST
/// `{"prompt": ...}` and expect the rewritten text as the plain response
/// body. Responses are cached in memory by prompt digest, and optionally on
/// disk, so identical units are fetched once.
pub struct HttpRewriter {
    endpoint: String,
    auth_token: Option<String>,
    retries: u32,
    backoff: Duration,
    client: reqwest::blocking::Client,
    cache: Mutex<HashMap<String, String>>,
    disk_cache_dir: Option<PathBuf>,
}

impl HttpRewriter {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            auth_token: None,
            retries: 3,
            backoff: Duration::from_millis(50),
            client: reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(60))
                .build()
                .expect("client build"),
            cache: Mutex::new(HashMap::new()),
            disk_cache_dir: None,
        }
    }

    pub fn with_auth_token(mut self, token: impl Into<String>) -> Self {
        self.auth_token = Some(token.into());
        self
    }

    pub fn with_retries(mut self, retries: u32, backoff: Duration) -> Self {
        self.retries = retries;
        self.backoff = backoff;
        self
    }

    /// Enables a persistent cache under `dir` (one file per prompt digest).
    pub fn with_disk_cache(mut self, dir: impl Into<PathBuf>) -> Self {
        self.disk_cache_dir = Some(dir.into());
        self
    }

    fn cache_key(prompt: &str) -> String {
        let mut hasher = Sha256::new();
        hasher.update(prompt.as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    fn disk_path(&self, key: &str) -> Option<PathBuf> {
        self.disk_cache_dir.as_ref().map(|d| d.join(format!("{key}.txt")))
    }

    fn post_once(&self, prompt: &str) -> Result<String, RewriterError> {
        let mut request = self
            .client
            .post(&self.endpoint)
            .json(&RewriteRequest { prompt });
        if let Some(token) = &self.auth_token {
            request = request.bearer_auth(token);
        }
        let response = request
            .send()
            .map_err(|e| RewriterError::Request(e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            return Err(RewriterError::Request(format!("status {status}")));
        }
        let body = response
            .text()
            .map_err(|e| RewriterError::InvalidResponse(e.to_string()))?;
        let trimmed = body.trim();
        if trimmed.is_empty() {
            return Err(RewriterError::InvalidResponse("empty body".into()));
        }
        Ok(trimmed.to_string())
    }
}

impl RewriterClient for HttpRewriter {
    fn shorten(&self, unit_text: &str, template: &str) -> Result<String, RewriterError> {
        let prompt = render_template(template, unit_text);
        let key = Self::cache_key(&prompt);
        if let Some(hit) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(hit.clone());
        }
        if let Some(path) = self.disk_path(&key) {
            if let Ok(cached) = std::fs::read_to_string(&path) {
                self.cache
                    .lock()
                    .expect("cache lock")
                    .insert(key, cached.clone());
                return Ok(cached);
            }
        }

        let mut last_error = RewriterError::Request("no attempts made".into());
        for attempt in 0..=self.retries {
            if attempt > 0 {
                std::thread::sleep(self.backoff);
            }
            match self.post_once(&prompt) {
                Ok(text) => {
                    if let Some(path) = self.disk_path(&key) {
                        if let Some(parent) = path.parent() {
                            std::fs::create_dir_all(parent)?;
                        }
                        std::fs::write(&path, &text)?;
                    }
                    self.cache
                        .lock()
                        .expect("cache lock")
                        .insert(key, text.clone());
                    return Ok(text);
                }
                Err(RewriterError::Request(message)) => {
                    last_error = RewriterError::Request(message);
                }
                Err(fatal) => return Err(fatal),
            }
        }
        Err(last_error)
    }
}
