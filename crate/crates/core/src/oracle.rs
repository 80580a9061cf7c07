//! Token generators that drive rollouts.
//!
//! [`GeneratorOracle`] abstracts a next-token source: given the prompt and
//! the tokens generated so far, produce the next token text with the
//! probability vector it was drawn from. Implementations must be
//! deterministic given identical context and rng-stream state, which is what
//! makes branching rollouts reproducible.
//!
//! [`ScriptedOracle`] replays a fixed script verbatim (the workhorse for
//! tests and offline runs); [`HttpOracle`] talks to a completion endpoint
//! and caches responses by `(context, seed)` so replayed prefixes and
//! re-runs do not re-ask the server.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::entropy::token_entropy;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("script row {row}: {message}")]
    InvalidScript { row: usize, message: String },
    #[error("script exhausted at position {0}")]
    ScriptExhausted(usize),
    #[error("request failed: {0}")]
    Request(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// A deterministic next-token source.
pub trait GeneratorOracle {
    /// Returns the next token text and the probability vector it came from.
    /// Must be a pure function of `(prompt, generated, rng state)`.
    fn step(
        &self,
        prompt: &[String],
        generated: &[String],
        rng: &mut dyn RngCore,
    ) -> Result<(String, Vec<f64>), OracleError>;

    /// True when generation is finished for this context; `step` will not be
    /// called again once this returns true.
    fn is_terminal(&self, prompt: &[String], generated: &[String]) -> bool;
}

/// One row of a generation script.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScriptRow {
    pub token: String,
    pub probs: Vec<f64>,
}

/// Replays a fixed token script verbatim, then reports terminal. The rng is
/// ignored; branches forked mid-script replay the same suffix.
#[derive(Debug, Clone)]
pub struct ScriptedOracle {
    rows: Vec<ScriptRow>,
}

impl ScriptedOracle {
    pub fn new(rows: Vec<ScriptRow>) -> Result<Self, OracleError> {
        if rows.is_empty() {
            return Err(OracleError::InvalidScript {
                row: 0,
                message: "script is empty".into(),
            });
        }
        for (i, row) in rows.iter().enumerate() {
            if row.token.is_empty() {
                return Err(OracleError::InvalidScript {
                    row: i + 1,
                    message: "empty token text".into(),
                });
            }
            token_entropy(&row.probs).map_err(|e| OracleError::InvalidScript {
                row: i + 1,
                message: e.to_string(),
            })?;
        }
        Ok(Self { rows })
    }

    /// Convenience constructor from `(token, probs)` pairs.
    pub fn from_pairs<I>(pairs: I) -> Result<Self, OracleError>
    where
        I: IntoIterator<Item = (String, Vec<f64>)>,
    {
        Self::new(
            pairs
                .into_iter()
                .map(|(token, probs)| ScriptRow { token, probs })
                .collect(),
        )
    }

    /// Loads a script from JSONL lines of `{"token": str, "probs": [f64]}`.
    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self, OracleError> {
        let mut rows = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row: ScriptRow =
                serde_json::from_str(&line).map_err(|e| OracleError::InvalidScript {
                    row: idx + 1,
                    message: e.to_string(),
                })?;
            rows.push(row);
        }
        Self::new(rows)
    }

    pub fn from_file(path: &Path) -> Result<Self, OracleError> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(std::io::BufReader::new(file))
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

impl GeneratorOracle for ScriptedOracle {
    fn step(
        &self,
        _prompt: &[String],
        generated: &[String],
        _rng: &mut dyn RngCore,
    ) -> Result<(String, Vec<f64>), OracleError> {
        let i = generated.len();
        let row = self
            .rows
            .get(i)
            .ok_or(OracleError::ScriptExhausted(i))?;
        Ok((row.token.clone(), row.probs.clone()))
    }

    fn is_terminal(&self, _prompt: &[String], generated: &[String]) -> bool {
        generated.len() >= self.rows.len()
    }
}

#[derive(Serialize)]
struct StepRequest<'a> {
    context: &'a [String],
    top_k: usize,
    seed: u64,
}

/// Wire response from a completion endpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepResponse {
    pub token: String,
    pub top_logprobs: Vec<(String, f64)>,
    /// True when this token ends the response.
    #[serde(default)]
    pub stop: bool,
}

/// HTTP-backed oracle. Each step POSTs `{context, top_k, seed}` and expects
/// `{token, top_logprobs, stop}`. Responses are cached by a hash of
/// `(context, seed)`, so shared branch prefixes and warm re-runs hit the
/// cache instead of the network.
pub struct HttpOracle {
    endpoint: String,
    auth_token: Option<String>,
    top_k: usize,
    seed: u64,
    client: reqwest::blocking::Client,
    cache: Mutex<HashMap<String, StepResponse>>,
}

impl HttpOracle {
    pub fn new(endpoint: impl Into<String>, seed: u64) -> Self {
        Self {
            endpoint: endpoint.into(),
            auth_token: None,
            top_k: 20,
            seed,
            client: reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(60))
                .build()
                .expect("default reqwest client"),
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn with_auth_token(mut self, token: impl Into<String>) -> Self {
        self.auth_token = Some(token.into());
        self
    }

    pub fn with_top_k(mut self, top_k: usize) -> Self {
        self.top_k = top_k.max(1);
        self
    }

    fn cache_key(&self, context: &[String]) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        for token in context {
            hasher.update((token.len() as u64).to_le_bytes());
            hasher.update(token.as_bytes());
        }
        format!("{:x}", hasher.finalize())
    }

    fn fetch(&self, context: &[String]) -> Result<StepResponse, OracleError> {
        let key = self.cache_key(context);
        if let Some(hit) = self.cache.lock().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        let mut request = self.client.post(&self.endpoint).json(&StepRequest {
            context,
            top_k: self.top_k,
            seed: self.seed,
        });
        if let Some(token) = &self.auth_token {
            request = request.bearer_auth(token);
        }
        let response = request
            .send()
            .map_err(|e| OracleError::Request(e.to_string()))?;
        if !response.status().is_success() {
            return Err(OracleError::Request(format!(
                "endpoint returned {}",
                response.status()
            )));
        }
        let parsed: StepResponse = response
            .json()
            .map_err(|e| OracleError::Request(format!("bad response body: {e}")))?;
        self.cache.lock().unwrap().insert(key, parsed.clone());
        Ok(parsed)
    }
}

impl GeneratorOracle for HttpOracle {
    fn step(
        &self,
        prompt: &[String],
        generated: &[String],
        _rng: &mut dyn RngCore,
    ) -> Result<(String, Vec<f64>), OracleError> {
        let context: Vec<String> = prompt.iter().chain(generated).cloned().collect();
        let response = self.fetch(&context)?;
        if response.top_logprobs.is_empty() {
            return Err(OracleError::Request("empty top_logprobs".into()));
        }
        let raw: Vec<f64> = response.top_logprobs.iter().map(|(_, lp)| lp.exp()).collect();
        let mass: f64 = raw.iter().sum();
        if !mass.is_finite() || mass <= 0.0 {
            return Err(OracleError::Request(format!(
                "top_logprobs mass {mass} is not positive"
            )));
        }
        let probs = raw.iter().map(|p| p / mass).collect();
        Ok((response.token, probs))
    }

    fn is_terminal(&self, prompt: &[String], generated: &[String]) -> bool {
        if generated.is_empty() {
            return false;
        }
        // The step that produced the last token knows whether it was final.
        let context: Vec<String> = prompt
            .iter()
            .chain(&generated[..generated.len() - 1])
            .cloned()
            .collect();
        let key = self.cache_key(&context);
        self.cache
            .lock()
            .unwrap()
            .get(&key)
            .map(|r| r.stop)
            .unwrap_or(false)
    }
}
