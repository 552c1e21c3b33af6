//! Blocking JSON-over-HTTP transport shared by the remote adapters.

use std::thread;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
#[error("request to {endpoint} failed after {attempts} attempt(s): {message}")]
pub struct TransportError {
    pub endpoint: String,
    pub attempts: u32,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpConfig {
    pub endpoint: String,
    pub timeout_secs: f64,
    /// Total attempts including the first.
    pub attempts: u32,
    /// Delay before the second attempt; doubles after each failure.
    pub backoff_ms: u64,
    #[serde(skip_serializing)]
    pub api_key: Option<String>,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            endpoint: String::new(),
            timeout_secs: 60.0,
            attempts: 3,
            backoff_ms: 250,
            api_key: None,
        }
    }
}

impl HttpConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            ..Self::default()
        }
    }
}

/// A reusable client bound to one endpoint.
#[derive(Debug, Clone)]
pub struct JsonEndpoint {
    client: reqwest::blocking::Client,
    config: HttpConfig,
}

impl JsonEndpoint {
    pub fn new(config: HttpConfig) -> Result<Self, TransportError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_secs.max(0.001)))
            .build()
            .map_err(|e| TransportError {
                endpoint: config.endpoint.clone(),
                attempts: 0,
                message: e.to_string(),
            })?;
        Ok(Self { client, config })
    }

    pub fn config(&self) -> &HttpConfig {
        &self.config
    }

    /// Raw response body of a successful POST, retried with exponential backoff.
    pub fn post_bytes<Req: Serialize + ?Sized>(&self, body: &Req) -> Result<Vec<u8>, TransportError> {
        let attempts = self.config.attempts.max(1);
        let mut delay = Duration::from_millis(self.config.backoff_ms);
        let mut last = String::new();
        for attempt in 1..=attempts {
            match self.try_post(body) {
                Ok(bytes) => return Ok(bytes),
                Err(e) => {
                    tracing::debug!(endpoint = %self.config.endpoint, attempt, error = %e, "request failed");
                    last = e;
                }
            }
            if attempt < attempts {
                thread::sleep(delay);
                delay *= 2;
            }
        }
        Err(TransportError {
            endpoint: self.config.endpoint.clone(),
            attempts,
            message: last,
        })
    }

    pub fn post_json<Req, Resp>(&self, body: &Req) -> Result<Resp, TransportError>
    where
        Req: Serialize + ?Sized,
        Resp: DeserializeOwned,
    {
        let bytes = self.post_bytes(body)?;
        serde_json::from_slice(&bytes).map_err(|e| TransportError {
            endpoint: self.config.endpoint.clone(),
            attempts: 1,
            message: format!("invalid response body: {e}"),
        })
    }

    fn try_post<Req: Serialize + ?Sized>(&self, body: &Req) -> Result<Vec<u8>, String> {
        let mut req = self.client.post(&self.config.endpoint).json(body);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| e.to_string())?;
        let status = resp.status();
        if !status.is_success() {
            return Err(format!("HTTP {status}"));
        }
        resp.bytes().map(|b| b.to_vec()).map_err(|e| e.to_string())
    }
}
