//! Chat-completion client abstraction, HTTP adapter, and response cache.

use std::collections::HashMap;
use std::fs;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::AugmentError;
use crate::http::{HttpConfig, JsonEndpoint};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: "user".into(),
            content: content.into(),
        }
    }
}

/// What a request asks for. Never sent over the wire; offline backends use it
/// in place of reading the prompt.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Task {
    #[default]
    Unspecified,
    Scenarios { count: usize, term: Option<String> },
    Generate { count: usize, term: Option<String>, lang: String },
    Translate { text: String, target_lang: String },
    Paraphrase { count: usize, text: String },
    Respell { text: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub top_p: f64,
    #[serde(skip)]
    pub task: Task,
}

impl ChatRequest {
    /// Content address of the request: model, messages, and sampling parameters.
    pub fn cache_key(&self) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(self).expect("request serializes"));
        hex::encode(h.finalize())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
}

pub trait LlmClient: Sync {
    fn complete(&self, req: &ChatRequest) -> Result<String, AugmentError>;
}

/// One generation model and its sampling profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub id: String,
    /// Overrides the client's default endpoint for this model.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    pub temperature: f64,
    pub top_p: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            id: "mock".into(),
            endpoint: None,
            temperature: 1.0,
            top_p: 1.0,
        }
    }
}

impl ModelConfig {
    pub fn new(id: impl Into<String>, temperature: f64, top_p: f64) -> Self {
        Self {
            id: id.into(),
            endpoint: None,
            temperature,
            top_p,
        }
    }

    pub fn request(&self, prompt: String, task: Task) -> ChatRequest {
        ChatRequest {
            model: self.id.clone(),
            messages: vec![ChatMessage::user(prompt)],
            temperature: self.temperature,
            top_p: self.top_p,
            task,
        }
    }
}

/// Posts `{"model", "messages", "temperature", "top_p"}` and reads `{"text"}`.
#[derive(Debug)]
pub struct HttpLlmClient {
    default: Option<JsonEndpoint>,
    per_model: HashMap<String, JsonEndpoint>,
}

impl HttpLlmClient {
    pub fn new(default: Option<HttpConfig>, models: &[ModelConfig]) -> Result<Self, AugmentError> {
        let default = default.map(JsonEndpoint::new).transpose()?;
        let mut per_model = HashMap::new();
        for m in models {
            if let Some(ep) = &m.endpoint {
                let cfg = HttpConfig {
                    endpoint: ep.clone(),
                    ..default.as_ref().map(|d| d.config().clone()).unwrap_or_default()
                };
                per_model.insert(m.id.clone(), JsonEndpoint::new(cfg)?);
            }
        }
        Ok(Self { default, per_model })
    }
}

impl LlmClient for HttpLlmClient {
    fn complete(&self, req: &ChatRequest) -> Result<String, AugmentError> {
        let ep = self
            .per_model
            .get(&req.model)
            .or(self.default.as_ref())
            .ok_or_else(|| AugmentError::NoEndpoint(req.model.clone()))?;
        let resp: ChatResponse = ep.post_json(req)?;
        Ok(resp.text)
    }
}

/// Memoizes completions in memory and, optionally, as content-addressed files.
pub struct CachedClient<C> {
    inner: C,
    dir: Option<PathBuf>,
    memory: Mutex<HashMap<String, String>>,
    misses: AtomicUsize,
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    model: String,
    text: String,
}

impl<C: LlmClient> CachedClient<C> {
    pub fn new(inner: C, dir: Option<PathBuf>) -> Self {
        Self {
            inner,
            dir,
            memory: Mutex::new(HashMap::new()),
            misses: AtomicUsize::new(0),
        }
    }

    /// Requests forwarded to the wrapped client so far.
    pub fn backend_calls(&self) -> usize {
        self.misses.load(Ordering::SeqCst)
    }

    pub fn inner(&self) -> &C {
        &self.inner
    }

    fn disk_get(&self, key: &str) -> Option<String> {
        let dir = self.dir.as_ref()?;
        let bytes = fs::read(dir.join(format!("{key}.json"))).ok()?;
        serde_json::from_slice::<CacheEntry>(&bytes).ok().map(|e| e.text)
    }

    fn disk_put(&self, key: &str, model: &str, text: &str) -> Result<(), AugmentError> {
        let Some(dir) = &self.dir else { return Ok(()) };
        let io = |e: std::io::Error| AugmentError::Cache(format!("{}: {e}", dir.display()));
        fs::create_dir_all(dir).map_err(io)?;
        let path = dir.join(format!("{key}.json"));
        let tmp = dir.join(format!("{key}.tmp{}", std::process::id()));
        let entry = CacheEntry {
            model: model.to_owned(),
            text: text.to_owned(),
        };
        fs::write(&tmp, serde_json::to_vec(&entry).expect("entry serializes")).map_err(io)?;
        fs::rename(&tmp, &path).map_err(io)
    }
}

impl<C: LlmClient> LlmClient for CachedClient<C> {
    fn complete(&self, req: &ChatRequest) -> Result<String, AugmentError> {
        let key = req.cache_key();
        if let Some(hit) = self.memory.lock().expect("cache lock").get(&key) {
            return Ok(hit.clone());
        }
        if let Some(hit) = self.disk_get(&key) {
            self.memory.lock().expect("cache lock").insert(key, hit.clone());
            return Ok(hit);
        }
        self.misses.fetch_add(1, Ordering::SeqCst);
        let text = self.inner.complete(req)?;
        self.disk_put(&key, &req.model, &text)?;
        self.memory.lock().expect("cache lock").insert(key, text.clone());
        Ok(text)
    }
}

impl<T: LlmClient + ?Sized> LlmClient for &T {
    fn complete(&self, req: &ChatRequest) -> Result<String, AugmentError> {
        (**self).complete(req)
    }
}

impl<T: LlmClient + ?Sized> LlmClient for Box<T> {
    fn complete(&self, req: &ChatRequest) -> Result<String, AugmentError> {
        (**self).complete(req)
    }
}

/// Splits a completion into items, one per non-empty line, stripping list
/// markers such as `1.`, `2)`, `-`, `*`.
pub fn split_items(text: &str) -> Vec<String> {
    text.lines()
        .map(|l| strip_marker(l.trim()).trim().to_owned())
        .filter(|l| !l.is_empty())
        .collect()
}

fn strip_marker(l: &str) -> &str {
    let digits = l.len() - l.trim_start_matches(|c: char| c.is_ascii_digit()).len();
    if digits > 0 {
        let rest = &l[digits..];
        return rest
            .strip_prefix('.')
            .or_else(|| rest.strip_prefix(')'))
            .filter(|r| r.starts_with(char::is_whitespace))
            .unwrap_or(l);
    }
    l.strip_prefix("- ").or_else(|| l.strip_prefix("* ")).unwrap_or(l)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Echo;
    impl LlmClient for Echo {
        fn complete(&self, req: &ChatRequest) -> Result<String, AugmentError> {
            Ok(req.messages[0].content.clone())
        }
    }

    #[test]
    fn cache_key_ignores_task_but_not_sampling() {
        let m = ModelConfig::new("m", 1.0, 1.0);
        let a = m.request("p".into(), Task::Unspecified);
        let b = m.request("p".into(), Task::Respell { text: "x".into() });
        assert_eq!(a.cache_key(), b.cache_key());
        let c = ModelConfig::new("m", 0.7, 0.8).request("p".into(), Task::Unspecified);
        assert_ne!(a.cache_key(), c.cache_key());
    }

    #[test]
    fn cached_client_hits_memory_then_disk() {
        let dir = tempfile::tempdir().unwrap();
        let req = ModelConfig::default().request("hello".into(), Task::Unspecified);
        let first = CachedClient::new(Echo, Some(dir.path().to_owned()));
        assert_eq!(first.complete(&req).unwrap(), "hello");
        first.complete(&req).unwrap();
        assert_eq!(first.backend_calls(), 1);
        let second = CachedClient::new(Echo, Some(dir.path().to_owned()));
        second.complete(&req).unwrap();
        assert_eq!(second.backend_calls(), 0);
    }

    #[test]
    fn wire_format() {
        let req = ModelConfig::new("gpt", 0.7, 0.8).request("hi".into(), Task::Respell { text: "x".into() });
        let v: serde_json::Value = serde_json::to_value(&req).unwrap();
        assert_eq!(
            v,
            serde_json::json!({
                "model": "gpt",
                "messages": [{"role": "user", "content": "hi"}],
                "temperature": 0.7,
                "top_p": 0.8
            })
        );
    }

    #[test]
    fn list_items() {
        assert_eq!(
            split_items("1. Alpha one\n2) Bravo two\n\n- Charlie\n* Delta\nplain"),
            ["Alpha one", "Bravo two", "Charlie", "Delta", "plain"]
        );
        assert_eq!(split_items("747 jets land"), ["747 jets land"]);
    }
}
