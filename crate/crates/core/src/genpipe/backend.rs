//! Model backends: a chat-completions HTTP client, cassette replay, and a
//! recorder that wraps any backend and appends to a cassette.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::{GenError, Prompt};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BackendKind {
    HttpChat,
    Replay,
}

pub trait VlmBackend: Send + Sync {
    fn kind(&self) -> BackendKind;
    fn model(&self) -> &str;
    /// Identifies the cassette read or written, if any.
    fn cassette_id(&self) -> Option<String> {
        None
    }
    fn complete(&self, prompt: &Prompt) -> Result<String, GenError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CassetteRecord {
    pub fingerprint: String,
    pub response: String,
}

/// Recorded responses keyed by prompt fingerprint, in recording order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Cassette {
    records: Vec<CassetteRecord>,
    index: HashMap<String, usize>,
}

impl Cassette {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_records(records: Vec<CassetteRecord>) -> Result<Self, GenError> {
        let mut c = Self::new();
        for r in records {
            if c.index.contains_key(&r.fingerprint) {
                return Err(GenError::Cassette(format!("duplicate fingerprint {}", r.fingerprint)));
            }
            c.push(r);
        }
        Ok(c)
    }

    fn push(&mut self, r: CassetteRecord) {
        self.index.insert(r.fingerprint.clone(), self.records.len());
        self.records.push(r);
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, GenError> {
        let records: Vec<CassetteRecord> =
            serde_json::from_slice(bytes).map_err(|e| GenError::Cassette(e.to_string()))?;
        Self::from_records(records)
    }

    pub fn load(path: &Path) -> Result<Self, GenError> {
        let bytes = fs::read(path).map_err(|e| GenError::Cassette(format!("{}: {e}", path.display())))?;
        Self::parse(&bytes)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.records).expect("records serialize")
    }

    pub fn save(&self, path: &Path) -> Result<(), GenError> {
        // Write-then-rename so readers never see a half-written file.
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, self.to_json())?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn get(&self, fingerprint: &str) -> Option<&str> {
        self.index.get(fingerprint).map(|&i| self.records[i].response.as_str())
    }

    /// Adds a record unless the fingerprint is already present. Returns
    /// whether it was added.
    pub fn insert(&mut self, fingerprint: String, response: String) -> bool {
        if self.index.contains_key(&fingerprint) {
            return false;
        }
        self.push(CassetteRecord { fingerprint, response });
        true
    }

    pub fn records(&self) -> &[CassetteRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Short content hash used as the cassette id in provenance records.
    pub fn content_id(&self) -> String {
        hex::encode(&Sha256::digest(self.to_json().as_bytes())[..6])
    }
}

/// Serves responses from a cassette and never touches the network.
#[derive(Debug, Clone)]
pub struct ReplayBackend {
    cassette: Arc<Cassette>,
    model: String,
    id: String,
}

impl ReplayBackend {
    pub fn new(cassette: Cassette) -> Self {
        let id = cassette.content_id();
        Self {
            cassette: Arc::new(cassette),
            model: "replay".into(),
            id,
        }
    }

    pub fn open(path: &Path) -> Result<Self, GenError> {
        Ok(Self::new(Cassette::load(path)?))
    }

    pub fn with_model(mut self, model: impl Into<String>) -> Self {
        self.model = model.into();
        self
    }

    pub fn cassette(&self) -> &Cassette {
        &self.cassette
    }
}

impl VlmBackend for ReplayBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Replay
    }

    fn model(&self) -> &str {
        &self.model
    }

    fn cassette_id(&self) -> Option<String> {
        Some(self.id.clone())
    }

    fn complete(&self, prompt: &Prompt) -> Result<String, GenError> {
        let fp = prompt.fingerprint();
        self.cassette
            .get(&fp)
            .map(str::to_string)
            .ok_or(GenError::CassetteMiss { fingerprint: fp })
    }
}

/// Backend built from a closure. Handy for tests and for producing cassettes
/// from a scripted source.
pub struct FnBackend<F> {
    model: String,
    f: F,
}

impl<F> FnBackend<F>
where
    F: Fn(&Prompt) -> Result<String, GenError> + Send + Sync,
{
    pub fn new(model: impl Into<String>, f: F) -> Self {
        Self { model: model.into(), f }
    }
}

impl<F> VlmBackend for FnBackend<F>
where
    F: Fn(&Prompt) -> Result<String, GenError> + Send + Sync,
{
    fn kind(&self) -> BackendKind {
        BackendKind::HttpChat
    }

    fn model(&self) -> &str {
        &self.model
    }

    fn complete(&self, prompt: &Prompt) -> Result<String, GenError> {
        (self.f)(prompt)
    }
}

/// Passes requests to `inner` and saves every new response to a cassette
/// file. Holds `<cassette>.lock` for its lifetime so two recorders cannot
/// write the same file.
pub struct RecordingBackend<B> {
    inner: B,
    path: PathBuf,
    lock_path: PathBuf,
    _lock: File,
    cassette: Mutex<Cassette>,
}

impl<B: VlmBackend> RecordingBackend<B> {
    /// Opens or creates the cassette at `path`. Existing records are kept and
    /// served without calling `inner`.
    pub fn open(inner: B, path: impl Into<PathBuf>) -> Result<Self, GenError> {
        let path = path.into();
        let lock_path = path.with_extension("json.lock");
        let lock = OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&lock_path)
            .map_err(|e| GenError::Cassette(format!("cannot lock {}: {e}", path.display())))?;
        let cassette = if path.exists() {
            Cassette::load(&path)
        } else {
            Ok(Cassette::new())
        };
        let cassette = match cassette {
            Ok(c) => c,
            Err(e) => {
                let _ = fs::remove_file(&lock_path);
                return Err(e);
            }
        };
        Ok(Self {
            inner,
            path,
            lock_path,
            _lock: lock,
            cassette: Mutex::new(cassette),
        })
    }

    pub fn cassette(&self) -> Cassette {
        self.cassette.lock().expect("cassette lock").clone()
    }
}

impl<B> Drop for RecordingBackend<B> {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.lock_path);
    }
}

impl<B: VlmBackend> VlmBackend for RecordingBackend<B> {
    fn kind(&self) -> BackendKind {
        self.inner.kind()
    }

    fn model(&self) -> &str {
        self.inner.model()
    }

    fn cassette_id(&self) -> Option<String> {
        Some(self.path.display().to_string())
    }

    fn complete(&self, prompt: &Prompt) -> Result<String, GenError> {
        let fp = prompt.fingerprint();
        if let Some(hit) = self.cassette.lock().expect("cassette lock").get(&fp) {
            return Ok(hit.to_string());
        }
        let response = self.inner.complete(prompt)?;
        let mut c = self.cassette.lock().expect("cassette lock");
        if c.insert(fp, response.clone()) {
            c.save(&self.path)?;
        }
        Ok(response)
    }
}

/// Counting semaphore limiting concurrent HTTP requests.
#[derive(Debug)]
struct InFlight {
    limit: usize,
    used: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a InFlight);

impl InFlight {
    fn new(limit: usize) -> Self {
        Self {
            limit: limit.max(1),
            used: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut used = self.used.lock().expect("semaphore");
        while *used >= self.limit {
            used = self.freed.wait(used).expect("semaphore");
        }
        *used += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.used.lock().expect("semaphore") -= 1;
        self.0.freed.notify_one();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpConfig {
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    pub token_env: String,
    /// `None` leaves the provider default in place.
    pub temperature: Option<f64>,
    pub timeout_secs: u64,
    pub max_in_flight: usize,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            endpoint: String::new(),
            model: String::new(),
            token_env: "VLM_API_KEY".into(),
            temperature: None,
            timeout_secs: 120,
            max_in_flight: 4,
        }
    }
}

impl HttpConfig {
    /// Reads `key = value` lines; `#` starts a comment. Recognised keys:
    /// endpoint, model, token_env, temperature, timeout_secs, max_in_flight.
    pub fn parse_kv(text: &str) -> Result<Self, GenError> {
        let mut cfg = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |m: String| GenError::Config(format!("line {}: {m}", n + 1));
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key = value, found {line:?}")))?;
            let (k, v) = (k.trim(), v.trim().trim_matches('"'));
            match k {
                "endpoint" => cfg.endpoint = v.to_string(),
                "model" => cfg.model = v.to_string(),
                "token_env" => cfg.token_env = v.to_string(),
                "temperature" => {
                    cfg.temperature = Some(v.parse().map_err(|_| bad(format!("temperature: {v:?}")))?)
                }
                "timeout_secs" => cfg.timeout_secs = v.parse().map_err(|_| bad(format!("timeout_secs: {v:?}")))?,
                "max_in_flight" => {
                    cfg.max_in_flight = v.parse().map_err(|_| bad(format!("max_in_flight: {v:?}")))?;
                    if cfg.max_in_flight == 0 {
                        return Err(bad("max_in_flight must be at least 1".into()));
                    }
                }
                other => return Err(bad(format!("unknown key {other:?}"))),
            }
        }
        if cfg.endpoint.is_empty() || cfg.model.is_empty() {
            return Err(GenError::Config("endpoint and model are required".into()));
        }
        Ok(cfg)
    }
}

/// Chat-completions client. Safe to share between threads; at most
/// `max_in_flight` requests run at once.
pub struct HttpChatBackend {
    cfg: HttpConfig,
    agent: ureq::Agent,
    in_flight: InFlight,
}

impl std::fmt::Debug for HttpChatBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpChatBackend").field("cfg", &self.cfg).finish()
    }
}

impl HttpChatBackend {
    pub fn new(cfg: HttpConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(cfg.timeout_secs)))
            .build()
            .into();
        Self {
            in_flight: InFlight::new(cfg.max_in_flight),
            cfg,
            agent,
        }
    }

    pub fn config(&self) -> &HttpConfig {
        &self.cfg
    }

    /// Request body: system message, then one user message holding the text
    /// followed by each attachment as a base64 data URL.
    pub fn request_body(&self, prompt: &Prompt) -> Result<Value, GenError> {
        let mut content = vec![json!({"type": "text", "text": prompt.user})];
        for a in &prompt.attachments {
            let data = base64::engine::general_purpose::STANDARD.encode(a.bytes()?);
            content.push(json!({
                "type": "image_url",
                "image_url": {"url": format!("data:{};base64,{data}", a.media_type())}
            }));
        }
        let mut messages = Vec::new();
        if !prompt.system.is_empty() {
            messages.push(json!({"role": "system", "content": prompt.system}));
        }
        messages.push(json!({"role": "user", "content": content}));
        let mut body = json!({"model": self.cfg.model, "messages": messages});
        if let Some(t) = self.cfg.temperature {
            body["temperature"] = json!(t);
        }
        Ok(body)
    }
}

impl VlmBackend for HttpChatBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::HttpChat
    }

    fn model(&self) -> &str {
        &self.cfg.model
    }

    fn complete(&self, prompt: &Prompt) -> Result<String, GenError> {
        let token = std::env::var(&self.cfg.token_env).map_err(|_| {
            GenError::Backend(format!("environment variable {} is not set", self.cfg.token_env))
        })?;
        let body = self.request_body(prompt)?;
        let _permit = self.in_flight.acquire();
        let mut resp = self
            .agent
            .post(&self.cfg.endpoint)
            .header("Authorization", &format!("Bearer {token}"))
            .send_json(&body)
            .map_err(|e| GenError::Backend(format!("request to {} failed: {e}", self.cfg.endpoint)))?;
        let v: Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| GenError::Backend(format!("unreadable response: {e}")))?;
        let content = &v["choices"][0]["message"]["content"];
        match content {
            Value::String(s) => Ok(s.clone()),
            Value::Array(parts) => Ok(parts
                .iter()
                .filter_map(|p| p["text"].as_str())
                .collect::<Vec<_>>()
                .join("")),
            _ => Err(GenError::Backend("response has no choices[0].message.content".into())),
        }
    }
}
