use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::keyword::KeywordBackend;
use super::prompts::prompt_step;
use super::Step;

/// Lowercase hex SHA-256 of the prompt's UTF-8 bytes.
pub fn fingerprint(prompt: &str) -> String {
    let digest = Sha256::digest(prompt.as_bytes());
    let mut out = String::with_capacity(64);
    for b in digest.iter() {
        let _ = write!(out, "{b:02x}");
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("no scripted response for prompt {fingerprint}")]
    NoScript { fingerprint: String },
    #[error("{0}")]
    Failed(String),
    #[error("backend config {path}: {reason}")]
    Config { path: String, reason: String },
}

/// A text-completion service.
pub trait CompletionBackend: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String, BackendError>;
    fn describe(&self) -> String;
}

impl<T: CompletionBackend + ?Sized> CompletionBackend for &T {
    fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        (**self).complete(prompt)
    }
    fn describe(&self) -> String {
        (**self).describe()
    }
}

impl<T: CompletionBackend + ?Sized> CompletionBackend for Box<T> {
    fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        (**self).complete(prompt)
    }
    fn describe(&self) -> String {
        (**self).describe()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchHit {
    pub title: String,
    pub snippet: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct RetrieverError(pub String);

/// A web-search service; results are in relevance order.
pub trait Retriever: Send + Sync {
    fn search(&self, query: &str) -> Result<Vec<SearchHit>, RetrieverError>;
}

impl<T: Retriever + ?Sized> Retriever for &T {
    fn search(&self, query: &str) -> Result<Vec<SearchHit>, RetrieverError> {
        (**self).search(query)
    }
}

impl<T: Retriever + ?Sized> Retriever for Box<T> {
    fn search(&self, query: &str) -> Result<Vec<SearchHit>, RetrieverError> {
        (**self).search(query)
    }
}

#[derive(Serialize, Deserialize)]
struct ScriptLine {
    fingerprint: String,
    response: String,
}

/// Replays responses keyed by prompt fingerprint.
#[derive(Debug, Clone, Default)]
pub struct ScriptedBackend {
    responses: HashMap<String, String>,
    label: String,
}

impl ScriptedBackend {
    pub fn new() -> Self {
        Self::default()
    }

    /// Scripts the answer to an exact prompt.
    pub fn insert(&mut self, prompt: &str, response: impl Into<String>) {
        self.responses.insert(fingerprint(prompt), response.into());
    }

    pub fn insert_fingerprint(&mut self, fingerprint: impl Into<String>, response: impl Into<String>) {
        self.responses.insert(fingerprint.into(), response.into());
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    /// Reads `{"fingerprint": .., "response": ..}` lines.
    pub fn from_jsonl(text: &str) -> Result<Self, String> {
        let mut b = ScriptedBackend::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let rec: ScriptLine = serde_json::from_str(line).map_err(|e| format!("line {}: {e}", i + 1))?;
            b.responses.insert(rec.fingerprint, rec.response);
        }
        Ok(b)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, BackendError> {
        let path = path.as_ref();
        let err = |reason: String| BackendError::Config {
            path: path.display().to_string(),
            reason,
        };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let mut b = Self::from_jsonl(&text).map_err(err)?;
        b.label = path.display().to_string();
        Ok(b)
    }

    /// Lines sorted by fingerprint, so output is stable.
    pub fn to_jsonl(&self) -> String {
        let sorted: BTreeMap<_, _> = self.responses.iter().collect();
        let mut out = String::new();
        for (fp, resp) in sorted {
            let line = ScriptLine {
                fingerprint: fp.clone(),
                response: resp.clone(),
            };
            out.push_str(&serde_json::to_string(&line).expect("script line serializes"));
            out.push('\n');
        }
        out
    }
}

impl CompletionBackend for ScriptedBackend {
    fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        let fp = fingerprint(prompt);
        self.responses
            .get(&fp)
            .cloned()
            .ok_or(BackendError::NoScript { fingerprint: fp })
    }

    fn describe(&self) -> String {
        format!("scripted({} responses{}{})", self.responses.len(), if self.label.is_empty() { "" } else { ", " }, self.label)
    }
}

/// Answers every prompt with random bytes (lossily decoded), fixed per
/// prompt and seed.
#[derive(Debug, Clone, Copy)]
pub struct FuzzBackend {
    pub seed: u64,
    pub max_len: usize,
}

impl FuzzBackend {
    pub fn new(seed: u64) -> Self {
        FuzzBackend { seed, max_len: 256 }
    }
}

impl CompletionBackend for FuzzBackend {
    fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        let digest = Sha256::digest(prompt.as_bytes());
        let mut key = [0u8; 32];
        key.copy_from_slice(&digest);
        for (k, s) in key.iter_mut().zip(self.seed.to_le_bytes()) {
            *k ^= s;
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        let len = rng.random_range(0..=self.max_len);
        let bytes: Vec<u8> = (0..len).map(|_| rng.random()).collect();
        Ok(String::from_utf8_lossy(&bytes).into_owned())
    }

    fn describe(&self) -> String {
        format!("fuzz(seed={}, max_len={})", self.seed, self.max_len)
    }
}

/// Routes prompts of the chosen steps to `overlay`, everything else to
/// `base`.
pub struct StagedBackend {
    pub base: Box<dyn CompletionBackend>,
    pub overlay: Box<dyn CompletionBackend>,
    pub steps: BTreeSet<Step>,
}

impl CompletionBackend for StagedBackend {
    fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        match prompt_step(prompt) {
            Some(s) if self.steps.contains(&s) => self.overlay.complete(prompt),
            _ => self.base.complete(prompt),
        }
    }

    fn describe(&self) -> String {
        let steps: Vec<_> = self.steps.iter().map(|s| s.label()).collect();
        format!(
            "staged(base={}, steps [{}] -> {})",
            self.base.describe(),
            steps.join(","),
            self.overlay.describe()
        )
    }
}

/// Passes prompts through and keeps every answer, to build a script.
pub struct RecordingBackend<B> {
    inner: B,
    log: Mutex<BTreeMap<String, String>>,
}

impl<B: CompletionBackend> RecordingBackend<B> {
    pub fn new(inner: B) -> Self {
        RecordingBackend {
            inner,
            log: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn script(&self) -> ScriptedBackend {
        let mut s = ScriptedBackend::new();
        for (fp, r) in self.log.lock().expect("recording lock").iter() {
            s.insert_fingerprint(fp.clone(), r.clone());
        }
        s
    }
}

impl<B: CompletionBackend> CompletionBackend for RecordingBackend<B> {
    fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        let out = self.inner.complete(prompt)?;
        self.log
            .lock()
            .expect("recording lock")
            .insert(fingerprint(prompt), out.clone());
        Ok(out)
    }

    fn describe(&self) -> String {
        format!("recording({})", self.inner.describe())
    }
}

/// Always returns no results.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoRetriever;

impl Retriever for NoRetriever {
    fn search(&self, _query: &str) -> Result<Vec<SearchHit>, RetrieverError> {
        Ok(Vec::new())
    }
}

#[derive(Deserialize)]
struct RetrievalLine {
    query: String,
    results: Vec<SearchHit>,
}

/// Canned search results keyed by case-insensitive query.
#[derive(Debug, Clone, Default)]
pub struct StaticRetriever {
    results: HashMap<String, Vec<SearchHit>>,
}

impl StaticRetriever {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, query: &str, hits: Vec<SearchHit>) {
        self.results.insert(query.trim().to_lowercase(), hits);
    }

    /// Reads `{"query": .., "results": [{"title": .., "snippet": ..}]}` lines.
    pub fn from_jsonl(text: &str) -> Result<Self, String> {
        let mut r = StaticRetriever::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let rec: RetrievalLine = serde_json::from_str(line).map_err(|e| format!("line {}: {e}", i + 1))?;
            r.insert(&rec.query, rec.results);
        }
        Ok(r)
    }
}

impl Retriever for StaticRetriever {
    fn search(&self, query: &str) -> Result<Vec<SearchHit>, RetrieverError> {
        Ok(self.results.get(&query.trim().to_lowercase()).cloned().unwrap_or_default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Scripted,
    Keyword,
    Fuzz,
}

/// Backend configuration file (TOML). Relative paths resolve against the
/// file's directory.
///
/// ```toml
/// kind = "fuzz"          # scripted | keyword | fuzz
/// seed = 7               # fuzz
/// script = "t.jsonl"     # scripted, or the base of a staged fuzz
/// fuzz_steps = ["III"]   # fuzz only these steps; others use the base
/// ```
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    #[serde(default)]
    pub script: Option<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub fuzz_steps: Vec<Step>,
}

fn config_text(path: &Path) -> Result<String, BackendError> {
    std::fs::read_to_string(path).map_err(|e| BackendError::Config {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    match base.parent() {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p.to_path_buf(),
    }
}

impl BackendConfig {
    pub fn read(path: impl AsRef<Path>) -> Result<Self, BackendError> {
        let path = path.as_ref();
        let mut cfg: BackendConfig = toml::from_str(&config_text(path)?).map_err(|e| BackendError::Config {
            path: path.display().to_string(),
            reason: e.message().to_string(),
        })?;
        cfg.script = cfg.script.map(|s| resolve(path, &s));
        Ok(cfg)
    }

    pub fn build(&self) -> Result<Box<dyn CompletionBackend>, BackendError> {
        let scripted = || -> Result<Box<dyn CompletionBackend>, BackendError> {
            match &self.script {
                Some(p) => Ok(Box::new(ScriptedBackend::read(p)?)),
                None => Err(BackendError::Config {
                    path: "(backend)".into(),
                    reason: "kind `scripted` needs `script`".into(),
                }),
            }
        };
        Ok(match self.kind {
            BackendKind::Scripted => scripted()?,
            BackendKind::Keyword => Box::new(KeywordBackend::new()),
            BackendKind::Fuzz => {
                let fuzz = FuzzBackend::new(self.seed.unwrap_or(0));
                if self.fuzz_steps.is_empty() {
                    Box::new(fuzz)
                } else {
                    let base: Box<dyn CompletionBackend> = if self.script.is_some() {
                        scripted()?
                    } else {
                        Box::new(KeywordBackend::new())
                    };
                    Box::new(StagedBackend {
                        base,
                        overlay: Box::new(fuzz),
                        steps: self.fuzz_steps.iter().copied().collect(),
                    })
                }
            }
        })
    }
}

/// Retriever configuration file (TOML): `kind = "none"`, or
/// `kind = "static"` with `file = "results.jsonl"`.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetrieverConfig {
    pub kind: String,
    #[serde(default)]
    pub file: Option<PathBuf>,
}

impl RetrieverConfig {
    pub fn read(path: impl AsRef<Path>) -> Result<Self, BackendError> {
        let path = path.as_ref();
        let mut cfg: RetrieverConfig = toml::from_str(&config_text(path)?).map_err(|e| BackendError::Config {
            path: path.display().to_string(),
            reason: e.message().to_string(),
        })?;
        cfg.file = cfg.file.map(|f| resolve(path, &f));
        Ok(cfg)
    }

    pub fn build(&self) -> Result<Box<dyn Retriever>, BackendError> {
        let bad = |reason: String| BackendError::Config {
            path: "(retriever)".into(),
            reason,
        };
        match (self.kind.as_str(), &self.file) {
            ("none", _) => Ok(Box::new(NoRetriever)),
            ("static", Some(f)) => {
                let text = std::fs::read_to_string(f).map_err(|e| bad(format!("{}: {e}", f.display())))?;
                Ok(Box::new(StaticRetriever::from_jsonl(&text).map_err(bad)?))
            }
            ("static", None) => Err(bad("kind `static` needs `file`".into())),
            (other, _) => Err(bad(format!("unknown retriever kind `{other}`"))),
        }
    }
}
