//! Optimized-variant generation through a language-model service.
//!
//! The model is asked to rewrite a reference solution using named
//! optimization strategies and to answer with a JSON object
//! `{"strategies": [...], "code": "..."}`, or `{"strategies": ["None"]}` when
//! it sees nothing to optimize. Answers are checked before use: strategy tags
//! must be known, `None` must stand alone without code, and code must parse.
//!
//! [`StubProvider`] answers from a JSONL fixture of the same shape keyed by
//! `task_id`; [`HttpProvider`] talks to a chat-completion-style endpoint and can
//! record every accepted answer into such a fixture for replay.

use std::collections::HashMap;
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::TaskSpec;
use crate::surface::syntax::parses;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Strategy {
    Algorithmic,
    DataStructures,
    ColdPath,
    HotPath,
    Memoization,
    None,
}

impl Strategy {
    pub const OPTIMIZING: [Strategy; 5] = [
        Strategy::Algorithmic,
        Strategy::DataStructures,
        Strategy::ColdPath,
        Strategy::HotPath,
        Strategy::Memoization,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Algorithmic => "Algorithmic",
            Strategy::DataStructures => "DataStructures",
            Strategy::ColdPath => "ColdPath",
            Strategy::HotPath => "HotPath",
            Strategy::Memoization => "Memoization",
            Strategy::None => "None",
        }
    }

    fn description(self) -> &'static str {
        match self {
            Strategy::Algorithmic => "replace the algorithm with an asymptotically faster one",
            Strategy::DataStructures => "switch to data structures with cheaper operations",
            Strategy::ColdPath => "simplify or shortcut rarely taken paths and edge cases",
            Strategy::HotPath => "tighten the code that runs most often, such as inner loops",
            Strategy::Memoization => "cache results of repeated computations",
            Strategy::None => "the code is already optimal",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Accepts any case and ignores spaces, `_` and `-`: "hot path", "HOT_PATH".
impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| !matches!(c, ' ' | '_' | '-'))
            .collect::<String>()
            .to_ascii_lowercase();
        let all = Strategy::OPTIMIZING.into_iter().chain([Strategy::None]);
        for st in all {
            if st.as_str().to_ascii_lowercase() == key {
                return Ok(st);
            }
        }
        Err(format!("unknown strategy {s:?}"))
    }
}

impl TryFrom<String> for Strategy {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Strategy> for String {
    fn from(s: Strategy) -> Self {
        s.as_str().to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OptimizationOutcome {
    Optimized { code: String, strategies: Vec<Strategy> },
    NotOptimizable,
}

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Schema { path: PathBuf, line: usize, message: String },
    #[error("invalid provider configuration: {0}")]
    Config(String),
}

/// A provider's answer before validation; also the fixture line format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub task_id: String,
    #[serde(default)]
    pub code: Option<String>,
    pub strategies: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
struct ModelAnswer {
    strategies: Vec<String>,
    #[serde(default)]
    code: Option<String>,
}

/// Checks tags and the `None` rule; does not look at the code itself.
fn check_tags(strategies: &[String], code: Option<&str>) -> Result<Vec<Strategy>, String> {
    if strategies.is_empty() {
        return Err("no strategies given".into());
    }
    let parsed = strategies.iter().map(|s| s.parse()).collect::<Result<Vec<Strategy>, _>>()?;
    let has_code = code.is_some_and(|c| !c.trim().is_empty());
    if parsed.contains(&Strategy::None) {
        if parsed.len() > 1 {
            return Err("\"None\" cannot be combined with other strategies".into());
        }
        if has_code {
            return Err("an answer tagged \"None\" must not carry code".into());
        }
    } else if !has_code {
        return Err("answer carries no code".into());
    }
    Ok(parsed)
}

/// Turns a raw answer into an outcome: the code must parse and differ from
/// the reference.
fn accept(task: &TaskSpec, strategies: &[String], code: Option<&str>) -> Result<OptimizationOutcome, String> {
    let tags = check_tags(strategies, code)?;
    if tags == [Strategy::None] {
        return Ok(OptimizationOutcome::NotOptimizable);
    }
    let code = code.expect("checked above");
    if !parses(code) {
        return Err("returned code does not parse".into());
    }
    if code == task.reference_code {
        return Err("returned code is identical to the reference".into());
    }
    Ok(OptimizationOutcome::Optimized {
        code: code.to_string(),
        strategies: tags,
    })
}

pub trait OptimizationProvider: Send + Sync {
    fn request(&self, task: &TaskSpec) -> Result<OptimizationOutcome, OptimizerError>;
}

pub fn request_optimized_variant(
    task: &TaskSpec,
    provider: &dyn OptimizationProvider,
) -> Result<OptimizationOutcome, OptimizerError> {
    provider.request(task)
}

/// Runs `provider` over `tasks` with at most `in_flight` concurrent requests.
/// Results come back in task order.
pub fn request_all(
    tasks: &[TaskSpec],
    provider: &dyn OptimizationProvider,
    in_flight: usize,
) -> Vec<Result<OptimizationOutcome, OptimizerError>> {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<OptimizationOutcome, OptimizerError>>>> =
        tasks.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..in_flight.max(1).min(tasks.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(task) = tasks.get(i) else { break };
                let r = provider.request(task);
                *slots[i].lock().expect("slot lock") = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.into_inner().expect("slot lock").expect("every task answered"))
        .collect()
}

/// Answers from a fixture file without any network use.
#[derive(Debug, Clone)]
pub struct StubProvider {
    entries: HashMap<String, FixtureEntry>,
}

impl StubProvider {
    pub fn from_fixture(path: impl AsRef<Path>) -> Result<Self, OptimizerError> {
        let path = path.as_ref();
        let io = |source| OptimizerError::Io {
            path: path.to_path_buf(),
            source,
        };
        let schema = |line, message: String| OptimizerError::Schema {
            path: path.to_path_buf(),
            line,
            message,
        };
        let file = File::open(path).map_err(io)?;
        let mut entries = HashMap::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(io)?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: FixtureEntry = serde_json::from_str(&line).map_err(|e| schema(i + 1, e.to_string()))?;
            check_tags(&entry.strategies, entry.code.as_deref()).map_err(|m| schema(i + 1, m))?;
            if entries.contains_key(&entry.task_id) {
                return Err(schema(i + 1, format!("duplicate task_id {:?}", entry.task_id)));
            }
            entries.insert(entry.task_id.clone(), entry);
        }
        Ok(StubProvider { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl OptimizationProvider for StubProvider {
    fn request(&self, task: &TaskSpec) -> Result<OptimizationOutcome, OptimizerError> {
        let entry = self
            .entries
            .get(&task.task_id)
            .ok_or_else(|| OptimizerError::MalformedResponse(format!("no fixture entry for task {:?}", task.task_id)))?;
        accept(task, &entry.strategies, entry.code.as_deref()).map_err(OptimizerError::MalformedResponse)
    }
}

pub const DEFAULT_API_KEY_ENV: &str = "SEMDIFF_LLM_KEY";
pub const DEFAULT_RESPONSE_POINTER: &str = "/choices/0/message/content";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub timeout_seconds: f64,
    pub max_retries: u32,
    pub max_in_flight: usize,
    /// Request body with `{{model}}` and `{{prompt}}` placeholders, each
    /// replaced by a JSON string literal. Chat-completion shape when unset.
    pub body_template: Option<String>,
    /// JSON pointer to the answer text in the response body.
    pub response_pointer: String,
    /// Appends every accepted answer here, in fixture format.
    pub cache_fixture: Option<PathBuf>,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            endpoint: String::new(),
            model: String::new(),
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            timeout_seconds: 120.0,
            max_retries: 2,
            max_in_flight: 4,
            body_template: None,
            response_pointer: DEFAULT_RESPONSE_POINTER.into(),
            cache_fixture: None,
        }
    }
}

impl ProviderConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.endpoint.is_empty() {
            return Err("endpoint is not set".into());
        }
        if !(self.timeout_seconds.is_finite() && self.timeout_seconds > 0.0) {
            return Err(format!("timeout {} must be positive", self.timeout_seconds));
        }
        if self.max_in_flight == 0 {
            return Err("max_in_flight must be at least 1".into());
        }
        Ok(())
    }
}

const DEFAULT_BODY: &str =
    r#"{"model": {{model}}, "temperature": 0, "messages": [{"role": "user", "content": {{prompt}}}]}"#;

/// The instruction sent for one task.
pub fn build_prompt(task: &TaskSpec) -> String {
    let mut p = String::from(
        "You are given a correct Python solution to a programming task. Rewrite it to run faster \
         while computing exactly the same results for every valid input. Use one or more of these strategies:\n",
    );
    for s in Strategy::OPTIMIZING {
        p.push_str(&format!("- {}: {}\n", s.as_str(), s.description()));
    }
    p.push_str(
        "If the solution cannot be made meaningfully faster, use the strategy None and give no code.\n\
         Keep the same function name and signature (or, for a full program, the same input and output format).\n\
         Reply with a single JSON object and nothing else, of the form \
         {\"strategies\": [\"Algorithmic\"], \"code\": \"<complete optimized source>\"} \
         or {\"strategies\": [\"None\"], \"code\": null}.\n",
    );
    if let Some(desc) = &task.nl_description {
        p.push_str("\nTask description:\n");
        p.push_str(desc);
        p.push('\n');
    }
    p.push_str("\nSolution:\n```python\n");
    p.push_str(&task.reference_code);
    if !task.reference_code.ends_with('\n') {
        p.push('\n');
    }
    p.push_str("```\n");
    p
}

/// Extracts the JSON answer from model text, tolerating code fences and
/// surrounding prose.
fn parse_answer(text: &str) -> Result<ModelAnswer, String> {
    let start = text.find('{').ok_or("no JSON object in reply")?;
    let end = text.rfind('}').ok_or("no JSON object in reply")?;
    if end < start {
        return Err("no JSON object in reply".into());
    }
    serde_json::from_str(&text[start..=end]).map_err(|e| format!("reply is not the expected JSON: {e}"))
}

enum Attempt {
    Done(OptimizationOutcome),
    Retry(String),
    Fatal(OptimizerError),
}

pub struct HttpProvider {
    cfg: ProviderConfig,
    key: String,
    agent: ureq::Agent,
    cache: Option<Mutex<File>>,
    backoff: Duration,
}

impl HttpProvider {
    /// Reads the API key from the configured environment variable.
    pub fn new(cfg: ProviderConfig) -> Result<Self, OptimizerError> {
        let key = std::env::var(&cfg.api_key_env).map_err(|_| {
            OptimizerError::Transport(format!("environment variable {} is not set", cfg.api_key_env))
        })?;
        Self::with_key(cfg, key)
    }

    pub fn with_key(cfg: ProviderConfig, key: String) -> Result<Self, OptimizerError> {
        cfg.validate().map_err(OptimizerError::Config)?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(cfg.timeout_seconds)))
            .http_status_as_error(false)
            .build()
            .into();
        let cache = match &cfg.cache_fixture {
            Some(path) => Some(Mutex::new(
                OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(path)
                    .map_err(|source| OptimizerError::Io {
                        path: path.clone(),
                        source,
                    })?,
            )),
            None => None,
        };
        Ok(HttpProvider {
            cfg,
            key,
            agent,
            cache,
            backoff: Duration::from_millis(500),
        })
    }

    /// Base delay between retries (doubled each attempt).
    pub fn with_backoff(mut self, backoff: Duration) -> Self {
        self.backoff = backoff;
        self
    }

    fn body(&self, prompt: &str) -> String {
        let literal = |s: &str| serde_json::Value::String(s.to_string()).to_string();
        self.cfg
            .body_template
            .as_deref()
            .unwrap_or(DEFAULT_BODY)
            .replace("{{model}}", &literal(&self.cfg.model))
            .replace("{{prompt}}", &literal(prompt))
    }

    fn attempt(&self, task: &TaskSpec, body: &str) -> Attempt {
        let sent = self
            .agent
            .post(&self.cfg.endpoint)
            .header("Authorization", &format!("Bearer {}", self.key))
            .header("Content-Type", "application/json")
            .send(body);
        let mut response = match sent {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(format!("request failed: {e}")),
        };
        let status = response.status().as_u16();
        let text = match response.body_mut().read_to_string() {
            Ok(t) => t,
            Err(e) => return Attempt::Retry(format!("reading the response failed: {e}")),
        };
        match status {
            200..=299 => {}
            401 | 403 => return Attempt::Fatal(OptimizerError::Transport(format!("authentication failed (HTTP {status})"))),
            429 | 500..=599 => return Attempt::Retry(format!("HTTP {status}")),
            _ => return Attempt::Fatal(OptimizerError::Transport(format!("HTTP {status}: {text}"))),
        }
        let json: serde_json::Value = match serde_json::from_str(&text) {
            Ok(v) => v,
            Err(e) => return Attempt::Retry(format!("response body is not JSON: {e}")),
        };
        let Some(content) = json.pointer(&self.cfg.response_pointer).and_then(|v| v.as_str()) else {
            return Attempt::Retry(format!("no text at {}", self.cfg.response_pointer));
        };
        let answer = match parse_answer(content) {
            Ok(a) => a,
            Err(e) => return Attempt::Retry(e),
        };
        match accept(task, &answer.strategies, answer.code.as_deref()) {
            Ok(outcome) => {
                if let Err(e) = self.record(task, &answer) {
                    log::warn!("could not cache answer for {}: {e}", task.task_id);
                }
                Attempt::Done(outcome)
            }
            Err(e) => Attempt::Retry(e),
        }
    }

    fn record(&self, task: &TaskSpec, answer: &ModelAnswer) -> std::io::Result<()> {
        let Some(cache) = &self.cache else { return Ok(()) };
        let entry = FixtureEntry {
            task_id: task.task_id.clone(),
            code: answer.code.clone().filter(|c| !c.trim().is_empty()),
            strategies: answer.strategies.clone(),
        };
        let mut line = serde_json::to_string(&entry).map_err(std::io::Error::other)?;
        line.push('\n');
        let mut f = cache.lock().expect("cache lock");
        f.write_all(line.as_bytes())?;
        f.flush()
    }
}

impl OptimizationProvider for HttpProvider {
    fn request(&self, task: &TaskSpec) -> Result<OptimizationOutcome, OptimizerError> {
        let body = self.body(&build_prompt(task));
        let mut last = String::new();
        let mut transport_only = true;
        for attempt in 0..=self.cfg.max_retries {
            if attempt > 0 {
                std::thread::sleep(self.backoff * 2u32.saturating_pow(attempt - 1));
            }
            match self.attempt(task, &body) {
                Attempt::Done(outcome) => return Ok(outcome),
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry(why) => {
                    log::debug!("task {} attempt {}: {why}", task.task_id, attempt + 1);
                    transport_only &= why.starts_with("request failed") || why.starts_with("HTTP");
                    last = why;
                }
            }
        }
        if transport_only {
            Err(OptimizerError::Transport(last))
        } else {
            Err(OptimizerError::MalformedResponse(last))
        }
    }
}
