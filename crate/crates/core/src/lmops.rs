//! Prompt construction, LM invocation over the chat-completion wire
//! protocol, free-text response parsing into feature sets, and deterministic
//! scripted/replay operators for offline runs.

use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::fset::FeatureSet;

/// The default persona list used for the evolution role-plays.
pub const DEFAULT_ROLES: [&str; 17] = [
    "Neurologist",
    "Cardiologist",
    "Radiologist",
    "Epidemiologist",
    "Public Health Professional",
    "Pharmacist",
    "Genetic Counselor",
    "Health Informatics Specialist",
    "Data Scientist",
    "Data Analyst",
    "Machine Learning Engineer",
    "Biostatistician",
    "AI/ML Researcher",
    "Data Engineer",
    "Ethical AI Advocate",
    "Nurse",
    "Emergency Medicine Physician",
];

/// The persona used for zero-shot initialization prompts.
pub const DEFAULT_ZERO_SHOT_ROLE: &str = "medical doctor";

/// Ordered, unique persona strings.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct RoleSet {
    roles: Vec<String>,
}

impl RoleSet {
    pub fn new(roles: Vec<String>) -> Result<Self> {
        if roles.is_empty() {
            return Err(Error::config("role set must not be empty"));
        }
        let mut seen = std::collections::HashSet::new();
        for role in &roles {
            if !seen.insert(role) {
                return Err(Error::config(format!("duplicate role {role:?}")));
            }
        }
        Ok(RoleSet { roles })
    }

    pub fn roles(&self) -> &[String] {
        &self.roles
    }

    pub fn len(&self) -> usize {
        self.roles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roles.is_empty()
    }
}

impl Default for RoleSet {
    fn default() -> Self {
        RoleSet {
            roles: DEFAULT_ROLES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl TryFrom<Vec<String>> for RoleSet {
    type Error = Error;
    fn try_from(roles: Vec<String>) -> Result<Self> {
        RoleSet::new(roles)
    }
}

impl From<RoleSet> for Vec<String> {
    fn from(r: RoleSet) -> Vec<String> {
        r.roles
    }
}

/// One scored pool line shown to the LM in few-shot prompts. Accuracies are
/// percentages already rounded for display.
#[derive(Clone, Debug, PartialEq)]
pub struct PoolEntry {
    pub feature_names: Vec<String>,
    pub train_pct: f64,
    pub val_pct: f64,
}

/// Everything a prompt template needs.
#[derive(Clone, Debug, Default)]
pub struct PromptSpec {
    pub task_description: String,
    pub feature_universe: Vec<String>,
    pub pool_snapshot: Option<Vec<PoolEntry>>,
    pub role: Option<String>,
}

impl PromptSpec {
    fn validate(&self) -> Result<()> {
        if self.feature_universe.is_empty() {
            return Err(Error::config("prompt needs a non-empty feature universe"));
        }
        if let Some(pool) = &self.pool_snapshot {
            for entry in pool {
                for name in &entry.feature_names {
                    if !self.feature_universe.contains(name) {
                        return Err(Error::config(format!(
                            "pool snapshot references unknown feature {name:?}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Renders the zero-shot initialization prompt. The pool snapshot must be
/// absent; the role defaults to "medical doctor".
pub fn build_zero_shot_prompt(spec: &PromptSpec) -> Result<String> {
    spec.validate()?;
    if spec.pool_snapshot.is_some() {
        return Err(Error::config("zero-shot prompt takes no pool snapshot"));
    }
    let role = spec.role.as_deref().unwrap_or(DEFAULT_ZERO_SHOT_ROLE);
    Ok(format!(
        "Imagine you are a {role}. I need you to recommend important features for accurately {task}. \
         Consider the following features: {features}. Think step by step. Selected features:",
        task = spec.task_description,
        features = spec.feature_universe.join(", "),
    ))
}

/// Renders the few-shot evolution prompt, listing the scored pool best
/// validation accuracy first.
pub fn build_few_shot_prompt(spec: &PromptSpec) -> Result<String> {
    spec.validate()?;
    let role = spec
        .role
        .as_deref()
        .ok_or_else(|| Error::config("few-shot prompt requires a role"))?;
    let pool = spec
        .pool_snapshot
        .as_deref()
        .ok_or_else(|| Error::config("few-shot prompt requires a pool snapshot"))?;
    if pool.is_empty() {
        return Err(Error::config("few-shot prompt requires a non-empty pool"));
    }
    let mut entries: Vec<&PoolEntry> = pool.iter().collect();
    entries.sort_by(|a, b| b.val_pct.total_cmp(&a.val_pct));
    let mut list = String::new();
    for entry in entries {
        list.push_str(&format!(
            "\n- features: [{}]; training accuracy: {:.3}%; validation accuracy: {:.3}%",
            entry.feature_names.join(", "),
            entry.train_pct,
            entry.val_pct,
        ));
    }
    Ok(format!(
        "As a {role}, recommend important features for {task}. \
         Consider the following features: {features}. \
         Here are the selected features and their corresponding classification accuracy results:{list}\n\
         Be innovative and think step by step. Features selected:",
        task = spec.task_description,
        features = spec.feature_universe.join(", "),
    ))
}

fn default_temperature() -> f64 {
    1.0
}

fn default_top_p() -> f64 {
    0.9
}

fn default_max_retries() -> usize {
    2
}

fn default_timeout_secs() -> u64 {
    60
}

fn default_backoff_ms() -> u64 {
    250
}

fn default_api_key_env() -> String {
    "ICE_SEARCH_API_KEY".to_string()
}

/// A chat-completion endpoint plus sampling and retry settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LmEndpoint {
    pub base_url: String,
    pub model_name: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_top_p")]
    pub top_p: f64,
    #[serde(default = "default_max_retries")]
    pub max_retries: usize,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
    /// Name of the environment variable holding the bearer token; the key is
    /// only ever read from the environment, never from config.
    #[serde(default = "default_api_key_env")]
    pub api_key_env: String,
}

impl LmEndpoint {
    pub fn new(base_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        LmEndpoint {
            base_url: base_url.into(),
            model_name: model_name.into(),
            temperature: default_temperature(),
            top_p: default_top_p(),
            max_retries: default_max_retries(),
            timeout_secs: default_timeout_secs(),
            backoff_ms: default_backoff_ms(),
            api_key_env: default_api_key_env(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.top_p) {
            return Err(Error::config("top_p must lie in [0, 1]"));
        }
        if self.temperature < 0.0 {
            return Err(Error::config("temperature must be >= 0"));
        }
        Ok(())
    }

    fn completions_url(&self) -> String {
        let base = self.base_url.trim_end_matches('/');
        if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/v1/chat/completions")
        }
    }
}

/// Everything recorded about one LM exchange: the prompt and consumed
/// response always, the raw request/status only for live HTTP calls.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CallRecord {
    pub call: usize,
    pub phase: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epoch: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub role: Option<String>,
    pub prompt: String,
    pub response: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub request: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub status: Option<u16>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Raw outcome of one LM invocation before parsing.
#[derive(Clone, Debug)]
pub struct OperatorResponse {
    pub text: String,
    pub request: Option<serde_json::Value>,
    pub status: Option<u16>,
}

/// Identifies one LM call within a run; the seed is derived from
/// `(run seed, phase, indices)` so scheduling never changes results.
#[derive(Clone, Debug)]
pub struct CallInfo {
    pub index: usize,
    pub phase: String,
    pub epoch: Option<usize>,
    pub role: Option<String>,
    pub seed: u64,
}

/// The crossover/mutation operator abstraction: anything that maps a prompt
/// to free text. All LM effects enter the engine through this trait.
pub trait LmOperator {
    fn respond(&mut self, prompt: &str, call: &CallInfo) -> Result<OperatorResponse>;
}

/// POSTs a chat-completion request and returns the first choice's message
/// content together with the verbatim request body and HTTP status. Retries
/// transport errors and non-2xx responses with exponential backoff.
pub fn complete_raw(
    endpoint: &LmEndpoint,
    prompt: &str,
    seed: u64,
) -> Result<(String, serde_json::Value, u16)> {
    endpoint.validate()?;
    let request_body = json!({
        "model": endpoint.model_name,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": endpoint.temperature,
        "top_p": endpoint.top_p,
        "seed": seed,
    });
    let client = reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs(endpoint.timeout_secs))
        .build()
        .map_err(|e| Error::OperatorUnavailable(e.to_string()))?;
    let api_key = std::env::var(&endpoint.api_key_env).ok();
    let mut jitter = ChaCha8Rng::seed_from_u64(seed);
    let mut last_error = String::new();
    for attempt in 0..=endpoint.max_retries {
        if attempt > 0 {
            let backoff = endpoint.backoff_ms.saturating_mul(1 << (attempt - 1));
            let jittered = backoff as f64 * (1.0 + jitter.random::<f64>());
            std::thread::sleep(Duration::from_millis(jittered as u64));
        }
        let mut request = client
            .post(endpoint.completions_url())
            .header("Content-Type", "application/json")
            .json(&request_body);
        if let Some(key) = &api_key {
            request = request.bearer_auth(key);
        }
        match request.send() {
            Ok(response) => {
                let status = response.status();
                let body = response
                    .text()
                    .map_err(|e| Error::OperatorUnavailable(e.to_string()))?;
                if !status.is_success() {
                    last_error = format!("status {status}: {body}");
                    continue;
                }
                let parsed: serde_json::Value = serde_json::from_str(&body)
                    .map_err(|e| Error::Protocol(format!("response is not JSON: {e}")))?;
                let content = parsed
                    .pointer("/choices/0/message/content")
                    .and_then(|v| v.as_str())
                    .ok_or_else(|| {
                        Error::Protocol("response lacks choices[0].message.content".to_string())
                    })?;
                return Ok((content.to_string(), request_body, status.as_u16()));
            }
            Err(e) => {
                last_error = e.to_string();
            }
        }
    }
    Err(Error::OperatorUnavailable(format!(
        "retries exhausted: {last_error}"
    )))
}

/// [`complete_raw`] reduced to the message content.
pub fn complete(endpoint: &LmEndpoint, prompt: &str, seed: u64) -> Result<String> {
    complete_raw(endpoint, prompt, seed).map(|(content, _, _)| content)
}

/// Scans a free-text response for canonical feature names, longest name
/// first so short names cannot match inside longer ones, case-insensitively.
/// Matched names come back deduplicated in universe order. Zero matches is
/// an unparseable-response error.
pub fn parse_feature_set(response: &str, feature_universe: &[String]) -> Result<FeatureSet> {
    let mut haystack = response.to_lowercase();
    let mut order: Vec<usize> = (0..feature_universe.len()).collect();
    order.sort_by(|&a, &b| {
        feature_universe[b]
            .len()
            .cmp(&feature_universe[a].len())
            .then(a.cmp(&b))
    });
    let mut matched = Vec::new();
    for idx in order {
        let needle = feature_universe[idx].to_lowercase();
        if needle.is_empty() {
            continue;
        }
        let mut found = false;
        let mut search_from = 0;
        while let Some(pos) = haystack[search_from..].find(&needle) {
            let start = search_from + pos;
            let end = start + needle.len();
            haystack.replace_range(start..end, &"\0".repeat(needle.len()));
            found = true;
            search_from = end;
        }
        if found {
            matched.push(idx);
        }
    }
    if matched.is_empty() {
        let preview: String = response.chars().take(120).collect();
        return Err(Error::Unparseable(preview));
    }
    Ok(FeatureSet::from_indices(matched))
}

/// Returns `script[call_index mod len]`; the deterministic offline stand-in
/// for an LM draw.
pub fn scripted_next(script: &[FeatureSet], call_index: usize) -> &FeatureSet {
    assert!(!script.is_empty(), "script must not be empty");
    &script[call_index % script.len()]
}

/// Offline operator that walks a scripted list of feature sets, rendering
/// each as comma-separated names so the parser path stays exercised.
pub struct ScriptedOperator {
    script: Vec<FeatureSet>,
    universe: Vec<String>,
    counter: usize,
}

impl ScriptedOperator {
    pub fn new(script: Vec<FeatureSet>, universe: Vec<String>) -> Result<Self> {
        if script.is_empty() {
            return Err(Error::config("scripted operator needs a non-empty script"));
        }
        for set in &script {
            if set.is_empty() || !set.within_universe(universe.len()) {
                return Err(Error::config(
                    "scripted sets must be non-empty and within the universe",
                ));
            }
        }
        Ok(ScriptedOperator {
            script,
            universe,
            counter: 0,
        })
    }
}

impl LmOperator for ScriptedOperator {
    fn respond(&mut self, _prompt: &str, _call: &CallInfo) -> Result<OperatorResponse> {
        let set = scripted_next(&self.script, self.counter);
        self.counter += 1;
        Ok(OperatorResponse {
            text: set.render_names(&self.universe),
            request: None,
            status: None,
        })
    }
}

/// Live operator speaking the chat-completion protocol.
pub struct HttpOperator {
    endpoint: LmEndpoint,
}

impl HttpOperator {
    pub fn new(endpoint: LmEndpoint) -> Self {
        HttpOperator { endpoint }
    }
}

impl LmOperator for HttpOperator {
    fn respond(&mut self, prompt: &str, call: &CallInfo) -> Result<OperatorResponse> {
        let (text, request, status) = complete_raw(&self.endpoint, prompt, call.seed)?;
        Ok(OperatorResponse {
            text,
            request: Some(request),
            status: Some(status),
        })
    }
}

/// Replays a recorded transcript call-for-call. Calls that originally failed
/// fail again with the recorded error, so a replayed run walks the exact
/// path of the original.
pub struct ReplayOperator {
    records: Vec<CallRecord>,
    cursor: usize,
}

impl ReplayOperator {
    pub fn new(records: Vec<CallRecord>) -> Self {
        ReplayOperator { records, cursor: 0 }
    }

    /// Parses one JSON record per line.
    pub fn from_jsonl(content: &str) -> Result<Self> {
        let mut records = Vec::new();
        for line in content.lines() {
            if line.trim().is_empty() {
                continue;
            }
            records.push(serde_json::from_str::<CallRecord>(line)?);
        }
        Ok(ReplayOperator::new(records))
    }
}

impl LmOperator for ReplayOperator {
    fn respond(&mut self, _prompt: &str, _call: &CallInfo) -> Result<OperatorResponse> {
        let record = self.records.get(self.cursor).ok_or_else(|| {
            Error::OperatorUnavailable("transcript exhausted during replay".to_string())
        })?;
        self.cursor += 1;
        if let Some(err) = &record.error {
            return Err(Error::OperatorUnavailable(format!("replayed failure: {err}")));
        }
        Ok(OperatorResponse {
            text: record.response.clone(),
            request: record.request.clone(),
            status: record.status,
        })
    }
}
