use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{mpsc, Mutex};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{state_key, ItemCatalog, Window, PAD};
use crate::reference::cache::{latest_records, read_cache, CacheWriter, ProviderRecord, RecordStatus};
use crate::reference::candidates::state_candidates;
use crate::reference::parse::parse_response;
use crate::reference::prompt::{build_prompt, template_hash};

pub const ENV_ENDPOINT: &str = "LAAC_LLM_ENDPOINT";
pub const ENV_TOKEN: &str = "LAAC_LLM_TOKEN";
pub const ENV_MODEL: &str = "LAAC_LLM_MODEL";

#[derive(Clone, Debug)]
pub struct PromptRequest {
    pub state_key: String,
    pub prompt: String,
    pub candidate_titles: Vec<String>,
    pub n_r: usize,
}

/// Source of raw suggestion text for a prompt.
pub trait Provider: Sync {
    fn name(&self) -> &str;

    fn complete(&self, request: &PromptRequest) -> Result<String>;

    /// Deterministic providers record a zero timestamp so reruns produce
    /// identical cache files.
    fn deterministic(&self) -> bool {
        false
    }
}

/// Offline provider answering with the first `n_r` candidates.
pub struct StubProvider;

impl Provider for StubProvider {
    fn name(&self) -> &str {
        "stub"
    }

    fn complete(&self, request: &PromptRequest) -> Result<String> {
        let lines: Vec<String> = request
            .candidate_titles
            .iter()
            .take(request.n_r)
            .enumerate()
            .map(|(i, t)| format!("{}. {t}", i + 1))
            .collect();
        Ok(lines.join("\n"))
    }

    fn deterministic(&self) -> bool {
        true
    }
}

/// Replays raw responses recorded in an earlier cache.
pub struct ReplayProvider {
    responses: HashMap<String, String>,
}

impl ReplayProvider {
    pub fn new(responses: HashMap<String, String>) -> Self {
        Self { responses }
    }

    pub fn from_cache(path: &Path) -> Result<Self> {
        Ok(Self::new(crate::reference::cache::responses_by_key(&read_cache(path)?)))
    }
}

impl Provider for ReplayProvider {
    fn name(&self) -> &str {
        "cache"
    }

    fn complete(&self, request: &PromptRequest) -> Result<String> {
        self.responses
            .get(&request.state_key)
            .cloned()
            .ok_or_else(|| Error::Provider(format!("no recorded response for state {}", request.state_key)))
    }

    fn deterministic(&self) -> bool {
        true
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiveConfig {
    /// Full chat-completions URL.
    pub endpoint: String,
    pub token: Option<String>,
    pub model: String,
    pub retries: u32,
    pub backoff: Duration,
    pub timeout: Duration,
}

impl LiveConfig {
    pub fn from_env() -> Result<Self> {
        let endpoint = std::env::var(ENV_ENDPOINT).map_err(|_| {
            Error::Config(format!(
                "live provider needs {ENV_ENDPOINT} (chat-completions URL); optionally {ENV_TOKEN} and {ENV_MODEL}"
            ))
        })?;
        Ok(Self {
            endpoint,
            token: std::env::var(ENV_TOKEN).ok(),
            model: std::env::var(ENV_MODEL).unwrap_or_else(|_| "llama3".into()),
            retries: 3,
            backoff: Duration::from_millis(500),
            timeout: Duration::from_secs(60),
        })
    }
}

/// OpenAI-compatible chat-completions client.
pub struct LiveProvider {
    config: LiveConfig,
    agent: ureq::Agent,
}

enum Attempt {
    Retry(String),
    Fatal(String),
}

impl LiveProvider {
    pub fn new(config: LiveConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .build()
            .into();
        Self { config, agent }
    }

    fn attempt(&self, request: &PromptRequest) -> std::result::Result<String, Attempt> {
        let body = serde_json::json!({
            "model": self.config.model,
            "temperature": 0,
            "messages": [{"role": "user", "content": request.prompt}],
        });
        let mut req = self.agent.post(&self.config.endpoint);
        if let Some(t) = &self.config.token {
            req = req.header("Authorization", &format!("Bearer {t}"));
        }
        let mut resp = req.send_json(&body).map_err(|e| match e {
            ureq::Error::StatusCode(code) if (400..500).contains(&code) && code != 429 => {
                Attempt::Fatal(format!("HTTP {code}"))
            }
            other => Attempt::Retry(other.to_string()),
        })?;
        let value: serde_json::Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| Attempt::Fatal(format!("malformed reply: {e}")))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| Attempt::Fatal("malformed reply: no choices[0].message.content".into()))
    }
}

impl Provider for LiveProvider {
    fn name(&self) -> &str {
        "live"
    }

    fn complete(&self, request: &PromptRequest) -> Result<String> {
        let mut delay = self.config.backoff;
        let mut last = String::new();
        for attempt in 0..=self.config.retries {
            if attempt > 0 {
                std::thread::sleep(delay);
                delay *= 2;
            }
            match self.attempt(request) {
                Ok(text) => return Ok(text),
                Err(Attempt::Fatal(m)) => return Err(Error::Provider(m)),
                Err(Attempt::Retry(m)) => {
                    log::debug!("request for {} failed (attempt {}): {m}", request.state_key, attempt + 1);
                    last = m;
                }
            }
        }
        Err(Error::Provider(format!(
            "gave up after {} retries: {last}",
            self.config.retries
        )))
    }
}

/// Spaces request start times at least `interval` apart across threads.
struct RateLimiter {
    interval: Duration,
    next: Mutex<Instant>,
}

impl RateLimiter {
    fn new(requests_per_second: Option<f64>) -> Self {
        let interval = requests_per_second
            .filter(|r| *r > 0.0)
            .map_or(Duration::ZERO, |r| Duration::from_secs_f64(1.0 / r));
        Self {
            interval,
            next: Mutex::new(Instant::now()),
        }
    }

    fn wait(&self) {
        if self.interval.is_zero() {
            return;
        }
        let slot = {
            let mut next = self.next.lock().unwrap_or_else(|e| e.into_inner());
            let slot = (*next).max(Instant::now());
            *next = slot + self.interval;
            slot
        };
        let now = Instant::now();
        if slot > now {
            std::thread::sleep(slot - now);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CacheBuildOptions {
    pub n_c: usize,
    pub n_r: usize,
    pub seed: u64,
    pub workers: usize,
    pub requests_per_second: Option<f64>,
}

impl Default for CacheBuildOptions {
    fn default() -> Self {
        Self {
            n_c: 100,
            n_r: 10,
            seed: 0,
            workers: 1,
            requests_per_second: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheBuildSummary {
    pub requested: usize,
    pub resumed: usize,
    pub ok: usize,
    pub unmatched: usize,
    pub failed: usize,
}

fn history_titles(window: &Window, catalog: &ItemCatalog) -> Result<Vec<String>> {
    window
        .iter()
        .filter(|&&id| id != PAD)
        .map(|&id| {
            catalog.title(id).map(str::to_string).ok_or(Error::IndexOutOfRange {
                what: "history id",
                index: id as usize,
                size: catalog.len() + 1,
            })
        })
        .collect()
}

/// Prompt and candidate ids for a state.
pub fn prompt_for_state(
    window: &Window,
    catalog: &ItemCatalog,
    options: &CacheBuildOptions,
) -> Result<(PromptRequest, Vec<u32>)> {
    let n_c = options.n_c.min(catalog.len());
    let candidates = state_candidates(window, catalog.len(), n_c, options.seed)?;
    let titles: Vec<String> = candidates
        .iter()
        .map(|&id| catalog.title(id).unwrap_or_default().to_string())
        .collect();
    let history = history_titles(window, catalog)?;
    let h: Vec<&str> = history.iter().map(String::as_str).collect();
    let c: Vec<&str> = titles.iter().map(String::as_str).collect();
    let prompt = build_prompt(&h, &c, options.n_r)?;
    Ok((
        PromptRequest {
            state_key: state_key(window),
            prompt,
            candidate_titles: titles,
            n_r: options.n_r,
        },
        candidates,
    ))
}

fn exchange(
    window: &Window,
    catalog: &ItemCatalog,
    provider: &dyn Provider,
    options: &CacheBuildOptions,
    limiter: &RateLimiter,
) -> Result<ProviderRecord> {
    let (request, candidates) = prompt_for_state(window, catalog, options)?;
    limiter.wait();
    let reply = provider.complete(&request);
    let timestamp = if provider.deterministic() {
        0
    } else {
        SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
    };
    let mut record = ProviderRecord {
        state_key: request.state_key,
        candidate_ids: candidates,
        parsed_ids: Vec::new(),
        provider: provider.name().to_string(),
        template_hash: template_hash(),
        raw_response: String::new(),
        timestamp,
        status: RecordStatus::Failed,
        candidate_seed: options.seed,
        error: None,
    };
    match reply {
        Ok(raw) => {
            let parsed = parse_response(&raw, &record.candidate_ids, catalog, options.n_r);
            record.status = if parsed.ids.is_empty() {
                RecordStatus::Unmatched
            } else {
                RecordStatus::Ok
            };
            record.parsed_ids = parsed.ids;
            record.raw_response = raw;
        }
        Err(e) => record.error = Some(e.to_string()),
    }
    Ok(record)
}

/// Fetches suggestions for every state not already answered in the cache at
/// `path`, appending one record per exchange as it completes.
///
/// Failed states from earlier runs are retried; answered ones are skipped.
pub fn build_cache(
    states: &[Window],
    catalog: &ItemCatalog,
    provider: &dyn Provider,
    path: &Path,
    options: &CacheBuildOptions,
) -> Result<CacheBuildSummary> {
    let expected = template_hash();
    let existing = read_cache(path)?;
    if let Some(r) = existing.iter().find(|r| r.template_hash != expected) {
        return Err(Error::TemplateMismatch {
            expected,
            found: r.template_hash.clone(),
        });
    }
    let done: HashSet<String> = latest_records(&existing)
        .into_iter()
        .filter(|(_, r)| r.status != RecordStatus::Failed)
        .map(|(k, _)| k)
        .collect();
    let mut seen = HashSet::new();
    let unique: Vec<Window> = states.iter().filter(|w| seen.insert(**w)).copied().collect();
    let pending: Vec<Window> = unique
        .iter()
        .filter(|w| !done.contains(&state_key(w)))
        .copied()
        .collect();
    let mut summary = CacheBuildSummary {
        requested: unique.len(),
        resumed: unique.len() - pending.len(),
        ..CacheBuildSummary::default()
    };

    let mut writer = CacheWriter::open(path)?;
    let limiter = RateLimiter::new(options.requests_per_second);
    let cursor = AtomicUsize::new(0);
    let workers = options.workers.clamp(1, pending.len().max(1));
    let (tx, rx) = mpsc::channel::<Result<ProviderRecord>>();
    std::thread::scope(|scope| -> Result<()> {
        for _ in 0..workers {
            let tx = tx.clone();
            let (pending, cursor, limiter) = (&pending, &cursor, &limiter);
            scope.spawn(move || loop {
                let i = cursor.fetch_add(1, Ordering::SeqCst);
                let Some(w) = pending.get(i) else { break };
                if tx.send(exchange(w, catalog, provider, options, limiter)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for record in rx {
            let record = record?;
            match record.status {
                RecordStatus::Ok => summary.ok += 1,
                RecordStatus::Unmatched => summary.unmatched += 1,
                RecordStatus::Failed => summary.failed += 1,
            }
            writer.append(&record)?;
        }
        Ok(())
    })?;
    if summary.failed + summary.unmatched > 0 {
        log::warn!(
            "{} states failed and {} had no matching suggestion",
            summary.failed,
            summary.unmatched
        );
    }
    Ok(summary)
}
