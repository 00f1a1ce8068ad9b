//! HTTP backend over the MediaWiki action API, XTools and ORES.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::Duration;

use chrono::{DateTime, NaiveDateTime};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;
use url::Url;

use super::{
    check_limit, rank_pages, ActivitySummary, AdminScoreRecord, Clock, EditEvent, EditSource,
    EditorId, IngestError, Namespace, PageRef, RateLimiter, Revision,
};

/// Waits between attempts; a request is tried once plus once per entry.
const BACKOFF_SECS: [u64; 3] = [1, 2, 4];
const ORES_BATCH: usize = 50;

#[derive(Debug, Error)]
#[error("{0}")]
pub struct TransportError(pub String);

#[derive(Debug, Clone)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

/// Blocking GET. Implementations must be shareable across workers.
pub trait Transport: Send + Sync {
    fn get(&self, url: &str) -> Result<HttpResponse, TransportError>;
}

pub struct HttpTransport {
    agent: ureq::Agent,
    user_agent: String,
}

impl HttpTransport {
    pub fn new(user_agent: impl Into<String>, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build()
            .into();
        HttpTransport {
            agent,
            user_agent: user_agent.into(),
        }
    }
}

impl Transport for HttpTransport {
    fn get(&self, url: &str) -> Result<HttpResponse, TransportError> {
        let mut resp = self
            .agent
            .get(url)
            .header("User-Agent", &self.user_agent)
            .call()
            .map_err(|e| TransportError(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| TransportError(e.to_string()))?;
        Ok(HttpResponse { status, body })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LiveConfig {
    pub mediawiki_api: String,
    pub xtools_base: String,
    pub ores_base: String,
    /// XTools project name, e.g. `en.wikipedia.org`.
    pub project: String,
    /// ORES wiki database name, e.g. `enwiki`.
    pub wiki_db: String,
    pub requests_per_second: usize,
    pub user_agent: String,
    pub timeout_secs: u64,
}

impl Default for LiveConfig {
    fn default() -> Self {
        LiveConfig {
            mediawiki_api: "https://en.wikipedia.org/w/api.php".into(),
            xtools_base: "https://xtools.wmcloud.org".into(),
            ores_base: "https://ores.wikimedia.org".into(),
            project: "en.wikipedia.org".into(),
            wiki_db: "enwiki".into(),
            requests_per_second: 5,
            user_agent: "wikichurn/0.1 (research tooling)".into(),
            timeout_secs: 30,
        }
    }
}

pub struct LiveSource {
    config: LiveConfig,
    transport: Box<dyn Transport>,
    limiter: RateLimiter,
    clock: Arc<dyn Clock>,
}

enum Fetched {
    Ok(Value),
    NotFound,
}

impl LiveSource {
    pub fn new(config: LiveConfig, transport: Box<dyn Transport>, clock: Arc<dyn Clock>) -> Self {
        let limiter = RateLimiter::new(config.requests_per_second, clock.clone());
        LiveSource {
            config,
            transport,
            limiter,
            clock,
        }
    }

    pub fn with_http(config: LiveConfig, clock: Arc<dyn Clock>) -> Self {
        let transport = HttpTransport::new(
            config.user_agent.clone(),
            Duration::from_secs(config.timeout_secs),
        );
        Self::new(config, Box::new(transport), clock)
    }

    fn get_json(&self, url: &Url) -> Result<Fetched, IngestError> {
        let mut last_err = String::new();
        for attempt in 0..=BACKOFF_SECS.len() {
            if attempt > 0 {
                self.clock
                    .sleep(Duration::from_secs(BACKOFF_SECS[attempt - 1]));
            }
            self.limiter.acquire();
            match self.transport.get(url.as_str()) {
                Ok(resp) if resp.status == 404 => return Ok(Fetched::NotFound),
                Ok(resp) if (200..300).contains(&resp.status) => {
                    return serde_json::from_str(&resp.body)
                        .map(Fetched::Ok)
                        .map_err(|e| {
                            IngestError::SourceUnavailable(format!("bad JSON from {url}: {e}"))
                        });
                }
                Ok(resp) if resp.status == 429 || resp.status >= 500 => {
                    last_err = format!("HTTP {} from {url}", resp.status);
                }
                Ok(resp) => {
                    return Err(IngestError::SourceUnavailable(format!(
                        "HTTP {} from {url}",
                        resp.status
                    )))
                }
                Err(e) => last_err = format!("{e} ({url})"),
            }
            log::debug!("attempt {} failed: {last_err}", attempt + 1);
        }
        Err(IngestError::SourceUnavailable(last_err))
    }

    fn xtools_url(&self, segments: &[&str]) -> Result<Url, IngestError> {
        let mut url = Url::parse(&self.config.xtools_base)
            .map_err(|e| IngestError::Invalid(format!("xtools_base: {e}")))?;
        url.path_segments_mut()
            .map_err(|_| IngestError::Invalid("xtools_base cannot be a base".into()))?
            .pop_if_empty()
            .extend(segments);
        Ok(url)
    }

    fn api_url(&self, params: &[(&str, &str)]) -> Result<Url, IngestError> {
        let mut all = vec![("format", "json"), ("formatversion", "2")];
        all.extend_from_slice(params);
        Url::parse_with_params(&self.config.mediawiki_api, &all)
            .map_err(|e| IngestError::Invalid(format!("mediawiki_api: {e}")))
    }

    fn api(&self, params: &[(&str, &str)]) -> Result<Value, IngestError> {
        match self.get_json(&self.api_url(params)?)? {
            Fetched::Ok(v) => Ok(v),
            Fetched::NotFound => Err(IngestError::SourceUnavailable(
                "MediaWiki API returned 404".into(),
            )),
        }
    }

    fn ores_scores(&self, rev_ids: &[u64]) -> Result<HashMap<u64, (f64, f64)>, IngestError> {
        let mut out = HashMap::new();
        for chunk in rev_ids.chunks(ORES_BATCH) {
            let ids: Vec<String> = chunk.iter().map(u64::to_string).collect();
            let mut url = Url::parse(&self.config.ores_base)
                .map_err(|e| IngestError::Invalid(format!("ores_base: {e}")))?;
            url.path_segments_mut()
                .map_err(|_| IngestError::Invalid("ores_base cannot be a base".into()))?
                .pop_if_empty()
                .extend(["v3", "scores", &self.config.wiki_db, ""]);
            url.query_pairs_mut()
                .append_pair("models", "damaging|goodfaith")
                .append_pair("revids", &ids.join("|"));
            let Fetched::Ok(body) = self.get_json(&url)? else {
                continue;
            };
            let scores = &body[&self.config.wiki_db]["scores"];
            for id in chunk {
                let s = &scores[id.to_string()];
                let damaging = s["damaging"]["score"]["probability"]["true"].as_f64();
                let goodfaith = s["goodfaith"]["score"]["probability"]["true"].as_f64();
                if let (Some(d), Some(g)) = (damaging, goodfaith) {
                    out.insert(*id, (d, g));
                }
            }
        }
        Ok(out)
    }

    fn contrib_timestamp(&self, editor: &EditorId, dir: &str) -> Result<Option<i64>, IngestError> {
        let body = self.api(&[
            ("action", "query"),
            ("list", "usercontribs"),
            ("ucuser", editor.as_str()),
            ("uclimit", "1"),
            ("ucdir", dir),
            ("ucprop", "timestamp"),
        ])?;
        Ok(body["query"]["usercontribs"]
            .get(0)
            .and_then(|c| c["timestamp"].as_str())
            .and_then(parse_timestamp))
    }
}

/// Accepts RFC 3339 (`2020-01-31T12:00:00Z`) and MediaWiki compact
/// (`20200131120000`) timestamps.
pub(crate) fn parse_timestamp(s: &str) -> Option<i64> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp());
    }
    NaiveDateTime::parse_from_str(s, "%Y%m%d%H%M%S")
        .ok()
        .map(|dt| dt.and_utc().timestamp())
}

fn full_title(page: &PageRef) -> String {
    let prefix = match page.namespace {
        Namespace::Article => "",
        Namespace::ArticleTalk => "Talk:",
        Namespace::Project => "Wikipedia:",
        Namespace::ProjectTalk => "Wikipedia talk:",
    };
    if page.namespace != Namespace::Article && page.title.starts_with(prefix) {
        page.title.clone()
    } else {
        format!("{prefix}{}", page.title)
    }
}

fn top_edit_items(body: &Value, ns: Namespace) -> Vec<Value> {
    let top = &body["top_edits"];
    match top {
        Value::Array(items) => items.clone(),
        Value::Object(map) => map
            .get(&ns.id().to_string())
            .and_then(Value::as_array)
            .cloned()
            .unwrap_or_default(),
        _ => Vec::new(),
    }
}

impl EditSource for LiveSource {
    fn fetch_latest_edits(
        &self,
        editor: &EditorId,
        limit: usize,
    ) -> Result<Vec<EditEvent>, IngestError> {
        check_limit(limit)?;
        let url = self.xtools_url(&[
            "api",
            "user",
            "nonautomated_edits",
            &self.config.project,
            editor.as_str(),
            "all",
        ])?;
        let body = match self.get_json(&url)? {
            Fetched::Ok(v) => v,
            Fetched::NotFound => return Err(IngestError::UnknownEditor(editor.clone())),
        };
        let mut raw = Vec::new();
        for item in body["nonautomated_edits"].as_array().into_iter().flatten() {
            let Some(ns) = item["namespace"]
                .as_i64()
                .and_then(|n| Namespace::try_from(n).ok())
            else {
                continue;
            };
            let Some(title) = item["page_title"].as_str().filter(|t| !t.is_empty()) else {
                continue;
            };
            let Some(ts) = item["timestamp"].as_str().and_then(parse_timestamp) else {
                continue;
            };
            let delta = item["length_change"]
                .as_i64()
                .or_else(|| item["size_change"].as_i64())
                .unwrap_or(0);
            raw.push((
                item["rev_id"].as_u64(),
                EditEvent {
                    editor: editor.clone(),
                    page: PageRef::new(title.replace('_', " "), ns)?,
                    timestamp: ts,
                    byte_delta: delta,
                    minor: item["minor"].as_bool().unwrap_or(false),
                    ores_damaging_prob: None,
                    ores_goodfaith_prob: None,
                    reverted: item["reverted"].as_bool().unwrap_or(false),
                    automated: false,
                },
            ));
        }
        raw.sort_by(|a, b| b.1.timestamp.cmp(&a.1.timestamp));
        raw.truncate(limit);
        let ids: Vec<u64> = raw.iter().filter_map(|(id, _)| *id).collect();
        let scores = self.ores_scores(&ids)?;
        Ok(raw
            .into_iter()
            .map(|(id, mut e)| {
                if let Some((d, g)) = id.and_then(|id| scores.get(&id)) {
                    e.ores_damaging_prob = Some(*d);
                    e.ores_goodfaith_prob = Some(*g);
                }
                e
            })
            .collect())
    }

    fn fetch_top_pages(
        &self,
        editor: &EditorId,
        namespace: Namespace,
        k: usize,
    ) -> Result<Vec<(PageRef, u64)>, IngestError> {
        check_limit(k)?;
        let ns = namespace.id().to_string();
        let url = self.xtools_url(&[
            "api",
            "user",
            "top_edits",
            &self.config.project,
            editor.as_str(),
            &ns,
        ])?;
        let body = match self.get_json(&url)? {
            Fetched::Ok(v) => v,
            Fetched::NotFound => return Err(IngestError::UnknownEditor(editor.clone())),
        };
        let mut pages = Vec::new();
        for item in top_edit_items(&body, namespace) {
            let title = item["page_title"].as_str().unwrap_or_default();
            let count = item["count"].as_u64().unwrap_or(0);
            if title.is_empty() || count == 0 {
                continue;
            }
            pages.push((PageRef::new(title.replace('_', " "), namespace)?, count));
        }
        rank_pages(&mut pages);
        pages.truncate(k);
        Ok(pages)
    }

    fn fetch_page_revisions(
        &self,
        page: &PageRef,
        limit: usize,
    ) -> Result<Vec<Revision>, IngestError> {
        check_limit(limit)?;
        let title = full_title(page);
        let rvlimit = limit.min(500).to_string();
        let body = self.api(&[
            ("action", "query"),
            ("prop", "revisions"),
            ("titles", &title),
            ("rvlimit", &rvlimit),
            ("rvprop", "user|timestamp"),
        ])?;
        let Some(p) = body["query"]["pages"].get(0) else {
            return Err(IngestError::UnknownPage(page.clone()));
        };
        if p["missing"].as_bool().unwrap_or(false) || p.get("invalid").is_some() {
            return Err(IngestError::UnknownPage(page.clone()));
        }
        let mut revs = Vec::new();
        for r in p["revisions"].as_array().into_iter().flatten() {
            // Suppressed usernames have no "user" field.
            let (Some(user), Some(ts)) = (
                r["user"].as_str(),
                r["timestamp"].as_str().and_then(parse_timestamp),
            ) else {
                continue;
            };
            if let Ok(editor) = EditorId::new(user) {
                revs.push(Revision { editor, timestamp: ts });
            }
        }
        revs.sort_by(|a, b| b.timestamp.cmp(&a.timestamp));
        revs.truncate(limit);
        Ok(revs)
    }

    fn fetch_admin_score(&self, editor: &EditorId) -> Result<AdminScoreRecord, IngestError> {
        let url = self.xtools_url(&[
            "api",
            "user",
            "adminscore",
            &self.config.project,
            editor.as_str(),
        ])?;
        let body = match self.get_json(&url)? {
            Fetched::Ok(v) => v,
            Fetched::NotFound => return Err(IngestError::UnknownEditor(editor.clone())),
        };
        let score = body["total"]
            .as_f64()
            .or_else(|| body["score"].as_f64())
            .filter(|s| s.is_finite())
            .ok_or_else(|| {
                IngestError::SourceUnavailable(format!("no admin score for {editor} in response"))
            })?;
        Ok(AdminScoreRecord {
            editor: editor.clone(),
            score,
            fetched_at: self.clock.now() as i64,
        })
    }

    fn fetch_user_page_text(&self, editor: &EditorId) -> Result<String, IngestError> {
        let page = format!("User:{editor}");
        let body = self.api(&[("action", "parse"), ("page", &page), ("prop", "text")])?;
        if body["error"]["code"].as_str() == Some("missingtitle") {
            return Ok(String::new());
        }
        if let Some(code) = body["error"]["code"].as_str() {
            return Err(IngestError::SourceUnavailable(format!(
                "parse error {code} for {page}"
            )));
        }
        Ok(body["parse"]["text"].as_str().unwrap_or_default().to_string())
    }

    fn fetch_main_page_reverts(
        &self,
        editor: &EditorId,
        k: usize,
    ) -> Result<Vec<(PageRef, u64)>, IngestError> {
        let top = self.fetch_top_pages(editor, Namespace::Article, k)?;
        let body = self.api(&[
            ("action", "query"),
            ("list", "usercontribs"),
            ("ucuser", editor.as_str()),
            ("ucnamespace", "0"),
            ("uctag", "mw-reverted"),
            ("uclimit", "500"),
            ("ucprop", "title"),
        ])?;
        let mut per_title: HashMap<String, u64> = HashMap::new();
        for c in body["query"]["usercontribs"].as_array().into_iter().flatten() {
            if let Some(t) = c["title"].as_str() {
                *per_title.entry(t.to_string()).or_default() += 1;
            }
        }
        Ok(top
            .into_iter()
            .map(|(page, _)| {
                let n = per_title.get(&page.title).copied().unwrap_or(0);
                (page, n)
            })
            .collect())
    }

    fn fetch_activity_summary(&self, editor: &EditorId) -> Result<ActivitySummary, IngestError> {
        let body = self.api(&[
            ("action", "query"),
            ("list", "users"),
            ("ususers", editor.as_str()),
            ("usprop", "editcount"),
        ])?;
        let user = &body["query"]["users"][0];
        if user.is_null() || user["missing"].as_bool().unwrap_or(false) {
            return Err(IngestError::UnknownEditor(editor.clone()));
        }
        let total_edits = user["editcount"].as_u64().unwrap_or(0);
        let first = self.contrib_timestamp(editor, "newer")?;
        let last = self.contrib_timestamp(editor, "older")?;
        match (first, last) {
            (Some(first_edit), Some(last_edit)) => Ok(ActivitySummary {
                total_edits,
                first_edit,
                last_edit,
            }),
            _ => Err(IngestError::UnknownEditor(editor.clone())),
        }
    }

    fn snapshot_time(&self) -> i64 {
        self.clock.now() as i64
    }
}
