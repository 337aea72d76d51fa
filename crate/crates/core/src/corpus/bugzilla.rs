//! Paginated ingestion from a Bugzilla 5.x REST endpoint.
//!
//! Transport is abstracted behind [`Transport`] so the crawler can run
//! against a live server, a canned fixture, or a replay of the raw-response
//! cache. Every successful body passes through [`CachingTransport`] before
//! it is parsed.

use std::cell::Cell;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use chrono::{DateTime, NaiveDate, Utc};
use serde::Deserialize;
use serde_json::Value;

use super::{classify_attachment_mime, Corpus, IssueReport};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

pub trait Transport {
    fn get(&self, url: &str) -> Result<HttpResponse>;
}

impl<T: Transport + ?Sized> Transport for &T {
    fn get(&self, url: &str) -> Result<HttpResponse> {
        (**self).get(url)
    }
}

/// Retries on 429 and 5xx with capped exponential backoff.
#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 4,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(8),
        }
    }
}

impl RetryPolicy {
    fn delay(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }

    fn is_retryable(status: u16) -> bool {
        status == 429 || (500..600).contains(&status)
    }
}

#[derive(Debug, Clone)]
pub struct BugzillaQuery {
    pub product: String,
    pub since: NaiveDate,
    /// Inclusive.
    pub until: NaiveDate,
    pub page_size: usize,
}

pub struct BugzillaClient<T> {
    base_url: String,
    transport: T,
    retry: RetryPolicy,
    retries: Cell<u32>,
}

const SEARCH_FIELDS: &str =
    "id,product,component,platform,op_sys,severity,priority,status,keywords,summary,creation_time";

impl<T: Transport> BugzillaClient<T> {
    pub fn new(base_url: impl Into<String>, transport: T) -> Self {
        BugzillaClient {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            transport,
            retry: RetryPolicy::default(),
            retries: Cell::new(0),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    /// Total retries performed so far by this client.
    pub fn retries(&self) -> u32 {
        self.retries.get()
    }

    pub fn search_url(&self, q: &BugzillaQuery, offset: usize) -> String {
        let end = q.until.succ_opt().unwrap_or(q.until);
        let query = form_urlencoded::Serializer::new(String::new())
            .append_pair("product", &q.product)
            .append_pair("include_fields", SEARCH_FIELDS)
            .append_pair("f1", "creation_ts")
            .append_pair("o1", "greaterthaneq")
            .append_pair("v1", &q.since.to_string())
            .append_pair("f2", "creation_ts")
            .append_pair("o2", "lessthan")
            .append_pair("v2", &end.to_string())
            .append_pair("order", "bug_id")
            .append_pair("limit", &q.page_size.to_string())
            .append_pair("offset", &offset.to_string())
            .finish();
        format!("{}/rest/bug?{query}", self.base_url)
    }

    pub fn comments_url(&self, id: u64) -> String {
        format!("{}/rest/bug/{id}/comment", self.base_url)
    }

    pub fn attachments_url(&self, id: u64) -> String {
        format!(
            "{}/rest/bug/{id}/attachment?include_fields=content_type",
            self.base_url
        )
    }

    fn get_json(&self, url: &str) -> Result<Value> {
        let mut attempt = 0;
        let resp = loop {
            let resp = self.transport.get(url)?;
            if RetryPolicy::is_retryable(resp.status) && attempt < self.retry.max_retries {
                let delay = self.retry.delay(attempt);
                attempt += 1;
                self.retries.set(self.retries.get() + 1);
                tracing::warn!(
                    status = resp.status,
                    attempt,
                    ?delay,
                    "retrying Bugzilla request"
                );
                std::thread::sleep(delay);
                continue;
            }
            break resp;
        };
        if attempt > 0 {
            tracing::info!(retries = attempt, url, "request finished after retries");
        }
        if resp.status != 200 {
            return Err(Error::Transport {
                status: resp.status,
                message: format!("GET {url}"),
            });
        }
        let value: Value = serde_json::from_str(&resp.body)
            .map_err(|e| Error::Integrity(format!("GET {url}: invalid JSON body: {e}")))?;
        if value.get("error").and_then(Value::as_bool) == Some(true) {
            let message = value
                .get("message")
                .and_then(Value::as_str)
                .unwrap_or("unknown Bugzilla error");
            return Err(Error::Transport {
                status: resp.status,
                message: message.to_string(),
            });
        }
        Ok(value)
    }

    /// Crawl all bugs of `q.product` created in `[since, until]`.
    pub fn fetch(&self, q: &BugzillaQuery) -> Result<Corpus> {
        if q.page_size == 0 {
            return Err(Error::Config("page_size must be positive".into()));
        }
        if q.since > q.until {
            return Err(Error::Input(format!(
                "since {} is after until {}",
                q.since, q.until
            )));
        }

        let mut reports = Vec::new();
        let mut last_id: Option<u64> = None;
        let mut offset = 0;
        for page in 0usize.. {
            let url = self.search_url(q, offset);
            let parsed: SearchPage = decode(&url, self.get_json(&url)?)?;
            let n = parsed.bugs.len();
            if n > q.page_size {
                return Err(Error::Integrity(format!(
                    "page {page} returned {n} bugs for limit {}",
                    q.page_size
                )));
            }
            for bug in parsed.bugs {
                if last_id.is_some_and(|prev| bug.id <= prev) {
                    return Err(Error::Integrity(format!(
                        "offset drift: bug {} on page {page} is not after bug {}",
                        bug.id,
                        last_id.unwrap_or_default()
                    )));
                }
                last_id = Some(bug.id);
                reports.push(self.hydrate(bug)?);
            }
            if n < q.page_size {
                break;
            }
            offset += n;
        }
        Corpus::new(
            reports,
            format!(
                "bugzilla:{} product={} {}..={}",
                self.base_url, q.product, q.since, q.until
            ),
        )
    }

    fn hydrate(&self, bug: SearchBug) -> Result<IssueReport> {
        let key = bug.id.to_string();

        let url = self.comments_url(bug.id);
        let comments: CommentsResponse = decode(&url, self.get_json(&url)?)?;
        let comments = comments
            .bugs
            .get(&key)
            .map(|c| c.comments.as_slice())
            .unwrap_or_default();

        let url = self.attachments_url(bug.id);
        let attachments: AttachmentsResponse = decode(&url, self.get_json(&url)?)?;
        let attachment_mimes: Vec<String> = attachments
            .bugs
            .get(&key)
            .map(|a| a.iter().map(|a| a.content_type.clone()).collect())
            .unwrap_or_default();

        let reporter = comments.first().map(|c| c.creator.as_str());
        let first_reply_at = comments
            .iter()
            .skip(1)
            .find(|c| Some(c.creator.as_str()) != reporter)
            .map(|c| c.creation_time)
            .filter(|t| bug.creation_time.is_none_or(|created| *t >= created));

        Ok(IssueReport {
            id: key,
            product: bug.product,
            component: bug.component,
            platform: bug.platform,
            op_sys: bug.op_sys,
            severity: bug.severity,
            priority: bug.priority,
            status: bug.status,
            keywords: bug.keywords,
            summary: bug.summary,
            description: comments.first().map(|c| c.text.clone()).unwrap_or_default(),
            created_at: bug.creation_time,
            first_reply_at,
            initial_comment_count: Some(comments.len().saturating_sub(1) as u32),
            has_image: Some(attachment_mimes.iter().any(|m| classify_attachment_mime(m))),
            attachment_mimes,
            label_vector: None,
        })
    }
}

fn decode<D: serde::de::DeserializeOwned>(url: &str, value: Value) -> Result<D> {
    serde_json::from_value(value)
        .map_err(|e| Error::Integrity(format!("GET {url}: unexpected response shape: {e}")))
}

#[derive(Deserialize)]
struct SearchPage {
    bugs: Vec<SearchBug>,
}

#[derive(Deserialize)]
struct SearchBug {
    id: u64,
    product: Option<String>,
    component: Option<String>,
    platform: Option<String>,
    op_sys: Option<String>,
    severity: Option<String>,
    priority: Option<String>,
    status: Option<String>,
    #[serde(default)]
    keywords: Vec<String>,
    #[serde(default)]
    summary: String,
    creation_time: Option<DateTime<Utc>>,
}

#[derive(Deserialize)]
struct CommentsResponse {
    bugs: BTreeMap<String, BugComments>,
}

#[derive(Deserialize)]
struct BugComments {
    comments: Vec<Comment>,
}

#[derive(Deserialize)]
struct Comment {
    #[serde(default)]
    text: String,
    #[serde(default)]
    creator: String,
    creation_time: DateTime<Utc>,
}

#[derive(Deserialize)]
struct AttachmentsResponse {
    bugs: BTreeMap<String, Vec<Attachment>>,
}

#[derive(Deserialize)]
struct Attachment {
    content_type: String,
}

/// Directory of numbered raw response bodies plus `index.json`, which maps
/// each request URL to its body file.
#[derive(Debug)]
pub struct ResponseCache {
    dir: PathBuf,
    index: Mutex<BTreeMap<String, String>>,
}

impl ResponseCache {
    pub const INDEX_FILE: &'static str = "index.json";

    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let index_path = dir.join(Self::INDEX_FILE);
        let index = match std::fs::read_to_string(&index_path) {
            Ok(text) => serde_json::from_str(&text)
                .map_err(|e| Error::Integrity(format!("{}: {e}", index_path.display())))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => BTreeMap::new(),
            Err(e) => return Err(Error::io(index_path, e)),
        };
        Ok(ResponseCache {
            dir,
            index: Mutex::new(index),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn record(&self, url: &str, body: &str) -> Result<()> {
        let mut index = self.index.lock().expect("cache index lock poisoned");
        let file = match index.get(url) {
            Some(f) => f.clone(),
            None => format!("{:06}.json", index.len() + 1),
        };
        crate::io::write_atomic(&self.dir.join(&file), body.as_bytes())?;
        index.insert(url.to_string(), file);
        let text = serde_json::to_string_pretty(&*index).expect("string map serializes");
        crate::io::write_atomic(&self.dir.join(Self::INDEX_FILE), text.as_bytes())
    }

    pub fn lookup(&self, url: &str) -> Result<Option<String>> {
        let index = self.index.lock().expect("cache index lock poisoned");
        match index.get(url) {
            None => Ok(None),
            Some(file) => {
                let path = self.dir.join(file);
                std::fs::read_to_string(&path)
                    .map(Some)
                    .map_err(|e| Error::io(path, e))
            }
        }
    }

    pub fn len(&self) -> usize {
        self.index.lock().expect("cache index lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Persists every 200 response body to a [`ResponseCache`] before handing it on.
pub struct CachingTransport<'c, T> {
    inner: T,
    cache: &'c ResponseCache,
}

impl<'c, T> CachingTransport<'c, T> {
    pub fn new(inner: T, cache: &'c ResponseCache) -> Self {
        CachingTransport { inner, cache }
    }
}

impl<T: Transport> Transport for CachingTransport<'_, T> {
    fn get(&self, url: &str) -> Result<HttpResponse> {
        let resp = self.inner.get(url)?;
        if resp.status == 200 {
            self.cache.record(url, &resp.body)?;
        }
        Ok(resp)
    }
}

/// Serves requests from a [`ResponseCache`] only; unknown URLs are 404s.
pub struct ReplayTransport<'c> {
    cache: &'c ResponseCache,
}

impl<'c> ReplayTransport<'c> {
    pub fn new(cache: &'c ResponseCache) -> Self {
        ReplayTransport { cache }
    }
}

impl Transport for ReplayTransport<'_> {
    fn get(&self, url: &str) -> Result<HttpResponse> {
        Ok(match self.cache.lookup(url)? {
            Some(body) => HttpResponse { status: 200, body },
            None => HttpResponse {
                status: 404,
                body: String::new(),
            },
        })
    }
}
