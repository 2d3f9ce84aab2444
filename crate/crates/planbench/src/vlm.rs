//! Chat-completion backends that touch the outside world: the live HTTP
//! client, the on-disk response cache, replay from that cache, and a
//! wrapper that records any other backend's answers into it.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use base64::Engine;
use planbench_core::chat::{cache_key, BackendContext, BackendError, ChatBackend, ChatRequest, Part};
use serde_json::{json, Value};

pub const API_KEY_VAR: &str = "PLANBENCH_API_KEY";
pub const DEFAULT_RETRIES: u32 = 3;

/// One JSON file per request key, holding the raw response body.
#[derive(Clone, Debug)]
pub struct ResponseCache {
    dir: PathBuf,
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

impl ResponseCache {
    pub fn new(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(ResponseCache { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn get_raw(&self, key: &str) -> Option<Value> {
        let text = fs::read_to_string(self.path(key)).ok()?;
        serde_json::from_str(&text).ok()
    }

    /// Assistant text of the cached response, if there is one.
    pub fn get(&self, key: &str) -> Option<String> {
        self.get_raw(key).and_then(|v| response_content(&v))
    }

    /// Write through a temp file and rename so readers never see half a file.
    pub fn put_raw(&self, key: &str, raw: &Value) -> std::io::Result<()> {
        let n = TMP_COUNTER.fetch_add(1, Ordering::Relaxed);
        let tmp = self.dir.join(format!(".{key}.{}.{n}.tmp", std::process::id()));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(serde_json::to_string_pretty(raw)?.as_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, self.path(key))
    }

    pub fn put_content(&self, key: &str, content: &str) -> std::io::Result<()> {
        self.put_raw(key, &json!({"choices": [{"message": {"role": "assistant", "content": content}}]}))
    }

    pub fn len(&self) -> usize {
        fs::read_dir(&self.dir)
            .map(|d| d.filter_map(Result::ok).filter(|e| e.path().extension().is_some_and(|x| x == "json")).count())
            .unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `choices[0].message.content` of an OpenAI-style response.
pub fn response_content(v: &Value) -> Option<String> {
    v.pointer("/choices/0/message/content")?.as_str().map(str::to_string)
}

/// Request body in the content-parts wire format, images as data URIs.
pub fn wire_request(req: &ChatRequest) -> Value {
    let b64 = base64::engine::general_purpose::STANDARD;
    let messages: Vec<Value> = req
        .messages
        .iter()
        .map(|m| {
            let content: Vec<Value> = m
                .parts
                .iter()
                .map(|p| match p {
                    Part::Text(t) => json!({"type": "text", "text": t}),
                    Part::Image(png) => json!({
                        "type": "image_url",
                        "image_url": {"url": format!("data:image/png;base64,{}", b64.encode(png))}
                    }),
                })
                .collect();
            json!({"role": m.role, "content": content})
        })
        .collect();
    json!({
        "model": req.model,
        "messages": messages,
        "temperature": req.temperature,
        "max_tokens": req.max_tokens,
    })
}

/// Token bucket shared by every worker thread.
#[derive(Debug)]
pub struct RateLimiter {
    capacity: f64,
    per_sec: f64,
    state: Mutex<(f64, Instant)>,
}

impl RateLimiter {
    pub fn per_minute(requests: u32) -> Self {
        let capacity = requests.max(1) as f64;
        RateLimiter { capacity, per_sec: capacity / 60.0, state: Mutex::new((capacity, Instant::now())) }
    }

    /// Take a token if one is available, else report how long to wait.
    pub fn try_acquire(&self) -> Result<(), Duration> {
        let mut st = self.state.lock().unwrap_or_else(|e| e.into_inner());
        let now = Instant::now();
        let refill = now.duration_since(st.1).as_secs_f64() * self.per_sec;
        st.0 = (st.0 + refill).min(self.capacity);
        st.1 = now;
        if st.0 >= 1.0 {
            st.0 -= 1.0;
            Ok(())
        } else {
            Err(Duration::from_secs_f64((1.0 - st.0) / self.per_sec))
        }
    }

    pub fn acquire(&self) {
        while let Err(wait) = self.try_acquire() {
            std::thread::sleep(wait);
        }
    }
}

/// OpenAI-compatible `/chat/completions` client.
pub struct LiveBackend {
    endpoint: String,
    api_key: String,
    agent: ureq::Agent,
    cache: Option<ResponseCache>,
    limiter: Option<Arc<RateLimiter>>,
    retries: u32,
    backoff: Duration,
}

enum Attempt {
    Done(Value),
    Retry(BackendError, Option<Duration>),
    Fatal(BackendError),
}

impl LiveBackend {
    pub fn new(endpoint: impl Into<String>, api_key: impl Into<String>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(180)))
            .build()
            .into();
        LiveBackend {
            endpoint: endpoint.into().trim_end_matches('/').to_string(),
            api_key: api_key.into(),
            agent,
            cache: None,
            limiter: None,
            retries: DEFAULT_RETRIES,
            backoff: Duration::from_millis(1000),
        }
    }

    /// Credentials come from the environment only.
    pub fn from_env(endpoint: impl Into<String>) -> Result<Self, BackendError> {
        match std::env::var(API_KEY_VAR) {
            Ok(k) if !k.is_empty() => Ok(Self::new(endpoint, k)),
            _ => Err(BackendError::MissingCredentials(API_KEY_VAR.into())),
        }
    }

    pub fn with_cache(mut self, cache: ResponseCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_limiter(mut self, limiter: Arc<RateLimiter>) -> Self {
        self.limiter = Some(limiter);
        self
    }

    pub fn with_retries(mut self, retries: u32, backoff: Duration) -> Self {
        self.retries = retries;
        self.backoff = backoff;
        self
    }

    fn attempt(&self, body: &Value) -> Attempt {
        if let Some(l) = &self.limiter {
            l.acquire();
        }
        let url = format!("{}/chat/completions", self.endpoint);
        let resp = self.agent.post(&url).header("Authorization", &format!("Bearer {}", self.api_key)).send_json(body);
        let mut resp = match resp {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(BackendError::Transport(e.to_string()), None),
        };
        let status = resp.status().as_u16();
        let retry_after = resp
            .headers()
            .get("retry-after")
            .and_then(|v| v.to_str().ok())
            .and_then(|s| s.trim().parse::<f64>().ok())
            .map(|secs| Duration::from_secs_f64(secs.max(0.0)));
        let text = match resp.body_mut().read_to_string() {
            Ok(t) => t,
            Err(e) => return Attempt::Retry(BackendError::Transport(e.to_string()), None),
        };
        match status {
            200..=299 => match serde_json::from_str::<Value>(&text) {
                Ok(v) if response_content(&v).is_some() => Attempt::Done(v),
                _ => Attempt::Fatal(BackendError::Transport(format!("malformed response body: {}", truncate(&text)))),
            },
            429 => Attempt::Retry(
                BackendError::RateLimited { retry_after_ms: retry_after.map(|d| d.as_millis() as u64) },
                retry_after,
            ),
            401 | 403 => Attempt::Fatal(BackendError::MissingCredentials(format!("{API_KEY_VAR} (HTTP {status})"))),
            500..=599 => Attempt::Retry(BackendError::Transport(format!("HTTP {status}: {}", truncate(&text))), None),
            _ => Attempt::Fatal(BackendError::InvalidRequest(format!("HTTP {status}: {}", truncate(&text)))),
        }
    }
}

fn truncate(s: &str) -> &str {
    match s.char_indices().nth(200) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

impl ChatBackend for LiveBackend {
    fn name(&self) -> &str {
        "live"
    }

    fn complete(&mut self, req: &ChatRequest, _ctx: &BackendContext<'_>) -> Result<String, BackendError> {
        req.validate()?;
        let key = cache_key(req);
        if let Some(hit) = self.cache.as_ref().and_then(|c| c.get(&key)) {
            return Ok(hit);
        }
        let body = wire_request(req);
        let mut last = BackendError::Transport("no attempt made".into());
        for k in 0..=self.retries {
            match self.attempt(&body) {
                Attempt::Done(v) => {
                    if let Some(c) = &self.cache {
                        c.put_raw(&key, &v).map_err(|e| BackendError::Transport(format!("cache write: {e}")))?;
                    }
                    return Ok(response_content(&v).unwrap_or_default());
                }
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry(e, wait) => {
                    last = e;
                    if k < self.retries {
                        std::thread::sleep(wait.unwrap_or(self.backoff * 2u32.pow(k)));
                    }
                }
            }
        }
        Err(last)
    }
}

/// Answers strictly from the cache; never touches the network.
#[derive(Clone, Debug)]
pub struct ReplayBackend {
    cache: ResponseCache,
}

impl ReplayBackend {
    pub fn new(cache: ResponseCache) -> Self {
        ReplayBackend { cache }
    }
}

impl ChatBackend for ReplayBackend {
    fn name(&self) -> &str {
        "replay"
    }

    fn complete(&mut self, req: &ChatRequest, _ctx: &BackendContext<'_>) -> Result<String, BackendError> {
        req.validate()?;
        let key = cache_key(req);
        self.cache.get(&key).ok_or(BackendError::CacheMiss(key))
    }
}

/// Passes calls through and records each answer in the cache, so a run
/// against a mock can later be replayed byte for byte.
pub struct CachingBackend<B> {
    inner: B,
    cache: ResponseCache,
}

impl<B: ChatBackend> CachingBackend<B> {
    pub fn new(inner: B, cache: ResponseCache) -> Self {
        CachingBackend { inner, cache }
    }
}

impl<B: ChatBackend> ChatBackend for CachingBackend<B> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn complete(&mut self, req: &ChatRequest, ctx: &BackendContext<'_>) -> Result<String, BackendError> {
        let out = self.inner.complete(req, ctx)?;
        self.cache
            .put_content(&cache_key(req), &out)
            .map_err(|e| BackendError::Transport(format!("cache write: {e}")))?;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use planbench_core::chat::{Message, Role, Scripted};
    use planbench_core::sim::{GoalPredicate, GoalSpec};
    use planbench_core::{observe, Scene};
    use std::io::{BufRead, BufReader, Read};
    use std::net::TcpListener;

    fn req() -> ChatRequest {
        ChatRequest::new(
            "m",
            vec![
                Message::text(Role::System, "sys"),
                Message { role: Role::User, parts: vec![Part::Text("hi".into()), Part::Image(vec![1, 2, 3])] },
            ],
        )
    }

    fn with_ctx<T>(f: impl FnOnce(&BackendContext<'_>) -> T) -> T {
        let obs = observe(&Scene::empty());
        let goal = GoalSpec::language("x", GoalPredicate::MatchingColors, vec![]);
        f(&BackendContext { observation: &obs, goal: &goal })
    }

    #[test]
    fn wire_format_uses_data_uris() {
        let w = wire_request(&req());
        assert_eq!(w["messages"][0]["role"], "system");
        assert_eq!(w["messages"][1]["content"][1]["image_url"]["url"], "data:image/png;base64,AQID");
        assert_eq!(w["temperature"], 0.0);
    }

    #[test]
    fn record_then_replay() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::new(dir.path()).unwrap();
        let mut rec = CachingBackend::new(Scripted::new(["1. done"]), cache.clone());
        let a = with_ctx(|c| rec.complete(&req(), c)).unwrap();
        let mut rep = ReplayBackend::new(cache.clone());
        assert_eq!(with_ctx(|c| rep.complete(&req(), c)).unwrap(), a);
        let mut other = req();
        other.model = "other".into();
        assert!(matches!(with_ctx(|c| rep.complete(&other, c)), Err(BackendError::CacheMiss(_))));
        assert_eq!(cache.len(), 1);
    }

    #[test]
    fn limiter_refuses_when_empty() {
        let l = RateLimiter::per_minute(2);
        assert!(l.try_acquire().is_ok());
        assert!(l.try_acquire().is_ok());
        let wait = l.try_acquire().unwrap_err();
        assert!(wait > Duration::from_secs(20) && wait <= Duration::from_secs(30));
    }

    // A local server that answers 429 once, then a normal completion.
    fn serve(responses: Vec<(u16, &'static str)>) -> (String, std::thread::JoinHandle<usize>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let h = std::thread::spawn(move || {
            let mut served = 0;
            for (status, body) in responses {
                let (mut s, _) = listener.accept().unwrap();
                let mut r = BufReader::new(s.try_clone().unwrap());
                let mut len = 0usize;
                loop {
                    let mut line = String::new();
                    r.read_line(&mut line).unwrap();
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                }
                let mut buf = vec![0; len];
                r.read_exact(&mut buf).unwrap();
                let extra = if status == 429 { "Retry-After: 0\r\n" } else { "" };
                write!(
                    s,
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\n{extra}Content-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                )
                .unwrap();
                served += 1;
            }
            served
        });
        (format!("http://{addr}"), h)
    }

    #[test]
    fn live_retries_rate_limit_then_caches() {
        let ok = r#"{"choices":[{"message":{"role":"assistant","content":"1. done"}}]}"#;
        let (url, h) = serve(vec![(429, "{}"), (200, ok)]);
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::new(dir.path()).unwrap();
        let mut live = LiveBackend::new(url, "k").with_cache(cache.clone()).with_retries(3, Duration::from_millis(1));
        assert_eq!(with_ctx(|c| live.complete(&req(), c)).unwrap(), "1. done");
        assert_eq!(h.join().unwrap(), 2);
        // Second call is served from the cache: the server is gone.
        assert_eq!(with_ctx(|c| live.complete(&req(), c)).unwrap(), "1. done");
    }

    #[test]
    fn live_gives_up_after_retries() {
        let (url, h) = serve(vec![(429, "{}"), (429, "{}")]);
        let mut live = LiveBackend::new(url, "k").with_retries(1, Duration::from_millis(1));
        let e = with_ctx(|c| live.complete(&req(), c)).unwrap_err();
        assert_eq!(e, BackendError::RateLimited { retry_after_ms: Some(0) });
        h.join().unwrap();
    }
}
