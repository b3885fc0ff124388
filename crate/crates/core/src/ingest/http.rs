use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use log::{debug, warn};

use super::{CachedResponse, IngestError, ResponseCache};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub retry_after: Option<Duration>,
    pub body: Vec<u8>,
}

/// A request that never produced an HTTP status (DNS, TLS, connection reset, timeout).
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct TransportFailure(pub String);

/// Minimal blocking GET interface so tests can script responses.
pub trait Transport: Send + Sync {
    fn get(&self, url: &str) -> Result<HttpResponse, TransportFailure>;
}

pub struct ReqwestTransport {
    client: reqwest::blocking::Client,
}

impl ReqwestTransport {
    pub fn new(user_agent: &str) -> Result<Self, IngestError> {
        let client = reqwest::blocking::Client::builder()
            .user_agent(user_agent)
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| IngestError::Transport(e.to_string()))?;
        Ok(ReqwestTransport { client })
    }
}

impl Transport for ReqwestTransport {
    fn get(&self, url: &str) -> Result<HttpResponse, TransportFailure> {
        let resp = self.client.get(url).send().map_err(|e| TransportFailure(e.to_string()))?;
        let status = resp.status().as_u16();
        let retry_after = resp
            .headers()
            .get(reqwest::header::RETRY_AFTER)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse::<u64>().ok())
            .map(Duration::from_secs);
        let body = resp.bytes().map_err(|e| TransportFailure(e.to_string()))?.to_vec();
        Ok(HttpResponse { status, retry_after, body })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    /// Upper bound on any single wait, including server retry-after hints.
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            base_delay: Duration::from_secs(1),
            max_delay: Duration::from_secs(60),
        }
    }
}

impl RetryPolicy {
    fn delay(&self, attempt: u32, hint: Option<Duration>) -> Duration {
        let backoff = self.base_delay.saturating_mul(1 << attempt.min(16));
        hint.unwrap_or(backoff).min(self.max_delay)
    }
}

/// Global ceiling on request starts per second.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Duration,
    next: Mutex<Option<Instant>>,
}

impl RateLimiter {
    pub fn per_second(rate: f64) -> Self {
        let interval = if rate > 0.0 && rate.is_finite() {
            Duration::from_secs_f64(1.0 / rate)
        } else {
            Duration::ZERO
        };
        RateLimiter { interval, next: Mutex::new(None) }
    }

    pub fn unlimited() -> Self {
        RateLimiter { interval: Duration::ZERO, next: Mutex::new(None) }
    }

    pub fn acquire(&self) {
        if self.interval.is_zero() {
            return;
        }
        let wait = {
            let mut next = self.next.lock().unwrap();
            let now = Instant::now();
            let slot = next.map_or(now, |n| n.max(now));
            *next = Some(slot + self.interval);
            slot - now
        };
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }
}

/// Counting semaphore keyed by remote host.
#[derive(Debug)]
struct HostSlots {
    limit: usize,
    in_flight: Mutex<HashMap<String, usize>>,
    freed: Condvar,
}

struct HostPermit<'a> {
    slots: &'a HostSlots,
    host: String,
}

impl HostSlots {
    fn new(limit: usize) -> Self {
        HostSlots { limit: limit.max(1), in_flight: Mutex::new(HashMap::new()), freed: Condvar::new() }
    }

    fn acquire(&self, host: &str) -> HostPermit<'_> {
        let mut map = self.in_flight.lock().unwrap();
        while map.get(host).copied().unwrap_or(0) >= self.limit {
            map = self.freed.wait(map).unwrap();
        }
        *map.entry(host.to_string()).or_insert(0) += 1;
        HostPermit { slots: self, host: host.to_string() }
    }
}

impl Drop for HostPermit<'_> {
    fn drop(&mut self) {
        let mut map = self.slots.in_flight.lock().unwrap();
        if let Some(n) = map.get_mut(&self.host) {
            *n -= 1;
        }
        self.slots.freed.notify_all();
    }
}

fn host_of(url: &str) -> &str {
    let rest = url.split_once("://").map_or(url, |(_, r)| r);
    rest.split(['/', '?']).next().unwrap_or(rest)
}

pub struct FetcherBuilder {
    cache: ResponseCache,
    transport: Option<Arc<dyn Transport>>,
    retry: RetryPolicy,
    limiter: RateLimiter,
    per_host: usize,
}

impl FetcherBuilder {
    pub fn transport(mut self, transport: Arc<dyn Transport>) -> Self {
        self.transport = Some(transport);
        self
    }

    /// Forbid network access: cache misses become [`IngestError::CacheMiss`].
    pub fn offline(mut self) -> Self {
        self.transport = None;
        self
    }

    pub fn retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn rate_limit(mut self, limiter: RateLimiter) -> Self {
        self.limiter = limiter;
        self
    }

    pub fn max_in_flight_per_host(mut self, n: usize) -> Self {
        self.per_host = n;
        self
    }

    pub fn build(self) -> Fetcher {
        Fetcher {
            cache: self.cache,
            transport: self.transport,
            retry: self.retry,
            limiter: self.limiter,
            hosts: HostSlots::new(self.per_host),
            cache_hits: AtomicUsize::new(0),
            network_fetches: AtomicUsize::new(0),
        }
    }
}

/// Cache-first HTTP client shared by the pageview and TV-mention sources.
pub struct Fetcher {
    cache: ResponseCache,
    transport: Option<Arc<dyn Transport>>,
    retry: RetryPolicy,
    limiter: RateLimiter,
    hosts: HostSlots,
    cache_hits: AtomicUsize,
    network_fetches: AtomicUsize,
}

impl Fetcher {
    pub fn builder(cache: ResponseCache) -> FetcherBuilder {
        FetcherBuilder {
            cache,
            transport: None,
            retry: RetryPolicy::default(),
            limiter: RateLimiter::per_second(10.0),
            per_host: 4,
        }
    }

    pub fn is_offline(&self) -> bool {
        self.transport.is_none()
    }

    pub fn cache(&self) -> &ResponseCache {
        &self.cache
    }

    /// Requests answered from the cache so far.
    pub fn cache_hits(&self) -> usize {
        self.cache_hits.load(Ordering::Relaxed)
    }

    /// Requests that went to the network so far.
    pub fn network_fetches(&self) -> usize {
        self.network_fetches.load(Ordering::Relaxed)
    }

    /// Returns the cached response for `(endpoint, query)`, fetching `url` on a miss.
    /// Only 200 and 404 responses come back; everything else is retried and then
    /// surfaced as an error.
    pub(crate) fn request(&self, endpoint: &str, query: &str, url: &str) -> Result<CachedResponse, IngestError> {
        if let Some(hit) = self.cache.get(endpoint, query)? {
            self.cache_hits.fetch_add(1, Ordering::Relaxed);
            return Ok(hit);
        }
        let Some(transport) = &self.transport else {
            return Err(IngestError::CacheMiss { endpoint: endpoint.to_string(), query: query.to_string() });
        };

        let host = host_of(url);
        let mut last = IngestError::Transport("no attempt made".into());
        for attempt in 0..self.retry.max_attempts.max(1) {
            if attempt > 0 {
                let hint = match &last {
                    IngestError::RateLimited { retry_after } => *retry_after,
                    _ => None,
                };
                let wait = self.retry.delay(attempt - 1, hint);
                debug!("retrying {url} in {wait:?} after: {last}");
                std::thread::sleep(wait);
            }
            self.limiter.acquire();
            let outcome = {
                let _permit = self.hosts.acquire(host);
                transport.get(url)
            };
            match outcome {
                Ok(resp) if resp.status == 200 || resp.status == 404 => {
                    self.network_fetches.fetch_add(1, Ordering::Relaxed);
                    let cached = CachedResponse { status: resp.status, body: resp.body };
                    self.cache.put(endpoint, query, &cached)?;
                    return Ok(cached);
                }
                Ok(resp) if resp.status == 429 => {
                    last = IngestError::RateLimited { retry_after: resp.retry_after };
                }
                Ok(resp) if resp.status >= 500 => {
                    last = IngestError::Transport(format!("HTTP {} from {host}", resp.status));
                }
                Ok(resp) => {
                    return Err(IngestError::Transport(format!(
                        "HTTP {} from {host}: {}",
                        resp.status,
                        String::from_utf8_lossy(&resp.body).chars().take(200).collect::<String>()
                    )));
                }
                Err(TransportFailure(msg)) => last = IngestError::Transport(msg),
            }
        }
        warn!("giving up on {url}: {last}");
        Err(last)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Mutex;

    struct Scripted {
        replies: Mutex<Vec<Result<HttpResponse, TransportFailure>>>,
        calls: AtomicUsize,
    }

    impl Scripted {
        fn new(mut replies: Vec<Result<HttpResponse, TransportFailure>>) -> Arc<Self> {
            replies.reverse();
            Arc::new(Scripted { replies: Mutex::new(replies), calls: AtomicUsize::new(0) })
        }
    }

    impl Transport for Scripted {
        fn get(&self, _url: &str) -> Result<HttpResponse, TransportFailure> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.replies.lock().unwrap().pop().expect("unexpected request")
        }
    }

    fn ok(status: u16, body: &str) -> Result<HttpResponse, TransportFailure> {
        Ok(HttpResponse { status, retry_after: None, body: body.as_bytes().to_vec() })
    }

    fn quick() -> RetryPolicy {
        RetryPolicy { max_attempts: 3, base_delay: Duration::ZERO, max_delay: Duration::ZERO }
    }

    #[test]
    fn retries_transient_failures_then_caches() {
        let dir = tempfile::tempdir().unwrap();
        let t = Scripted::new(vec![Err(TransportFailure("reset".into())), ok(503, ""), ok(200, "body")]);
        let f = Fetcher::builder(ResponseCache::new(dir.path()))
            .transport(t.clone())
            .retry(quick())
            .rate_limit(RateLimiter::unlimited())
            .build();
        assert_eq!(f.request("ep", "q", "https://h/x").unwrap().body, b"body");
        assert_eq!(t.calls.load(Ordering::SeqCst), 3);
        // second call is a cache hit
        assert_eq!(f.request("ep", "q", "https://h/x").unwrap().body, b"body");
        assert_eq!(t.calls.load(Ordering::SeqCst), 3);
        assert_eq!((f.cache_hits(), f.network_fetches()), (1, 1));
    }

    #[test]
    fn exhausted_rate_limit_is_surfaced() {
        let dir = tempfile::tempdir().unwrap();
        let limited = || {
            Ok(HttpResponse { status: 429, retry_after: Some(Duration::from_secs(5)), body: vec![] })
        };
        let t = Scripted::new(vec![limited(), limited(), limited()]);
        let f = Fetcher::builder(ResponseCache::new(dir.path())).transport(t).retry(quick()).build();
        let err = f.request("ep", "q", "https://h/x").unwrap_err();
        assert!(matches!(err, IngestError::RateLimited { retry_after: Some(_) }), "{err}");
    }

    #[test]
    fn offline_cache_miss_fails() {
        let dir = tempfile::tempdir().unwrap();
        let f = Fetcher::builder(ResponseCache::new(dir.path())).offline().build();
        assert!(f.is_offline());
        assert!(matches!(f.request("ep", "q", "u"), Err(IngestError::CacheMiss { .. })));
    }

    #[test]
    fn client_errors_are_not_retried() {
        let dir = tempfile::tempdir().unwrap();
        let t = Scripted::new(vec![ok(400, "bad request")]);
        let f = Fetcher::builder(ResponseCache::new(dir.path())).transport(t.clone()).retry(quick()).build();
        assert!(matches!(f.request("ep", "q", "https://h/x"), Err(IngestError::Transport(_))));
        assert_eq!(t.calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn retry_delay_honors_hint_and_backoff() {
        let p = RetryPolicy::default();
        assert_eq!(p.delay(0, None), Duration::from_secs(1));
        assert_eq!(p.delay(2, None), Duration::from_secs(4));
        assert_eq!(p.delay(0, Some(Duration::from_secs(7))), Duration::from_secs(7));
        assert_eq!(p.delay(0, Some(Duration::from_secs(700))), Duration::from_secs(60));
    }

    #[test]
    fn host_parsing() {
        assert_eq!(host_of("https://wikimedia.org/api/rest_v1/x"), "wikimedia.org");
        assert_eq!(host_of("https://api.gdeltproject.org?x"), "api.gdeltproject.org");
    }

    #[test]
    fn host_slots_bound_concurrency() {
        let slots = HostSlots::new(2);
        let peak = AtomicUsize::new(0);
        let current = AtomicUsize::new(0);
        std::thread::scope(|s| {
            for _ in 0..8 {
                s.spawn(|| {
                    let _p = slots.acquire("h");
                    let now = current.fetch_add(1, Ordering::SeqCst) + 1;
                    peak.fetch_max(now, Ordering::SeqCst);
                    std::thread::sleep(Duration::from_millis(5));
                    current.fetch_sub(1, Ordering::SeqCst);
                });
            }
        });
        assert!(peak.load(Ordering::SeqCst) <= 2);
    }
}
