//! HTTP transport abstraction: a live client, a fixture-replay client for
//! offline runs, and counting/in-memory clients for instrumentation.
//!
//! Fixture files are keyed by the sha256 of the request URL and hold a raw
//! HTTP exchange: status line, header lines, blank line, body. The body is
//! replayed bit-exactly.

use std::collections::BTreeMap;
use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use sha2::{Digest, Sha256};

use crate::resolve::ResolveError;

/// A fetched payload with enough context for diagnostics. The status is
/// recorded even when it is an error status.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawResponse {
    pub status: u16,
    pub media_type: String,
    pub bytes: Vec<u8>,
    pub source_url: String,
}

pub trait HttpClient: Send + Sync {
    /// GET a URL, following redirects. Transport failures are errors;
    /// HTTP error statuses come back as responses.
    fn get(&self, url: &str, accept: Option<&str>) -> Result<RawResponse, ResolveError>;
}

/// Fixture file name for a request URL: `{sha256(url)}.http`.
pub fn fixture_file_name(url: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(url.as_bytes());
    format!("{}.http", hex::encode(hasher.finalize()))
}

/// Serialize an exchange into the fixture format.
pub fn encode_fixture(status: u16, media_type: &str, body: &[u8]) -> Vec<u8> {
    let mut out = format!("HTTP/1.1 {status} {}\r\n", reason_phrase(status)).into_bytes();
    out.extend_from_slice(format!("Content-Type: {media_type}\r\n").as_bytes());
    out.extend_from_slice(format!("Content-Length: {}\r\n", body.len()).as_bytes());
    out.extend_from_slice(b"\r\n");
    out.extend_from_slice(body);
    out
}

/// Write a fixture for `url` into `dir`, creating the directory if needed.
pub fn write_fixture(
    dir: &Path,
    url: &str,
    status: u16,
    media_type: &str,
    body: &[u8],
) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(fixture_file_name(url));
    std::fs::write(&path, encode_fixture(status, media_type, body))?;
    Ok(path)
}

fn reason_phrase(status: u16) -> &'static str {
    match status {
        200 => "OK",
        301 => "Moved Permanently",
        303 => "See Other",
        404 => "Not Found",
        410 => "Gone",
        _ => "",
    }
}

fn parse_fixture(bytes: &[u8], url: &str) -> Result<RawResponse, String> {
    let split = find_blank_line(bytes).ok_or("fixture has no blank line after headers")?;
    let head = std::str::from_utf8(&bytes[..split.0]).map_err(|_| "fixture head is not UTF-8")?;
    let body = bytes[split.1..].to_vec();
    let mut lines = head.split("\r\n").flat_map(|l| l.split('\n'));
    let status_line = lines.next().ok_or("fixture is empty")?;
    let mut parts = status_line.split_ascii_whitespace();
    let proto = parts.next().unwrap_or("");
    if !proto.starts_with("HTTP/") {
        return Err(format!("bad status line '{status_line}'"));
    }
    let status: u16 = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| format!("bad status in '{status_line}'"))?;
    let mut media_type = String::new();
    for line in lines {
        if let Some((name, value)) = line.split_once(':') {
            if name.trim().eq_ignore_ascii_case("content-type") {
                media_type = value.trim().to_string();
            }
        }
    }
    Ok(RawResponse {
        status,
        media_type,
        bytes: body,
        source_url: url.to_string(),
    })
}

/// Byte index of the head/body separator: (end of head, start of body).
fn find_blank_line(bytes: &[u8]) -> Option<(usize, usize)> {
    let crlf = bytes
        .windows(4)
        .position(|w| w == b"\r\n\r\n")
        .map(|p| (p, p + 4));
    let lf = bytes
        .windows(2)
        .position(|w| w == b"\n\n")
        .map(|p| (p, p + 2));
    match (crlf, lf) {
        (Some(a), Some(b)) => Some(if a.0 <= b.0 { a } else { b }),
        (Some(a), None) => Some(a),
        (None, Some(b)) => Some(b),
        (None, None) => None,
    }
}

/// Replays frozen responses from a fixture directory. Any request without a
/// fixture is a network error, which keeps offline runs fully deterministic.
pub struct FixtureClient {
    dir: PathBuf,
}

impl FixtureClient {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        FixtureClient { dir: dir.into() }
    }
}

impl HttpClient for FixtureClient {
    fn get(&self, url: &str, _accept: Option<&str>) -> Result<RawResponse, ResolveError> {
        let path = self.dir.join(fixture_file_name(url));
        let bytes = std::fs::read(&path).map_err(|_| ResolveError::Network {
            url: url.to_string(),
            message: "offline and no fixture for this request".to_string(),
        })?;
        parse_fixture(&bytes, url).map_err(|message| ResolveError::Network {
            url: url.to_string(),
            message,
        })
    }
}

/// In-memory response map, mostly for tests and embedders.
#[derive(Default)]
pub struct MemoryClient {
    map: BTreeMap<String, RawResponse>,
    count: AtomicU64,
}

impl MemoryClient {
    pub fn new() -> Self {
        MemoryClient::default()
    }

    pub fn insert(&mut self, url: impl Into<String>, response: RawResponse) {
        self.map.insert(url.into(), response);
    }

    pub fn with(mut self, url: &str, status: u16, media_type: &str, body: &str) -> Self {
        self.insert(
            url.to_string(),
            RawResponse {
                status,
                media_type: media_type.to_string(),
                bytes: body.as_bytes().to_vec(),
                source_url: url.to_string(),
            },
        );
        self
    }

    /// Number of requests served or refused so far.
    pub fn requests(&self) -> u64 {
        self.count.load(Ordering::SeqCst)
    }
}

impl HttpClient for MemoryClient {
    fn get(&self, url: &str, _accept: Option<&str>) -> Result<RawResponse, ResolveError> {
        self.count.fetch_add(1, Ordering::SeqCst);
        self.map
            .get(url)
            .cloned()
            .ok_or_else(|| ResolveError::Network {
                url: url.to_string(),
                message: "no response configured".to_string(),
            })
    }
}

/// Retries transport-level failures a fixed number of times. HTTP error
/// statuses are responses, not failures, and are never retried.
pub struct RetryingClient<C> {
    inner: C,
    retries: u32,
}

impl<C: HttpClient> RetryingClient<C> {
    pub fn new(inner: C, retries: u32) -> Self {
        RetryingClient { inner, retries }
    }
}

impl<C: HttpClient> HttpClient for RetryingClient<C> {
    fn get(&self, url: &str, accept: Option<&str>) -> Result<RawResponse, ResolveError> {
        let mut last = None;
        for _ in 0..=self.retries {
            match self.inner.get(url, accept) {
                Ok(resp) => return Ok(resp),
                Err(e) => last = Some(e),
            }
        }
        Err(last.expect("at least one attempt"))
    }
}

/// Wraps another client and counts every request made through it.
pub struct CountingClient<'a> {
    inner: &'a dyn HttpClient,
    count: AtomicU64,
}

impl<'a> CountingClient<'a> {
    pub fn new(inner: &'a dyn HttpClient) -> Self {
        CountingClient {
            inner,
            count: AtomicU64::new(0),
        }
    }

    pub fn requests(&self) -> u64 {
        self.count.load(Ordering::SeqCst)
    }
}

impl HttpClient for CountingClient<'_> {
    fn get(&self, url: &str, accept: Option<&str>) -> Result<RawResponse, ResolveError> {
        self.count.fetch_add(1, Ordering::SeqCst);
        self.inner.get(url, accept)
    }
}

/// Live HTTP client. Follows redirects (303 included) up to the configured
/// limit and enforces a minimum interval between requests to the same host.
pub struct UreqClient {
    agent: ureq::Agent,
    min_host_interval: Duration,
    last_request: Mutex<HashMap<String, Instant>>,
}

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);
pub const DEFAULT_MAX_REDIRECTS: u32 = 5;
pub const DEFAULT_HOST_INTERVAL: Duration = Duration::from_millis(100);

impl UreqClient {
    pub fn new(timeout: Duration, max_redirects: u32) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .max_redirects(max_redirects)
            .http_status_as_error(false)
            .user_agent(concat!("docenrich/", env!("CARGO_PKG_VERSION")))
            .build();
        UreqClient {
            agent: config.into(),
            min_host_interval: DEFAULT_HOST_INTERVAL,
            last_request: Mutex::new(HashMap::new()),
        }
    }

    fn throttle(&self, url: &str) {
        let host = match url::Url::parse(url)
            .ok()
            .and_then(|u| u.host_str().map(String::from))
        {
            Some(h) => h,
            None => return,
        };
        let wait = {
            let map = self.last_request.lock().unwrap();
            map.get(&host)
                .and_then(|last| self.min_host_interval.checked_sub(last.elapsed()))
        };
        if let Some(wait) = wait {
            std::thread::sleep(wait);
        }
        self.last_request
            .lock()
            .unwrap()
            .insert(host, Instant::now());
    }
}

impl Default for UreqClient {
    fn default() -> Self {
        UreqClient::new(DEFAULT_TIMEOUT, DEFAULT_MAX_REDIRECTS)
    }
}

impl HttpClient for UreqClient {
    fn get(&self, url: &str, accept: Option<&str>) -> Result<RawResponse, ResolveError> {
        self.throttle(url);
        let mut request = self.agent.get(url);
        if let Some(accept) = accept {
            request = request.header("Accept", accept);
        }
        let mut response = request.call().map_err(|e| ResolveError::Network {
            url: url.to_string(),
            message: e.to_string(),
        })?;
        let status = response.status().as_u16();
        let media_type = response
            .headers()
            .get("content-type")
            .and_then(|v| v.to_str().ok())
            .unwrap_or("")
            .to_string();
        let bytes = response
            .body_mut()
            .read_to_vec()
            .map_err(|e| ResolveError::Network {
                url: url.to_string(),
                message: format!("reading body: {e}"),
            })?;
        Ok(RawResponse {
            status,
            media_type,
            bytes,
            source_url: url.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_name_is_sha256_of_url() {
        // sha256("https://example.org/"), computed independently.
        assert_eq!(
            fixture_file_name("https://example.org/"),
            "8198d1bac40a1033653a78e48800cefc9e6b974ff075c66e5548b5c1e145a2b0.http"
        );
    }

    #[test]
    fn fixture_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let body = b"{\"x\": 1}\n\xff\x00binary tail";
        write_fixture(
            dir.path(),
            "https://example.org/a",
            200,
            "application/json",
            body,
        )
        .unwrap();
        let client = FixtureClient::new(dir.path());
        let resp = client.get("https://example.org/a", None).unwrap();
        assert_eq!(resp.status, 200);
        assert_eq!(resp.media_type, "application/json");
        assert_eq!(resp.bytes, body);
    }

    #[test]
    fn missing_fixture_is_network_error() {
        let dir = tempfile::tempdir().unwrap();
        let client = FixtureClient::new(dir.path());
        assert!(matches!(
            client.get("https://example.org/none", None),
            Err(ResolveError::Network { .. })
        ));
    }

    #[test]
    fn fixture_parses_lf_only_heads() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(fixture_file_name("u"));
        std::fs::write(
            &path,
            b"HTTP/1.1 404 Not Found\nContent-Type: text/plain\n\ngone",
        )
        .unwrap();
        let resp = FixtureClient::new(dir.path()).get("u", None).unwrap();
        assert_eq!(resp.status, 404);
        assert_eq!(resp.bytes, b"gone");
    }

    #[test]
    fn counting_client_counts() {
        let inner = MemoryClient::new().with("u", 200, "text/plain", "x");
        let counting = CountingClient::new(&inner);
        let _ = counting.get("u", None);
        let _ = counting.get("missing", None);
        assert_eq!(counting.requests(), 2);
    }

    /// Fails a fixed number of times before answering.
    struct Flaky {
        failures: AtomicU64,
        attempts: AtomicU64,
    }

    impl HttpClient for Flaky {
        fn get(&self, url: &str, _accept: Option<&str>) -> Result<RawResponse, ResolveError> {
            self.attempts.fetch_add(1, Ordering::SeqCst);
            if self.failures.load(Ordering::SeqCst) > 0 {
                self.failures.fetch_sub(1, Ordering::SeqCst);
                return Err(ResolveError::Network {
                    url: url.to_string(),
                    message: "flaky".to_string(),
                });
            }
            Ok(RawResponse {
                status: 200,
                media_type: "text/plain".to_string(),
                bytes: b"ok".to_vec(),
                source_url: url.to_string(),
            })
        }
    }

    #[test]
    fn retrying_client_retries_transport_failures() {
        let flaky = Flaky {
            failures: AtomicU64::new(2),
            attempts: AtomicU64::new(0),
        };
        let client = RetryingClient::new(flaky, 2);
        assert!(client.get("u", None).is_ok());
        assert_eq!(client.inner.attempts.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn retrying_client_gives_up_after_budget() {
        let flaky = Flaky {
            failures: AtomicU64::new(5),
            attempts: AtomicU64::new(0),
        };
        let client = RetryingClient::new(flaky, 1);
        assert!(client.get("u", None).is_err());
        assert_eq!(client.inner.attempts.load(Ordering::SeqCst), 2);
    }
}
