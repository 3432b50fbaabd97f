//! Classification of raw citation strings into typed public identifiers.
//!
//! A raw string from a `[cite]` body is classified as a DOI, arXiv id,
//! PubMed id or plain URL, either against a declared `source` attribute or
//! by auto-detection in priority order DOI → arXiv → PubMed → URL. Wrapper
//! forms (`doi:`, resolver URLs, `arXiv:`, `PMID:`) are stripped so that the
//! same reference always canonicalizes to the same identifier.

use std::collections::BTreeMap;
use std::sync::{LazyLock, Mutex};

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::http::HttpClient;
use crate::resolve::ResolveError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IdentifierKind {
    /// DOI whose registration agency has been confirmed as CrossRef.
    DoiCrossref,
    /// DOI whose registration agency has been confirmed as DataCite.
    DoiDatacite,
    /// DOI before any agency lookup.
    DoiUnknownAgency,
    Pubmed,
    Arxiv,
    Url,
}

impl IdentifierKind {
    pub fn is_doi(&self) -> bool {
        matches!(
            self,
            IdentifierKind::DoiCrossref
                | IdentifierKind::DoiDatacite
                | IdentifierKind::DoiUnknownAgency
        )
    }
}

/// A classified identifier in canonical form. DOIs are lowercase and
/// wrapper-free; PubMed ids are bare digits; arXiv ids keep their native
/// case; URLs are kept as written.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Identifier {
    pub kind: IdentifierKind,
    pub value: String,
}

impl Identifier {
    /// Stable string form used as cache key and record id. Non-DOI kinds are
    /// prefixed with their scheme so keys from different providers can never
    /// collide.
    pub fn canonical_string(&self) -> String {
        match self.kind {
            IdentifierKind::DoiCrossref
            | IdentifierKind::DoiDatacite
            | IdentifierKind::DoiUnknownAgency => self.value.clone(),
            IdentifierKind::Pubmed => format!("pmid:{}", self.value),
            IdentifierKind::Arxiv => format!("arxiv:{}", self.value),
            IdentifierKind::Url => self.value.clone(),
        }
    }

    /// The external resolution URL a reader would follow.
    pub fn external_url(&self) -> String {
        match self.kind {
            IdentifierKind::DoiCrossref
            | IdentifierKind::DoiDatacite
            | IdentifierKind::DoiUnknownAgency => format!("https://doi.org/{}", self.value),
            IdentifierKind::Pubmed => format!("https://pubmed.ncbi.nlm.nih.gov/{}/", self.value),
            IdentifierKind::Arxiv => format!("https://arxiv.org/abs/{}", self.value),
            IdentifierKind::Url => self.value.clone(),
        }
    }

    /// Same identifier with the DOI kind refined after an agency lookup.
    pub fn with_agency(&self, agency: &Agency) -> Identifier {
        let kind = match agency {
            Agency::Crossref => IdentifierKind::DoiCrossref,
            Agency::Datacite => IdentifierKind::DoiDatacite,
            Agency::Other(_) => IdentifierKind::DoiUnknownAgency,
        };
        Identifier {
            kind,
            value: self.value.clone(),
        }
    }
}

/// A `source` attribute value on a `[cite]` shortcode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceTag {
    Doi,
    Pubmed,
    Arxiv,
    Url,
}

impl SourceTag {
    pub fn parse(s: &str) -> Option<SourceTag> {
        match s.trim().to_ascii_lowercase().as_str() {
            "doi" => Some(SourceTag::Doi),
            "pubmed" | "pmid" => Some(SourceTag::Pubmed),
            "arxiv" => Some(SourceTag::Arxiv),
            "url" => Some(SourceTag::Url),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum ClassifyError {
    #[error("'{0}' matches no supported identifier grammar")]
    NoGrammarMatches(String),
    #[error("'{raw}' is not a valid {expected} identifier")]
    SourceMismatch { raw: String, expected: &'static str },
    #[error("unknown source '{0}' (expected doi, pubmed, arxiv or url)")]
    UnknownSource(String),
    #[error("'{0}' is not a valid DOI")]
    MalformedDoi(String),
}

static DOI_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^10\.[0-9]{4,9}/\S+$").unwrap());
static ARXIV_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(\d{4}\.\d{4,5}(v\d+)?|[a-z-]+(\.[A-Z]{2})?/\d{7})$").unwrap());
static PMID_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[1-9][0-9]{0,7}$").unwrap());

fn strip_prefix_ci<'a>(s: &'a str, prefix: &str) -> Option<&'a str> {
    if s.len() >= prefix.len() && s[..prefix.len()].eq_ignore_ascii_case(prefix) {
        Some(&s[prefix.len()..])
    } else {
        None
    }
}

fn strip_any_prefix_ci<'a>(s: &'a str, prefixes: &[&str]) -> &'a str {
    for p in prefixes {
        if let Some(rest) = strip_prefix_ci(s, p) {
            return rest;
        }
    }
    s
}

const DOI_WRAPPERS: &[&str] = &[
    "doi:",
    "https://doi.org/",
    "http://doi.org/",
    "https://dx.doi.org/",
    "http://dx.doi.org/",
];

const ARXIV_WRAPPERS: &[&str] = &[
    "arxiv:",
    "https://arxiv.org/abs/",
    "http://arxiv.org/abs/",
    "https://export.arxiv.org/abs/",
    "http://export.arxiv.org/abs/",
];

const PUBMED_WRAPPERS: &[&str] = &[
    "pmid:",
    "https://pubmed.ncbi.nlm.nih.gov/",
    "http://pubmed.ncbi.nlm.nih.gov/",
    "https://www.ncbi.nlm.nih.gov/pubmed/",
    "http://www.ncbi.nlm.nih.gov/pubmed/",
];

fn try_doi(raw: &str) -> Option<String> {
    let stripped = strip_any_prefix_ci(raw, DOI_WRAPPERS).trim();
    if DOI_RE.is_match(&stripped.to_ascii_lowercase()) {
        Some(stripped.to_ascii_lowercase())
    } else {
        None
    }
}

fn try_arxiv(raw: &str) -> Option<String> {
    let stripped = strip_any_prefix_ci(raw, ARXIV_WRAPPERS).trim();
    if ARXIV_RE.is_match(stripped) {
        Some(stripped.to_string())
    } else {
        None
    }
}

fn try_pubmed(raw: &str, allow_bare: bool) -> Option<String> {
    let mut stripped = raw;
    let mut wrapped = false;
    for p in PUBMED_WRAPPERS {
        if let Some(rest) = strip_prefix_ci(stripped, p) {
            stripped = rest.trim_start().trim_end_matches('/');
            wrapped = true;
            break;
        }
    }
    if !wrapped && !allow_bare {
        return None;
    }
    let stripped = stripped.trim();
    if PMID_RE.is_match(stripped) {
        Some(stripped.to_string())
    } else {
        None
    }
}

fn try_url(raw: &str) -> Option<String> {
    let parsed = url::Url::parse(raw).ok()?;
    if matches!(parsed.scheme(), "http" | "https") && parsed.host_str().is_some() {
        Some(raw.to_string())
    } else {
        None
    }
}

/// Canonical form of a DOI: wrapper-free and lowercase. Idempotent.
pub fn canonical_doi(raw: &str) -> Result<String, ClassifyError> {
    try_doi(raw.trim()).ok_or_else(|| ClassifyError::MalformedDoi(raw.trim().to_string()))
}

/// Classify a raw citation string. With a declared source the string must
/// fit that grammar; otherwise grammars are tried in priority order
/// DOI → arXiv → PubMed → URL. In strict mode a bare digit string is not
/// auto-detected as a PubMed id and needs an explicit source.
pub fn classify(
    raw: &str,
    declared: Option<SourceTag>,
    strict: bool,
) -> Result<Identifier, ClassifyError> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Err(ClassifyError::NoGrammarMatches(String::new()));
    }
    if let Some(tag) = declared {
        return match tag {
            SourceTag::Doi => try_doi(raw)
                .map(|value| Identifier {
                    kind: IdentifierKind::DoiUnknownAgency,
                    value,
                })
                .ok_or(ClassifyError::SourceMismatch {
                    raw: raw.to_string(),
                    expected: "doi",
                }),
            SourceTag::Pubmed => try_pubmed(raw, true)
                .map(|value| Identifier {
                    kind: IdentifierKind::Pubmed,
                    value,
                })
                .ok_or(ClassifyError::SourceMismatch {
                    raw: raw.to_string(),
                    expected: "pubmed",
                }),
            SourceTag::Arxiv => try_arxiv(raw)
                .map(|value| Identifier {
                    kind: IdentifierKind::Arxiv,
                    value,
                })
                .ok_or(ClassifyError::SourceMismatch {
                    raw: raw.to_string(),
                    expected: "arxiv",
                }),
            SourceTag::Url => try_url(raw)
                .map(|value| Identifier {
                    kind: IdentifierKind::Url,
                    value,
                })
                .ok_or(ClassifyError::SourceMismatch {
                    raw: raw.to_string(),
                    expected: "url",
                }),
        };
    }
    if let Some(value) = try_doi(raw) {
        return Ok(Identifier {
            kind: IdentifierKind::DoiUnknownAgency,
            value,
        });
    }
    if let Some(value) = try_arxiv(raw) {
        return Ok(Identifier {
            kind: IdentifierKind::Arxiv,
            value,
        });
    }
    if let Some(value) = try_pubmed(raw, !strict) {
        return Ok(Identifier {
            kind: IdentifierKind::Pubmed,
            value,
        });
    }
    if let Some(value) = try_url(raw) {
        return Ok(Identifier {
            kind: IdentifierKind::Url,
            value,
        });
    }
    Err(ClassifyError::NoGrammarMatches(raw.to_string()))
}

/// The registration agency that minted a DOI.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Agency {
    Crossref,
    Datacite,
    Other(String),
}

/// Per-prefix memo for agency lookups; agencies are assigned per DOI prefix,
/// so one lookup covers every DOI sharing it. Concurrent inserts of the same
/// prefix store equal values, so last-writer-wins is fine.
#[derive(Debug, Default)]
pub struct RaMemo {
    map: Mutex<BTreeMap<String, Agency>>,
}

impl RaMemo {
    pub fn new() -> Self {
        RaMemo::default()
    }

    fn get(&self, prefix: &str) -> Option<Agency> {
        self.map.lock().unwrap().get(prefix).cloned()
    }

    fn put(&self, prefix: String, agency: Agency) {
        self.map.lock().unwrap().insert(prefix, agency);
    }
}

/// Look up the registration agency of a canonical DOI via the doi.org RA
/// endpoint, memoized per prefix for the run.
pub fn registration_agency(
    doi: &str,
    client: &dyn HttpClient,
    memo: &RaMemo,
) -> Result<Agency, ResolveError> {
    let prefix = doi.split('/').next().unwrap_or(doi).to_string();
    if let Some(agency) = memo.get(&prefix) {
        return Ok(agency);
    }
    let url = format!("https://doi.org/ra/{doi}");
    let resp = client.get(&url, None)?;
    if resp.status == 404 {
        return Err(ResolveError::UnknownDoi {
            doi: doi.to_string(),
        });
    }
    if !(200..300).contains(&resp.status) {
        return Err(ResolveError::Network {
            url,
            message: format!("RA endpoint returned status {}", resp.status),
        });
    }
    let parsed: serde_json::Value =
        serde_json::from_slice(&resp.bytes).map_err(|e| ResolveError::MalformedMetadata {
            id: doi.to_string(),
            message: format!("RA response: {e}"),
        })?;
    let entry = parsed
        .get(0)
        .ok_or_else(|| ResolveError::MalformedMetadata {
            id: doi.to_string(),
            message: "RA response is not a non-empty array".to_string(),
        })?;
    let agency = match entry.get("RA").and_then(|v| v.as_str()) {
        Some(ra) if ra.eq_ignore_ascii_case("crossref") => Agency::Crossref,
        Some(ra) if ra.eq_ignore_ascii_case("datacite") => Agency::Datacite,
        Some(ra) => Agency::Other(ra.to_string()),
        // The endpoint reports unknown DOIs as 200 with a "status" field.
        None => {
            return Err(ResolveError::UnknownDoi {
                doi: doi.to_string(),
            })
        }
    };
    memo.put(prefix, agency.clone());
    Ok(agency)
}
