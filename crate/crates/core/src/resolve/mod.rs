//! Metadata resolution: fetch raw provider responses for an identifier and
//! normalize them into one homogeneous bibliographic record.
//!
//! Every provider needs its own fetch endpoint and normalizer; there is
//! little commonality between them. CrossRef and DataCite DOIs share one
//! route: CSL JSON content negotiation against doi.org, which answers via
//! redirects (303 included).

mod arxiv;
mod csl;
mod pubmed;
mod webpage;

pub use arxiv::normalize_arxiv;
pub use csl::normalize_csl;
pub use pubmed::normalize_pubmed;
pub use webpage::normalize_webpage;

use crate::cache::{CacheStore, Lookup};
use crate::http::{HttpClient, RawResponse};
use crate::ident::{registration_agency, Agency, Identifier, IdentifierKind, RaMemo};
use crate::record::{BibliographicRecord, Provider};

pub const CSL_JSON_MEDIA_TYPE: &str = "application/vnd.citationstyles.csl+json";

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum ResolveError {
    #[error("network error for {url}: {message}")]
    Network { url: String, message: String },
    #[error("{id}: not found at its provider")]
    NotFound { id: String },
    #[error("{doi}: no registration agency knows this DOI")]
    UnknownDoi { doi: String },
    #[error("{doi}: registration agency '{agency}' is not supported")]
    UnsupportedAgency { doi: String, agency: String },
    #[error("{id}: malformed metadata: {message}")]
    MalformedMetadata { id: String, message: String },
}

/// A normalized record plus non-fatal notes gathered while normalizing.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub record: BibliographicRecord,
    pub warnings: Vec<String>,
}

impl Normalized {
    pub fn clean(record: BibliographicRecord) -> Self {
        Normalized {
            record,
            warnings: Vec::new(),
        }
    }
}

/// CSL JSON for a DOI via doi.org content negotiation. Serves both CrossRef
/// and DataCite DOIs.
pub fn fetch_csl(client: &dyn HttpClient, doi: &str) -> Result<RawResponse, ResolveError> {
    let url = format!("https://doi.org/{doi}");
    let resp = client.get(&url, Some(CSL_JSON_MEDIA_TYPE))?;
    match resp.status {
        404 | 410 => Err(ResolveError::NotFound {
            id: doi.to_string(),
        }),
        s if !(200..300).contains(&s) => Err(ResolveError::Network {
            url,
            message: format!("status {s}"),
        }),
        _ => Ok(resp),
    }
}

/// NCBI esummary JSON for a PubMed id.
pub fn fetch_pubmed(client: &dyn HttpClient, pmid: &str) -> Result<RawResponse, ResolveError> {
    let url = format!(
        "https://eutils.ncbi.nlm.nih.gov/entrez/eutils/esummary.fcgi?db=pubmed&retmode=json&id={pmid}"
    );
    let resp = client.get(&url, None)?;
    if !(200..300).contains(&resp.status) {
        return Err(ResolveError::Network {
            url,
            message: format!("status {}", resp.status),
        });
    }
    Ok(resp)
}

/// Atom feed for an arXiv id.
pub fn fetch_arxiv(client: &dyn HttpClient, arxiv_id: &str) -> Result<RawResponse, ResolveError> {
    let url = format!("https://export.arxiv.org/api/query?id_list={arxiv_id}");
    let resp = client.get(&url, None)?;
    if !(200..300).contains(&resp.status) {
        return Err(ResolveError::Network {
            url,
            message: format!("status {}", resp.status),
        });
    }
    Ok(resp)
}

/// An arbitrary web page; only HTML bodies are useful for metadata.
pub fn fetch_webpage(client: &dyn HttpClient, url: &str) -> Result<RawResponse, ResolveError> {
    let resp = client.get(url, Some("text/html"))?;
    if (400..600).contains(&resp.status) {
        return Err(ResolveError::NotFound {
            id: url.to_string(),
        });
    }
    Ok(resp)
}

/// Resolution front end holding the transport and the per-run agency memo.
pub struct Resolver<'a> {
    pub client: &'a dyn HttpClient,
    pub ra_memo: &'a RaMemo,
}

impl<'a> Resolver<'a> {
    pub fn new(client: &'a dyn HttpClient, ra_memo: &'a RaMemo) -> Self {
        Resolver { client, ra_memo }
    }

    /// Fetch and normalize, no cache involved. Exactly one metadata fetch,
    /// plus at most one registration-agency lookup for DOIs.
    pub fn fetch_record(&self, id: &Identifier) -> Result<Normalized, ResolveError> {
        match id.kind {
            IdentifierKind::DoiUnknownAgency => {
                let agency = registration_agency(&id.value, self.client, self.ra_memo)?;
                let provider = match &agency {
                    Agency::Crossref => Provider::Crossref,
                    Agency::Datacite => Provider::Datacite,
                    Agency::Other(name) => {
                        return Err(ResolveError::UnsupportedAgency {
                            doi: id.value.clone(),
                            agency: name.clone(),
                        })
                    }
                };
                let raw = fetch_csl(self.client, &id.value)?;
                normalize_csl(&raw, &id.with_agency(&agency), provider)
            }
            IdentifierKind::DoiCrossref => {
                let raw = fetch_csl(self.client, &id.value)?;
                normalize_csl(&raw, id, Provider::Crossref)
            }
            IdentifierKind::DoiDatacite => {
                let raw = fetch_csl(self.client, &id.value)?;
                normalize_csl(&raw, id, Provider::Datacite)
            }
            IdentifierKind::Pubmed => {
                let raw = fetch_pubmed(self.client, &id.value)?;
                normalize_pubmed(&raw, id)
            }
            IdentifierKind::Arxiv => {
                let raw = fetch_arxiv(self.client, &id.value)?;
                normalize_arxiv(&raw, id)
            }
            IdentifierKind::Url => {
                let raw = fetch_webpage(self.client, &id.value)?;
                normalize_webpage(&raw, id)
            }
        }
    }

    /// Cache-first resolution: a hit within the TTL costs zero network
    /// calls; anything else fetches, stores and returns the fresh record.
    pub fn resolve(
        &self,
        id: &Identifier,
        cache: &mut CacheStore,
        now: i64,
        ttl_secs: i64,
    ) -> Result<BibliographicRecord, ResolveError> {
        let key = id.canonical_string();
        if let Lookup::Hit(record) = cache.lookup(&key, now, ttl_secs) {
            return Ok(record.clone());
        }
        let normalized = self.fetch_record(id)?;
        let provider = normalized.record.provider;
        cache
            .insert(&key, normalized.record.clone(), now, provider)
            .expect("record id always matches its own cache key");
        Ok(normalized.record)
    }
}

/// Shared helpers for walking loosely-typed provider JSON.
pub(crate) mod json {
    use serde_json::Value;

    pub fn str_field(v: &Value, key: &str) -> Option<String> {
        v.get(key)
            .and_then(|x| x.as_str())
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
    }

    /// A field that providers sometimes encode as a string, sometimes as a
    /// number, and sometimes as a one-element array of either.
    pub fn stringish_field(v: &Value, key: &str) -> Option<String> {
        let field = v.get(key)?;
        stringish(field)
    }

    pub fn stringish(v: &Value) -> Option<String> {
        match v {
            Value::String(s) => {
                let t = s.trim();
                (!t.is_empty()).then(|| t.to_string())
            }
            Value::Number(n) => Some(n.to_string()),
            Value::Array(items) => items.first().and_then(stringish),
            _ => None,
        }
    }
}
