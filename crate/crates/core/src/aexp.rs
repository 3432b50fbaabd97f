//! ArrayExpress experiment lookups and `[aexp]` field substitution.
//!
//! Accessions resolve through the EBI BioStudies JSON API; the interesting
//! values (organisms, release date, title, experiment types) sit in nested
//! name/value attribute lists, so extraction walks the whole study tree.
//! Successful substitutions always hyperlink to the accession's entry page.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::cache::{CacheStore, Lookup};
use crate::html::{escape_attr, escape_text};
use crate::http::HttpClient;
use crate::resolve::ResolveError;
use crate::scan::ShortcodeToken;

static ACCESSION_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^E-[A-Z]{4}-\d+$").unwrap());
static DATE_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\d{4}-\d{2}-\d{2}$").unwrap());

/// A validated ArrayExpress accession like `E-MEXP-1551`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ArrayExpressAccession(String);

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
#[error("'{0}' is not an ArrayExpress accession (expected E-XXXX-n)")]
pub struct BadAccession(pub String);

impl ArrayExpressAccession {
    pub fn parse(raw: &str) -> Result<Self, BadAccession> {
        let raw = raw.trim();
        if ACCESSION_RE.is_match(raw) {
            Ok(ArrayExpressAccession(raw.to_string()))
        } else {
            Err(BadAccession(raw.to_string()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn cache_key(&self) -> String {
        format!("aexp:{}", self.0)
    }

    pub fn api_url(&self) -> String {
        format!("https://www.ebi.ac.uk/biostudies/api/v1/studies/{}", self.0)
    }

    /// Reader-facing entry page; every substitution links here.
    pub fn entry_url(&self) -> String {
        format!(
            "https://www.ebi.ac.uk/biostudies/arrayexpress/studies/{}",
            self.0
        )
    }
}

impl std::fmt::Display for ArrayExpressAccession {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub accession: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub species: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub release_date: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub experiment_types: Vec<String>,
}

/// Collect `{name, value}` attribute pairs from a BioStudies node and all
/// its subsections, in document order.
fn walk_attributes(node: &Value, out: &mut Vec<(String, String)>) {
    if let Some(attrs) = node.get("attributes").and_then(|a| a.as_array()) {
        for attr in attrs {
            let name = attr.get("name").and_then(|n| n.as_str()).unwrap_or("");
            let value = attr.get("value").and_then(|v| v.as_str()).unwrap_or("");
            if !name.is_empty() && !value.trim().is_empty() {
                out.push((name.to_ascii_lowercase(), value.trim().to_string()));
            }
        }
    }
    if let Some(section) = node.get("section") {
        walk_attributes(section, out);
    }
    if let Some(subsections) = node.get("subsections").and_then(|s| s.as_array()) {
        for sub in subsections {
            // Subsection arrays may nest arrays of sections.
            if sub.is_array() {
                for inner in sub.as_array().unwrap() {
                    walk_attributes(inner, out);
                }
            } else {
                walk_attributes(sub, out);
            }
        }
    }
}

fn push_unique(list: &mut Vec<String>, value: &str) {
    if !list.iter().any(|existing| existing == value) {
        list.push(value.to_string());
    }
}

/// Fetch and extract a study record, no cache involved.
pub fn fetch_experiment(
    client: &dyn HttpClient,
    acc: &ArrayExpressAccession,
) -> Result<(ExperimentRecord, Vec<String>), ResolveError> {
    let url = acc.api_url();
    let resp = client.get(&url, None)?;
    if resp.status == 404 || resp.status == 410 {
        return Err(ResolveError::NotFound {
            id: acc.cache_key(),
        });
    }
    if !(200..300).contains(&resp.status) {
        return Err(ResolveError::Network {
            url,
            message: format!("status {}", resp.status),
        });
    }
    let v: Value =
        serde_json::from_slice(&resp.bytes).map_err(|e| ResolveError::MalformedMetadata {
            id: acc.cache_key(),
            message: format!("study JSON: {e}"),
        })?;
    let mut pairs = Vec::new();
    walk_attributes(&v, &mut pairs);
    let mut warnings = Vec::new();
    let mut species = Vec::new();
    let mut experiment_types = Vec::new();
    let mut release_date = None;
    let mut name = None;
    for (key, value) in &pairs {
        match key.as_str() {
            "organism" => push_unique(&mut species, value),
            "study type" | "experiment type" => push_unique(&mut experiment_types, value),
            "releasedate" | "release date" => {
                if release_date.is_none() {
                    if DATE_RE.is_match(value) {
                        release_date = Some(value.clone());
                    } else {
                        warnings.push(format!(
                            "{}: release date '{value}' is not YYYY-MM-DD; ignored",
                            acc.as_str()
                        ));
                    }
                }
            }
            "title" if name.is_none() => name = Some(value.clone()),
            _ => {}
        }
    }
    if species.is_empty() && release_date.is_none() {
        return Err(ResolveError::MalformedMetadata {
            id: acc.cache_key(),
            message: "study has neither organism nor release date".to_string(),
        });
    }
    Ok((
        ExperimentRecord {
            accession: acc.as_str().to_string(),
            species,
            release_date,
            name,
            experiment_types,
        },
        warnings,
    ))
}

/// Cache-first experiment resolution under the key `aexp:{accession}`.
pub fn resolve_experiment(
    acc: &ArrayExpressAccession,
    client: &dyn HttpClient,
    cache: &mut CacheStore,
    now: i64,
    ttl_secs: i64,
) -> Result<ExperimentRecord, ResolveError> {
    let key = acc.cache_key();
    if let Lookup::Hit(record) = cache.lookup_aexp(&key, now, ttl_secs) {
        return Ok(record.clone());
    }
    let (record, _warnings) = fetch_experiment(client, acc)?;
    cache
        .insert_aexp(&key, record.clone(), now)
        .expect("experiment record always matches its own cache key");
    Ok(record)
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum SubstituteError {
    #[error("unknown field '{0}' (expected species, releasedate, name or experimenttype)")]
    UnknownField(String),
    #[error("{accession}: no {field} recorded")]
    FieldUnavailable {
        accession: String,
        field: &'static str,
    },
    #[error(transparent)]
    BadAccession(#[from] BadAccession),
}

/// Inline error marker used when a substitution cannot be carried out.
pub fn error_span(message: &str) -> String {
    format!(
        r#"<span class="aexp-error" title="{}">[aexp?]</span>"#,
        escape_attr(message)
    )
}

/// Replace an `[aexp]` shortcode body (a field name) with the hyperlinked
/// field value. Every successful substitution links to the accession's
/// entry page; the species value is additionally italicized.
pub fn substitute(
    token: &ShortcodeToken,
    record: &ExperimentRecord,
) -> Result<String, SubstituteError> {
    let field = token
        .body
        .as_deref()
        .unwrap_or("")
        .trim()
        .to_ascii_lowercase();
    let acc = ArrayExpressAccession::parse(&record.accession)?;
    let href = escape_attr(&acc.entry_url());
    let unavailable = |field: &'static str| SubstituteError::FieldUnavailable {
        accession: acc.as_str().to_string(),
        field,
    };
    match field.as_str() {
        "species" => {
            if record.species.is_empty() {
                return Err(unavailable("species"));
            }
            let joined = escape_text(&record.species.join("; "));
            Ok(format!(r#"<a href="{href}"><i>{joined}</i></a>"#))
        }
        "releasedate" => match &record.release_date {
            Some(date) => Ok(format!(r#"<a href="{href}">{}</a>"#, escape_text(date))),
            None => Err(unavailable("release date")),
        },
        "name" => match &record.name {
            Some(name) => Ok(format!(r#"<a href="{href}">{}</a>"#, escape_text(name))),
            None => Err(unavailable("name")),
        },
        "experimenttype" => {
            if record.experiment_types.is_empty() {
                return Err(unavailable("experiment type"));
            }
            let joined = escape_text(&record.experiment_types.join("; "));
            Ok(format!(r#"<a href="{href}">{joined}</a>"#))
        }
        other => Err(SubstituteError::UnknownField(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::http::MemoryClient;
    use crate::scan::{scan_shortcodes, SourceDocument, TagSpec};

    pub(super) const STUDY_JSON: &str = r#"{
        "accno":"E-MEXP-1551",
        "attributes":[
            {"name":"Title","value":"Transcription profiling of yeast cultures"},
            {"name":"ReleaseDate","value":"2010-02-24"}
        ],
        "section":{
            "accno":null,
            "type":"Study",
            "attributes":[
                {"name":"Study type","value":"transcription profiling by array"},
                {"name":"Organism","value":"Saccharomyces cerevisiae"}
            ],
            "subsections":[
                {"type":"Samples","attributes":[{"name":"Organism","value":"Saccharomyces cerevisiae"}]}
            ]
        }
    }"#;

    fn record() -> ExperimentRecord {
        ExperimentRecord {
            accession: "E-MEXP-1551".to_string(),
            species: vec!["Saccharomyces cerevisiae".to_string()],
            release_date: Some("2010-02-24".to_string()),
            name: Some("Transcription profiling of yeast cultures".to_string()),
            experiment_types: vec!["transcription profiling by array".to_string()],
        }
    }

    fn token(body: &str) -> ShortcodeToken {
        let text = format!(r#"[aexp id="E-MEXP-1551"]{body}[/aexp]"#);
        let doc = SourceDocument::from_text(text);
        let (tokens, _) = scan_shortcodes(&doc, &[TagSpec::required("aexp")], &[]);
        tokens.into_iter().next().unwrap()
    }

    #[test]
    fn accession_pattern_is_enforced() {
        assert!(ArrayExpressAccession::parse("E-MEXP-1551").is_ok());
        assert!(ArrayExpressAccession::parse("BAD").is_err());
        assert!(ArrayExpressAccession::parse("E-ME-1").is_err());
        assert!(ArrayExpressAccession::parse("E-MEXP-").is_err());
    }

    #[test]
    fn fetch_extracts_species_and_release_date() {
        let acc = ArrayExpressAccession::parse("E-MEXP-1551").unwrap();
        let client = MemoryClient::new().with(&acc.api_url(), 200, "application/json", STUDY_JSON);
        let (record, warnings) = fetch_experiment(&client, &acc).unwrap();
        assert_eq!(record.species, vec!["Saccharomyces cerevisiae"]);
        assert_eq!(record.release_date.as_deref(), Some("2010-02-24"));
        assert_eq!(
            record.name.as_deref(),
            Some("Transcription profiling of yeast cultures")
        );
        assert_eq!(
            record.experiment_types,
            vec!["transcription profiling by array"]
        );
        assert!(warnings.is_empty());
    }

    #[test]
    fn unassigned_accession_is_not_found() {
        let acc = ArrayExpressAccession::parse("E-XXXX-0").unwrap();
        let client = MemoryClient::new().with(
            &acc.api_url(),
            404,
            "application/json",
            r#"{"log":{"level":"ERROR","message":"Study not found"}}"#,
        );
        assert!(matches!(
            fetch_experiment(&client, &acc),
            Err(ResolveError::NotFound { .. })
        ));
    }

    #[test]
    fn study_without_organism_or_date_is_malformed() {
        let acc = ArrayExpressAccession::parse("E-MEXP-1551").unwrap();
        let client = MemoryClient::new().with(
            &acc.api_url(),
            200,
            "application/json",
            r#"{"accno":"E-MEXP-1551","attributes":[{"name":"Title","value":"T"}]}"#,
        );
        assert!(matches!(
            fetch_experiment(&client, &acc),
            Err(ResolveError::MalformedMetadata { .. })
        ));
    }

    #[test]
    fn resolve_experiment_caches() {
        let acc = ArrayExpressAccession::parse("E-MEXP-1551").unwrap();
        let client = MemoryClient::new().with(&acc.api_url(), 200, "application/json", STUDY_JSON);
        let mut cache = CacheStore::new();
        let first = resolve_experiment(&acc, &client, &mut cache, 100, 3600).unwrap();
        let second = resolve_experiment(&acc, &client, &mut cache, 100, 3600).unwrap();
        assert_eq!(first, second);
        assert_eq!(client.requests(), 1);
    }

    #[test]
    fn species_substitution_is_italic_hyperlink() {
        let html = substitute(&token("species"), &record()).unwrap();
        assert_eq!(
            html,
            r#"<a href="https://www.ebi.ac.uk/biostudies/arrayexpress/studies/E-MEXP-1551"><i>Saccharomyces cerevisiae</i></a>"#
        );
    }

    #[test]
    fn releasedate_substitution_is_plain_hyperlink() {
        let html = substitute(&token("releasedate"), &record()).unwrap();
        assert_eq!(
            html,
            r#"<a href="https://www.ebi.ac.uk/biostudies/arrayexpress/studies/E-MEXP-1551">2010-02-24</a>"#
        );
    }

    #[test]
    fn unknown_field_is_an_error() {
        let err = substitute(&token("flavour"), &record()).unwrap_err();
        assert_eq!(err, SubstituteError::UnknownField("flavour".to_string()));
        let span = error_span(&err.to_string());
        assert!(span.starts_with(r#"<span class="aexp-error""#));
        assert!(
            span.contains("unknown field &#39;flavour&#39;")
                || span.contains("unknown field 'flavour'")
        );
    }

    #[test]
    fn missing_field_value_is_an_error() {
        let mut r = record();
        r.release_date = None;
        assert!(matches!(
            substitute(&token("releasedate"), &r),
            Err(SubstituteError::FieldUnavailable {
                field: "release date",
                ..
            })
        ));
    }

    #[test]
    fn multiple_species_join_with_semicolon() {
        let mut r = record();
        r.species.push("Homo sapiens".to_string());
        let html = substitute(&token("species"), &r).unwrap();
        assert!(html.contains("<i>Saccharomyces cerevisiae; Homo sapiens</i>"));
    }

    #[test]
    fn field_names_are_case_insensitive_and_trimmed() {
        let html = substitute(&token(" Species "), &record()).unwrap();
        assert!(html.contains("<i>Saccharomyces cerevisiae</i>"));
    }
}
