//! Normalizer for CSL JSON payloads (CrossRef and DataCite DOIs).

use serde_json::Value;

use super::json::{str_field, stringish, stringish_field};
use super::{Normalized, ResolveError};
use crate::http::RawResponse;
use crate::ident::{canonical_doi, Identifier};
use crate::record::{AuthorName, BibliographicRecord, EntryType, IssuedDate, Provider, UNTITLED};

fn map_entry_type(csl_type: Option<&str>) -> EntryType {
    match csl_type {
        Some("article-journal") | Some("journal-article") => EntryType::ArticleJournal,
        Some("dataset") => EntryType::Dataset,
        _ => EntryType::Other,
    }
}

fn parse_authors(v: &Value, warnings: &mut Vec<String>) -> Vec<AuthorName> {
    let mut authors = Vec::new();
    let Some(items) = v.get("author").and_then(|a| a.as_array()) else {
        return authors;
    };
    for item in items {
        let family = str_field(item, "family");
        let given = str_field(item, "given");
        let literal = str_field(item, "literal").or_else(|| str_field(item, "name"));
        if family.is_none() && literal.is_none() {
            if given.is_none() {
                warnings.push("author entry without a usable name skipped".to_string());
                continue;
            }
            // Given name only; keep it as a literal so it still renders.
            authors.push(AuthorName::literal(given.unwrap()));
            continue;
        }
        if let Some(lit) = literal.filter(|_| family.is_none()) {
            authors.push(AuthorName::literal(lit));
        } else {
            authors.push(AuthorName {
                family,
                given,
                literal: None,
            });
        }
    }
    authors
}

fn parse_issued(v: &Value, warnings: &mut Vec<String>) -> Option<IssuedDate> {
    let parts = v
        .get("issued")?
        .get("date-parts")?
        .as_array()?
        .first()?
        .as_array()?;
    let int_at = |i: usize| -> Option<i64> {
        parts.get(i).and_then(|p| match p {
            Value::Number(n) => n.as_i64(),
            Value::String(s) => s.trim().parse().ok(),
            _ => None,
        })
    };
    let year = int_at(0)?;
    let issued = IssuedDate::checked(year, int_at(1), int_at(2));
    if issued.is_none() {
        warnings.push(format!("implausible issued year {year} dropped"));
    }
    issued
}

/// Map a CSL JSON body onto the homogeneous record. The record keeps the
/// identifier it was requested for, not the provider's echo of it.
pub fn normalize_csl(
    raw: &RawResponse,
    id: &Identifier,
    provider: Provider,
) -> Result<Normalized, ResolveError> {
    let key = id.canonical_string();
    let v: Value =
        serde_json::from_slice(&raw.bytes).map_err(|e| ResolveError::MalformedMetadata {
            id: key.clone(),
            message: format!("CSL JSON: {e}"),
        })?;
    let mut warnings = Vec::new();
    let authors = parse_authors(&v, &mut warnings);
    let title = stringish_field(&v, "title");
    if title.is_none() && authors.is_empty() {
        return Err(ResolveError::MalformedMetadata {
            id: key,
            message: "CSL record has neither title nor author".to_string(),
        });
    }
    let title = title.unwrap_or_else(|| {
        warnings.push(format!("{key}: CSL record has no title; using {UNTITLED}"));
        UNTITLED.to_string()
    });
    let issued = parse_issued(&v, &mut warnings);
    let doi = str_field(&v, "DOI")
        .and_then(|d| canonical_doi(&d).ok())
        .or_else(|| Some(id.value.clone()));
    let container_title = v
        .get("container-title")
        .and_then(stringish)
        .filter(|s| !s.is_empty());
    let record = BibliographicRecord {
        id: key,
        entry_type: map_entry_type(v.get("type").and_then(|t| t.as_str())),
        title,
        authors,
        container_title,
        issued,
        volume: stringish_field(&v, "volume"),
        issue: stringish_field(&v, "issue"),
        pages: stringish_field(&v, "page").or_else(|| stringish_field(&v, "pages")),
        publisher: stringish_field(&v, "publisher"),
        doi,
        url: id.external_url(),
        provider,
    };
    Ok(Normalized { record, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ident::IdentifierKind;

    fn doi_id() -> Identifier {
        Identifier {
            kind: IdentifierKind::DoiCrossref,
            value: "10.1371/journal.pone.0012258".into(),
        }
    }

    fn raw(body: &str) -> RawResponse {
        RawResponse {
            status: 200,
            media_type: super::super::CSL_JSON_MEDIA_TYPE.to_string(),
            bytes: body.as_bytes().to_vec(),
            source_url: "https://doi.org/10.1371/journal.pone.0012258".to_string(),
        }
    }

    #[test]
    fn maps_the_usual_fields() {
        let body = r#"{"type":"article-journal","title":"A Title",
            "author":[{"family":"Ashworth","given":"Jane"},{"literal":"The Collective"}],
            "container-title":"PLoS ONE","issued":{"date-parts":[[2010,2,24]]},
            "volume":5,"issue":"8","page":"e12258","publisher":"PLoS",
            "DOI":"10.1371/JOURNAL.pone.0012258","URL":"http://dx.doi.org/10.1371/journal.pone.0012258"}"#;
        let n = normalize_csl(&raw(body), &doi_id(), Provider::Crossref).unwrap();
        let r = &n.record;
        assert_eq!(r.title, "A Title");
        assert_eq!(r.authors.len(), 2);
        assert_eq!(r.authors[1].literal.as_deref(), Some("The Collective"));
        assert_eq!(
            r.issued,
            Some(IssuedDate {
                year: 2010,
                month: Some(2),
                day: Some(24)
            })
        );
        assert_eq!(r.volume.as_deref(), Some("5"));
        assert_eq!(r.pages.as_deref(), Some("e12258"));
        assert_eq!(r.doi.as_deref(), Some("10.1371/journal.pone.0012258"));
        assert_eq!(r.url, "https://doi.org/10.1371/journal.pone.0012258");
        assert_eq!(r.id, "10.1371/journal.pone.0012258");
        assert!(n.warnings.is_empty());
    }

    #[test]
    fn missing_title_falls_back_with_warning() {
        let body = r#"{"type":"article-journal","author":[{"family":"Ashworth","given":"J"}]}"#;
        let n = normalize_csl(&raw(body), &doi_id(), Provider::Crossref).unwrap();
        assert_eq!(n.record.title, UNTITLED);
        assert_eq!(n.warnings.len(), 1);
    }

    #[test]
    fn missing_title_and_author_is_malformed() {
        let body = r#"{"type":"article-journal","container-title":"X"}"#;
        assert!(matches!(
            normalize_csl(&raw(body), &doi_id(), Provider::Crossref),
            Err(ResolveError::MalformedMetadata { .. })
        ));
    }

    #[test]
    fn title_as_array_is_accepted() {
        let body = r#"{"title":["First","Second"],"author":[{"family":"A"}]}"#;
        let n = normalize_csl(&raw(body), &doi_id(), Provider::Crossref).unwrap();
        assert_eq!(n.record.title, "First");
    }

    #[test]
    fn normalizer_is_deterministic() {
        let body = r#"{"title":"T","author":[{"family":"A","given":"B"}],"issued":{"date-parts":[[2010]]}}"#;
        let a = normalize_csl(&raw(body), &doi_id(), Provider::Crossref).unwrap();
        let b = normalize_csl(&raw(body), &doi_id(), Provider::Crossref).unwrap();
        assert_eq!(a, b);
    }
}
