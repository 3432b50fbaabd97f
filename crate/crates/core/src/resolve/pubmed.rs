//! Normalizer for NCBI esummary JSON.

use serde_json::Value;

use super::json::str_field;
use super::{Normalized, ResolveError};
use crate::http::RawResponse;
use crate::ident::{canonical_doi, Identifier};
use crate::record::{AuthorName, BibliographicRecord, EntryType, IssuedDate, Provider, UNTITLED};

/// esummary writes author names as "Family GI": the last whitespace token is
/// the initials. Imperfect for multi-word family names but deterministic;
/// single-token names are flagged.
fn split_pubmed_name(name: &str, warnings: &mut Vec<String>) -> AuthorName {
    let name = name.trim();
    match name.rsplit_once(char::is_whitespace) {
        Some((family, initials)) if !family.trim().is_empty() => {
            AuthorName::person(family.trim(), initials.trim())
        }
        _ => {
            warnings.push(format!(
                "author '{name}' has a single token; kept as family name"
            ));
            AuthorName::family_only(name)
        }
    }
}

fn month_number(token: &str) -> Option<i64> {
    // "Jan" .. "Dec", tolerating forms like "Jan-Feb" by taking the start.
    let token = token.split('-').next().unwrap_or(token);
    let t = token.get(..3)?.to_ascii_lowercase();
    let months = [
        "jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec",
    ];
    months.iter().position(|m| *m == t).map(|p| p as i64 + 1)
}

/// Dates arrive as "2007 Jan 15", "2010 Mar-Apr" or just "2007".
fn parse_pubdate(s: &str) -> Option<IssuedDate> {
    let mut tokens = s.split_whitespace();
    let year: i64 = tokens.next()?.parse().ok()?;
    let month = tokens.next().and_then(month_number);
    let day = tokens.next().and_then(|t| t.parse::<i64>().ok());
    IssuedDate::checked(year, month, day)
}

pub fn normalize_pubmed(raw: &RawResponse, id: &Identifier) -> Result<Normalized, ResolveError> {
    let key = id.canonical_string();
    let v: Value =
        serde_json::from_slice(&raw.bytes).map_err(|e| ResolveError::MalformedMetadata {
            id: key.clone(),
            message: format!("esummary JSON: {e}"),
        })?;
    let entry = v
        .get("result")
        .and_then(|r| r.get(&id.value))
        .ok_or_else(|| ResolveError::MalformedMetadata {
            id: key.clone(),
            message: "esummary result has no entry for this id".to_string(),
        })?;
    if entry.get("error").is_some() {
        return Err(ResolveError::NotFound { id: key });
    }
    let mut warnings = Vec::new();
    let authors: Vec<AuthorName> = entry
        .get("authors")
        .and_then(|a| a.as_array())
        .map(|items| {
            items
                .iter()
                .filter_map(|a| str_field(a, "name"))
                .map(|name| split_pubmed_name(&name, &mut warnings))
                .collect()
        })
        .unwrap_or_default();
    let title = str_field(entry, "title");
    if title.is_none() && authors.is_empty() {
        return Err(ResolveError::MalformedMetadata {
            id: key,
            message: "esummary entry has neither title nor authors".to_string(),
        });
    }
    let title = title.unwrap_or_else(|| {
        warnings.push(format!(
            "{key}: esummary entry has no title; using {UNTITLED}"
        ));
        UNTITLED.to_string()
    });
    let doi = entry
        .get("articleids")
        .and_then(|ids| ids.as_array())
        .and_then(|ids| {
            ids.iter()
                .find(|aid| str_field(aid, "idtype").is_some_and(|t| t.eq_ignore_ascii_case("doi")))
        })
        .and_then(|aid| str_field(aid, "value"))
        .and_then(|d| canonical_doi(&d).ok());
    // When the provider hands us a DOI, doi.org is the better canonical link.
    let url = match &doi {
        Some(d) => format!("https://doi.org/{d}"),
        None => id.external_url(),
    };
    let record = BibliographicRecord {
        id: key,
        entry_type: EntryType::ArticleJournal,
        title,
        authors,
        container_title: str_field(entry, "source"),
        issued: str_field(entry, "pubdate").and_then(|d| parse_pubdate(&d)),
        volume: str_field(entry, "volume"),
        issue: str_field(entry, "issue"),
        pages: str_field(entry, "pages"),
        publisher: None,
        doi,
        url,
        provider: Provider::Pubmed,
    };
    Ok(Normalized { record, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ident::IdentifierKind;

    fn pmid() -> Identifier {
        Identifier {
            kind: IdentifierKind::Pubmed,
            value: "17237039".into(),
        }
    }

    fn raw(body: &str) -> RawResponse {
        RawResponse {
            status: 200,
            media_type: "application/json".to_string(),
            bytes: body.as_bytes().to_vec(),
            source_url: "test".to_string(),
        }
    }

    fn entry_body(fields: &str) -> String {
        format!(
            r#"{{"header":{{"type":"esummary"}},"result":{{"uids":["17237039"],"17237039":{{{fields}}}}}}}"#
        )
    }

    #[test]
    fn maps_esummary_fields() {
        let body = entry_body(
            r#""uid":"17237039","pubdate":"2007 Jan 15","source":"BMC Bioinformatics",
               "authors":[{"name":"Harker L"},{"name":"Voss AM"}],
               "title":"Semantic integration of biological data sources",
               "volume":"8","issue":"1","pages":"42",
               "articleids":[{"idtype":"pubmed","value":"17237039"},{"idtype":"doi","value":"10.1186/1471-2105-8-42"}]"#,
        );
        let n = normalize_pubmed(&raw(&body), &pmid()).unwrap();
        let r = &n.record;
        assert_eq!(r.id, "pmid:17237039");
        assert_eq!(r.title, "Semantic integration of biological data sources");
        assert_eq!(r.authors[0], AuthorName::person("Harker", "L"));
        assert_eq!(r.authors[1], AuthorName::person("Voss", "AM"));
        assert_eq!(r.container_title.as_deref(), Some("BMC Bioinformatics"));
        assert_eq!(
            r.issued,
            Some(IssuedDate {
                year: 2007,
                month: Some(1),
                day: Some(15)
            })
        );
        assert_eq!(r.doi.as_deref(), Some("10.1186/1471-2105-8-42"));
        assert_eq!(r.url, "https://doi.org/10.1186/1471-2105-8-42");
        assert!(n.warnings.is_empty());
    }

    #[test]
    fn missing_date_leaves_issued_absent() {
        let body = entry_body(r#""title":"T","authors":[{"name":"Harker L"}]"#);
        let n = normalize_pubmed(&raw(&body), &pmid()).unwrap();
        assert_eq!(n.record.issued, None);
        assert_eq!(n.record.url, "https://pubmed.ncbi.nlm.nih.gov/17237039/");
    }

    #[test]
    fn single_token_author_is_flagged() {
        let body = entry_body(r#""title":"T","authors":[{"name":"Consortium"}]"#);
        let n = normalize_pubmed(&raw(&body), &pmid()).unwrap();
        assert_eq!(n.record.authors[0], AuthorName::family_only("Consortium"));
        assert_eq!(n.warnings.len(), 1);
    }

    #[test]
    fn provider_error_object_is_not_found() {
        let body = entry_body(r#""uid":"17237039","error":"cannot get document summary""#);
        assert!(matches!(
            normalize_pubmed(&raw(&body), &pmid()),
            Err(ResolveError::NotFound { .. })
        ));
    }

    #[test]
    fn seasonal_pubdate_takes_first_month() {
        assert_eq!(
            parse_pubdate("2010 Mar-Apr"),
            Some(IssuedDate {
                year: 2010,
                month: Some(3),
                day: None
            })
        );
        assert_eq!(
            parse_pubdate("2007"),
            Some(IssuedDate {
                year: 2007,
                month: None,
                day: None
            })
        );
        assert_eq!(parse_pubdate("not a date"), None);
    }
}
