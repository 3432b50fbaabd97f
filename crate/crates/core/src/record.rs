//! The provider-independent bibliographic record.
//!
//! Whatever provider a reference was fetched from, it normalizes into this
//! one shape. Serialization uses CSL-like field names; the same encoding is
//! used in the cache file and in the embedded metadata block, so the two are
//! interchangeable for machine readers.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntryType {
    ArticleJournal,
    Dataset,
    Preprint,
    Webpage,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provider {
    Crossref,
    Datacite,
    Pubmed,
    Arxiv,
    Webpage,
}

/// One author: either a family/given pair or a literal display string.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct AuthorName {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub given: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub literal: Option<String>,
}

impl AuthorName {
    pub fn person(family: impl Into<String>, given: impl Into<String>) -> Self {
        AuthorName {
            family: Some(family.into()),
            given: Some(given.into()),
            literal: None,
        }
    }

    pub fn family_only(family: impl Into<String>) -> Self {
        AuthorName {
            family: Some(family.into()),
            given: None,
            literal: None,
        }
    }

    pub fn literal(name: impl Into<String>) -> Self {
        AuthorName {
            family: None,
            given: None,
            literal: Some(name.into()),
        }
    }

    /// "Family GI" display form used by the fixed bibliography style.
    pub fn display(&self) -> String {
        if let Some(lit) = &self.literal {
            return lit.clone();
        }
        let family = self.family.clone().unwrap_or_default();
        match &self.given {
            Some(given) => {
                let initials: String = given
                    .split(|c: char| c.is_whitespace() || c == '-' || c == '.')
                    .filter(|part| !part.is_empty())
                    .filter_map(|part| part.chars().next())
                    .flat_map(|c| c.to_uppercase())
                    .collect();
                if initials.is_empty() {
                    family
                } else {
                    format!("{family} {initials}")
                }
            }
            None => family,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IssuedDate {
    pub year: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub month: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub day: Option<u32>,
}

impl IssuedDate {
    /// Keep only the parts that pass the sanity ranges; a record with an
    /// implausible year carries no date at all.
    pub fn checked(year: i64, month: Option<i64>, day: Option<i64>) -> Option<IssuedDate> {
        if !(1500..=2100).contains(&year) {
            return None;
        }
        let month = month.filter(|m| (1..=12).contains(m)).map(|m| m as u32);
        let day = if month.is_some() {
            day.filter(|d| (1..=31).contains(d)).map(|d| d as u32)
        } else {
            None
        };
        Some(IssuedDate {
            year: year as i32,
            month,
            day,
        })
    }
}

/// Normalized citation metadata, independent of the provider it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BibliographicRecord {
    /// Canonical identifier string of the reference this record was
    /// requested for (never the provider's echo).
    pub id: String,
    #[serde(rename = "type")]
    pub entry_type: EntryType,
    pub title: String,
    #[serde(rename = "author", default, skip_serializing_if = "Vec::is_empty")]
    pub authors: Vec<AuthorName>,
    #[serde(rename = "container-title", skip_serializing_if = "Option::is_none")]
    pub container_title: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub issued: Option<IssuedDate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub volume: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub issue: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pages: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub publisher: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub doi: Option<String>,
    /// Resolution target for reader-facing links.
    pub url: String,
    pub provider: Provider,
}

pub const UNTITLED: &str = "[untitled]";
pub const NO_AUTHOR: &str = "[no author]";

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_builds_initials_from_given_names() {
        assert_eq!(AuthorName::person("Smith", "Jane").display(), "Smith J");
        assert_eq!(
            AuthorName::person("Okonkwo", "Chidi Ada").display(),
            "Okonkwo CA"
        );
        assert_eq!(AuthorName::person("Veld", "Jean-Luc").display(), "Veld JL");
        assert_eq!(AuthorName::person("Lord", "P").display(), "Lord P");
    }

    #[test]
    fn display_falls_back_to_literal_or_family() {
        assert_eq!(
            AuthorName::literal("ACME Consortium").display(),
            "ACME Consortium"
        );
        assert_eq!(AuthorName::family_only("Plato").display(), "Plato");
    }

    #[test]
    fn issued_date_rejects_out_of_range() {
        assert_eq!(IssuedDate::checked(1066, Some(1), None), None);
        assert_eq!(
            IssuedDate::checked(2010, Some(13), Some(2)),
            Some(IssuedDate {
                year: 2010,
                month: None,
                day: None
            })
        );
        assert_eq!(
            IssuedDate::checked(2010, Some(2), Some(24)),
            Some(IssuedDate {
                year: 2010,
                month: Some(2),
                day: Some(24)
            })
        );
    }

    #[test]
    fn record_serializes_with_csl_like_names() {
        let record = BibliographicRecord {
            id: "10.1/x".to_string(),
            entry_type: EntryType::ArticleJournal,
            title: "T".to_string(),
            authors: vec![AuthorName::person("Smith", "J")],
            container_title: Some("C".to_string()),
            issued: Some(IssuedDate {
                year: 2010,
                month: None,
                day: None,
            }),
            volume: Some("1".to_string()),
            issue: None,
            pages: Some("1-2".to_string()),
            publisher: None,
            doi: Some("10.1/x".to_string()),
            url: "https://doi.org/10.1/x".to_string(),
            provider: Provider::Crossref,
        };
        let json = serde_json::to_value(&record).unwrap();
        assert_eq!(json["type"], "article-journal");
        assert_eq!(json["container-title"], "C");
        assert_eq!(json["author"][0]["family"], "Smith");
        assert_eq!(json["issued"]["year"], 2010);
        assert!(json.get("issue").is_none());
        let back: BibliographicRecord = serde_json::from_value(json).unwrap();
        assert_eq!(back, record);
    }
}
