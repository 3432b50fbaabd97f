//! Normalizer for arXiv Atom feeds.

use quick_xml::events::Event;
use quick_xml::Reader;

use super::{Normalized, ResolveError};
use crate::http::RawResponse;
use crate::ident::Identifier;
use crate::record::{AuthorName, BibliographicRecord, EntryType, IssuedDate, Provider, UNTITLED};

#[derive(Default)]
struct FeedEntry {
    title: String,
    authors: Vec<String>,
    published: String,
}

/// Pull the first `<entry>` out of the feed. Only elements inside an entry
/// are captured; the feed itself also carries a `<title>`.
fn parse_feed(bytes: &[u8]) -> Result<Vec<FeedEntry>, String> {
    let text = String::from_utf8_lossy(bytes);
    let mut reader = Reader::from_str(&text);
    let mut entries: Vec<FeedEntry> = Vec::new();
    let mut in_entry = false;
    let mut in_author = false;
    let mut capture: Option<&'static str> = None;
    let mut buffer = String::new();
    loop {
        match reader.read_event() {
            Ok(Event::Start(e)) => {
                let name = e.local_name();
                match name.as_ref() {
                    b"entry" => {
                        in_entry = true;
                        entries.push(FeedEntry::default());
                    }
                    b"author" if in_entry => in_author = true,
                    b"title" if in_entry => capture = Some("title"),
                    b"published" if in_entry => capture = Some("published"),
                    b"name" if in_author => capture = Some("name"),
                    _ => {}
                }
                buffer.clear();
            }
            Ok(Event::Text(t)) => {
                if capture.is_some() {
                    buffer.push_str(&t.xml_content().map_err(|e| e.to_string())?);
                }
            }
            Ok(Event::GeneralRef(r)) => {
                if capture.is_some() {
                    if let Ok(Some(c)) = r.resolve_char_ref() {
                        buffer.push(c);
                    } else {
                        match r.as_ref() {
                            b"amp" => buffer.push('&'),
                            b"lt" => buffer.push('<'),
                            b"gt" => buffer.push('>'),
                            b"quot" => buffer.push('"'),
                            b"apos" => buffer.push('\''),
                            _ => {}
                        }
                    }
                }
            }
            Ok(Event::End(e)) => {
                let name = e.local_name();
                let entry = entries.last_mut();
                match (name.as_ref(), capture) {
                    (b"entry", _) => {
                        in_entry = false;
                        capture = None;
                    }
                    (b"author", _) => in_author = false,
                    (b"title", Some("title")) => {
                        if let Some(entry) = entry {
                            entry.title = collapse_whitespace(&buffer);
                        }
                        capture = None;
                    }
                    (b"published", Some("published")) => {
                        if let Some(entry) = entry {
                            entry.published = buffer.trim().to_string();
                        }
                        capture = None;
                    }
                    (b"name", Some("name")) => {
                        if let Some(entry) = entry {
                            let name = collapse_whitespace(&buffer);
                            if !name.is_empty() {
                                entry.authors.push(name);
                            }
                        }
                        capture = None;
                    }
                    _ => {}
                }
                buffer.clear();
            }
            Ok(Event::Eof) => break,
            Err(e) => return Err(e.to_string()),
            _ => {}
        }
    }
    Ok(entries)
}

/// Feed text wraps long titles over indented lines; fold runs of whitespace.
fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// "2010-03-29T14:09:21Z" → year/month/day.
fn parse_atom_date(s: &str) -> Option<IssuedDate> {
    let date = s.get(..10)?;
    let mut parts = date.split('-');
    let year: i64 = parts.next()?.parse().ok()?;
    let month: i64 = parts.next()?.parse().ok()?;
    let day: i64 = parts.next()?.parse().ok()?;
    IssuedDate::checked(year, Some(month), Some(day))
}

/// arXiv names read "Given Family"; the last token is the family name.
fn split_arxiv_name(name: &str) -> AuthorName {
    match name.rsplit_once(char::is_whitespace) {
        Some((given, family)) if !given.trim().is_empty() => {
            AuthorName::person(family.trim(), given.trim())
        }
        _ => AuthorName::family_only(name.trim()),
    }
}

pub fn normalize_arxiv(raw: &RawResponse, id: &Identifier) -> Result<Normalized, ResolveError> {
    let key = id.canonical_string();
    let entries = parse_feed(&raw.bytes).map_err(|message| ResolveError::MalformedMetadata {
        id: key.clone(),
        message: format!("Atom feed: {message}"),
    })?;
    let entry = entries
        .into_iter()
        .next()
        .ok_or(ResolveError::NotFound { id: key.clone() })?;
    let mut warnings = Vec::new();
    let authors: Vec<AuthorName> = entry.authors.iter().map(|n| split_arxiv_name(n)).collect();
    if entry.title.is_empty() && authors.is_empty() {
        return Err(ResolveError::MalformedMetadata {
            id: key,
            message: "feed entry has neither title nor authors".to_string(),
        });
    }
    let title = if entry.title.is_empty() {
        warnings.push(format!("{key}: feed entry has no title; using {UNTITLED}"));
        UNTITLED.to_string()
    } else {
        entry.title
    };
    let record = BibliographicRecord {
        id: key,
        entry_type: EntryType::Preprint,
        title,
        authors,
        container_title: Some("arXiv".to_string()),
        issued: parse_atom_date(&entry.published),
        volume: None,
        issue: None,
        pages: None,
        publisher: None,
        doi: None,
        url: id.external_url(),
        provider: Provider::Arxiv,
    };
    Ok(Normalized { record, warnings })
}
