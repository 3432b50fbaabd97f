//! Normalizer for arbitrary web pages. Extraction is lexical, like the
//! document scanner: `<title>` plus the common bibliographic `<meta>` tags.

use super::{Normalized, ResolveError};
use crate::html::unescape_entities;
use crate::http::RawResponse;
use crate::ident::Identifier;
use crate::record::{AuthorName, BibliographicRecord, EntryType, Provider, NO_AUTHOR, UNTITLED};

fn find_ci(hay: &str, from: usize, needle: &str) -> Option<usize> {
    hay.as_bytes()[from..]
        .windows(needle.len())
        .position(|w| w.eq_ignore_ascii_case(needle.as_bytes()))
        .map(|p| p + from)
}

fn title_element(html: &str) -> Option<String> {
    let open = find_ci(html, 0, "<title")?;
    let gt = html[open..].find('>')? + open;
    let close = find_ci(html, gt + 1, "</title")?;
    let title = unescape_entities(html[gt + 1..close].trim());
    (!title.is_empty()).then_some(title)
}

/// (name, content) pairs of every `<meta>` tag, names lowercased.
fn meta_tags(html: &str) -> Vec<(String, String)> {
    let mut tags = Vec::new();
    let mut at = 0;
    while let Some(open) = find_ci(html, at, "<meta") {
        let end = match html[open..].find('>') {
            Some(p) => open + p,
            None => break,
        };
        let fragment = &html[open + 5..end];
        let mut name = None;
        let mut content = None;
        for (key, value) in parse_attrs(fragment) {
            match key.as_str() {
                "name" | "property" => name = Some(value.to_ascii_lowercase()),
                "content" => content = Some(value),
                _ => {}
            }
        }
        if let (Some(name), Some(content)) = (name, content) {
            let content = unescape_entities(content.trim());
            if !content.is_empty() {
                tags.push((name, content));
            }
        }
        at = end + 1;
    }
    tags
}

fn parse_attrs(fragment: &str) -> Vec<(String, String)> {
    let bytes = fragment.as_bytes();
    let mut attrs = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        while i < bytes.len() && !bytes[i].is_ascii_alphabetic() {
            i += 1;
        }
        let key_start = i;
        while i < bytes.len()
            && (bytes[i].is_ascii_alphanumeric()
                || bytes[i] == b'-'
                || bytes[i] == b'.'
                || bytes[i] == b'_'
                || bytes[i] == b':')
        {
            i += 1;
        }
        if i == key_start {
            break;
        }
        let key = fragment[key_start..i].to_ascii_lowercase();
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if bytes.get(i) != Some(&b'=') {
            continue;
        }
        i += 1;
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        let value = match bytes.get(i) {
            Some(&q @ (b'"' | b'\'')) => {
                let start = i + 1;
                match fragment[start..].find(q as char) {
                    Some(rel) => {
                        i = start + rel + 1;
                        &fragment[start..start + rel]
                    }
                    None => break,
                }
            }
            Some(_) => {
                let start = i;
                while i < bytes.len() && !bytes[i].is_ascii_whitespace() && bytes[i] != b'/' {
                    i += 1;
                }
                &fragment[start..i]
            }
            None => break,
        };
        attrs.push((key, value.to_string()));
    }
    attrs
}

pub fn normalize_webpage(raw: &RawResponse, id: &Identifier) -> Result<Normalized, ResolveError> {
    let key = id.canonical_string();
    if !raw.media_type.to_ascii_lowercase().contains("text/html") {
        return Err(ResolveError::MalformedMetadata {
            id: key,
            message: format!("expected text/html, got '{}'", raw.media_type),
        });
    }
    let html = String::from_utf8_lossy(&raw.bytes);
    let metas = meta_tags(&html);
    let meta = |wanted: &str| {
        metas
            .iter()
            .find(|(name, _)| name == &wanted.to_ascii_lowercase())
            .map(|(_, content)| content.clone())
    };
    let mut warnings = Vec::new();
    // First present wins, in this order.
    let title = title_element(&html)
        .or_else(|| meta("citation_title"))
        .or_else(|| meta("dc.title"))
        .unwrap_or_else(|| {
            warnings.push(format!("{key}: page has no title; using {UNTITLED}"));
            UNTITLED.to_string()
        });
    let mut authors: Vec<AuthorName> = metas
        .iter()
        .filter(|(name, _)| name == "citation_author" || name == "dc.creator")
        .map(|(_, content)| AuthorName::literal(content.clone()))
        .collect();
    if authors.is_empty() {
        authors.push(AuthorName::literal(NO_AUTHOR));
    }
    let record = BibliographicRecord {
        id: key,
        entry_type: EntryType::Webpage,
        title,
        authors,
        container_title: None,
        issued: None,
        volume: None,
        issue: None,
        pages: None,
        publisher: None,
        doi: None,
        url: id.external_url(),
        provider: Provider::Webpage,
    };
    Ok(Normalized { record, warnings })
}
