//! Citation numbering and rendering: in-text anchors, the fixed numeric
//! bibliography, and the embedded machine-readable metadata block.
//!
//! The CSS classes (`kcite`, `kcite-unresolved`, `kcite-error`,
//! `kcite-bibliography`) and the id schemes (`kcite-ref-{n}-{k}`,
//! `kcite-bib-{n}`, `kcite-metadata`) are a stable public contract.

use std::collections::BTreeMap;

use crate::html::{escape_attr, escape_text, url_host};
use crate::ident::{classify, ClassifyError, Identifier, SourceTag};
use crate::record::BibliographicRecord;
use crate::scan::{ShortcodeToken, Span};

#[derive(Debug, Clone, PartialEq)]
pub enum CitationStatus {
    Resolved(Box<BibliographicRecord>),
    /// Not resolved; carries the reason. Classified-but-unresolved
    /// citations still render as external links.
    Unresolved(String),
}

/// One `[cite]` occurrence. `identifier` is `None` when the body failed
/// classification; such instances render inline as errors and take no part
/// in numbering.
#[derive(Debug, Clone, PartialEq)]
pub struct CitationInstance {
    pub span: Span,
    pub raw: String,
    pub identifier: Option<Identifier>,
    /// 0-based occurrence index among instances of the same identifier.
    pub occurrence: usize,
    /// Optional typed-citation annotation, preserved into the embedded
    /// metadata but never rendered.
    pub cito: Option<String>,
    pub status: CitationStatus,
}

impl CitationInstance {
    pub fn is_classified(&self) -> bool {
        self.identifier.is_some()
    }
}

/// Classify every `[cite]` token into an instance, honoring the `source`
/// attribute. Classification failures become unresolved instances, never
/// dropped.
pub fn collect_citations(tokens: &[ShortcodeToken], strict: bool) -> Vec<CitationInstance> {
    let mut instances = Vec::new();
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    for token in tokens.iter().filter(|t| t.name == "cite") {
        let raw = token.body.as_deref().unwrap_or("").trim().to_string();
        let declared = match token.attr("source") {
            None => Ok(None),
            Some(value) => match SourceTag::parse(value) {
                Some(tag) => Ok(Some(tag)),
                None => Err(ClassifyError::UnknownSource(value.to_string())),
            },
        };
        let classified = declared.and_then(|declared| classify(&raw, declared, strict));
        let (identifier, occurrence, status) = match classified {
            Ok(id) => {
                let key = id.canonical_string();
                let occurrence = *seen.entry(key).and_modify(|c| *c += 1).or_insert(0);
                (
                    Some(id),
                    occurrence,
                    CitationStatus::Unresolved("not resolved".to_string()),
                )
            }
            Err(e) => (None, 0, CitationStatus::Unresolved(e.to_string())),
        };
        instances.push(CitationInstance {
            span: token.span,
            raw,
            identifier,
            occurrence,
            cito: token.attr("cito").map(|v| v.to_string()),
            status,
        });
    }
    instances
}

/// Citation numbers 1..N in first-appearance order; duplicates share a
/// number.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NumberingMap {
    numbers: BTreeMap<String, u32>,
    order: Vec<String>,
}

impl NumberingMap {
    pub fn get(&self, canonical_id: &str) -> Option<u32> {
        self.numbers.get(canonical_id).copied()
    }

    /// Canonical ids in number order (index 0 is number 1).
    pub fn ids_in_order(&self) -> &[String] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

/// First-appearance numbering over the classified instances.
pub fn assign_numbers(instances: &[CitationInstance]) -> NumberingMap {
    let mut map = NumberingMap::default();
    for instance in instances {
        if let Some(id) = &instance.identifier {
            let key = id.canonical_string();
            if !map.numbers.contains_key(&key) {
                map.order.push(key.clone());
                map.numbers.insert(key, map.order.len() as u32);
            }
        }
    }
    map
}

/// In-text anchor for one citation instance.
pub fn format_intext(instance: &CitationInstance, numbers: &NumberingMap) -> String {
    match &instance.identifier {
        None => {
            let reason = match &instance.status {
                CitationStatus::Unresolved(reason) => reason.as_str(),
                CitationStatus::Resolved(_) => "unclassified",
            };
            format!(
                r#"<span class="kcite-error" title="{}">[cite?]</span>"#,
                escape_attr(reason)
            )
        }
        Some(id) => {
            let n = numbers.get(&id.canonical_string()).unwrap_or(0);
            match &instance.status {
                CitationStatus::Resolved(record) => format!(
                    r##"<a class="kcite" id="kcite-ref-{n}-{occ}" href="#kcite-bib-{n}" title="{title}">[{n}]</a>"##,
                    occ = instance.occurrence,
                    title = escape_attr(&record.title),
                ),
                CitationStatus::Unresolved(_) => format!(
                    r#"<a class="kcite kcite-unresolved" href="{}">[{n}]</a>"#,
                    escape_attr(&id.external_url()),
                ),
            }
        }
    }
}

const MAX_LISTED_AUTHORS: usize = 10;

fn author_list(record: &BibliographicRecord) -> Option<String> {
    if record.authors.is_empty() {
        return None;
    }
    let names: Vec<String> = record
        .authors
        .iter()
        .take(MAX_LISTED_AUTHORS)
        .map(|a| a.display())
        .collect();
    let mut joined = names.join(", ");
    if record.authors.len() > MAX_LISTED_AUTHORS {
        joined.push_str(" et al.");
    }
    Some(joined)
}

/// One bibliography list item in the fixed numeric style. Missing fields and
/// their delimiters are omitted.
pub fn format_entry(record: &BibliographicRecord, n: u32) -> String {
    let mut out = format!(r#"<li id="kcite-bib-{n}">"#);
    let head = match (author_list(record), record.issued.as_ref()) {
        (Some(authors), Some(date)) => Some(format!("{} ({})", escape_text(&authors), date.year)),
        (Some(authors), None) => Some(escape_text(&authors)),
        (None, Some(date)) => Some(format!("({})", date.year)),
        (None, None) => None,
    };
    if let Some(head) = head {
        out.push_str(&head);
        out.push_str(". ");
    }
    out.push_str(&escape_text(&record.title));
    out.push('.');
    let mut middle = String::new();
    if let Some(container) = &record.container_title {
        middle.push_str(&format!(" <i>{}</i>", escape_text(container)));
    }
    let mut cluster = String::new();
    if let Some(volume) = &record.volume {
        cluster.push_str(&escape_text(volume));
    }
    if let Some(issue) = &record.issue {
        cluster.push_str(&format!("({})", escape_text(issue)));
    }
    if let Some(pages) = &record.pages {
        if cluster.is_empty() {
            cluster.push_str(&escape_text(pages));
        } else {
            cluster.push_str(&format!(":{}", escape_text(pages)));
        }
    }
    if !cluster.is_empty() {
        middle.push(' ');
        middle.push_str(&cluster);
    }
    if !middle.is_empty() {
        out.push_str(&middle);
        out.push('.');
    }
    let label = match &record.doi {
        Some(doi) => format!("doi:{doi}"),
        None => url_host(&record.url),
    };
    out.push_str(&format!(
        r#" <a href="{}">{}</a>."#,
        escape_attr(&record.url),
        escape_text(&label)
    ));
    out.push_str("</li>");
    out
}

/// Stub entry for a citation that classified but never resolved; it keeps
/// the bibliography anchor alive and links out to the source.
fn format_unresolved_entry(id: &Identifier, n: u32) -> String {
    format!(
        r#"<li id="kcite-bib-{n}" class="kcite-unresolved"><a href="{}">{}</a> (unresolved).</li>"#,
        escape_attr(&id.external_url()),
        escape_text(&id.canonical_string()),
    )
}

/// The ordered bibliography list. Entries appear in number order; an empty
/// numbering renders nothing at all.
pub fn build_bibliography(numbers: &NumberingMap, instances: &[CitationInstance]) -> String {
    if numbers.is_empty() {
        return String::new();
    }
    let mut items = Vec::with_capacity(numbers.len());
    for (index, key) in numbers.ids_in_order().iter().enumerate() {
        let n = index as u32 + 1;
        let instance = instances.iter().find(|i| {
            i.identifier
                .as_ref()
                .is_some_and(|id| &id.canonical_string() == key)
        });
        let Some(instance) = instance else { continue };
        match (&instance.status, &instance.identifier) {
            (CitationStatus::Resolved(record), _) => items.push(format_entry(record, n)),
            (CitationStatus::Unresolved(_), Some(id)) => items.push(format_unresolved_entry(id, n)),
            (CitationStatus::Unresolved(_), None) => {}
        }
    }
    let mut out = String::from("<ol class=\"kcite-bibliography\">\n");
    for item in items {
        out.push_str(&item);
        out.push('\n');
    }
    out.push_str("</ol>");
    out
}

/// The `kcite-metadata` script block: resolved records in number order,
/// serialized exactly like the cache serializes them, plus any `cito`
/// annotations. Parsing the block back yields the records unchanged.
pub fn embed_metadata_json(numbers: &NumberingMap, instances: &[CitationInstance]) -> String {
    let mut references = Vec::new();
    for key in numbers.ids_in_order() {
        let record = instances
            .iter()
            .find_map(|i| match (&i.status, &i.identifier) {
                (CitationStatus::Resolved(record), Some(id)) if &id.canonical_string() == key => {
                    Some(record)
                }
                _ => None,
            });
        if let Some(record) = record {
            references.push(serde_json::to_value(record).expect("records serialize"));
        }
    }
    let mut body = serde_json::Map::new();
    body.insert("version".to_string(), serde_json::json!(1));
    body.insert(
        "references".to_string(),
        serde_json::Value::Array(references),
    );
    let cito_notes: Vec<serde_json::Value> = instances
        .iter()
        .filter_map(|i| {
            let cito = i.cito.as_deref()?.trim();
            let id = i.identifier.as_ref()?;
            let n = numbers.get(&id.canonical_string())?;
            (!cito.is_empty()).then(|| {
                serde_json::json!({
                    "reference": n,
                    "occurrence": i.occurrence,
                    "relation": cito,
                })
            })
        })
        .collect();
    if !cito_notes.is_empty() {
        body.insert("cito".to_string(), serde_json::Value::Array(cito_notes));
    }
    let json = serde_json::Value::Object(body)
        .to_string()
        .replace("</", r"<\/");
    format!(r#"<script type="application/json" id="kcite-metadata">{json}</script>"#)
}
