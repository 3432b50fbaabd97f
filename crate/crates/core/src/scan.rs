//! Lexical document scanner.
//!
//! Splits an input document into shortcode tokens, math fragments and masked
//! regions, and splices replacement text back at exact byte offsets. Scanning
//! is purely lexical: no HTML parsing, no DOM. All spans are byte offsets into
//! the original text and always fall on character boundaries because every
//! recognized delimiter is ASCII.

use crate::diag::Diagnostic;

/// An input document plus where it came from (for messages only).
#[derive(Debug, Clone)]
pub struct SourceDocument {
    pub text: String,
    pub origin: String,
}

impl SourceDocument {
    pub fn new(text: impl Into<String>, origin: impl Into<String>) -> Self {
        SourceDocument {
            text: text.into(),
            origin: origin.into(),
        }
    }

    pub fn from_text(text: impl Into<String>) -> Self {
        SourceDocument::new(text, "<memory>")
    }
}

/// Half-open byte range `[start, end)` into a document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn intersects(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn contains(&self, offset: usize) -> bool {
        self.start <= offset && offset < self.end
    }
}

/// One `[tag ...]body[/tag]` occurrence. `body` is `None` for tags that were
/// written without a closing tag and are allowed to be self-closing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShortcodeToken {
    pub name: String,
    pub attributes: Vec<(String, String)>,
    pub body: Option<String>,
    pub span: Span,
}

impl ShortcodeToken {
    /// First value of an attribute, by lowercase name.
    pub fn attr(&self, name: &str) -> Option<&str> {
        self.attributes
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MathSyntax {
    /// `[latex]...[/latex]`
    Shortcode,
    /// `$$...$$`
    DoubleDollar,
    /// `$latex ...$`
    DollarLatex,
    /// `\[...\]`
    Bracket,
    /// A literal `<math>...</math>` element.
    MathMl,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MathFragment {
    pub syntax: MathSyntax,
    /// Raw inner source for the TeX syntaxes; the whole element for MathML.
    pub body: String,
    pub display: bool,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskKind {
    PreElement,
    CodeElement,
    HtmlComment,
    FencedCode,
}

/// A region the scanners must not look inside.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaskedRegion {
    pub span: Span,
    pub kind: MaskKind,
}

/// Whether a recognized tag needs a matching close tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BodyRule {
    Required,
    SelfClosing,
}

#[derive(Debug, Clone)]
pub struct TagSpec {
    pub name: String,
    pub body: BodyRule,
}

impl TagSpec {
    pub fn required(name: &str) -> Self {
        TagSpec {
            name: name.to_string(),
            body: BodyRule::Required,
        }
    }

    pub fn self_closing(name: &str) -> Self {
        TagSpec {
            name: name.to_string(),
            body: BodyRule::SelfClosing,
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SpliceError {
    #[error("overlapping replacement spans {0:?} and {1:?}")]
    OverlappingReplacement(Span, Span),
    #[error("span {0:?} is not valid for a document of {1} bytes")]
    InvalidSpan(Span, usize),
}

fn starts_with_ci(text: &str, at: usize, needle: &str) -> bool {
    text.len() >= at + needle.len()
        && text.as_bytes()[at..at + needle.len()].eq_ignore_ascii_case(needle.as_bytes())
}

fn find_ci(text: &str, from: usize, needle: &str) -> Option<usize> {
    let hay = text.as_bytes();
    let pat = needle.as_bytes();
    if pat.is_empty() || from > hay.len() {
        return None;
    }
    hay[from..]
        .windows(pat.len())
        .position(|w| w.eq_ignore_ascii_case(pat))
        .map(|p| p + from)
}

/// End offset (exclusive) of a closing tag like `</pre>` found at or after
/// `from`, tolerating whitespace before the final `>`.
fn find_close_tag_ci(text: &str, from: usize, name: &str) -> Option<usize> {
    let needle = format!("</{name}");
    let mut at = from;
    while let Some(pos) = find_ci(text, at, &needle) {
        let mut rest = pos + needle.len();
        let bytes = text.as_bytes();
        while rest < bytes.len() && bytes[rest].is_ascii_whitespace() {
            rest += 1;
        }
        if rest < bytes.len() && bytes[rest] == b'>' {
            return Some(rest + 1);
        }
        at = pos + 1;
    }
    None
}

/// True when the character after `<pre`/`<code`/`<math` really ends the tag
/// name, ruling out e.g. `<precious>`.
fn tag_name_boundary(text: &str, at: usize) -> bool {
    match text.as_bytes().get(at) {
        None => true,
        Some(b'>') | Some(b'/') => true,
        Some(b) => b.is_ascii_whitespace(),
    }
}

/// All maximal regions covered by `<pre>`, `<code>`, HTML comments or
/// triple-backtick fences. Regions are sorted, non-overlapping; nested
/// constructs merge into the outermost one. Unterminated constructs extend
/// to the end of the document.
pub fn find_masked_regions(doc: &SourceDocument) -> Vec<MaskedRegion> {
    let text = &doc.text;
    let len = text.len();
    let mut regions = Vec::new();
    let mut i = 0;
    while i < len {
        let b = text.as_bytes()[i];
        let hit = if b == b'<' {
            if starts_with_ci(text, i, "<!--") {
                let end = find_ci(text, i + 4, "-->").map(|p| p + 3).unwrap_or(len);
                Some((end, MaskKind::HtmlComment))
            } else if starts_with_ci(text, i, "<pre") && tag_name_boundary(text, i + 4) {
                let end = find_close_tag_ci(text, i + 4, "pre").unwrap_or(len);
                Some((end, MaskKind::PreElement))
            } else if starts_with_ci(text, i, "<code") && tag_name_boundary(text, i + 5) {
                let end = find_close_tag_ci(text, i + 5, "code").unwrap_or(len);
                Some((end, MaskKind::CodeElement))
            } else {
                None
            }
        } else if b == b'`' && text[i..].starts_with("```") {
            let end = find_ci(text, i + 3, "```").map(|p| p + 3).unwrap_or(len);
            Some((end, MaskKind::FencedCode))
        } else {
            None
        };
        match hit {
            Some((end, kind)) => {
                regions.push(MaskedRegion {
                    span: Span::new(i, end),
                    kind,
                });
                i = end;
            }
            None => i += 1,
        }
    }
    regions
}

/// Index of the masked region containing `offset`, if any. `masked` must be
/// sorted and non-overlapping.
fn mask_at(masked: &[MaskedRegion], offset: usize) -> Option<usize> {
    masked
        .binary_search_by(|r| {
            if r.span.end <= offset {
                std::cmp::Ordering::Less
            } else if r.span.start > offset {
                std::cmp::Ordering::Greater
            } else {
                std::cmp::Ordering::Equal
            }
        })
        .ok()
}

fn span_hits_mask(masked: &[MaskedRegion], span: Span) -> bool {
    masked.iter().any(|r| r.span.intersects(&span))
}

struct OpenTag {
    name: String,
    attributes: Vec<(String, String)>,
    /// Offset just past the closing `]` of the opening tag.
    end: usize,
}

/// Parse `[name attr="v" ...]` starting at the `[` at `at`. Returns None when
/// the text does not form a well-shaped opening tag.
fn parse_open_tag(text: &str, at: usize) -> Option<OpenTag> {
    let bytes = text.as_bytes();
    debug_assert_eq!(bytes[at], b'[');
    let mut i = at + 1;
    let name_start = i;
    while i < bytes.len() && bytes[i].is_ascii_lowercase() {
        i += 1;
    }
    if i == name_start {
        return None;
    }
    let name = text[name_start..i].to_string();
    // The tag name must be followed by whitespace, `]`, or nothing we
    // recognize; `[cite2]` is not a `cite` tag.
    match bytes.get(i) {
        Some(b']') => {
            return Some(OpenTag {
                name,
                attributes: Vec::new(),
                end: i + 1,
            })
        }
        Some(b) if b.is_ascii_whitespace() => {}
        _ => return None,
    }
    let mut attributes = Vec::new();
    loop {
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        match bytes.get(i) {
            None => return None,
            Some(b']') => {
                return Some(OpenTag {
                    name,
                    attributes,
                    end: i + 1,
                })
            }
            _ => {}
        }
        let key_start = i;
        while i < bytes.len()
            && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'-')
        {
            i += 1;
        }
        if i == key_start {
            return None;
        }
        let key = text[key_start..i].to_ascii_lowercase();
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if bytes.get(i) != Some(&b'=') {
            return None;
        }
        i += 1;
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        let value = match bytes.get(i) {
            Some(&q @ (b'"' | b'\'')) => {
                let val_start = i + 1;
                let close = text[val_start..].find(q as char)? + val_start;
                i = close + 1;
                text[val_start..close].to_string()
            }
            Some(_) => {
                let val_start = i;
                while i < bytes.len() && !bytes[i].is_ascii_whitespace() && bytes[i] != b']' {
                    i += 1;
                }
                text[val_start..i].to_string()
            }
            None => return None,
        };
        attributes.push((key, value));
    }
}

/// Scan for well-formed shortcodes of the given tags whose opening `[` lies
/// outside masked regions. Unknown tags are left alone. An opening tag with
/// no matching close (for a tag that requires one) is skipped with a
/// diagnostic, never an error.
pub fn scan_shortcodes(
    doc: &SourceDocument,
    tags: &[TagSpec],
    masked: &[MaskedRegion],
) -> (Vec<ShortcodeToken>, Vec<Diagnostic>) {
    let text = &doc.text;
    let mut tokens = Vec::new();
    let mut diags = Vec::new();
    let mut i = 0;
    while i < text.len() {
        if let Some(m) = mask_at(masked, i) {
            i = masked[m].span.end;
            continue;
        }
        if text.as_bytes()[i] != b'[' {
            i += 1;
            continue;
        }
        let open = match parse_open_tag(text, i) {
            Some(o) => o,
            None => {
                i += 1;
                continue;
            }
        };
        let spec = match tags.iter().find(|t| t.name == open.name) {
            Some(s) => s,
            None => {
                i += 1;
                continue;
            }
        };
        let close_needle = format!("[/{}]", open.name);
        let token = match text[open.end..].find(&close_needle) {
            Some(rel) => {
                let close_at = open.end + rel;
                let span = Span::new(i, close_at + close_needle.len());
                if span_hits_mask(masked, span) {
                    diags.push(Diagnostic::warn_at(
                        text,
                        i,
                        format!("[{}] spans a masked region; ignored", open.name),
                    ));
                    i = open.end;
                    continue;
                }
                ShortcodeToken {
                    name: open.name,
                    attributes: open.attributes,
                    body: Some(text[open.end..close_at].to_string()),
                    span,
                }
            }
            None => match spec.body {
                BodyRule::SelfClosing => {
                    let span = Span::new(i, open.end);
                    if span_hits_mask(masked, span) {
                        i = open.end;
                        continue;
                    }
                    ShortcodeToken {
                        name: open.name,
                        attributes: open.attributes,
                        body: None,
                        span,
                    }
                }
                BodyRule::Required => {
                    diags.push(Diagnostic::warn_at(
                        text,
                        i,
                        format!("[{0}] without matching [/{0}]; skipped", open.name),
                    ));
                    i = open.end;
                    continue;
                }
            },
        };
        i = token.span.end;
        tokens.push(token);
    }
    (tokens, diags)
}

/// A candidate math match found at one position.
struct MathMatch {
    syntax: MathSyntax,
    body_span: Span,
    end: usize,
    display: bool,
    /// How far to advance when the candidate is rejected or unterminated.
    opener_len: usize,
}

fn math_match_at(text: &str, i: usize) -> Option<Result<MathMatch, (usize, &'static str)>> {
    let len = text.len();
    if text[i..].starts_with("[latex]") {
        let body_start = i + "[latex]".len();
        return Some(match text[body_start..].find("[/latex]") {
            Some(rel) => Ok(MathMatch {
                syntax: MathSyntax::Shortcode,
                body_span: Span::new(body_start, body_start + rel),
                end: body_start + rel + "[/latex]".len(),
                display: false,
                opener_len: "[latex]".len(),
            }),
            None => Err(("[latex]".len(), "unterminated [latex]")),
        });
    }
    if text[i..].starts_with("$$") {
        let body_start = i + 2;
        return Some(match text[body_start..].find("$$") {
            Some(rel) => Ok(MathMatch {
                syntax: MathSyntax::DoubleDollar,
                body_span: Span::new(body_start, body_start + rel),
                end: body_start + rel + 2,
                display: true,
                opener_len: 2,
            }),
            None => Err((2, "unterminated $$")),
        });
    }
    if text[i..].starts_with("$latex")
        && text
            .as_bytes()
            .get(i + 6)
            .is_some_and(|b| b.is_ascii_whitespace())
    {
        let body_start = i + 6;
        return Some(match text[body_start..].find('$') {
            Some(rel) => Ok(MathMatch {
                syntax: MathSyntax::DollarLatex,
                body_span: Span::new(body_start, body_start + rel),
                end: body_start + rel + 1,
                display: false,
                opener_len: 6,
            }),
            None => Err((6, "unterminated $latex")),
        });
    }
    if text[i..].starts_with("\\[") {
        let body_start = i + 2;
        return Some(match text[body_start..].find("\\]") {
            Some(rel) => Ok(MathMatch {
                syntax: MathSyntax::Bracket,
                body_span: Span::new(body_start, body_start + rel),
                end: body_start + rel + 2,
                display: true,
                opener_len: 2,
            }),
            None => Err((2, "unterminated \\[")),
        });
    }
    if text[i..].starts_with("<math") && tag_name_boundary(text, i + 5) {
        return Some(match find_close_tag_ci(text, i + 5, "math") {
            Some(end) if end <= len => Ok(MathMatch {
                syntax: MathSyntax::MathMl,
                body_span: Span::new(i, end),
                end,
                display: false,
                opener_len: 5,
            }),
            _ => Err((5, "unterminated <math>")),
        });
    }
    None
}

/// Detect math fragments outside masked regions: `[latex]..[/latex]`,
/// `$$..$$`, `$latex ..$`, `\[..\]` and literal `<math>..</math>` elements.
/// A span claimed by one syntax is never re-matched by another; candidates
/// that would straddle a masked region are dropped.
pub fn scan_math(
    doc: &SourceDocument,
    masked: &[MaskedRegion],
) -> (Vec<MathFragment>, Vec<Diagnostic>) {
    let text = &doc.text;
    let mut fragments = Vec::new();
    let mut diags = Vec::new();
    let mut i = 0;
    while i < text.len() {
        if let Some(m) = mask_at(masked, i) {
            i = masked[m].span.end;
            continue;
        }
        // Every opener starts with ASCII, so only boundary positions matter.
        if !text.is_char_boundary(i) {
            i += 1;
            continue;
        }
        match math_match_at(text, i) {
            None => i += 1,
            Some(Err((skip, message))) => {
                diags.push(Diagnostic::warn_at(text, i, format!("{message}; skipped")));
                i += skip;
            }
            Some(Ok(m)) => {
                let span = Span::new(i, m.end);
                if span_hits_mask(masked, span) {
                    i += m.opener_len;
                    continue;
                }
                fragments.push(MathFragment {
                    syntax: m.syntax,
                    body: text[m.body_span.start..m.body_span.end].to_string(),
                    display: m.display,
                    span,
                });
                i = m.end;
            }
        }
    }
    (fragments, diags)
}

/// Replace each span by its string; text outside the spans is byte-identical.
pub fn splice(
    doc: &SourceDocument,
    replacements: &[(Span, String)],
) -> Result<String, SpliceError> {
    let text = &doc.text;
    let mut sorted: Vec<&(Span, String)> = replacements.iter().collect();
    sorted.sort_by_key(|(span, _)| (span.start, span.end));
    let mut out = String::with_capacity(text.len());
    let mut cursor = 0;
    let mut prev: Option<Span> = None;
    for (span, replacement) in sorted {
        if span.start > span.end
            || span.end > text.len()
            || !text.is_char_boundary(span.start)
            || !text.is_char_boundary(span.end)
        {
            return Err(SpliceError::InvalidSpan(*span, text.len()));
        }
        if let Some(p) = prev {
            if span.start < p.end {
                return Err(SpliceError::OverlappingReplacement(p, *span));
            }
        }
        out.push_str(&text[cursor..span.start]);
        out.push_str(replacement);
        cursor = span.end;
        prev = Some(*span);
    }
    out.push_str(&text[cursor..]);
    Ok(out)
}
