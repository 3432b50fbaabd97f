//! Small HTML helpers shared by the renderers.

/// Escape text for element content: `&`, `<`, `>`.
pub fn escape_text(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            _ => out.push(c),
        }
    }
    out
}

/// Escape text for a double-quoted attribute value.
pub fn escape_attr(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

/// Resolve the predefined XML/HTML entities and numeric character
/// references. Unknown named entities are left as written.
pub fn unescape_entities(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        let tail = &rest[amp..];
        let semi = match tail.find(';') {
            Some(p) if p <= 12 => p,
            _ => {
                out.push('&');
                rest = &rest[amp + 1..];
                continue;
            }
        };
        let name = &tail[1..semi];
        let resolved = match name {
            "amp" => Some('&'),
            "lt" => Some('<'),
            "gt" => Some('>'),
            "quot" => Some('"'),
            "apos" => Some('\''),
            _ if name.starts_with("#x") || name.starts_with("#X") => {
                u32::from_str_radix(&name[2..], 16)
                    .ok()
                    .and_then(char::from_u32)
            }
            _ if name.starts_with('#') => name[1..].parse::<u32>().ok().and_then(char::from_u32),
            _ => None,
        };
        match resolved {
            Some(c) => {
                out.push(c);
                rest = &rest[amp + semi + 1..];
            }
            None => {
                out.push('&');
                rest = &rest[amp + 1..];
            }
        }
    }
    out.push_str(rest);
    out
}

/// Append a block to a document, before the final `</body>` when one exists.
pub fn append_block(html: &str, block: &str) -> String {
    let lower = html.to_ascii_lowercase();
    if let Some(pos) = lower.rfind("</body>") {
        let mut out = String::with_capacity(html.len() + block.len() + 1);
        out.push_str(&html[..pos]);
        out.push_str(block);
        out.push('\n');
        out.push_str(&html[pos..]);
        out
    } else {
        let mut out = String::with_capacity(html.len() + block.len() + 1);
        out.push_str(html);
        if !html.is_empty() && !html.ends_with('\n') {
            out.push('\n');
        }
        out.push_str(block);
        out.push('\n');
        out
    }
}

/// Host portion of an absolute URL, for link labels.
pub fn url_host(u: &str) -> String {
    url::Url::parse(u)
        .ok()
        .and_then(|p| p.host_str().map(|h| h.to_string()))
        .unwrap_or_else(|| u.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn escapes_element_text() {
        assert_eq!(escape_text("a<b & c>d"), "a&lt;b &amp; c&gt;d");
    }

    #[test]
    fn escapes_attribute_quotes() {
        assert_eq!(escape_attr(r#"say "hi""#), "say &quot;hi&quot;");
    }

    #[test]
    fn unescape_resolves_named_and_numeric() {
        assert_eq!(unescape_entities("T &amp; U &#233; &#x41;"), "T & U é A");
        assert_eq!(unescape_entities("a &unknown; b & c"), "a &unknown; b & c");
    }

    #[test]
    fn append_goes_before_body_close() {
        assert_eq!(
            append_block("<body>x</body>", "<s/>"),
            "<body>x<s/>\n</body>"
        );
        assert_eq!(append_block("plain", "<s/>"), "plain\n<s/>\n");
    }

    #[test]
    fn url_host_extracts_host() {
        assert_eq!(url_host("https://example.org/x/y"), "example.org");
    }
}
