//! Math normalization and rendering.
//!
//! The four TeX-flavored syntaxes homogenize to one form and render as
//! client-renderer delimiters (`\(..\)` inline, `\[..\]` display) inside
//! `kblog-math` wrappers. MathML passes through byte-identical: turning its
//! angle brackets into entities would destroy it, and the element is already
//! the canonical representation. When any math rendered, exactly one loader
//! script for the configured client renderer is appended, which is also the
//! machine-visible signal that the document contains math.

use crate::html::{append_block, escape_attr, escape_text};
use crate::scan::{MathFragment, MathSyntax};

/// Homogenized TeX math: trimmed body plus display mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalizedMath {
    pub body: String,
    pub display: bool,
    pub original_syntax: MathSyntax,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum MathError {
    #[error("math fragment has an empty body")]
    EmptyBody,
    #[error("MathML fragments pass through; they are not normalized")]
    NotTex,
}

/// Strip delimiters (already done by the scanner) and whitespace. The
/// scanner's display-mode assignment rides along.
pub fn normalize_fragment(fragment: &MathFragment) -> Result<NormalizedMath, MathError> {
    if fragment.syntax == MathSyntax::MathMl {
        return Err(MathError::NotTex);
    }
    let body = fragment.body.trim();
    if body.is_empty() {
        return Err(MathError::EmptyBody);
    }
    Ok(NormalizedMath {
        body: body.to_string(),
        display: fragment.display,
        original_syntax: fragment.syntax,
    })
}

/// Client-renderer delimiters inside a stable wrapper. The TeX body is
/// HTML-escaped; rendering happens on the reader's side.
pub fn render_math(math: &NormalizedMath) -> String {
    let body = escape_text(&math.body);
    if math.display {
        format!(r#"<div class="kblog-math">\[{body}\]</div>"#)
    } else {
        format!(r#"<span class="kblog-math">\({body}\)</span>"#)
    }
}

/// Emit a `<math>` element byte-identically inside the wrapper span.
pub fn passthrough_mathml(fragment: &MathFragment) -> String {
    debug_assert_eq!(fragment.syntax, MathSyntax::MathMl);
    format!(
        r#"<span class="kblog-math kblog-mathml">{}</span>"#,
        fragment.body
    )
}

/// Append exactly one loader script when the document rendered any math;
/// leave the document untouched otherwise.
pub fn inject_renderer(html: &str, fragment_count: usize, renderer_url: &str) -> String {
    if fragment_count == 0 {
        return html.to_string();
    }
    let loader = format!(
        r#"<script src="{}" class="kblog-math-loader"></script>"#,
        escape_attr(renderer_url)
    );
    append_block(html, &loader)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scan::{scan_math, SourceDocument, Span};

    fn fragment(syntax: MathSyntax, body: &str, display: bool) -> MathFragment {
        MathFragment {
            syntax,
            body: body.to_string(),
            display,
            span: Span::new(0, 0),
        }
    }

    #[test]
    fn all_four_syntaxes_normalize_to_the_same_body() {
        let doc = SourceDocument::from_text(
            "[latex]e=mc^2[/latex] $$e=mc^2$$ $latex e=mc^2$ \\[e=mc^2\\]",
        );
        let (frags, _) = scan_math(&doc, &[]);
        assert_eq!(frags.len(), 4);
        for f in &frags {
            assert_eq!(normalize_fragment(f).unwrap().body, "e=mc^2");
        }
    }

    #[test]
    fn normalize_trims_whitespace() {
        let f = fragment(MathSyntax::Shortcode, "  x  ", false);
        assert_eq!(normalize_fragment(&f).unwrap().body, "x");
    }

    #[test]
    fn empty_body_is_an_error() {
        let f = fragment(MathSyntax::Shortcode, "", false);
        assert_eq!(normalize_fragment(&f), Err(MathError::EmptyBody));
        let blank = fragment(MathSyntax::DoubleDollar, "   ", true);
        assert_eq!(normalize_fragment(&blank), Err(MathError::EmptyBody));
    }

    #[test]
    fn render_inline_and_display_forms() {
        let inline = NormalizedMath {
            body: "e=mc^2".to_string(),
            display: false,
            original_syntax: MathSyntax::Shortcode,
        };
        assert_eq!(
            render_math(&inline),
            r#"<span class="kblog-math">\(e=mc^2\)</span>"#
        );
        let display = NormalizedMath {
            display: true,
            ..inline
        };
        assert_eq!(
            render_math(&display),
            r#"<div class="kblog-math">\[e=mc^2\]</div>"#
        );
    }

    #[test]
    fn render_output_is_syntax_independent() {
        for syntax in [MathSyntax::Shortcode, MathSyntax::DollarLatex] {
            let m = NormalizedMath {
                body: "a+b".to_string(),
                display: false,
                original_syntax: syntax,
            };
            assert_eq!(
                render_math(&m),
                r#"<span class="kblog-math">\(a+b\)</span>"#
            );
        }
    }

    #[test]
    fn render_escapes_tex_body() {
        let m = NormalizedMath {
            body: "a<b & c".to_string(),
            display: false,
            original_syntax: MathSyntax::DoubleDollar,
        };
        assert_eq!(
            render_math(&m),
            r#"<span class="kblog-math">\(a&lt;b &amp; c\)</span>"#
        );
    }

    #[test]
    fn mathml_passes_through_byte_identically() {
        let source = "<math>\n    <mrow>\n        <mi>E</mi>\n        <mo>=</mo>\n        <mrow>\n            <mi>m</mi>\n            <msup>\n                <mi>c</mi>\n                <mn>2</mn>\n            </msup>\n        </mrow>\n    </mrow>\n</math>";
        let f = fragment(MathSyntax::MathMl, source, false);
        let html = passthrough_mathml(&f);
        assert_eq!(
            html,
            format!(r#"<span class="kblog-math kblog-mathml">{source}</span>"#)
        );
        let minimal = fragment(MathSyntax::MathMl, "<math><mi>x</mi></math>", false);
        assert!(passthrough_mathml(&minimal).contains("<math><mi>x</mi></math>"));
    }

    #[test]
    fn loader_injected_exactly_once() {
        let url = "https://cdn.example/mathjax.js";
        assert_eq!(inject_renderer("doc", 0, url), "doc");
        let one = inject_renderer("doc", 1, url);
        assert_eq!(one.matches("kblog-math-loader").count(), 1);
        let five = inject_renderer("doc", 5, url);
        assert_eq!(five.matches("kblog-math-loader").count(), 1);
    }

    #[test]
    fn loader_lands_before_body_close() {
        let html = inject_renderer("<body><p>m</p></body>", 2, "https://cdn.example/m.js");
        let loader_at = html.find("kblog-math-loader").unwrap();
        let body_close = html.find("</body>").unwrap();
        assert!(loader_at < body_close);
    }
}
