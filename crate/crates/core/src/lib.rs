//! Document enrichment engine.
//!
//! Scans author documents for citation, math and microarray-data
//! shortcodes, resolves public identifiers (DOI, PubMed, arXiv, URLs,
//! ArrayExpress accessions) into normalized metadata over HTTP with a
//! persistent cache and offline fixture replay, and emits enriched HTML:
//! numbered, linked citations with a generated bibliography, an embedded
//! machine-readable metadata block, homogenized math fragments and
//! hyperlinked experiment values.
//!
//! The pieces compose in pipeline order:
//!
//! - [`scan`] lexes shortcodes, math fragments and masked regions, and
//!   splices replacements back at exact byte offsets.
//! - [`ident`] classifies raw citation strings into canonical identifiers
//!   and resolves DOI registration agencies.
//! - [`resolve`] fetches provider metadata and normalizes it into one
//!   [`record::BibliographicRecord`] shape.
//! - [`cache`] persists resolved records across runs with a TTL.
//! - [`cite`] numbers citations and renders anchors, the bibliography and
//!   the embedded metadata block.
//! - [`math`] homogenizes the TeX syntaxes and injects the client renderer.
//! - [`aexp`] resolves ArrayExpress accessions and substitutes `[aexp]`
//!   fields.
//! - [`pipeline`] wires it all together behind [`pipeline::enrich`].
//!
//! Embedders can supply their own transport and cache:
//!
//! ```
//! use docenrich_core::http::MemoryClient;
//! use docenrich_core::pipeline::{enrich_with, EnrichConfig};
//! use docenrich_core::{CacheStore, SourceDocument};
//!
//! let doc = SourceDocument::from_text("Energy: [latex]e=mc^2[/latex]");
//! let client = MemoryClient::new(); // math needs no network
//! let mut cache = CacheStore::new();
//! let (html, report) =
//!     enrich_with(&doc, &EnrichConfig::default(), &client, &mut cache, 0).unwrap();
//! assert!(html.contains(r"\(e=mc^2\)"));
//! assert_eq!(report.counts.math_fragments, 1);
//! ```

pub mod aexp;
pub mod cache;
pub mod cite;
pub mod diag;
pub mod html;
pub mod http;
pub mod ident;
pub mod math;
pub mod pipeline;
pub mod record;
pub mod resolve;
pub mod scan;

pub use cache::CacheStore;
pub use diag::{Diagnostic, Severity};
pub use ident::{classify, Identifier, IdentifierKind};
pub use pipeline::{enrich, enrich_with, EnrichConfig, PipelineError, RunReport};
pub use record::BibliographicRecord;
pub use scan::SourceDocument;
