//! The enrichment pipeline: mask, scan, resolve, number, splice, then place
//! the bibliography, metadata block and math loader.
//!
//! All network-dependent work happens in a bounded fan-out before any
//! rendering; results are keyed by canonical identifier and processed in
//! sorted order, so the output bytes depend only on the input document, the
//! configuration and the fixture/cache content, never on thread timing.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::Duration;

use serde::Serialize;

use crate::aexp::{self, ArrayExpressAccession, ExperimentRecord};
use crate::cache::{CacheError, CacheStore, Lookup};
use crate::cite::{
    assign_numbers, build_bibliography, collect_citations, embed_metadata_json, format_intext,
    CitationStatus,
};
use crate::diag::{Diagnostic, Severity};
use crate::html::append_block;
use crate::http::{CountingClient, FixtureClient, HttpClient, RetryingClient, UreqClient};
use crate::ident::{Identifier, RaMemo};
use crate::math::{
    inject_renderer, normalize_fragment, passthrough_mathml, render_math, MathError,
};
use crate::record::BibliographicRecord;
use crate::resolve::{Normalized, ResolveError, Resolver};
use crate::scan::{
    find_masked_regions, scan_math, scan_shortcodes, splice, MathSyntax, SourceDocument, Span,
    SpliceError, TagSpec,
};

pub const DEFAULT_MATH_RENDERER_URL: &str =
    "https://cdn.jsdelivr.net/npm/mathjax@3/es5/tex-mml-chtml.js";
pub const DEFAULT_TTL: Duration = Duration::from_secs(30 * 24 * 60 * 60);
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);
pub const DEFAULT_CONCURRENCY: usize = 4;
pub const DEFAULT_MAX_REDIRECTS: u32 = 5;

#[derive(Debug, Clone)]
pub struct EnrichConfig {
    pub cache_path: Option<PathBuf>,
    pub offline: bool,
    pub fixtures_dir: Option<PathBuf>,
    pub ttl: Duration,
    pub timeout: Duration,
    pub concurrency: usize,
    pub fail_on_unresolved: bool,
    pub embed_json: bool,
    pub math_renderer_url: String,
    pub strict_sources: bool,
    pub max_redirects: u32,
    /// Extra attempts after a transport failure on live runs; fixture
    /// replay never retries.
    pub retries: u32,
}

impl Default for EnrichConfig {
    fn default() -> Self {
        EnrichConfig {
            cache_path: None,
            offline: false,
            fixtures_dir: None,
            ttl: DEFAULT_TTL,
            timeout: DEFAULT_TIMEOUT,
            concurrency: DEFAULT_CONCURRENCY,
            fail_on_unresolved: false,
            embed_json: true,
            math_renderer_url: DEFAULT_MATH_RENDERER_URL.to_string(),
            strict_sources: false,
            max_redirects: DEFAULT_MAX_REDIRECTS,
            retries: 0,
        }
    }
}

impl EnrichConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.concurrency < 1 {
            return Err(PipelineError::Config(
                "concurrency must be at least 1".to_string(),
            ));
        }
        if self.offline && self.fixtures_dir.is_none() {
            return Err(PipelineError::Config(
                "offline mode needs a fixtures directory".to_string(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Counts {
    pub citations_total: u64,
    pub citations_resolved: u64,
    pub citations_unresolved: u64,
    pub citations_grammar_failed: u64,
    pub math_fragments: u64,
    pub aexp_substitutions: u64,
    pub cache_hits: u64,
    pub network_requests: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunReport {
    pub counts: Counts,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Serialize)]
struct ReportFile<'a> {
    version: u32,
    counts: &'a Counts,
    diagnostics: &'a [Diagnostic],
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let file = ReportFile {
            version: 1,
            counts: &self.counts,
            diagnostics: &self.diagnostics,
        };
        serde_json::to_string_pretty(&file).expect("report serializes")
    }
}

impl std::fmt::Display for RunReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let c = &self.counts;
        writeln!(
            f,
            "citations: {} total ({} resolved, {} unresolved, {} invalid)",
            c.citations_total,
            c.citations_resolved,
            c.citations_unresolved,
            c.citations_grammar_failed
        )?;
        writeln!(
            f,
            "math fragments: {}; data substitutions: {}",
            c.math_fragments, c.aexp_substitutions
        )?;
        writeln!(
            f,
            "cache hits: {}; network requests: {}",
            c.cache_hits, c.network_requests
        )?;
        for d in &self.diagnostics {
            writeln!(f, "{d}")?;
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error("internal splice failure: {0}")]
    Splice(#[from] SpliceError),
    #[error("{unresolved} citation(s) could not be resolved")]
    Unresolved {
        unresolved: u64,
        report: Box<RunReport>,
    },
}

fn engine_tags() -> Vec<TagSpec> {
    vec![
        TagSpec::required("cite"),
        TagSpec::required("aexp"),
        TagSpec::self_closing("bibliography"),
    ]
}

enum Job {
    Cite(String, Identifier),
    Aexp(String, ArrayExpressAccession),
}

enum JobOutcome {
    Cite(String, Result<Normalized, ResolveError>),
    Aexp(
        String,
        Result<(ExperimentRecord, Vec<String>), ResolveError>,
    ),
}

/// Run the pipeline against an explicit transport and cache; `now` is the
/// run's single timestamp (epoch seconds). This is the deterministic core
/// that `enrich` wraps with transport and cache-file handling.
pub fn enrich_with(
    doc: &SourceDocument,
    config: &EnrichConfig,
    client: &dyn HttpClient,
    cache: &mut CacheStore,
    now: i64,
) -> Result<(String, RunReport), PipelineError> {
    config.validate()?;
    let counting = CountingClient::new(client);
    let ttl_secs = config.ttl.as_secs() as i64;
    let mut diagnostics = Vec::new();
    let mut counts = Counts::default();

    // Scan. Shortcode spans win over math candidates that straddle them.
    let masked = find_masked_regions(doc);
    let (tokens, scan_diags) = scan_shortcodes(doc, &engine_tags(), &masked);
    diagnostics.extend(scan_diags);
    let (fragments, math_diags) = scan_math(doc, &masked);
    diagnostics.extend(math_diags);
    let fragments: Vec<_> = fragments
        .into_iter()
        .filter(|f| {
            let clash = tokens.iter().any(|t| t.span.intersects(&f.span));
            if clash {
                diagnostics.push(Diagnostic::warn_at(
                    &doc.text,
                    f.span.start,
                    "math fragment overlaps a shortcode; ignored",
                ));
            }
            !clash
        })
        .collect();

    let mut instances = collect_citations(&tokens, config.strict_sources);

    // Work out what needs the network: unique identifiers and accessions
    // missing from (or stale in) the cache.
    let mut jobs: Vec<Job> = Vec::new();
    let mut cite_results: BTreeMap<String, Result<BibliographicRecord, String>> = BTreeMap::new();
    let mut stale_cite: BTreeMap<String, BibliographicRecord> = BTreeMap::new();
    let mut wanted_cites: BTreeMap<String, Identifier> = BTreeMap::new();
    for instance in &instances {
        if let Some(id) = &instance.identifier {
            wanted_cites
                .entry(id.canonical_string())
                .or_insert_with(|| id.clone());
        }
    }
    for (key, id) in &wanted_cites {
        match cache.lookup(key, now, ttl_secs) {
            Lookup::Hit(record) => {
                counts.cache_hits += 1;
                cite_results.insert(key.clone(), Ok(record.clone()));
            }
            Lookup::Stale(record) => {
                stale_cite.insert(key.clone(), record.clone());
                jobs.push(Job::Cite(key.clone(), id.clone()));
            }
            Lookup::Miss => jobs.push(Job::Cite(key.clone(), id.clone())),
        }
    }

    let aexp_tokens: Vec<usize> = tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| t.name == "aexp")
        .map(|(i, _)| i)
        .collect();
    let mut aexp_results: BTreeMap<String, Result<ExperimentRecord, String>> = BTreeMap::new();
    let mut stale_aexp: BTreeMap<String, ExperimentRecord> = BTreeMap::new();
    let mut wanted_aexp: BTreeMap<String, ArrayExpressAccession> = BTreeMap::new();
    for &i in &aexp_tokens {
        let token = &tokens[i];
        let Some(raw) = token.attr("id") else {
            continue;
        };
        if let Ok(acc) = ArrayExpressAccession::parse(raw) {
            wanted_aexp.entry(acc.cache_key()).or_insert(acc);
        }
        // Pattern-invalid accessions never reach the network; they render
        // as inline errors later.
    }
    for (key, acc) in &wanted_aexp {
        match cache.lookup_aexp(key, now, ttl_secs) {
            Lookup::Hit(record) => {
                counts.cache_hits += 1;
                aexp_results.insert(key.clone(), Ok(record.clone()));
            }
            Lookup::Stale(record) => {
                stale_aexp.insert(key.clone(), record.clone());
                jobs.push(Job::Aexp(key.clone(), acc.clone()));
            }
            Lookup::Miss => jobs.push(Job::Aexp(key.clone(), acc.clone())),
        }
    }

    // Fan out. Workers drain a shared queue; outcomes are re-sorted by key
    // afterwards so concurrency never shows in the output.
    let ra_memo = RaMemo::new();
    let outcomes = if jobs.is_empty() {
        Vec::new()
    } else {
        let workers = config.concurrency.min(jobs.len());
        let queue = Mutex::new(jobs);
        let outcomes: Mutex<Vec<JobOutcome>> = Mutex::new(Vec::new());
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| {
                    let resolver = Resolver::new(&counting, &ra_memo);
                    loop {
                        let job = queue.lock().unwrap().pop();
                        let Some(job) = job else { break };
                        let outcome = match job {
                            Job::Cite(key, id) => JobOutcome::Cite(key, resolver.fetch_record(&id)),
                            Job::Aexp(key, acc) => {
                                JobOutcome::Aexp(key, aexp::fetch_experiment(&counting, &acc))
                            }
                        };
                        outcomes.lock().unwrap().push(outcome);
                    }
                });
            }
        });
        let mut outcomes = outcomes.into_inner().unwrap();
        outcomes.sort_by(|a, b| {
            let key = |o: &JobOutcome| match o {
                JobOutcome::Cite(k, _) => (0, k.clone()),
                JobOutcome::Aexp(k, _) => (1, k.clone()),
            };
            key(a).cmp(&key(b))
        });
        outcomes
    };

    let unresolved_severity = if config.fail_on_unresolved {
        Severity::Error
    } else {
        Severity::Warn
    };
    for outcome in outcomes {
        match outcome {
            JobOutcome::Cite(key, Ok(normalized)) => {
                for warning in &normalized.warnings {
                    diagnostics.push(Diagnostic::warn(warning.clone()));
                }
                cache.insert(
                    &key,
                    normalized.record.clone(),
                    now,
                    normalized.record.provider,
                )?;
                cite_results.insert(key, Ok(normalized.record));
            }
            JobOutcome::Cite(key, Err(e)) => {
                if let Some(stale) = stale_cite.remove(&key) {
                    diagnostics.push(Diagnostic::warn(format!(
                        "{key}: refetch failed ({e}); using stale cached record"
                    )));
                    cite_results.insert(key, Ok(stale));
                } else {
                    diagnostics.push(Diagnostic {
                        severity: unresolved_severity,
                        line: 0,
                        column: 0,
                        message: format!("could not resolve {key}: {e}"),
                    });
                    cite_results.insert(key, Err(e.to_string()));
                }
            }
            JobOutcome::Aexp(key, Ok((record, warnings))) => {
                for warning in warnings {
                    diagnostics.push(Diagnostic::warn(warning));
                }
                cache.insert_aexp(&key, record.clone(), now)?;
                aexp_results.insert(key, Ok(record));
            }
            JobOutcome::Aexp(key, Err(e)) => {
                if let Some(stale) = stale_aexp.remove(&key) {
                    diagnostics.push(Diagnostic::warn(format!(
                        "{key}: refetch failed ({e}); using stale cached record"
                    )));
                    aexp_results.insert(key, Ok(stale));
                } else {
                    diagnostics.push(Diagnostic::warn(format!("could not resolve {key}: {e}")));
                    aexp_results.insert(key, Err(e.to_string()));
                }
            }
        }
    }

    // Stamp resolution outcomes onto the instances.
    for instance in &mut instances {
        let Some(id) = &instance.identifier else {
            continue;
        };
        match cite_results.get(&id.canonical_string()) {
            Some(Ok(record)) => {
                instance.status = CitationStatus::Resolved(Box::new(record.clone()))
            }
            Some(Err(message)) => instance.status = CitationStatus::Unresolved(message.clone()),
            None => {}
        }
    }
    counts.citations_total = instances.len() as u64;
    for instance in &instances {
        match (&instance.identifier, &instance.status) {
            (None, _) => counts.citations_grammar_failed += 1,
            (Some(_), CitationStatus::Resolved(_)) => counts.citations_resolved += 1,
            (Some(_), CitationStatus::Unresolved(_)) => counts.citations_unresolved += 1,
        }
    }

    // Assemble replacements in one pass over the original spans.
    let numbers = assign_numbers(&instances);
    let mut replacements: Vec<(Span, String)> = Vec::new();
    for instance in &instances {
        replacements.push((instance.span, format_intext(instance, &numbers)));
    }
    let mut rendered_math = 0usize;
    for fragment in &fragments {
        if fragment.syntax == MathSyntax::MathMl {
            replacements.push((fragment.span, passthrough_mathml(fragment)));
            rendered_math += 1;
            continue;
        }
        match normalize_fragment(fragment) {
            Ok(math) => {
                replacements.push((fragment.span, render_math(&math)));
                rendered_math += 1;
            }
            Err(MathError::EmptyBody) => diagnostics.push(Diagnostic::warn_at(
                &doc.text,
                fragment.span.start,
                "math fragment has an empty body; left as written",
            )),
            Err(MathError::NotTex) => unreachable!("mathml handled above"),
        }
    }
    counts.math_fragments = rendered_math as u64;

    for &i in &aexp_tokens {
        let token = &tokens[i];
        let html = match token.attr("id") {
            None => {
                diagnostics.push(Diagnostic::warn_at(
                    &doc.text,
                    token.span.start,
                    "[aexp] without an id attribute",
                ));
                aexp::error_span("[aexp] needs an id attribute")
            }
            Some(raw) => match ArrayExpressAccession::parse(raw) {
                Err(e) => {
                    diagnostics.push(Diagnostic::warn_at(
                        &doc.text,
                        token.span.start,
                        e.to_string(),
                    ));
                    aexp::error_span(&e.to_string())
                }
                Ok(acc) => match aexp_results.get(&acc.cache_key()) {
                    Some(Ok(record)) => match aexp::substitute(token, record) {
                        Ok(html) => {
                            counts.aexp_substitutions += 1;
                            html
                        }
                        Err(e) => {
                            diagnostics.push(Diagnostic::warn_at(
                                &doc.text,
                                token.span.start,
                                e.to_string(),
                            ));
                            aexp::error_span(&e.to_string())
                        }
                    },
                    Some(Err(message)) => aexp::error_span(message),
                    None => aexp::error_span("experiment not resolved"),
                },
            },
        };
        replacements.push((token.span, html));
    }

    let bibliography = build_bibliography(&numbers, &instances);
    let mut bib_placed = false;
    for token in tokens.iter().filter(|t| t.name == "bibliography") {
        if bib_placed {
            diagnostics.push(Diagnostic::warn_at(
                &doc.text,
                token.span.start,
                "extra [bibliography] placeholder removed",
            ));
            replacements.push((token.span, String::new()));
        } else {
            replacements.push((token.span, bibliography.clone()));
            bib_placed = true;
        }
    }

    let mut html = splice(doc, &replacements)?;
    if !bib_placed && !numbers.is_empty() {
        let block = format!("<h2 class=\"kcite-heading\">References</h2>\n{bibliography}");
        html = append_block(&html, &block);
    }
    if config.embed_json && !numbers.is_empty() {
        html = append_block(&html, &embed_metadata_json(&numbers, &instances));
    }
    html = inject_renderer(&html, rendered_math, &config.math_renderer_url);

    counts.network_requests = counting.requests();
    let report = RunReport {
        counts,
        diagnostics,
    };
    if config.fail_on_unresolved && report.counts.citations_unresolved > 0 {
        return Err(PipelineError::Unresolved {
            unresolved: report.counts.citations_unresolved,
            report: Box::new(report),
        });
    }
    Ok((html, report))
}

/// Full pipeline run: build the transport from the config (fixture replay
/// when offline, live HTTP otherwise), load and persist the cache file, and
/// enrich the document.
pub fn enrich(
    doc: &SourceDocument,
    config: &EnrichConfig,
) -> Result<(String, RunReport), PipelineError> {
    config.validate()?;
    let client: Box<dyn HttpClient> = if config.offline {
        Box::new(FixtureClient::new(
            config.fixtures_dir.clone().expect("validated"),
        ))
    } else {
        Box::new(RetryingClient::new(
            UreqClient::new(config.timeout, config.max_redirects),
            config.retries,
        ))
    };
    let mut pre_diags = Vec::new();
    let mut cache = match &config.cache_path {
        None => CacheStore::new(),
        Some(path) => match CacheStore::load(path) {
            Ok(store) => store,
            Err(CacheError::Corrupt { path, message }) => {
                pre_diags.push(Diagnostic::warn(format!(
                    "cache at {path} is unusable ({message}); starting empty"
                )));
                CacheStore::new()
            }
            Err(e) => return Err(e.into()),
        },
    };
    let now = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs() as i64)
        .unwrap_or(0);
    let result = enrich_with(doc, config, client.as_ref(), &mut cache, now);
    if let Some(path) = &config.cache_path {
        cache.save(path)?;
    }
    match result {
        Ok((html, mut report)) => {
            report.diagnostics.splice(0..0, pre_diags);
            Ok((html, report))
        }
        Err(PipelineError::Unresolved {
            unresolved,
            mut report,
        }) => {
            report.diagnostics.splice(0..0, pre_diags);
            Err(PipelineError::Unresolved { unresolved, report })
        }
        Err(e) => Err(e),
    }
}
