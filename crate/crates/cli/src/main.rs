//! docenrich: enrich a document with linked citations, a bibliography,
//! normalized math and ArrayExpress metadata.
//!
//! Exit codes: 0 success, 1 usage error, 2 I/O error, 3 unresolved
//! citations under --fail-on-unresolved. The run report always goes to
//! stderr, even on the failure paths.

use std::io::{Read, Write};
use std::path::PathBuf;
use std::time::Duration;

use clap::Parser;

use docenrich_core::diag::Diagnostic;
use docenrich_core::pipeline::{
    enrich, EnrichConfig, PipelineError, RunReport, DEFAULT_MATH_RENDERER_URL,
};
use docenrich_core::scan::SourceDocument;

#[derive(Parser, Debug)]
#[command(
    name = "docenrich",
    version,
    about = "Document enrichment: citations, math, experiment metadata"
)]
struct Args {
    /// Input document (HTML with shortcodes), or - for stdin
    #[arg(long)]
    input: String,

    /// Output file, or - for stdout (the default)
    #[arg(long, default_value = "-")]
    output: String,

    /// Cache file for resolved metadata (created if missing)
    #[arg(long)]
    cache: Option<PathBuf>,

    /// Resolve exclusively from fixtures; any other request fails
    #[arg(long)]
    offline: bool,

    /// Directory of HTTP replay fixtures, named {sha256(url)}.http
    #[arg(long)]
    fixtures: Option<PathBuf>,

    /// Cache entry lifetime in days
    #[arg(long = "ttl-days", default_value_t = 30)]
    ttl_days: u64,

    /// HTTP timeout in milliseconds
    #[arg(long = "timeout-ms", default_value_t = 10_000)]
    timeout_ms: u64,

    /// Maximum concurrent metadata lookups
    #[arg(long, default_value_t = 4)]
    concurrency: usize,

    /// Exit 3 when any classified citation fails to resolve
    #[arg(long = "fail-on-unresolved")]
    fail_on_unresolved: bool,

    /// Skip the embedded kcite-metadata JSON block
    #[arg(long = "no-embed-json")]
    no_embed_json: bool,

    /// Client-side math renderer the loader script points at
    #[arg(long = "math-renderer-url", default_value = DEFAULT_MATH_RENDERER_URL)]
    math_renderer_url: String,

    /// Require a source attribute for bare numeric citations
    #[arg(long = "strict-sources")]
    strict_sources: bool,

    /// Also write the run report as JSON to this file
    #[arg(long = "report-json")]
    report_json: Option<PathBuf>,
}

const EXIT_OK: i32 = 0;
const EXIT_USAGE: i32 = 1;
const EXIT_IO: i32 = 2;
const EXIT_UNRESOLVED: i32 = 3;

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    EXIT_OK
                }
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    if args.offline && args.fixtures.is_none() {
        eprintln!("error: --offline requires --fixtures DIR");
        return EXIT_USAGE;
    }

    let (text, origin) = match read_input(&args.input) {
        Ok(pair) => pair,
        Err(e) => {
            let report = error_report(format!("cannot read input '{}': {e}", args.input));
            emit_report(&report, &args.report_json);
            return EXIT_IO;
        }
    };
    let doc = SourceDocument::new(text, origin);
    let config = EnrichConfig {
        cache_path: args.cache.clone(),
        offline: args.offline,
        fixtures_dir: args.fixtures.clone(),
        ttl: Duration::from_secs(args.ttl_days.saturating_mul(24 * 60 * 60)),
        timeout: Duration::from_millis(args.timeout_ms),
        concurrency: args.concurrency,
        fail_on_unresolved: args.fail_on_unresolved,
        embed_json: !args.no_embed_json,
        math_renderer_url: args.math_renderer_url.clone(),
        strict_sources: args.strict_sources,
        ..EnrichConfig::default()
    };

    match enrich(&doc, &config) {
        Ok((html, report)) => {
            if let Err(e) = write_output(&args.output, &html) {
                let report = error_report(format!("cannot write output '{}': {e}", args.output));
                emit_report(&report, &args.report_json);
                return EXIT_IO;
            }
            emit_report(&report, &args.report_json);
            EXIT_OK
        }
        Err(PipelineError::Unresolved { report, .. }) => {
            emit_report(&report, &args.report_json);
            EXIT_UNRESOLVED
        }
        Err(PipelineError::Config(message)) => {
            eprintln!("error: {message}");
            EXIT_USAGE
        }
        Err(e) => {
            let report = error_report(e.to_string());
            emit_report(&report, &args.report_json);
            EXIT_IO
        }
    }
}

fn read_input(target: &str) -> std::io::Result<(String, String)> {
    if target == "-" {
        let mut text = String::new();
        std::io::stdin().read_to_string(&mut text)?;
        Ok((text, "<stdin>".to_string()))
    } else {
        Ok((std::fs::read_to_string(target)?, target.to_string()))
    }
}

fn write_output(target: &str, html: &str) -> std::io::Result<()> {
    if target == "-" {
        std::io::stdout().write_all(html.as_bytes())
    } else {
        std::fs::write(target, html)
    }
}

fn error_report(message: String) -> RunReport {
    RunReport {
        counts: Default::default(),
        diagnostics: vec![Diagnostic::error(message)],
    }
}

fn emit_report(report: &RunReport, json_path: &Option<PathBuf>) {
    eprint!("{report}");
    if let Some(path) = json_path {
        if let Err(e) = std::fs::write(path, report.to_json()) {
            eprintln!("warn: cannot write report to {}: {e}", path.display());
        }
    }
}
