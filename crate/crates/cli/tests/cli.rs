//! Exit codes, flags and report output of the docenrich binary.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn golden_input() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/worked_example.html")
}

fn cmd() -> Command {
    Command::new(env!("CARGO_BIN_EXE_docenrich"))
}

fn offline_args(input: &Path) -> Vec<String> {
    vec![
        "--input".into(),
        input.display().to_string(),
        "--offline".into(),
        "--fixtures".into(),
        fixtures_dir().display().to_string(),
    ]
}

#[test]
fn missing_input_is_usage_error() {
    let out = cmd().output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_exits_zero() {
    let out = cmd().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .contains("--fail-on-unresolved"));
}

#[test]
fn unreadable_input_is_io_error() {
    let out = cmd()
        .args(["--input", "/nonexistent/path.html"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("cannot read input"));
    // The report still goes to stderr on the failure path.
    assert!(stderr.contains("citations: 0 total"));
}

#[test]
fn offline_without_fixtures_is_usage_error() {
    let out = cmd().args(["--input", "-", "--offline"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn stdin_to_stdout_pipe() {
    let mut child = cmd()
        .args(["--input", "-", "--offline", "--fixtures"])
        .arg(fixtures_dir())
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .as_mut()
        .unwrap()
        .write_all(b"plain $$x$$ text")
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let html = String::from_utf8(out.stdout).unwrap();
    assert!(html.contains(r"\[x\]"));
    assert!(html.contains("kblog-math-loader"));
}

#[test]
fn report_json_matches_schema() {
    let dir = tempfile::tempdir().unwrap();
    let report_path = dir.path().join("report.json");
    let mut args = offline_args(&golden_input());
    args.push("--output".into());
    args.push(dir.path().join("out.html").display().to_string());
    args.push("--report-json".into());
    args.push(report_path.display().to_string());
    let out = cmd().args(&args).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report["version"], 1);
    let counts = &report["counts"];
    for key in [
        "citations_total",
        "citations_resolved",
        "citations_unresolved",
        "citations_grammar_failed",
        "math_fragments",
        "aexp_substitutions",
        "cache_hits",
        "network_requests",
    ] {
        assert!(counts.get(key).is_some(), "missing counts.{key}");
    }
    assert!(report["diagnostics"].is_array());
    assert_eq!(counts["citations_resolved"], 1);
    assert_eq!(counts["math_fragments"], 4);
}

#[test]
fn cache_file_persists_between_invocations() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache.json");
    let mut args = offline_args(&golden_input());
    args.push("--cache".into());
    args.push(cache.display().to_string());
    args.push("--output".into());
    args.push(dir.path().join("a.html").display().to_string());

    let first = cmd().args(&args).output().unwrap();
    assert_eq!(first.status.code(), Some(0));
    assert!(cache.exists());
    let stderr1 = String::from_utf8(first.stderr).unwrap();
    assert!(
        stderr1.contains("network requests: 3"),
        "unexpected report: {stderr1}"
    );

    let second = cmd().args(&args).output().unwrap();
    assert_eq!(second.status.code(), Some(0));
    let stderr2 = String::from_utf8(second.stderr).unwrap();
    assert!(
        stderr2.contains("network requests: 0"),
        "unexpected report: {stderr2}"
    );
    assert!(
        stderr2.contains("cache hits: 2"),
        "unexpected report: {stderr2}"
    );
}

#[test]
fn no_embed_json_removes_metadata_block() {
    let mut args = offline_args(&golden_input());
    args.push("--no-embed-json".into());
    let out = cmd().args(&args).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let html = String::from_utf8(out.stdout).unwrap();
    assert!(!html.contains("kcite-metadata"));
    assert!(html.contains("kcite-bibliography"));
}

#[test]
fn math_renderer_url_is_configurable() {
    let mut args = offline_args(&golden_input());
    args.push("--math-renderer-url".into());
    args.push("https://renderer.example/custom.js".into());
    let out = cmd().args(&args).output().unwrap();
    let html = String::from_utf8(out.stdout).unwrap();
    assert!(html.contains(
        r#"<script src="https://renderer.example/custom.js" class="kblog-math-loader">"#
    ));
}

#[test]
fn strict_sources_flags_bare_digits() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("doc.html");
    std::fs::write(&input, "[cite]17237039[/cite]").unwrap();
    let mut args = offline_args(&input);
    args.push("--strict-sources".into());
    let out = cmd().args(&args).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let html = String::from_utf8(out.stdout).unwrap();
    assert!(html.contains("kcite-error"));
}

#[test]
fn unwritable_output_is_io_error() {
    let mut args = offline_args(&golden_input());
    args.push("--output".into());
    args.push("/nonexistent-dir/out.html".into());
    let out = cmd().args(&args).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr)
        .unwrap()
        .contains("cannot write output"));
}

#[test]
fn report_json_is_written_on_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("doc.html");
    std::fs::write(&input, "[cite]10.5555/missing-fixture[/cite]").unwrap();
    let report_path = dir.path().join("report.json");
    let mut args = offline_args(&input);
    args.push("--fail-on-unresolved".into());
    args.push("--report-json".into());
    args.push(report_path.display().to_string());
    let out = cmd().args(&args).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report["counts"]["citations_unresolved"], 1);
    assert!(report["diagnostics"]
        .as_array()
        .unwrap()
        .iter()
        .any(|d| d["message"]
            .as_str()
            .unwrap()
            .contains("10.5555/missing-fixture")
            && d["severity"] == "error"));
}

#[test]
fn corrupt_cache_starts_empty_with_warning() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache.json");
    std::fs::write(&cache, "not json at all").unwrap();
    let mut args = offline_args(&golden_input());
    args.push("--cache".into());
    args.push(cache.display().to_string());
    args.push("--output".into());
    args.push(dir.path().join("out.html").display().to_string());
    let out = cmd().args(&args).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(
        stderr.contains("starting empty"),
        "expected cache warning, got: {stderr}"
    );
    // The run rewrote the cache with valid content.
    let reloaded = std::fs::read_to_string(&cache).unwrap();
    assert!(reloaded.contains("\"version\": 1"));
}
