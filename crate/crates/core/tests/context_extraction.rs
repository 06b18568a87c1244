use std::path::{Path, PathBuf};

use pocforge::context::{extract, render_document, trim_to_budget, ContextError, Granularity};
use pocforge::corpus::{load_corpus, CveRecord};
use pocforge::php::SinkConfig;

fn fixture_dir() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/corpus"))
}

fn golden_path(name: &str) -> PathBuf {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/golden")).join(name)
}

/// Byte-exact golden comparison. `BLESS=1 cargo test` rewrites the files.
fn check_golden(name: &str, actual: &str) {
    let path = golden_path(name);
    if std::env::var_os("BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("missing golden {name} ({e}); run with BLESS=1"));
    assert_eq!(
        expected, actual,
        "rendered document diverged from golden {name}; run with BLESS=1 to update"
    );
}

fn record(id: &str) -> CveRecord {
    let load = load_corpus(fixture_dir()).unwrap();
    load.records.into_iter().find(|r| r.id == id).unwrap()
}

#[test]
fn corpus_fixtures_validate_cleanly() {
    let load = load_corpus(fixture_dir()).unwrap();
    assert!(load.issues.is_empty(), "issues: {:?}", load.issues);
    assert_eq!(load.records.len(), 3);
    for rec in &load.records {
        let problems = rec.validate();
        assert!(problems.is_empty(), "{}: {problems:?}", rec.id);
    }
}

#[test]
fn xss_record_context_at_function_granularity() {
    let cfg = SinkConfig::default_config();
    let bundle = extract(&record("fig4"), Granularity::Function, &cfg).unwrap();
    let doc = render_document(&bundle);
    check_golden("fig4_function.txt", &doc);

    assert_eq!(bundle.vulnerability.source, "$_GET['search']");
    assert_eq!(bundle.vulnerability.sink_path, "search_results.php");
    assert_eq!(bundle.vulnerability.sink_line, 9);
    assert!(doc.contains("value passes through `sanitize_search()`"));
    assert!(doc.contains("- surrounding whitespace is trimmed"));
    assert!(doc.contains("every `\"` is removed (str_replace)"));
    assert!(doc.contains("- html-attr-single-quoted"));
    assert!(doc.contains("`!defined('APP_RUNNING')` must not hold"));
    assert!(doc.contains("`$search != ''` must hold"));
    assert!(doc.contains("CHAIN: search.php -> search_results.php"));
    assert!(doc.contains("ENTRY URL: http://books.example/search.php"));
    assert!(doc.contains("- mode=search"));
}

#[test]
fn xss_record_context_at_file_granularity() {
    let cfg = SinkConfig::default_config();
    let bundle = extract(&record("fig4"), Granularity::File, &cfg).unwrap();
    let doc = render_document(&bundle);
    check_golden("fig4_file.txt", &doc);

    // Whole involved files are embedded; the entry file stays out of the
    // vulnerability slices (navigation covers it).
    assert!(doc.contains("function sanitize_search($value) {"));
    assert!(doc.contains("require_once 'search_functions.php';"));
    assert!(!doc.contains("<form action=\"search.php\""));
}

#[test]
fn csrf_record_context() {
    let cfg = SinkConfig::default_config();
    let bundle = extract(&record("fig14"), Granularity::Function, &cfg).unwrap();
    let doc = render_document(&bundle);
    check_golden("fig14_function.txt", &doc);

    assert_eq!(bundle.vulnerability.source, "$_GET['action']");
    assert_eq!(bundle.vulnerability.sink_line, 23);
    assert_eq!(
        bundle.vulnerability.operation_params,
        vec![("action".to_string(), "clear-statistics".to_string())]
    );
    assert!(doc.contains("OPERATION PARAMETERS: action=clear-statistics"));
    assert!(doc.contains("`!defined('STAT_APP')` must not hold"));
    assert!(doc.contains("- page=ratings"));
    assert!(bundle.vulnerability.syntax_constraints.is_empty());
}

#[test]
fn upload_record_context() {
    let cfg = SinkConfig::default_config();
    let bundle = extract(&record("fig15"), Granularity::Function, &cfg).unwrap();
    let doc = render_document(&bundle);
    check_golden("fig15_function.txt", &doc);

    assert_eq!(bundle.vulnerability.source, "$_FILES['upload']");
    assert_eq!(
        bundle.vulnerability.validation_span,
        Some(("data/inc/files.php".to_string(), 9, 13))
    );
    assert!(doc.contains("VALIDATION MECHANISM: data/inc/files.php:9-13"));
    assert!(doc.contains("- multipart-file-field"));
    // Storage-path derivation is part of the chain.
    assert!(bundle
        .vulnerability
        .chain
        .iter()
        .any(|s| s.line == 4 && s.code.contains("$target")));
    assert!(doc.contains("`in_array($ext, $blacklist)` must not hold"));
    assert!(doc.contains("- action=files"));
}

#[test]
fn extraction_is_deterministic_across_runs() {
    let cfg = SinkConfig::default_config();
    for id in ["fig4", "fig14", "fig15"] {
        let a = render_document(&extract(&record(id), Granularity::Function, &cfg).unwrap());
        let b = render_document(&extract(&record(id), Granularity::Function, &cfg).unwrap());
        assert_eq!(a, b, "{id} rendered differently on a second run");
    }
}

#[test]
fn budget_trim_on_real_bundle() {
    let cfg = SinkConfig::default_config();
    let mut bundle = extract(&record("fig4"), Granularity::File, &cfg).unwrap();
    // File-granularity slices are all mandatory; a tiny budget must fail
    // with the document's real size.
    match trim_to_budget(&mut bundle, 10) {
        Err(ContextError::BudgetExceeded { needed, budget }) => {
            assert!(needed > budget);
        }
        other => panic!("expected BudgetExceeded, got {other:?}"),
    }

    let mut bundle = extract(&record("fig4"), Granularity::Function, &cfg).unwrap();
    let full = pocforge::context::token_estimate(&render_document(&bundle));
    trim_to_budget(&mut bundle, full).unwrap();
    assert_eq!(
        pocforge::context::token_estimate(&render_document(&bundle)),
        full,
        "a fitting budget must not drop anything"
    );
}
