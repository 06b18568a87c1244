//! End-to-end experiment runs over the bundled corpus with the replay
//! transport: trial judging, empty-generation handling, the adaptive
//! pipeline through refinement and assembly, error isolation, and
//! bit-for-bit determinism of outcomes.

use std::path::Path;

use pocforge::bench::{run_experiment, JudgmentBook, RunConfig, RunMode};
use pocforge::corpus::{load_corpus, CveRecord};
use pocforge::llm::{LlmClient, ModelConfig, ReplayScript};
use pocforge::payload::Verdict;
use pocforge::php::SinkConfig;
use pocforge::prompt::IclBank;
use pocforge::subtask::FailureCause;

fn fig4() -> CveRecord {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/corpus");
    let load = load_corpus(&dir).unwrap();
    assert!(load.issues.is_empty(), "corpus fixtures load cleanly");
    load.records
        .into_iter()
        .find(|r| r.id == "fig4")
        .expect("fig4 fixture present")
}

fn replay_client(replies: &[&str]) -> LlmClient {
    let mut script = ReplayScript::new();
    for reply in replies {
        script.push_ordinal(*reply);
    }
    LlmClient::replay(ModelConfig::new("replay-model"), script)
}

/// Nine CoT step replies that answer every sub-task of the taint plan for
/// the fig4 record, in step order.
fn adaptive_replies() -> Vec<String> {
    vec![
        r#"{"sink": "echo at search_results.php line 9", "vulnerable-variable": "search", "source": "$_GET['search']"}"#.to_string(),
        r#"{"data-flow-constraints": "double quotes and NUL bytes are removed", "control-flow-constraints": "search must be nonempty"}"#.to_string(),
        r#"{"syntax-constraints": "html-attr-single-quoted"}"#.to_string(),
        r#"{"attack-payload": "question'><script>alert(1)</script>"}"#.to_string(),
        r#"{"file-navigation-chain": "search.php -> search_results.php", "file-navigation-code": "include 'search_results.php'"}"#.to_string(),
        r#"{"path-constraint-code": "if ($_GET['mode'] == 'search')"}"#.to_string(),
        r#"{"path-constraint-variables-values": "mode=search"}"#.to_string(),
        r#"{"request-parameters": {"mode": "search", "search": "{{payload}}"}, "request-method": "GET"}"#.to_string(),
        r#"{"request-url": "/search.php"}"#.to_string(),
    ]
}

#[test]
fn base_run_judges_trials_and_skips_empty_generations() {
    let record = fig4();
    let html = "<!DOCTYPE html>\n<html><body><a href=\"http://books.example/search.php?search=x\">go</a></body></html>";
    let proxy = "GET /search.php?search=x HTTP/1.1\nHost: books.example\n\n";
    let client = replay_client(&[html, proxy, "   "]);
    let mut judgments = JudgmentBook::default();
    judgments.0.insert("fig4".into(), vec![true, false, true]);
    let sinks = SinkConfig::default_config();
    let icl = IclBank::builtin();
    let cfg = RunConfig {
        client: &client,
        sinks: &sinks,
        icl: &icl,
        k: 3,
        workers: 1,
        out_dir: None,
        judgments: Some(judgments),
    };

    let output = run_experiment(std::slice::from_ref(&record), RunMode::BaseS1, &cfg);
    assert!(output.errors.is_empty());
    assert_eq!(output.outcomes.len(), 1);
    let outcome = &output.outcomes[0];
    assert_eq!(outcome.scenario, "S1");
    assert_eq!(outcome.trials.len(), 3);
    assert_eq!(outcome.trials[0].format.as_deref(), Some("html"));
    assert_eq!(outcome.trials[1].format.as_deref(), Some("proxy-request"));
    // A blank generation yields no PoC, so no format is recorded.
    assert_eq!(outcome.trials[2].format, None);
    assert_eq!(outcome.trials[0].functional, Some(true));
    assert_eq!(outcome.trials[1].functional, Some(false));
    assert!(!outcome.success, "one failed trial sinks the record");
    // The description alone names neither the sink file nor the entry
    // file, so both completeness flags stay down and classification
    // reports missing disclosure on both tracks.
    assert!(!outcome.ledger.complete_vul);
    assert!(!outcome.ledger.complete_nav);
    assert!(outcome.causes.contains(&FailureCause::C1Vulnerability));
    assert!(outcome.causes.contains(&FailureCause::C1Navigation));
}

#[test]
fn adaptive_run_refines_assembles_and_serializes() {
    let record = fig4();
    let replies = adaptive_replies();
    let refs: Vec<&str> = replies.iter().map(String::as_str).collect();
    let client = replay_client(&refs);
    let sinks = SinkConfig::default_config();
    let icl = IclBank::builtin();
    let out_dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        client: &client,
        sinks: &sinks,
        icl: &icl,
        k: 1,
        workers: 1,
        out_dir: Some(out_dir.path().to_path_buf()),
        judgments: None,
    };

    let output = run_experiment(std::slice::from_ref(&record), RunMode::Adaptive, &cfg);
    assert_eq!(output.errors, vec![]);
    let outcome = &output.outcomes[0];
    assert_eq!(outcome.scenario, "S3");
    let trial = &outcome.trials[0];
    // The scripted payload survives the sanitizer and escapes the
    // attribute, so the first harness run validates it.
    assert_eq!(trial.verdict, Some(Verdict::Valid));
    assert_eq!(trial.functional, Some(true));
    assert_eq!(trial.format.as_deref(), Some("proxy-request"));
    assert_eq!(trial.artifact.as_deref(), Some("fig4_s3_1.http"));
    assert!(outcome.success);
    assert!(outcome.causes.is_empty());

    let body = std::fs::read_to_string(out_dir.path().join("fig4_s3_1.http")).unwrap();
    assert!(body.starts_with("GET /search.php?mode=search&search="));
    assert!(body.contains("question%27%3E%3Cscript%3E"));

    // Full disclosure plus correct answers: every ledger stage holds.
    assert!(outcome.ledger.complete_vul);
    assert!(outcome.ledger.complete_nav);
    assert!(outcome.ledger.ident_vul);
    assert!(outcome.ledger.ident_nav);
    assert!(outcome.ledger.gen_payload);
    assert!(outcome.ledger.gen_pathvar);
}

#[test]
fn adaptive_outcomes_are_bit_deterministic_across_runs() {
    let record = fig4();
    let sinks = SinkConfig::default_config();
    let icl = IclBank::builtin();
    let mut serialized = Vec::new();
    for _ in 0..2 {
        let replies = adaptive_replies();
        let refs: Vec<&str> = replies.iter().map(String::as_str).collect();
        let client = replay_client(&refs);
        let out_dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            client: &client,
            sinks: &sinks,
            icl: &icl,
            k: 1,
            workers: 1,
            out_dir: Some(out_dir.path().to_path_buf()),
            judgments: None,
        };
        let output = run_experiment(std::slice::from_ref(&record), RunMode::Adaptive, &cfg);
        serialized.push(serde_json::to_string_pretty(&output).unwrap());
    }
    assert_eq!(serialized[0], serialized[1]);
}

#[test]
fn a_failing_record_is_reported_without_aborting_the_rest() {
    let good = fig4();
    let mut broken = good.clone();
    broken.id = "zzz-broken".into();
    // No source files: context extraction cannot find the sink, so the
    // adaptive pipeline must fail for this record only.
    broken.files.clear();

    let replies = adaptive_replies();
    let refs: Vec<&str> = replies.iter().map(String::as_str).collect();
    let client = replay_client(&refs);
    let sinks = SinkConfig::default_config();
    let icl = IclBank::builtin();
    let cfg = RunConfig {
        client: &client,
        sinks: &sinks,
        icl: &icl,
        k: 1,
        workers: 1,
        out_dir: None,
        judgments: None,
    };

    let records = vec![good, broken];
    let output = run_experiment(&records, RunMode::Adaptive, &cfg);
    assert_eq!(output.outcomes.len(), 1);
    assert_eq!(output.outcomes[0].record_id, "fig4");
    assert!(output.outcomes[0].success);
    assert_eq!(output.errors.len(), 1);
    assert_eq!(output.errors[0].record_id, "zzz-broken");
    assert!(!output.errors[0].message.is_empty());
}

#[test]
fn outcomes_round_trip_through_the_outcome_file() {
    let record = fig4();
    let client = replay_client(&["<!DOCTYPE html><html></html>", "x", "y"]);
    let sinks = SinkConfig::default_config();
    let icl = IclBank::builtin();
    let cfg = RunConfig {
        client: &client,
        sinks: &sinks,
        icl: &icl,
        k: 3,
        workers: 1,
        out_dir: None,
        judgments: None,
    };
    let output = run_experiment(std::slice::from_ref(&record), RunMode::BaseS2, &cfg);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("outcomes.json");
    output.write(&path).unwrap();
    let read_back = pocforge::bench::RunOutput::read(&path).unwrap();
    assert_eq!(read_back, output);
}
