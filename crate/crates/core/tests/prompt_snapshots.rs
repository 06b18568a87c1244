//! Golden snapshots of each prompt family, rendered from the bundled corpus
//! fixtures. Set BLESS=1 to rewrite the snapshot files after an intentional
//! format change.

use std::path::PathBuf;

use pocforge::context::{extract, render_document, Granularity};
use pocforge::corpus::{build_scenario, load_corpus, CveRecord, Scenario};
use pocforge::php::SinkConfig;
use pocforge::prompt::{base_prompt, cot_prompt, direct_prompt, subtask_prompt, IclBank};
use pocforge::subtask::decompose;

fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn check_golden(name: &str, actual: &str) {
    let path = fixture_dir().join("golden").join(name);
    if std::env::var("BLESS").as_deref() == Ok("1") {
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path)
        .unwrap_or_else(|_| panic!("missing golden {name}; run with BLESS=1 to create it"));
    assert_eq!(expected, actual, "snapshot {name} drifted");
}

fn record(id: &str) -> CveRecord {
    let load = load_corpus(&fixture_dir().join("corpus")).unwrap();
    load.records
        .into_iter()
        .find(|r| r.id == id)
        .unwrap_or_else(|| panic!("fixture record {id} missing"))
}

#[test]
fn base_prompt_snapshots_per_stage() {
    let rec = record("fig4");
    for stage in [Scenario::S1, Scenario::S2, Scenario::S3] {
        let scenario = build_scenario(&rec, stage).unwrap();
        let p = base_prompt(&scenario, &rec.base_url);
        check_golden(
            &format!("prompt_base_fig4_{}.txt", stage.label().to_lowercase()),
            &p.to_string(),
        );
    }
}

#[test]
fn subtask_prompt_snapshot() {
    let rec = record("fig4");
    let scenario = build_scenario(&rec, Scenario::S3).unwrap();
    let plan = decompose(scenario.cwe);
    let p = subtask_prompt(&plan, &scenario);
    check_golden("prompt_subtask_fig4.txt", &p.to_string());
}

#[test]
fn direct_prompt_snapshot() {
    let rec = record("fig4");
    let scenario = build_scenario(&rec, Scenario::S3).unwrap();
    let bundle = extract(&rec, Granularity::Function, &SinkConfig::default_config()).unwrap();
    let p = direct_prompt(&scenario, &bundle.vulnerability, &bundle.navigation);
    assert!(p.user.contains(&bundle.navigation.entry_url));
    check_golden("prompt_direct_fig4.txt", &p.to_string());
}

#[test]
fn cot_payload_step_snapshot() {
    let rec = record("fig4");
    let bundle = extract(&rec, Granularity::Function, &SinkConfig::default_config()).unwrap();
    let doc = render_document(&bundle);
    let plan = decompose(rec.cwe_class().unwrap());
    let bank = IclBank::builtin();
    let step = plan
        .cot_steps
        .iter()
        .position(|s| s.task_ids.contains(&"attack-payload"))
        .unwrap();
    let p = cot_prompt(&doc, &plan, step, &[], &bank, None);
    check_golden("prompt_cot_payload_fig4.txt", &p.to_string());
}
