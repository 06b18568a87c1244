//! Experiment orchestration: run a PoC-generation mode over a corpus with
//! k repeated trials per record, judge the trials, fill the per-record
//! failure ledger, compute the success and format-distribution metrics,
//! and emit deterministic reports.
//!
//! Under the replay transport the whole pipeline is bit-deterministic:
//! outcomes carry no timestamps, collections are ordered, and artifact
//! names derive from record, scenario, and trial alone.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assemble::{assemble, classify_format, serialize, PocArtifact, Provenance};
use crate::context::{extract, render_document, ContextBundle, Granularity};
use crate::corpus::{CveRecord, Scenario, ScenarioInput};
use crate::llm::LlmClient;
use crate::payload::{refine_loop, InterpreterCommand, Verdict};
use crate::php::SinkConfig;
use crate::prompt::{base_prompt, cot_prompt, direct_prompt, IclBank};
use crate::subtask::{
    classify_failure, decompose, ident_failure_rate, parse_results, reason_failure_rate,
    FailureCause, FailureLedger, Rate, SubTaskResult, SubTaskStatus,
};

/// How many generations each record gets per experiment.
pub const DEFAULT_TRIALS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunMode {
    BaseS1,
    BaseS2,
    BaseS3,
    DirectContextFile,
    DirectContextFunction,
    Adaptive,
}

impl RunMode {
    pub fn parse(s: &str) -> Option<RunMode> {
        Some(match s.trim().to_ascii_lowercase().as_str() {
            "base-s1" => RunMode::BaseS1,
            "base-s2" => RunMode::BaseS2,
            "base-s3" => RunMode::BaseS3,
            "direct-context-file" => RunMode::DirectContextFile,
            "direct-context-function" => RunMode::DirectContextFunction,
            "adaptive" => RunMode::Adaptive,
            _ => return None,
        })
    }

    pub fn label(self) -> &'static str {
        match self {
            RunMode::BaseS1 => "base-s1",
            RunMode::BaseS2 => "base-s2",
            RunMode::BaseS3 => "base-s3",
            RunMode::DirectContextFile => "direct-context-file",
            RunMode::DirectContextFunction => "direct-context-function",
            RunMode::Adaptive => "adaptive",
        }
    }

    /// Disclosure stage the mode's prompts run at. Context-driven modes
    /// presuppose source access, hence full disclosure.
    pub fn scenario(self) -> Scenario {
        match self {
            RunMode::BaseS1 => Scenario::S1,
            RunMode::BaseS2 => Scenario::S2,
            _ => Scenario::S3,
        }
    }
}

/// Per-trial functional judgments, keyed by record id. The source is a
/// JSON object `{"<record>": [true, false, ...]}`; in a replay experiment
/// it is the scripted oracle, in a live one the merged human judgment.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgmentBook(pub BTreeMap<String, Vec<bool>>);

impl JudgmentBook {
    pub fn from_path(path: &Path) -> Result<JudgmentBook, BenchError> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        serde_json::from_str(&text).map_err(|e| BenchError::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    /// Judgment for a 1-based trial, if scripted.
    pub fn lookup(&self, record_id: &str, trial: usize) -> Option<bool> {
        self.0.get(record_id).and_then(|v| v.get(trial - 1)).copied()
    }
}

pub struct RunConfig<'a> {
    pub client: &'a LlmClient,
    pub sinks: &'a SinkConfig,
    pub icl: &'a IclBank,
    /// Trials per record, 1-based in all outputs.
    pub k: usize,
    /// Record-level parallelism. Ordinal replay scripts need 1; with
    /// digest-keyed scripts any width stays deterministic because outcomes
    /// are reordered by record id.
    pub workers: usize,
    /// Artifacts and refinement workspaces land here when set.
    pub out_dir: Option<PathBuf>,
    pub judgments: Option<JudgmentBook>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    /// 1-based trial number.
    pub trial: usize,
    /// Classified format label; None when the generation came back empty.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<String>,
    /// Functional judgment; None when no source could judge the trial.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub functional: Option<bool>,
    /// Validator verdict, Adaptive mode only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    /// File name of the serialized artifact inside the output directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub artifact: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub record_id: String,
    pub cwe: String,
    pub mode: String,
    pub scenario: String,
    pub trials: Vec<TrialRecord>,
    /// All k trials judged functional.
    pub success: bool,
    pub ledger: FailureLedger,
    /// Failure classes per the taxonomy; empty on success.
    pub causes: Vec<FailureCause>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunError {
    pub record_id: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub mode: String,
    pub outcomes: Vec<TrialOutcome>,
    /// Records whose pipeline failed; never silently dropped.
    pub errors: Vec<RunError>,
}

impl RunOutput {
    pub fn write(&self, path: &Path) -> Result<(), BenchError> {
        let mut text = serde_json::to_string_pretty(self).expect("outcomes serialize");
        text.push('\n');
        std::fs::write(path, text).map_err(|e| BenchError::Io {
            path: path.display().to_string(),
            source: e,
        })
    }

    pub fn read(path: &Path) -> Result<RunOutput, BenchError> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        serde_json::from_str(&text).map_err(|e| BenchError::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
}

/// Runs one mode over the corpus. Each record is processed independently;
/// a failing record lands in `errors` and never aborts the others.
/// Outcomes are ordered by record id regardless of worker interleaving.
pub fn run_experiment(records: &[CveRecord], mode: RunMode, cfg: &RunConfig) -> RunOutput {
    assert!(cfg.k >= 1, "trial count must be at least 1");
    let results: Mutex<Vec<(usize, Result<TrialOutcome, String>)>> =
        Mutex::new(Vec::with_capacity(records.len()));
    let next = AtomicUsize::new(0);
    let worker_count = cfg.workers.max(1).min(records.len().max(1));

    std::thread::scope(|scope| {
        for _ in 0..worker_count {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::SeqCst);
                let Some(record) = records.get(idx) else { break };
                let result = run_record(record, mode, cfg);
                results.lock().unwrap().push((idx, result));
            });
        }
    });

    let mut collected = results.into_inner().unwrap();
    collected.sort_by_key(|(idx, _)| *idx);
    let mut outcomes = Vec::new();
    let mut errors = Vec::new();
    for (idx, result) in collected {
        match result {
            Ok(outcome) => outcomes.push(outcome),
            Err(message) => errors.push(RunError {
                record_id: records[idx].id.clone(),
                message,
            }),
        }
    }
    outcomes.sort_by(|a, b| a.record_id.cmp(&b.record_id));
    errors.sort_by(|a, b| a.record_id.cmp(&b.record_id));
    RunOutput {
        mode: mode.label().to_string(),
        outcomes,
        errors,
    }
}

/// One trial's generated body plus, for Adaptive, the answers and verdict
/// behind it.
struct TrialProduct {
    body: String,
    verdict: Option<Verdict>,
    answers: Vec<SubTaskResult>,
    prebuilt: Option<PocArtifact>,
}

fn run_record(record: &CveRecord, mode: RunMode, cfg: &RunConfig) -> Result<TrialOutcome, String> {
    let scenario = mode.scenario();
    let scenario_input =
        crate::corpus::build_scenario(record, scenario).map_err(|e| e.to_string())?;

    // Ground truth for ledger filling; optional in the base modes where a
    // record can still run without an extractable context.
    let bundle = extract(record, Granularity::Function, cfg.sinks);
    let bundle = match mode {
        RunMode::DirectContextFile => {
            Some(extract(record, Granularity::File, cfg.sinks).map_err(|e| e.to_string())?)
        }
        RunMode::DirectContextFunction | RunMode::Adaptive => {
            Some(bundle.map_err(|e| e.to_string())?)
        }
        _ => bundle.ok(),
    };

    let products: Vec<TrialProduct> = match mode {
        RunMode::BaseS1 | RunMode::BaseS2 | RunMode::BaseS3 => {
            let prompt = base_prompt(&scenario_input, &record.base_url);
            let replies = cfg
                .client
                .run_trials(&prompt, cfg.k)
                .map_err(|e| e.to_string())?;
            replies
                .into_iter()
                .map(|c| TrialProduct {
                    body: c.text,
                    verdict: None,
                    answers: Vec::new(),
                    prebuilt: None,
                })
                .collect()
        }
        RunMode::DirectContextFile | RunMode::DirectContextFunction => {
            let b = bundle.as_ref().expect("direct modes extract or bail");
            let prompt = direct_prompt(&scenario_input, &b.vulnerability, &b.navigation);
            let replies = cfg
                .client
                .run_trials(&prompt, cfg.k)
                .map_err(|e| e.to_string())?;
            replies
                .into_iter()
                .map(|c| TrialProduct {
                    body: c.text,
                    verdict: None,
                    answers: Vec::new(),
                    prebuilt: None,
                })
                .collect()
        }
        RunMode::Adaptive => {
            let b = bundle.as_ref().expect("adaptive mode extracts or bails");
            (1..=cfg.k)
                .map(|trial| adaptive_trial(record, b, cfg, trial))
                .collect::<Result<Vec<_>, String>>()?
        }
    };

    let mut trials = Vec::with_capacity(products.len());
    for (i, product) in products.iter().enumerate() {
        let trial = i + 1;
        let artifact = match &product.prebuilt {
            Some(artifact) => Some(artifact.clone()),
            None if product.body.trim().is_empty() => None,
            None => Some(PocArtifact {
                format: classify_format(&product.body),
                body: product.body.clone(),
                request: None,
                cwe: record.cwe.clone(),
                provenance: Provenance {
                    record_id: record.id.clone(),
                    scenario: scenario.label().to_string(),
                    trial,
                },
            }),
        };
        let mut file_name = None;
        if let (Some(artifact), Some(dir)) = (&artifact, &cfg.out_dir) {
            let path = serialize(artifact, dir).map_err(|e| e.to_string())?;
            file_name = path
                .file_name()
                .and_then(|n| n.to_str())
                .map(str::to_string);
        }
        let functional = cfg
            .judgments
            .as_ref()
            .and_then(|j| j.lookup(&record.id, trial))
            .or(product.verdict.map(|v| v == Verdict::Valid));
        trials.push(TrialRecord {
            trial,
            format: artifact.as_ref().map(|a| a.format.label().to_string()),
            functional,
            verdict: product.verdict,
            artifact: file_name,
        });
    }

    let success =
        trials.len() == cfg.k && trials.iter().all(|t| t.functional == Some(true));
    let ledger = fill_ledger(record, &scenario_input, bundle.as_ref(), &products);
    let causes: Vec<FailureCause> = if success {
        Vec::new()
    } else {
        classify_failure(&ledger).into_iter().collect()
    };
    Ok(TrialOutcome {
        record_id: record.id.clone(),
        cwe: record.cwe.clone(),
        mode: mode.label().to_string(),
        scenario: scenario.label().to_string(),
        trials,
        success,
        ledger,
        causes,
    })
}

/// Runs the CoT step sequence for one trial, refines the payload for the
/// taint-style classes, and assembles the artifact from the answers.
fn adaptive_trial(
    record: &CveRecord,
    bundle: &ContextBundle,
    cfg: &RunConfig,
    trial: usize,
) -> Result<TrialProduct, String> {
    let cwe = record.cwe_class().map_err(|e| e.to_string())?;
    let plan = decompose(cwe);
    let doc = render_document(bundle);

    let mut facts: Vec<SubTaskResult> = Vec::new();
    for step in 0..plan.cot_steps.len() {
        let prompt = cot_prompt(&doc, &plan, step, &facts, cfg.icl, None);
        let reply = cfg.client.complete(&prompt).map_err(|e| e.to_string())?;
        let step_ids = plan.cot_steps[step].task_ids;
        facts.extend(
            parse_results(&plan, &reply.text)
                .into_iter()
                .filter(|r| step_ids.contains(&r.id.as_str())),
        );
    }

    let mut verdict = None;
    if cwe.is_taint_style() {
        let payload = facts
            .iter()
            .find(|r| r.id == "attack-payload" && r.status == SubTaskStatus::Answered)
            .map(|r| r.answer_text());
        if let Some(payload) = payload.filter(|p| !p.is_empty()) {
            let workspace = match &cfg.out_dir {
                Some(dir) => dir.join("workspaces").join(format!("{}_{trial}", record.id)),
                None => std::env::temp_dir().join(format!("pocforge_{}_{trial}", record.id)),
            };
            let refined = refine_loop(
                cfg.client,
                None,
                bundle,
                cfg.icl,
                &payload,
                &InterpreterCommand::Builtin,
                &workspace,
            )
            .map_err(|e| e.to_string())?;
            verdict = Some(refined.verdict);
            if let Some(fact) = facts.iter_mut().find(|r| r.id == "attack-payload") {
                fact.parsed = Some(serde_json::Value::String(refined.payload.clone()));
                fact.raw = refined.payload;
                fact.status = SubTaskStatus::Answered;
            }
        }
    }

    let artifact =
        assemble(&facts, record, Scenario::S3, trial).map_err(|e| e.to_string())?;
    Ok(TrialProduct {
        body: artifact.body.clone(),
        verdict,
        answers: facts,
        prebuilt: Some(artifact),
    })
}

/// Fills the six progress booleans from textual evidence.
///
/// Completeness scans the scenario inputs for the extractor's ground truth
/// (vulnerable variable and sink file; every chain file). Identification
/// scans the model's output, sub-task answers when present and otherwise
/// the generated bodies. Generation requires a nonempty artifact (payload
/// track) and every path-constraint pair named (navigation track). Each
/// downstream flag is clamped by its upstream one, so a lucky guess from
/// inputs that never contained the fact does not count as identification.
fn fill_ledger(
    record: &CveRecord,
    scenario: &ScenarioInput,
    bundle: Option<&ContextBundle>,
    products: &[TrialProduct],
) -> FailureLedger {
    let mut ledger = FailureLedger::new(record.id.clone());
    let Some(bundle) = bundle else {
        return ledger;
    };
    let vuln = &bundle.vulnerability;
    let nav = &bundle.navigation;

    let mut input_text = scenario.description.clone();
    if let Some(patch) = &scenario.patch {
        input_text.push('\n');
        input_text.push_str(patch);
    }
    if let Some(files) = &scenario.files {
        for f in files {
            input_text.push('\n');
            input_text.push_str(&f.path);
            input_text.push('\n');
            input_text.push_str(&f.content);
        }
    }

    let sink_file = vuln.sink_path.rsplit('/').next().unwrap_or(&vuln.sink_path);
    ledger.complete_vul =
        input_text.contains(&vuln.vulnerable_variable) && input_text.contains(sink_file);
    ledger.complete_nav = nav
        .chain
        .iter()
        .all(|node| input_text.contains(node.rsplit('/').next().unwrap_or(node)));

    let mut evidence = String::new();
    for product in products {
        for answer in &product.answers {
            if answer.status == SubTaskStatus::Answered {
                evidence.push_str(&answer.answer_text());
                evidence.push('\n');
            }
        }
        evidence.push_str(&product.body);
        evidence.push('\n');
    }

    ledger.ident_vul = ledger.complete_vul
        && evidence.contains(&vuln.vulnerable_variable)
        && evidence.contains(sink_file);
    ledger.ident_nav = ledger.complete_nav
        && nav
            .chain
            .iter()
            .all(|node| evidence.contains(node.rsplit('/').next().unwrap_or(node)));
    ledger.gen_payload =
        ledger.ident_vul && products.iter().any(|p| !p.body.trim().is_empty());
    ledger.gen_pathvar = ledger.ident_nav
        && nav
            .path_constraints
            .iter()
            .all(|(k, v)| evidence.contains(&format!("{k}={v}")));
    debug_assert!(ledger.validate().is_ok());
    ledger
}

/// Exact percent with one decimal, rounded half away from zero.
/// None when the denominator is zero: the stratum is undefined, not 0%.
pub fn percent_1dp(num: u64, den: u64) -> Option<String> {
    if den == 0 {
        return None;
    }
    let tenths = (num as u128 * 2000 + den as u128) / (2 * den as u128);
    Some(format!("{}.{}%", tenths / 10, tenths % 10))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessRow {
    pub cwe: String,
    pub mode: String,
    pub n_success: u64,
    pub n_vulns: u64,
    /// Rendered percent, or "undefined" on an empty stratum.
    pub rate: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionRow {
    pub cwe: String,
    pub format: String,
    pub count: u64,
    pub share: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Per (cwe, mode), with a `total` row per mode.
    pub success: Vec<SuccessRow>,
    /// Per (cwe, format), with a `total` stratum, over nonempty PoCs.
    pub distribution: Vec<DistributionRow>,
    pub n_success: u64,
    pub n_vulns: u64,
    /// Generated PoCs counted by the distribution; empty generations are
    /// excluded.
    pub n_poc: u64,
    pub ident_failure: String,
    pub reason_failure: String,
}

fn rate_text(num: u64, den: u64) -> String {
    percent_1dp(num, den).unwrap_or_else(|| "undefined".to_string())
}

/// Aggregates outcomes into the report: success rate per weakness class
/// and mode, format distribution per class, and the two failure rates over
/// all ledgers. Pure and deterministic; ordering is lexicographic with
/// `total` rows last in each group.
pub fn compute_metrics(outcomes: &[TrialOutcome]) -> MetricsReport {
    let mut success_by: BTreeMap<(String, String), (u64, u64)> = BTreeMap::new();
    let mut total_by_mode: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    let mut dist_by: BTreeMap<(String, String), u64> = BTreeMap::new();
    let mut dist_total: BTreeMap<String, u64> = BTreeMap::new();
    let mut poc_by_cwe: BTreeMap<String, u64> = BTreeMap::new();
    let mut n_poc: u64 = 0;

    for outcome in outcomes {
        let cell = success_by
            .entry((outcome.cwe.clone(), outcome.mode.clone()))
            .or_insert((0, 0));
        cell.1 += 1;
        let total = total_by_mode.entry(outcome.mode.clone()).or_insert((0, 0));
        total.1 += 1;
        if outcome.success {
            cell.0 += 1;
            total.0 += 1;
        }
        for trial in &outcome.trials {
            if let Some(format) = &trial.format {
                *dist_by
                    .entry((outcome.cwe.clone(), format.clone()))
                    .or_insert(0) += 1;
                *dist_total.entry(format.clone()).or_insert(0) += 1;
                *poc_by_cwe.entry(outcome.cwe.clone()).or_insert(0) += 1;
                n_poc += 1;
            }
        }
    }

    let mut success: Vec<SuccessRow> = success_by
        .into_iter()
        .map(|((cwe, mode), (n_success, n_vulns))| SuccessRow {
            rate: rate_text(n_success, n_vulns),
            cwe,
            mode,
            n_success,
            n_vulns,
        })
        .collect();
    for (mode, (n_success, n_vulns)) in total_by_mode {
        success.push(SuccessRow {
            cwe: "total".to_string(),
            rate: rate_text(n_success, n_vulns),
            mode,
            n_success,
            n_vulns,
        });
    }

    let mut distribution: Vec<DistributionRow> = dist_by
        .into_iter()
        .map(|((cwe, format), count)| DistributionRow {
            share: rate_text(count, poc_by_cwe[&cwe]),
            cwe,
            format,
            count,
        })
        .collect();
    for (format, count) in dist_total {
        distribution.push(DistributionRow {
            cwe: "total".to_string(),
            share: rate_text(count, n_poc),
            format,
            count,
        });
    }

    let ledgers: Vec<FailureLedger> = outcomes.iter().map(|o| o.ledger.clone()).collect();
    let render_rate = |r: Rate| r.to_string();
    let n_success = success
        .iter()
        .filter(|r| r.cwe == "total")
        .map(|r| r.n_success)
        .sum();
    let n_vulns = success
        .iter()
        .filter(|r| r.cwe == "total")
        .map(|r| r.n_vulns)
        .sum();
    MetricsReport {
        success,
        distribution,
        n_success,
        n_vulns,
        n_poc,
        ident_failure: render_rate(ident_failure_rate(&ledgers)),
        reason_failure: render_rate(reason_failure_rate(&ledgers)),
    }
}

/// Plain-text table mirroring the report. Fixed column widths, no
/// timestamps: identical reports render identical bytes.
pub fn render_report_text(report: &MetricsReport) -> String {
    let mut out = String::new();
    out.push_str("SUCCESS RATE (record succeeds only if every trial is functional)\n");
    out.push_str(&format!(
        "{:<10} {:<26} {:>8} {:>8} {:>10}\n",
        "cwe", "mode", "success", "records", "rate"
    ));
    for row in &report.success {
        out.push_str(&format!(
            "{:<10} {:<26} {:>8} {:>8} {:>10}\n",
            row.cwe, row.mode, row.n_success, row.n_vulns, row.rate
        ));
    }
    out.push_str("\nPOC FORMAT DISTRIBUTION (share of nonempty generations)\n");
    out.push_str(&format!(
        "{:<10} {:<16} {:>8} {:>10}\n",
        "cwe", "format", "count", "share"
    ));
    for row in &report.distribution {
        out.push_str(&format!(
            "{:<10} {:<16} {:>8} {:>10}\n",
            row.cwe, row.format, row.count, row.share
        ));
    }
    out.push_str(&format!(
        "\nTOTALS: {} successes / {} records; {} PoCs counted\n",
        report.n_success, report.n_vulns, report.n_poc
    ));
    out.push_str(&format!(
        "FAILURE RATES: identification {}, reasoning {}\n",
        report.ident_failure, report.reason_failure
    ));
    out
}

/// Writes `report.json` and `report.txt` into `out_dir`; returns both
/// paths. Byte-identical for equal reports.
pub fn emit_report(report: &MetricsReport, out_dir: &Path) -> Result<(PathBuf, PathBuf), BenchError> {
    std::fs::create_dir_all(out_dir).map_err(|e| BenchError::Io {
        path: out_dir.display().to_string(),
        source: e,
    })?;
    let json_path = out_dir.join("report.json");
    let mut json = serde_json::to_string_pretty(report).expect("report serializes");
    json.push('\n');
    std::fs::write(&json_path, json).map_err(|e| BenchError::Io {
        path: json_path.display().to_string(),
        source: e,
    })?;
    let txt_path = out_dir.join("report.txt");
    std::fs::write(&txt_path, render_report_text(report)).map_err(|e| BenchError::Io {
        path: txt_path.display().to_string(),
        source: e,
    })?;
    Ok((json_path, txt_path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome(id: &str, cwe: &str, mode: &str, success: bool, formats: &[&str]) -> TrialOutcome {
        TrialOutcome {
            record_id: id.into(),
            cwe: cwe.into(),
            mode: mode.into(),
            scenario: "S3".into(),
            trials: formats
                .iter()
                .enumerate()
                .map(|(i, f)| TrialRecord {
                    trial: i + 1,
                    format: (!f.is_empty()).then(|| f.to_string()),
                    functional: Some(success),
                    verdict: None,
                    artifact: None,
                })
                .collect(),
            success,
            ledger: FailureLedger::new(id),
            causes: vec![],
        }
    }

    #[test]
    fn published_aggregate_rates_render_exactly() {
        let mut outcomes = Vec::new();
        for i in 0..100 {
            outcomes.push(outcome(
                &format!("r{i:03}"),
                "CWE-79",
                "base-s3",
                i < 21,
                &["html"],
            ));
        }
        let report = compute_metrics(&outcomes);
        let total = report.success.iter().find(|r| r.cwe == "total").unwrap();
        assert_eq!(total.rate, "21.0%");
        assert_eq!(report.n_success, 21);
        assert_eq!(report.n_vulns, 100);

        for o in outcomes.iter_mut().take(34) {
            o.success = true;
        }
        let report = compute_metrics(&outcomes);
        let total = report.success.iter().find(|r| r.cwe == "total").unwrap();
        assert_eq!(total.rate, "34.0%");

        for o in outcomes.iter_mut() {
            o.success = false;
        }
        let report = compute_metrics(&outcomes);
        let total = report.success.iter().find(|r| r.cwe == "total").unwrap();
        assert_eq!(total.rate, "0.0%");
    }

    #[test]
    fn percent_rounds_half_away_at_one_decimal() {
        assert_eq!(percent_1dp(21, 100).unwrap(), "21.0%");
        assert_eq!(percent_1dp(1, 3).unwrap(), "33.3%");
        assert_eq!(percent_1dp(2, 3).unwrap(), "66.7%");
        // 1/800 = 0.125%: the tenths digit ties and rounds away.
        assert_eq!(percent_1dp(1, 800).unwrap(), "0.1%");
        assert_eq!(percent_1dp(3, 800).unwrap(), "0.4%");
        assert_eq!(percent_1dp(0, 7).unwrap(), "0.0%");
        assert_eq!(percent_1dp(7, 7).unwrap(), "100.0%");
        assert!(percent_1dp(1, 0).is_none());
    }

    #[test]
    fn distribution_shares_sum_to_one_per_class() {
        let outcomes = vec![
            outcome("a", "CWE-79", "base-s3", true, &["html", "proxy-request", "html"]),
            outcome("b", "CWE-79", "base-s3", false, &["plain-text", "", "html"]),
            outcome("c", "CWE-89", "base-s3", false, &["py-script"]),
        ];
        let report = compute_metrics(&outcomes);
        // Empty generation excluded: CWE-79 counts 5 PoCs, not 6.
        assert_eq!(report.n_poc, 6);
        let cwe79: Vec<_> = report
            .distribution
            .iter()
            .filter(|r| r.cwe == "CWE-79")
            .collect();
        let count: u64 = cwe79.iter().map(|r| r.count).sum();
        assert_eq!(count, 5);
        let sum: f64 = cwe79
            .iter()
            .map(|r| r.share.trim_end_matches('%').parse::<f64>().unwrap())
            .sum();
        assert!((sum - 100.0).abs() < 0.1 + 1e-9, "shares sum to {sum}");
    }

    #[test]
    fn empty_outcomes_mark_strata_undefined() {
        let report = compute_metrics(&[]);
        assert!(report.success.is_empty());
        assert_eq!(report.n_poc, 0);
        assert_eq!(report.ident_failure, "undefined");
        assert_eq!(report.reason_failure, "undefined");
    }

    #[test]
    fn report_rendering_is_deterministic() {
        let outcomes = vec![
            outcome("a", "CWE-79", "base-s1", true, &["html"]),
            outcome("b", "CWE-352", "base-s1", false, &["proxy-request"]),
        ];
        let r1 = compute_metrics(&outcomes);
        let r2 = compute_metrics(&outcomes);
        assert_eq!(r1, r2);
        assert_eq!(render_report_text(&r1), render_report_text(&r2));

        let dir = tempfile::tempdir().unwrap();
        let (json1, txt1) = emit_report(&r1, dir.path()).unwrap();
        let json_bytes = std::fs::read(&json1).unwrap();
        let txt_bytes = std::fs::read(&txt1).unwrap();
        let (json2, txt2) = emit_report(&r1, dir.path()).unwrap();
        assert_eq!(std::fs::read(&json2).unwrap(), json_bytes);
        assert_eq!(std::fs::read(&txt2).unwrap(), txt_bytes);
    }

    #[test]
    fn mode_labels_round_trip() {
        for mode in [
            RunMode::BaseS1,
            RunMode::BaseS2,
            RunMode::BaseS3,
            RunMode::DirectContextFile,
            RunMode::DirectContextFunction,
            RunMode::Adaptive,
        ] {
            assert_eq!(RunMode::parse(mode.label()), Some(mode));
        }
        assert_eq!(RunMode::parse("base-s9"), None);
    }

    #[test]
    fn success_requires_every_trial_functional() {
        let mut o = outcome("a", "CWE-79", "base-s3", true, &["html", "html", "html"]);
        assert!(o.trials.iter().all(|t| t.functional == Some(true)));
        o.trials[1].functional = Some(false);
        let success = o.trials.len() == 3 && o.trials.iter().all(|t| t.functional == Some(true));
        assert!(!success);
    }

    #[test]
    fn judgment_book_lookup_is_one_based() {
        let mut book = JudgmentBook::default();
        book.0.insert("fig4".into(), vec![true, false, true]);
        assert_eq!(book.lookup("fig4", 1), Some(true));
        assert_eq!(book.lookup("fig4", 2), Some(false));
        assert_eq!(book.lookup("fig4", 4), None);
        assert_eq!(book.lookup("other", 1), None);
    }
}
