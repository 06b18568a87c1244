//! Attack-vector context extraction. Builds a program model from a corpus
//! record, runs the taint or semantic-sink route for the record's weakness
//! class, recovers the navigation chain to a public entry, and packages the
//! result as a renderable, budget-trimmable context bundle.
//!
//! Extraction always sees the full record; disclosure scenarios restrict
//! what reaches prompts, not what the analysis may read.

pub mod nav;
pub mod syntax;
pub mod taint;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{diff, CorpusError, CveRecord, CweClass};
use crate::php::{build_program_model, flatten, ModelError, ProgramModel, SinkConfig, StmtKind};
use nav::NavOutcome;
use taint::{ChainOutcome, Engine, GuardObligation, SeedFilter};

/// How much surrounding code a context document carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    /// Whole files involved in the chain.
    File,
    /// Function bodies and statement spans only.
    Function,
}

impl Granularity {
    pub fn parse(s: &str) -> Option<Granularity> {
        match s.trim().to_ascii_lowercase().as_str() {
            "file" => Some(Granularity::File),
            "function" => Some(Granularity::Function),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Granularity::File => "file",
            Granularity::Function => "function",
        }
    }
}

/// Which part of the context could not be recovered.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContextPart {
    Source,
    Sink,
    Navigation,
}

impl fmt::Display for ContextPart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ContextPart::Source => "source",
            ContextPart::Sink => "sink",
            ContextPart::Navigation => "navigation chain",
        })
    }
}

#[derive(Debug, Error)]
pub enum ContextError {
    #[error("{what} not found: {detail}")]
    NotFound { what: ContextPart, detail: String },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("context document needs {needed} tokens but the budget is {budget}")]
    BudgetExceeded { needed: usize, budget: usize },
}

/// One step of the recovered data-flow chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaintStep {
    pub path: String,
    pub line: u32,
    pub end_line: u32,
    /// Variable carrying the value after this step.
    pub var: String,
    pub code: String,
    /// Explanation shown instead of the code when the step is indirect
    /// (a hop through a function, a guard acting as the source).
    pub note: Option<String>,
}

/// A contiguous region of source shown in the context document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeSlice {
    pub path: String,
    pub start_line: u32,
    pub end_line: u32,
    /// What the region is: a file, a function name, `statement`, `guard`,
    /// `guard-support`, `validation`, or `include`.
    pub label: String,
    pub code: String,
    /// Mandatory slices survive budget trimming unconditionally.
    pub mandatory: bool,
    /// Drop priority for optional slices; lower goes first.
    pub relevance: u32,
}

/// A branch condition the attack has to steer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlConstraint {
    pub path: String,
    pub line: u32,
    pub pred_text: String,
    /// Required evaluation of the predicate along the attack path.
    pub want: bool,
    /// Request parameters that realize it, when derivable.
    pub params: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VulnerabilityContext {
    pub source: String,
    /// Where the source value is first read, when locatable.
    pub source_site: Option<(String, u32)>,
    pub sink_path: String,
    pub sink_line: u32,
    pub sink_end_line: u32,
    /// Short description of the sink operation, e.g. `echo`.
    pub sink_label: String,
    pub vulnerable_variable: String,
    pub chain: Vec<TaintStep>,
    /// Value transformations along the chain, in order.
    pub data_constraints: Vec<String>,
    pub control_constraints: Vec<ControlConstraint>,
    /// Output-position descriptors from the closed syntax taxonomy.
    pub syntax_constraints: Vec<String>,
    /// CWE-434: file region implementing the upload validation.
    pub validation_span: Option<(String, u32, u32)>,
    /// CWE-352: request parameters selecting the state-changing operation.
    pub operation_params: Vec<(String, String)>,
    pub code_slices: Vec<CodeSlice>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NavigationContext {
    /// File paths from the public entry to the sink file, inclusive.
    pub chain: Vec<String>,
    pub entry_url: String,
    /// Request parameters steering execution down the chain.
    pub path_constraints: Vec<(String, String)>,
    pub navigation_code: Vec<CodeSlice>,
    pub path_constraint_code: Vec<CodeSlice>,
}

/// Everything extracted for one record at one granularity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextBundle {
    pub record_id: String,
    pub cwe: String,
    pub granularity: Granularity,
    pub vulnerability: VulnerabilityContext,
    pub navigation: NavigationContext,
    /// Parser and analysis warnings, `path:line: message`.
    pub warnings: Vec<String>,
}

/// Runs the full extraction for `record`.
pub fn extract(
    record: &CveRecord,
    granularity: Granularity,
    cfg: &SinkConfig,
) -> Result<ContextBundle, ContextError> {
    let cwe = record.cwe_class()?;
    let files: Vec<(String, String)> = record
        .files
        .iter()
        .map(|f| (f.path.clone(), f.content.clone()))
        .collect();
    let model = build_program_model(&files, cfg)?;

    let patch = diff::parse_patch(&record.patch).ok();
    let seeds = taint::harvest_seed_names(&record.description, patch.as_ref());
    let filter = SeedFilter::from_names(seeds);
    let patch_files: BTreeSet<String> = patch
        .iter()
        .flat_map(|p| p.touched_paths())
        .filter(|p| model.units.contains_key(p))
        .collect();

    let mut engine = Engine::new(&model, cfg, cwe);
    engine.semantic_sinks = record.semantic_sinks.clone().unwrap_or_default();
    let chain = engine.run(&filter, &patch_files)?;
    let nav_out = nav::extract_navigation(&model, &chain.sink_path, &record.base_url)?;

    let vulnerability = build_vulnerability(&model, cwe, &chain, granularity);
    let navigation = build_navigation(&model, &nav_out);

    let mut warnings = Vec::new();
    for unit in model.units.values() {
        warnings.extend(unit.warnings.iter().cloned());
    }
    warnings.sort();
    warnings.dedup();

    Ok(ContextBundle {
        record_id: record.id.clone(),
        cwe: cwe.label().to_string(),
        granularity,
        vulnerability,
        navigation,
        warnings,
    })
}

fn build_vulnerability(
    model: &ProgramModel,
    cwe: CweClass,
    chain: &ChainOutcome,
    granularity: Granularity,
) -> VulnerabilityContext {
    let control_constraints = chain
        .guards
        .iter()
        .map(|g| constraint_from_guard(model, g))
        .collect();
    let syntax_constraints = syntax::classify(
        cwe,
        model,
        &chain.sink_path,
        chain.sink_line,
        &chain.vulnerable_variable,
    );
    VulnerabilityContext {
        source: chain.source_ref.clone(),
        source_site: source_site(model, chain),
        sink_path: chain.sink_path.clone(),
        sink_line: chain.sink_line,
        sink_end_line: chain.sink_end_line,
        sink_label: sink_label(model, &chain.sink_path, chain.sink_line),
        vulnerable_variable: chain.vulnerable_variable.clone(),
        chain: chain.steps.clone(),
        data_constraints: chain.transform_notes.clone(),
        control_constraints,
        syntax_constraints,
        validation_span: chain.validation_span.clone(),
        operation_params: chain.operation_params.clone(),
        code_slices: vulnerability_slices(model, chain, granularity),
    }
}

fn constraint_from_guard(model: &ProgramModel, g: &GuardObligation) -> ControlConstraint {
    let params = model
        .unit(&g.path)
        .map(|unit| {
            let env =
                taint::straight_line_env(unit, g.line, model.scope_constants(&g.path));
            crate::php::expr::satisfiable(&g.pred, g.want, &env).constraints
        })
        .unwrap_or_default();
    ControlConstraint {
        path: g.path.clone(),
        line: g.line,
        pred_text: g.pred_text.clone(),
        want: g.want,
        params,
    }
}

/// First statement along the chain that reads the source reference.
fn source_site(model: &ProgramModel, chain: &ChainOutcome) -> Option<(String, u32)> {
    for step in &chain.steps {
        let Some(unit) = model.unit(&step.path) else { continue };
        for r in flatten(unit) {
            if r.stmt.line < step.line || r.stmt.line > step.end_line {
                continue;
            }
            for read in &r.stmt.reads {
                if read.is_request_input() && format!("{read}") == chain.source_ref {
                    return Some((step.path.clone(), read.line));
                }
            }
        }
    }
    None
}

fn sink_label(model: &ProgramModel, path: &str, line: u32) -> String {
    let Some(unit) = model.unit(path) else {
        return "statement".to_string();
    };
    for r in flatten(unit) {
        if r.stmt.line != line {
            continue;
        }
        return match r.stmt.kind {
            StmtKind::Echo => "echo".to_string(),
            StmtKind::SqlExec => "SQL execution".to_string(),
            StmtKind::SysExec => "command execution".to_string(),
            StmtKind::FileMove => "file move".to_string(),
            StmtKind::Call => match &r.stmt.callee {
                Some(c) => format!("{c} call"),
                None => "call".to_string(),
            },
            _ => continue,
        };
    }
    "statement".to_string()
}

fn vulnerability_slices(
    model: &ProgramModel,
    chain: &ChainOutcome,
    granularity: Granularity,
) -> Vec<CodeSlice> {
    let mut slices = Vec::new();
    match granularity {
        Granularity::File => {
            let mut paths: BTreeSet<&str> =
                chain.steps.iter().map(|s| s.path.as_str()).collect();
            paths.insert(&chain.sink_path);
            for path in paths {
                let Some(unit) = model.unit(path) else { continue };
                slices.push(CodeSlice {
                    path: path.to_string(),
                    start_line: 1,
                    end_line: unit.line_count,
                    label: "file".to_string(),
                    code: String::new(),
                    mandatory: true,
                    relevance: 100,
                });
            }
        }
        Granularity::Function => {
            for step in &chain.steps {
                let Some(unit) = model.unit(&step.path) else { continue };
                let (start, end, label) = match unit
                    .functions
                    .iter()
                    .find(|f| step.line >= f.start_line && step.line <= f.end_line)
                {
                    Some(f) => (f.start_line, f.end_line, f.name.clone()),
                    None => (step.line, step.end_line, "statement".to_string()),
                };
                slices.push(CodeSlice {
                    path: step.path.clone(),
                    start_line: start,
                    end_line: end,
                    label,
                    code: String::new(),
                    mandatory: true,
                    relevance: 100,
                });
            }
            if let Some((path, start, end)) = &chain.validation_span {
                slices.push(CodeSlice {
                    path: path.clone(),
                    start_line: *start,
                    end_line: *end,
                    label: "validation".to_string(),
                    code: String::new(),
                    mandatory: true,
                    relevance: 100,
                });
            }
            for g in &chain.guards {
                slices.push(CodeSlice {
                    path: g.path.clone(),
                    start_line: g.line,
                    end_line: g.line,
                    label: "guard".to_string(),
                    code: String::new(),
                    mandatory: false,
                    relevance: 60,
                });
                let Some(unit) = model.unit(&g.path) else { continue };
                let vars: Vec<String> = g
                    .pred
                    .reads()
                    .into_iter()
                    .filter(|r| !r.is_superglobal())
                    .map(|r| r.name)
                    .collect();
                if vars.is_empty() {
                    continue;
                }
                for span in contiguous(&taint::backward_slice_lines(unit, g.line, &vars, None)) {
                    slices.push(CodeSlice {
                        path: g.path.clone(),
                        start_line: span.0,
                        end_line: span.1,
                        label: "guard-support".to_string(),
                        code: String::new(),
                        mandatory: false,
                        relevance: 40,
                    });
                }
            }
        }
    }
    finish_slices(model, slices)
}

fn build_navigation(model: &ProgramModel, nav_out: &NavOutcome) -> NavigationContext {
    let navigation_code = nav_out
        .hops
        .iter()
        .map(|hop| CodeSlice {
            path: hop.from.clone(),
            start_line: hop.line,
            end_line: hop.line,
            label: "include".to_string(),
            code: hop.code.clone(),
            mandatory: true,
            relevance: 100,
        })
        .collect();
    let guard_slices = nav_out
        .guards
        .iter()
        .map(|g| CodeSlice {
            path: g.path.clone(),
            start_line: g.line,
            end_line: g.line,
            label: "guard".to_string(),
            code: String::new(),
            mandatory: true,
            relevance: 80,
        })
        .collect();
    NavigationContext {
        chain: nav_out.chain.clone(),
        entry_url: nav_out.entry_url.clone(),
        path_constraints: nav_out.path_constraints.clone(),
        navigation_code,
        path_constraint_code: finish_slices(model, guard_slices),
    }
}

/// Merges contained spans, sorts, and fills in source text.
fn finish_slices(model: &ProgramModel, slices: Vec<CodeSlice>) -> Vec<CodeSlice> {
    let mut kept: Vec<CodeSlice> = Vec::new();
    for s in slices {
        let mut absorbed = false;
        for k in &mut kept {
            if k.path != s.path {
                continue;
            }
            if k.start_line <= s.start_line && s.end_line <= k.end_line {
                k.mandatory |= s.mandatory;
                k.relevance = k.relevance.max(s.relevance);
                absorbed = true;
                break;
            }
            if s.start_line <= k.start_line && k.end_line <= s.end_line {
                k.start_line = s.start_line;
                k.end_line = s.end_line;
                k.label = s.label.clone();
                k.mandatory |= s.mandatory;
                k.relevance = k.relevance.max(s.relevance);
                absorbed = true;
                break;
            }
        }
        if !absorbed {
            kept.push(s);
        }
    }
    kept.sort_by(|a, b| {
        (&a.path, a.start_line, a.end_line).cmp(&(&b.path, b.start_line, b.end_line))
    });
    kept.dedup_by(|a, b| a.path == b.path && a.start_line == b.start_line && a.end_line == b.end_line);
    for s in &mut kept {
        if s.code.is_empty() {
            if let Some(unit) = model.unit(&s.path) {
                s.code = unit.span_text(s.start_line, s.end_line);
            }
        }
    }
    kept
}

/// Collapses a sorted line set into inclusive (start, end) runs.
fn contiguous(lines: &BTreeSet<u32>) -> Vec<(u32, u32)> {
    let mut out: Vec<(u32, u32)> = Vec::new();
    for &n in lines {
        match out.last_mut() {
            Some((_, end)) if *end + 1 == n => *end = n,
            _ => out.push((n, n)),
        }
    }
    out
}

/// Renders the bundle as the deterministic plain-text document embedded in
/// prompts. Sections appear in a fixed order; empty ones are omitted.
pub fn render_document(bundle: &ContextBundle) -> String {
    let v = &bundle.vulnerability;
    let mut out = String::new();
    let role = CweClass::parse(&bundle.cwe)
        .map(|c| c.role_noun())
        .unwrap_or("unknown weakness");
    push_line(&mut out, &format!("WEAKNESS: {} ({role})", bundle.cwe));
    push_line(
        &mut out,
        &format!("VULNERABLE VARIABLE: ${}", v.vulnerable_variable),
    );
    match &v.source_site {
        Some((path, line)) => push_line(
            &mut out,
            &format!("SOURCE: {} at {path}:{line}", v.source),
        ),
        None => push_line(&mut out, &format!("SOURCE: {}", v.source)),
    }
    push_line(
        &mut out,
        &format!(
            "SINK: {} ({})",
            span_ref(&v.sink_path, v.sink_line, v.sink_end_line),
            v.sink_label
        ),
    );

    if !v.chain.is_empty() {
        push_line(&mut out, "TAINT CHAIN:");
        for (i, step) in v.chain.iter().enumerate() {
            let what = match &step.note {
                Some(note) => note.clone(),
                None => first_line(&step.code).to_string(),
            };
            push_line(
                &mut out,
                &format!(
                    "{}. {}: {what}",
                    i + 1,
                    span_ref(&step.path, step.line, step.end_line)
                ),
            );
        }
    }
    if !v.data_constraints.is_empty() {
        push_line(&mut out, "DATA CONSTRAINTS:");
        for c in &v.data_constraints {
            push_line(&mut out, &format!("- {c}"));
        }
    }
    if !v.control_constraints.is_empty() {
        push_line(&mut out, "CONTROL CONSTRAINTS:");
        for c in &v.control_constraints {
            let polarity = if c.want { "must hold" } else { "must not hold" };
            push_line(
                &mut out,
                &format!("- {}:{}: `{}` {polarity}", c.path, c.line, c.pred_text),
            );
        }
    }
    if !v.syntax_constraints.is_empty() {
        push_line(&mut out, "SYNTAX CONTEXT:");
        for s in &v.syntax_constraints {
            push_line(&mut out, &format!("- {s}"));
        }
    }
    if let Some((path, start, end)) = &v.validation_span {
        push_line(
            &mut out,
            &format!("VALIDATION MECHANISM: {path}:{start}-{end}"),
        );
    }
    if !v.operation_params.is_empty() {
        let joined: Vec<String> = v
            .operation_params
            .iter()
            .map(|(k, val)| format!("{k}={val}"))
            .collect();
        push_line(
            &mut out,
            &format!("OPERATION PARAMETERS: {}", joined.join(" ")),
        );
    }
    if !v.code_slices.is_empty() {
        push_line(&mut out, "CODE:");
        for s in &v.code_slices {
            push_slice(&mut out, s);
        }
    }

    let n = &bundle.navigation;
    push_line(&mut out, "NAVIGATION:");
    push_line(&mut out, &format!("CHAIN: {}", n.chain.join(" -> ")));
    push_line(&mut out, &format!("ENTRY URL: {}", n.entry_url));
    if !n.path_constraints.is_empty() {
        push_line(&mut out, "PATH CONSTRAINTS:");
        for (k, val) in &n.path_constraints {
            push_line(&mut out, &format!("- {k}={val}"));
        }
    }
    if !n.navigation_code.is_empty() {
        push_line(&mut out, "NAVIGATION CODE:");
        for s in &n.navigation_code {
            push_slice(&mut out, s);
        }
    }
    if !n.path_constraint_code.is_empty() {
        push_line(&mut out, "PATH CONSTRAINT CODE:");
        for s in &n.path_constraint_code {
            push_slice(&mut out, s);
        }
    }
    out
}

fn push_line(out: &mut String, line: &str) {
    out.push_str(line);
    out.push('\n');
}

fn push_slice(out: &mut String, s: &CodeSlice) {
    push_line(
        out,
        &format!(
            "--- {} ({}) ---",
            span_ref(&s.path, s.start_line, s.end_line),
            s.label
        ),
    );
    push_line(out, s.code.trim_end_matches('\n'));
}

fn span_ref(path: &str, start: u32, end: u32) -> String {
    if end > start {
        format!("{path}:{start}-{end}")
    } else {
        format!("{path}:{start}")
    }
}

fn first_line(code: &str) -> &str {
    code.lines().next().unwrap_or("").trim()
}

/// Four characters per token, rounded up. Deliberately crude; both the
/// trimmer and the pre-send budget check use the same estimate so they
/// cannot disagree.
pub fn token_estimate(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

/// Drops optional code slices, lowest relevance first, until the rendered
/// document fits `budget` tokens. Mandatory slices are never dropped; if
/// they alone exceed the budget the bundle is unusable at this budget.
pub fn trim_to_budget(bundle: &mut ContextBundle, budget: usize) -> Result<(), ContextError> {
    loop {
        let needed = token_estimate(&render_document(bundle));
        if needed <= budget {
            return Ok(());
        }
        let Some(idx) = next_droppable(&bundle.vulnerability.code_slices) else {
            return Err(ContextError::BudgetExceeded { needed, budget });
        };
        bundle.vulnerability.code_slices.remove(idx);
    }
}

/// Index of the slice to drop next: lowest relevance, ties broken by the
/// lexicographically last (path, start) so the order is total.
fn next_droppable(slices: &[CodeSlice]) -> Option<usize> {
    slices
        .iter()
        .enumerate()
        .filter(|(_, s)| !s.mandatory)
        .max_by(|(_, a), (_, b)| {
            (std::cmp::Reverse(a.relevance), &a.path, a.start_line)
                .cmp(&(std::cmp::Reverse(b.relevance), &b.path, b.start_line))
        })
        .map(|(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::VulnFile;

    fn record(files: &[(&str, &str)], description: &str, cwe: &str) -> CveRecord {
        CveRecord {
            id: "t-1".to_string(),
            cwe: cwe.to_string(),
            cvss: 6.1,
            description: description.to_string(),
            patch: String::new(),
            files: files
                .iter()
                .map(|(p, c)| VulnFile {
                    path: p.to_string(),
                    content: c.to_string(),
                })
                .collect(),
            base_url: "http://app.example".to_string(),
            entry_url: "http://app.example/index.php".to_string(),
            ground_truth_poc: None,
            semantic_sinks: None,
        }
    }

    const VULN_PAGE: &str = "<?php\n$q = $_GET['q'];\necho \"<b>$q</b>\";\n";

    #[test]
    fn extract_produces_renderable_bundle() {
        let rec = record(&[("view.php", VULN_PAGE)], "XSS via the 'q' parameter", "CWE-79");
        let cfg = SinkConfig::default_config();
        let bundle = extract(&rec, Granularity::Function, &cfg).unwrap();
        assert_eq!(bundle.vulnerability.source, "$_GET['q']");
        assert_eq!(bundle.vulnerability.source_site, Some(("view.php".to_string(), 2)));
        assert_eq!(bundle.vulnerability.sink_line, 3);
        assert_eq!(bundle.vulnerability.sink_label, "echo");
        assert_eq!(
            bundle.vulnerability.syntax_constraints,
            vec!["html-body".to_string()]
        );
        let doc = render_document(&bundle);
        assert!(doc.starts_with("WEAKNESS: CWE-79 (cross-site scripting)\n"));
        assert!(doc.contains("SOURCE: $_GET['q'] at view.php:2"));
        assert!(doc.contains("SINK: view.php:3 (echo)"));
        assert!(doc.contains("CHAIN: view.php"));
        assert!(doc.contains("ENTRY URL: http://app.example/view.php"));
    }

    #[test]
    fn file_granularity_slices_whole_files() {
        let rec = record(&[("view.php", VULN_PAGE)], "", "CWE-79");
        let cfg = SinkConfig::default_config();
        let bundle = extract(&rec, Granularity::File, &cfg).unwrap();
        let slices = &bundle.vulnerability.code_slices;
        assert_eq!(slices.len(), 1);
        assert_eq!(slices[0].start_line, 1);
        assert_eq!(slices[0].end_line, 3);
        assert!(slices[0].mandatory);
        assert!(slices[0].code.contains("echo"));
    }

    #[test]
    fn render_is_deterministic() {
        let rec = record(&[("view.php", VULN_PAGE)], "XSS via 'q'", "CWE-79");
        let cfg = SinkConfig::default_config();
        let a = render_document(&extract(&rec, Granularity::Function, &cfg).unwrap());
        let b = render_document(&extract(&rec, Granularity::Function, &cfg).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn trim_drops_optional_slices_before_failing() {
        let rec = record(&[("view.php", VULN_PAGE)], "", "CWE-79");
        let cfg = SinkConfig::default_config();
        let mut bundle = extract(&rec, Granularity::Function, &cfg).unwrap();
        bundle.vulnerability.code_slices.push(CodeSlice {
            path: "view.php".to_string(),
            start_line: 1,
            end_line: 1,
            label: "guard".to_string(),
            code: "x".repeat(4000),
            mandatory: false,
            relevance: 10,
        });
        let fat = token_estimate(&render_document(&bundle));
        assert!(fat > 1000);

        let mut trimmed = bundle.clone();
        trim_to_budget(&mut trimmed, fat - 100).unwrap();
        assert!(trimmed
            .vulnerability
            .code_slices
            .iter()
            .all(|s| s.mandatory));
        assert!(token_estimate(&render_document(&trimmed)) <= fat - 100);

        // Idempotent at the same budget.
        let again = trimmed.clone();
        trim_to_budget(&mut trimmed, fat - 100).unwrap();
        assert_eq!(again, trimmed);

        // Mandatory content alone can still be over a tiny budget.
        let err = trim_to_budget(&mut bundle, 5).unwrap_err();
        match err {
            ContextError::BudgetExceeded { needed, budget } => {
                assert!(needed > budget);
                assert_eq!(budget, 5);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn token_estimate_rounds_up() {
        assert_eq!(token_estimate(""), 0);
        assert_eq!(token_estimate("abc"), 1);
        assert_eq!(token_estimate("abcd"), 1);
        assert_eq!(token_estimate("abcde"), 2);
    }
}
