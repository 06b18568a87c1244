//! Attack-payload validation: synthesize an instrumented PHP harness (via a
//! second model or a deterministic template), execute it in a sandbox,
//! parse the three constraint probes, judge the payload, and drive the
//! refinement loop with a hard cap of three iterations.
//!
//! Probe markers are byte-exact contracts shared with harness code:
//! [`CONTROL_MARKER`] on its own line means a guard blocked the sink;
//! [`DATA_PROBE_PREFIX`] precedes the payload value after transformations;
//! [`SYNTAX_PROBE_PREFIX`] precedes the text the sink actually produces.
//!
//! The verdict is mechanical. Valid requires the sink to be reached (no
//! control marker) and the syntax probe to show the payload in an
//! executable form for the sink's syntax descriptor: raw `<script` at
//! markup text position for the HTML descriptors, a quote-breaking or
//! metacharacter-bearing payload for the SQL and shell descriptors, an
//! executable extension for the upload descriptor. A probe that shows the
//! payload neutered is Invalid; missing probes are Inconclusive.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::syntax::html_position;
use crate::context::{ContextBundle, Granularity, TaintStep, VulnerabilityContext};
use crate::llm::{LlmClient, LlmError};
use crate::php::eval::{parse_and_run, EvalOutcome};
use crate::prompt::{ExpectedOutput, IclBank, Prompt, ValidationFeedback};
use crate::subtask::decompose;

/// Emitted by the harness when a guard keeps the payload from the sink.
pub const CONTROL_MARKER: &str = "control flow constraints are not satisfied.";
/// Line prefix for the payload value after data-flow transformations.
pub const DATA_PROBE_PREFIX: &str = "DATA-PROBE: ";
/// Line prefix for the text produced at the sink.
pub const SYNTAX_PROBE_PREFIX: &str = "SYNTAX-PROBE: ";
/// Usability line put in front of refinement feedback.
pub const USABILITY_LINE: &str = "the current payload is not available";
/// Wall-clock cap for one harness execution.
pub const HARNESS_TIMEOUT_MS: u64 = 10_000;
/// Refinement turns per payload, counting the first validation.
pub const MAX_ITERATIONS: usize = 3;

/// Marker strings a harness must emit. Fixed in practice; carried as data
/// so lint and parsing share one definition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbePlan {
    pub control: String,
    pub data_prefix: String,
    pub syntax_prefix: String,
}

impl Default for ProbePlan {
    fn default() -> ProbePlan {
        ProbePlan {
            control: CONTROL_MARKER.into(),
            data_prefix: DATA_PROBE_PREFIX.into(),
            syntax_prefix: SYNTAX_PROBE_PREFIX.into(),
        }
    }
}

/// A lint-checked harness ready to execute.
#[derive(Debug, Clone, PartialEq)]
pub struct HarnessSpec {
    pub source: String,
    pub payload: String,
    pub probes: ProbePlan,
    pub workspace: PathBuf,
}

/// How harnesses get executed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InterpreterCommand {
    /// The crate's own PHP-subset evaluator: no process, no filesystem.
    Builtin,
    /// External interpreter argv; the harness file path is appended. Runs
    /// with a stripped environment inside the workspace.
    External(Vec<String>),
}

/// Parsed result of one harness run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeOutputs {
    /// The control marker appeared: a guard blocked the sink.
    pub control_blocked: bool,
    pub data: Option<String>,
    pub syntax: Option<String>,
    pub stdout: String,
    pub stderr: String,
    pub exit_ok: bool,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Valid,
    Invalid,
    Inconclusive,
}

/// Feedback for one failed iteration, in the shape refinement prompts embed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayloadFeedback {
    pub verdict: Verdict,
    pub usability: String,
    pub probe_block: Vec<String>,
    /// 1-based validation turn this feedback came from.
    pub iteration: usize,
}

impl PayloadFeedback {
    pub fn to_prompt_feedback(&self) -> ValidationFeedback {
        ValidationFeedback {
            summary: self.usability.clone(),
            observations: self.probe_block.clone(),
        }
    }
}

/// Final state of a refinement loop.
#[derive(Debug, Clone, PartialEq)]
pub struct RefineOutcome {
    pub payload: String,
    pub verdict: Verdict,
    /// Validation turns used, 1..=3.
    pub iterations: usize,
    pub feedback: Vec<PayloadFeedback>,
}

#[derive(Debug, Error)]
pub enum PayloadError {
    #[error("harness synthesis failed twice: {reasons}")]
    HarnessSynthesis { reasons: String },
    #[error("payload validation needs function-granularity context, got {got}")]
    WrongGranularity { got: String },
    #[error("workspace {path}: {source}")]
    Workspace {
        path: String,
        source: std::io::Error,
    },
    #[error("interpreter {command}: {source}")]
    Interpreter {
        command: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Llm(#[from] LlmError),
}

/// Callables and keywords a harness may not contain: anything that writes
/// the filesystem, talks to the network, spawns processes, or pulls in more
/// code. The harness simulates sinks with echo, so even the "vulnerable"
/// operation itself must appear only as output.
const BANNED_CALLS: &[&str] = &[
    "file_put_contents",
    "fopen",
    "fwrite",
    "fputs",
    "unlink",
    "rename",
    "mkdir",
    "rmdir",
    "copy",
    "chmod",
    "chown",
    "touch",
    "move_uploaded_file",
    "file_get_contents",
    "file",
    "readfile",
    "opendir",
    "scandir",
    "symlink",
    "link",
    "curl_init",
    "curl_exec",
    "fsockopen",
    "pfsockopen",
    "stream_socket_client",
    "socket_create",
    "socket_connect",
    "mail",
    "exec",
    "system",
    "shell_exec",
    "passthru",
    "proc_open",
    "popen",
    "pcntl_exec",
    "eval",
    "assert",
    "putenv",
    "dl",
];

/// Checks the probe and sandbox rules. Returns every violation so a
/// re-request can name them all.
pub fn lint_harness(source: &str, probes: &ProbePlan) -> Result<(), Vec<String>> {
    let mut violations = Vec::new();
    if !source.contains(&probes.control) {
        violations.push(format!("missing control probe: {:?}", probes.control));
    }
    if !source.contains(&probes.data_prefix) {
        violations.push(format!("missing data probe prefix: {:?}", probes.data_prefix));
    }
    if !source.contains(&probes.syntax_prefix) {
        violations.push(format!(
            "missing syntax probe prefix: {:?}",
            probes.syntax_prefix
        ));
    }
    for name in BANNED_CALLS {
        let pattern = Regex::new(&format!(r"\b{}\s*\(", regex::escape(name))).unwrap();
        if pattern.is_match(source) {
            violations.push(format!("banned call: {name}"));
        }
    }
    let include = Regex::new(r"\b(include|require)(_once)?\b").unwrap();
    if include.is_match(source) {
        violations.push("banned construct: include/require".into());
    }
    if source.contains('`') {
        violations.push("banned construct: backtick command".into());
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

fn php_single_quote(value: &str) -> String {
    format!("'{}'", value.replace('\\', "\\\\").replace('\'', "\\'"))
}

fn superglobal_re() -> Regex {
    Regex::new(r"\$_(GET|POST|REQUEST|COOKIE|FILES)\s*\[[^\]]*\](\s*\[[^\]]*\])?").unwrap()
}

const RESERVED_LABELS: &[&str] = &[
    "file",
    "statement",
    "guard",
    "guard-support",
    "validation",
    "include",
];

fn sink_step(vuln: &VulnerabilityContext) -> Option<&TaintStep> {
    vuln.chain
        .iter()
        .rev()
        .find(|s| s.path == vuln.sink_path && s.line == vuln.sink_line)
}

/// The expression whose value the sink emits: the echo body for echo-style
/// sinks, the first argument for call-style sinks, otherwise the
/// vulnerable variable itself.
fn sink_expression(vuln: &VulnerabilityContext) -> String {
    let code = sink_step(vuln).map(|s| s.code.trim()).unwrap_or("");
    let echo = Regex::new(r"^(?:echo|print)\s+(.+?);?\s*$").unwrap();
    if let Some(cap) = echo.captures(code) {
        return cap[1].to_string();
    }
    if let (Some(open), Some(close)) = (code.find('('), code.rfind(')')) {
        if open < close {
            let args = &code[open + 1..close];
            // First top-level argument; nested parens stay intact.
            let mut depth = 0usize;
            for (i, c) in args.char_indices() {
                match c {
                    '(' => depth += 1,
                    ')' => depth = depth.saturating_sub(1),
                    ',' if depth == 0 => return args[..i].trim().to_string(),
                    _ => {}
                }
            }
            let arg = args.trim();
            if !arg.is_empty() {
                return arg.to_string();
            }
        }
    }
    format!("${}", vuln.vulnerable_variable)
}

/// Deterministic harness: the function-level slices verbatim, the chain's
/// assignments with request reads replaced by the payload literal, the
/// payload-relevant guards, and the three probes.
pub fn template_harness(vuln: &VulnerabilityContext, payload: &str) -> String {
    let sg = superglobal_re();
    let mut out = String::from("<?php\n");

    // Function definitions referenced by the chain.
    let mut spans: Vec<(&str, u32, u32)> = Vec::new();
    for slice in &vuln.code_slices {
        if RESERVED_LABELS.contains(&slice.label.as_str()) {
            continue;
        }
        out.push_str(slice.code.trim_end());
        out.push('\n');
        spans.push((&slice.path, slice.start_line, slice.end_line));
    }

    out.push_str(&format!("$__payload = {};\n", php_single_quote(payload)));

    // Chain assignments outside function bodies, oldest first.
    let mut written: BTreeSet<String> = BTreeSet::new();
    for step in &vuln.chain {
        if step.path == vuln.sink_path && step.line == vuln.sink_line {
            continue;
        }
        let inside_function = spans
            .iter()
            .any(|(p, a, b)| *p == step.path && step.line >= *a && step.line <= *b);
        if inside_function {
            continue;
        }
        let code = step.code.trim();
        if !code.starts_with('$') || !code.contains('=') {
            continue;
        }
        out.push_str(&sg.replace_all(code, "$$__payload"));
        out.push('\n');
        written.insert(step.var.clone());
    }
    if !written.contains(&vuln.vulnerable_variable) {
        out.push_str(&format!("${} = $__payload;\n", vuln.vulnerable_variable));
    }

    out.push_str(&format!(
        "echo \"{}${}\\n\";\n",
        DATA_PROBE_PREFIX, vuln.vulnerable_variable
    ));

    // Guards whose predicate reads a variable the harness defines; the
    // others belong to navigation and would always block here.
    let mut harness_vars: BTreeSet<String> = written;
    harness_vars.insert(vuln.vulnerable_variable.clone());
    for c in &vuln.control_constraints {
        let pred = sg.replace_all(&c.pred_text, "$$__payload").to_string();
        let mentions = harness_vars.iter().any(|v| pred.contains(&format!("${v}")))
            || pred.contains("$__payload");
        if !mentions {
            continue;
        }
        let cond = if c.want {
            format!("!({pred})")
        } else {
            format!("({pred})")
        };
        out.push_str(&format!(
            "if ({cond}) {{ echo \"{CONTROL_MARKER}\\n\"; exit; }}\n"
        ));
    }

    let raw_sink_expr = sink_expression(vuln);
    let sink_expr = sg.replace_all(&raw_sink_expr, "$$__payload");
    out.push_str(&format!(
        "echo \"{SYNTAX_PROBE_PREFIX}\" . ({sink_expr}) . \"\\n\";\n"
    ));
    out
}

/// Pulls PHP source out of a model reply: fenced block if present, else
/// from the first `<?php`, else the whole reply with a `<?php` prepended.
fn extract_php(reply: &str) -> String {
    let fenced = Regex::new(r"(?s)```(?:php)?\s*\n(.*?)```").unwrap();
    let body = match fenced.captures(reply) {
        Some(cap) => cap[1].to_string(),
        None => reply.to_string(),
    };
    match body.find("<?php") {
        Some(at) => body[at..].trim_end().to_string(),
        None => format!("<?php\n{}", body.trim()),
    }
}

fn harness_request_prompt(vuln: &VulnerabilityContext, payload: &str) -> Prompt {
    let mut user = String::from(
        "Construct a self-contained PHP harness that checks whether the attack payload below \
         survives the application's constraints and reaches the sink.\n\n",
    );
    user.push_str(&format!(
        "Sink: {}:{} ({})\nVulnerable variable: ${}\nSource: {}\nPayload: {}\n",
        vuln.sink_path,
        vuln.sink_line,
        vuln.sink_label,
        vuln.vulnerable_variable,
        vuln.source,
        payload
    ));
    user.push_str("\nData constraints:\n");
    for d in &vuln.data_constraints {
        user.push_str(&format!("- {d}\n"));
    }
    user.push_str("\nControl constraints:\n");
    for c in &vuln.control_constraints {
        user.push_str(&format!(
            "- {}:{}: `{}` {}\n",
            c.path,
            c.line,
            c.pred_text,
            if c.want { "must hold" } else { "must not hold" }
        ));
    }
    user.push_str("\nSyntax context:\n");
    for s in &vuln.syntax_constraints {
        user.push_str(&format!("- {s}\n"));
    }
    user.push_str("\nFunction-level code:\n");
    for s in &vuln.code_slices {
        user.push_str(&format!("--- {}:{}-{} ({}) ---\n", s.path, s.start_line, s.end_line, s.label));
        user.push_str(s.code.trim_end());
        user.push('\n');
    }
    user.push_str(&format!(
        "\nThe harness must:\n\
         1. Assign the payload to the source variable directly instead of reading request input.\n\
         2. Reproduce the transformations and the payload-relevant guards shown above.\n\
         3. Echo the line \"{CONTROL_MARKER}\" and stop if a guard keeps the payload from the sink.\n\
         4. Echo the transformed value on one line prefixed with \"{DATA_PROBE_PREFIX}\".\n\
         5. Echo the exact text the sink produces on one line prefixed with \"{SYNTAX_PROBE_PREFIX}\".\n\
         It must not read or write files, open connections, spawn processes, or include other \
         files. Reply with PHP code only.\n"
    ));
    let system = "You are a PHP engineer writing minimal, deterministic test harnesses for \
                  security validation."
        .to_string();
    let estimated_tokens =
        crate::context::token_estimate(&system) + crate::context::token_estimate(&user);
    Prompt {
        system,
        user,
        expected_output: ExpectedOutput::FreePoC,
        estimated_tokens,
    }
}

/// Obtains a lint-clean harness for the payload. With a model client the
/// reply is lint-checked and re-requested once on failure; with `None` the
/// deterministic template is used. The bundle must be function-granularity.
pub fn request_harness(
    bundle: &ContextBundle,
    payload: &str,
    llm2: Option<&LlmClient>,
    workspace: &Path,
) -> Result<HarnessSpec, PayloadError> {
    if bundle.granularity != Granularity::Function {
        return Err(PayloadError::WrongGranularity {
            got: bundle.granularity.label().to_string(),
        });
    }
    let probes = ProbePlan::default();
    let vuln = &bundle.vulnerability;
    let source = match llm2 {
        None => {
            let source = template_harness(vuln, payload);
            debug_assert!(lint_harness(&source, &probes).is_ok());
            source
        }
        Some(client) => {
            let prompt = harness_request_prompt(vuln, payload);
            let first = extract_php(&client.complete(&prompt)?.text);
            match lint_harness(&first, &probes) {
                Ok(()) => first,
                Err(violations) => {
                    let mut retry = prompt.clone();
                    retry.user.push_str(&format!(
                        "\nThe previous harness failed these checks: {}. Produce a corrected \
                         harness.\n",
                        violations.join("; ")
                    ));
                    retry.estimated_tokens = crate::context::token_estimate(&retry.system)
                        + crate::context::token_estimate(&retry.user);
                    let second = extract_php(&client.complete(&retry)?.text);
                    lint_harness(&second, &probes).map_err(|v| {
                        PayloadError::HarnessSynthesis {
                            reasons: v.join("; "),
                        }
                    })?;
                    second
                }
            }
        }
    };
    Ok(HarnessSpec {
        source,
        payload: payload.to_string(),
        probes,
        workspace: workspace.to_path_buf(),
    })
}

fn parse_probes(stdout: &str, probes: &ProbePlan) -> (bool, Option<String>, Option<String>) {
    let mut control = false;
    let mut data = None;
    let mut syntax = None;
    for line in stdout.lines() {
        if line == probes.control {
            control = true;
        } else if let Some(rest) = line.strip_prefix(&probes.data_prefix) {
            data.get_or_insert_with(|| rest.to_string());
        } else if let Some(rest) = line.strip_prefix(&probes.syntax_prefix) {
            syntax.get_or_insert_with(|| rest.to_string());
        }
    }
    (control, data, syntax)
}

/// Executes the harness and parses its probes. Builtin runs are in-process
/// and touch nothing; external runs get a fresh file inside the workspace,
/// a stripped environment, and a wall-clock kill.
pub fn run_harness(
    spec: &HarnessSpec,
    interpreter: &InterpreterCommand,
) -> Result<ProbeOutputs, PayloadError> {
    run_harness_timed(spec, interpreter, HARNESS_TIMEOUT_MS)
}

pub fn run_harness_timed(
    spec: &HarnessSpec,
    interpreter: &InterpreterCommand,
    timeout_ms: u64,
) -> Result<ProbeOutputs, PayloadError> {
    let started = Instant::now();
    let (stdout, stderr, exit_ok) = match interpreter {
        InterpreterCommand::Builtin => match parse_and_run(&spec.source, Default::default()) {
            Ok(EvalOutcome { stdout, .. }) => (stdout, String::new(), true),
            Err(e) => (String::new(), e.to_string(), false),
        },
        InterpreterCommand::External(argv) => run_external(spec, argv, timeout_ms)?,
    };
    let (control_blocked, data, syntax) = parse_probes(&stdout, &spec.probes);
    Ok(ProbeOutputs {
        control_blocked,
        data,
        syntax,
        stdout,
        stderr,
        exit_ok,
        wall_ms: started.elapsed().as_millis() as u64,
    })
}

fn run_external(
    spec: &HarnessSpec,
    argv: &[String],
    timeout_ms: u64,
) -> Result<(String, String, bool), PayloadError> {
    let command_name = argv.join(" ");
    let io_err = |source: std::io::Error| PayloadError::Interpreter {
        command: command_name.clone(),
        source,
    };
    std::fs::create_dir_all(&spec.workspace).map_err(|source| PayloadError::Workspace {
        path: spec.workspace.display().to_string(),
        source,
    })?;
    let harness_path = spec.workspace.join("harness.php");
    std::fs::write(&harness_path, &spec.source).map_err(|source| PayloadError::Workspace {
        path: harness_path.display().to_string(),
        source,
    })?;

    let (program, args) = argv.split_first().expect("external argv is nonempty");
    let mut child = std::process::Command::new(program)
        .args(args)
        .arg("harness.php")
        .current_dir(&spec.workspace)
        .env_clear()
        .env("PATH", "/usr/bin:/bin")
        .stdin(std::process::Stdio::null())
        .stdout(std::process::Stdio::piped())
        .stderr(std::process::Stdio::piped())
        .spawn()
        .map_err(io_err)?;

    let deadline = Instant::now() + Duration::from_millis(timeout_ms);
    let mut timed_out = false;
    loop {
        match child.try_wait().map_err(io_err)? {
            Some(_) => break,
            None if Instant::now() >= deadline => {
                timed_out = true;
                let _ = child.kill();
                break;
            }
            None => std::thread::sleep(Duration::from_millis(5)),
        }
    }
    let output = child.wait_with_output().map_err(io_err)?;
    Ok((
        String::from_utf8_lossy(&output.stdout).into_owned(),
        String::from_utf8_lossy(&output.stderr).into_owned(),
        output.status.success() && !timed_out,
    ))
}

/// Extensions a web server commonly maps to the PHP handler.
const EXECUTABLE_EXTENSIONS: &[&str] = &[".php", ".php4", ".php5", ".phtml", ".pht", ".phar"];

/// Whether the syntax probe shows an executable form of the payload for
/// one descriptor. Rules, one per descriptor:
/// html-*: a raw `<script` sitting at markup text position (entity-escaped
/// forms never match, and a payload still trapped inside an attribute
/// value does not count). script-element: the payload appears verbatim
/// inside the script code. sql-string-*: the payload survived and carries
/// the quote that breaks the enclosing literal. sql-numeric: the payload
/// survived and is not a bare number. shell-arg-*: the payload survived
/// and carries a metacharacter that escapes the argument. multipart-file-
/// field: the stored name maps to an executable extension.
fn syntax_matches(descriptor: &str, probe: &str, payload: &str) -> bool {
    let survived = probe.contains(payload);
    match descriptor {
        "html-body" | "html-attr-single-quoted" | "html-attr-double-quoted"
        | "html-attr-unquoted" => {
            let lower = probe.to_ascii_lowercase();
            let mut from = 0;
            while let Some(at) = lower[from..].find("<script") {
                let at = from + at;
                if html_position(&probe[..at]) == "html-body" {
                    return true;
                }
                from = at + 1;
            }
            false
        }
        "script-element" => survived,
        "sql-string-single-quoted" => survived && payload.contains('\''),
        "sql-string-double-quoted" => survived && payload.contains('"'),
        "sql-numeric" => survived && payload.trim().parse::<f64>().is_err(),
        "shell-arg-single-quoted" => survived && payload.contains('\''),
        "shell-arg-double-quoted" => {
            survived && (payload.contains('"') || payload.contains('$') || payload.contains('`'))
        }
        "shell-arg-unquoted" => {
            survived
                && payload
                    .chars()
                    .any(|c| matches!(c, ';' | '|' | '&' | '`' | '$' | '(' | '<' | '>' | '\n'))
        }
        "multipart-file-field" => {
            let lower = probe.to_ascii_lowercase();
            EXECUTABLE_EXTENSIONS.iter().any(|ext| lower.contains(ext))
        }
        _ => survived,
    }
}

/// Mechanical verdict over one run's probes.
///
/// Invalid needs demonstrated blockage: the control marker, or a syntax
/// probe whose content fails the descriptor matcher. Valid needs the sink
/// reached and the matcher satisfied. Everything else (missing probes,
/// crashed harness) is Inconclusive.
pub fn judge(vuln: &VulnerabilityContext, payload: &str, outputs: &ProbeOutputs) -> Verdict {
    if outputs.control_blocked {
        return Verdict::Invalid;
    }
    let Some(probe) = &outputs.syntax else {
        return Verdict::Inconclusive;
    };
    let matched = match vuln.syntax_constraints.first() {
        Some(descriptor) => syntax_matches(descriptor, probe, payload),
        None => probe.contains(payload),
    };
    if matched {
        Verdict::Valid
    } else {
        Verdict::Invalid
    }
}

fn feedback_for(outputs: &ProbeOutputs, verdict: Verdict, iteration: usize) -> PayloadFeedback {
    let mut probe_block = Vec::new();
    if outputs.control_blocked {
        probe_block.push(CONTROL_MARKER.to_string());
    }
    if let Some(d) = &outputs.data {
        probe_block.push(format!("{DATA_PROBE_PREFIX}{d}"));
    }
    if let Some(s) = &outputs.syntax {
        probe_block.push(format!("{SYNTAX_PROBE_PREFIX}{s}"));
    }
    if probe_block.is_empty() {
        probe_block.push("(no probe output captured)".to_string());
        if !outputs.stderr.is_empty() {
            if let Some(first) = outputs.stderr.lines().next() {
                probe_block.push(first.to_string());
            }
        }
    }
    PayloadFeedback {
        verdict,
        usability: USABILITY_LINE.to_string(),
        probe_block,
        iteration,
    }
}

fn payload_from_reply(reply: &str) -> Option<String> {
    let plan_key = "attack-payload";
    if let Some(value) = crate::subtask::first_json_value(reply, plan_key) {
        if let serde_json::Value::String(s) = value {
            if !s.trim().is_empty() {
                return Some(s);
            }
        }
        return None;
    }
    let trimmed = reply.trim();
    (!trimmed.is_empty()).then(|| trimmed.to_string())
}

/// Validate-feedback-regenerate loop, capped at [`MAX_ITERATIONS`].
///
/// Each turn synthesizes a harness for the current payload, runs it, and
/// judges the probes. Valid stops early. Otherwise the refinement prompt
/// (the payload step of the plan, with the usability line and probe block
/// as feedback) asks `llm1` for the next payload. A harness synthesis
/// failure aborts the loop as Inconclusive.
pub fn refine_loop(
    llm1: &LlmClient,
    llm2: Option<&LlmClient>,
    bundle: &ContextBundle,
    icl: &IclBank,
    initial_payload: &str,
    interpreter: &InterpreterCommand,
    workspace_root: &Path,
) -> Result<RefineOutcome, PayloadError> {
    assert!(!initial_payload.is_empty(), "initial payload must be nonempty");
    let cwe = crate::corpus::CweClass::parse(&bundle.cwe).expect("bundle carries a known class");
    let plan = decompose(cwe);
    let payload_step = plan
        .cot_steps
        .iter()
        .position(|s| s.task_ids.contains(&"attack-payload"))
        .expect("refinement needs a plan with an attack-payload step");
    let context_doc = crate::context::render_document(bundle);

    let mut payload = initial_payload.to_string();
    let mut feedback_log: Vec<PayloadFeedback> = Vec::new();
    for iteration in 1..=MAX_ITERATIONS {
        let workspace = workspace_root.join(format!("iter{iteration}"));
        let spec = match request_harness(bundle, &payload, llm2, &workspace) {
            Ok(spec) => spec,
            Err(PayloadError::HarnessSynthesis { .. }) => {
                return Ok(RefineOutcome {
                    payload,
                    verdict: Verdict::Inconclusive,
                    iterations: iteration,
                    feedback: feedback_log,
                })
            }
            Err(other) => return Err(other),
        };
        let outputs = run_harness(&spec, interpreter)?;
        let verdict = judge(&bundle.vulnerability, &payload, &outputs);
        if verdict == Verdict::Valid {
            return Ok(RefineOutcome {
                payload,
                verdict,
                iterations: iteration,
                feedback: feedback_log,
            });
        }
        let feedback = feedback_for(&outputs, verdict, iteration);
        feedback_log.push(feedback.clone());
        if iteration == MAX_ITERATIONS {
            return Ok(RefineOutcome {
                payload,
                verdict,
                iterations: iteration,
                feedback: feedback_log,
            });
        }
        let prompt = crate::prompt::cot_prompt(
            &context_doc,
            &plan,
            payload_step,
            &[],
            icl,
            Some(&feedback.to_prompt_feedback()),
        );
        let reply = llm1.complete(&prompt)?;
        if let Some(next) = payload_from_reply(&reply.text) {
            payload = next;
        }
    }
    unreachable!("loop returns on the final iteration");
}
