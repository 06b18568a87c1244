//! Execution-path validation: parse Xdebug computerized trace files from a
//! PoC run, diff the observed file touches against the predicted navigation
//! chain, and render the refinement feedback.
//!
//! Only the tab-separated computerized trace format is handled. Entry
//! records carry ten or more columns (depth, function number, record type
//! `0`, time, memory, function name, user-defined flag, include file,
//! file path, line); exit records carry five with record type `1` and only
//! close nesting. Running the PoC against a deployed application is an
//! external step; this module starts from the trace file it leaves behind.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::{NavigationContext, VulnerabilityContext};
use crate::prompt::ValidationFeedback;

/// Usability sentence put in front of trace feedback.
pub const POC_FAILED_LINE: &str = "The current PoC failed.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CallKind {
    /// Function defined by the application.
    User,
    /// Interpreter-provided function.
    Builtin,
    /// include/require; the event path is the included file.
    Include,
}

/// One function entry observed during the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub depth: u32,
    pub function: String,
    pub kind: CallKind,
    /// File executing the call; for [`CallKind::Include`] the file being
    /// pulled in, since that is the navigation step the event proves.
    pub path: String,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub events: Vec<TraceEvent>,
    pub source: PathBuf,
    /// Lines that did not parse, with their 1-based line numbers. Never
    /// fatal: a truncated trace still witnesses the files it reached.
    pub warnings: Vec<String>,
}

/// Sink coordinates the diff checks reachability against.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SinkSite {
    pub path: String,
    pub start_line: u32,
    pub end_line: u32,
}

impl SinkSite {
    pub fn of(vuln: &VulnerabilityContext) -> SinkSite {
        SinkSite {
            path: vuln.sink_path.clone(),
            start_line: vuln.sink_line,
            end_line: vuln.sink_end_line,
        }
    }
}

/// Navigation chain vs. observed execution.
///
/// `untriggered` is always a suffix of the chain: navigation is ordered, so
/// the first file the flow never reached invalidates everything after it,
/// even if a later file shows up in the trace for an unrelated reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NavDiff {
    pub triggered: Vec<String>,
    pub untriggered: Vec<String>,
    pub sink_reached: bool,
}

impl NavDiff {
    /// The PoC navigated the whole chain and touched the sink lines.
    pub fn fully_reached(&self) -> bool {
        self.untriggered.is_empty() && self.sink_reached
    }
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("{path}: missing Version header; not a computerized trace file")]
    MissingVersion { path: String },
    #[error("cannot read trace {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("feedback requested for a PoC that reached the whole chain and the sink")]
    FullyReached,
}

const INCLUDE_FUNCTIONS: &[&str] = &["include", "include_once", "require", "require_once"];

pub fn parse_trace(path: &Path) -> Result<ExecutionTrace, TraceError> {
    let text = std::fs::read_to_string(path).map_err(|source| TraceError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_trace_text(&text, path)
}

/// Parses trace text. The `Version:` header is mandatory; `File format:`
/// and the `TRACE START`/`TRACE END` banners are recognized and skipped.
/// Malformed data lines become warnings, as does a depth that jumps past
/// one-deeper-than-open, which a well-nested trace never does.
pub fn parse_trace_text(text: &str, source: &Path) -> Result<ExecutionTrace, TraceError> {
    if !text.lines().any(|l| l.starts_with("Version:")) {
        return Err(TraceError::MissingVersion {
            path: source.display().to_string(),
        });
    }
    let mut events = Vec::new();
    let mut warnings = Vec::new();
    let mut open_depth: u32 = 0;
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.is_empty()
            || line.starts_with("Version:")
            || line.starts_with("File format:")
            || line.starts_with("TRACE ")
        {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        // Trailer line: empty depth columns, totals only.
        if cols.first().is_some_and(|c| c.trim().is_empty()) {
            continue;
        }
        let depth = match cols[0].trim().parse::<u32>() {
            Ok(d) => d,
            Err(_) => {
                warnings.push(format!("line {lineno}: unparseable depth {:?}", cols[0]));
                continue;
            }
        };
        match cols.get(2).copied() {
            Some("1") => {
                // Exit record: closes the call at `depth`.
                open_depth = depth.saturating_sub(1);
            }
            Some("0") if cols.len() >= 10 => {
                if depth > open_depth + 1 {
                    warnings.push(format!(
                        "line {lineno}: depth {depth} after open depth {open_depth} breaks nesting"
                    ));
                }
                open_depth = depth;
                let function = cols[5].to_string();
                let include_file = cols[7].trim();
                let is_include = INCLUDE_FUNCTIONS
                    .iter()
                    .any(|f| function == *f || function.starts_with(&format!("{f}(")));
                let kind = if is_include {
                    CallKind::Include
                } else if cols[6].trim() == "1" {
                    CallKind::User
                } else {
                    CallKind::Builtin
                };
                let path = if kind == CallKind::Include && !include_file.is_empty() {
                    include_file.to_string()
                } else {
                    cols[8].to_string()
                };
                let line_no = match cols[9].trim().parse::<u32>() {
                    Ok(n) => n,
                    Err(_) => {
                        warnings.push(format!("line {lineno}: unparseable line number {:?}", cols[9]));
                        continue;
                    }
                };
                events.push(TraceEvent {
                    depth,
                    function,
                    kind,
                    path,
                    line: line_no,
                });
            }
            _ => warnings.push(format!("line {lineno}: unrecognized record {line:?}")),
        }
    }
    Ok(ExecutionTrace {
        events,
        source: source.to_path_buf(),
        warnings,
    })
}

/// Re-emits a trace in the same format. `parse_trace_text` on the result
/// reproduces the events; exit records are synthesized to close nesting.
pub fn render_trace(trace: &ExecutionTrace) -> String {
    let mut out = String::from("Version: 3.1.0\nFile format: 4\nTRACE START\n");
    let mut open: Vec<u32> = Vec::new();
    let mut fn_no = 0usize;
    for event in &trace.events {
        while open.last().is_some_and(|d| *d >= event.depth) {
            let d = open.pop().unwrap();
            out.push_str(&format!("{d}\t{fn_no}\t1\t0.0\t0\n"));
        }
        let (user_flag, include_file) = match event.kind {
            CallKind::User => ("1", ""),
            CallKind::Builtin => ("0", ""),
            CallKind::Include => ("0", event.path.as_str()),
        };
        // Include events round-trip through the include-file column; the
        // caller file is not retained, so it is left blank.
        let file_col = if event.kind == CallKind::Include { "" } else { &event.path };
        out.push_str(&format!(
            "{}\t{}\t0\t0.0\t0\t{}\t{}\t{}\t{}\t{}\n",
            event.depth, fn_no, event.function, user_flag, include_file, file_col, event.line
        ));
        open.push(event.depth);
        fn_no += 1;
    }
    while let Some(d) = open.pop() {
        out.push_str(&format!("{d}\t{fn_no}\t1\t0.0\t0\n"));
    }
    out.push_str("TRACE END\n");
    out
}

/// Path equality up to an application-root prefix: the trace records
/// absolute interpreter paths, the chain records app-relative ones.
/// Case-sensitive.
fn touches(event_path: &str, node: &str) -> bool {
    event_path == node
        || event_path
            .strip_suffix(node)
            .is_some_and(|rest| rest.ends_with('/'))
}

/// Diffs the observed execution against the predicted chain. A node is
/// triggered when any event touches it, but the first miss cuts the chain:
/// everything from there on counts untriggered regardless of later events.
/// The sink is reached when an event covers its file and line span.
pub fn diff_navigation(trace: &ExecutionTrace, nav: &NavigationContext, sink: &SinkSite) -> NavDiff {
    let first_miss = nav
        .chain
        .iter()
        .position(|node| !trace.events.iter().any(|e| touches(&e.path, node)))
        .unwrap_or(nav.chain.len());
    let sink_reached = trace.events.iter().any(|e| {
        touches(&e.path, &sink.path) && e.line >= sink.start_line && e.line <= sink.end_line
    });
    NavDiff {
        triggered: nav.chain[..first_miss].to_vec(),
        untriggered: nav.chain[first_miss..].to_vec(),
        sink_reached,
    }
}

fn unreached_node(diff: &NavDiff, sink: &SinkSite) -> Result<String, TraceError> {
    match diff.untriggered.first() {
        Some(node) => Ok(node.clone()),
        None if !diff.sink_reached => {
            Ok(format!("the sink at {}:{}", sink.path, sink.start_line))
        }
        None => Err(TraceError::FullyReached),
    }
}

fn template_sentence(node: &str) -> String {
    format!(
        "The current PoC fails to fully execute the file navigation chain, and application \
         execution flow failed to reach {node}"
    )
}

/// Chain nodes beyond the first miss, reported separately so the template
/// sentence stays fixed.
fn remaining_diagnostics(diff: &NavDiff) -> Option<String> {
    if diff.untriggered.len() > 1 {
        Some(format!(
            "Also untriggered: {}",
            diff.untriggered[1..].join(", ")
        ))
    } else {
        None
    }
}

/// The refinement message: the usability sentence, then the navigation
/// sentence naming the first unreached chain node (or the sink when the
/// chain completed but its lines never ran), then a diagnostics line when
/// further nodes remain unreached. Asking for feedback on a fully reached
/// diff is a caller bug and errors.
pub fn feedback_message(diff: &NavDiff, sink: &SinkSite) -> Result<String, TraceError> {
    let node = unreached_node(diff, sink)?;
    let mut message = format!("{POC_FAILED_LINE}\n{}", template_sentence(&node));
    if let Some(extra) = remaining_diagnostics(diff) {
        message.push('\n');
        message.push_str(&extra);
    }
    Ok(message)
}

/// The same message shaped for a refinement prompt turn.
pub fn prompt_feedback(diff: &NavDiff, sink: &SinkSite) -> Result<ValidationFeedback, TraceError> {
    let node = unreached_node(diff, sink)?;
    let mut observations = vec![template_sentence(&node)];
    observations.extend(remaining_diagnostics(diff));
    Ok(ValidationFeedback {
        summary: POC_FAILED_LINE.to_string(),
        observations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> ExecutionTrace {
        parse_trace_text(text, Path::new("test.xt")).unwrap()
    }

    fn nav(chain: &[&str]) -> NavigationContext {
        NavigationContext {
            chain: chain.iter().map(|s| s.to_string()).collect(),
            entry_url: "http://app.example/".into(),
            path_constraints: vec![],
            navigation_code: vec![],
            path_constraint_code: vec![],
        }
    }

    fn sink() -> SinkSite {
        SinkSite {
            path: "search_results.php".into(),
            start_line: 9,
            end_line: 9,
        }
    }

    const THREE_CALLS: &str = "Version: 3.1.0\nFile format: 4\nTRACE START\n\
        1\t0\t0\t0.01\t100\t{main}\t1\t\t/var/www/app/index.php\t0\n\
        2\t1\t0\t0.02\t110\thelper\t1\t\t/var/www/app/index.php\t3\n\
        2\t1\t1\t0.03\t110\n\
        2\t2\t0\t0.04\t120\tstrlen\t0\t\t/var/www/app/index.php\t5\n\
        2\t2\t1\t0.05\t120\n\
        1\t0\t1\t0.06\t100\n\
        \t\t\t0.07\t90\n\
        TRACE END\n";

    #[test]
    fn missing_version_header_is_a_format_error() {
        let err = parse_trace_text("TRACE START\n1\t0\t0\n", Path::new("bad.xt")).unwrap_err();
        assert!(matches!(err, TraceError::MissingVersion { .. }));
    }

    #[test]
    fn empty_body_parses_to_zero_events() {
        let trace = parse("Version: 3.1.0\nFile format: 4\nTRACE START\nTRACE END\n");
        assert!(trace.events.is_empty());
        assert!(trace.warnings.is_empty());
    }

    #[test]
    fn three_call_trace_has_depths_one_two_two() {
        let trace = parse(THREE_CALLS);
        assert!(trace.warnings.is_empty(), "{:?}", trace.warnings);
        let depths: Vec<u32> = trace.events.iter().map(|e| e.depth).collect();
        assert_eq!(depths, vec![1, 2, 2]);
        assert_eq!(trace.events[0].function, "{main}");
        assert_eq!(trace.events[1].kind, CallKind::User);
        assert_eq!(trace.events[2].kind, CallKind::Builtin);
        assert_eq!(trace.events[2].line, 5);
    }

    #[test]
    fn include_event_carries_the_included_path() {
        let text = "Version: 3.1.0\nFile format: 4\nTRACE START\n\
            1\t0\t0\t0.01\t100\t{main}\t1\t\t/var/www/app/search.php\t0\n\
            2\t1\t0\t0.02\t110\tinclude\t0\t/var/www/app/search_results.php\t/var/www/app/search.php\t4\n\
            TRACE END\n";
        let trace = parse(text);
        assert_eq!(trace.events[1].kind, CallKind::Include);
        assert_eq!(trace.events[1].path, "/var/www/app/search_results.php");
        assert_eq!(trace.events[1].line, 4);
    }

    #[test]
    fn malformed_lines_warn_without_aborting() {
        let text = "Version: 3.1.0\nTRACE START\n\
            not-a-depth\tx\ty\n\
            1\t0\t0\t0.01\t100\t{main}\t1\t\t/var/www/a.php\t0\n\
            1\t0\t7\t0.01\n\
            TRACE END\n";
        let trace = parse(text);
        assert_eq!(trace.events.len(), 1);
        assert_eq!(trace.warnings.len(), 2);
        assert!(trace.warnings[0].contains("line 3"));
    }

    #[test]
    fn depth_jump_past_nesting_warns() {
        let text = "Version: 3.1.0\nTRACE START\n\
            1\t0\t0\t0.01\t100\t{main}\t1\t\t/var/www/a.php\t0\n\
            3\t1\t0\t0.02\t110\tdeep\t1\t\t/var/www/a.php\t2\n\
            TRACE END\n";
        let trace = parse(text);
        assert_eq!(trace.events.len(), 2);
        assert_eq!(trace.warnings.len(), 1);
        assert!(trace.warnings[0].contains("breaks nesting"));
    }

    #[test]
    fn render_round_trips_events() {
        let trace = parse(THREE_CALLS);
        let rendered = render_trace(&trace);
        let again = parse_trace_text(&rendered, Path::new("rendered.xt")).unwrap();
        assert_eq!(again.events, trace.events);
        assert!(again.warnings.is_empty(), "{:?}", again.warnings);
    }

    #[test]
    fn full_chain_and_sink_line_fully_reached() {
        let text = "Version: 3.1.0\nTRACE START\n\
            1\t0\t0\t0.01\t100\t{main}\t1\t\t/var/www/app/search.php\t0\n\
            2\t1\t0\t0.02\t110\tinclude\t0\t/var/www/app/search_results.php\t/var/www/app/search.php\t4\n\
            3\t2\t0\t0.03\t120\tsanitize_search\t1\t\t/var/www/app/search_results.php\t6\n\
            3\t3\t0\t0.04\t130\tsprintf\t0\t\t/var/www/app/search_results.php\t9\n\
            TRACE END\n";
        let diff = diff_navigation(
            &parse(text),
            &nav(&["search.php", "search_results.php"]),
            &sink(),
        );
        assert!(diff.untriggered.is_empty());
        assert!(diff.sink_reached);
        assert!(diff.fully_reached());
        assert!(matches!(
            feedback_message(&diff, &sink()),
            Err(TraceError::FullyReached)
        ));
    }

    #[test]
    fn chain_reached_but_sink_lines_never_ran() {
        // Flow enters search_results.php yet nothing executes on line 9.
        let text = "Version: 3.1.0\nTRACE START\n\
            1\t0\t0\t0.01\t100\t{main}\t1\t\t/var/www/app/search.php\t0\n\
            2\t1\t0\t0.02\t110\tinclude\t0\t/var/www/app/search_results.php\t/var/www/app/search.php\t4\n\
            3\t2\t0\t0.03\t120\tsanitize_search\t1\t\t/var/www/app/search_results.php\t6\n\
            TRACE END\n";
        let diff = diff_navigation(
            &parse(text),
            &nav(&["search.php", "search_results.php"]),
            &sink(),
        );
        assert!(diff.untriggered.is_empty());
        assert!(!diff.sink_reached);
        let message = feedback_message(&diff, &sink()).unwrap();
        assert_eq!(
            message,
            "The current PoC failed.\nThe current PoC fails to fully execute the file \
             navigation chain, and application execution flow failed to reach the sink at \
             search_results.php:9"
        );
    }

    #[test]
    fn empty_trace_leaves_all_nodes_untriggered() {
        let trace = parse("Version: 3.1.0\nTRACE START\nTRACE END\n");
        let diff = diff_navigation(&trace, &nav(&["search.php", "search_results.php"]), &sink());
        assert!(diff.triggered.is_empty());
        assert_eq!(
            diff.untriggered,
            vec!["search.php".to_string(), "search_results.php".to_string()]
        );
        assert!(!diff.sink_reached);
    }

    #[test]
    fn untriggered_is_a_suffix_even_when_a_later_file_appears() {
        // b.php shows up in the trace, but a.php never ran: the chain is
        // broken at a.php, so b.php cannot have been reached through it.
        let text = "Version: 3.1.0\nTRACE START\n\
            1\t0\t0\t0.01\t100\t{main}\t1\t\t/var/www/app/entry.php\t0\n\
            2\t1\t0\t0.02\t110\thelper\t1\t\t/var/www/app/b.php\t3\n\
            TRACE END\n";
        let diff = diff_navigation(
            &parse(text),
            &nav(&["entry.php", "a.php", "b.php"]),
            &sink(),
        );
        assert_eq!(diff.triggered, vec!["entry.php".to_string()]);
        assert_eq!(diff.untriggered, vec!["a.php".to_string(), "b.php".to_string()]);

        // First miss in the template sentence, the rest as diagnostics.
        let message = feedback_message(&diff, &sink()).unwrap();
        let lines: Vec<&str> = message.lines().collect();
        assert_eq!(lines[0], POC_FAILED_LINE);
        assert!(lines[1].ends_with("failed to reach a.php"));
        assert_eq!(lines[2], "Also untriggered: b.php");
    }

    #[test]
    fn diff_ignores_event_order_within_a_file() {
        let forward = "Version: 3.1.0\nTRACE START\n\
            1\t0\t0\t0.01\t100\t{main}\t1\t\t/var/www/app/search.php\t0\n\
            2\t1\t0\t0.02\t110\thelper\t1\t\t/var/www/app/search_results.php\t2\n\
            TRACE END\n";
        let reversed = "Version: 3.1.0\nTRACE START\n\
            1\t0\t0\t0.01\t100\t{main}\t1\t\t/var/www/app/search_results.php\t2\n\
            2\t1\t0\t0.02\t110\thelper\t1\t\t/var/www/app/search.php\t0\n\
            TRACE END\n";
        let chain = nav(&["search.php", "search_results.php"]);
        let a = diff_navigation(&parse(forward), &chain, &sink());
        let b = diff_navigation(&parse(reversed), &chain, &sink());
        assert_eq!(a.triggered, b.triggered);
        assert_eq!(a.untriggered, b.untriggered);
    }

    #[test]
    fn path_matching_is_suffix_anchored_and_case_sensitive() {
        assert!(touches("/var/www/app/search.php", "search.php"));
        assert!(touches("search.php", "search.php"));
        // "mysearch.php" must not satisfy "search.php".
        assert!(!touches("/var/www/app/mysearch.php", "search.php"));
        assert!(!touches("/var/www/app/Search.php", "search.php"));
        // Nested relative nodes match only on whole components.
        assert!(touches("/var/www/app/admin/edit.php", "admin/edit.php"));
        assert!(!touches("/var/www/app/myadmin/edit.php", "admin/edit.php"));
    }
}
