//! Forward taint propagation from request inputs to weakness-specific sinks.
//!
//! Seeds come from the public disclosure text: parameter names and variable
//! names mentioned in the description, plus superglobal keys visible in the
//! patch. Propagation runs to a fixpoint over include-connected file groups;
//! flows through user-defined functions use per-function summaries. CWE-352
//! has no tainted sink value, so it takes a separate route that matches
//! state-changing calls and slices their inputs backward.

use std::collections::{BTreeMap, BTreeSet};

use crate::corpus::diff::Patch;
use crate::corpus::CweClass;
use crate::php::expr::Expr;
use crate::php::{
    flatten, FunctionDef, GuardStep, ProgramModel, SinkConfig, Stmt, StmtKind, StmtRef, VarRef,
};

use super::{ContextError, ContextPart, TaintStep};

/// Names harvested from the disclosure: `$var` mentions, `name=value` forms,
/// single-token quoted words, and superglobal keys appearing in the patch.
pub fn harvest_seed_names(description: &str, patch: Option<&Patch>) -> BTreeSet<String> {
    let mut names = BTreeSet::new();
    let bytes = description.as_bytes();

    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'$' => {
                let word = take_word(description, i + 1);
                if !word.is_empty() {
                    names.insert(word.to_string());
                }
                i += 1 + word.len();
            }
            b'\'' | b'"' | b'`' => {
                let quote = bytes[i] as char;
                let rest = &description[i + 1..];
                if let Some(end) = rest.find(quote) {
                    let inner = &rest[..end];
                    if is_word(inner) {
                        names.insert(inner.to_string());
                    }
                    i += end + 2;
                } else {
                    i += 1;
                }
            }
            b'=' => {
                // `mode=search` style mentions name the parameter on the left.
                let left = take_word_back(description, i);
                if !left.is_empty() && bytes.get(i + 1) != Some(&b'=') && i >= left.len() {
                    let before = description[..i - left.len()].chars().next_back();
                    if before != Some('!') && before != Some('<') && before != Some('>') {
                        names.insert(left.to_string());
                    }
                }
                i += 1;
                while i < bytes.len() && bytes[i] == b'=' {
                    i += 1;
                }
            }
            _ => i += 1,
        }
    }

    if let Some(patch) = patch {
        let mut harvest_line = |line: &str| {
            for key in superglobal_keys(line) {
                names.insert(key);
            }
        };
        for l in patch.added_lines() {
            harvest_line(l);
        }
        for l in patch.removed_lines() {
            harvest_line(l);
        }
    }
    names
}

fn take_word(s: &str, at: usize) -> &str {
    let rest = &s[at.min(s.len())..];
    let end = rest
        .find(|c: char| !c.is_ascii_alphanumeric() && c != '_')
        .unwrap_or(rest.len());
    &rest[..end]
}

fn take_word_back(s: &str, at: usize) -> &str {
    let head = &s[..at.min(s.len())];
    let start = head
        .rfind(|c: char| !c.is_ascii_alphanumeric() && c != '_')
        .map(|i| i + 1)
        .unwrap_or(0);
    &head[start..]
}

fn is_word(s: &str) -> bool {
    !s.is_empty()
        && s.len() <= 32
        && s.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// `$_GET['key']` style occurrences in a raw code line.
fn superglobal_keys(line: &str) -> Vec<String> {
    let mut out = Vec::new();
    for sg in crate::php::REQUEST_SUPERGLOBALS {
        let pat = format!("${sg}[");
        let mut from = 0;
        while let Some(at) = line[from..].find(&pat) {
            let after = &line[from + at + pat.len()..];
            let key = after
                .trim_start_matches(['\'', '"'])
                .split(['\'', '"', ']'])
                .next()
                .unwrap_or("");
            if is_word(key) {
                out.push(key.to_string());
            }
            from += at + pat.len();
        }
    }
    out
}

/// Which request-input reads count as taint sources.
#[derive(Debug, Clone)]
pub struct SeedFilter {
    pub names: BTreeSet<String>,
    /// No names were harvested: every request read is in play.
    pub all: bool,
}

impl SeedFilter {
    pub fn from_names(names: BTreeSet<String>) -> SeedFilter {
        let all = names.is_empty();
        SeedFilter { names, all }
    }

    /// `written` is the variable the enclosing statement assigns, if any; a
    /// disclosure saying `$page` matches `$page = $_GET['page']`.
    fn matches(&self, read: &VarRef, written: Option<&str>) -> bool {
        if self.all {
            return true;
        }
        if let Some(key) = &read.index {
            if self.names.contains(key) {
                return true;
            }
        }
        written.is_some_and(|w| self.names.contains(w))
    }
}

/// A guard the exploit request must satisfy: the predicate at `path:line`
/// must evaluate to `want`.
#[derive(Debug, Clone)]
pub struct GuardObligation {
    pub path: String,
    pub line: u32,
    pub end_line: u32,
    pub pred_text: String,
    pub pred: Expr,
    pub want: bool,
}

/// The extracted attack-vector chain.
#[derive(Debug, Clone)]
pub struct ChainOutcome {
    /// Request input where the value originates, e.g. `$_GET['search']`.
    pub source_ref: String,
    /// Variable read at the sink.
    pub vulnerable_variable: String,
    pub steps: Vec<TaintStep>,
    pub sink_path: String,
    pub sink_line: u32,
    pub sink_end_line: u32,
    /// Value transformations applied along the chain, in order.
    pub transform_notes: Vec<String>,
    pub guards: Vec<GuardObligation>,
    /// CWE-434: file span of the upload validation logic (guards over the
    /// tainted filename plus their backward slice).
    pub validation_span: Option<(String, u32, u32)>,
    /// CWE-352: request parameters selecting the state-changing operation.
    pub operation_params: Vec<(String, String)>,
}

pub struct Engine<'a> {
    pub model: &'a ProgramModel,
    pub cfg: &'a SinkConfig,
    pub cwe: CweClass,
    /// Record-level override patterns for state-changing callees.
    pub semantic_sinks: Vec<String>,
}

#[derive(Debug, Clone)]
struct Node {
    steps: Vec<TaintStep>,
    prev: Option<String>,
    source_ref: Option<String>,
    notes: Vec<String>,
    guards: Vec<(String, u32)>,
    depth: usize,
}

type TaintMap = BTreeMap<String, Node>;

#[derive(Debug, Clone)]
struct SinkHit {
    path: String,
    line: u32,
    end_line: u32,
    read_key: Option<String>,
    fresh_source: Option<String>,
    vulnerable_variable: String,
    /// Tainted keys the sink reads beyond the primary one; their defining
    /// chains are folded into the outcome (`move_uploaded_file($tmp, $target)`
    /// needs how `$target` was built, not just `$tmp`).
    other_keys: Vec<String>,
    extra_steps: Vec<TaintStep>,
    guards: Vec<(String, u32)>,
    chain_len: usize,
}

#[derive(Debug, Clone, Default)]
struct FnSummary {
    /// Parameter indices whose value reaches a `return`.
    returns: BTreeSet<usize>,
    /// Transform notes accumulated on the param-to-return path.
    notes: BTreeMap<usize, Vec<String>>,
    /// Parameter index to internal flow reaching a sink inside the body.
    sink_flows: BTreeMap<usize, SinkFlow>,
}

#[derive(Debug, Clone)]
struct SinkFlow {
    steps: Vec<TaintStep>,
    sink_line: u32,
    sink_end_line: u32,
    vulnerable_variable: String,
}

impl<'a> Engine<'a> {
    pub fn new(model: &'a ProgramModel, cfg: &'a SinkConfig, cwe: CweClass) -> Engine<'a> {
        Engine {
            model,
            cfg,
            cwe,
            semantic_sinks: Vec::new(),
        }
    }

    /// Runs the route appropriate for the weakness class.
    pub fn run(
        &self,
        filter: &SeedFilter,
        patch_files: &BTreeSet<String>,
    ) -> Result<ChainOutcome, ContextError> {
        if self.cwe == CweClass::Cwe352 {
            self.semantic_route(patch_files)
        } else {
            self.taint_route(filter, patch_files)
        }
    }

    fn summaries(&self) -> BTreeMap<String, FnSummary> {
        let mut out = BTreeMap::new();
        let mut stack = Vec::new();
        for name in self.model.functions.keys() {
            self.summarize(name, &mut out, &mut stack);
        }
        out
    }

    fn summarize(
        &self,
        name: &str,
        memo: &mut BTreeMap<String, FnSummary>,
        stack: &mut Vec<String>,
    ) {
        if memo.contains_key(name) || stack.iter().any(|n| n == name) {
            return;
        }
        let Some((def_path, def)) = self.model.function_def(name) else {
            return;
        };
        stack.push(name.to_string());
        // Callees first so their summaries are available below.
        let callees: BTreeSet<String> = body_callees(&def.body);
        for c in &callees {
            self.summarize(c, memo, stack);
        }
        let summary = self.simulate_function(def_path, def, memo);
        stack.pop();
        memo.insert(name.to_string(), summary);
    }

    /// Per-parameter taint simulation over a function body.
    fn simulate_function(
        &self,
        def_path: &str,
        def: &FunctionDef,
        memo: &BTreeMap<String, FnSummary>,
    ) -> FnSummary {
        let unit = &self.model.units[def_path];
        let mut summary = FnSummary::default();

        for (pi, param) in def.params.iter().enumerate() {
            let mut tainted: BTreeSet<String> = BTreeSet::new();
            tainted.insert(param.clone());
            let mut steps: Vec<TaintStep> = Vec::new();
            let mut stepped_lines: BTreeSet<u32> = BTreeSet::new();
            let mut notes: Vec<String> = Vec::new();
            let mut reached_return = false;

            for _ in 0..2 {
                for r in flat_body(&def.body) {
                    let stmt = r.stmt;
                    let tainted_reads: Vec<&VarRef> = stmt
                        .reads
                        .iter()
                        .filter(|v| tainted.contains(&v.taint_key()))
                        .collect();
                    if tainted_reads.is_empty() {
                        continue;
                    }
                    match stmt.kind {
                        StmtKind::Assign => {
                            if self.sanitized(stmt, &tainted_reads) {
                                continue;
                            }
                            let w = stmt.writes[0].taint_key();
                            tainted.insert(w);
                            // Re-assignments of an already tainted variable
                            // (`$v = trim($v)`) are still flow steps.
                            if stepped_lines.insert(stmt.line) {
                                steps.push(TaintStep {
                                    path: def_path.to_string(),
                                    line: stmt.line,
                                    end_line: stmt.end_line,
                                    var: stmt.writes[0].name.clone(),
                                    code: unit.span_text(stmt.line, stmt.end_line),
                                    note: None,
                                });
                                notes.extend(self.transform_notes_for(stmt, &tainted));
                            }
                        }
                        StmtKind::Return => reached_return = true,
                        _ => {}
                    }
                    if self.is_taint_sink(stmt) && !summary.sink_flows.contains_key(&pi) {
                        summary.sink_flows.insert(
                            pi,
                            SinkFlow {
                                steps: steps.clone(),
                                sink_line: stmt.line,
                                sink_end_line: stmt.end_line,
                                vulnerable_variable: tainted_reads[0].name.clone(),
                            },
                        );
                    }
                    // Taint flowing through a nested user call's return.
                    if stmt.kind == StmtKind::Assign {
                        for (callee, args) in expr_calls(&stmt.exprs) {
                            if let Some(inner) = memo.get(callee) {
                                for (ai, arg) in args.iter().enumerate() {
                                    let arg_tainted = arg
                                        .reads()
                                        .iter()
                                        .any(|v| tainted.contains(&v.taint_key()));
                                    if arg_tainted && inner.returns.contains(&ai) {
                                        tainted.insert(stmt.writes[0].taint_key());
                                    }
                                }
                            }
                        }
                    }
                }
            }
            if reached_return {
                summary.returns.insert(pi);
                summary.notes.insert(pi, notes);
            }
        }
        summary
    }

    /// Sink test for the taint-style classes (CWE-352 is matched separately).
    fn is_taint_sink(&self, stmt: &Stmt) -> bool {
        self.cfg.is_sink(self.cwe, stmt)
    }

    fn state_changing(&self, callee: &str) -> bool {
        if self
            .semantic_sinks
            .iter()
            .any(|pat| match pat.strip_suffix('*') {
                Some(prefix) => callee.len() >= prefix.len()
                    && callee[..prefix.len()].eq_ignore_ascii_case(prefix),
                None => pat.eq_ignore_ascii_case(callee),
            })
        {
            return true;
        }
        self.semantic_sinks.is_empty() && self.cfg.is_state_changing(callee)
    }

    /// All tainted reads are consumed by sanitizer calls for this class.
    fn sanitized(&self, stmt: &Stmt, tainted_reads: &[&VarRef]) -> bool {
        let calls = expr_calls(&stmt.exprs);
        if calls.is_empty() {
            return false;
        }
        tainted_reads.iter().all(|r| {
            calls.iter().any(|(callee, args)| {
                self.cfg.is_sanitizer(self.cwe, callee)
                    && args.iter().any(|a| {
                        a.reads()
                            .iter()
                            .any(|v| v.name == r.name && v.index == r.index)
                    })
            })
        })
    }

    fn transform_notes_for(&self, stmt: &Stmt, tainted: &BTreeSet<String>) -> Vec<String> {
        let mut notes = Vec::new();
        for (callee, args) in expr_calls(&stmt.exprs) {
            let wraps_taint = args
                .iter()
                .any(|a| a.reads().iter().any(|v| tainted.contains(&v.taint_key())));
            if wraps_taint {
                if let Some(n) = describe_transform(callee, args) {
                    notes.push(n);
                }
            }
        }
        notes
    }

    fn taint_route(
        &self,
        filter: &SeedFilter,
        patch_files: &BTreeSet<String>,
    ) -> Result<ChainOutcome, ContextError> {
        let summaries = self.summaries();
        let mut states: BTreeMap<String, TaintMap> = BTreeMap::new();
        let mut hits: Vec<SinkHit> = Vec::new();
        let mut any_seed_matched = false;

        for _round in 0..16 {
            let mut changed = false;
            for (path, unit) in &self.model.units {
                let group = self.model.scope_key(path);
                for r in flatten(unit) {
                    if r.in_function.is_some() {
                        continue;
                    }
                    let map = states.entry(group.clone()).or_default();
                    let (c, matched) =
                        self.visit(path, unit, &r, map, filter, &summaries, &mut hits);
                    changed |= c;
                    any_seed_matched |= matched;
                }
            }
            if !changed {
                break;
            }
        }

        if hits.is_empty() {
            if !any_seed_matched {
                let names: Vec<&str> = filter.names.iter().map(|s| s.as_str()).collect();
                return Err(ContextError::NotFound {
                    what: ContextPart::Source,
                    detail: if filter.all {
                        "no request-input reads found in any file".to_string()
                    } else {
                        format!(
                            "disclosure names [{}] but no matching request input is read",
                            names.join(", ")
                        )
                    },
                });
            }
            return Err(ContextError::NotFound {
                what: ContextPart::Sink,
                detail: format!(
                    "no {} sink statement reads attacker-tainted data",
                    self.cwe.label()
                ),
            });
        }

        hits.sort_by_key(|h| {
            (
                !patch_files.contains(&h.path),
                h.chain_len,
                h.path.clone(),
                h.line,
            )
        });
        let hit = hits.into_iter().next().unwrap();
        self.assemble_chain(hit, &states)
    }

    /// One statement visit: seed detection, propagation, sink checks.
    /// Returns (state changed, any seed matched here).
    #[allow(clippy::too_many_arguments)]
    fn visit(
        &self,
        path: &str,
        unit: &crate::php::SourceUnit,
        r: &StmtRef<'_>,
        map: &mut TaintMap,
        filter: &SeedFilter,
        summaries: &BTreeMap<String, FnSummary>,
        hits: &mut Vec<SinkHit>,
    ) -> (bool, bool) {
        let stmt = r.stmt;
        let written = stmt.writes.first().map(|w| w.name.as_str());
        let mut changed = false;
        let mut matched = false;

        // Reads that carry taint here: fresh request inputs plus known keys.
        let mut fresh: Vec<&VarRef> = Vec::new();
        let mut known: Vec<&VarRef> = Vec::new();
        for v in &stmt.reads {
            if map.contains_key(&v.taint_key()) {
                known.push(v);
            } else if v.is_request_input() && filter.matches(v, written) {
                fresh.push(v);
                matched = true;
            }
        }
        if fresh.is_empty() && known.is_empty() {
            return (changed, matched);
        }
        let all_tainted: Vec<&VarRef> = known.iter().chain(fresh.iter()).copied().collect();

        if stmt.kind == StmtKind::Assign && !self.sanitized(stmt, &all_tainted) {
            let wkey = stmt.writes[0].taint_key();
            if !map.contains_key(&wkey) {
                let primary = known.first().or_else(|| fresh.first()).copied().unwrap();
                let (prev, source_ref, base_depth) = if known.contains(&primary) {
                    let n = &map[&primary.taint_key()];
                    (Some(primary.taint_key()), None, n.depth)
                } else {
                    (None, Some(primary.to_string()), 0)
                };

                let mut steps = Vec::new();
                let mut notes = Vec::new();
                // A user call that pipes taint through its return records one
                // step at the callee definition, before the assignment step.
                for (callee, args) in expr_calls(&stmt.exprs) {
                    let Some(summary) = summaries.get(callee) else { continue };
                    for (ai, arg) in args.iter().enumerate() {
                        let arg_tainted = arg.reads().iter().any(|v| {
                            map.contains_key(&v.taint_key())
                                || (v.is_request_input() && filter.matches(v, written))
                        });
                        if arg_tainted && summary.returns.contains(&ai) {
                            if let Some((def_path, def)) = self.model.function_def(callee) {
                                let def_unit = &self.model.units[def_path];
                                steps.push(TaintStep {
                                    path: def_path.to_string(),
                                    line: def.start_line,
                                    end_line: def.end_line,
                                    var: stmt.writes[0].name.clone(),
                                    code: def_unit.span_text(def.start_line, def.end_line),
                                    note: Some(format!("value passes through `{callee}()`")),
                                });
                            }
                            if let Some(ns) = summary.notes.get(&ai) {
                                notes.extend(ns.iter().cloned());
                            }
                        }
                    }
                }
                notes.extend(self.transform_notes_for(stmt, &{
                    let mut t: BTreeSet<String> =
                        map.keys().cloned().collect();
                    for f in &fresh {
                        t.insert(f.taint_key());
                    }
                    t
                }));
                steps.push(TaintStep {
                    path: path.to_string(),
                    line: stmt.line,
                    end_line: stmt.end_line,
                    var: stmt.writes[0].name.clone(),
                    code: unit.span_text(stmt.line, stmt.end_line),
                    note: None,
                });

                map.insert(
                    wkey,
                    Node {
                        steps,
                        prev,
                        source_ref,
                        notes,
                        guards: guard_keys(&r.guards, path),
                        depth: base_depth + 1,
                    },
                );
                changed = true;
            }
        }

        // Direct sink reading tainted data.
        if self.is_taint_sink(stmt) {
            let primary = known.first().or_else(|| fresh.first()).copied().unwrap();
            let (read_key, fresh_source, chain_len) = if known.contains(&primary) {
                let n = &map[&primary.taint_key()];
                (Some(primary.taint_key()), None, n.depth + 1)
            } else {
                (None, Some(primary.to_string()), 1)
            };
            let other_keys: Vec<String> = known
                .iter()
                .filter(|v| v.taint_key() != primary.taint_key())
                .map(|v| v.taint_key())
                .collect();
            hits.push(SinkHit {
                path: path.to_string(),
                line: stmt.line,
                end_line: stmt.end_line,
                read_key,
                fresh_source,
                vulnerable_variable: primary.name.clone(),
                other_keys,
                extra_steps: Vec::new(),
                guards: guard_keys(&r.guards, path),
                chain_len,
            });
        }

        // Tainted argument reaching a sink inside a user-defined callee.
        for (callee, args) in expr_calls(&stmt.exprs) {
            let Some(summary) = summaries.get(callee) else { continue };
            for (ai, arg) in args.iter().enumerate() {
                let Some(flow) = summary.sink_flows.get(&ai) else { continue };
                let primary = arg.reads().into_iter().find(|v| {
                    map.contains_key(&v.taint_key())
                        || (v.is_request_input() && filter.matches(v, written))
                });
                let Some(primary) = primary else { continue };
                let (read_key, fresh_source, chain_len) =
                    match map.get(&primary.taint_key()) {
                        Some(n) => (Some(primary.taint_key()), None, n.depth + 1),
                        None => (None, Some(primary.to_string()), 1),
                    };
                let def_path = self
                    .model
                    .function_def(callee)
                    .map(|(p, _)| p.to_string())
                    .unwrap_or_default();
                // The call site itself is part of the chain.
                let mut extra = vec![TaintStep {
                    path: path.to_string(),
                    line: stmt.line,
                    end_line: stmt.end_line,
                    var: primary.name.clone(),
                    code: unit.span_text(stmt.line, stmt.end_line),
                    note: Some(format!("passed into `{callee}()`")),
                }];
                extra.extend(flow.steps.iter().cloned());
                hits.push(SinkHit {
                    path: def_path,
                    line: flow.sink_line,
                    end_line: flow.sink_end_line,
                    read_key,
                    fresh_source,
                    vulnerable_variable: flow.vulnerable_variable.clone(),
                    other_keys: Vec::new(),
                    extra_steps: extra,
                    guards: guard_keys(&r.guards, path),
                    chain_len: chain_len + flow.steps.len(),
                });
            }
        }

        (changed, matched)
    }

    fn assemble_chain(
        &self,
        hit: SinkHit,
        states: &BTreeMap<String, TaintMap>,
    ) -> Result<ChainOutcome, ContextError> {
        // The hit's group is where its taint state lives.
        let group_of = |p: &str| self.model.scope_key(p);
        let mut steps: Vec<TaintStep> = Vec::new();
        let mut notes: Vec<String> = Vec::new();
        let mut guard_sites: BTreeSet<(String, u32)> = hit.guards.iter().cloned().collect();
        let mut source_ref = hit.fresh_source.clone();
        let mut tainted_keys: BTreeSet<String> = BTreeSet::new();

        if let Some(read_key) = &hit.read_key {
            // Find the map that knows this key (the sink file's group, or the
            // group of the call site for cross-file function flows).
            let map = states
                .values()
                .find(|m| m.contains_key(read_key))
                .expect("taint key recorded during propagation");
            tainted_keys = map.keys().cloned().collect();
            let mut rev: Vec<&Node> = Vec::new();
            let mut cur = Some(read_key.clone());
            while let Some(key) = cur {
                let node = &map[&key];
                rev.push(node);
                cur = node.prev.clone();
            }
            for node in rev.iter().rev() {
                steps.extend(node.steps.iter().cloned());
                notes.extend(node.notes.iter().cloned());
                guard_sites.extend(node.guards.iter().cloned());
                if source_ref.is_none() {
                    source_ref = node.source_ref.clone();
                }
            }
        }
        // Secondary operands read at the sink bring their own derivations.
        for key in &hit.other_keys {
            let Some(map) = states.values().find(|m| m.contains_key(key)) else {
                continue;
            };
            let mut rev: Vec<&Node> = Vec::new();
            let mut cur = Some(key.clone());
            while let Some(k) = cur {
                let node = &map[&k];
                rev.push(node);
                cur = node.prev.clone();
            }
            for node in rev.iter().rev() {
                steps.extend(node.steps.iter().cloned());
                notes.extend(node.notes.iter().cloned());
                guard_sites.extend(node.guards.iter().cloned());
            }
        }
        steps.extend(hit.extra_steps.iter().cloned());
        dedup_keep_first(&mut steps);

        // Sink step last, unless the sink's span is already the final step.
        let sink_unit = self.model.unit(&hit.path);
        let sink_code = sink_unit
            .map(|u| u.span_text(hit.line, hit.end_line))
            .unwrap_or_default();
        if steps
            .last()
            .map(|s| !(s.path == hit.path && s.line == hit.line))
            .unwrap_or(true)
        {
            steps.push(TaintStep {
                path: hit.path.clone(),
                line: hit.line,
                end_line: hit.end_line,
                var: hit.vulnerable_variable.clone(),
                code: sink_code,
                note: None,
            });
        }

        let source_ref = source_ref.ok_or_else(|| ContextError::NotFound {
            what: ContextPart::Source,
            detail: "sink chain has no request-input origin".to_string(),
        })?;

        let mut guards = self.collect_guards(&steps, guard_sites, group_of(&hit.path));
        guards.sort_by(|a, b| (&a.path, a.line).cmp(&(&b.path, b.line)));

        let validation_span = if self.cwe == CweClass::Cwe434 {
            self.validation_span(&hit.path, &guards, &tainted_keys)
        } else {
            None
        };

        Ok(ChainOutcome {
            source_ref,
            vulnerable_variable: hit.vulnerable_variable,
            steps,
            sink_path: hit.path,
            sink_line: hit.line,
            sink_end_line: hit.end_line,
            transform_notes: notes,
            guards,
            validation_span,
            operation_params: Vec::new(),
        })
    }

    /// Guard obligations: enclosing ifs of chain statements (want = branch
    /// taken, recovered from guard sites) plus top-level early-exit guards
    /// preceding any chain statement in the files the chain touches.
    fn collect_guards(
        &self,
        steps: &[TaintStep],
        guard_sites: BTreeSet<(String, u32)>,
        _sink_group: String,
    ) -> Vec<GuardObligation> {
        let mut out: BTreeMap<(String, u32, bool), GuardObligation> = BTreeMap::new();

        let mut files: BTreeSet<&str> = steps.iter().map(|s| s.path.as_str()).collect();
        let mut max_line: BTreeMap<&str, u32> = BTreeMap::new();
        for s in steps {
            let e = max_line.entry(s.path.as_str()).or_insert(0);
            *e = (*e).max(s.line);
        }
        for path in files.iter() {
            let Some(unit) = self.model.unit(path) else { continue };
            for r in flatten(unit) {
                let stmt = r.stmt;
                // Enclosing guard recorded during propagation.
                if stmt.kind == StmtKind::If
                    && guard_sites.contains(&(path.to_string(), stmt.line))
                {
                    // Want-polarity: the chain statement lives in one branch;
                    // find which by checking spans of chain steps.
                    let want = branch_for_steps(stmt, steps, path);
                    add_guard(&mut out, path, stmt, want);
                }
                // Early-exit guard dominating a chain statement.
                if stmt.kind == StmtKind::If
                    && r.in_function.is_none()
                    && r.guards.is_empty()
                    && is_early_exit_stmt(stmt)
                    && stmt.line < *max_line.get(*path).unwrap_or(&0)
                    && !guard_sites.contains(&(path.to_string(), stmt.line))
                {
                    add_guard(&mut out, path, stmt, false);
                }
            }
        }
        files.clear();
        out.into_values().collect()
    }

    /// CWE-434: span covering upload validation in the sink file: guards over
    /// tainted variables plus the backward slice of their predicate inputs,
    /// restricted to tainted assignments.
    fn validation_span(
        &self,
        sink_path: &str,
        guards: &[GuardObligation],
        tainted: &BTreeSet<String>,
    ) -> Option<(String, u32, u32)> {
        let unit = self.model.unit(sink_path)?;
        let mut lines: BTreeSet<u32> = BTreeSet::new();
        for g in guards {
            if g.path != sink_path {
                continue;
            }
            let pred_reads = g.pred.reads();
            let tainted_vars: Vec<String> = pred_reads
                .iter()
                .filter(|v| tainted.contains(&v.taint_key()))
                .map(|v| v.name.clone())
                .collect();
            if tainted_vars.is_empty() {
                continue;
            }
            lines.insert(g.line);
            lines.insert(g.end_line);
            for l in backward_slice_lines(unit, g.line, &tainted_vars, Some(tainted)) {
                lines.insert(l);
            }
        }
        let (&min, &max) = (lines.iter().next()?, lines.iter().next_back()?);
        Some((sink_path.to_string(), min, max))
    }

    /// CWE-352: the sink is a state-changing call; its inputs are sliced
    /// backward and the selecting guard provides source and parameters.
    fn semantic_route(&self, patch_files: &BTreeSet<String>) -> Result<ChainOutcome, ContextError> {
        struct Candidate<'s> {
            path: String,
            stmt: &'s Stmt,
            guards: Vec<GuardStep<'s>>,
        }
        let mut candidates: Vec<Candidate<'_>> = Vec::new();
        for (path, unit) in &self.model.units {
            for r in flatten(unit) {
                if r.in_function.is_some() {
                    continue;
                }
                let Some(callee) = &r.stmt.callee else { continue };
                if matches!(
                    r.stmt.kind,
                    StmtKind::Call | StmtKind::SqlExec | StmtKind::SysExec | StmtKind::FileMove
                ) && self.state_changing(callee)
                {
                    candidates.push(Candidate {
                        path: path.clone(),
                        stmt: r.stmt,
                        guards: r.guards,
                    });
                }
            }
        }
        candidates.sort_by_key(|c| (!patch_files.contains(&c.path), c.path.clone(), c.stmt.line));
        let hit = candidates.into_iter().next().ok_or_else(|| ContextError::NotFound {
            what: ContextPart::Sink,
            detail: "no state-changing operation found".to_string(),
        })?;

        let unit = &self.model.units[&hit.path];

        // Backward data slice of the sink's arguments within the file.
        let needed: Vec<String> = hit.stmt.reads.iter().map(|v| v.name.clone()).collect();
        let slice_lines = backward_slice_lines(unit, hit.stmt.line, &needed, None);

        // Source: the innermost dominating guard reading request input.
        let source_guard = hit
            .guards
            .iter()
            .rev()
            .find(|g| g.guard.reads.iter().any(|v| v.is_request_input()));
        let (source_ref, source_step) = match source_guard {
            Some(g) => {
                let read = g
                    .guard
                    .reads
                    .iter()
                    .find(|v| v.is_request_input())
                    .unwrap();
                (
                    read.to_string(),
                    Some(TaintStep {
                        path: hit.path.clone(),
                        line: g.guard.line,
                        end_line: g.guard.line,
                        var: read.name.clone(),
                        code: unit.line_text(g.guard.line).to_string(),
                        note: Some("operation selected by request parameter".to_string()),
                    }),
                )
            }
            None => {
                return Err(ContextError::NotFound {
                    what: ContextPart::Source,
                    detail: format!(
                        "state-changing call at {}:{} is not guarded by any request parameter",
                        hit.path, hit.stmt.line
                    ),
                })
            }
        };

        let mut steps = Vec::new();
        steps.extend(source_step);
        for line in &slice_lines {
            steps.push(TaintStep {
                path: hit.path.clone(),
                line: *line,
                end_line: *line,
                var: String::new(),
                code: unit.line_text(*line).to_string(),
                note: None,
            });
        }
        steps.push(TaintStep {
            path: hit.path.clone(),
            line: hit.stmt.line,
            end_line: hit.stmt.end_line,
            var: hit
                .stmt
                .reads
                .first()
                .map(|v| v.name.clone())
                .unwrap_or_default(),
            code: unit.span_text(hit.stmt.line, hit.stmt.end_line),
            note: None,
        });

        // All dominating guards become obligations; the request-reading one
        // also yields the operation parameters.
        let mut guards = Vec::new();
        let mut operation_params = Vec::new();
        for g in &hit.guards {
            let ob = GuardObligation {
                path: hit.path.clone(),
                line: g.guard.line,
                end_line: g.guard.end_line,
                pred_text: g.guard.pred_text.clone().unwrap_or_default(),
                pred: g.guard.predicate.clone().unwrap_or(Expr::Opaque(String::new())),
                want: g.branch_taken,
            };
            if g.guard.reads.iter().any(|v| v.is_request_input()) {
                let env = straight_line_env(
                    unit,
                    g.guard.line,
                    self.model.scope_constants(&hit.path),
                );
                let sat = crate::php::expr::satisfiable(&ob.pred, ob.want, &env);
                operation_params.extend(sat.constraints);
            }
            guards.push(ob);
        }
        // Early exits above the sink in the same file.
        for r in flatten(unit) {
            if r.in_function.is_none()
                && r.guards.is_empty()
                && r.stmt.kind == StmtKind::If
                && is_early_exit_stmt(r.stmt)
                && r.stmt.line < hit.stmt.line
                && !guards.iter().any(|g| g.line == r.stmt.line)
            {
                add_guard_vec(&mut guards, &hit.path, r.stmt, false);
            }
        }
        guards.sort_by(|a, b| (&a.path, a.line).cmp(&(&b.path, b.line)));
        operation_params.dedup();

        Ok(ChainOutcome {
            source_ref,
            vulnerable_variable: hit
                .stmt
                .reads
                .first()
                .map(|v| v.name.clone())
                .unwrap_or_default(),
            steps,
            sink_path: hit.path.clone(),
            sink_line: hit.stmt.line,
            sink_end_line: hit.stmt.end_line,
            transform_notes: Vec::new(),
            guards,
            validation_span: None,
            operation_params,
        })
    }
}

fn guard_keys(guards: &[GuardStep<'_>], path: &str) -> Vec<(String, u32)> {
    guards
        .iter()
        .map(|g| (path.to_string(), g.guard.line))
        .collect()
}

fn add_guard(
    out: &mut BTreeMap<(String, u32, bool), GuardObligation>,
    path: &str,
    stmt: &Stmt,
    want: bool,
) {
    out.entry((path.to_string(), stmt.line, want))
        .or_insert_with(|| GuardObligation {
            path: path.to_string(),
            line: stmt.line,
            end_line: stmt.end_line,
            pred_text: stmt.pred_text.clone().unwrap_or_default(),
            pred: stmt.predicate.clone().unwrap_or(Expr::Opaque(String::new())),
            want,
        });
}

fn add_guard_vec(out: &mut Vec<GuardObligation>, path: &str, stmt: &Stmt, want: bool) {
    out.push(GuardObligation {
        path: path.to_string(),
        line: stmt.line,
        end_line: stmt.end_line,
        pred_text: stmt.pred_text.clone().unwrap_or_default(),
        pred: stmt.predicate.clone().unwrap_or(Expr::Opaque(String::new())),
        want,
    });
}

/// Which branch of `guard` contains chain steps in the same file: true for
/// the then-branch (default when undecidable).
fn branch_for_steps(guard: &Stmt, steps: &[TaintStep], path: &str) -> bool {
    let in_branch = |stmts: &[Stmt]| -> bool {
        fn spans(stmts: &[Stmt], out: &mut Vec<(u32, u32)>) {
            for s in stmts {
                out.push((s.line, s.end_line));
                spans(&s.body, out);
                spans(&s.else_body, out);
            }
        }
        let mut sp = Vec::new();
        spans(stmts, &mut sp);
        steps
            .iter()
            .filter(|st| st.path == path)
            .any(|st| sp.iter().any(|(a, b)| st.line >= *a && st.line <= *b))
    };
    if in_branch(&guard.else_body) && !in_branch(&guard.body) {
        return false;
    }
    true
}

/// An `if` whose then-branch only stops the request (exit or return) and
/// which has no else-branch: the exploit needs its predicate false.
pub fn is_early_exit_stmt(stmt: &Stmt) -> bool {
    stmt.else_body.is_empty()
        && !stmt.body.is_empty()
        && stmt.body.iter().all(|s| s.is_terminal())
}

/// Top-level statement lines above `from_line` that feed the given variables,
/// following assignment data dependencies. With `tainted` set, only tainted
/// assignments join the slice.
pub fn backward_slice_lines(
    unit: &crate::php::SourceUnit,
    from_line: u32,
    vars: &[String],
    tainted: Option<&BTreeSet<String>>,
) -> BTreeSet<u32> {
    let mut needed: BTreeSet<String> = vars.iter().cloned().collect();
    let mut lines = BTreeSet::new();
    let mut all: Vec<&Stmt> = Vec::new();
    fn collect<'s>(stmts: &'s [Stmt], out: &mut Vec<&'s Stmt>) {
        for s in stmts {
            if s.kind == StmtKind::Assign {
                out.push(s);
            }
            collect(&s.body, out);
            collect(&s.else_body, out);
        }
    }
    collect(&unit.stmts, &mut all);
    all.sort_by_key(|s| s.line);

    for stmt in all.iter().rev() {
        if stmt.line >= from_line {
            continue;
        }
        let w = &stmt.writes[0];
        if !needed.contains(&w.name) {
            continue;
        }
        if let Some(t) = tainted {
            if !t.contains(&w.taint_key()) {
                continue;
            }
            // The raw request read is the chain's origin, not part of the
            // mechanism under analysis; stop the slice there.
            if stmt.reads.iter().any(|r| r.is_request_input()) {
                needed.remove(&w.name);
                continue;
            }
        }
        lines.insert(stmt.line);
        needed.remove(&w.name);
        for r in &stmt.reads {
            if !r.is_superglobal() {
                needed.insert(r.name.clone());
            }
        }
    }
    lines
}

/// Environment for predicate satisfiability at a line: derivations of locals
/// assigned in straight-line code above, plus the constants the caller knows
/// to be defined when execution reaches this file.
pub fn straight_line_env(
    unit: &crate::php::SourceUnit,
    before_line: u32,
    consts: BTreeSet<String>,
) -> crate::php::expr::PredEnv {
    let mut env = crate::php::expr::PredEnv {
        vars: BTreeMap::new(),
        consts,
    };
    for stmt in &unit.stmts {
        if stmt.line >= before_line || stmt.kind != StmtKind::Assign {
            continue;
        }
        let w = stmt.writes[0].name.clone();
        let deriv = stmt
            .exprs
            .first()
            .map(derive_value)
            .unwrap_or(crate::php::expr::Deriv::Unknown);
        env.vars.insert(w, deriv);
    }
    env
}

fn derive_value(e: &Expr) -> crate::php::expr::Deriv {
    use crate::php::expr::Deriv;
    if let Some(key) = crate::php::expr::controllable_key(
        e,
        &crate::php::expr::PredEnv {
            vars: BTreeMap::new(),
            consts: BTreeSet::new(),
        },
    ) {
        return Deriv::Request(key);
    }
    match e.fold(&BTreeMap::new()) {
        Some(v) => Deriv::Constant(v),
        None => Deriv::Unknown,
    }
}

/// Removes later repeats of a step span, keeping chain order.
fn dedup_keep_first(steps: &mut Vec<TaintStep>) {
    let mut seen: BTreeSet<(String, u32, u32)> = BTreeSet::new();
    steps.retain(|s| seen.insert((s.path.clone(), s.line, s.end_line)));
}

/// (callee, args) pairs for every call in the expression trees, nested
/// arguments included.
fn expr_calls(exprs: &[Expr]) -> Vec<(&str, &[Expr])> {
    fn walk<'e>(e: &'e Expr, out: &mut Vec<(&'e str, &'e [Expr])>) {
        match e {
            Expr::Call { callee, args, recv, .. } => {
                out.push((callee.as_str(), args.as_slice()));
                for a in args {
                    walk(a, out);
                }
                if let Some(r) = recv {
                    walk(r, out);
                }
            }
            Expr::Index { base, index } => {
                walk(base, out);
                if let Some(i) = index {
                    walk(i, out);
                }
            }
            Expr::Prop { base, .. } => walk(base, out),
            Expr::Unary { operand, .. } => walk(operand, out),
            Expr::Binary { lhs, rhs, .. } => {
                walk(lhs, out);
                walk(rhs, out);
            }
            Expr::Ternary { cond, then, els } => {
                walk(cond, out);
                if let Some(t) = then {
                    walk(t, out);
                }
                walk(els, out);
            }
            Expr::Array(items) => {
                for i in items {
                    walk(i, out);
                }
            }
            _ => {}
        }
    }
    let mut out = Vec::new();
    for e in exprs {
        walk(e, &mut out);
    }
    out
}

fn body_callees(body: &[Stmt]) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    fn walk(stmts: &[Stmt], out: &mut BTreeSet<String>) {
        for s in stmts {
            let mut calls = Vec::new();
            for e in &s.exprs {
                e.collect_calls(&mut calls);
            }
            if let Some(p) = &s.predicate {
                p.collect_calls(&mut calls);
            }
            for c in calls {
                out.insert(c.callee);
            }
            walk(&s.body, out);
            walk(&s.else_body, out);
        }
    }
    walk(body, &mut out);
    out
}

/// Flattened view of a statement list (used for function bodies).
fn flat_body(stmts: &[Stmt]) -> Vec<StmtRef<'_>> {
    fn walk<'a>(stmts: &'a [Stmt], out: &mut Vec<StmtRef<'a>>) {
        for s in stmts {
            out.push(StmtRef {
                stmt: s,
                guards: Vec::new(),
                in_function: None,
            });
            walk(&s.body, out);
            walk(&s.else_body, out);
        }
    }
    let mut out = Vec::new();
    walk(stmts, &mut out);
    out
}

/// Human description of a value transformation, for data-flow constraints.
fn describe_transform(callee: &str, args: &[Expr]) -> Option<String> {
    let consts = BTreeMap::new();
    let lit = |i: usize| args.get(i).and_then(|a| a.fold(&consts));
    Some(match callee {
        "trim" | "ltrim" | "rtrim" => "surrounding whitespace is trimmed".to_string(),
        "strtolower" => "the value is lowercased".to_string(),
        "strtoupper" => "the value is uppercased".to_string(),
        "str_replace" => match (lit(0), lit(1)) {
            (Some(what), Some(with)) if with.is_empty() => {
                format!("every `{}` is removed (str_replace)", printable(&what))
            }
            (Some(what), Some(with)) => format!(
                "`{}` is replaced with `{}` (str_replace)",
                printable(&what),
                printable(&with)
            ),
            _ => "the value passes through str_replace".to_string(),
        },
        "htmlspecialchars" | "htmlentities" => {
            "HTML metacharacters are entity-encoded".to_string()
        }
        "strip_tags" => "HTML tags are stripped".to_string(),
        "addslashes" => "quotes are backslash-escaped (addslashes)".to_string(),
        "intval" => "the value is cast to an integer".to_string(),
        "urldecode" | "rawurldecode" => "the value is URL-decoded before use".to_string(),
        "explode" => match lit(0) {
            Some(d) => format!("the value is split on `{}`", printable(&d)),
            None => "the value is split (explode)".to_string(),
        },
        "end" => "the last array element is taken".to_string(),
        "basename" => "only the trailing path component is kept (basename)".to_string(),
        "substr" => "a substring of the value is taken".to_string(),
        _ => return None,
    })
}

fn printable(s: &str) -> String {
    s.replace('\0', "\\0").replace('\n', "\\n").replace('\t', "\\t")
}
