//! Static model of a small PHP subset: enough structure to trace request
//! input through assignments, guards, includes, and output or execution
//! sinks across the files of one vulnerable application.
//!
//! Parsing never hard-fails. Anything outside the subset becomes an `Other`
//! statement with conservative variable reads, and the unit records a
//! warning so analyses know where precision was lost.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Deserialize;
use thiserror::Error;

use crate::corpus::CweClass;

pub mod eval;
pub mod expr;
pub mod lexer;
pub mod parser;

/// All superglobal array names, without the leading `$`.
pub const SUPERGLOBALS: &[&str] = &[
    "_GET", "_POST", "_REQUEST", "_COOKIE", "_FILES", "_SERVER", "_SESSION", "_ENV", "GLOBALS",
];

/// Superglobals an unauthenticated HTTP client controls directly.
pub const REQUEST_SUPERGLOBALS: &[&str] = &["_GET", "_POST", "_REQUEST", "_COOKIE", "_FILES"];

/// One piece of an interpolated string: literal bytes or a `$var[idx]` hole.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StrPart {
    Lit(String),
    Var { name: String, index: Option<String> },
}

/// A variable occurrence, optionally subscripted by a constant key.
/// `$_GET['search']` is `{ name: "_GET", index: Some("search") }`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarRef {
    pub name: String,
    pub index: Option<String>,
    pub line: u32,
}

impl VarRef {
    pub fn is_superglobal(&self) -> bool {
        SUPERGLOBALS.contains(&self.name.as_str())
    }

    /// True when the variable is request data an attacker controls.
    pub fn is_request_input(&self) -> bool {
        REQUEST_SUPERGLOBALS.contains(&self.name.as_str())
    }

    /// Identity for taint tracking: subscripts distinguish superglobal keys
    /// but collapse for ordinary variables (`$row['x']` aliases `$row`).
    pub fn taint_key(&self) -> String {
        if self.is_superglobal() {
            match &self.index {
                Some(idx) => format!("{}[{}]", self.name, idx),
                None => self.name.clone(),
            }
        } else {
            self.name.clone()
        }
    }
}

impl fmt::Display for VarRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.index {
            Some(idx) => write!(f, "${}['{}']", self.name, idx),
            None => write!(f, "${}", self.name),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StmtKind {
    Assign,
    Echo,
    Call,
    Include,
    Redirect,
    If,
    Loop,
    Return,
    SqlExec,
    SysExec,
    FileMove,
    Exit,
    Html,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NavKind {
    Include,
    Redirect,
}

/// Where an include or Location header leads. `resolved` holds the constant-
/// folded target when the expression folds; edge resolution against actual
/// corpus paths happens in [`build_program_model`].
#[derive(Debug, Clone)]
pub struct NavTarget {
    pub kind: NavKind,
    pub raw: String,
    pub resolved: Option<String>,
}

/// One statement. Container kinds (`If`, `Loop`, `Other` from blocks or
/// switches) carry nested statements in `body` / `else_body`; spans cover
/// the full construct including its closing brace line.
#[derive(Debug, Clone)]
pub struct Stmt {
    pub kind: StmtKind,
    pub line: u32,
    pub end_line: u32,
    pub reads: Vec<VarRef>,
    pub writes: Vec<VarRef>,
    /// Callee name for calls, and for assignments whose right side calls a
    /// function (`$r = query($sql)` keeps `callee = Some("query")`), so sink
    /// matching by name works on both shapes.
    pub callee: Option<String>,
    /// Best-effort reconstruction of the value as literal/variable parts,
    /// used for output-context classification.
    pub string_parts: Option<Vec<StrPart>>,
    pub nav_target: Option<NavTarget>,
    pub predicate: Option<expr::Expr>,
    pub pred_text: Option<String>,
    pub body: Vec<Stmt>,
    pub else_body: Vec<Stmt>,
    pub exprs: Vec<expr::Expr>,
    pub assign_op: Option<String>,
    pub globals: Vec<String>,
    pub html_ref: Option<usize>,
}

impl Stmt {
    pub fn at(line: u32, end_line: u32) -> Stmt {
        Stmt {
            kind: StmtKind::Other,
            line,
            end_line,
            reads: Vec::new(),
            writes: Vec::new(),
            callee: None,
            string_parts: None,
            nav_target: None,
            predicate: None,
            pred_text: None,
            body: Vec::new(),
            else_body: Vec::new(),
            exprs: Vec::new(),
            assign_op: None,
            globals: Vec::new(),
            html_ref: None,
        }
    }

    /// True for statements that terminate the request when executed.
    pub fn is_terminal(&self) -> bool {
        matches!(self.kind, StmtKind::Exit | StmtKind::Return)
    }
}

#[derive(Debug, Clone)]
pub struct FunctionDef {
    pub name: String,
    /// Parameter names without `$`, in declaration order.
    pub params: Vec<String>,
    pub body: Vec<Stmt>,
    pub start_line: u32,
    pub end_line: u32,
}

#[derive(Debug, Clone)]
pub struct HtmlSegment {
    pub start_line: u32,
    pub end_line: u32,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineOwner {
    Code,
    Html,
    Trivia,
}

/// One parsed file.
#[derive(Debug, Clone)]
pub struct SourceUnit {
    pub path: String,
    pub source: String,
    pub stmts: Vec<Stmt>,
    pub functions: Vec<FunctionDef>,
    pub html_segments: Vec<HtmlSegment>,
    /// Constants registered with `define()`; value is the folded literal or
    /// empty when only definedness is known.
    pub defined_constants: BTreeMap<String, String>,
    pub warnings: Vec<String>,
    pub line_count: u32,
    /// Indexed by line-1; every line must end up owned by code, markup, or
    /// trivia (blank lines, comments, open/close tags).
    pub line_owners: Vec<LineOwner>,
}

impl SourceUnit {
    pub fn parse(path: &str, source: &str) -> SourceUnit {
        parser::parse_unit(path, source)
    }

    /// Text of one line (1-indexed), without its newline.
    pub fn line_text(&self, line: u32) -> &str {
        self.source
            .lines()
            .nth(line.saturating_sub(1) as usize)
            .unwrap_or("")
    }

    /// Lines `start..=end` joined with newlines.
    pub fn span_text(&self, start: u32, end: u32) -> String {
        if start == 0 {
            return String::new();
        }
        self.source
            .lines()
            .skip((start - 1) as usize)
            .take((end.saturating_sub(start) + 1) as usize)
            .collect::<Vec<_>>()
            .join("\n")
    }

    /// Assigns every line an owner and warns on substantive lines no
    /// statement claims. Runs once at the end of parsing.
    pub(crate) fn compute_line_owners(&mut self, source: &str) {
        let n = self.line_count as usize;
        let mut owners = vec![LineOwner::Trivia; n];

        let mark =
            |owners: &mut Vec<LineOwner>, start: u32, end: u32, owner: LineOwner, only_trivia: bool| {
                if start == 0 {
                    return;
                }
                for line in start..=end {
                    let i = (line - 1) as usize;
                    if i >= owners.len() {
                        break;
                    }
                    if !only_trivia || owners[i] == LineOwner::Trivia {
                        owners[i] = owner;
                    }
                }
            };

        for seg in &self.html_segments {
            mark(&mut owners, seg.start_line, seg.end_line, LineOwner::Html, false);
        }

        fn mark_stmts(stmts: &[Stmt], owners: &mut Vec<LineOwner>) {
            for s in stmts {
                if s.kind != StmtKind::Html && s.line > 0 {
                    for line in s.line..=s.end_line {
                        let i = (line - 1) as usize;
                        if i < owners.len() && owners[i] == LineOwner::Trivia {
                            owners[i] = LineOwner::Code;
                        }
                    }
                }
                mark_stmts(&s.body, owners);
                mark_stmts(&s.else_body, owners);
            }
        }
        mark_stmts(&self.stmts, &mut owners);
        for f in &self.functions {
            mark(&mut owners, f.start_line, f.end_line, LineOwner::Code, true);
            mark_stmts(&f.body, &mut owners);
        }

        for (i, raw) in source.lines().enumerate() {
            if i >= owners.len() || owners[i] != LineOwner::Trivia {
                continue;
            }
            let t = raw.trim();
            let is_trivia = t.is_empty()
                || t == "<?php"
                || t == "<?"
                || t == "?>"
                || t == "{"
                || t == "}"
                || t.starts_with("//")
                || t.starts_with('#')
                || t.starts_with("/*")
                || t.starts_with('*')
                || t.ends_with("*/");
            if !is_trivia {
                self.warnings.push(format!(
                    "{}:{}: line not owned by any statement",
                    self.path,
                    i + 1
                ));
            }
        }
        self.line_owners = owners;
    }
}

/// An enclosing guard on the path to a statement: the `If` and which branch
/// must be taken to reach it.
#[derive(Debug, Clone)]
pub struct GuardStep<'a> {
    pub guard: &'a Stmt,
    pub branch_taken: bool,
}

/// A statement with its position: enclosing guards outermost-first and, when
/// inside a function body, that function's name.
#[derive(Debug)]
pub struct StmtRef<'a> {
    pub stmt: &'a Stmt,
    pub guards: Vec<GuardStep<'a>>,
    pub in_function: Option<&'a str>,
}

/// Flattens a unit into all statements at any nesting depth, each with its
/// guard stack. Top-level statements come before function bodies.
pub fn flatten(unit: &SourceUnit) -> Vec<StmtRef<'_>> {
    fn walk<'a>(
        stmts: &'a [Stmt],
        guards: &mut Vec<GuardStep<'a>>,
        in_function: Option<&'a str>,
        out: &mut Vec<StmtRef<'a>>,
    ) {
        for s in stmts {
            out.push(StmtRef {
                stmt: s,
                guards: guards.clone(),
                in_function,
            });
            if s.kind == StmtKind::If {
                guards.push(GuardStep {
                    guard: s,
                    branch_taken: true,
                });
                walk(&s.body, guards, in_function, out);
                guards.pop();
                guards.push(GuardStep {
                    guard: s,
                    branch_taken: false,
                });
                walk(&s.else_body, guards, in_function, out);
                guards.pop();
            } else {
                walk(&s.body, guards, in_function, out);
                walk(&s.else_body, guards, in_function, out);
            }
        }
    }
    let mut out = Vec::new();
    let mut guards = Vec::new();
    walk(&unit.stmts, &mut guards, None, &mut out);
    for f in &unit.functions {
        walk(&f.body, &mut guards, Some(&f.name), &mut out);
    }
    out
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read sink configuration {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed sink configuration {path}: {message}")]
    Parse { path: String, message: String },
}

#[derive(Debug, Clone, Default, Deserialize)]
struct RawCweRules {
    #[serde(default)]
    sinks: Vec<String>,
    #[serde(default)]
    sanitizers: Vec<String>,
    #[serde(default)]
    state_changing: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
struct RawSinkConfig {
    taxonomy: RawTaxonomy,
    cwe78: RawCweRules,
    cwe79: RawCweRules,
    cwe89: RawCweRules,
    cwe352: RawCweRules,
    cwe434: RawCweRules,
}

#[derive(Debug, Clone, Deserialize)]
struct RawTaxonomy {
    sql_exec: Vec<String>,
    sys_exec: Vec<String>,
    file_move: Vec<String>,
}

/// Per-class sink and sanitizer names plus the callee taxonomy that refines
/// generic calls into `SqlExec` / `SysExec` / `FileMove` statements.
#[derive(Debug, Clone)]
pub struct SinkConfig {
    sql_exec: Vec<String>,
    sys_exec: Vec<String>,
    file_move: Vec<String>,
    rules: BTreeMap<CweClass, RawCweRules>,
}

const DEFAULT_SINK_CONFIG: &str = include_str!("../../data/sink_config.toml");

impl SinkConfig {
    pub fn default_config() -> SinkConfig {
        Self::from_toml(DEFAULT_SINK_CONFIG, "<built-in>")
            .expect("built-in sink configuration must parse")
    }

    pub fn load(path: &str) -> Result<SinkConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_string(),
            source,
        })?;
        Self::from_toml(&text, path)
    }

    fn from_toml(text: &str, origin: &str) -> Result<SinkConfig, ConfigError> {
        let raw: RawSinkConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_string(),
            message: e.to_string(),
        })?;
        let mut rules = BTreeMap::new();
        rules.insert(CweClass::Cwe78, raw.cwe78);
        rules.insert(CweClass::Cwe79, raw.cwe79);
        rules.insert(CweClass::Cwe89, raw.cwe89);
        rules.insert(CweClass::Cwe352, raw.cwe352);
        rules.insert(CweClass::Cwe434, raw.cwe434);
        Ok(SinkConfig {
            sql_exec: raw.taxonomy.sql_exec,
            sys_exec: raw.taxonomy.sys_exec,
            file_move: raw.taxonomy.file_move,
            rules,
        })
    }

    /// Refined statement kind for a callee name, when the taxonomy knows it.
    pub fn kind_for_callee(&self, callee: &str) -> Option<StmtKind> {
        let eq = |list: &[String]| list.iter().any(|n| n.eq_ignore_ascii_case(callee));
        if eq(&self.sql_exec) {
            Some(StmtKind::SqlExec)
        } else if eq(&self.sys_exec) {
            Some(StmtKind::SysExec)
        } else if eq(&self.file_move) {
            Some(StmtKind::FileMove)
        } else {
            None
        }
    }

    /// Whether `stmt` is a sink for the class: echo-like output for script
    /// injection, matching callee names for the execution classes.
    pub fn is_sink(&self, cwe: CweClass, stmt: &Stmt) -> bool {
        let rules = &self.rules[&cwe];
        if cwe == CweClass::Cwe79 && matches!(stmt.kind, StmtKind::Echo) {
            return true;
        }
        if let Some(callee) = &stmt.callee {
            if rules.sinks.iter().any(|s| s.eq_ignore_ascii_case(callee)) {
                return true;
            }
        }
        false
    }

    pub fn is_sanitizer(&self, cwe: CweClass, name: &str) -> bool {
        self.rules[&cwe]
            .sanitizers
            .iter()
            .any(|s| s.eq_ignore_ascii_case(name))
    }

    /// Callee patterns that mutate server state (the CWE-352 sink shape).
    /// A trailing `*` in a pattern matches any suffix.
    pub fn is_state_changing(&self, name: &str) -> bool {
        self.rules[&CweClass::Cwe352]
            .state_changing
            .iter()
            .any(|pat| match pat.strip_suffix('*') {
                Some(prefix) => {
                    name.len() >= prefix.len()
                        && name[..prefix.len()].eq_ignore_ascii_case(prefix)
                }
                None => pat.eq_ignore_ascii_case(name),
            })
    }
}

/// Rewrites generic `Call` statements whose callee the taxonomy knows into
/// the specific execution kinds, at every nesting depth.
pub fn reclassify_unit(unit: &mut SourceUnit, cfg: &SinkConfig) {
    fn walk(stmts: &mut [Stmt], cfg: &SinkConfig) {
        for s in stmts.iter_mut() {
            if s.kind == StmtKind::Call {
                if let Some(kind) = s.callee.as_deref().and_then(|c| cfg.kind_for_callee(c)) {
                    s.kind = kind;
                }
            }
            walk(&mut s.body, cfg);
            walk(&mut s.else_body, cfg);
        }
    }
    walk(&mut unit.stmts, cfg);
    for f in unit.functions.iter_mut() {
        walk(&mut f.body, cfg);
    }
}

/// A resolved navigation edge between two corpus files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NavEdge {
    pub from: String,
    pub to: String,
    pub line: u32,
    pub kind: NavKind,
}

/// An include or redirect whose target could not be mapped to a corpus file
/// (dynamic expression, missing file, or ambiguous suffix).
#[derive(Debug, Clone)]
pub struct DanglingEdge {
    pub from: String,
    pub line: u32,
    pub target_text: String,
    pub kind: NavKind,
}

#[derive(Debug, Clone)]
pub struct FunctionSite {
    pub path: String,
    /// Index into that unit's `functions` vector.
    pub index: usize,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("function `{name}` defined in both {first} and {second}")]
    DuplicateFunction {
        name: String,
        first: String,
        second: String,
    },
}

/// Whole-application view: parsed units, navigation edges, the global
/// function table, and include-connected scope groups.
#[derive(Debug)]
pub struct ProgramModel {
    pub units: BTreeMap<String, SourceUnit>,
    pub edges: Vec<NavEdge>,
    pub dangling: Vec<DanglingEdge>,
    pub functions: BTreeMap<String, FunctionSite>,
    scope_rep: BTreeMap<String, String>,
}

impl ProgramModel {
    pub fn unit(&self, path: &str) -> Option<&SourceUnit> {
        self.units.get(path)
    }

    pub fn function_def(&self, name: &str) -> Option<(&str, &FunctionDef)> {
        let site = self.functions.get(name)?;
        let unit = self.units.get(&site.path)?;
        Some((site.path.as_str(), &unit.functions[site.index]))
    }

    pub fn incoming<'a>(&'a self, path: &'a str) -> impl Iterator<Item = &'a NavEdge> + 'a {
        self.edges.iter().filter(move |e| e.to == path)
    }

    pub fn outgoing<'a>(&'a self, path: &'a str) -> impl Iterator<Item = &'a NavEdge> + 'a {
        self.edges.iter().filter(move |e| e.from == path)
    }

    /// Stable identifier for the include-connected group containing `path`.
    pub fn scope_key(&self, path: &str) -> String {
        self.scope_rep
            .get(path)
            .cloned()
            .unwrap_or_else(|| path.to_string())
    }

    /// Paths include-connected with `path` (its own group), including itself.
    pub fn scope_group<'a>(&'a self, path: &'a str) -> Vec<&'a str> {
        let rep = match self.scope_rep.get(path) {
            Some(r) => r,
            None => return vec![path],
        };
        self.scope_rep
            .iter()
            .filter(|(_, r)| *r == rep)
            .map(|(p, _)| p.as_str())
            .collect()
    }

    /// Constants defined anywhere in the include-connected group of `path`.
    /// Redirects start a fresh request, so they do not merge scopes.
    pub fn scope_constants(&self, path: &str) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for p in self.scope_group(path) {
            if let Some(unit) = self.units.get(p) {
                out.extend(unit.defined_constants.keys().cloned());
            }
        }
        out
    }
}

/// Parses every file, refines call kinds, resolves include/redirect targets
/// to corpus paths, and builds the function table.
pub fn build_program_model(
    files: &[(String, String)],
    cfg: &SinkConfig,
) -> Result<ProgramModel, ModelError> {
    let mut units = BTreeMap::new();
    for (path, content) in files {
        let mut unit = SourceUnit::parse(path, content);
        reclassify_unit(&mut unit, cfg);
        units.insert(path.clone(), unit);
    }

    let mut functions: BTreeMap<String, FunctionSite> = BTreeMap::new();
    for (path, unit) in &units {
        for (index, f) in unit.functions.iter().enumerate() {
            if let Some(prev) = functions.get(&f.name) {
                return Err(ModelError::DuplicateFunction {
                    name: f.name.clone(),
                    first: prev.path.clone(),
                    second: path.clone(),
                });
            }
            functions.insert(
                f.name.clone(),
                FunctionSite {
                    path: path.clone(),
                    index,
                },
            );
        }
    }

    let paths: BTreeSet<String> = units.keys().cloned().collect();
    let mut edges = Vec::new();
    let mut dangling = Vec::new();
    for (path, unit) in &units {
        let consts = unit.defined_constants.clone();
        for r in flatten(unit) {
            let Some(nav) = &r.stmt.nav_target else { continue };
            // Re-fold with the unit's full constant table; parse-time folding
            // only saw constants defined earlier in the file.
            let resolved = match r.stmt.kind {
                StmtKind::Include => r
                    .stmt
                    .exprs
                    .first()
                    .and_then(|e| e.fold(&consts))
                    .or_else(|| nav.resolved.clone()),
                _ => nav.resolved.clone(),
            };
            match resolved.and_then(|t| resolve_target(&t, path, &paths)) {
                Some(to) => edges.push(NavEdge {
                    from: path.clone(),
                    to,
                    line: r.stmt.line,
                    kind: nav.kind,
                }),
                None => dangling.push(DanglingEdge {
                    from: path.clone(),
                    line: r.stmt.line,
                    target_text: nav.raw.clone(),
                    kind: nav.kind,
                }),
            }
        }
    }
    edges.sort_by(|a, b| (&a.from, a.line).cmp(&(&b.from, b.line)));

    // Include-connected components share one constant scope.
    let mut parent: BTreeMap<String, String> =
        paths.iter().map(|p| (p.clone(), p.clone())).collect();
    fn find(parent: &mut BTreeMap<String, String>, x: &str) -> String {
        let p = parent[x].clone();
        if p == x {
            return p;
        }
        let root = find(parent, &p);
        parent.insert(x.to_string(), root.clone());
        root
    }
    for e in &edges {
        if e.kind == NavKind::Include {
            let ra = find(&mut parent, &e.from);
            let rb = find(&mut parent, &e.to);
            if ra != rb {
                parent.insert(rb, ra);
            }
        }
    }
    let scope_rep: BTreeMap<String, String> = paths
        .iter()
        .map(|p| (p.clone(), find(&mut parent, p)))
        .collect();

    Ok(ProgramModel {
        units,
        edges,
        dangling,
        functions,
        scope_rep,
    })
}

/// Maps a folded include/redirect target onto a corpus path: strip query and
/// fragment, try relative to the including file, then from the application
/// root, then a unique suffix match.
fn resolve_target(target: &str, from: &str, paths: &BTreeSet<String>) -> Option<String> {
    let mut t = target.trim();
    if let Some(i) = t.find(['?', '#']) {
        t = &t[..i];
    }
    // Absolute URLs navigate by path; other schemes leave the application.
    if let Some(rest) = t.strip_prefix("http://").or_else(|| t.strip_prefix("https://")) {
        t = rest.find('/').map(|i| &rest[i + 1..])?;
    } else if t.contains("://") {
        return None;
    }
    let t = t.trim_start_matches("./").trim_start_matches('/');
    if t.is_empty() {
        return None;
    }

    let from_dir = match from.rfind('/') {
        Some(i) => &from[..i],
        None => "",
    };
    let joined = normalize_path(&if from_dir.is_empty() {
        t.to_string()
    } else {
        format!("{from_dir}/{t}")
    });
    if paths.contains(&joined) {
        return Some(joined);
    }
    let rooted = normalize_path(t);
    if paths.contains(&rooted) {
        return Some(rooted);
    }
    let suffix: Vec<&String> = paths
        .iter()
        .filter(|p| p.as_str() == rooted || p.ends_with(&format!("/{rooted}")))
        .collect();
    if suffix.len() == 1 {
        return Some(suffix[0].clone());
    }
    None
}

/// Resolves `.` and `..` segments without touching the filesystem.
fn normalize_path(path: &str) -> String {
    let mut out: Vec<&str> = Vec::new();
    for seg in path.split('/') {
        match seg {
            "" | "." => {}
            ".." => {
                out.pop();
            }
            s => out.push(s),
        }
    }
    out.join("/")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(files: &[(&str, &str)]) -> ProgramModel {
        let files: Vec<(String, String)> = files
            .iter()
            .map(|(p, c)| (p.to_string(), c.to_string()))
            .collect();
        build_program_model(&files, &SinkConfig::default_config()).unwrap()
    }

    #[test]
    fn include_edge_resolves_relative_to_includer() {
        let m = model(&[
            ("admin.php", "<?php include 'data/inc/files.php';"),
            ("data/inc/files.php", "<?php echo 'x';"),
        ]);
        assert_eq!(m.edges.len(), 1);
        assert_eq!(m.edges[0].to, "data/inc/files.php");
        assert_eq!(m.edges[0].kind, NavKind::Include);
    }

    #[test]
    fn unresolvable_include_becomes_dangling() {
        let m = model(&[("a.php", "<?php include $_GET['page'] . '.php';")]);
        assert!(m.edges.is_empty());
        assert_eq!(m.dangling.len(), 1);
        assert!(m.dangling[0].target_text.contains("_GET"));
    }

    #[test]
    fn scope_constants_cross_include_but_not_redirect() {
        let m = model(&[
            (
                "entry.php",
                "<?php define('APP_RUNNING', true); include 'inner.php';",
            ),
            ("inner.php", "<?php echo 'x';"),
            ("other.php", "<?php header('Location: entry.php');"),
        ]);
        assert!(m.scope_constants("inner.php").contains("APP_RUNNING"));
        assert!(!m.scope_constants("other.php").contains("APP_RUNNING"));
    }

    #[test]
    fn taxonomy_reclassifies_calls_at_depth() {
        let m = model(&[(
            "a.php",
            "<?php if ($x) { move_uploaded_file($a, $b); } exec($c); execute_query($q);",
        )]);
        let unit = m.unit("a.php").unwrap();
        let kinds: Vec<StmtKind> = flatten(unit).iter().map(|r| r.stmt.kind).collect();
        assert!(kinds.contains(&StmtKind::FileMove));
        assert!(kinds.contains(&StmtKind::SysExec));
        assert!(kinds.contains(&StmtKind::SqlExec));
    }

    #[test]
    fn duplicate_function_names_both_sites() {
        let files = vec![
            ("a.php".to_string(), "<?php function f() { return 1; }".to_string()),
            ("b.php".to_string(), "<?php function f() { return 2; }".to_string()),
        ];
        let err = build_program_model(&files, &SinkConfig::default_config()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("a.php") && msg.contains("b.php"));
    }

    #[test]
    fn state_changing_patterns_support_suffix_wildcard() {
        let cfg = SinkConfig::default_config();
        assert!(cfg.is_state_changing("execute_query"));
        assert!(cfg.is_state_changing("delete_user"));
        assert!(cfg.is_state_changing("clear_statistics"));
        assert!(!cfg.is_state_changing("fetch_rows"));
    }

    #[test]
    fn line_owner_accounting_flags_unclaimed_lines() {
        let unit = SourceUnit::parse(
            "t.php",
            "<?php\n$a = 1;\n\n// comment\necho $a;\n?>\n",
        );
        assert!(unit
            .warnings
            .iter()
            .all(|w| !w.contains("not owned")));
        assert_eq!(unit.line_owners[1], LineOwner::Code);
        assert_eq!(unit.line_owners[2], LineOwner::Trivia);
    }
}
