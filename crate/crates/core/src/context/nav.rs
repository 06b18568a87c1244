//! Entry-point discovery and navigation-chain extraction: which file an
//! unauthenticated request can hit directly, and how execution travels from
//! there to the file containing the sink.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::php::expr::satisfiable;
use crate::php::{flatten, NavEdge, ProgramModel, SourceUnit, StmtKind};

use super::taint::{is_early_exit_stmt, straight_line_env, GuardObligation};
use super::{ContextError, ContextPart};

/// A file is public when a direct request survives every top-level
/// early-exit guard. Constants from would-be includers do not count: a
/// direct request runs the file alone.
pub fn is_public(unit: &SourceUnit) -> bool {
    let own_consts: BTreeSet<String> = unit.defined_constants.keys().cloned().collect();
    for r in flatten(unit) {
        if r.in_function.is_some() || !r.guards.is_empty() {
            continue;
        }
        let stmt = r.stmt;
        if stmt.kind == StmtKind::If && is_early_exit_stmt(stmt) {
            let Some(pred) = &stmt.predicate else { continue };
            let env = straight_line_env(unit, stmt.line, own_consts.clone());
            if !satisfiable(pred, false, &env).satisfiable {
                return false;
            }
        }
    }
    true
}

/// One traversed edge of the chain.
#[derive(Debug, Clone)]
pub struct NavHop {
    pub from: String,
    pub to: String,
    pub line: u32,
    /// Raw source of the include/redirect statement line.
    pub code: String,
}

#[derive(Debug, Clone)]
pub struct NavOutcome {
    /// File paths from the public entry to the sink file, inclusive.
    pub chain: Vec<String>,
    pub hops: Vec<NavHop>,
    /// Guards controlling the traversed edges (enclosing wants plus early
    /// exits above each edge).
    pub guards: Vec<GuardObligation>,
    /// Request parameters that steer execution down the chain.
    pub path_constraints: Vec<(String, String)>,
    pub entry_url: String,
}

/// Shortest include/redirect path from any public file to `sink_path`,
/// ties broken lexicographically.
pub fn extract_navigation(
    model: &ProgramModel,
    sink_path: &str,
    base_url: &str,
) -> Result<NavOutcome, ContextError> {
    // Distance from every node to the sink, walking edges backwards.
    let mut dist: BTreeMap<&str, usize> = BTreeMap::new();
    dist.insert(sink_path, 0);
    let mut queue: VecDeque<&str> = VecDeque::new();
    queue.push_back(sink_path);
    while let Some(cur) = queue.pop_front() {
        let d = dist[cur];
        for e in model.edges.iter().filter(|e| e.to == cur) {
            if !dist.contains_key(e.from.as_str()) {
                dist.insert(&e.from, d + 1);
                queue.push_back(&e.from);
            }
        }
    }

    let entry = model
        .units
        .iter()
        .filter(|(p, u)| dist.contains_key(p.as_str()) && is_public(u))
        .min_by_key(|(p, _)| (dist[p.as_str()], p.as_str()))
        .map(|(p, _)| p.clone());

    let Some(entry) = entry else {
        let mut detail = format!("no public file reaches {sink_path}");
        if !model.dangling.is_empty() {
            let edges: Vec<String> = model
                .dangling
                .iter()
                .map(|d| format!("{}:{} -> {}", d.from, d.line, d.target_text))
                .collect();
            detail.push_str(&format!(
                "; unresolved navigation edges: [{}]",
                edges.join(", ")
            ));
        }
        return Err(ContextError::NotFound {
            what: ContextPart::Navigation,
            detail,
        });
    };

    // Forward reconstruction entry -> sink along strictly decreasing distance.
    let mut chain = vec![entry.clone()];
    let mut hops: Vec<NavHop> = Vec::new();
    let mut cur = entry.clone();
    while cur != sink_path {
        let d = dist[cur.as_str()];
        let next: Option<&NavEdge> = model
            .edges
            .iter()
            .filter(|e| e.from == cur && dist.get(e.to.as_str()) == Some(&(d - 1)))
            .min_by_key(|e| (e.to.clone(), e.line));
        let Some(edge) = next else { break };
        let unit = &model.units[&edge.from];
        hops.push(NavHop {
            from: edge.from.clone(),
            to: edge.to.clone(),
            line: edge.line,
            code: unit.line_text(edge.line).to_string(),
        });
        chain.push(edge.to.clone());
        cur = edge.to.clone();
    }

    // Guards per hop: the edge statement's enclosing ifs (want = branch
    // taken) and top-level early exits above the edge line. Constants
    // accumulate along the chain: files already traversed have run.
    let mut guards: Vec<GuardObligation> = Vec::new();
    let mut path_constraints: Vec<(String, String)> = Vec::new();
    let mut known_consts: BTreeSet<String> = BTreeSet::new();
    for hop in &hops {
        let unit = &model.units[&hop.from];
        known_consts.extend(unit.defined_constants.keys().cloned());
        for r in flatten(unit) {
            if r.in_function.is_some() {
                continue;
            }
            let stmt = r.stmt;
            let is_edge_stmt = stmt.line == hop.line && stmt.nav_target.is_some();
            if is_edge_stmt {
                for g in &r.guards {
                    push_guard(
                        &mut guards,
                        &mut path_constraints,
                        unit,
                        &hop.from,
                        g.guard,
                        g.branch_taken,
                        &known_consts,
                    );
                }
            }
            if r.guards.is_empty()
                && stmt.kind == StmtKind::If
                && is_early_exit_stmt(stmt)
                && stmt.line < hop.line
            {
                push_guard(
                    &mut guards,
                    &mut path_constraints,
                    unit,
                    &hop.from,
                    stmt,
                    false,
                    &known_consts,
                );
            }
        }
    }
    guards.dedup_by_key(|g| (g.path.clone(), g.line, g.want));
    path_constraints.dedup();

    let entry_url = join_url(base_url, &entry);

    Ok(NavOutcome {
        chain,
        hops,
        guards,
        path_constraints,
        entry_url,
    })
}

fn push_guard(
    guards: &mut Vec<GuardObligation>,
    constraints: &mut Vec<(String, String)>,
    unit: &SourceUnit,
    path: &str,
    stmt: &crate::php::Stmt,
    want: bool,
    known_consts: &BTreeSet<String>,
) {
    if guards.iter().any(|g| g.path == path && g.line == stmt.line && g.want == want) {
        return;
    }
    let ob = GuardObligation {
        path: path.to_string(),
        line: stmt.line,
        end_line: stmt.end_line,
        pred_text: stmt.pred_text.clone().unwrap_or_default(),
        pred: stmt
            .predicate
            .clone()
            .unwrap_or(crate::php::expr::Expr::Opaque(String::new())),
        want,
    };
    let env = straight_line_env(unit, stmt.line, known_consts.clone());
    let sat = satisfiable(&ob.pred, ob.want, &env);
    for pair in sat.constraints {
        if !constraints.contains(&pair) {
            constraints.push(pair);
        }
    }
    guards.push(ob);
}

/// `base_url` + file path; a missing trailing slash on the base must not
/// swallow its last segment.
pub fn join_url(base_url: &str, path: &str) -> String {
    let normalized = if base_url.ends_with('/') {
        base_url.to_string()
    } else {
        format!("{base_url}/")
    };
    match url::Url::parse(&normalized).and_then(|u| u.join(path)) {
        Ok(u) => u.to_string(),
        Err(_) => format!("{normalized}{path}"),
    }
}
