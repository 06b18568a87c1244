//! Expression layer: a small AST recovered from token slices, plus the three
//! consumers that need it — variable-reference harvesting, constant folding
//! (include targets), and guard satisfiability for reachability questions
//! ("can a request make this predicate true?").

use std::collections::{BTreeMap, BTreeSet};

use super::lexer::{Tok, TokKind};
use super::{StrPart, VarRef, REQUEST_SUPERGLOBALS};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Str(Vec<StrPart>),
    Num(String),
    Const(String),
    Var { name: String, line: u32 },
    Index { base: Box<Expr>, index: Option<Box<Expr>> },
    Prop { base: Box<Expr>, name: String },
    Call { callee: String, recv: Option<Box<Expr>>, args: Vec<Expr>, line: u32 },
    Array(Vec<Expr>),
    Unary { op: String, operand: Box<Expr> },
    Binary { op: String, lhs: Box<Expr>, rhs: Box<Expr> },
    Ternary { cond: Box<Expr>, then: Option<Box<Expr>>, els: Box<Expr> },
    /// Residue the subset grammar gave up on; raw text retained.
    Opaque(String),
}

#[derive(Debug, Clone)]
pub struct CallView {
    pub callee: String,
    pub line: u32,
    pub arg_count: usize,
}

impl Expr {
    pub fn collect_reads(&self, out: &mut Vec<VarRef>) {
        match self {
            Expr::Var { name, line } => out.push(VarRef {
                name: name.clone(),
                index: None,
                line: *line,
            }),
            Expr::Index { base, index } => {
                if let Expr::Var { name, line } = base.as_ref() {
                    out.push(VarRef {
                        name: name.clone(),
                        index: index.as_deref().and_then(fold_index_key),
                        line: *line,
                    });
                } else {
                    base.collect_reads(out);
                }
                if let Some(index) = index {
                    if !matches!(index.as_ref(), Expr::Str(_) | Expr::Num(_)) {
                        index.collect_reads(out);
                    }
                }
            }
            Expr::Prop { base, .. } => base.collect_reads(out),
            Expr::Str(parts) => {
                for part in parts {
                    if let StrPart::Var { name, index } = part {
                        out.push(VarRef {
                            name: name.clone(),
                            index: index.clone(),
                            line: 0,
                        });
                    }
                }
            }
            Expr::Call { recv, args, .. } => {
                if let Some(recv) = recv {
                    recv.collect_reads(out);
                }
                for arg in args {
                    arg.collect_reads(out);
                }
            }
            Expr::Array(items) => {
                for item in items {
                    item.collect_reads(out);
                }
            }
            Expr::Unary { operand, .. } => operand.collect_reads(out),
            Expr::Binary { lhs, rhs, .. } => {
                lhs.collect_reads(out);
                rhs.collect_reads(out);
            }
            Expr::Ternary { cond, then, els } => {
                cond.collect_reads(out);
                if let Some(then) = then {
                    then.collect_reads(out);
                }
                els.collect_reads(out);
            }
            Expr::Num(_) | Expr::Const(_) | Expr::Opaque(_) => {}
        }
    }

    pub fn reads(&self) -> Vec<VarRef> {
        let mut out = Vec::new();
        self.collect_reads(&mut out);
        out
    }

    pub fn collect_calls(&self, out: &mut Vec<CallView>) {
        match self {
            Expr::Call {
                callee, args, line, recv, ..
            } => {
                out.push(CallView {
                    callee: callee.clone(),
                    line: *line,
                    arg_count: args.len(),
                });
                if let Some(recv) = recv {
                    recv.collect_calls(out);
                }
                for arg in args {
                    arg.collect_calls(out);
                }
            }
            Expr::Index { base, index } => {
                base.collect_calls(out);
                if let Some(i) = index {
                    i.collect_calls(out);
                }
            }
            Expr::Prop { base, .. } => base.collect_calls(out),
            Expr::Array(items) => {
                for i in items {
                    i.collect_calls(out);
                }
            }
            Expr::Unary { operand, .. } => operand.collect_calls(out),
            Expr::Binary { lhs, rhs, .. } => {
                lhs.collect_calls(out);
                rhs.collect_calls(out);
            }
            Expr::Ternary { cond, then, els } => {
                cond.collect_calls(out);
                if let Some(t) = then {
                    t.collect_calls(out);
                }
                els.collect_calls(out);
            }
            _ => {}
        }
    }

    /// Constant string value, if the expression is literal text (possibly a
    /// concatenation and possibly via constants defined in the same file).
    pub fn fold(&self, consts: &BTreeMap<String, String>) -> Option<String> {
        match self {
            Expr::Str(parts) => {
                let mut out = String::new();
                for part in parts {
                    match part {
                        StrPart::Lit(s) => out.push_str(s),
                        StrPart::Var { .. } => return None,
                    }
                }
                Some(out)
            }
            Expr::Num(n) => Some(n.clone()),
            Expr::Const(name) => match name.as_str() {
                "true" | "TRUE" => Some("1".to_string()),
                "false" | "FALSE" | "null" | "NULL" => Some(String::new()),
                _ => consts.get(name).cloned(),
            },
            Expr::Binary { op, lhs, rhs } if op == "." => {
                Some(format!("{}{}", lhs.fold(consts)?, rhs.fold(consts)?))
            }
            _ => None,
        }
    }

    /// Flattens strings and concatenations into literal/variable parts.
    /// `None` when a non-template operand (call, arithmetic) appears.
    pub fn template(&self) -> Option<Vec<StrPart>> {
        match self {
            Expr::Str(parts) => Some(parts.clone()),
            Expr::Num(n) => Some(vec![StrPart::Lit(n.clone())]),
            Expr::Var { name, .. } => Some(vec![StrPart::Var {
                name: name.clone(),
                index: None,
            }]),
            Expr::Index { base, index } => {
                if let Expr::Var { name, .. } = base.as_ref() {
                    Some(vec![StrPart::Var {
                        name: name.clone(),
                        index: index.as_deref().and_then(fold_index_key),
                    }])
                } else {
                    None
                }
            }
            Expr::Binary { op, lhs, rhs } if op == "." => {
                let mut parts = lhs.template()?;
                parts.extend(rhs.template()?);
                Some(parts)
            }
            _ => None,
        }
    }

    /// The expression as a single variable reference, when it is one.
    pub fn as_var_ref(&self) -> Option<VarRef> {
        match self {
            Expr::Var { name, line } => Some(VarRef {
                name: name.clone(),
                index: None,
                line: *line,
            }),
            Expr::Index { base, index } => match base.as_ref() {
                Expr::Var { name, line } => Some(VarRef {
                    name: name.clone(),
                    index: index.as_deref().and_then(fold_index_key),
                    line: *line,
                }),
                _ => None,
            },
            _ => None,
        }
    }
}

fn fold_index_key(index: &Expr) -> Option<String> {
    match index {
        Expr::Str(parts) => match parts.as_slice() {
            [] => Some(String::new()),
            [StrPart::Lit(s)] => Some(s.clone()),
            _ => None,
        },
        Expr::Num(n) => Some(n.clone()),
        Expr::Const(c) => Some(c.clone()),
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

pub fn parse_expr(toks: &[Tok], src: &str) -> Expr {
    if toks.is_empty() {
        return Expr::Opaque(String::new());
    }
    let mut p = P { toks, pos: 0, src };
    let expr = p.assign();
    if p.pos < toks.len() {
        // Unconsumed residue means the grammar did not cover this expression;
        // degrade to opaque with full raw text so nothing is silently lost.
        return Expr::Opaque(raw(toks, src));
    }
    expr
}

pub fn raw(toks: &[Tok], src: &str) -> String {
    if toks.is_empty() {
        return String::new();
    }
    let start = toks[0].start;
    let end = toks[toks.len() - 1].end;
    src.get(start..end).unwrap_or_default().to_string()
}

/// Short label for an expression, for diagnostics.
pub fn describe(expr: &Expr) -> String {
    match expr {
        Expr::Opaque(text) => format!("opaque expression `{text}`"),
        Expr::Prop { name, .. } => format!("property access `->{name}`"),
        Expr::Call { callee, .. } => format!("call to `{callee}`"),
        Expr::Var { name, .. } => format!("variable `${name}`"),
        other => format!("{other:?}"),
    }
}

struct P<'a> {
    toks: &'a [Tok],
    pos: usize,
    src: &'a str,
}

impl<'a> P<'a> {
    fn peek(&self) -> Option<&TokKind> {
        self.toks.get(self.pos).map(|t| &t.kind)
    }

    fn bump(&mut self) -> &Tok {
        let t = &self.toks[self.pos];
        self.pos += 1;
        t
    }

    fn eat_op(&mut self, ops: &[&str]) -> Option<String> {
        match self.peek() {
            Some(TokKind::Op(o)) if ops.contains(o) => {
                let o = o.to_string();
                self.pos += 1;
                Some(o)
            }
            Some(TokKind::Ident(w))
                if (w == "or" && ops.contains(&"||"))
                    || (w == "and" && ops.contains(&"&&"))
                    || (w == "xor" && ops.contains(&"||")) =>
            {
                let mapped = if w == "and" { "&&" } else { "||" };
                self.pos += 1;
                Some(mapped.to_string())
            }
            _ => None,
        }
    }

    fn assign(&mut self) -> Expr {
        let lhs = self.ternary();
        if let Some(op) = self.eat_op(&["=", ".=", "+=", "-=", "*=", "/=", "%=", "??"]) {
            let rhs = self.assign();
            return Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        lhs
    }

    fn ternary(&mut self) -> Expr {
        let cond = self.or();
        if self.eat_op(&["?"]).is_some() {
            let then = if matches!(self.peek(), Some(TokKind::Op(":"))) {
                None
            } else {
                Some(Box::new(self.or()))
            };
            let _ = self.eat_op(&[":"]);
            let els = Box::new(self.ternary());
            return Expr::Ternary {
                cond: Box::new(cond),
                then,
                els,
            };
        }
        cond
    }

    fn or(&mut self) -> Expr {
        let mut lhs = self.and();
        while let Some(op) = self.eat_op(&["||"]) {
            let rhs = self.and();
            lhs = Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        lhs
    }

    fn and(&mut self) -> Expr {
        let mut lhs = self.cmp();
        while let Some(op) = self.eat_op(&["&&"]) {
            let rhs = self.cmp();
            lhs = Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        lhs
    }

    fn cmp(&mut self) -> Expr {
        let lhs = self.additive();
        if let Some(op) =
            self.eat_op(&["===", "!==", "==", "!=", "<>", "<=", ">=", "<", ">", "<=>"])
        {
            let rhs = self.additive();
            return Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        lhs
    }

    // PHP's historical precedence puts `.` with `+`/`-`; close enough here.
    fn additive(&mut self) -> Expr {
        let mut lhs = self.multiplicative();
        while let Some(op) = self.eat_op(&[".", "+", "-"]) {
            let rhs = self.multiplicative();
            lhs = Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        lhs
    }

    fn multiplicative(&mut self) -> Expr {
        let mut lhs = self.unary();
        while let Some(op) = self.eat_op(&["*", "/", "%"]) {
            let rhs = self.unary();
            lhs = Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        lhs
    }

    fn unary(&mut self) -> Expr {
        if let Some(op) = self.eat_op(&["!", "-", "~", "@", "&"]) {
            let operand = self.unary();
            if op == "@" || op == "&" {
                return operand;
            }
            return Expr::Unary {
                op,
                operand: Box::new(operand),
            };
        }
        self.postfix()
    }

    fn postfix(&mut self) -> Expr {
        let mut expr = self.primary();
        loop {
            match self.peek() {
                Some(TokKind::OpenBracket) => {
                    self.bump();
                    let index = if matches!(self.peek(), Some(TokKind::CloseBracket)) {
                        None
                    } else {
                        Some(Box::new(self.assign()))
                    };
                    if matches!(self.peek(), Some(TokKind::CloseBracket)) {
                        self.bump();
                    }
                    expr = Expr::Index {
                        base: Box::new(expr),
                        index,
                    };
                }
                Some(TokKind::Op("->")) => {
                    self.bump();
                    let name = match self.peek() {
                        Some(TokKind::Ident(n)) => {
                            let n = n.clone();
                            self.bump();
                            n
                        }
                        _ => break,
                    };
                    if matches!(self.peek(), Some(TokKind::OpenParen)) {
                        let line = self.toks[self.pos].line;
                        let args = self.call_args();
                        expr = Expr::Call {
                            callee: name,
                            recv: Some(Box::new(expr)),
                            args,
                            line,
                        };
                    } else {
                        expr = Expr::Prop {
                            base: Box::new(expr),
                            name,
                        };
                    }
                }
                Some(TokKind::Op("++")) | Some(TokKind::Op("--")) => {
                    self.bump();
                }
                _ => break,
            }
        }
        expr
    }

    fn primary(&mut self) -> Expr {
        let Some(kind) = self.peek() else {
            return Expr::Opaque(String::new());
        };
        match kind.clone() {
            TokKind::Str(lit) => {
                self.bump();
                Expr::Str(lit.parts)
            }
            TokKind::Num(n) => {
                self.bump();
                Expr::Num(n)
            }
            TokKind::Var(name) => {
                let line = self.toks[self.pos].line;
                self.bump();
                Expr::Var { name, line }
            }
            TokKind::Ident(name) => {
                let line = self.toks[self.pos].line;
                self.bump();
                if name == "array" && matches!(self.peek(), Some(TokKind::OpenParen)) {
                    let items = self.call_args();
                    return Expr::Array(items);
                }
                // `new ClassName(...)` — the constructed object is opaque, but
                // argument reads still matter.
                if name == "new" {
                    if let Some(TokKind::Ident(_)) = self.peek() {
                        self.bump();
                        if matches!(self.peek(), Some(TokKind::OpenParen)) {
                            let args = self.call_args();
                            return Expr::Call {
                                callee: "new".to_string(),
                                recv: None,
                                args,
                                line,
                            };
                        }
                        return Expr::Opaque(format!("new {name}"));
                    }
                }
                // Static call: `Cls::method(...)`; the method name is what
                // sink matching keys on.
                if matches!(self.peek(), Some(TokKind::Op("::"))) {
                    self.bump();
                    if let Some(TokKind::Ident(m)) = self.peek() {
                        let m = m.clone();
                        self.bump();
                        if matches!(self.peek(), Some(TokKind::OpenParen)) {
                            let args = self.call_args();
                            return Expr::Call {
                                callee: m,
                                recv: None,
                                args,
                                line,
                            };
                        }
                        return Expr::Const(format!("{name}::{m}"));
                    }
                }
                if matches!(self.peek(), Some(TokKind::OpenParen)) {
                    let args = self.call_args();
                    return Expr::Call {
                        callee: name,
                        recv: None,
                        args,
                        line,
                    };
                }
                Expr::Const(name)
            }
            TokKind::OpenParen => {
                self.bump();
                // Cast syntax: `(int) $x` / `(string)$x`.
                if let Some(TokKind::Ident(cast)) = self.peek() {
                    let is_cast = matches!(
                        cast.as_str(),
                        "int" | "integer" | "string" | "float" | "double" | "bool" | "boolean" | "array"
                    );
                    if is_cast && matches!(self.toks.get(self.pos + 1).map(|t| &t.kind), Some(TokKind::CloseParen)) {
                        let cast = cast.clone();
                        self.bump();
                        self.bump();
                        let operand = self.unary();
                        return Expr::Call {
                            callee: format!("({cast})"),
                            recv: None,
                            args: vec![operand],
                            line: 0,
                        };
                    }
                }
                let inner = self.assign();
                if matches!(self.peek(), Some(TokKind::CloseParen)) {
                    self.bump();
                }
                inner
            }
            TokKind::OpenBracket => {
                self.bump();
                let mut items = Vec::new();
                loop {
                    match self.peek() {
                        None | Some(TokKind::CloseBracket) => {
                            if self.peek().is_some() {
                                self.bump();
                            }
                            break;
                        }
                        Some(TokKind::Comma) => {
                            self.bump();
                        }
                        _ => {
                            items.push(self.key_value());
                        }
                    }
                }
                Expr::Array(items)
            }
            other => {
                let fallback = format!("{other:?}");
                let t = self.bump();
                let (start, end) = (t.start, t.end);
                let text = self
                    .src
                    .get(start..end)
                    .map(|s| s.to_string())
                    .unwrap_or(fallback);
                Expr::Opaque(text)
            }
        }
    }

    /// One array element, tolerating `key => value` (the value side wins).
    fn key_value(&mut self) -> Expr {
        let first = self.ternary();
        if self.eat_op(&["=>"]).is_some() {
            return self.ternary();
        }
        first
    }

    fn call_args(&mut self) -> Vec<Expr> {
        // Caller guarantees an OpenParen is next.
        self.bump();
        let mut args = Vec::new();
        loop {
            match self.peek() {
                None => break,
                Some(TokKind::CloseParen) => {
                    self.bump();
                    break;
                }
                Some(TokKind::Comma) => {
                    self.bump();
                }
                _ => args.push(self.key_value()),
            }
        }
        args
    }
}

// ---------------------------------------------------------------------------
// Guard satisfiability
// ---------------------------------------------------------------------------

/// How a local variable's value relates to the incoming request.
#[derive(Debug, Clone, PartialEq)]
pub enum Deriv {
    /// Copied (possibly through value-preserving transforms) from a request
    /// parameter with this key.
    Request(String),
    /// Statically known constant value.
    Constant(String),
    Unknown,
}

#[derive(Debug, Default, Clone)]
pub struct PredEnv {
    pub vars: BTreeMap<String, Deriv>,
    /// Constants `define`d before the guard under analysis.
    pub consts: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SatOutcome {
    pub satisfiable: bool,
    /// Request parameters (key, value) that realize the wanted outcome.
    /// Values are representative picks, not the only possibilities.
    pub constraints: Vec<(String, String)>,
}

impl SatOutcome {
    fn no() -> Self {
        SatOutcome {
            satisfiable: false,
            constraints: Vec::new(),
        }
    }
    fn yes(constraints: Vec<(String, String)>) -> Self {
        SatOutcome {
            satisfiable: true,
            constraints,
        }
    }
}

enum Side {
    /// Attacker-controlled through a request parameter with this key.
    Ctrl(String),
    Lit(String),
    Unknown,
}

fn resolve_side(expr: &Expr, env: &PredEnv) -> Side {
    if let Some(key) = controllable_key(expr, env) {
        return Side::Ctrl(key);
    }
    match expr.fold(&BTreeMap::new()) {
        Some(v) => Side::Lit(v),
        None => match expr {
            Expr::Var { name, .. } => match env.vars.get(name) {
                Some(Deriv::Constant(v)) => Side::Lit(v.clone()),
                _ => Side::Unknown,
            },
            _ => Side::Unknown,
        },
    }
}

/// Request-parameter key when the expression's value is attacker-chosen.
/// Value-preserving transforms (trim, case changes, casts, strlen-style
/// measures) keep control.
pub fn controllable_key(expr: &Expr, env: &PredEnv) -> Option<String> {
    match expr {
        Expr::Index { base, index } => match base.as_ref() {
            Expr::Var { name, .. } if REQUEST_SUPERGLOBALS.contains(&name.as_str()) => {
                index.as_deref().and_then(fold_index_key)
            }
            // One nesting level covers `$_FILES['f']['name']`.
            Expr::Index {
                base: inner_base, index: inner_index,
            } => match inner_base.as_ref() {
                Expr::Var { name, .. } if REQUEST_SUPERGLOBALS.contains(&name.as_str()) => {
                    inner_index.as_deref().and_then(fold_index_key)
                }
                _ => None,
            },
            _ => None,
        },
        Expr::Var { name, .. } => match env.vars.get(name) {
            Some(Deriv::Request(key)) => Some(key.clone()),
            _ => None,
        },
        Expr::Call { callee, args, .. } => {
            let transparent = matches!(
                callee.as_str(),
                "trim" | "ltrim" | "rtrim" | "strtolower" | "strtoupper" | "strval"
                    | "(string)" | "(int)" | "(integer)" | "strlen" | "count" | "intval"
                    | "urldecode" | "rawurldecode" | "stripslashes"
            );
            if transparent {
                args.first().and_then(|a| controllable_key(a, env))
            } else {
                None
            }
        }
        _ => None,
    }
}

/// Can a request make `expr` evaluate to `want`? Conservative: anything the
/// engine cannot reason about is unsatisfiable, so reachability claims only
/// rest on understood guards.
pub fn satisfiable(expr: &Expr, want: bool, env: &PredEnv) -> SatOutcome {
    match expr {
        Expr::Unary { op, operand } if op == "!" => satisfiable(operand, !want, env),
        Expr::Binary { op, lhs, rhs } if op == "&&" => {
            if want {
                let l = satisfiable(lhs, true, env);
                let r = satisfiable(rhs, true, env);
                if l.satisfiable && r.satisfiable {
                    let mut c = l.constraints;
                    c.extend(r.constraints);
                    SatOutcome::yes(c)
                } else {
                    SatOutcome::no()
                }
            } else {
                let l = satisfiable(lhs, false, env);
                if l.satisfiable {
                    return l;
                }
                satisfiable(rhs, false, env)
            }
        }
        Expr::Binary { op, lhs, rhs } if op == "||" => {
            if want {
                let l = satisfiable(lhs, true, env);
                if l.satisfiable {
                    return l;
                }
                satisfiable(rhs, true, env)
            } else {
                let l = satisfiable(lhs, false, env);
                let r = satisfiable(rhs, false, env);
                if l.satisfiable && r.satisfiable {
                    let mut c = l.constraints;
                    c.extend(r.constraints);
                    SatOutcome::yes(c)
                } else {
                    SatOutcome::no()
                }
            }
        }
        Expr::Binary { op, lhs, rhs } => sat_cmp(op, lhs, rhs, want, env),
        Expr::Call { callee, args, .. } => sat_call(callee, args, want, env),
        _ => sat_truthy(expr, want, env),
    }
}

fn sat_cmp(op: &str, lhs: &Expr, rhs: &Expr, want: bool, env: &PredEnv) -> SatOutcome {
    let eq_like = matches!(op, "==" | "===");
    let ne_like = matches!(op, "!=" | "!==" | "<>");
    let rel = matches!(op, "<" | ">" | "<=" | ">=");
    if !(eq_like || ne_like || rel) {
        return SatOutcome::no();
    }
    // Normalize != to ==-with-flipped-want.
    let (eq, want) = if ne_like { (true, !want) } else { (eq_like, want) };

    let l = resolve_side(lhs, env);
    let r = resolve_side(rhs, env);
    if rel {
        return match (&l, &r) {
            (Side::Ctrl(k), Side::Lit(_)) | (Side::Lit(_), Side::Ctrl(k)) => {
                // A numeric request value exists on either side of any
                // relational bound.
                SatOutcome::yes(if want { vec![(k.clone(), "1".to_string())] } else { Vec::new() })
            }
            (Side::Lit(a), Side::Lit(b)) => {
                let outcome = compare_rel(op, a, b);
                if outcome == want {
                    SatOutcome::yes(Vec::new())
                } else {
                    SatOutcome::no()
                }
            }
            _ => SatOutcome::no(),
        };
    }
    debug_assert!(eq);
    match (l, r) {
        (Side::Ctrl(k), Side::Lit(v)) | (Side::Lit(v), Side::Ctrl(k)) => {
            if want {
                SatOutcome::yes(vec![(k, v)])
            } else {
                // Pick any different value; no constraint worth recording.
                SatOutcome::yes(Vec::new())
            }
        }
        (Side::Ctrl(k1), Side::Ctrl(k2)) => {
            if want && k1 != k2 {
                SatOutcome::yes(vec![(k1, "1".to_string()), (k2, "1".to_string())])
            } else if want {
                SatOutcome::yes(Vec::new())
            } else if k1 != k2 {
                SatOutcome::yes(Vec::new())
            } else {
                SatOutcome::no()
            }
        }
        (Side::Lit(a), Side::Lit(b)) => {
            if (loose_eq(&a, &b)) == want {
                SatOutcome::yes(Vec::new())
            } else {
                SatOutcome::no()
            }
        }
        _ => SatOutcome::no(),
    }
}

fn sat_call(callee: &str, args: &[Expr], want: bool, env: &PredEnv) -> SatOutcome {
    match callee {
        "isset" => {
            let mut constraints = Vec::new();
            for arg in args {
                match controllable_key(arg, env) {
                    Some(k) => constraints.push((k, "1".to_string())),
                    None => return SatOutcome::no(),
                }
            }
            if want {
                SatOutcome::yes(constraints)
            } else {
                // Omitting the parameter unsets it.
                SatOutcome::yes(Vec::new())
            }
        }
        "empty" => match args.first().and_then(|a| controllable_key(a, env)) {
            Some(k) => {
                if want {
                    SatOutcome::yes(Vec::new())
                } else {
                    SatOutcome::yes(vec![(k, "1".to_string())])
                }
            }
            None => SatOutcome::no(),
        },
        "defined" => {
            let name = args.first().and_then(|a| a.fold(&BTreeMap::new()));
            match name {
                Some(name) => {
                    let defined = env.consts.contains(&name);
                    if defined == want {
                        SatOutcome::yes(Vec::new())
                    } else {
                        SatOutcome::no()
                    }
                }
                None => SatOutcome::no(),
            }
        }
        "in_array" => {
            let needle = args.first();
            let hay = args.get(1);
            let key = needle.and_then(|n| controllable_key(n, env));
            let items: Option<Vec<String>> = match hay {
                Some(Expr::Array(items)) => items
                    .iter()
                    .map(|i| i.fold(&BTreeMap::new()))
                    .collect(),
                Some(Expr::Var { name, .. }) => match env.vars.get(name) {
                    // Arrays aren't tracked as derivations; give up.
                    Some(_) | None => None,
                },
                _ => None,
            };
            match (key, items) {
                (Some(k), Some(items)) => {
                    if want {
                        match items.first() {
                            Some(first) => SatOutcome::yes(vec![(k, first.clone())]),
                            None => SatOutcome::no(),
                        }
                    } else {
                        SatOutcome::yes(Vec::new())
                    }
                }
                (Some(k), None) => {
                    // Unknown haystack: assume avoidable, not hittable.
                    if want {
                        SatOutcome::no()
                    } else {
                        let _ = k;
                        SatOutcome::yes(Vec::new())
                    }
                }
                _ => SatOutcome::no(),
            }
        }
        "is_numeric" | "ctype_digit" | "is_string" | "ctype_alnum" => {
            match args.first().and_then(|a| controllable_key(a, env)) {
                Some(k) => {
                    if want {
                        SatOutcome::yes(vec![(k, "1".to_string())])
                    } else {
                        SatOutcome::yes(Vec::new())
                    }
                }
                None => SatOutcome::no(),
            }
        }
        "function_exists" | "file_exists" | "is_file" | "is_dir" => SatOutcome::no(),
        _ => SatOutcome::no(),
    }
}

fn sat_truthy(expr: &Expr, want: bool, env: &PredEnv) -> SatOutcome {
    match resolve_side(expr, env) {
        Side::Ctrl(k) => {
            if want {
                SatOutcome::yes(vec![(k, "1".to_string())])
            } else {
                SatOutcome::yes(Vec::new())
            }
        }
        Side::Lit(v) => {
            let truthy = !v.is_empty() && v != "0";
            if truthy == want {
                SatOutcome::yes(Vec::new())
            } else {
                SatOutcome::no()
            }
        }
        Side::Unknown => SatOutcome::no(),
    }
}

pub fn loose_eq(a: &str, b: &str) -> bool {
    if let (Ok(x), Ok(y)) = (a.parse::<f64>(), b.parse::<f64>()) {
        return x == y;
    }
    a == b
}

fn compare_rel(op: &str, a: &str, b: &str) -> bool {
    let ord = match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) => x.partial_cmp(&y),
        _ => a.partial_cmp(b),
    };
    let Some(ord) = ord else { return false };
    match op {
        "<" => ord.is_lt(),
        ">" => ord.is_gt(),
        "<=" => ord.is_le(),
        ">=" => ord.is_ge(),
        _ => false,
    }
}
