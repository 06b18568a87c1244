//! Deterministic evaluator for single-file harness programs. Covers the
//! statement and builtin surface a validation harness needs: straight-line
//! code, guards, user functions, string builtins, and echo output. Loops,
//! includes, and unknown callees are refused rather than approximated, so a
//! harness that strays outside the subset fails loudly instead of lying.

use std::collections::BTreeMap;

use thiserror::Error;

use super::expr::Expr;
use super::{SourceUnit, Stmt, StmtKind, StrPart};

const STEP_LIMIT: usize = 100_000;
const CALL_DEPTH_LIMIT: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Str(String),
    Arr(BTreeMap<String, Value>),
    Bool(bool),
    Null,
}

impl Value {
    pub fn str(s: impl Into<String>) -> Value {
        Value::Str(s.into())
    }

    /// Positional array from string items, keyed "0", "1", ...
    pub fn list(items: &[&str]) -> Value {
        Value::Arr(
            items
                .iter()
                .enumerate()
                .map(|(i, s)| (i.to_string(), Value::str(*s)))
                .collect(),
        )
    }

    pub fn as_str(&self) -> String {
        match self {
            Value::Str(s) => s.clone(),
            Value::Bool(true) => "1".to_string(),
            Value::Bool(false) => String::new(),
            Value::Null => String::new(),
            Value::Arr(_) => "Array".to_string(),
        }
    }

    pub fn truthy(&self) -> bool {
        match self {
            Value::Str(s) => !s.is_empty() && s != "0",
            Value::Bool(b) => *b,
            Value::Null => false,
            Value::Arr(m) => !m.is_empty(),
        }
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("step limit exceeded")]
    StepLimit,
    #[error("call depth limit exceeded in `{name}`")]
    CallDepth { name: String },
    #[error("line {line}: unsupported construct: {what}")]
    Unsupported { line: u32, what: String },
    #[error("line {line}: call to unknown function `{name}`")]
    UnknownFunction { line: u32, name: String },
}

#[derive(Debug)]
pub struct EvalOutcome {
    pub stdout: String,
    pub exited: bool,
}

enum Flow {
    Normal,
    Return(Value),
    Exited,
}

/// Runs a parsed unit with the given superglobal bindings (e.g. "_GET" to an
/// array value) and returns everything it printed.
pub fn run(unit: &SourceUnit, inputs: BTreeMap<String, Value>) -> Result<EvalOutcome, EvalError> {
    let mut ev = Evaluator {
        unit,
        out: String::new(),
        steps: 0,
    };
    let mut globals = inputs;
    let flow = ev.exec_stmts(&unit.stmts, &mut globals, 0)?;
    Ok(EvalOutcome {
        stdout: ev.out,
        exited: matches!(flow, Flow::Exited),
    })
}

/// Parses `source` as a standalone program and runs it.
pub fn parse_and_run(
    source: &str,
    inputs: BTreeMap<String, Value>,
) -> Result<EvalOutcome, EvalError> {
    let unit = SourceUnit::parse("harness.php", source);
    run(&unit, inputs)
}

struct Evaluator<'a> {
    unit: &'a SourceUnit,
    out: String,
    steps: usize,
}

type Scope = BTreeMap<String, Value>;

impl<'a> Evaluator<'a> {
    fn tick(&mut self) -> Result<(), EvalError> {
        self.steps += 1;
        if self.steps > STEP_LIMIT {
            return Err(EvalError::StepLimit);
        }
        Ok(())
    }

    fn exec_stmts(&mut self, stmts: &[Stmt], scope: &mut Scope, depth: usize) -> Result<Flow, EvalError> {
        for stmt in stmts {
            match self.exec_stmt(stmt, scope, depth)? {
                Flow::Normal => {}
                other => return Ok(other),
            }
        }
        Ok(Flow::Normal)
    }

    fn exec_stmt(&mut self, stmt: &Stmt, scope: &mut Scope, depth: usize) -> Result<Flow, EvalError> {
        self.tick()?;
        match stmt.kind {
            StmtKind::Assign => {
                let rhs = stmt
                    .exprs
                    .first()
                    .map(|e| self.eval(e, scope, depth))
                    .transpose()?
                    .unwrap_or(Value::Null);
                let target = &stmt.writes[0];
                let value = if stmt.assign_op.as_deref() == Some(".=") {
                    let old = self.read_var(&target.name, target.index.as_deref(), scope);
                    Value::Str(old.as_str() + &rhs.as_str())
                } else {
                    rhs
                };
                self.write_var(&target.name, target.index.as_deref(), value, scope);
                Ok(Flow::Normal)
            }
            StmtKind::Echo => {
                for e in &stmt.exprs {
                    let v = self.eval(e, scope, depth)?;
                    self.out.push_str(&v.as_str());
                }
                Ok(Flow::Normal)
            }
            StmtKind::If => {
                let cond = match &stmt.predicate {
                    Some(p) => self.eval(p, scope, depth)?.truthy(),
                    None => false,
                };
                if cond {
                    self.exec_stmts(&stmt.body, scope, depth)
                } else {
                    self.exec_stmts(&stmt.else_body, scope, depth)
                }
            }
            StmtKind::Call | StmtKind::SqlExec | StmtKind::SysExec | StmtKind::FileMove => {
                for e in &stmt.exprs {
                    self.eval(e, scope, depth)?;
                }
                Ok(Flow::Normal)
            }
            StmtKind::Return => {
                let v = stmt
                    .exprs
                    .first()
                    .map(|e| self.eval(e, scope, depth))
                    .transpose()?
                    .unwrap_or(Value::Null);
                Ok(Flow::Return(v))
            }
            StmtKind::Exit => {
                if let Some(e) = stmt.exprs.first() {
                    let v = self.eval(e, scope, depth)?;
                    self.out.push_str(&v.as_str());
                }
                Ok(Flow::Exited)
            }
            StmtKind::Html => {
                if let Some(idx) = stmt.html_ref {
                    self.out.push_str(&self.unit.html_segments[idx].text);
                }
                Ok(Flow::Normal)
            }
            StmtKind::Loop | StmtKind::Include | StmtKind::Redirect => Err(EvalError::Unsupported {
                line: stmt.line,
                what: format!("{:?} statement", stmt.kind),
            }),
            StmtKind::Other => {
                // Globals declarations and opaque residue are no-ops here; a
                // block wrapper still executes its children.
                if !stmt.body.is_empty() {
                    return self.exec_stmts(&stmt.body, scope, depth);
                }
                Ok(Flow::Normal)
            }
        }
    }

    fn read_var(&self, name: &str, index: Option<&str>, scope: &Scope) -> Value {
        let base = match scope.get(name) {
            Some(v) => v.clone(),
            None => return Value::Null,
        };
        match index {
            None => base,
            Some(key) => match base {
                Value::Arr(m) => m.get(key).cloned().unwrap_or(Value::Null),
                _ => Value::Null,
            },
        }
    }

    fn write_var(&self, name: &str, index: Option<&str>, value: Value, scope: &mut Scope) {
        match index {
            None => {
                scope.insert(name.to_string(), value);
            }
            Some(key) => {
                let entry = scope
                    .entry(name.to_string())
                    .or_insert_with(|| Value::Arr(BTreeMap::new()));
                if !matches!(entry, Value::Arr(_)) {
                    *entry = Value::Arr(BTreeMap::new());
                }
                if let Value::Arr(m) = entry {
                    m.insert(key.to_string(), value);
                }
            }
        }
    }

    fn eval(&mut self, expr: &Expr, scope: &mut Scope, depth: usize) -> Result<Value, EvalError> {
        self.tick()?;
        match expr {
            Expr::Str(parts) => {
                let mut s = String::new();
                for p in parts {
                    match p {
                        StrPart::Lit(l) => s.push_str(l),
                        StrPart::Var { name, index } => {
                            s.push_str(&self.read_var(name, index.as_deref(), scope).as_str())
                        }
                    }
                }
                Ok(Value::Str(s))
            }
            Expr::Num(n) => Ok(Value::Str(n.clone())),
            Expr::Const(name) => Ok(match name.as_str() {
                "true" | "TRUE" | "True" => Value::Bool(true),
                "false" | "FALSE" | "False" => Value::Bool(false),
                "null" | "NULL" | "Null" => Value::Null,
                "PHP_EOL" => Value::str("\n"),
                other => match self.unit.defined_constants.get(other) {
                    Some(v) => Value::Str(v.clone()),
                    None => Value::Str(other.to_string()),
                },
            }),
            Expr::Var { name, .. } => Ok(self.read_var(name, None, scope)),
            Expr::Index { base, index } => {
                let base_v = self.eval(base, scope, depth)?;
                let key = match index {
                    Some(i) => self.eval(i, scope, depth)?.as_str(),
                    None => return Ok(Value::Null),
                };
                Ok(match base_v {
                    Value::Arr(m) => m.get(&key).cloned().unwrap_or(Value::Null),
                    Value::Str(s) => {
                        // String subscripts index bytes.
                        match key.parse::<usize>().ok().and_then(|i| s.as_bytes().get(i)) {
                            Some(b) => Value::Str((*b as char).to_string()),
                            None => Value::Null,
                        }
                    }
                    _ => Value::Null,
                })
            }
            Expr::Call { callee, args, line, .. } => self.call(callee, args, *line, scope, depth),
            Expr::Array(items) => {
                let mut m = BTreeMap::new();
                for (i, item) in items.iter().enumerate() {
                    m.insert(i.to_string(), self.eval(item, scope, depth)?);
                }
                Ok(Value::Arr(m))
            }
            Expr::Unary { op, operand } => {
                let v = self.eval(operand, scope, depth)?;
                Ok(match op.as_str() {
                    "!" => Value::Bool(!v.truthy()),
                    "-" => Value::Str(match v.as_str().parse::<i64>() {
                        Ok(n) => (-n).to_string(),
                        Err(_) => format!("-{}", v.as_str()),
                    }),
                    _ => v,
                })
            }
            Expr::Binary { op, lhs, rhs } => self.binary(op, lhs, rhs, scope, depth),
            Expr::Ternary { cond, then, els } => {
                let c = self.eval(cond, scope, depth)?;
                if c.truthy() {
                    match then {
                        Some(t) => self.eval(t, scope, depth),
                        None => Ok(c),
                    }
                } else {
                    self.eval(els, scope, depth)
                }
            }
            Expr::Prop { .. } | Expr::Opaque(_) => Err(EvalError::Unsupported {
                line: 0,
                what: crate::php::expr::describe(expr),
            }),
        }
    }

    fn binary(
        &mut self,
        op: &str,
        lhs: &Expr,
        rhs: &Expr,
        scope: &mut Scope,
        depth: usize,
    ) -> Result<Value, EvalError> {
        // Short-circuit forms evaluate the right side lazily.
        match op {
            "&&" | "and" => {
                let l = self.eval(lhs, scope, depth)?;
                if !l.truthy() {
                    return Ok(Value::Bool(false));
                }
                let r = self.eval(rhs, scope, depth)?;
                return Ok(Value::Bool(r.truthy()));
            }
            "||" | "or" => {
                let l = self.eval(lhs, scope, depth)?;
                if l.truthy() {
                    return Ok(Value::Bool(true));
                }
                let r = self.eval(rhs, scope, depth)?;
                return Ok(Value::Bool(r.truthy()));
            }
            "=" => {
                let v = self.eval(rhs, scope, depth)?;
                if let Some(r) = lhs.as_var_ref() {
                    self.write_var(&r.name, r.index.as_deref(), v.clone(), scope);
                }
                return Ok(v);
            }
            _ => {}
        }
        let l = self.eval(lhs, scope, depth)?;
        let r = self.eval(rhs, scope, depth)?;
        let ls = l.as_str();
        let rs = r.as_str();
        let nums = || -> Option<(i64, i64)> { Some((ls.trim().parse().ok()?, rs.trim().parse().ok()?)) };
        Ok(match op {
            "." => Value::Str(ls + &rs),
            "==" => Value::Bool(loose_eq_values(&l, &r)),
            "!=" | "<>" => Value::Bool(!loose_eq_values(&l, &r)),
            "===" => Value::Bool(l == r),
            "!==" => Value::Bool(l != r),
            "<" => Value::Bool(match nums() {
                Some((a, b)) => a < b,
                None => ls < rs,
            }),
            ">" => Value::Bool(match nums() {
                Some((a, b)) => a > b,
                None => ls > rs,
            }),
            "<=" => Value::Bool(match nums() {
                Some((a, b)) => a <= b,
                None => ls <= rs,
            }),
            ">=" => Value::Bool(match nums() {
                Some((a, b)) => a >= b,
                None => ls >= rs,
            }),
            "+" | "-" | "*" | "%" => {
                let (a, b) = nums().unwrap_or((0, 0));
                Value::Str(
                    match op {
                        "+" => a + b,
                        "-" => a - b,
                        "*" => a * b,
                        _ => {
                            if b == 0 {
                                0
                            } else {
                                a % b
                            }
                        }
                    }
                    .to_string(),
                )
            }
            "??" => {
                if matches!(l, Value::Null) {
                    r
                } else {
                    l
                }
            }
            _ => Value::Str(ls),
        })
    }

    fn call(
        &mut self,
        callee: &str,
        args: &[Expr],
        line: u32,
        scope: &mut Scope,
        depth: usize,
    ) -> Result<Value, EvalError> {
        // Existence-style special forms look at the argument, not its value.
        match callee {
            "isset" => {
                for a in args {
                    if !self.arg_is_set(a, scope, depth)? {
                        return Ok(Value::Bool(false));
                    }
                }
                return Ok(Value::Bool(true));
            }
            "empty" => {
                let set = args
                    .first()
                    .map(|a| self.arg_is_set(a, scope, depth))
                    .transpose()?
                    .unwrap_or(false);
                if !set {
                    return Ok(Value::Bool(true));
                }
                let v = self.eval(&args[0], scope, depth)?;
                return Ok(Value::Bool(!v.truthy()));
            }
            "defined" => {
                let name = args
                    .first()
                    .map(|a| self.eval(a, scope, depth))
                    .transpose()?
                    .map(|v| v.as_str())
                    .unwrap_or_default();
                return Ok(Value::Bool(self.unit.defined_constants.contains_key(&name)));
            }
            _ => {}
        }

        let mut vals = Vec::with_capacity(args.len());
        for a in args {
            vals.push(self.eval(a, scope, depth)?);
        }

        if let Some(v) = builtin(callee, &vals) {
            if callee == "printf" {
                self.out.push_str(&v.as_str());
                return Ok(Value::Bool(true));
            }
            return Ok(v);
        }

        if let Some(f) = self.unit.functions.iter().find(|f| f.name == callee) {
            if depth >= CALL_DEPTH_LIMIT {
                return Err(EvalError::CallDepth {
                    name: callee.to_string(),
                });
            }
            let mut frame: Scope = BTreeMap::new();
            for (i, p) in f.params.iter().enumerate() {
                frame.insert(p.clone(), vals.get(i).cloned().unwrap_or(Value::Null));
            }
            return match self.exec_stmts(&f.body, &mut frame, depth + 1)? {
                Flow::Return(v) => Ok(v),
                Flow::Exited => Err(EvalError::Unsupported {
                    line,
                    what: format!("exit inside function `{callee}`"),
                }),
                Flow::Normal => Ok(Value::Null),
            };
        }

        Err(EvalError::UnknownFunction {
            line,
            name: callee.to_string(),
        })
    }

    fn arg_is_set(&mut self, arg: &Expr, scope: &mut Scope, depth: usize) -> Result<bool, EvalError> {
        match arg {
            Expr::Var { name, .. } => Ok(!matches!(
                scope.get(name),
                None | Some(Value::Null)
            )),
            Expr::Index { base, index } => {
                let base_v = self.eval(base, scope, depth)?;
                let key = match index {
                    Some(i) => self.eval(i, scope, depth)?.as_str(),
                    None => return Ok(false),
                };
                Ok(match base_v {
                    Value::Arr(m) => !matches!(m.get(&key), None | Some(Value::Null)),
                    _ => false,
                })
            }
            other => {
                let v = self.eval(other, scope, depth)?;
                Ok(!matches!(v, Value::Null))
            }
        }
    }
}

fn loose_eq_values(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Bool(x), y) | (y, Value::Bool(x)) => *x == y.truthy(),
        (Value::Null, Value::Null) => true,
        (Value::Null, y) | (y, Value::Null) => y.as_str().is_empty(),
        _ => crate::php::expr::loose_eq(&a.as_str(), &b.as_str()),
    }
}

/// Pure string/array builtins; side-effect-free by construction. Unknown
/// names return None so the caller can try user functions or refuse.
fn builtin(name: &str, args: &[Value]) -> Option<Value> {
    let s = |i: usize| -> String { args.get(i).map(|v| v.as_str()).unwrap_or_default() };
    Some(match name {
        "trim" => Value::Str(trim_with(&s(0), args.get(1).map(|v| v.as_str()), true, true)),
        "ltrim" => Value::Str(trim_with(&s(0), args.get(1).map(|v| v.as_str()), true, false)),
        "rtrim" | "chop" => Value::Str(trim_with(&s(0), args.get(1).map(|v| v.as_str()), false, true)),
        "strtolower" => Value::Str(s(0).to_lowercase()),
        "strtoupper" => Value::Str(s(0).to_uppercase()),
        "strlen" => Value::Str(s(0).len().to_string()),
        "strval" => Value::Str(s(0)),
        "intval" => Value::Str(leading_int(&s(0)).to_string()),
        "ucfirst" => {
            let t = s(0);
            let mut c = t.chars();
            Value::Str(match c.next() {
                Some(f) => f.to_uppercase().collect::<String>() + c.as_str(),
                None => t,
            })
        }
        "str_replace" => {
            let subject = s(2);
            match (args.first(), args.get(1)) {
                (Some(Value::Arr(searches)), Some(rep)) => {
                    let mut out = subject;
                    for (i, needle) in searches.values().enumerate() {
                        let r = match rep {
                            Value::Arr(reps) => reps
                                .values()
                                .nth(i)
                                .map(|v| v.as_str())
                                .unwrap_or_default(),
                            other => other.as_str(),
                        };
                        out = out.replace(&needle.as_str(), &r);
                    }
                    Value::Str(out)
                }
                _ => Value::Str(subject.replace(&s(0), &s(1))),
            }
        }
        "htmlspecialchars" | "htmlentities" => {
            let mode = args.get(1).map(|v| v.as_str());
            let single_quotes = !matches!(mode.as_deref(), Some("ENT_COMPAT"));
            let mut out = String::new();
            for ch in s(0).chars() {
                match ch {
                    '&' => out.push_str("&amp;"),
                    '<' => out.push_str("&lt;"),
                    '>' => out.push_str("&gt;"),
                    '"' => out.push_str("&quot;"),
                    '\'' if single_quotes => out.push_str("&#039;"),
                    c => out.push(c),
                }
            }
            Value::Str(out)
        }
        "strip_tags" => {
            let mut out = String::new();
            let mut in_tag = false;
            for ch in s(0).chars() {
                match ch {
                    '<' => in_tag = true,
                    '>' if in_tag => in_tag = false,
                    c if !in_tag => out.push(c),
                    _ => {}
                }
            }
            Value::Str(out)
        }
        "addslashes" => {
            let mut out = String::new();
            for ch in s(0).chars() {
                match ch {
                    '\'' | '"' | '\\' => {
                        out.push('\\');
                        out.push(ch);
                    }
                    '\0' => out.push_str("\\0"),
                    c => out.push(c),
                }
            }
            Value::Str(out)
        }
        "stripslashes" => {
            let t = s(0);
            let mut out = String::new();
            let mut chars = t.chars();
            while let Some(ch) = chars.next() {
                if ch == '\\' {
                    if let Some(next) = chars.next() {
                        out.push(next);
                    }
                } else {
                    out.push(ch);
                }
            }
            Value::Str(out)
        }
        "urlencode" | "rawurlencode" => {
            let space_plus = name == "urlencode";
            let mut out = String::new();
            for b in s(0).bytes() {
                match b {
                    b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'_' | b'.' | b'~' => {
                        out.push(b as char)
                    }
                    b' ' if space_plus => out.push('+'),
                    _ => out.push_str(&format!("%{b:02X}")),
                }
            }
            Value::Str(out)
        }
        "urldecode" | "rawurldecode" => {
            let t = s(0);
            let bytes = t.as_bytes();
            let mut out = Vec::new();
            let mut i = 0;
            while i < bytes.len() {
                match bytes[i] {
                    b'%' if i + 2 < bytes.len() => {
                        match u8::from_str_radix(&t[i + 1..i + 3], 16) {
                            Ok(b) => {
                                out.push(b);
                                i += 3;
                            }
                            Err(_) => {
                                out.push(b'%');
                                i += 1;
                            }
                        }
                    }
                    b'+' if name == "urldecode" => {
                        out.push(b' ');
                        i += 1;
                    }
                    b => {
                        out.push(b);
                        i += 1;
                    }
                }
            }
            Value::Str(String::from_utf8_lossy(&out).into_owned())
        }
        "substr" => {
            let t = s(0);
            let start = leading_int(&s(1));
            let len = t.len() as i64;
            let begin = if start < 0 { (len + start).max(0) } else { start.min(len) } as usize;
            let end = match args.get(2) {
                Some(v) => {
                    let want = leading_int(&v.as_str());
                    if want < 0 {
                        ((len + want) as usize).max(begin)
                    } else {
                        (begin + want as usize).min(t.len())
                    }
                }
                None => t.len(),
            };
            Value::Str(t.get(begin..end).unwrap_or("").to_string())
        }
        "sprintf" => Value::Str(format_like(&s(0), &args[1..])),
        "printf" => Value::Str(format_like(&s(0), &args[1..])),
        "explode" => {
            let delim = s(0);
            let subject = s(1);
            if delim.is_empty() {
                return Some(Value::Bool(false));
            }
            Value::Arr(
                subject
                    .split(delim.as_str())
                    .enumerate()
                    .map(|(i, p)| (i.to_string(), Value::str(p)))
                    .collect(),
            )
        }
        "implode" | "join" => match (args.first(), args.get(1)) {
            (Some(Value::Arr(m)), None) => Value::Str(
                m.values().map(|v| v.as_str()).collect::<Vec<_>>().join(""),
            ),
            (Some(glue), Some(Value::Arr(m))) => Value::Str(
                m.values()
                    .map(|v| v.as_str())
                    .collect::<Vec<_>>()
                    .join(&glue.as_str()),
            ),
            _ => Value::Str(String::new()),
        },
        "end" => match args.first() {
            Some(Value::Arr(m)) => m.values().last().cloned().unwrap_or(Value::Bool(false)),
            _ => Value::Bool(false),
        },
        "count" | "sizeof" => match args.first() {
            Some(Value::Arr(m)) => Value::Str(m.len().to_string()),
            _ => Value::Str("1".to_string()),
        },
        "in_array" => {
            let needle = s(0);
            match args.get(1) {
                Some(Value::Arr(m)) => {
                    Value::Bool(m.values().any(|v| super::expr::loose_eq(&v.as_str(), &needle)))
                }
                _ => Value::Bool(false),
            }
        }
        "array_keys" => match args.first() {
            Some(Value::Arr(m)) => Value::Arr(
                m.keys()
                    .enumerate()
                    .map(|(i, k)| (i.to_string(), Value::str(k.clone())))
                    .collect(),
            ),
            _ => Value::Arr(BTreeMap::new()),
        },
        "basename" => {
            let t = s(0);
            Value::Str(
                t.trim_end_matches('/')
                    .rsplit('/')
                    .next()
                    .unwrap_or("")
                    .to_string(),
            )
        }
        "pathinfo" => {
            let t = s(0);
            let base = t.rsplit('/').next().unwrap_or("");
            let ext = base.rsplit_once('.').map(|(_, e)| e).unwrap_or("");
            match args.get(1).map(|v| v.as_str()) {
                Some(flag) if flag == "PATHINFO_EXTENSION" => Value::str(ext),
                _ => {
                    let mut m = BTreeMap::new();
                    m.insert("basename".to_string(), Value::str(base));
                    m.insert("extension".to_string(), Value::str(ext));
                    Value::Arr(m)
                }
            }
        }
        "strpos" => {
            let hay = s(0);
            let needle = s(1);
            match hay.find(&needle) {
                Some(i) => Value::Str(i.to_string()),
                None => Value::Bool(false),
            }
        }
        "str_contains" => Value::Bool(s(0).contains(&s(1))),
        "str_repeat" => Value::Str(s(0).repeat(leading_int(&s(1)).max(0) as usize)),
        "is_numeric" => Value::Bool({
            let t = s(0);
            let t = t.trim();
            !t.is_empty() && t.parse::<f64>().is_ok()
        }),
        "ctype_digit" => {
            let t = s(0);
            Value::Bool(!t.is_empty() && t.bytes().all(|b| b.is_ascii_digit()))
        }
        "ctype_alnum" => {
            let t = s(0);
            Value::Bool(!t.is_empty() && t.bytes().all(|b| b.is_ascii_alphanumeric()))
        }
        "is_string" => Value::Bool(matches!(args.first(), Some(Value::Str(_)))),
        "is_array" => Value::Bool(matches!(args.first(), Some(Value::Arr(_)))),
        "nl2br" => Value::Str(s(0).replace('\n', "<br />\n")),
        // Environment shims: harmless in a harness, never observable.
        "header" | "error_reporting" | "ini_set" | "session_start" | "ob_start" | "define"
        | "setcookie" => Value::Bool(true),
        _ => return None,
    })
}

fn trim_with(s: &str, charlist: Option<String>, left: bool, right: bool) -> String {
    let default = " \t\n\r\0\x0B";
    let list = charlist.unwrap_or_else(|| default.to_string());
    let set: Vec<char> = list.chars().collect();
    let mut out = s;
    if left {
        out = out.trim_start_matches(|c| set.contains(&c));
    }
    if right {
        out = out.trim_end_matches(|c| set.contains(&c));
    }
    out.to_string()
}

fn leading_int(s: &str) -> i64 {
    let t = s.trim();
    let mut end = 0;
    for (i, c) in t.char_indices() {
        if c.is_ascii_digit() || (i == 0 && (c == '-' || c == '+')) {
            end = i + c.len_utf8();
        } else {
            break;
        }
    }
    t[..end].parse().unwrap_or(0)
}

/// `%s` / `%d` / `%%` substitution, enough for harness formatting.
fn format_like(fmt: &str, args: &[Value]) -> String {
    let mut out = String::new();
    let mut arg = 0;
    let mut chars = fmt.chars().peekable();
    while let Some(c) = chars.next() {
        if c != '%' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('%') => out.push('%'),
            Some('s') => {
                out.push_str(&args.get(arg).map(|v| v.as_str()).unwrap_or_default());
                arg += 1;
            }
            Some('d') => {
                out.push_str(
                    &leading_int(&args.get(arg).map(|v| v.as_str()).unwrap_or_default())
                        .to_string(),
                );
                arg += 1;
            }
            Some(other) => {
                out.push('%');
                out.push(other);
            }
            None => out.push('%'),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_src(src: &str, inputs: &[(&str, Value)]) -> EvalOutcome {
        let inputs: BTreeMap<String, Value> =
            inputs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
        parse_and_run(src, inputs).unwrap()
    }

    fn get(pairs: &[(&str, &str)]) -> Value {
        Value::Arr(
            pairs
                .iter()
                .map(|(k, v)| (k.to_string(), Value::str(*v)))
                .collect(),
        )
    }

    #[test]
    fn interpolated_echo_prints_bound_input() {
        let out = run_src(
            "<?php $search = $_GET['search']; echo \"<input value='$search'>\";",
            &[("_GET", get(&[("search", "abc")]))],
        );
        assert_eq!(out.stdout, "<input value='abc'>");
    }

    #[test]
    fn htmlspecialchars_quote_modes_differ() {
        let out = run_src(
            "<?php echo htmlspecialchars(\"<a '\\\"\", ENT_QUOTES); echo '|'; echo htmlspecialchars(\"'\", ENT_COMPAT);",
            &[],
        );
        assert_eq!(out.stdout, "&lt;a &#039;&quot;|'");
    }

    #[test]
    fn user_function_runs_by_value() {
        let src = "<?php\nfunction sanitize_search($value) {\n  $value = trim($value);\n  $value = str_replace('\"', '', $value);\n  return $value;\n}\n$x = sanitize_search($_GET['q']);\necho $x;";
        let out = run_src(src, &[("_GET", get(&[("q", "  a\"b  ")]))]);
        assert_eq!(out.stdout, "ab");
    }

    #[test]
    fn extension_blacklist_flow_matches_php_semantics() {
        let src = r#"<?php
$name = $_FILES['upload']['name'];
$blacklist = array('php', 'php3', 'phtml');
$parts = explode('.', $name);
$ext = strtolower(end($parts));
if (in_array($ext, $blacklist)) { exit('blocked'); }
echo 'stored ' . $name;
"#;
        let mut upload = BTreeMap::new();
        upload.insert(
            "upload".to_string(),
            get(&[("name", "shell.PHP5"), ("tmp_name", "/tmp/x")]),
        );
        let blocked = parse_and_run(
            &src.replace("'php', 'php3'", "'php', 'php5'"),
            BTreeMap::from([("_FILES".to_string(), Value::Arr(upload.clone()))]),
        )
        .unwrap();
        assert_eq!(blocked.stdout, "blocked");
        assert!(blocked.exited);
        let passed = parse_and_run(
            src,
            BTreeMap::from([("_FILES".to_string(), Value::Arr(upload))]),
        )
        .unwrap();
        assert_eq!(passed.stdout, "stored shell.PHP5");
    }

    #[test]
    fn exit_stops_later_output() {
        let out = run_src("<?php echo 'a'; exit('stop'); echo 'b';", &[]);
        assert_eq!(out.stdout, "astop");
        assert!(out.exited);
    }

    #[test]
    fn defined_sees_parse_time_defines() {
        let out = run_src(
            "<?php define('APP_RUNNING', true); if (!defined('APP_RUNNING')) { exit('no'); } echo 'yes';",
            &[],
        );
        assert_eq!(out.stdout, "yes");
    }

    #[test]
    fn unknown_function_is_refused() {
        let err = parse_and_run("<?php mystery_call($x);", BTreeMap::new()).unwrap_err();
        assert!(matches!(err, EvalError::UnknownFunction { ref name, .. } if name == "mystery_call"));
    }

    #[test]
    fn isset_checks_presence_not_value() {
        let out = run_src(
            "<?php if (isset($_GET['a'])) { echo 'set'; } else { echo 'unset'; }",
            &[("_GET", get(&[("a", "")]))],
        );
        assert_eq!(out.stdout, "set");
    }
}
