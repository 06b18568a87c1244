//! Statement-level parser. Consumes the lexer's segment list as one merged
//! stream so a brace opened in one PHP block and closed after interleaved
//! HTML still parses (`if ($x) { ?> ... <?php }`). Never fails: constructs
//! outside the subset degrade to `Other` statements with conservative reads,
//! and a warning records what was skipped.

use std::collections::BTreeMap;

use super::expr::{parse_expr, raw, Expr};
use super::lexer::{lex, Segment, Tok, TokKind};
use super::{
    FunctionDef, HtmlSegment, NavKind, NavTarget, SourceUnit, Stmt, StmtKind, StrPart, VarRef,
};

enum Item {
    Tok(Tok),
    Html {
        idx: usize,
        start_line: u32,
        end_line: u32,
    },
}

pub fn parse_unit(path: &str, source: &str) -> SourceUnit {
    let segments = lex(source);
    let mut html_segments: Vec<HtmlSegment> = Vec::new();
    let mut items: Vec<Item> = Vec::new();

    for seg in segments {
        match seg {
            Segment::Html {
                text,
                start_line,
                end_line,
            } => {
                html_segments.push(HtmlSegment {
                    start_line,
                    end_line,
                    text,
                });
                items.push(Item::Html {
                    idx: html_segments.len() - 1,
                    start_line,
                    end_line,
                });
            }
            Segment::Php {
                toks,
                echo_open,
                start_line,
            } => {
                if echo_open {
                    // `<?= expr ?>` is an echo statement.
                    items.push(Item::Tok(Tok {
                        kind: TokKind::Ident("echo".to_string()),
                        line: start_line,
                        start: 0,
                        end: 0,
                    }));
                    let needs_semi = !matches!(toks.last().map(|t| &t.kind), Some(TokKind::Semi));
                    let last_line = toks.last().map(|t| t.line).unwrap_or(start_line);
                    for t in toks {
                        items.push(Item::Tok(t));
                    }
                    if needs_semi {
                        items.push(Item::Tok(Tok {
                            kind: TokKind::Semi,
                            line: last_line,
                            start: 0,
                            end: 0,
                        }));
                    }
                } else {
                    for t in toks {
                        items.push(Item::Tok(t));
                    }
                }
            }
        }
    }

    let mut parser = Parser {
        items,
        pos: 0,
        src: source,
        consts: BTreeMap::new(),
        functions: Vec::new(),
        warnings: Vec::new(),
    };
    let stmts = parser.parse_stmts(&[]);

    let line_count = source.lines().count() as u32;
    let mut unit = SourceUnit {
        path: path.to_string(),
        source: source.to_string(),
        stmts,
        functions: parser.functions,
        html_segments,
        defined_constants: parser.consts,
        warnings: parser.warnings,
        line_count,
        line_owners: Vec::new(),
    };
    unit.compute_line_owners(source);
    unit
}

struct Parser<'a> {
    items: Vec<Item>,
    pos: usize,
    src: &'a str,
    consts: BTreeMap<String, String>,
    functions: Vec<FunctionDef>,
    warnings: Vec<String>,
}

impl<'a> Parser<'a> {
    fn peek_kind(&self) -> Option<&TokKind> {
        match self.items.get(self.pos) {
            Some(Item::Tok(t)) => Some(&t.kind),
            _ => None,
        }
    }

    fn cur_line(&self) -> u32 {
        match self.items.get(self.pos) {
            Some(Item::Tok(t)) => t.line,
            _ => 0,
        }
    }

    fn eat_ident(&mut self, word: &str) -> bool {
        if matches!(self.peek_kind(), Some(TokKind::Ident(w)) if w.eq_ignore_ascii_case(word)) {
            self.pos += 1;
            return true;
        }
        false
    }

    fn eat_kind(&mut self, kind: &TokKind) -> bool {
        if self.peek_kind() == Some(kind) {
            self.pos += 1;
            return true;
        }
        false
    }

    /// Parses statements until one of `stop` idents (for alternative-syntax
    /// bodies) or a closing brace / end of input the caller handles.
    fn parse_stmts(&mut self, stop: &[&str]) -> Vec<Stmt> {
        let mut out = Vec::new();
        loop {
            match self.items.get(self.pos) {
                None => break,
                Some(Item::Html {
                    idx,
                    start_line,
                    end_line,
                }) => {
                    let (idx, start_line, end_line) = (*idx, *start_line, *end_line);
                    self.pos += 1;
                    let mut stmt = Stmt::at(start_line, end_line);
                    stmt.kind = StmtKind::Html;
                    stmt.html_ref = Some(idx);
                    out.push(stmt);
                }
                Some(Item::Tok(t)) => {
                    if matches!(t.kind, TokKind::CloseBrace) {
                        break;
                    }
                    if let TokKind::Ident(w) = &t.kind {
                        if stop.iter().any(|s| w.eq_ignore_ascii_case(s)) {
                            break;
                        }
                    }
                    if let Some(stmt) = self.parse_stmt() {
                        out.push(stmt);
                    }
                }
            }
        }
        out
    }

    fn parse_stmt(&mut self) -> Option<Stmt> {
        let start_line = self.cur_line();
        match self.peek_kind()? {
            TokKind::Semi => {
                self.pos += 1;
                None
            }
            TokKind::OpenBrace => {
                // Stray block: flatten children into an Other wrapper.
                self.pos += 1;
                let body = self.parse_stmts(&[]);
                self.eat_kind(&TokKind::CloseBrace);
                let end = body.last().map(|s| s.end_line).unwrap_or(start_line);
                let mut stmt = Stmt::at(start_line, end);
                stmt.kind = StmtKind::Other;
                stmt.body = body;
                Some(stmt)
            }
            TokKind::Ident(word) => {
                let word = word.to_ascii_lowercase();
                match word.as_str() {
                    "function" => {
                        self.parse_function(start_line);
                        None
                    }
                    "if" => Some(self.parse_if(start_line)),
                    "while" | "for" | "foreach" | "do" | "switch" => {
                        Some(self.parse_loopish(&word, start_line))
                    }
                    "echo" | "print" => Some(self.parse_echo(start_line)),
                    "include" | "include_once" | "require" | "require_once" => {
                        Some(self.parse_include(&word, start_line))
                    }
                    "return" => {
                        self.pos += 1;
                        let exprs = self.expr_list_until_semi();
                        Some(self.expr_stmt(StmtKind::Return, exprs, start_line))
                    }
                    "exit" | "die" => {
                        self.pos += 1;
                        let exprs = if matches!(self.peek_kind(), Some(TokKind::Semi)) {
                            Vec::new()
                        } else {
                            self.expr_list_until_semi()
                        };
                        self.eat_kind(&TokKind::Semi);
                        let mut stmt = self.expr_stmt_no_semi(StmtKind::Exit, exprs, start_line);
                        stmt.end_line = stmt.end_line.max(start_line);
                        Some(stmt)
                    }
                    "global" => {
                        self.pos += 1;
                        let mut names = Vec::new();
                        while let Some(kind) = self.peek_kind() {
                            match kind {
                                TokKind::Var(v) => {
                                    names.push(v.clone());
                                    self.pos += 1;
                                }
                                TokKind::Comma => {
                                    self.pos += 1;
                                }
                                _ => break,
                            }
                        }
                        self.eat_kind(&TokKind::Semi);
                        let mut stmt = Stmt::at(start_line, start_line);
                        stmt.kind = StmtKind::Other;
                        stmt.globals = names;
                        Some(stmt)
                    }
                    "break" | "continue" => {
                        self.skip_to_semi();
                        None
                    }
                    "class" | "interface" | "trait" | "abstract" | "final" | "namespace"
                    | "use" | "public" | "private" | "protected" | "static" | "const" => {
                        // Outside the subset: consume the construct coarsely.
                        let stmt = self.consume_other(start_line);
                        Some(stmt)
                    }
                    _ => Some(self.parse_expression_stmt(start_line)),
                }
            }
            _ => Some(self.parse_expression_stmt(start_line)),
        }
    }

    fn parse_function(&mut self, start_line: u32) {
        self.pos += 1; // function
        let name = match self.peek_kind() {
            Some(TokKind::Ident(n)) => {
                let n = n.clone();
                self.pos += 1;
                n
            }
            _ => {
                self.warnings
                    .push(format!("line {start_line}: anonymous or malformed function skipped"));
                self.skip_balanced_block();
                return;
            }
        };
        let mut params = Vec::new();
        if self.eat_kind(&TokKind::OpenParen) {
            let mut depth = 1;
            while depth > 0 {
                match self.peek_kind() {
                    None => break,
                    Some(TokKind::OpenParen) => {
                        depth += 1;
                        self.pos += 1;
                    }
                    Some(TokKind::CloseParen) => {
                        depth -= 1;
                        self.pos += 1;
                    }
                    Some(TokKind::Var(v)) if depth == 1 => {
                        params.push(v.clone());
                        self.pos += 1;
                        // Skip a default value if present.
                        if matches!(self.peek_kind(), Some(TokKind::Op("="))) {
                            while let Some(k) = self.peek_kind() {
                                if matches!(k, TokKind::Comma | TokKind::CloseParen) {
                                    break;
                                }
                                self.pos += 1;
                            }
                        }
                    }
                    _ => self.pos += 1,
                }
            }
        }
        // Optional return type `: type`.
        if matches!(self.peek_kind(), Some(TokKind::Op(":"))) {
            while let Some(k) = self.peek_kind() {
                if matches!(k, TokKind::OpenBrace) {
                    break;
                }
                self.pos += 1;
            }
        }
        let body = if self.eat_kind(&TokKind::OpenBrace) {
            let body = self.parse_stmts(&[]);
            self.eat_kind(&TokKind::CloseBrace);
            body
        } else {
            Vec::new()
        };
        let end_line = self.last_consumed_line().max(start_line);
        self.functions.push(FunctionDef {
            name,
            params,
            body,
            start_line,
            end_line,
        });
    }

    fn parse_if(&mut self, start_line: u32) -> Stmt {
        self.pos += 1; // if
        let (pred, pred_text) = self.parse_paren_expr();
        let (body, alt_syntax) = self.parse_body(&["elseif", "else", "endif"]);
        let mut else_body = Vec::new();

        loop {
            if self.eat_ident("elseif") {
                let elif_line = self.cur_line();
                let (elif_pred, elif_text) = self.parse_paren_expr();
                let (elif_body, _) = self.parse_body(&["elseif", "else", "endif"]);
                let mut nested = Stmt::at(elif_line, self.last_consumed_line());
                nested.kind = StmtKind::If;
                nested.reads = elif_pred.reads();
                nested.predicate = Some(elif_pred);
                nested.pred_text = Some(elif_text);
                nested.body = elif_body;
                // The chain continues into this nested if's else branch.
                else_body.push(nested);
                continue;
            }
            if self.eat_ident("else") {
                if self.eat_ident("if") {
                    let elif_line = self.cur_line();
                    let (elif_pred, elif_text) = self.parse_paren_expr();
                    let (elif_body, _) = self.parse_body(&["elseif", "else", "endif"]);
                    let mut nested = Stmt::at(elif_line, self.last_consumed_line());
                    nested.kind = StmtKind::If;
                    nested.reads = elif_pred.reads();
                    nested.predicate = Some(elif_pred);
                    nested.pred_text = Some(elif_text);
                    nested.body = elif_body;
                    else_body.push(nested);
                    continue;
                }
                let (body, _) = self.parse_body(&["endif"]);
                else_body.extend(body);
                continue;
            }
            break;
        }
        if alt_syntax {
            self.eat_ident("endif");
            self.eat_kind(&TokKind::Semi);
        }

        let mut stmt = Stmt::at(start_line, self.last_consumed_line().max(start_line));
        stmt.kind = StmtKind::If;
        stmt.reads = pred.reads();
        stmt.predicate = Some(pred);
        stmt.pred_text = Some(pred_text);
        stmt.body = body;
        stmt.else_body = else_body;
        stmt
    }

    fn parse_loopish(&mut self, word: &str, start_line: u32) -> Stmt {
        self.pos += 1;
        let mut stmt = Stmt::at(start_line, start_line);
        stmt.kind = if word == "switch" {
            StmtKind::Other
        } else {
            StmtKind::Loop
        };

        match word {
            "do" => {
                let (body, _) = self.parse_body(&[]);
                stmt.body = body;
                self.eat_ident("while");
                let (pred, text) = self.parse_paren_expr();
                stmt.reads = pred.reads();
                stmt.predicate = Some(pred);
                stmt.pred_text = Some(text);
                self.eat_kind(&TokKind::Semi);
            }
            "foreach" => {
                let slice = self.paren_token_slice();
                // foreach ($arr as $k => $v)
                let as_pos = slice.iter().position(
                    |t| matches!(&t.kind, TokKind::Ident(w) if w.eq_ignore_ascii_case("as")),
                );
                if let Some(as_pos) = as_pos {
                    let arr = parse_expr(&slice[..as_pos], self.src);
                    stmt.reads = arr.reads();
                    stmt.exprs.push(arr);
                    for t in &slice[as_pos + 1..] {
                        if let TokKind::Var(v) = &t.kind {
                            stmt.writes.push(VarRef {
                                name: v.clone(),
                                index: None,
                                line: t.line,
                            });
                        }
                    }
                } else {
                    let arr = parse_expr(&slice, self.src);
                    stmt.reads = arr.reads();
                    stmt.exprs.push(arr);
                }
                let (body, alt) = self.parse_body(&["endforeach"]);
                stmt.body = body;
                if alt {
                    self.eat_ident("endforeach");
                    self.eat_kind(&TokKind::Semi);
                }
            }
            "for" => {
                let slice = self.paren_token_slice();
                let expr = parse_expr(&slice, self.src);
                stmt.reads = expr.reads();
                stmt.exprs.push(expr);
                let (body, alt) = self.parse_body(&["endfor"]);
                stmt.body = body;
                if alt {
                    self.eat_ident("endfor");
                    self.eat_kind(&TokKind::Semi);
                }
            }
            "switch" => {
                let (pred, text) = self.parse_paren_expr();
                stmt.reads = pred.reads();
                stmt.predicate = Some(pred);
                stmt.pred_text = Some(text);
                // Flatten every case body; labels are skipped.
                if self.eat_kind(&TokKind::OpenBrace) {
                    let mut body = Vec::new();
                    loop {
                        match self.peek_kind() {
                            None => break,
                            Some(TokKind::CloseBrace) => {
                                self.pos += 1;
                                break;
                            }
                            Some(TokKind::Ident(w))
                                if w.eq_ignore_ascii_case("case")
                                    || w.eq_ignore_ascii_case("default") =>
                            {
                                while let Some(k) = self.peek_kind() {
                                    let done = matches!(k, TokKind::Op(":"));
                                    self.pos += 1;
                                    if done {
                                        break;
                                    }
                                }
                            }
                            _ => {
                                if let Some(s) = self.parse_stmt() {
                                    body.push(s);
                                }
                            }
                        }
                    }
                    stmt.body = body;
                }
            }
            _ => {
                // while
                let (pred, text) = self.parse_paren_expr();
                stmt.reads = pred.reads();
                stmt.predicate = Some(pred);
                stmt.pred_text = Some(text);
                let (body, alt) = self.parse_body(&["endwhile"]);
                stmt.body = body;
                if alt {
                    self.eat_ident("endwhile");
                    self.eat_kind(&TokKind::Semi);
                }
            }
        }
        stmt.end_line = self.last_consumed_line().max(start_line);
        stmt
    }

    fn parse_echo(&mut self, start_line: u32) -> Stmt {
        self.pos += 1; // echo | print
        let exprs = self.expr_list_until_semi();
        let mut stmt = self.expr_stmt_no_semi(StmtKind::Echo, exprs, start_line);
        self.eat_kind(&TokKind::Semi);
        stmt.end_line = self.last_consumed_line().max(start_line);
        // Merged template across arguments, when every argument has one.
        let mut parts: Vec<StrPart> = Vec::new();
        let mut ok = !stmt.exprs.is_empty();
        for e in &stmt.exprs {
            match e.template() {
                Some(p) => parts.extend(p),
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            stmt.string_parts = Some(parts);
        }
        stmt
    }

    fn parse_include(&mut self, word: &str, start_line: u32) -> Stmt {
        self.pos += 1;
        let had_paren = self.eat_kind(&TokKind::OpenParen);
        let slice = if had_paren {
            let s = self.token_slice_until_close_paren();
            self.eat_kind(&TokKind::Semi);
            s
        } else {
            self.token_slice_until_semi()
        };
        let target = parse_expr(&slice, self.src);
        let mut stmt = Stmt::at(start_line, self.last_consumed_line().max(start_line));
        stmt.kind = StmtKind::Include;
        stmt.callee = Some(word.to_string());
        stmt.reads = target.reads();
        stmt.nav_target = Some(NavTarget {
            kind: NavKind::Include,
            raw: raw(&slice, self.src),
            resolved: target.fold(&self.consts),
        });
        stmt.exprs.push(target);
        stmt
    }

    /// Expression statement: assignment, call, or anything else.
    fn parse_expression_stmt(&mut self, start_line: u32) -> Stmt {
        let slice = self.token_slice_until_semi();
        if slice.is_empty() {
            return Stmt::at(start_line, start_line);
        }
        let expr = parse_expr(&slice, self.src);
        let end_line = self.last_consumed_line().max(start_line);

        match &expr {
            Expr::Binary { op, lhs, rhs }
                if matches!(op.as_str(), "=" | ".=" | "+=" | "-=" | "*=" | "/=" | "%=") =>
            {
                if let Some(lhs_ref) = lhs.as_var_ref() {
                    let mut stmt = Stmt::at(start_line, end_line);
                    stmt.kind = StmtKind::Assign;
                    stmt.assign_op = Some(op.clone());
                    stmt.writes = vec![lhs_ref.clone()];
                    stmt.reads = rhs.reads();
                    if op != "=" {
                        stmt.reads.push(lhs_ref);
                    }
                    stmt.string_parts = rhs.template();
                    let mut calls = Vec::new();
                    rhs.collect_calls(&mut calls);
                    stmt.callee = calls.first().map(|c| c.callee.clone());
                    stmt.exprs.push((**rhs).clone());
                    return stmt;
                }
            }
            Expr::Call { callee, args, recv, .. } => {
                let mut stmt = Stmt::at(start_line, end_line);
                // `header('Location: ...')` is a navigation edge, not a call.
                if callee == "header" {
                    if let Some(loc) = args.first().and_then(|a| a.fold(&self.consts)) {
                        if let Some(target) = loc.strip_prefix("Location:") {
                            stmt.kind = StmtKind::Redirect;
                            stmt.callee = Some("header".to_string());
                            stmt.reads = expr.reads();
                            stmt.nav_target = Some(NavTarget {
                                kind: NavKind::Redirect,
                                raw: loc.clone(),
                                resolved: Some(target.trim().to_string()),
                            });
                            stmt.exprs.push(expr.clone());
                            return stmt;
                        }
                    }
                    // Dynamic Location header: keep the redirect kind with an
                    // unresolved target so the edge is not silently dropped.
                    if let Some(first) = args.first() {
                        let tpl = first.template();
                        let looks_like_location = matches!(
                            tpl.as_deref().and_then(|p| p.first()),
                            Some(StrPart::Lit(s)) if s.trim_start().starts_with("Location:")
                        );
                        if looks_like_location {
                            stmt.kind = StmtKind::Redirect;
                            stmt.callee = Some("header".to_string());
                            stmt.reads = expr.reads();
                            stmt.nav_target = Some(NavTarget {
                                kind: NavKind::Redirect,
                                raw: raw(&slice, self.src),
                                resolved: None,
                            });
                            stmt.exprs.push(expr.clone());
                            return stmt;
                        }
                    }
                }
                if callee == "define" {
                    if let (Some(name), value) = (
                        args.first().and_then(|a| a.fold(&self.consts)),
                        args.get(1).and_then(|a| a.fold(&self.consts)),
                    ) {
                        self.consts.insert(name, value.unwrap_or_default());
                    }
                }
                stmt.kind = StmtKind::Call;
                stmt.callee = Some(callee.clone());
                stmt.reads = expr.reads();
                if let Some(recv) = recv {
                    let mut r = recv.reads();
                    stmt.reads.append(&mut r);
                }
                stmt.exprs.push(expr.clone());
                return stmt;
            }
            _ => {}
        }

        // Unparsed construct: Other with conservative reads.
        let mut stmt = Stmt::at(start_line, end_line);
        stmt.kind = StmtKind::Other;
        stmt.reads = expr.reads();
        stmt.exprs.push(expr);
        stmt
    }

    fn consume_other(&mut self, start_line: u32) -> Stmt {
        let text_start = self.cur_line();
        self.skip_balanced_block();
        self.warnings.push(format!(
            "line {text_start}: construct outside the subset treated as opaque"
        ));
        let mut stmt = Stmt::at(start_line, self.last_consumed_line().max(start_line));
        stmt.kind = StmtKind::Other;
        stmt
    }

    /// Consumes either `{...}` (or a whole `... ;` statement) coarsely,
    /// collecting nothing. Used for class-like constructs.
    fn skip_balanced_block(&mut self) {
        let mut depth = 0usize;
        while let Some(item) = self.items.get(self.pos) {
            match item {
                Item::Tok(t) => match t.kind {
                    TokKind::OpenBrace => {
                        depth += 1;
                        self.pos += 1;
                    }
                    TokKind::CloseBrace => {
                        self.pos += 1;
                        if depth <= 1 {
                            return;
                        }
                        depth -= 1;
                    }
                    TokKind::Semi if depth == 0 => {
                        self.pos += 1;
                        return;
                    }
                    _ => self.pos += 1,
                },
                Item::Html { .. } => self.pos += 1,
            }
        }
    }

    /// `( expr )` returning the expression and its raw source text.
    fn parse_paren_expr(&mut self) -> (Expr, String) {
        if !self.eat_kind(&TokKind::OpenParen) {
            return (Expr::Opaque(String::new()), String::new());
        }
        let slice = self.token_slice_until_close_paren();
        let text = raw(&slice, self.src);
        (parse_expr(&slice, self.src), text)
    }

    fn paren_token_slice(&mut self) -> Vec<Tok> {
        if !self.eat_kind(&TokKind::OpenParen) {
            return Vec::new();
        }
        self.token_slice_until_close_paren()
    }

    /// Body of a control structure: `{...}`, alternative `:` syntax (returns
    /// alt=true, caller consumes the end keyword), or a single statement.
    fn parse_body(&mut self, stop: &[&str]) -> (Vec<Stmt>, bool) {
        if self.eat_kind(&TokKind::OpenBrace) {
            let body = self.parse_stmts(&[]);
            self.eat_kind(&TokKind::CloseBrace);
            return (body, false);
        }
        if matches!(self.peek_kind(), Some(TokKind::Op(":"))) {
            self.pos += 1;
            let body = self.parse_stmts(stop);
            return (body, true);
        }
        match self.parse_stmt() {
            Some(stmt) => (vec![stmt], false),
            None => (Vec::new(), false),
        }
    }

    /// Comma-separated expressions until the statement's semicolon.
    fn expr_list_until_semi(&mut self) -> Vec<Expr> {
        let slice = self.token_slice_until_semi_keep();
        let mut exprs = Vec::new();
        let mut depth = 0usize;
        let mut start = 0usize;
        for (i, t) in slice.iter().enumerate() {
            match t.kind {
                TokKind::OpenParen | TokKind::OpenBracket | TokKind::OpenBrace => depth += 1,
                TokKind::CloseParen | TokKind::CloseBracket | TokKind::CloseBrace => {
                    depth = depth.saturating_sub(1)
                }
                TokKind::Comma if depth == 0 => {
                    exprs.push(parse_expr(&slice[start..i], self.src));
                    start = i + 1;
                }
                _ => {}
            }
        }
        if start < slice.len() {
            exprs.push(parse_expr(&slice[start..], self.src));
        }
        exprs
    }

    fn expr_stmt(&mut self, kind: StmtKind, exprs: Vec<Expr>, start_line: u32) -> Stmt {
        let mut stmt = self.expr_stmt_no_semi(kind, exprs, start_line);
        self.eat_kind(&TokKind::Semi);
        stmt.end_line = self.last_consumed_line().max(start_line);
        stmt
    }

    fn expr_stmt_no_semi(&mut self, kind: StmtKind, exprs: Vec<Expr>, start_line: u32) -> Stmt {
        let mut stmt = Stmt::at(start_line, self.last_consumed_line().max(start_line));
        stmt.kind = kind;
        for e in &exprs {
            let mut r = e.reads();
            stmt.reads.append(&mut r);
        }
        stmt.exprs = exprs;
        stmt
    }

    /// Tokens up to (not including) the statement semicolon at depth 0; the
    /// semicolon itself is consumed.
    fn token_slice_until_semi(&mut self) -> Vec<Tok> {
        let slice = self.token_slice_until_semi_keep();
        self.eat_kind(&TokKind::Semi);
        slice
    }

    fn token_slice_until_semi_keep(&mut self) -> Vec<Tok> {
        let mut out = Vec::new();
        let mut depth = 0usize;
        while let Some(item) = self.items.get(self.pos) {
            let Item::Tok(t) = item else { break };
            match t.kind {
                TokKind::Semi if depth == 0 => break,
                TokKind::OpenParen | TokKind::OpenBracket => depth += 1,
                TokKind::CloseParen | TokKind::CloseBracket => {
                    if depth == 0 {
                        break;
                    }
                    depth -= 1;
                }
                TokKind::OpenBrace => depth += 1,
                TokKind::CloseBrace => {
                    if depth == 0 {
                        break;
                    }
                    depth -= 1;
                }
                _ => {}
            }
            out.push(t.clone());
            self.pos += 1;
        }
        out
    }

    fn token_slice_until_close_paren(&mut self) -> Vec<Tok> {
        let mut out = Vec::new();
        let mut depth = 0usize;
        while let Some(item) = self.items.get(self.pos) {
            let Item::Tok(t) = item else { break };
            match t.kind {
                TokKind::OpenParen => depth += 1,
                TokKind::CloseParen => {
                    if depth == 0 {
                        self.pos += 1;
                        return out;
                    }
                    depth -= 1;
                }
                _ => {}
            }
            out.push(t.clone());
            self.pos += 1;
        }
        out
    }

    fn last_consumed_line(&self) -> u32 {
        let mut i = self.pos;
        while i > 0 {
            i -= 1;
            match &self.items[i] {
                Item::Tok(t) if t.line > 0 => return t.line,
                _ => continue,
            }
        }
        0
    }

    fn skip_to_semi(&mut self) {
        while let Some(kind) = self.peek_kind() {
            let done = matches!(kind, TokKind::Semi);
            self.pos += 1;
            if done {
                return;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::php::StmtKind;

    #[test]
    fn assignment_captures_reads_writes_and_template() {
        let unit = parse_unit("t.php", "<?php $greeting = \"Hello $name!\";");
        let stmt = &unit.stmts[0];
        assert_eq!(stmt.kind, StmtKind::Assign);
        assert_eq!(stmt.writes[0].name, "greeting");
        assert_eq!(stmt.reads[0].name, "name");
        assert!(stmt.string_parts.is_some());
    }

    #[test]
    fn if_over_html_boundary_parses() {
        let src = "<?php if ($x) { ?>\n<b>hi</b>\n<?php } ?>\n";
        let unit = parse_unit("t.php", src);
        assert_eq!(unit.stmts.len(), 1);
        let stmt = &unit.stmts[0];
        assert_eq!(stmt.kind, StmtKind::If);
        assert!(stmt.body.iter().any(|s| s.kind == StmtKind::Html));
    }

    #[test]
    fn include_target_is_constant_folded() {
        let unit = parse_unit("t.php", "<?php include 'inc/' . 'header.php';");
        let stmt = &unit.stmts[0];
        assert_eq!(stmt.kind, StmtKind::Include);
        assert_eq!(
            stmt.nav_target.as_ref().unwrap().resolved.as_deref(),
            Some("inc/header.php")
        );
    }

    #[test]
    fn location_header_becomes_redirect() {
        let unit = parse_unit("t.php", "<?php header('Location: admin.php?tab=1');");
        let stmt = &unit.stmts[0];
        assert_eq!(stmt.kind, StmtKind::Redirect);
        assert_eq!(
            stmt.nav_target.as_ref().unwrap().resolved.as_deref(),
            Some("admin.php?tab=1")
        );
    }

    #[test]
    fn function_definition_records_span_and_params() {
        let src = "<?php\nfunction sanitize_search($value) {\n    $value = trim($value);\n    return $value;\n}\n";
        let unit = parse_unit("t.php", src);
        assert_eq!(unit.functions.len(), 1);
        let f = &unit.functions[0];
        assert_eq!(f.name, "sanitize_search");
        assert_eq!(f.params, vec!["value".to_string()]);
        assert_eq!((f.start_line, f.end_line), (2, 5));
        assert_eq!(f.body.len(), 2);
    }

    #[test]
    fn elseif_chain_collects_both_guards() {
        let src = "<?php if ($a == 1) { echo 'a'; } elseif ($b == 2) { echo 'b'; } else { echo 'c'; }";
        let unit = parse_unit("t.php", src);
        let stmt = &unit.stmts[0];
        assert_eq!(stmt.kind, StmtKind::If);
        assert_eq!(stmt.else_body.len(), 2); // nested if + trailing else echo
        assert_eq!(stmt.else_body[0].kind, StmtKind::If);
    }

    #[test]
    fn exit_guard_single_line_with_braces() {
        let src = "<?php if (!defined('APP_RUNNING')) { exit('Direct access forbidden.'); }";
        let unit = parse_unit("t.php", src);
        let stmt = &unit.stmts[0];
        assert_eq!(stmt.kind, StmtKind::If);
        assert_eq!(stmt.body[0].kind, StmtKind::Exit);
    }

    #[test]
    fn define_registers_constant() {
        let unit = parse_unit("t.php", "<?php define('APP_RUNNING', true); include APP_ROOT;");
        assert!(unit.defined_constants.contains_key("APP_RUNNING"));
    }

    #[test]
    fn echo_shorthand_segment() {
        let unit = parse_unit("t.php", "<p><?= $title ?></p>");
        let echo = unit.stmts.iter().find(|s| s.kind == StmtKind::Echo).unwrap();
        assert_eq!(echo.reads[0].name, "title");
    }

    #[test]
    fn method_call_statement_keeps_callee_name() {
        let unit = parse_unit("t.php", "<?php $db->query($sql);");
        let stmt = &unit.stmts[0];
        assert_eq!(stmt.kind, StmtKind::Call);
        assert_eq!(stmt.callee.as_deref(), Some("query"));
        assert!(stmt.reads.iter().any(|r| r.name == "sql"));
        assert!(stmt.reads.iter().any(|r| r.name == "db"));
    }

    #[test]
    fn foreach_records_iteration_writes() {
        let unit = parse_unit("t.php", "<?php foreach ($rows as $key => $row) { echo $row; }");
        let stmt = &unit.stmts[0];
        assert_eq!(stmt.kind, StmtKind::Loop);
        assert!(stmt.reads.iter().any(|r| r.name == "rows"));
        let writes: Vec<_> = stmt.writes.iter().map(|w| w.name.as_str()).collect();
        assert_eq!(writes, vec!["key", "row"]);
    }
}
