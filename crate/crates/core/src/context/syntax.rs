//! Output-context classification: which syntactic position the injected
//! value occupies at the sink. The descriptor names the escape the payload
//! has to perform and drives the validator's syntax probe matcher.

use crate::corpus::CweClass;
use crate::php::{ProgramModel, SourceUnit, Stmt, StmtKind, StrPart};

/// Closed set of recognized output positions.
pub const SYNTAX_DESCRIPTORS: &[&str] = &[
    "html-body",
    "html-attr-single-quoted",
    "html-attr-double-quoted",
    "html-attr-unquoted",
    "script-element",
    "sql-string-single-quoted",
    "sql-string-double-quoted",
    "sql-numeric",
    "shell-arg-single-quoted",
    "shell-arg-double-quoted",
    "shell-arg-unquoted",
    "multipart-file-field",
];

/// Classifies the sink's output position for `hole_var` (the variable read
/// at the sink, without `$`). CWE-352 has no injected value and yields no
/// descriptor; CWE-434 is always the upload form field.
pub fn classify(
    cwe: CweClass,
    model: &ProgramModel,
    sink_path: &str,
    sink_line: u32,
    hole_var: &str,
) -> Vec<String> {
    match cwe {
        CweClass::Cwe352 => return Vec::new(),
        CweClass::Cwe434 => return vec!["multipart-file-field".to_string()],
        _ => {}
    }
    let prefix = model
        .unit(sink_path)
        .and_then(|unit| template_prefix(unit, sink_line, hole_var));
    let descriptor = match (cwe, prefix) {
        (CweClass::Cwe79, Some(p)) => html_position(&p),
        (CweClass::Cwe89, Some(p)) => sql_position(&p),
        (CweClass::Cwe78, Some(p)) => shell_position(&p),
        // No reconstructable template: assume the least constrained position.
        (CweClass::Cwe79, None) => "html-body",
        (CweClass::Cwe89, None) => "sql-numeric",
        _ => "shell-arg-unquoted",
    };
    vec![descriptor.to_string()]
}

/// Literal text preceding the injection hole. Looks at the sink statement's
/// own reconstructed parts first (`echo "...$x..."`); when the sink merely
/// reads a variable built earlier (`mysql_query($sql)`), falls back to the
/// closest preceding assignment of that variable. Interior variables before
/// the hole contribute a neutral `x` so quote parity still works.
fn template_prefix(unit: &SourceUnit, sink_line: u32, hole_var: &str) -> Option<String> {
    let mut all = Vec::new();
    collect_stmts(&unit.stmts, &mut all);
    for f in &unit.functions {
        collect_stmts(&f.body, &mut all);
    }

    if let Some(sink) = all.iter().find(|s| s.line == sink_line) {
        // A template without literal text carries no syntax of its own
        // (`mysql_query($sql)`); the real context is where the value was
        // built, handled by the fallback below.
        if let Some(prefix) = sink
            .string_parts
            .as_deref()
            .filter(|p| has_lit(p))
            .and_then(|p| prefix_before_hole(p, hole_var))
        {
            return Some(prefix);
        }
        // Sink is a call: the template lives in an argument expression,
        // `system("ping -c 1 $host")`.
        for expr in &sink.exprs {
            if let Some(prefix) = call_arg_prefix(expr, hole_var) {
                return Some(prefix);
            }
        }
    }

    let defining = all
        .iter()
        .filter(|s| {
            s.kind == StmtKind::Assign
                && s.line < sink_line
                && s.writes.first().is_some_and(|w| w.name == hole_var)
                && s.string_parts.is_some()
        })
        .max_by_key(|s| s.line)?;
    // Inside the definition the hole is whatever variable got spliced in,
    // so fall back to the first variable part.
    prefix_before_hole(defining.string_parts.as_deref()?, hole_var)
}

fn call_arg_prefix(expr: &crate::php::expr::Expr, hole_var: &str) -> Option<String> {
    use crate::php::expr::Expr;
    if let Expr::Call { args, .. } = expr {
        for arg in args {
            if let Some(prefix) = arg
                .template()
                .filter(|parts| has_lit(parts))
                .and_then(|parts| prefix_before_hole(&parts, hole_var))
            {
                return Some(prefix);
            }
            if let Some(prefix) = call_arg_prefix(arg, hole_var) {
                return Some(prefix);
            }
        }
    }
    None
}

fn has_lit(parts: &[StrPart]) -> bool {
    parts
        .iter()
        .any(|p| matches!(p, StrPart::Lit(t) if !t.trim().is_empty()))
}

fn prefix_before_hole(parts: &[StrPart], hole_var: &str) -> Option<String> {
    let named = parts
        .iter()
        .position(|p| matches!(p, StrPart::Var { name, .. } if name == hole_var));
    let hole = named.or_else(|| parts.iter().position(|p| matches!(p, StrPart::Var { .. })))?;
    let mut prefix = String::new();
    for part in &parts[..hole] {
        match part {
            StrPart::Lit(text) => prefix.push_str(text),
            StrPart::Var { .. } => prefix.push('x'),
        }
    }
    Some(prefix)
}

fn collect_stmts<'s>(stmts: &'s [Stmt], out: &mut Vec<&'s Stmt>) {
    for s in stmts {
        out.push(s);
        collect_stmts(&s.body, out);
        collect_stmts(&s.else_body, out);
    }
}

/// Minimal HTML tokenizer state at the end of `prefix`. Quotes are only
/// tracked inside tag headers; a quote character in text content is data.
pub(crate) fn html_position(prefix: &str) -> &'static str {
    let mut in_tag = false;
    let mut quote: Option<char> = None;
    let mut after_eq = false;
    let mut tag_name = String::new();
    let mut name_done = false;
    let mut in_script = false;

    for c in prefix.chars() {
        if let Some(q) = quote {
            if c == q {
                quote = None;
                after_eq = false;
            }
            continue;
        }
        if in_tag {
            match c {
                '>' => {
                    in_tag = false;
                    let name = tag_name.to_ascii_lowercase();
                    if name == "script" {
                        in_script = true;
                    } else if name == "/script" {
                        in_script = false;
                    }
                }
                '=' => after_eq = true,
                '\'' | '"' if after_eq => quote = Some(c),
                c if c.is_whitespace() => {
                    name_done = true;
                    after_eq = false;
                }
                _ => {
                    if !name_done {
                        tag_name.push(c);
                    }
                }
            }
        } else if c == '<' {
            in_tag = true;
            tag_name.clear();
            name_done = false;
            after_eq = false;
        }
    }

    match quote {
        Some('\'') => return "html-attr-single-quoted",
        Some(_) => return "html-attr-double-quoted",
        None => {}
    }
    if in_tag && after_eq {
        return "html-attr-unquoted";
    }
    if in_tag {
        // Inside a tag header but not in a value: still attribute position.
        return "html-attr-unquoted";
    }
    if in_script {
        return "script-element";
    }
    "html-body"
}

pub(crate) fn sql_position(prefix: &str) -> &'static str {
    match open_quote(prefix) {
        Some('\'') => "sql-string-single-quoted",
        Some(_) => "sql-string-double-quoted",
        None => "sql-numeric",
    }
}

pub(crate) fn shell_position(prefix: &str) -> &'static str {
    match open_quote(prefix) {
        Some('\'') => "shell-arg-single-quoted",
        Some(_) => "shell-arg-double-quoted",
        None => "shell-arg-unquoted",
    }
}

/// Quote character left open at the end of `prefix`, honoring nesting the
/// way shells and SQL do: inside one quote kind the other is literal.
pub(crate) fn open_quote(prefix: &str) -> Option<char> {
    let mut open: Option<char> = None;
    for c in prefix.chars() {
        match (open, c) {
            (None, '\'') | (None, '"') => open = Some(c),
            (Some(q), c) if c == q => open = None,
            _ => {}
        }
    }
    open
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::php::{build_program_model, SinkConfig};

    fn model_for(src: &str) -> ProgramModel {
        let cfg = SinkConfig::default_config();
        build_program_model(&[("page.php".to_string(), src.to_string())], &cfg).unwrap()
    }

    #[test]
    fn echo_into_single_quoted_attribute() {
        let m = model_for(
            "<?php\necho \"<input type='text' name='q' value='$q'>\";\n",
        );
        let got = classify(CweClass::Cwe79, &m, "page.php", 2, "q");
        assert_eq!(got, vec!["html-attr-single-quoted".to_string()]);
    }

    #[test]
    fn echo_into_double_quoted_attribute_and_unquoted() {
        let m = model_for("<?php\necho \"<a href=\\\"$url\\\">link</a>\";\n");
        assert_eq!(
            classify(CweClass::Cwe79, &m, "page.php", 2, "url"),
            vec!["html-attr-double-quoted".to_string()]
        );
        let m = model_for("<?php\necho \"<a href=$url>link</a>\";\n");
        assert_eq!(
            classify(CweClass::Cwe79, &m, "page.php", 2, "url"),
            vec!["html-attr-unquoted".to_string()]
        );
    }

    #[test]
    fn echo_into_script_and_body() {
        let m = model_for("<?php\necho \"<script>var q = '$q';</script>\";\n");
        assert_eq!(
            classify(CweClass::Cwe79, &m, "page.php", 2, "q"),
            vec!["script-element".to_string()]
        );
        let m = model_for("<?php\necho \"<p>Hello $name</p>\";\n");
        assert_eq!(
            classify(CweClass::Cwe79, &m, "page.php", 2, "name"),
            vec!["html-body".to_string()]
        );
    }

    #[test]
    fn sql_position_through_defining_assignment() {
        let m = model_for(
            "<?php\n$sql = \"SELECT * FROM users WHERE name = '$name'\";\nmysql_query($sql);\n",
        );
        assert_eq!(
            classify(CweClass::Cwe89, &m, "page.php", 3, "sql"),
            vec!["sql-string-single-quoted".to_string()]
        );
        let m = model_for("<?php\n$sql = \"SELECT * FROM t WHERE id = $id\";\nmysql_query($sql);\n");
        assert_eq!(
            classify(CweClass::Cwe89, &m, "page.php", 3, "sql"),
            vec!["sql-numeric".to_string()]
        );
    }

    #[test]
    fn shell_quote_states() {
        let m = model_for("<?php\nsystem(\"ping -c 1 $host\");\n");
        assert_eq!(
            classify(CweClass::Cwe78, &m, "page.php", 2, "host"),
            vec!["shell-arg-unquoted".to_string()]
        );
        let m = model_for("<?php\nsystem(\"convert '$file' out.png\");\n");
        assert_eq!(
            classify(CweClass::Cwe78, &m, "page.php", 2, "file"),
            vec!["shell-arg-single-quoted".to_string()]
        );
    }

    #[test]
    fn fixed_classes_need_no_template() {
        let m = model_for("<?php\n$x = 1;\n");
        assert_eq!(
            classify(CweClass::Cwe434, &m, "page.php", 2, "upload"),
            vec!["multipart-file-field".to_string()]
        );
        assert!(classify(CweClass::Cwe352, &m, "page.php", 2, "sql").is_empty());
    }
}
