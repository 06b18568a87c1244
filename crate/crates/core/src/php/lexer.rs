//! Tokenizer for the PHP subset. Splits a source file into HTML and PHP
//! segments and tokenizes the PHP parts, tracking line numbers and byte
//! offsets so later stages can quote source text verbatim.

use super::StrPart;

#[derive(Debug, Clone, PartialEq)]
pub enum TokKind {
    /// `$name` (name stored without the `$`).
    Var(String),
    Ident(String),
    Num(String),
    Str(StrLit),
    Op(&'static str),
    Semi,
    Comma,
    OpenParen,
    CloseParen,
    OpenBrace,
    CloseBrace,
    OpenBracket,
    CloseBracket,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrLit {
    pub parts: Vec<StrPart>,
    pub single_quoted: bool,
}

impl StrLit {
    /// Literal value when the string interpolates nothing.
    pub fn literal(&self) -> Option<String> {
        let mut out = String::new();
        for part in &self.parts {
            match part {
                StrPart::Lit(s) => out.push_str(s),
                StrPart::Var { .. } => return None,
            }
        }
        Some(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tok {
    pub kind: TokKind,
    pub line: u32,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug)]
pub enum Segment {
    Html {
        text: String,
        start_line: u32,
        end_line: u32,
    },
    Php {
        toks: Vec<Tok>,
        /// Segment opened with `<?=` (implicit echo).
        echo_open: bool,
        start_line: u32,
    },
}

/// Fixed operator table, longest first so multi-char operators win.
const OPS: &[&str] = &[
    "===", "!==", "<=>", "<<<", "==", "!=", "<>", "<=", ">=", "&&", "||", "->", "=>", "++", "--",
    ".=", "+=", "-=", "*=", "/=", "%=", "??", "::", "=", ".", "+", "-", "*", "/", "%", "!", "<",
    ">", "?", ":", "&", "|", "^", "~", "@", "$",
];

pub fn lex(source: &str) -> Vec<Segment> {
    let bytes = source.as_bytes();
    let mut segments = Vec::new();
    let mut pos = 0usize;
    let mut line = 1u32;

    while pos < bytes.len() {
        // HTML mode: copy until an opening tag.
        let open = find(source, pos, "<?");
        let html_end = open.unwrap_or(bytes.len());
        if html_end > pos {
            let text = &source[pos..html_end];
            let start_line = line;
            line += count_newlines(text);
            if !text.trim().is_empty() {
                segments.push(Segment::Html {
                    text: text.to_string(),
                    start_line,
                    end_line: start_line + count_newlines(text.trim_end()),
                });
            }
        }
        let Some(open) = open else { break };

        // Opening tag variants: `<?php`, `<?=`, bare `<?`.
        let (tag_len, echo_open) = if source[open..].starts_with("<?php") {
            (5, false)
        } else if source[open..].starts_with("<?=") {
            (3, true)
        } else {
            (2, false)
        };
        let start_line = line;
        pos = open + tag_len;
        let (toks, new_pos, new_line) = lex_php(source, pos, line);
        pos = new_pos;
        line = new_line;
        segments.push(Segment::Php {
            toks,
            echo_open,
            start_line,
        });
    }
    segments
}

fn find(s: &str, from: usize, needle: &str) -> Option<usize> {
    s[from..].find(needle).map(|i| i + from)
}

fn count_newlines(s: &str) -> u32 {
    s.bytes().filter(|&b| b == b'\n').count() as u32
}

/// Tokenizes PHP code until `?>` or end of input. Returns tokens, the
/// position after the close tag, and the current line.
fn lex_php(source: &str, mut pos: usize, mut line: u32) -> (Vec<Tok>, usize, u32) {
    let bytes = source.as_bytes();
    let mut toks = Vec::new();

    while pos < bytes.len() {
        let c = bytes[pos];
        match c {
            b'\n' => {
                line += 1;
                pos += 1;
            }
            b' ' | b'\t' | b'\r' => pos += 1,
            b'?' if source[pos..].starts_with("?>") => {
                pos += 2;
                return (toks, pos, line);
            }
            b'/' if source[pos..].starts_with("//") => {
                let (p, l) = skip_line_comment(source, pos + 2, line);
                pos = p;
                line = l;
                // A close tag ends a single-line comment in PHP.
                if source[..pos].ends_with("?>") {
                    return (toks, pos, line);
                }
            }
            b'#' => {
                let (p, l) = skip_line_comment(source, pos + 1, line);
                pos = p;
                line = l;
                if source[..pos].ends_with("?>") {
                    return (toks, pos, line);
                }
            }
            b'/' if source[pos..].starts_with("/*") => {
                let end = find(source, pos + 2, "*/").map(|i| i + 2).unwrap_or(bytes.len());
                line += count_newlines(&source[pos..end]);
                pos = end;
            }
            b'\'' | b'"' => {
                let start = pos;
                let start_line = line;
                let (lit, p, l) = lex_string(source, pos, line);
                pos = p;
                line = l;
                toks.push(Tok {
                    kind: TokKind::Str(lit),
                    line: start_line,
                    start,
                    end: pos,
                });
            }
            b'<' if source[pos..].starts_with("<<<") => {
                let start = pos;
                let start_line = line;
                let (lit, p, l) = lex_heredoc(source, pos, line);
                pos = p;
                line = l;
                toks.push(Tok {
                    kind: TokKind::Str(lit),
                    line: start_line,
                    start,
                    end: pos,
                });
            }
            b'$' if pos + 1 < bytes.len() && is_ident_start(bytes[pos + 1]) => {
                let start = pos;
                let end = ident_end(bytes, pos + 1);
                toks.push(Tok {
                    kind: TokKind::Var(source[pos + 1..end].to_string()),
                    line,
                    start,
                    end,
                });
                pos = end;
            }
            _ if is_ident_start(c) => {
                let end = ident_end(bytes, pos);
                toks.push(Tok {
                    kind: TokKind::Ident(source[pos..end].to_string()),
                    line,
                    start: pos,
                    end,
                });
                pos = end;
            }
            _ if c.is_ascii_digit() => {
                let mut end = pos + 1;
                while end < bytes.len()
                    && (bytes[end].is_ascii_alphanumeric() || bytes[end] == b'.' || bytes[end] == b'_')
                {
                    end += 1;
                }
                toks.push(Tok {
                    kind: TokKind::Num(source[pos..end].to_string()),
                    line,
                    start: pos,
                    end,
                });
                pos = end;
            }
            b';' => {
                toks.push(simple(TokKind::Semi, line, pos));
                pos += 1;
            }
            b',' => {
                toks.push(simple(TokKind::Comma, line, pos));
                pos += 1;
            }
            b'(' => {
                toks.push(simple(TokKind::OpenParen, line, pos));
                pos += 1;
            }
            b')' => {
                toks.push(simple(TokKind::CloseParen, line, pos));
                pos += 1;
            }
            b'{' => {
                toks.push(simple(TokKind::OpenBrace, line, pos));
                pos += 1;
            }
            b'}' => {
                toks.push(simple(TokKind::CloseBrace, line, pos));
                pos += 1;
            }
            b'[' => {
                toks.push(simple(TokKind::OpenBracket, line, pos));
                pos += 1;
            }
            b']' => {
                toks.push(simple(TokKind::CloseBracket, line, pos));
                pos += 1;
            }
            _ => {
                if let Some(op) = OPS.iter().find(|op| source[pos..].starts_with(**op)) {
                    toks.push(Tok {
                        kind: TokKind::Op(op),
                        line,
                        start: pos,
                        end: pos + op.len(),
                    });
                    pos += op.len();
                } else {
                    // Unknown byte (e.g. stray backslash): skip it.
                    pos += 1;
                }
            }
        }
    }
    (toks, pos, line)
}

fn simple(kind: TokKind, line: u32, pos: usize) -> Tok {
    Tok {
        kind,
        line,
        start: pos,
        end: pos + 1,
    }
}

fn skip_line_comment(source: &str, mut pos: usize, line: u32) -> (usize, u32) {
    let bytes = source.as_bytes();
    while pos < bytes.len() {
        if bytes[pos] == b'\n' {
            return (pos, line);
        }
        if source[pos..].starts_with("?>") {
            return (pos + 2, line);
        }
        pos += 1;
    }
    (pos, line)
}

fn is_ident_start(b: u8) -> bool {
    b.is_ascii_alphabetic() || b == b'_' || b >= 0x80
}

fn is_ident_continue(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b >= 0x80
}

fn ident_end(bytes: &[u8], mut pos: usize) -> usize {
    while pos < bytes.len() && is_ident_continue(bytes[pos]) {
        pos += 1;
    }
    pos
}

fn lex_string(source: &str, pos: usize, line: u32) -> (StrLit, usize, u32) {
    let bytes = source.as_bytes();
    let quote = bytes[pos];
    if quote == b'\'' {
        let mut value = String::new();
        let mut i = pos + 1;
        let mut line = line;
        while i < bytes.len() {
            match bytes[i] {
                b'\\' if i + 1 < bytes.len() && (bytes[i + 1] == b'\'' || bytes[i + 1] == b'\\') => {
                    value.push(bytes[i + 1] as char);
                    i += 2;
                }
                b'\'' => {
                    return (
                        StrLit {
                            parts: vec![StrPart::Lit(value)],
                            single_quoted: true,
                        },
                        i + 1,
                        line,
                    )
                }
                b'\n' => {
                    value.push('\n');
                    line += 1;
                    i += 1;
                }
                _ => {
                    let ch_len = utf8_len(bytes[i]);
                    value.push_str(&source[i..i + ch_len]);
                    i += ch_len;
                }
            }
        }
        (
            StrLit {
                parts: vec![StrPart::Lit(value)],
                single_quoted: true,
            },
            i,
            line,
        )
    } else {
        let (parts, end, line) = lex_interpolated(source, pos + 1, line, |b, s, i| {
            b == b'"' && s.as_bytes()[i] == b'"'
        });
        (
            StrLit {
                parts,
                single_quoted: false,
            },
            end + 1,
            line,
        )
    }
}

/// Heredoc / nowdoc. `<<<ID ... ID;` — body handled like a double-quoted
/// string (nowdoc quoting is accepted but still interpolates; close enough
/// for analysis).
fn lex_heredoc(source: &str, pos: usize, line: u32) -> (StrLit, usize, u32) {
    let bytes = source.as_bytes();
    let mut i = pos + 3;
    while i < bytes.len() && (bytes[i] == b'\'' || bytes[i] == b'"' || bytes[i] == b' ') {
        i += 1;
    }
    let id_start = i;
    i = ident_end(bytes, i);
    let id = &source[id_start..i];
    // Skip to start of body (next line).
    while i < bytes.len() && bytes[i] != b'\n' {
        i += 1;
    }
    let body_start = i + 1;
    let mut cur_line = line + 1;
    // Find the terminator line.
    let mut search = body_start;
    let mut body_end = bytes.len();
    let mut after = bytes.len();
    while search < bytes.len() {
        let line_end = find(source, search, "\n").unwrap_or(bytes.len());
        let line_text = source[search..line_end].trim_end_matches(';').trim();
        if line_text == id {
            body_end = search.saturating_sub(1);
            after = line_end;
            break;
        }
        search = line_end + 1;
    }
    let body = &source[body_start..body_end.max(body_start)];
    cur_line += count_newlines(&source[body_start..after.min(bytes.len())]);
    let (parts, _, _) = lex_interpolated(body, 0, line, |_, _, _| false);
    (
        StrLit {
            parts,
            single_quoted: false,
        },
        after,
        cur_line,
    )
}

/// Scans a double-quoted string body (or heredoc body), producing literal and
/// interpolated-variable parts. `is_close` decides when to stop.
fn lex_interpolated(
    source: &str,
    start: usize,
    start_line: u32,
    is_close: fn(u8, &str, usize) -> bool,
) -> (Vec<StrPart>, usize, u32) {
    let bytes = source.as_bytes();
    let mut parts: Vec<StrPart> = Vec::new();
    let mut lit = String::new();
    let mut i = start;
    let mut line = start_line;

    let flush = |lit: &mut String, parts: &mut Vec<StrPart>| {
        if !lit.is_empty() {
            parts.push(StrPart::Lit(std::mem::take(lit)));
        }
    };

    while i < bytes.len() {
        let b = bytes[i];
        if is_close(b, source, i) {
            break;
        }
        match b {
            b'\\' if i + 1 < bytes.len() => {
                let esc = bytes[i + 1];
                match esc {
                    b'n' => lit.push('\n'),
                    b't' => lit.push('\t'),
                    b'r' => lit.push('\r'),
                    b'0' => lit.push('\0'),
                    b'"' => lit.push('"'),
                    b'\\' => lit.push('\\'),
                    b'$' => lit.push('$'),
                    _ => {
                        lit.push('\\');
                        lit.push(esc as char);
                    }
                }
                i += 2;
            }
            b'$' if i + 1 < bytes.len() && is_ident_start(bytes[i + 1]) => {
                flush(&mut lit, &mut parts);
                let name_end = ident_end(bytes, i + 1);
                let name = source[i + 1..name_end].to_string();
                i = name_end;
                // `$arr[key]` / `$arr['key']` directly inside the string.
                let mut index = None;
                if i < bytes.len() && bytes[i] == b'[' {
                    if let Some(close) = find(source, i, "]") {
                        let key = source[i + 1..close].trim_matches(|c| c == '\'' || c == '"');
                        index = Some(key.to_string());
                        i = close + 1;
                    }
                }
                parts.push(StrPart::Var { name, index });
            }
            b'{' if i + 1 < bytes.len() && bytes[i + 1] == b'$' => {
                flush(&mut lit, &mut parts);
                let close = find(source, i, "}").unwrap_or(bytes.len());
                let inner = &source[i + 2..close];
                let (name, index) = match inner.find('[') {
                    Some(br) => {
                        let key = inner[br + 1..]
                            .trim_end_matches(']')
                            .trim_matches(|c| c == '\'' || c == '"');
                        (inner[..br].to_string(), Some(key.to_string()))
                    }
                    None => (inner.trim_end_matches("->").to_string(), None),
                };
                parts.push(StrPart::Var { name, index });
                i = close + 1;
            }
            b'\n' => {
                lit.push('\n');
                line += 1;
                i += 1;
            }
            _ => {
                let ch_len = utf8_len(b);
                lit.push_str(&source[i..i + ch_len]);
                i += ch_len;
            }
        }
    }
    flush(&mut lit, &mut parts);
    (parts, i, line)
}

fn utf8_len(b: u8) -> usize {
    match b {
        0x00..=0x7f => 1,
        0xc0..=0xdf => 2,
        0xe0..=0xef => 3,
        _ => 4,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn php_toks(src: &str) -> Vec<Tok> {
        let segs = lex(src);
        match segs.into_iter().next().unwrap() {
            Segment::Php { toks, .. } => toks,
            other => panic!("expected php segment, got {other:?}"),
        }
    }

    #[test]
    fn splits_html_and_php_segments_with_lines() {
        let src = "<html>\n<?php echo 1; ?>\n<b>x</b>\n";
        let segs = lex(src);
        assert_eq!(segs.len(), 3);
        match &segs[0] {
            Segment::Html { start_line, .. } => assert_eq!(*start_line, 1),
            _ => panic!(),
        }
        match &segs[2] {
            Segment::Html { text, .. } => assert!(text.contains("<b>x</b>")),
            _ => panic!(),
        }
    }

    #[test]
    fn interpolation_extracts_variable_parts() {
        let toks = php_toks("<?php $x = \"<a href='$url'>{$row['name']}</a>\";");
        let lit = toks
            .iter()
            .find_map(|t| match &t.kind {
                TokKind::Str(s) => Some(s.clone()),
                _ => None,
            })
            .unwrap();
        let vars: Vec<_> = lit
            .parts
            .iter()
            .filter_map(|p| match p {
                StrPart::Var { name, index } => Some((name.clone(), index.clone())),
                _ => None,
            })
            .collect();
        assert_eq!(
            vars,
            vec![
                ("url".to_string(), None),
                ("row".to_string(), Some("name".to_string()))
            ]
        );
    }

    #[test]
    fn superglobal_subscript_inside_string() {
        let toks = php_toks("<?php echo \"val=$_GET[search]\";");
        let has = toks.iter().any(|t| match &t.kind {
            TokKind::Str(s) => s.parts.iter().any(|p| {
                matches!(p, StrPart::Var { name, index } if name == "_GET" && index.as_deref() == Some("search"))
            }),
            _ => false,
        });
        assert!(has);
    }

    #[test]
    fn single_quotes_do_not_interpolate() {
        let toks = php_toks("<?php $x = 'no $var here';");
        let lit = toks
            .iter()
            .find_map(|t| match &t.kind {
                TokKind::Str(s) => s.literal(),
                _ => None,
            })
            .unwrap();
        assert_eq!(lit, "no $var here");
    }

    #[test]
    fn close_tag_ends_line_comment() {
        let src = "<?php echo 1; // trailing ?>\n<b>html</b>\n";
        let segs = lex(src);
        assert!(matches!(segs.last().unwrap(), Segment::Html { .. }));
    }

    #[test]
    fn operators_lex_longest_first() {
        let toks = php_toks("<?php $a .= $b === $c;");
        let ops: Vec<_> = toks
            .iter()
            .filter_map(|t| match t.kind {
                TokKind::Op(o) => Some(o),
                _ => None,
            })
            .collect();
        assert_eq!(ops, vec![".=", "==="]);
    }
}
