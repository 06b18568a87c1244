//! Unified-diff parsing for corpus patches.
//!
//! Patches are stored verbatim in corpus records and get re-embedded into
//! prompts, so the parser keeps every byte it reads: headers are stored raw,
//! hunk length omission (`@@ -3 +3 @@`) and the trailing
//! `\ No newline at end of file` marker survive a parse/render round trip.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiffError {
    #[error("line {line}: malformed hunk header `{text}`")]
    MalformedHunkHeader { line: usize, text: String },
    #[error("line {line}: hunk body does not match declared counts (old {old_want} vs {old_got}, new {new_want} vs {new_got})")]
    HunkCountMismatch {
        line: usize,
        old_want: u32,
        old_got: u32,
        new_want: u32,
        new_got: u32,
    },
    #[error("line {line}: unexpected line prefix `{text}`")]
    UnexpectedLine { line: usize, text: String },
    #[error("patch contains no file sections")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HunkLineKind {
    Context,
    Added,
    Removed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HunkLine {
    pub kind: HunkLineKind,
    /// Line content without the leading ` `, `+` or `-`.
    pub text: String,
    /// The input carried a `\ No newline at end of file` marker after this line.
    pub no_newline: bool,
    /// Empty context line that arrived with no leading space (some tools trim
    /// it); re-rendered the same way.
    pub bare: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchHunk {
    pub old_start: u32,
    pub old_len: u32,
    pub new_start: u32,
    pub new_len: u32,
    /// Lengths of 1 may be omitted in the header; remembered for re-rendering.
    pub old_len_omitted: bool,
    pub new_len_omitted: bool,
    /// Raw text after the closing `@@`, leading space included.
    pub section: String,
    pub lines: Vec<HunkLine>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilePatch {
    /// Lines before the `---` header (e.g. `diff --git`, `index`), kept raw.
    pub preamble: Vec<String>,
    /// Raw header text after `--- ` / `+++ ` (path, possibly tab + metadata).
    pub old_header: String,
    pub new_header: String,
    pub hunks: Vec<PatchHunk>,
}

impl FilePatch {
    /// Repository-relative path of the patched file. Prefers the `+++` side,
    /// strips git's `a/`/`b/` prefixes and any tab-separated metadata.
    pub fn target_path(&self) -> String {
        let new = header_path(&self.new_header);
        if new != "/dev/null" {
            return new;
        }
        header_path(&self.old_header)
    }
}

fn header_path(header: &str) -> String {
    let path = header.split('\t').next().unwrap_or(header).trim_end();
    let stripped = path
        .strip_prefix("a/")
        .or_else(|| path.strip_prefix("b/"))
        .unwrap_or(path);
    stripped.to_string()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Patch {
    pub files: Vec<FilePatch>,
    /// Whether the input ended with a newline; render reproduces it.
    pub trailing_newline: bool,
}

impl Patch {
    pub fn touched_paths(&self) -> Vec<String> {
        let mut out: Vec<String> = self.files.iter().map(|f| f.target_path()).collect();
        out.dedup();
        out
    }

    /// All `+` line bodies across hunks, in order.
    pub fn added_lines(&self) -> Vec<&str> {
        self.lines_of(HunkLineKind::Added)
    }

    /// All `-` line bodies across hunks, in order.
    pub fn removed_lines(&self) -> Vec<&str> {
        self.lines_of(HunkLineKind::Removed)
    }

    fn lines_of(&self, kind: HunkLineKind) -> Vec<&str> {
        self.files
            .iter()
            .flat_map(|f| f.hunks.iter())
            .flat_map(|h| h.lines.iter())
            .filter(|l| l.kind == kind)
            .map(|l| l.text.as_str())
            .collect()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for file in &self.files {
            for pre in &file.preamble {
                out.push_str(pre);
                out.push('\n');
            }
            out.push_str("--- ");
            out.push_str(&file.old_header);
            out.push('\n');
            out.push_str("+++ ");
            out.push_str(&file.new_header);
            out.push('\n');
            for hunk in &file.hunks {
                out.push_str(&render_hunk_header(hunk));
                out.push('\n');
                for line in &hunk.lines {
                    if !line.bare {
                        out.push(match line.kind {
                            HunkLineKind::Context => ' ',
                            HunkLineKind::Added => '+',
                            HunkLineKind::Removed => '-',
                        });
                    }
                    out.push_str(&line.text);
                    out.push('\n');
                    if line.no_newline {
                        out.push_str("\\ No newline at end of file\n");
                    }
                }
            }
        }
        if !self.trailing_newline && out.ends_with('\n') {
            out.pop();
        }
        out
    }
}

fn render_hunk_header(h: &PatchHunk) -> String {
    let mut s = String::from("@@ -");
    s.push_str(&h.old_start.to_string());
    if !h.old_len_omitted {
        s.push(',');
        s.push_str(&h.old_len.to_string());
    }
    s.push_str(" +");
    s.push_str(&h.new_start.to_string());
    if !h.new_len_omitted {
        s.push(',');
        s.push_str(&h.new_len.to_string());
    }
    s.push_str(" @@");
    s.push_str(&h.section);
    s
}

impl fmt::Display for Patch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

pub fn parse_patch(text: &str) -> Result<Patch, DiffError> {
    let trailing_newline = text.ends_with('\n');
    let mut lines: Vec<&str> = text.split('\n').collect();
    if trailing_newline {
        lines.pop();
    }

    let mut files: Vec<FilePatch> = Vec::new();
    let mut preamble: Vec<String> = Vec::new();
    let mut i = 0usize;
    while i < lines.len() {
        let line = lines[i];
        if let Some(old_header) = line.strip_prefix("--- ") {
            let new_header = lines
                .get(i + 1)
                .and_then(|l| l.strip_prefix("+++ "))
                .ok_or_else(|| DiffError::UnexpectedLine {
                    line: i + 2,
                    text: lines.get(i + 1).unwrap_or(&"<eof>").to_string(),
                })?;
            let mut file = FilePatch {
                preamble: std::mem::take(&mut preamble),
                old_header: old_header.to_string(),
                new_header: new_header.to_string(),
                hunks: Vec::new(),
            };
            i += 2;
            while i < lines.len() && lines[i].starts_with("@@") {
                let (hunk, consumed) = parse_hunk(&lines, i)?;
                file.hunks.push(hunk);
                i += consumed;
            }
            files.push(file);
        } else {
            // Anything between file sections is preamble for the next one.
            preamble.push(line.to_string());
            i += 1;
        }
    }

    if files.is_empty() {
        return Err(DiffError::Empty);
    }
    // Trailing non-hunk lines would be silently lost on render; reject them.
    if let Some(stray) = preamble.iter().find(|l| !l.is_empty()) {
        return Err(DiffError::UnexpectedLine {
            line: lines.len(),
            text: stray.clone(),
        });
    }
    Ok(Patch {
        files,
        trailing_newline,
    })
}

/// Parses one hunk starting at `lines[at]`. Returns the hunk and the number of
/// input lines consumed (header + body + newline markers).
fn parse_hunk(lines: &[&str], at: usize) -> Result<(PatchHunk, usize), DiffError> {
    let header = lines[at];
    let mut hunk = parse_hunk_header(header, at + 1)?;

    let mut old_got = 0u32;
    let mut new_got = 0u32;
    let mut consumed = 1usize;
    while old_got < hunk.old_len || new_got < hunk.new_len {
        let idx = at + consumed;
        let body = lines.get(idx).ok_or_else(|| DiffError::HunkCountMismatch {
            line: at + 1,
            old_want: hunk.old_len,
            old_got,
            new_want: hunk.new_len,
            new_got,
        })?;
        let (kind, text, bare) = match body.chars().next() {
            Some(' ') => (HunkLineKind::Context, &body[1..], false),
            Some('+') => (HunkLineKind::Added, &body[1..], false),
            Some('-') => (HunkLineKind::Removed, &body[1..], false),
            // A fully empty line inside a hunk is an empty context line
            // (some tools trim the lone space).
            None => (HunkLineKind::Context, "", true),
            _ => {
                return Err(DiffError::UnexpectedLine {
                    line: idx + 1,
                    text: body.to_string(),
                })
            }
        };
        match kind {
            HunkLineKind::Context => {
                old_got += 1;
                new_got += 1;
            }
            HunkLineKind::Added => new_got += 1,
            HunkLineKind::Removed => old_got += 1,
        }
        let mut line = HunkLine {
            kind,
            text: text.to_string(),
            no_newline: false,
            bare,
        };
        consumed += 1;
        if lines
            .get(at + consumed)
            .is_some_and(|l| l.starts_with('\\'))
        {
            line.no_newline = true;
            consumed += 1;
        }
        hunk.lines.push(line);
    }
    if old_got != hunk.old_len || new_got != hunk.new_len {
        return Err(DiffError::HunkCountMismatch {
            line: at + 1,
            old_want: hunk.old_len,
            old_got,
            new_want: hunk.new_len,
            new_got,
        });
    }
    Ok((hunk, consumed))
}

fn parse_hunk_header(header: &str, line_no: usize) -> Result<PatchHunk, DiffError> {
    let err = || DiffError::MalformedHunkHeader {
        line: line_no,
        text: header.to_string(),
    };
    let rest = header.strip_prefix("@@ -").ok_or_else(err)?;
    let close = rest.find(" @@").ok_or_else(err)?;
    let (ranges, section) = (&rest[..close], &rest[close + 3..]);
    let mut parts = ranges.splitn(2, " +");
    let old = parts.next().ok_or_else(err)?;
    let new = parts.next().ok_or_else(err)?;

    let parse_range = |spec: &str| -> Result<(u32, u32, bool), DiffError> {
        match spec.split_once(',') {
            Some((start, len)) => Ok((
                start.parse().map_err(|_| err())?,
                len.parse().map_err(|_| err())?,
                false,
            )),
            None => Ok((spec.parse().map_err(|_| err())?, 1, true)),
        }
    };
    let (old_start, old_len, old_len_omitted) = parse_range(old)?;
    let (new_start, new_len, new_len_omitted) = parse_range(new)?;
    Ok(PatchHunk {
        old_start,
        old_len,
        new_start,
        new_len,
        old_len_omitted,
        new_len_omitted,
        section: section.to_string(),
        lines: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SINGLE_HUNK: &str = "\
--- a/search_results.php
+++ b/search_results.php
@@ -6,4 +6,4 @@
-$search = sanitize_search($_GET['search']);
+$search = htmlspecialchars(sanitize_search($_GET['search']), ENT_QUOTES);

 if ($search != '') {
     echo \"<input type='text' name='search' value='$search'>\";
";

    #[test]
    fn single_hunk_round_trips_byte_identical() {
        let patch = parse_patch(SINGLE_HUNK).unwrap();
        assert_eq!(patch.render(), SINGLE_HUNK);
        assert_eq!(patch.files.len(), 1);
        assert_eq!(patch.files[0].target_path(), "search_results.php");
        let hunk = &patch.files[0].hunks[0];
        assert_eq!((hunk.old_start, hunk.old_len), (6, 4));
        assert_eq!(hunk.lines.len(), 5);
    }

    #[test]
    fn added_and_removed_lines_are_harvested_in_order() {
        let patch = parse_patch(SINGLE_HUNK).unwrap();
        assert_eq!(
            patch.added_lines(),
            vec!["$search = htmlspecialchars(sanitize_search($_GET['search']), ENT_QUOTES);"]
        );
        assert_eq!(
            patch.removed_lines(),
            vec!["$search = sanitize_search($_GET['search']);"]
        );
    }

    #[test]
    fn omitted_length_and_section_text_survive() {
        let input = "\
--- a/x.php
+++ b/x.php
@@ -3 +3,2 @@ function handler()
-old();
+new_one();
+extra();
";
        let patch = parse_patch(input).unwrap();
        assert_eq!(patch.render(), input);
        let hunk = &patch.files[0].hunks[0];
        assert!(hunk.old_len_omitted);
        assert_eq!(hunk.old_len, 1);
        assert_eq!(hunk.section, " function handler()");
    }

    #[test]
    fn no_newline_marker_round_trips() {
        let input = "\
--- a/t.txt
+++ b/t.txt
@@ -1,1 +1,1 @@
-old
+new
\\ No newline at end of file
";
        let patch = parse_patch(input).unwrap();
        assert!(patch.files[0].hunks[0].lines[1].no_newline);
        assert_eq!(patch.render(), input);
    }

    #[test]
    fn count_mismatch_is_reported_with_line() {
        let input = "\
--- a/t.php
+++ b/t.php
@@ -1,3 +1,3 @@
 only one line
";
        let err = parse_patch(input).unwrap_err();
        match err {
            DiffError::HunkCountMismatch { line, .. } => assert_eq!(line, 3),
            other => panic!("wrong error: {other}"),
        }
    }

    #[test]
    fn git_preamble_is_preserved() {
        let input = "\
diff --git a/f.php b/f.php
index 111..222 100644
--- a/f.php
+++ b/f.php
@@ -1,1 +1,1 @@
-a
+b
";
        let patch = parse_patch(input).unwrap();
        assert_eq!(patch.files[0].preamble.len(), 2);
        assert_eq!(patch.render(), input);
    }
}
