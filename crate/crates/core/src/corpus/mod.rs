//! Corpus records: one disclosed vulnerability per record, with the public
//! artifacts an attacker could obtain (description, patch, affected files)
//! and the ground truth needed for scoring.
//!
//! Records are TOML documents, one file per record. Scenario projection
//! (`build_scenario`) narrows a record to the disclosure stage under test and
//! is byte-preserving: prompts built from an S1 input can never leak patch or
//! file bytes because those fields are simply absent.

pub mod diff;

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use diff::{parse_patch, DiffError, FilePatch, HunkLine, HunkLineKind, Patch, PatchHunk};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("corpus directory {0}: {1}")]
    Dir(String, std::io::Error),
    #[error("record {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("record {path}: {message}")]
    Malformed { path: String, message: String },
    #[error("record id {0} not found in corpus")]
    UnknownRecord(String),
}

/// The five weakness classes the pipeline understands. Everything except
/// CSRF and unrestricted upload is handled by the same taint-style analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CweClass {
    /// OS command injection.
    Cwe78,
    /// Cross-site scripting.
    Cwe79,
    /// SQL injection.
    Cwe89,
    /// Cross-site request forgery.
    Cwe352,
    /// Unrestricted file upload.
    Cwe434,
}

impl CweClass {
    pub fn parse(s: &str) -> Option<CweClass> {
        match s.trim().to_ascii_uppercase().as_str() {
            "CWE-78" | "CWE78" | "78" => Some(CweClass::Cwe78),
            "CWE-79" | "CWE79" | "79" => Some(CweClass::Cwe79),
            "CWE-89" | "CWE89" | "89" => Some(CweClass::Cwe89),
            "CWE-352" | "CWE352" | "352" => Some(CweClass::Cwe352),
            "CWE-434" | "CWE434" | "434" => Some(CweClass::Cwe434),
            _ => None,
        }
    }

    /// True for the classes where a tainted value must reach a sink
    /// (command/SQL/markup injection). CSRF needs no tainted data and upload
    /// handling gets its own sub-task plan.
    pub fn is_taint_style(self) -> bool {
        matches!(self, CweClass::Cwe78 | CweClass::Cwe79 | CweClass::Cwe89)
    }

    pub fn label(self) -> &'static str {
        match self {
            CweClass::Cwe78 => "CWE-78",
            CweClass::Cwe79 => "CWE-79",
            CweClass::Cwe89 => "CWE-89",
            CweClass::Cwe352 => "CWE-352",
            CweClass::Cwe434 => "CWE-434",
        }
    }

    /// Human name used in role-playing prompt text.
    pub fn role_noun(self) -> &'static str {
        match self {
            CweClass::Cwe78 => "OS command injection",
            CweClass::Cwe79 => "cross-site scripting",
            CweClass::Cwe89 => "SQL injection",
            CweClass::Cwe352 => "cross-site request forgery",
            CweClass::Cwe434 => "unrestricted file upload",
        }
    }
}

impl fmt::Display for CweClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VulnFile {
    /// Relative, '/'-separated path inside the application root.
    pub path: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CveRecord {
    pub id: String,
    /// Weakness class label, e.g. `CWE-79`.
    pub cwe: String,
    pub cvss: f64,
    /// Public vulnerability description (advisory text).
    pub description: String,
    /// Unified diff of the fix.
    pub patch: String,
    /// Complete source of the affected files (vulnerable versions). Must
    /// cover at least every path the patch touches.
    pub files: Vec<VulnFile>,
    /// Application origin, e.g. `http://demo.app`.
    pub base_url: String,
    /// Publicly accessible entry page of the application.
    pub entry_url: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth_poc: Option<String>,
    /// Extra state-changing callee patterns for CSRF sink detection,
    /// overriding the built-in defaults for this record only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semantic_sinks: Option<Vec<String>>,
}

impl CveRecord {
    pub fn cwe_class(&self) -> Result<CweClass, CorpusError> {
        CweClass::parse(&self.cwe).ok_or_else(|| CorpusError::Malformed {
            path: self.id.clone(),
            message: format!("unknown weakness class `{}`", self.cwe),
        })
    }

    pub fn file(&self, path: &str) -> Option<&VulnFile> {
        self.files.iter().find(|f| f.path == path)
    }

    /// Structural validation. Returns every problem rather than the first.
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if self.id.trim().is_empty() {
            problems.push("empty record id".to_string());
        }
        if CweClass::parse(&self.cwe).is_none() {
            problems.push(format!("unknown weakness class `{}`", self.cwe));
        }
        if !(0.0..=10.0).contains(&self.cvss) {
            problems.push(format!("cvss {} outside 0.0..=10.0", self.cvss));
        }
        for file in &self.files {
            if let Err(msg) = check_rel_path(&file.path) {
                problems.push(format!("file path `{}`: {msg}", file.path));
            }
        }
        let mut seen = BTreeSet::new();
        for file in &self.files {
            if !seen.insert(file.path.as_str()) {
                problems.push(format!("duplicate file path `{}`", file.path));
            }
        }
        match parse_patch(&self.patch) {
            Ok(patch) => {
                for touched in patch.touched_paths() {
                    if self.file(&touched).is_none() {
                        problems.push(format!(
                            "patch touches `{touched}` which is not in files"
                        ));
                    }
                }
            }
            Err(e) => problems.push(format!("patch does not parse: {e}")),
        }
        for (name, value) in [("base_url", &self.base_url), ("entry_url", &self.entry_url)] {
            if url::Url::parse(value).is_err() {
                problems.push(format!("{name} `{value}` is not a valid URL"));
            }
        }
        problems
    }
}

fn check_rel_path(path: &str) -> Result<(), String> {
    if path.is_empty() {
        return Err("empty".to_string());
    }
    if path.starts_with('/') || path.contains('\\') {
        return Err("must be relative and '/'-separated".to_string());
    }
    if path.split('/').any(|seg| seg == "..") {
        return Err("must not contain '..'".to_string());
    }
    Ok(())
}

/// Disclosure stage: which public artifacts the attacker has.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scenario {
    /// Description only.
    S1,
    /// Description and patch.
    S2,
    /// Description, patch and affected files.
    S3,
}

impl Scenario {
    pub fn label(self) -> &'static str {
        match self {
            Scenario::S1 => "S1",
            Scenario::S2 => "S2",
            Scenario::S3 => "S3",
        }
    }

    pub fn parse(s: &str) -> Option<Scenario> {
        match s.trim().to_ascii_uppercase().as_str() {
            "S1" => Some(Scenario::S1),
            "S2" => Some(Scenario::S2),
            "S3" => Some(Scenario::S3),
            _ => None,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// A record projected down to one disclosure stage. Field contents are
/// byte-identical clones of the record's; withheld artifacts are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioInput {
    pub id: String,
    pub cwe: CweClass,
    pub stage: Scenario,
    pub description: String,
    pub patch: Option<String>,
    pub files: Option<Vec<VulnFile>>,
}

pub fn build_scenario(record: &CveRecord, stage: Scenario) -> Result<ScenarioInput, CorpusError> {
    let cwe = record.cwe_class()?;
    Ok(ScenarioInput {
        id: record.id.clone(),
        cwe,
        stage,
        description: record.description.clone(),
        patch: match stage {
            Scenario::S1 => None,
            Scenario::S2 | Scenario::S3 => Some(record.patch.clone()),
        },
        files: match stage {
            Scenario::S1 | Scenario::S2 => None,
            Scenario::S3 => Some(record.files.clone()),
        },
    })
}

/// One skipped or suspect record found while loading a corpus.
#[derive(Debug, Clone)]
pub struct CorpusIssue {
    pub path: String,
    pub message: String,
}

#[derive(Debug)]
pub struct CorpusLoad {
    /// Well-formed records, sorted by id.
    pub records: Vec<CveRecord>,
    /// Malformed records are reported here, never panicked on.
    pub issues: Vec<CorpusIssue>,
}

/// Loads every `*.toml` record under `dir` (non-recursive). Malformed records
/// become issues; IO failure on the directory itself is fatal.
pub fn load_corpus(dir: &Path) -> Result<CorpusLoad, CorpusError> {
    let entries =
        std::fs::read_dir(dir).map_err(|e| CorpusError::Dir(dir.display().to_string(), e))?;
    let mut paths: Vec<_> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "toml"))
        .collect();
    paths.sort();

    let mut records = Vec::new();
    let mut issues = Vec::new();
    for path in paths {
        let display = path.display().to_string();
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) => {
                issues.push(CorpusIssue {
                    path: display,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let record: CveRecord = match toml::from_str(&text) {
            Ok(r) => r,
            Err(e) => {
                issues.push(CorpusIssue {
                    path: display,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let problems = record.validate();
        if problems.is_empty() {
            records.push(record);
        } else {
            issues.push(CorpusIssue {
                path: display,
                message: problems.join("; "),
            });
        }
    }
    records.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(CorpusLoad { records, issues })
}

pub fn find_record<'a>(load: &'a CorpusLoad, id: &str) -> Result<&'a CveRecord, CorpusError> {
    load.records
        .iter()
        .find(|r| r.id == id)
        .ok_or_else(|| CorpusError::UnknownRecord(id.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_record() -> CveRecord {
        CveRecord {
            id: "demo-1".to_string(),
            cwe: "CWE-79".to_string(),
            cvss: 6.1,
            description: "Reflected XSS via the search parameter.".to_string(),
            patch: "--- a/a.php\n+++ b/a.php\n@@ -1,1 +1,1 @@\n-echo $x;\n+echo htmlspecialchars($x);\n"
                .to_string(),
            files: vec![VulnFile {
                path: "a.php".to_string(),
                content: "<?php echo $x; ?>\n".to_string(),
            }],
            base_url: "http://demo.app".to_string(),
            entry_url: "http://demo.app/a.php".to_string(),
            ground_truth_poc: None,
            semantic_sinks: None,
        }
    }

    #[test]
    fn scenario_projection_withholds_exactly_the_right_fields() {
        let record = sample_record();
        let s1 = build_scenario(&record, Scenario::S1).unwrap();
        assert!(s1.patch.is_none() && s1.files.is_none());
        let s2 = build_scenario(&record, Scenario::S2).unwrap();
        assert_eq!(s2.patch.as_deref(), Some(record.patch.as_str()));
        assert!(s2.files.is_none());
        let s3 = build_scenario(&record, Scenario::S3).unwrap();
        assert_eq!(s3.files.as_ref().unwrap(), &record.files);
        assert_eq!(s3.description, record.description);
    }

    #[test]
    fn validation_flags_patch_file_mismatch() {
        let mut record = sample_record();
        record.files[0].path = "other.php".to_string();
        let problems = record.validate();
        assert!(problems.iter().any(|p| p.contains("patch touches `a.php`")));
    }

    #[test]
    fn validation_rejects_traversal_and_absolute_paths() {
        let mut record = sample_record();
        record.files.push(VulnFile {
            path: "../etc/passwd".to_string(),
            content: String::new(),
        });
        record.files.push(VulnFile {
            path: "/abs.php".to_string(),
            content: String::new(),
        });
        let problems = record.validate();
        assert!(problems.iter().any(|p| p.contains("'..'")));
        assert!(problems.iter().any(|p| p.contains("relative")));
    }

    #[test]
    fn unknown_cwe_is_reported() {
        let mut record = sample_record();
        record.cwe = "CWE-22".to_string();
        assert!(record
            .validate()
            .iter()
            .any(|p| p.contains("unknown weakness class")));
    }
}
