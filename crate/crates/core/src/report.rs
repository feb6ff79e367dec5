//! Rendering of findings and corpus statistics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::catalog::Severity;
use crate::package::Delivery;
use crate::rules::{sort_findings, Finding, RuleId};

/// Version of the JSON documents written by [`render_findings`] and [`render_corpus`].
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Text,
    Json,
}

impl std::str::FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(Format::Text),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticKind {
    /// The package could not be loaded at all.
    LoadError,
    /// A script did not parse; the rest of the app was still analyzed.
    ParseError,
    /// An archive entry or directory entry could not be read.
    ReadError,
    /// A hosted-manifest record whose URL does not parse.
    MalformedUrl,
}

/// A problem with the input, reported apart from findings.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Diagnostic {
    /// App id, or the path of the package when it did not load.
    pub app: String,
    pub kind: DiagnosticKind,
    pub file: Option<String>,
    pub line: Option<u32>,
    pub column: Option<u32>,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: ", self.app)?;
        if let Some(file) = &self.file {
            write!(f, "{file}")?;
            if let (Some(l), Some(c)) = (self.line, self.column) {
                write!(f, ":{l}:{c}")?;
            }
            write!(f, ": ")?;
        }
        write!(f, "{}", self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FindingsDocument {
    pub schema_version: u32,
    pub findings: Vec<Finding>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Findings of one app as text lines or a JSON document, in canonical order.
pub fn render_findings(findings: &[Finding], diagnostics: &[Diagnostic], format: Format) -> String {
    let mut findings = findings.to_vec();
    sort_findings(&mut findings);
    let mut diagnostics = diagnostics.to_vec();
    diagnostics.sort();
    match format {
        Format::Text => findings_text(&findings),
        Format::Json => {
            let doc = FindingsDocument { schema_version: SCHEMA_VERSION, findings, diagnostics };
            let mut s = serde_json::to_string_pretty(&doc).expect("findings serialize");
            s.push('\n');
            s
        }
    }
}

fn findings_text(findings: &[Finding]) -> String {
    if findings.is_empty() {
        return "no findings\n".to_string();
    }
    let mut out = String::new();
    for f in findings {
        let _ = writeln!(
            out,
            "{} {} {} {}:{}:{} {}",
            f.app_id, f.rule_id, f.severity, f.span.file, f.span.start_line, f.span.start_col, f.message
        );
    }
    out
}

/// 1 if any finding is at or above `threshold`, else 0. Scanner errors (2) are decided by the caller.
pub fn exit_status(findings: &[Finding], threshold: Severity) -> i32 {
    i32::from(findings.iter().any(|f| f.severity >= threshold))
}

/// What the corpus statistics need to know about one scanned app.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AppSummary {
    pub app_id: String,
    pub delivery: Delivery,
    pub permissions: Vec<String>,
    /// Message handler registrations found in the code.
    pub handler_registrations: usize,
    pub findings: Vec<Finding>,
    pub parse_failures: usize,
}

impl AppSummary {
    fn has(&self, rule: RuleId) -> bool {
        self.findings.iter().any(|f| f.rule_id == rule)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CorpusStats {
    /// Apps that loaded, including those with script parse failures.
    pub total_apps: u64,
    pub packaged_apps: u64,
    pub hosted_apps: u64,
    /// Packages that did not load and were skipped.
    pub load_failures: u64,
    pub parse_failure_apps: u64,
    pub diagnostics: u64,
    pub apps_per_permission: BTreeMap<String, u64>,
    pub total_permission_requests: u64,
    /// Percent of all permission requests, one decimal.
    pub permission_request_shares: BTreeMap<String, f64>,
    pub handler_apps: u64,
    pub nonvalidating_handler_apps: u64,
    pub xhr_plaintext_apps: u64,
    pub overpermissioned_apps: u64,
    pub html_injection_apps: u64,
    pub csp_violation_apps: u64,
    pub hosted_http_manifest_count: u64,
    /// Percent of hosted apps whose manifest URL is plain http, one decimal.
    pub hosted_http_manifest_share: f64,
}

/// `count / total` as a percentage in tenths, rounded half up. Zero when `total` is zero.
pub fn share_tenths(count: u64, total: u64) -> u64 {
    if total == 0 {
        return 0;
    }
    (count * 1000 + total / 2) / total
}

fn share(count: u64, total: u64) -> f64 {
    share_tenths(count, total) as f64 / 10.0
}

pub fn aggregate_corpus(apps: &[AppSummary], diagnostics: &[Diagnostic]) -> CorpusStats {
    let mut st = CorpusStats::default();
    for app in apps {
        st.total_apps += 1;
        match app.delivery {
            Delivery::Packaged => st.packaged_apps += 1,
            Delivery::Hosted => st.hosted_apps += 1,
        }
        let perms: BTreeSet<&String> = app.permissions.iter().collect();
        for p in perms {
            *st.apps_per_permission.entry(p.clone()).or_default() += 1;
            st.total_permission_requests += 1;
        }
        if app.parse_failures > 0 {
            st.parse_failure_apps += 1;
        }
        if app.handler_registrations > 0 {
            st.handler_apps += 1;
            if app.has(RuleId::OriginValidation) {
                st.nonvalidating_handler_apps += 1;
            }
        }
        st.xhr_plaintext_apps += u64::from(app.has(RuleId::PlaintextHttp));
        st.overpermissioned_apps += u64::from(app.has(RuleId::Overpermission));
        st.html_injection_apps += u64::from(app.has(RuleId::HtmlInjection));
        st.csp_violation_apps += u64::from(app.has(RuleId::CspViolation));
        st.hosted_http_manifest_count += u64::from(app.has(RuleId::HostedManifestHttp));
    }
    st.load_failures = diagnostics.iter().filter(|d| d.kind == DiagnosticKind::LoadError).count() as u64;
    st.diagnostics = diagnostics.len() as u64;
    st.permission_request_shares = st
        .apps_per_permission
        .iter()
        .map(|(p, &c)| (p.clone(), share(c, st.total_permission_requests)))
        .collect();
    st.hosted_http_manifest_share = share(st.hosted_http_manifest_count, st.hosted_apps);
    st
}

/// One row of the permission table.
#[derive(Debug, Clone, PartialEq)]
pub struct PermissionRow {
    pub label: String,
    pub apps: u64,
    pub share: f64,
}

/// Permission table rows, most requested first. With `top`, the remaining
/// permissions fold into one "N other permissions" row whose share is the
/// sum of the individually rounded shares.
pub fn permission_rows(stats: &CorpusStats, top: Option<usize>) -> Vec<PermissionRow> {
    let total = stats.total_permission_requests;
    let mut counts: Vec<(&String, u64)> = stats.apps_per_permission.iter().map(|(p, &c)| (p, c)).collect();
    counts.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let keep = top.unwrap_or(counts.len()).min(counts.len());
    let mut rows: Vec<PermissionRow> = counts[..keep]
        .iter()
        .map(|(p, c)| PermissionRow { label: p.to_string(), apps: *c, share: share(*c, total) })
        .collect();
    let rest = &counts[keep..];
    if !rest.is_empty() {
        let apps = rest.iter().map(|(_, c)| c).sum();
        let tenths: u64 = rest.iter().map(|(_, c)| share_tenths(*c, total)).sum();
        rows.push(PermissionRow {
            label: format!("{} other permissions", rest.len()),
            apps,
            share: tenths as f64 / 10.0,
        });
    }
    rows
}

/// Aligned text table with the columns Permission, Apps and share, then the app counters.
pub fn render_stats_text(stats: &CorpusStats, top: Option<usize>) -> String {
    let rows = permission_rows(stats, top);
    let total_label = "Total".to_string();
    let width = rows.iter().map(|r| r.label.len()).chain([total_label.len(), "Permission".len()]).max().unwrap_or(10);
    let mut out = String::new();
    let _ = writeln!(out, "{:<width$}  {:>6}", "Permission", "Apps");
    for r in &rows {
        let _ = writeln!(out, "{:<width$}  {:>6}  ({:.1}%)", r.label, r.apps, r.share);
    }
    let _ = writeln!(out, "{:<width$}  {:>6}  (100%)", total_label, stats.total_permission_requests);
    out.push('\n');
    let counters = [
        ("apps", stats.total_apps),
        ("packaged apps", stats.packaged_apps),
        ("hosted apps", stats.hosted_apps),
        ("load failures", stats.load_failures),
        ("apps with parse failures", stats.parse_failure_apps),
        ("apps registering message handlers", stats.handler_apps),
        ("handlers without origin check", stats.nonvalidating_handler_apps),
        ("apps with plaintext XHR", stats.xhr_plaintext_apps),
        ("overpermissioned apps", stats.overpermissioned_apps),
        ("apps with HTML injection", stats.html_injection_apps),
        ("apps violating CSP", stats.csp_violation_apps),
    ];
    let w = counters.iter().map(|(l, _)| l.len()).max().unwrap_or(0);
    for (label, n) in counters {
        let _ = writeln!(out, "{label:<w$}  {n}");
    }
    let _ = writeln!(
        out,
        "{:<w$}  {} ({:.1}%)",
        "hosted manifests over http", stats.hosted_http_manifest_count, stats.hosted_http_manifest_share
    );
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusDocument {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub findings: Option<Vec<Finding>>,
    pub diagnostics: Vec<Diagnostic>,
    pub stats: CorpusStats,
}

/// Corpus output: findings (unless suppressed) followed by statistics.
pub fn render_corpus(
    findings: Option<&[Finding]>,
    diagnostics: &[Diagnostic],
    stats: &CorpusStats,
    format: Format,
) -> String {
    let findings = findings.map(|f| {
        let mut f = f.to_vec();
        sort_findings(&mut f);
        f
    });
    let mut diagnostics = diagnostics.to_vec();
    diagnostics.sort();
    match format {
        Format::Text => {
            let mut out = String::new();
            if let Some(f) = &findings {
                out.push_str(&findings_text(f));
                out.push('\n');
            }
            out.push_str(&render_stats_text(stats, None));
            out
        }
        Format::Json => {
            let doc = CorpusDocument { schema_version: SCHEMA_VERSION, findings, diagnostics, stats: stats.clone() };
            let mut s = serde_json::to_string_pretty(&doc).expect("corpus serializes");
            s.push('\n');
            s
        }
    }
}
