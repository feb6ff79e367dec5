//! Detection rules over a labeled graph and the app manifest.

mod csp;
mod hosted;
mod injection;
mod origin;
mod permission;
mod plaintext;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, CatalogError, PermissionMap, Severity};
use crate::dataflow::{DefUseGraph, Site};
use crate::package::AppPackage;
use crate::span::SourceSpan;

pub use csp::check_csp_violations;
pub use hosted::{check_hosted_manifest_scheme, MalformedUrl};
pub use injection::check_html_injection;
pub use origin::check_origin_validation;
pub use permission::check_overpermission;
pub use plaintext::check_plaintext_http;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleId {
    OriginValidation,
    HtmlInjection,
    PlaintextHttp,
    Overpermission,
    CspViolation,
    HostedManifestHttp,
}

impl RuleId {
    pub const ALL: [RuleId; 6] = [
        RuleId::OriginValidation,
        RuleId::HtmlInjection,
        RuleId::PlaintextHttp,
        RuleId::Overpermission,
        RuleId::CspViolation,
        RuleId::HostedManifestHttp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RuleId::OriginValidation => "origin_validation",
            RuleId::HtmlInjection => "html_injection",
            RuleId::PlaintextHttp => "plaintext_http",
            RuleId::Overpermission => "overpermission",
            RuleId::CspViolation => "csp_violation",
            RuleId::HostedManifestHttp => "hosted_manifest_http",
        }
    }

    pub fn default_severity(self) -> Severity {
        match self {
            RuleId::OriginValidation | RuleId::PlaintextHttp | RuleId::HostedManifestHttp => Severity::Warning,
            RuleId::HtmlInjection | RuleId::CspViolation => Severity::Error,
            RuleId::Overpermission => Severity::Info,
        }
    }

    /// Catalog entries the rule refers to by id.
    pub fn required_labels(self) -> &'static [&'static str] {
        match self {
            RuleId::HtmlInjection => &["replace_escape", "text_content_idiom"],
            RuleId::CspViolation => &["inline_script"],
            _ => &[],
        }
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RuleId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RuleId::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| format!("unknown rule `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    pub role: String,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub rule_id: RuleId,
    pub severity: Severity,
    pub app_id: String,
    pub span: SourceSpan,
    pub evidence: Vec<Evidence>,
    pub message: String,
}

impl Finding {
    pub(crate) fn at(rule_id: RuleId, pkg: &AppPackage, site: Site, message: String) -> Self {
        Finding {
            rule_id,
            severity: rule_id.default_severity(),
            app_id: pkg.app_id.clone(),
            span: pkg.source_span(site.file, site.span),
            evidence: Vec::new(),
            message,
        }
    }

    pub(crate) fn with(mut self, pkg: &AppPackage, role: &str, site: Site) -> Self {
        self.evidence.push(Evidence { role: role.to_string(), span: pkg.source_span(site.file, site.span) });
        self
    }

    pub fn sort_key(&self) -> (&str, &str, u32, RuleId, &str) {
        (&self.app_id, &self.span.file, self.span.byte_start, self.rule_id, &self.message)
    }
}

pub fn sort_findings(findings: &mut [Finding]) {
    findings.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()).then_with(|| a.evidence.len().cmp(&b.evidence.len())));
}

/// Which rules run and how strictly.
#[derive(Debug, Clone)]
pub struct RuleConfig {
    pub enabled: Vec<RuleId>,
    /// Only literal `addEventListener("message", ..)` registrations count.
    pub paper_strict: bool,
}

impl Default for RuleConfig {
    fn default() -> Self {
        Self { enabled: RuleId::ALL.to_vec(), paper_strict: false }
    }
}

impl RuleConfig {
    pub fn is_enabled(&self, r: RuleId) -> bool {
        self.enabled.contains(&r)
    }
}

/// Fail early when an enabled rule refers to a catalog entry that is missing.
pub fn check_catalog(cfg: &RuleConfig, cat: &Catalog) -> Result<(), CatalogError> {
    for r in &cfg.enabled {
        cat.check_required(r.as_str(), r.required_labels())?;
    }
    Ok(())
}

/// Run every enabled per-app rule on one analyzed app. Results are sorted.
pub fn run_rules(pkg: &AppPackage, g: &DefUseGraph, pm: &PermissionMap, cfg: &RuleConfig) -> Vec<Finding> {
    let mut out = Vec::new();
    if cfg.is_enabled(RuleId::OriginValidation) {
        out.extend(check_origin_validation(g, pkg, cfg.paper_strict));
    }
    if cfg.is_enabled(RuleId::HtmlInjection) {
        out.extend(check_html_injection(g, pkg));
    }
    if cfg.is_enabled(RuleId::PlaintextHttp) {
        out.extend(check_plaintext_http(g, pkg));
    }
    if cfg.is_enabled(RuleId::Overpermission) {
        out.extend(check_overpermission(g, pkg, pm));
    }
    if cfg.is_enabled(RuleId::CspViolation) {
        out.extend(check_csp_violations(g, pkg));
    }
    sort_findings(&mut out);
    out
}
