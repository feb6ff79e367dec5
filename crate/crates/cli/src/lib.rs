//! Scan orchestration behind the `appsentry` command.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use appsentry_core::catalog::{default_catalog, default_permission_map, load_catalog, load_permission_map, Severity};
use appsentry_core::dataflow::AnalysisOptions;
use appsentry_core::report::{exit_status, render_corpus, render_findings, Format};
use appsentry_core::rules::{RuleConfig, RuleId};
use appsentry_core::scan::{ScanSettings, Scanner};

/// Exit code for scanner errors: bad arguments, unreadable input.
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Clone)]
pub struct ScanConfig {
    pub rules: Vec<RuleId>,
    pub catalog: Option<PathBuf>,
    pub permission_map: Option<PathBuf>,
    pub format: Format,
    pub threshold: Severity,
    pub parallelism: usize,
    pub paper_strict: bool,
    pub context_depth: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            rules: RuleId::ALL.to_vec(),
            catalog: None,
            permission_map: None,
            format: Format::Text,
            threshold: Severity::Warning,
            parallelism: 1,
            paper_strict: false,
            context_depth: 1,
        }
    }
}

/// Rendered document plus the process exit code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub output: String,
    pub exit_code: i32,
}

/// Parse a comma-separated rule list. An empty list disables every rule.
pub fn parse_rules(s: &str) -> Result<Vec<RuleId>> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let r: RuleId = part.parse().map_err(anyhow::Error::msg)?;
        if !out.contains(&r) {
            out.push(r);
        }
    }
    Ok(out)
}

/// Build a scanner from the catalog, permission map and rule settings of `cfg`.
pub fn scanner(cfg: &ScanConfig) -> Result<Scanner> {
    anyhow::ensure!(cfg.parallelism >= 1, "parallelism must be at least 1");
    let catalog = match &cfg.catalog {
        Some(p) => load_catalog(p)?,
        None => default_catalog(),
    };
    let permissions = match &cfg.permission_map {
        Some(p) => {
            let (map, warnings) = load_permission_map(p)?;
            for w in warnings {
                log::warn!("{w}");
            }
            map
        }
        None => default_permission_map(),
    };
    let settings = ScanSettings {
        rules: RuleConfig { enabled: cfg.rules.clone(), paper_strict: cfg.paper_strict },
        analysis: AnalysisOptions { context_depth: cfg.context_depth, ..AnalysisOptions::default() },
        parallelism: cfg.parallelism,
    };
    Ok(Scanner::new(catalog, permissions, settings)?)
}

/// Scan one package. Load failures are errors (exit 2); parse failures are reported and the scan goes on.
pub fn run_scan(path: &Path, cfg: &ScanConfig) -> Result<Outcome> {
    let s = scanner(cfg)?;
    let report = s.scan_path_isolated(path).map_err(|d| anyhow::anyhow!("{d}"))?;
    for d in &report.diagnostics {
        log::warn!("{d}");
    }
    let findings = &report.summary.findings;
    Ok(Outcome {
        output: render_findings(findings, &report.diagnostics, cfg.format),
        exit_code: exit_status(findings, cfg.threshold),
    })
}

/// Scan every package of a corpus directory. With `stats_only` the findings
/// are left out of the document and do not affect the exit code.
pub fn run_corpus(dir: &Path, cfg: &ScanConfig, stats_only: bool) -> Result<Outcome> {
    let s = scanner(cfg)?;
    let scan = s.scan_corpus(dir).with_context(|| format!("cannot read corpus {}", dir.display()))?;
    let diagnostics = scan.all_diagnostics();
    for d in &diagnostics {
        log::warn!("{d}");
    }
    let findings = scan.findings();
    let stats = scan.stats();
    log::info!("scanned {} apps, {} findings", stats.total_apps, findings.len());
    let shown = (!stats_only).then_some(findings.as_slice());
    Ok(Outcome {
        output: render_corpus(shown, &diagnostics, &stats, cfg.format),
        exit_code: if stats_only { 0 } else { exit_status(&findings, cfg.threshold) },
    })
}
