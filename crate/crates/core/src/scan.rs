//! The per-app pipeline (load, parse, analyze, check) and corpus scanning.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::ast::{parse_script, ParsedScript, ScriptSource};
use crate::catalog::{Catalog, CatalogError, PermissionMap};
use crate::dataflow::{analyze, AnalysisOptions};
use crate::package::{
    enumerate_scripts, load_hosted, load_package, parse_hosted_records, AppPackage, Delivery, HostedRecord, Manifest,
    HOSTED_RECORDS_NAME,
};
use crate::report::{aggregate_corpus, AppSummary, CorpusStats, Diagnostic, DiagnosticKind};
use crate::rules::{check_catalog, check_hosted_manifest_scheme, run_rules, sort_findings, Finding, RuleConfig, RuleId};

/// Stack size of scanning threads; parsing and lowering recurse over the syntax tree.
pub const STACK_SIZE: usize = 64 << 20;

#[derive(Debug, Clone)]
pub struct ScanSettings {
    pub rules: RuleConfig,
    pub analysis: AnalysisOptions,
    /// Worker threads for corpus scans, at least 1.
    pub parallelism: usize,
}

impl Default for ScanSettings {
    fn default() -> Self {
        Self { rules: RuleConfig::default(), analysis: AnalysisOptions::default(), parallelism: 1 }
    }
}

/// Result of scanning one app.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AppReport {
    pub summary: AppSummary,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Clone, Default)]
pub struct CorpusScan {
    /// In corpus order: packages by file name, then hosted records by line.
    pub apps: Vec<AppReport>,
    /// Problems not tied to an app that loaded.
    pub diagnostics: Vec<Diagnostic>,
}

impl CorpusScan {
    pub fn findings(&self) -> Vec<Finding> {
        let mut out: Vec<Finding> = self.apps.iter().flat_map(|a| a.summary.findings.iter().cloned()).collect();
        sort_findings(&mut out);
        out
    }

    pub fn all_diagnostics(&self) -> Vec<Diagnostic> {
        let mut out: Vec<Diagnostic> =
            self.apps.iter().flat_map(|a| a.diagnostics.iter().cloned()).chain(self.diagnostics.iter().cloned()).collect();
        out.sort();
        out
    }

    pub fn stats(&self) -> CorpusStats {
        let summaries: Vec<AppSummary> = self.apps.iter().map(|a| a.summary.clone()).collect();
        aggregate_corpus(&summaries, &self.all_diagnostics())
    }
}

pub struct Scanner {
    catalog: Catalog,
    permissions: PermissionMap,
    settings: ScanSettings,
}

fn load_diagnostic(app: &str, message: String) -> Diagnostic {
    Diagnostic { app: app.to_string(), kind: DiagnosticKind::LoadError, file: None, line: None, column: None, message }
}

impl Scanner {
    /// Fails when an enabled rule needs a catalog entry that is missing.
    pub fn new(catalog: Catalog, permissions: PermissionMap, settings: ScanSettings) -> Result<Self, CatalogError> {
        check_catalog(&settings.rules, &catalog)?;
        Ok(Self { catalog, permissions, settings })
    }

    pub fn settings(&self) -> &ScanSettings {
        &self.settings
    }

    /// Parse, analyze and check a loaded package.
    pub fn scan_package(&self, pkg: &AppPackage) -> AppReport {
        let mut diagnostics: Vec<Diagnostic> = pkg
            .diagnostics
            .iter()
            .map(|m| Diagnostic {
                app: pkg.app_id.clone(),
                kind: DiagnosticKind::ReadError,
                file: None,
                line: None,
                column: None,
                message: m.clone(),
            })
            .collect();
        let mut scripts: Vec<ParsedScript> = Vec::new();
        let mut parse_failures = 0;
        for s in enumerate_scripts(pkg) {
            let f = pkg.file(s.file);
            let src = ScriptSource { file: s.file, path: &f.path, host: &f.content, lines: &f.lines, range: s.range };
            match parse_script(src) {
                Ok(p) => scripts.push(p),
                Err(d) => {
                    parse_failures += 1;
                    log::debug!("{}: {d}", pkg.app_id);
                    diagnostics.push(Diagnostic {
                        app: pkg.app_id.clone(),
                        kind: DiagnosticKind::ParseError,
                        file: Some(d.span.file.clone()),
                        line: Some(d.span.start_line),
                        column: Some(d.span.start_col),
                        message: d.message,
                    });
                }
            }
        }
        let g = analyze(&pkg.app_id, &scripts, &self.catalog, self.settings.analysis);
        let findings = run_rules(pkg, &g, &self.permissions, &self.settings.rules);
        let strict = self.settings.rules.paper_strict;
        let handler_registrations = g.handlers.iter().filter(|h| !strict || h.literal_call).count();
        diagnostics.sort();
        AppReport {
            summary: AppSummary {
                app_id: pkg.app_id.clone(),
                delivery: pkg.manifest.delivery,
                permissions: pkg.manifest.permissions.iter().map(|p| p.name.clone()).collect(),
                handler_registrations,
                findings,
                parse_failures,
            },
            diagnostics,
        }
    }

    /// Load and scan one package (directory or zip archive).
    pub fn scan_path(&self, path: &Path) -> Result<AppReport, Diagnostic> {
        let pkg = load_package(path).map_err(|e| load_diagnostic(&path.display().to_string(), e.to_string()))?;
        Ok(self.scan_package(&pkg))
    }

    /// Like [`Scanner::scan_path`] but on a thread with a large stack.
    pub fn scan_path_isolated(&self, path: &Path) -> Result<AppReport, Diagnostic> {
        std::thread::scope(|s| {
            std::thread::Builder::new()
                .stack_size(STACK_SIZE)
                .spawn_scoped(s, || self.scan_path(path))
                .expect("spawn scan thread")
                .join()
                .unwrap_or_else(|_| Err(load_diagnostic(&path.display().to_string(), "analysis panicked".into())))
        })
    }

    fn scan_hosted(&self, record: &HostedRecord) -> (Option<AppReport>, Vec<Diagnostic>) {
        let pkg = if record.manifest_path.is_dir() {
            // no local copy of the manifest
            let mut pkg = AppPackage::from_files(
                &record.manifest_url,
                Manifest { delivery: Delivery::Hosted, ..Manifest::default() },
                Vec::new(),
            );
            pkg.origin_url = Some(record.manifest_url.clone());
            pkg
        } else {
            match load_hosted(record) {
                Ok(p) => p,
                Err(e) => return (None, vec![load_diagnostic(&record.manifest_url, e.to_string())]),
            }
        };
        let mut findings = Vec::new();
        let mut diagnostics = Vec::new();
        if self.settings.rules.is_enabled(RuleId::HostedManifestHttp) {
            match check_hosted_manifest_scheme(record, &pkg.app_id) {
                Ok(f) => findings = f,
                Err(m) => diagnostics.push(Diagnostic {
                    app: pkg.app_id.clone(),
                    kind: DiagnosticKind::MalformedUrl,
                    file: Some(HOSTED_RECORDS_NAME.to_string()),
                    line: Some(m.line),
                    column: Some(1),
                    message: format!("{}: {}", m.url, m.message),
                }),
            }
        }
        let summary = AppSummary {
            app_id: pkg.app_id.clone(),
            delivery: Delivery::Hosted,
            permissions: pkg.manifest.permissions.iter().map(|p| p.name.clone()).collect(),
            handler_registrations: 0,
            findings,
            parse_failures: 0,
        };
        (Some(AppReport { summary, diagnostics }), Vec::new())
    }

    /// Scan every package in `dir` plus its hosted-records file, if present.
    /// Errors only when the directory itself cannot be read.
    pub fn scan_corpus(&self, dir: &Path) -> io::Result<CorpusScan> {
        let (packages, records) = corpus_entries(dir)?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.settings.parallelism.max(1))
            .stack_size(STACK_SIZE)
            .build()
            .map_err(io::Error::other)?;
        let results: Vec<Result<AppReport, Diagnostic>> = pool.install(|| {
            packages
                .par_iter()
                .map(|p| {
                    let r = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| self.scan_path(p)));
                    r.unwrap_or_else(|_| Err(load_diagnostic(&p.display().to_string(), "analysis panicked".into())))
                })
                .collect()
        });
        let mut scan = CorpusScan::default();
        for (path, r) in packages.iter().zip(results) {
            match r {
                Ok(a) => scan.apps.push(a),
                Err(mut d) => {
                    // corpus-relative names keep output independent of where the corpus lives
                    d.app = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or(d.app);
                    log::warn!("skipping {}: {}", d.app, d.message);
                    scan.diagnostics.push(d);
                }
            }
        }
        for rec in &records {
            let (app, diags) = self.scan_hosted(rec);
            scan.apps.extend(app);
            scan.diagnostics.extend(diags);
        }
        Ok(scan)
    }
}

/// Packages (subdirectories and `.zip` files) sorted by name, and hosted records.
pub fn corpus_entries(dir: &Path) -> io::Result<(Vec<PathBuf>, Vec<HostedRecord>)> {
    let mut packages = Vec::new();
    let mut records = Vec::new();
    let mut entries: Vec<fs::DirEntry> = fs::read_dir(dir)?.collect::<Result<_, _>>()?;
    entries.sort_by_key(|e| e.file_name());
    for e in entries {
        let path = e.path();
        let name = e.file_name().to_string_lossy().into_owned();
        if name == HOSTED_RECORDS_NAME {
            let text = fs::read_to_string(&path)?;
            records = parse_hosted_records(&text, dir);
        } else if path.is_dir() || name.to_ascii_lowercase().ends_with(".zip") {
            packages.push(path);
        }
    }
    Ok((packages, records))
}
