//! Declarative registry of sources, sinks, filters, CSP-violating constructs
//! and the permission to API map.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::package::is_known_permission;

const DEFAULT_CATALOG: &str = include_str!("../data/catalog.json");
const DEFAULT_PERMISSION_MAP: &str = include_str!("../data/permissions.json");

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("{path}: catalog syntax error: {message}")]
    CatalogSyntaxError { path: String, message: String },
    #[error("duplicate catalog id `{0}`")]
    DuplicateId(String),
    #[error("{path}: permission map syntax error: {message}")]
    PermissionMapSyntaxError { path: String, message: String },
    #[error("catalog has no entry `{id}` required by rule {rule}")]
    UnknownCatalogEntry { rule: String, id: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Info,
    Warning,
    Error,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Info => "info",
            Severity::Warning => "warning",
            Severity::Error => "error",
        })
    }
}

impl std::str::FromStr for Severity {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "info" => Ok(Severity::Info),
            "warning" => Ok(Severity::Warning),
            "error" => Ok(Severity::Error),
            other => Err(format!("unknown severity `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchKind {
    /// `x.name = v`, static or through a constant key.
    MemberWrite,
    /// `x.name` read.
    MemberRead,
    /// Function or method call named `name`.
    Call,
    /// Call of a global function: bare, or on `window`/`self`/`globalThis`.
    GlobalCall,
    /// `new name(...)` of a global constructor.
    GlobalNew,
    /// `new C()` where `C` is defined nowhere in the app and is not a platform constructor.
    ExternalNew,
    /// Method call whose result is a filtered copy of its receiver.
    Method,
    /// Temporary element round trip through `textContent`/`innerHTML`.
    TextContentIdiom,
    /// `<script>` block inside markup.
    InlineScript,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchSpec {
    pub kind: MatchKind,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub receiver: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arg_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arg_literal: Option<String>,
    /// Exact number of arguments the call must have.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arg_count: Option<usize>,
    /// `"string"`: the argument must be string valued.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arg_type: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub id: String,
    pub severity: Severity,
    #[serde(rename = "match")]
    pub matcher: MatchSpec,
}

pub type SinkSpec = CatalogEntry;
pub type SourceSpec = CatalogEntry;
pub type FilterSpec = CatalogEntry;
pub type CspConstructSpec = CatalogEntry;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Catalog {
    pub sources: Vec<SourceSpec>,
    pub sinks: Vec<SinkSpec>,
    pub filters: Vec<FilterSpec>,
    pub csp_constructs: Vec<CspConstructSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogFile {
    #[serde(default)]
    #[allow(dead_code)]
    version: Option<u32>,
    #[serde(default)]
    sources: Vec<EntryOverride>,
    #[serde(default)]
    sinks: Vec<EntryOverride>,
    #[serde(default)]
    filters: Vec<EntryOverride>,
    #[serde(default)]
    csp_constructs: Vec<EntryOverride>,
}

#[derive(Debug, Deserialize)]
struct EntryOverride {
    id: String,
    severity: Option<Severity>,
    #[serde(rename = "match")]
    matcher: Option<MatchSpec>,
}

pub fn default_catalog() -> Catalog {
    let file: CatalogFile = serde_json::from_str(DEFAULT_CATALOG).expect("built-in catalog parses");
    let mut cat = Catalog { sources: Vec::new(), sinks: Vec::new(), filters: Vec::new(), csp_constructs: Vec::new() };
    cat.merge(file, "<builtin>").expect("built-in catalog is consistent");
    cat
}

pub fn load_catalog(path: &Path) -> Result<Catalog, CatalogError> {
    let text = fs::read_to_string(path).map_err(|source| CatalogError::Io { path: path.display().to_string(), source })?;
    parse_catalog_overrides(&text, &path.display().to_string())
}

/// Merge a catalog document over the defaults; entries replace defaults with the same id.
pub fn parse_catalog_overrides(text: &str, origin: &str) -> Result<Catalog, CatalogError> {
    let file: CatalogFile = serde_json::from_str(text)
        .map_err(|e| CatalogError::CatalogSyntaxError { path: origin.to_string(), message: e.to_string() })?;
    let mut cat = default_catalog();
    cat.merge(file, origin)?;
    Ok(cat)
}

impl Catalog {
    fn merge(&mut self, file: CatalogFile, origin: &str) -> Result<(), CatalogError> {
        let mut seen = BTreeSet::new();
        let sections = [
            (file.sources, 0usize),
            (file.sinks, 1),
            (file.filters, 2),
            (file.csp_constructs, 3),
        ];
        for (entries, section) in sections {
            for e in entries {
                if !seen.insert(e.id.clone()) {
                    return Err(CatalogError::DuplicateId(e.id));
                }
                let list = self.section_mut(section);
                if let Some(existing) = list.iter_mut().find(|x| x.id == e.id) {
                    if let Some(s) = e.severity {
                        existing.severity = s;
                    }
                    if let Some(m) = e.matcher {
                        existing.matcher = m;
                    }
                    continue;
                }
                if self.entry(&e.id).is_some() {
                    return Err(CatalogError::DuplicateId(e.id));
                }
                let Some(matcher) = e.matcher else {
                    return Err(CatalogError::CatalogSyntaxError {
                        path: origin.to_string(),
                        message: format!("new entry `{}` has no `match`", e.id),
                    });
                };
                let severity = e.severity.unwrap_or(Severity::Error);
                self.section_mut(section).push(CatalogEntry { id: e.id, severity, matcher });
            }
        }
        Ok(())
    }

    fn section_mut(&mut self, i: usize) -> &mut Vec<CatalogEntry> {
        match i {
            0 => &mut self.sources,
            1 => &mut self.sinks,
            2 => &mut self.filters,
            _ => &mut self.csp_constructs,
        }
    }

    pub fn entry(&self, id: &str) -> Option<&CatalogEntry> {
        self.sources
            .iter()
            .chain(&self.sinks)
            .chain(&self.filters)
            .chain(&self.csp_constructs)
            .find(|e| e.id == id)
    }

    pub fn sink(&self, id: &str) -> Option<&SinkSpec> {
        self.sinks.iter().find(|e| e.id == id)
    }

    /// Fail unless every id in `required` is present.
    pub fn check_required(&self, rule: &str, required: &[&str]) -> Result<(), CatalogError> {
        for id in required {
            if self.entry(id).is_none() {
                return Err(CatalogError::UnknownCatalogEntry { rule: rule.to_string(), id: id.to_string() });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ApiPatternKind {
    /// A global identifier chain such as `navigator.geolocation`.
    Chain,
    /// `new ctor(...)`, optionally requiring `{prop: value}` in the first argument.
    Ctor,
    /// A call named `prop`, optionally with an argument equal to `value`.
    Call,
    /// Any access of property `prop`.
    Member,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiPattern {
    pub kind: ApiPatternKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ctor: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prop: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PermissionMap {
    pub entries: BTreeMap<String, Vec<ApiPattern>>,
}

impl PermissionMap {
    pub fn patterns(&self, permission: &str) -> Option<&[ApiPattern]> {
        self.entries.get(permission).map(Vec::as_slice)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn default_permission_map() -> PermissionMap {
    parse_permission_map(DEFAULT_PERMISSION_MAP, "<builtin>").expect("built-in permission map parses").0
}

/// Loaded map plus warnings for permission names outside the known table.
pub fn load_permission_map(path: &Path) -> Result<(PermissionMap, Vec<String>), CatalogError> {
    let text = fs::read_to_string(path).map_err(|source| CatalogError::Io { path: path.display().to_string(), source })?;
    parse_permission_map(&text, &path.display().to_string())
}

pub fn parse_permission_map(text: &str, origin: &str) -> Result<(PermissionMap, Vec<String>), CatalogError> {
    if text.trim().is_empty() {
        return Ok((PermissionMap::default(), Vec::new()));
    }
    let err = |message: String| CatalogError::PermissionMapSyntaxError { path: origin.to_string(), message };
    let entries: BTreeMap<String, Vec<ApiPattern>> = serde_json::from_str(text).map_err(|e| err(e.to_string()))?;
    for (perm, patterns) in &entries {
        for p in patterns {
            let ok = match p.kind {
                ApiPatternKind::Chain => p.chain.is_some(),
                ApiPatternKind::Ctor => p.ctor.is_some(),
                ApiPatternKind::Call | ApiPatternKind::Member => p.prop.is_some(),
            };
            if !ok {
                return Err(err(format!("pattern for `{perm}` lacks the field its kind requires")));
            }
        }
    }
    let warnings = entries
        .keys()
        .filter(|p| !is_known_permission(p))
        .map(|p| format!("{origin}: unknown permission name `{p}`"))
        .collect();
    Ok((PermissionMap { entries }, warnings))
}
