//! Application packages: loading from zip or directory, manifest parsing, and
//! enumeration of analyzable script content.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::span::{LineIndex, SourceSpan, Span};

pub const MANIFEST_NAME: &str = "manifest.webapp";
/// Record file listing hosted apps, looked up at the corpus root.
pub const HOSTED_RECORDS_NAME: &str = "hosted-manifests.tsv";

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{0}: no {MANIFEST_NAME} found")]
    MissingManifest(String),
    #[error("{path}: archive error: {message}")]
    ArchiveError { path: String, message: String },
    #[error("manifest is not valid JSON: {0}")]
    ManifestSyntaxError(String),
    #[error("manifest schema error: {0}")]
    ManifestSchemaError(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FileId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    #[default]
    Web,
    Privileged,
    Certified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Delivery {
    #[default]
    Packaged,
    Hosted,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PermissionRequest {
    pub name: String,
    pub access_qualifier: Option<String>,
}

impl PermissionRequest {
    pub fn is_known(&self) -> bool {
        is_known_permission(&self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub category: Category,
    pub delivery: Delivery,
    /// Sorted by name, one entry per manifest key.
    pub permissions: Vec<PermissionRequest>,
    pub launch_path: String,
    pub redirects: Vec<String>,
}

impl Manifest {
    pub fn requests(&self, permission: &str) -> bool {
        self.permissions.iter().any(|p| p.name == permission)
    }

    pub fn unknown_permissions(&self) -> impl Iterator<Item = &PermissionRequest> {
        self.permissions.iter().filter(|p| !p.is_known())
    }

    /// Manifest JSON that [`parse_manifest`] reads back to an equal value.
    pub fn render(&self) -> String {
        let mut perms = serde_json::Map::new();
        for p in &self.permissions {
            let body = match &p.access_qualifier {
                Some(a) => json!({ "access": a }),
                None => json!({}),
            };
            perms.insert(p.name.clone(), body);
        }
        let mut doc = json!({
            "name": self.name,
            "type": self.category,
            "permissions": perms,
            "launch_path": self.launch_path,
            "redirects": self.redirects,
        });
        if self.delivery == Delivery::Hosted {
            doc["delivery"] = json!("hosted");
        }
        serde_json::to_string_pretty(&doc).expect("manifest renders")
    }
}

/// Permission names of the platform permission table.
pub const KNOWN_PERMISSIONS: &[&str] = &[
    "alarms",
    "attention",
    "audio-capture",
    "audio-channel-alarm",
    "audio-channel-content",
    "audio-channel-normal",
    "audio-channel-notification",
    "audio-channel-publicnotification",
    "audio-channel-ringer",
    "audio-channel-telephony",
    "background-sensors",
    "backgroundservice",
    "bluetooth",
    "browser",
    "camera",
    "cellbroadcast",
    "contacts",
    "desktop-notification",
    "device-storage:apps",
    "device-storage:music",
    "device-storage:pictures",
    "device-storage:sdcard",
    "device-storage:videos",
    "embed-apps",
    "fmradio",
    "geolocation",
    "idle",
    "input",
    "input-manage",
    "mobileconnection",
    "mobilenetwork",
    "moz-firefox-accounts",
    "network-events",
    "networkstats-manage",
    "nfc",
    "nfc-manager",
    "open-remote-window",
    "permissions",
    "phonenumberservice",
    "power",
    "push",
    "settings",
    "sms",
    "speaker-control",
    "storage",
    "systemXHR",
    "tcp-socket",
    "telephony",
    "time",
    "toytimer",
    "video-capture",
    "voicemail",
    "wappush",
    "webapps-manage",
    "wifi-manage",
    "wifi-scan",
];

pub fn is_known_permission(name: &str) -> bool {
    KNOWN_PERMISSIONS.binary_search(&name).is_ok()
}

pub fn parse_manifest(bytes: &[u8]) -> Result<Manifest, LoadError> {
    let text = String::from_utf8_lossy(bytes);
    let text = text.trim_start_matches('\u{feff}');
    let doc: Value = serde_json::from_str(text).map_err(|e| LoadError::ManifestSyntaxError(e.to_string()))?;
    let obj = doc
        .as_object()
        .ok_or_else(|| LoadError::ManifestSchemaError("top level is not an object".into()))?;
    let str_field = |k: &str| obj.get(k).and_then(Value::as_str).unwrap_or_default().to_string();

    let category = match obj.get("type").and_then(Value::as_str) {
        Some("privileged") => Category::Privileged,
        Some("certified") => Category::Certified,
        _ => Category::Web,
    };
    let delivery = match obj.get("delivery").and_then(Value::as_str) {
        Some("hosted") => Delivery::Hosted,
        _ => Delivery::Packaged,
    };

    let permissions = match obj.get("permissions") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Object(map)) => {
            let mut perms: Vec<_> = map
                .iter()
                .filter(|(name, _)| !name.is_empty())
                .map(|(name, body)| PermissionRequest {
                    name: name.clone(),
                    access_qualifier: body.get("access").and_then(Value::as_str).map(str::to_string),
                })
                .collect();
            perms.sort();
            perms
        }
        Some(_) => return Err(LoadError::ManifestSchemaError("`permissions` is not an object".into())),
    };

    let mut redirects = Vec::new();
    if let Some(Value::Array(items)) = obj.get("redirects") {
        for item in items {
            match item {
                Value::String(s) => redirects.push(s.clone()),
                Value::Object(r) => {
                    for key in ["from", "to"] {
                        if let Some(s) = r.get(key).and_then(Value::as_str) {
                            redirects.push(s.to_string());
                        }
                    }
                }
                _ => {}
            }
        }
    }

    Ok(Manifest {
        name: str_field("name"),
        category,
        delivery,
        permissions,
        launch_path: str_field("launch_path"),
        redirects,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FileKind {
    Script,
    Markup,
    Other,
}

impl FileKind {
    pub fn from_path(path: &str) -> Self {
        let ext = path.rsplit_once('.').map(|(_, e)| e.to_ascii_lowercase());
        match ext.as_deref() {
            Some("js" | "mjs") => FileKind::Script,
            Some("html" | "htm") => FileKind::Markup,
            _ => FileKind::Other,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SourceFile {
    pub path: String,
    pub kind: FileKind,
    /// Lossily decoded text; empty for `Other` files except the manifest.
    pub content: String,
    /// Byte ranges of inline scripts inside markup, in file order.
    pub inline_scripts: Vec<Span>,
    pub lines: LineIndex,
}

impl SourceFile {
    pub fn new(path: impl Into<String>, bytes: &[u8]) -> Self {
        let path = path.into();
        let kind = FileKind::from_path(&path);
        // the manifest text is kept so findings can point into it
        let content = match kind {
            FileKind::Other if path != MANIFEST_NAME => String::new(),
            _ => String::from_utf8_lossy(bytes).into_owned(),
        };
        let inline_scripts = match kind {
            FileKind::Markup => extract_inline_scripts(&content),
            _ => Vec::new(),
        };
        let lines = LineIndex::new(&content);
        Self { path, kind, content, inline_scripts, lines }
    }
}

#[derive(Debug, Clone)]
pub struct AppPackage {
    pub app_id: String,
    pub manifest: Manifest,
    /// Sorted by path.
    pub files: Vec<SourceFile>,
    pub origin_url: Option<String>,
    /// Entries that could not be read; the rest of the package still loads.
    pub diagnostics: Vec<String>,
}

impl AppPackage {
    pub fn from_files(package_name: &str, manifest: Manifest, mut files: Vec<SourceFile>) -> Self {
        files.sort_by(|a, b| a.path.cmp(&b.path));
        files.dedup_by(|a, b| a.path == b.path);
        let name = if manifest.name.is_empty() { "unnamed" } else { manifest.name.as_str() };
        Self {
            app_id: format!("{name}@{package_name}"),
            manifest,
            files,
            origin_url: None,
            diagnostics: Vec::new(),
        }
    }

    pub fn file(&self, id: FileId) -> &SourceFile {
        &self.files[id.0 as usize]
    }

    /// File, line and column of a byte range inside one of the package files.
    pub fn source_span(&self, id: FileId, span: Span) -> SourceSpan {
        let f = self.file(id);
        f.lines.resolve(&f.path, &f.content, span)
    }
}

/// One analyzable script: a whole script file or an inline block of markup.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScriptRef {
    pub file: FileId,
    pub range: Span,
    pub inline: bool,
}

pub fn enumerate_scripts(pkg: &AppPackage) -> Vec<ScriptRef> {
    let mut out = Vec::new();
    for (i, f) in pkg.files.iter().enumerate() {
        let file = FileId(i as u32);
        match f.kind {
            FileKind::Script => out.push(ScriptRef { file, range: Span::new(0, f.content.len() as u32), inline: false }),
            FileKind::Markup => {
                out.extend(f.inline_scripts.iter().map(|&range| ScriptRef { file, range, inline: true }))
            }
            FileKind::Other => {}
        }
    }
    out
}

pub fn load_package(path: &Path) -> Result<AppPackage, LoadError> {
    let package_name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    let io = |source| LoadError::Io { path: path.display().to_string(), source };
    let meta = fs::metadata(path).map_err(io)?;
    let mut diagnostics = Vec::new();
    let (manifest_bytes, files) = if meta.is_dir() {
        read_directory(path, &mut diagnostics)?
    } else {
        read_zip(path, &mut diagnostics)?
    };
    let manifest_bytes = manifest_bytes.ok_or_else(|| LoadError::MissingManifest(path.display().to_string()))?;
    let manifest = parse_manifest(&manifest_bytes)?;
    let mut pkg = AppPackage::from_files(&package_name, manifest, files);
    pkg.diagnostics = diagnostics;
    Ok(pkg)
}

type Contents = (Option<Vec<u8>>, Vec<SourceFile>);

fn read_directory(root: &Path, diagnostics: &mut Vec<String>) -> Result<Contents, LoadError> {
    let mut manifest = None;
    let mut files = Vec::new();
    for entry in walkdir::WalkDir::new(root).sort_by_file_name() {
        let entry = match entry {
            Ok(e) => e,
            Err(e) => {
                diagnostics.push(e.to_string());
                continue;
            }
        };
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry.path().strip_prefix(root).unwrap_or(entry.path());
        let rel = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
        let bytes = match fs::read(entry.path()) {
            Ok(b) => b,
            Err(e) => {
                diagnostics.push(format!("{rel}: {e}"));
                continue;
            }
        };
        if rel == MANIFEST_NAME {
            manifest = Some(bytes.clone());
        }
        files.push(SourceFile::new(rel, &bytes));
    }
    Ok((manifest, files))
}

fn read_zip(path: &Path, diagnostics: &mut Vec<String>) -> Result<Contents, LoadError> {
    let archive_err = |e: zip::result::ZipError| LoadError::ArchiveError {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let file = fs::File::open(path).map_err(|source| LoadError::Io { path: path.display().to_string(), source })?;
    let mut archive = zip::ZipArchive::new(file).map_err(archive_err)?;
    let mut manifest = None;
    let mut files = Vec::new();
    for i in 0..archive.len() {
        let mut entry = archive.by_index(i).map_err(archive_err)?;
        if entry.is_dir() {
            continue;
        }
        let name = match entry.name() {
            Ok(n) => n.trim_start_matches("./").to_string(),
            Err(e) => {
                diagnostics.push(format!("entry {i}: {e}"));
                continue;
            }
        };
        let mut bytes = Vec::new();
        if let Err(e) = entry.read_to_end(&mut bytes) {
            diagnostics.push(format!("{name}: {e}"));
            continue;
        }
        if name == MANIFEST_NAME {
            manifest = Some(bytes.clone());
        }
        files.push(SourceFile::new(name, &bytes));
    }
    Ok((manifest, files))
}

/// A hosted app: the URL its manifest is served from and a local copy of it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HostedRecord {
    pub manifest_url: String,
    pub manifest_path: PathBuf,
    /// 1-based line of the record in its file.
    pub line: u32,
}

/// Parse `manifest_url<TAB>local_manifest_path` lines; relative paths resolve against `base`.
pub fn parse_hosted_records(text: &str, base: &Path) -> Vec<HostedRecord> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i as u32 + 1, l.trim_end()))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|(n, line)| {
            let (url, local) = line.split_once('\t').unwrap_or((line, ""));
            HostedRecord { manifest_url: url.trim().to_string(), manifest_path: base.join(local.trim()), line: n }
        })
        .collect()
}

pub fn load_hosted(record: &HostedRecord) -> Result<AppPackage, LoadError> {
    let bytes = fs::read(&record.manifest_path)
        .map_err(|source| LoadError::Io { path: record.manifest_path.display().to_string(), source })?;
    let mut manifest = parse_manifest(&bytes)?;
    manifest.delivery = Delivery::Hosted;
    let mut pkg = AppPackage::from_files(&record.manifest_url, manifest, Vec::new());
    pkg.origin_url = Some(record.manifest_url.clone());
    Ok(pkg)
}

fn find_ci(hay: &[u8], needle: &[u8], from: usize) -> Option<usize> {
    if needle.len() > hay.len() {
        return None;
    }
    (from..=hay.len() - needle.len()).find(|&i| hay[i..i + needle.len()].eq_ignore_ascii_case(needle))
}

/// Attributes of an opening tag starting just after its name, up to the closing `>`.
fn parse_attributes(bytes: &[u8], mut i: usize) -> (BTreeMap<String, String>, usize) {
    let mut attrs = BTreeMap::new();
    loop {
        while i < bytes.len() && (bytes[i].is_ascii_whitespace() || bytes[i] == b'/') {
            i += 1;
        }
        if i >= bytes.len() {
            return (attrs, i);
        }
        if bytes[i] == b'>' {
            return (attrs, i + 1);
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() && !matches!(bytes[i], b'=' | b'>' | b'/') {
            i += 1;
        }
        let name = String::from_utf8_lossy(&bytes[start..i]).to_ascii_lowercase();
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        let mut value = String::new();
        if i < bytes.len() && bytes[i] == b'=' {
            i += 1;
            while i < bytes.len() && bytes[i].is_ascii_whitespace() {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'"' || bytes[i] == b'\'') {
                let q = bytes[i];
                let vstart = i + 1;
                i = vstart;
                while i < bytes.len() && bytes[i] != q {
                    i += 1;
                }
                value = String::from_utf8_lossy(&bytes[vstart..i.min(bytes.len())]).into_owned();
                i += 1;
            } else {
                let vstart = i;
                while i < bytes.len() && !bytes[i].is_ascii_whitespace() && bytes[i] != b'>' {
                    i += 1;
                }
                value = String::from_utf8_lossy(&bytes[vstart..i]).into_owned();
            }
        }
        if start == i {
            i += 1;
        }
        attrs.entry(name).or_insert(value);
    }
}

fn is_script_type(t: &str) -> bool {
    let t = t.split(';').next().unwrap_or("").trim().to_ascii_lowercase();
    matches!(
        t.as_str(),
        "" | "module"
            | "text/javascript"
            | "application/javascript"
            | "application/x-javascript"
            | "text/ecmascript"
            | "application/ecmascript"
            | "text/jsx"
    )
}

/// Byte ranges of inline `<script>` bodies (external and non-JS scripts excluded).
pub fn extract_inline_scripts(html: &str) -> Vec<Span> {
    let bytes = html.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let Some(lt) = bytes[i..].iter().position(|&b| b == b'<').map(|p| p + i) else { break };
        if bytes[lt..].starts_with(b"<!--") {
            i = find_ci(bytes, b"-->", lt + 4).map_or(bytes.len(), |p| p + 3);
            continue;
        }
        let tag_end = lt + 7;
        let is_script = tag_end <= bytes.len()
            && bytes[lt + 1..tag_end].eq_ignore_ascii_case(b"script")
            && bytes.get(tag_end).is_none_or(|b| b.is_ascii_whitespace() || *b == b'>' || *b == b'/');
        if !is_script {
            i = lt + 1;
            continue;
        }
        let (attrs, body_start) = parse_attributes(bytes, tag_end);
        let body_end = find_ci(bytes, b"</script", body_start).unwrap_or(bytes.len());
        let external = attrs.contains_key("src");
        let js = attrs.get("type").is_none_or(|t| is_script_type(t));
        if !external && js && body_start < body_end {
            out.push(Span::new(body_start as u32, body_end as u32));
        }
        i = body_end.max(body_start);
    }
    out
}
