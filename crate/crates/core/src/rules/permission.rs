//! Permissions requested in the manifest whose API the code never touches.

use serde_json::Value;

use super::{Finding, RuleId};
use crate::catalog::{ApiPattern, ApiPatternKind, PermissionMap};
use crate::dataflow::DefUseGraph;
use crate::jsvalue::JsConst;
use crate::package::{AppPackage, MANIFEST_NAME};
use crate::span::{SourceSpan, Span};

fn const_matches(c: Option<&JsConst>, want: &Value) -> bool {
    match (c, want) {
        (Some(JsConst::Str(s)), Value::String(w)) => s == w,
        (Some(JsConst::Bool(b)), Value::Bool(w)) => b == w,
        (Some(JsConst::Num(n)), Value::Number(w)) => w.as_f64() == Some(*n),
        (Some(JsConst::Null), Value::Null) => true,
        _ => false,
    }
}

fn chain_used(g: &DefUseGraph, chain: &str) -> bool {
    let suffix = format!(".{chain}");
    g.chains.iter().any(|c| c == chain || c.ends_with(&suffix))
}

fn pattern_used(g: &DefUseGraph, p: &ApiPattern) -> bool {
    match p.kind {
        ApiPatternKind::Chain => p.chain.as_deref().is_some_and(|c| chain_used(g, c)),
        ApiPatternKind::Ctor => {
            let Some(ctor) = p.ctor.as_deref() else { return false };
            let suffix = format!(".{ctor}");
            g.calls.iter().filter(|c| c.is_new).any(|call| {
                let named = match &call.callee_chain {
                    Some(chain) => chain == ctor || chain.ends_with(&suffix),
                    None => false,
                };
                if !named {
                    return false;
                }
                let Some(prop) = p.prop.as_deref() else { return true };
                call.args.iter().any(|a| {
                    g.object_props(*a).iter().any(|(k, v)| {
                        k == prop && p.value.as_ref().is_none_or(|want| const_matches(g.const_of(*v), want))
                    })
                })
            })
        }
        ApiPatternKind::Call => {
            let Some(name) = p.prop.as_deref() else { return false };
            g.calls.iter().filter(|c| c.name.as_deref() == Some(name)).any(|call| match &p.value {
                None => true,
                Some(want) => call.args.iter().any(|a| const_matches(g.const_of(*a), want)),
            })
        }
        ApiPatternKind::Member => {
            let Some(prop) = p.prop.as_deref() else { return false };
            g.accesses.iter().any(|a| a.prop.as_deref() == Some(prop)) || chain_used(g, prop)
        }
    }
}

/// Span of the permission's key inside the manifest, or the manifest's first line.
fn permission_span(pkg: &AppPackage, name: &str) -> SourceSpan {
    if let Some((i, f)) = pkg.files.iter().enumerate().find(|(_, f)| f.path == MANIFEST_NAME) {
        let key = format!("\"{name}\"");
        let after = f.content.find("\"permissions\"").unwrap_or(0);
        if let Some(pos) = f.content[after..].find(&key) {
            let start = (after + pos) as u32;
            return pkg.source_span(crate::package::FileId(i as u32), Span::new(start, start + key.len() as u32));
        }
    }
    SourceSpan {
        file: MANIFEST_NAME.to_string(),
        start_line: 1,
        start_col: 1,
        end_line: 1,
        end_col: 1,
        byte_start: 0,
        byte_end: 0,
    }
}

pub fn check_overpermission(g: &DefUseGraph, pkg: &AppPackage, pm: &PermissionMap) -> Vec<Finding> {
    let mut out = Vec::new();
    for req in &pkg.manifest.permissions {
        let Some(patterns) = pm.patterns(&req.name) else { continue };
        if patterns.is_empty() || patterns.iter().any(|p| pattern_used(g, p)) {
            continue;
        }
        out.push(Finding {
            rule_id: RuleId::Overpermission,
            severity: RuleId::Overpermission.default_severity(),
            app_id: pkg.app_id.clone(),
            span: permission_span(pkg, &req.name),
            evidence: Vec::new(),
            message: format!("permission `{}` is requested but its API is never used", req.name),
        });
    }
    out
}
