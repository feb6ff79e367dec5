//! Resolution of sinks, sources, filters and CSP constructs against the catalog.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::*;
use crate::catalog::{CatalogEntry, MatchKind};

/// Value arriving at a sink.
#[derive(Debug, Clone, Serialize)]
pub struct SinkUse {
    pub sink_id: String,
    /// Assignment span for member writes, call span for calls.
    pub site: Site,
    pub value: ValueId,
    pub access: Option<AccessId>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SourceSite {
    pub node: ValueId,
    pub id: String,
    pub site: Site,
}

#[derive(Debug, Clone, Serialize)]
pub struct FilterSite {
    /// Node holding the filtered value.
    pub node: ValueId,
    pub id: String,
    pub site: Site,
    /// Inputs whose data the filter sanitizes.
    pub inputs: Vec<ValueId>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CspUse {
    pub id: String,
    pub site: Site,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Labels {
    pub sinks: Vec<SinkUse>,
    pub sources: Vec<SourceSite>,
    pub filters: Vec<FilterSite>,
    pub csp: Vec<CspUse>,
    #[serde(skip)]
    filter_index: BTreeMap<ValueId, usize>,
}

impl Labels {
    pub fn is_filter(&self, v: ValueId) -> bool {
        self.filter_index.contains_key(&v)
    }

    pub fn filter_at(&self, v: ValueId) -> Option<&FilterSite> {
        self.filter_index.get(&v).map(|i| &self.filters[*i])
    }
}

/// Platform constructors that never denote external data.
const BUILTIN_CTORS: &[&str] = &[
    "ActiveXObject", "Array", "ArrayBuffer", "Audio", "Blob", "Boolean", "CustomEvent", "DOMParser", "DataView",
    "Date", "Error", "Event", "EventSource", "File", "FileReader", "Float32Array", "Float64Array", "FormData",
    "Function", "Image", "Int16Array", "Int32Array", "Int8Array", "Intl", "Map", "MessageChannel", "MozActivity",
    "MutationObserver", "Notification", "Number", "Object", "Option", "Promise", "Proxy", "RangeError", "RegExp",
    "Request", "Response", "Set", "String", "Symbol", "TypeError", "Uint16Array", "Uint32Array", "Uint8Array",
    "Uint8ClampedArray", "URL", "WeakMap", "WeakSet", "WebSocket", "Worker", "XMLHttpRequest", "XMLSerializer",
    "XPathEvaluator", "mozContact",
];

const GLOBAL_OBJECTS: &[&str] = &["window", "self", "globalThis"];

/// Whether type `t` is, or is a property path rooted at, an instance of `name`.
fn rooted_at(g: &DefUseGraph, t: TypeId, name: &str) -> bool {
    let root = g.types.root(t);
    match g.types.kind(root) {
        TypeKind::ObjectProto(v) => g.var(*v).name == name,
        TypeKind::Host(h) => h == name,
        _ => false,
    }
}

fn receiver_matches(g: &DefUseGraph, value: ValueId, chain: Option<&str>, name: &str) -> bool {
    if g.types_of(value).iter().any(|t| rooted_at(g, *t, name)) {
        return true;
    }
    chain
        .and_then(|c| c.rsplit('.').next())
        .is_some_and(|last| last.eq_ignore_ascii_case(name))
}

fn is_undefined_global(g: &DefUseGraph, v: ValueId) -> Option<&str> {
    let var = g.var_of(v)?;
    let var_info = g.var(var);
    (var_info.kind == VarKind::Global && g.defs_by_var[var.index()].is_empty()).then_some(var_info.name.as_str())
}

/// Global function called bare or through `window.` and friends.
fn global_callee<'g>(g: &'g DefUseGraph, call: &'g CallSite) -> Option<&'g str> {
    if call.bare {
        return is_undefined_global(g, call.callee);
    }
    let chain = call.callee_chain.as_deref()?;
    let (root, last) = chain.split_once('.')?;
    (GLOBAL_OBJECTS.contains(&root) && !last.contains('.')).then_some(last)
}

fn arg_ok(g: &DefUseGraph, call: &CallSite, spec: &crate::catalog::MatchSpec) -> bool {
    if spec.arg_count.is_some_and(|n| call.args.len() != n) {
        return false;
    }
    let Some(i) = spec.arg_index else { return true };
    let Some(&arg) = call.args.get(i) else { return false };
    if let Some(lit) = &spec.arg_literal {
        if g.const_str(arg) != Some(lit.as_str()) {
            return false;
        }
    }
    match spec.arg_type.as_deref() {
        Some("string") => g.is_string_valued(arg),
        _ => true,
    }
}

fn sink_args(call: &CallSite, spec: &crate::catalog::MatchSpec) -> Vec<ValueId> {
    match spec.arg_index {
        Some(i) => call.args.get(i).copied().into_iter().collect(),
        None => call.args.clone(),
    }
}

/// Temporary-element idiom: `d = createElement(..)`, then within the same or
/// the next statement `d.textContent = x` and a read of `d.innerHTML` (or the
/// reverse). Returns (write access, read access) pairs.
fn text_content_idioms(g: &DefUseGraph) -> Vec<(AccessId, AccessId)> {
    const TEXT: &[&str] = &["textContent", "innerText"];
    let is_temp = |u: UseId| {
        g.reaching(u).iter().any(|d| match g.node(g.defs[d.index()].value).op {
            Op::Call(c) => g.calls[c.index()].name.as_deref() == Some("createElement"),
            _ => false,
        })
    };
    let mut by_var: BTreeMap<(VarId, RegionId), Vec<AccessId>> = BTreeMap::new();
    for (i, a) in g.accesses.iter().enumerate() {
        if let Some(u) = a.object_use {
            by_var.entry((g.uses[u.index()].var, a.region)).or_default().push(AccessId(i as u32));
        }
    }
    let mut out = Vec::new();
    for accesses in by_var.values() {
        for &w in accesses {
            let wa = &g.accesses[w.index()];
            let Some(wp) = wa.prop.as_deref().filter(|_| wa.write.is_some()) else { continue };
            let want_text = wp == "innerHTML";
            if !want_text && !TEXT.contains(&wp) {
                continue;
            }
            if !wa.object_use.is_some_and(is_temp) {
                continue;
            }
            for &r in accesses {
                let ra = &g.accesses[r.index()];
                let Some(rp) = ra.prop.as_deref().filter(|_| ra.write.is_none()) else { continue };
                let pairs = if want_text { TEXT.contains(&rp) } else { rp == "innerHTML" };
                if pairs && (ra.stmt == wa.stmt || ra.stmt == wa.stmt + 1) && ra.site.span.start > wa.site.span.start {
                    out.push((w, r));
                }
            }
        }
    }
    out.sort();
    out
}

pub(crate) fn resolve(g: &mut DefUseGraph, cat: &Catalog) {
    let mut labels = Labels::default();
    let idioms = if cat.filters.iter().any(|f| f.matcher.kind == MatchKind::TextContentIdiom) {
        text_content_idioms(g)
    } else {
        Vec::new()
    };
    let idiom_writes: BTreeSet<AccessId> = idioms.iter().map(|(w, _)| *w).collect();

    for spec in &cat.sinks {
        match_sink(g, spec, &idiom_writes, &mut labels.sinks);
    }
    for spec in &cat.sources {
        match_source(g, spec, &mut labels.sources);
    }
    let mut extra_inputs: Vec<(ValueId, ValueId)> = Vec::new();
    for spec in &cat.filters {
        let m = &spec.matcher;
        match m.kind {
            MatchKind::Method => {
                for call in g.calls.iter().filter(|c| !c.bare && c.name.as_deref() == Some(m.name.as_str())) {
                    let Some(recv) = call.receiver else { continue };
                    labels.filters.push(FilterSite {
                        node: call.result,
                        id: spec.id.clone(),
                        site: call.site,
                        inputs: vec![recv],
                    });
                }
            }
            MatchKind::Call => {
                for call in g.calls.iter().filter(|c| c.name.as_deref() == Some(m.name.as_str())) {
                    let inputs = sink_args(call, m);
                    for a in &inputs {
                        extra_inputs.push((call.result, *a));
                    }
                    labels.filters.push(FilterSite { node: call.result, id: spec.id.clone(), site: call.site, inputs });
                }
            }
            MatchKind::TextContentIdiom => {
                for (w, r) in &idioms {
                    let (value, _) = g.accesses[w.index()].write.expect("idiom write");
                    let ra = &g.accesses[r.index()];
                    let node = ra.node.expect("read node");
                    extra_inputs.push((node, value));
                    labels.filters.push(FilterSite { node, id: spec.id.clone(), site: ra.site, inputs: vec![value] });
                }
            }
            _ => {}
        }
    }
    for (to, from) in extra_inputs {
        let inputs = &mut g.nodes[to.index()].inputs;
        if !inputs.iter().any(|i| i.from == from && i.edge == EdgeKind::Local) {
            inputs.push(Input { from, edge: EdgeKind::Local });
        }
    }
    for spec in &cat.csp_constructs {
        let m = &spec.matcher;
        for call in &g.calls {
            let hit = match m.kind {
                MatchKind::GlobalCall => !call.is_new && global_callee(g, call) == Some(m.name.as_str()),
                MatchKind::GlobalNew => call.is_new && global_callee(g, call) == Some(m.name.as_str()),
                MatchKind::Call => !call.is_new && call.name.as_deref() == Some(m.name.as_str()),
                _ => false,
            };
            if hit && arg_ok(g, call, m) {
                labels.csp.push(CspUse { id: spec.id.clone(), site: call.site });
            }
        }
    }

    labels.sinks.sort_by(|a, b| (a.site, &a.sink_id, a.value).cmp(&(b.site, &b.sink_id, b.value)));
    labels.sinks.dedup_by(|a, b| a.site == b.site && a.sink_id == b.sink_id && a.value == b.value);
    labels.sources.sort_by(|a, b| (a.node, &a.id).cmp(&(b.node, &b.id)));
    labels.sources.dedup_by(|a, b| a.node == b.node && a.id == b.id);
    labels.filters.sort_by(|a, b| (a.node, &a.id).cmp(&(b.node, &b.id)));
    labels.filters.dedup_by(|a, b| a.node == b.node);
    labels.csp.sort_by(|a, b| (a.site, &a.id).cmp(&(b.site, &b.id)));
    labels.csp.dedup_by(|a, b| a.site == b.site && a.id == b.id);
    labels.filter_index = labels.filters.iter().enumerate().map(|(i, f)| (f.node, i)).collect();

    assign_roles(g, &labels);
    g.labels = labels;
}

fn match_sink(g: &DefUseGraph, spec: &CatalogEntry, idiom_writes: &BTreeSet<AccessId>, out: &mut Vec<SinkUse>) {
    let m = &spec.matcher;
    match m.kind {
        MatchKind::MemberWrite => {
            for (i, a) in g.accesses.iter().enumerate() {
                let Some((value, site)) = a.write else { continue };
                if a.prop.as_deref() != Some(m.name.as_str()) || idiom_writes.contains(&AccessId(i as u32)) {
                    continue;
                }
                if let Some(r) = &m.receiver {
                    if !receiver_matches(g, a.object, None, r) {
                        continue;
                    }
                }
                out.push(SinkUse { sink_id: spec.id.clone(), site, value, access: Some(AccessId(i as u32)) });
            }
        }
        MatchKind::Call | MatchKind::GlobalCall => {
            for call in &g.calls {
                if call.is_new {
                    continue;
                }
                let named = match m.kind {
                    MatchKind::GlobalCall => global_callee(g, call) == Some(m.name.as_str()),
                    _ => call.name.as_deref() == Some(m.name.as_str()),
                };
                if !named || !arg_ok(g, call, m) {
                    continue;
                }
                if let Some(r) = &m.receiver {
                    let Some(recv) = call.receiver else { continue };
                    if !receiver_matches(g, recv, call.receiver_chain.as_deref(), r) {
                        continue;
                    }
                }
                for value in sink_args(call, m) {
                    out.push(SinkUse { sink_id: spec.id.clone(), site: call.site, value, access: None });
                }
            }
        }
        _ => {}
    }
}

fn match_source(g: &DefUseGraph, spec: &CatalogEntry, out: &mut Vec<SourceSite>) {
    let m = &spec.matcher;
    match m.kind {
        MatchKind::MemberRead => {
            for a in &g.accesses {
                let Some(node) = a.node else { continue };
                if a.prop.as_deref() != Some(m.name.as_str()) {
                    continue;
                }
                if let Some(r) = &m.receiver {
                    if !receiver_matches(g, a.object, None, r) {
                        continue;
                    }
                }
                out.push(SourceSite { node, id: spec.id.clone(), site: a.site });
            }
        }
        MatchKind::ExternalNew => {
            for call in g.calls.iter().filter(|c| c.is_new && c.bare) {
                let Some(name) = is_undefined_global(g, call.callee) else { continue };
                if BUILTIN_CTORS.contains(&name) || (m.name != "*" && m.name != name) {
                    continue;
                }
                out.push(SourceSite { node: call.result, id: spec.id.clone(), site: call.site });
            }
        }
        MatchKind::Call => {
            for call in g.calls.iter().filter(|c| c.name.as_deref() == Some(m.name.as_str())) {
                if arg_ok(g, call, m) {
                    out.push(SourceSite { node: call.result, id: spec.id.clone(), site: call.site });
                }
            }
        }
        _ => {}
    }
}

fn assign_roles(g: &mut DefUseGraph, labels: &Labels) {
    let use_of = |g: &DefUseGraph, v: ValueId| match g.node(v).op {
        Op::Use(u) => Some(u),
        _ => None,
    };
    let mut roles: Vec<(UseId, UseRole, Option<String>)> = Vec::new();
    for call in &g.calls {
        for (i, a) in call.args.iter().enumerate() {
            if let Some(u) = use_of(g, *a) {
                roles.push((u, UseRole::CallArgument(i as u32), None));
            }
        }
    }
    for a in &g.accesses {
        if let Some(u) = a.key.and_then(|k| use_of(g, k)) {
            roles.push((u, UseRole::PropertyName, None));
        }
        if matches!(a.prop.as_deref(), Some("origin" | "source")) && a.write.is_none() {
            if let Some(u) = a.object_use {
                let node = g.uses[u.index()].node;
                if g.types_of(node).iter().any(|t| g.types.is_host(*t, "MessageEvent")) {
                    roles.push((u, UseRole::MessageOriginRead, None));
                }
            }
        }
    }
    for f in &labels.filters {
        for i in &f.inputs {
            if let Some(u) = use_of(g, *i) {
                roles.push((u, UseRole::FilterArgument, Some(f.id.clone())));
            }
        }
    }
    for s in &labels.sinks {
        if let Some(u) = use_of(g, s.value) {
            roles.push((u, UseRole::SinkArgument, Some(s.sink_id.clone())));
        }
    }
    // later entries take precedence: sink over filter over the rest
    for (u, role, label) in roles {
        let usage = &mut g.uses[u.index()];
        usage.role = role;
        if label.is_some() {
            usage.label = label;
        }
    }
}
