//! Deterministic JSON rendering of a graph.

use serde_json::{json, Value};

use super::*;
use crate::package::AppPackage;

fn loc(pkg: &AppPackage, site: Site) -> String {
    let s = pkg.source_span(site.file, site.span);
    format!("{}:{}:{}", s.file, s.start_line, s.start_col)
}

fn const_json(g: &DefUseGraph, v: ValueId) -> Value {
    g.const_of(v).map_or(Value::Null, |c| json!(c.to_js_string()))
}

fn types_json(g: &DefUseGraph, v: ValueId) -> Value {
    g.types_of(v).iter().map(|t| json!(g.types.describe(*t, g))).collect()
}

pub(crate) fn to_json(g: &DefUseGraph, pkg: &AppPackage) -> Value {
    let vars: Vec<Value> = g
        .vars
        .iter()
        .enumerate()
        .map(|(i, v)| {
            json!({
                "id": i,
                "name": v.name,
                "kind": match v.kind {
                    VarKind::Declared { .. } => "declared",
                    VarKind::Global => "global",
                    VarKind::Param { .. } => "param",
                    VarKind::Return { .. } => "return",
                },
                "decl": v.decl.map(|s| loc(pkg, s)),
            })
        })
        .collect();
    let defs: Vec<Value> = g
        .defs
        .iter()
        .enumerate()
        .map(|(i, d)| {
            json!({
                "id": i,
                "var": d.var.0,
                "site": loc(pkg, d.site),
                "kind": g.def_kind(DefId(i as u32)),
                "const": const_json(g, d.node),
                "types": types_json(g, d.node),
            })
        })
        .collect();
    let uses: Vec<Value> = g
        .uses
        .iter()
        .enumerate()
        .map(|(i, u)| {
            json!({
                "id": i,
                "var": u.var.0,
                "site": loc(pkg, u.site),
                "reaching": g.reaching(UseId(i as u32)).iter().map(|d| d.0).collect::<Vec<_>>(),
                "const": const_json(g, u.node),
                "role": u.role,
                "label": u.label,
            })
        })
        .collect();
    let mut edges = Vec::new();
    for c in &g.calls {
        for (p, edge) in c
            .targets
            .iter()
            .flat_map(|f| g.functions[f.index()].params.iter())
            .flat_map(|p| g.node(*p).inputs.iter().map(move |i| (p, i)))
        {
            if matches!(edge.edge, EdgeKind::Call(id) if g.calls[id.index()].site == c.site) {
                edges.push(json!({"kind": "call", "from": loc(pkg, g.node(edge.from).site), "to": loc(pkg, g.node(*p).site), "site": loc(pkg, c.site)}));
            }
        }
        for i in &g.node(c.result).inputs {
            if matches!(i.edge, EdgeKind::Return(_)) {
                edges.push(json!({"kind": "return", "from": loc(pkg, g.node(i.from).site), "to": loc(pkg, c.site), "site": loc(pkg, c.site)}));
            }
        }
    }
    let constants: Vec<Value> = g
        .constant_table()
        .into_iter()
        .map(|(v, c)| json!({"var": v.0, "name": g.var(v).name, "value": c.to_js_string()}))
        .collect();
    let types: Vec<Value> = (0..g.types.len() as u32)
        .map(|t| {
            let t = TypeId(t);
            json!({
                "id": t.0,
                "name": g.types.describe(t, g),
                "parents": g.types.get(t).parents.iter().map(|p| p.0).collect::<Vec<_>>(),
            })
        })
        .collect();
    json!({
        "app_id": g.app_id,
        "vars": vars,
        "defs": defs,
        "uses": uses,
        "edges": edges,
        "constants": constants,
        "types": types,
    })
}
