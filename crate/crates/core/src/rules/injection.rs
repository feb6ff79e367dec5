//! Inconsistent filtering: data of one inferred type reaches one sink
//! unfiltered from a source while data of the same type is filtered before
//! another sink.

use std::collections::{BTreeMap, BTreeSet};

use super::{Finding, RuleId};
use crate::dataflow::propagate::{can_reach, run};
use crate::dataflow::{DefUseGraph, TypeId, TypeKind, ValueId};
use crate::package::AppPackage;

const FACT_CAP: usize = 256;

/// (type, filter index once filtered, source index when the typed value came from a source)
type Fact = (TypeId, Option<u32>, Option<u32>);

fn matchable(g: &DefUseGraph, t: TypeId) -> bool {
    match g.types.kind(t) {
        TypeKind::ObjectProto(_) | TypeKind::Extension(_) => true,
        TypeKind::MemberPath { .. } => g.options.member_path_types,
        _ => false,
    }
}

pub fn check_html_injection(g: &DefUseGraph, pkg: &AppPackage) -> Vec<Finding> {
    let labels = &g.labels;
    if labels.sinks.is_empty() || labels.filters.is_empty() {
        return Vec::new();
    }
    let k = g.options.context_depth;
    let succ = g.successors();
    let allowed = can_reach(g, labels.sinks.iter().map(|s| s.value));

    let tainted = run(
        &succ,
        &allowed,
        k,
        FACT_CAP,
        labels.sources.iter().enumerate().map(|(i, s)| (s.node, i as u32)),
        |_, _, src| Some(*src),
    );
    let source_of = |v: ValueId| tainted.at[v.index()].iter().map(|(_, s)| *s).min();

    let mut seeds: Vec<(ValueId, Fact)> = Vec::new();
    for (i, ok) in allowed.iter().enumerate() {
        let v = ValueId(i as u32);
        if !ok || labels.is_filter(v) {
            continue;
        }
        for &t in g.types_of(v) {
            if matchable(g, t) {
                seeds.push((v, (t, None, source_of(v))));
            }
        }
    }
    let filter_pos: BTreeMap<ValueId, u32> =
        labels.filters.iter().enumerate().map(|(i, f)| (f.node, i as u32)).collect();
    let facts = run(&succ, &allowed, k, FACT_CAP, seeds, |to, from, fact| match filter_pos.get(&to) {
        None => Some(*fact),
        Some(&fi) => {
            let f = &labels.filters[fi as usize];
            f.inputs.contains(&from).then(|| (fact.0, fact.1.or(Some(fi)), fact.2))
        }
    });

    // per sink site: unfiltered sourced types, and filtered types
    let mut unfiltered: BTreeMap<usize, BTreeMap<TypeId, u32>> = BTreeMap::new();
    let mut filtered: BTreeMap<TypeId, BTreeSet<(usize, u32)>> = BTreeMap::new();
    for (si, s) in labels.sinks.iter().enumerate() {
        for (_, (t, filter, src)) in &facts.at[s.value.index()] {
            match (filter, src) {
                (None, Some(src)) => {
                    let e = unfiltered.entry(si).or_default().entry(*t).or_insert(*src);
                    *e = (*e).min(*src);
                }
                (Some(fi), _) => {
                    filtered.entry(*t).or_default().insert((si, *fi));
                }
                _ => {}
            }
        }
    }

    let mut out = Vec::new();
    let mut reported = BTreeSet::new();
    for (si, types) in &unfiltered {
        let sink = &labels.sinks[*si];
        if reported.contains(&sink.site) {
            continue;
        }
        let hit = types
            .iter()
            .filter_map(|(t, src)| filtered.get(t).and_then(|fs| fs.iter().next()).map(|(s2, fi)| (*t, *src, *s2, *fi)))
            .min_by_key(|(t, _, s2, fi)| (labels.sinks[*s2].site, *fi, *t));
        let Some((t, src, s2, fi)) = hit else { continue };
        reported.insert(sink.site);
        let filter = &labels.filters[fi as usize];
        out.push(
            Finding::at(
                RuleId::HtmlInjection,
                pkg,
                sink.site,
                format!(
                    "{} data of type {} reaches this sink unfiltered but is filtered before another sink",
                    labels.sources[src as usize].id,
                    g.types.describe(t, g)
                ),
            )
            .with(pkg, "sink", sink.site)
            .with(pkg, "source", labels.sources[src as usize].site)
            .with(pkg, "filter", filter.site)
            .with(pkg, "filtered_sink", labels.sinks[s2].site),
        );
    }
    out
}
