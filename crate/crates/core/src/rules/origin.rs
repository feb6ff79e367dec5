//! Message handlers that never look at the sender's origin.

use std::collections::{BTreeSet, VecDeque};

use super::{Finding, RuleId};
use crate::dataflow::{DefUseGraph, EdgeKind, Op, ValueId};
use crate::package::AppPackage;

const ORIGIN_PROPS: [&str; 2] = ["origin", "source"];

/// Nodes holding the event: the parameter, its copies and uses in the
/// handler, and parameters of functions it is passed to (at most `k` calls deep).
fn aliases(g: &DefUseGraph, param: ValueId) -> BTreeSet<ValueId> {
    let succ = g.successors();
    let k = g.options.context_depth;
    let mut seen: BTreeSet<(ValueId, usize)> = BTreeSet::new();
    let mut queue = VecDeque::from([(param, 0usize)]);
    seen.insert((param, 0));
    while let Some((v, depth)) = queue.pop_front() {
        for &(s, edge) in &succ[v.index()] {
            let aliasing = matches!(g.node(s).op, Op::Def(_) | Op::Use(_) | Op::Cross(_) | Op::Join | Op::Param { .. });
            if !aliasing {
                continue;
            }
            let next = match edge {
                EdgeKind::Local => depth,
                EdgeKind::Call(_) if depth < k => depth + 1,
                _ => continue,
            };
            if seen.insert((s, next)) {
                queue.push_back((s, next));
            }
        }
    }
    seen.into_iter().map(|(v, _)| v).collect()
}

fn reads_origin(g: &DefUseGraph, objects: &BTreeSet<ValueId>) -> bool {
    g.accesses.iter().any(|a| {
        a.write.is_none() && a.prop.as_deref().is_some_and(|p| ORIGIN_PROPS.contains(&p)) && objects.contains(&a.object)
    })
}

pub fn check_origin_validation(g: &DefUseGraph, pkg: &AppPackage, paper_strict: bool) -> Vec<Finding> {
    let app_reads_origin = g
        .accesses
        .iter()
        .any(|a| a.write.is_none() && a.prop.as_deref().is_some_and(|p| ORIGIN_PROPS.contains(&p)));
    let mut out = Vec::new();
    for h in &g.handlers {
        if paper_strict && !h.literal_call {
            continue;
        }
        let flagged = match h.handler {
            Some(f) => match g.functions[f.index()].params.first() {
                Some(&p) => !reads_origin(g, &aliases(g, p)),
                None => true,
            },
            // handler not resolvable: only an app that never reads an origin anywhere is flagged
            None => !app_reads_origin,
        };
        if !flagged {
            continue;
        }
        let mut finding = Finding::at(
            RuleId::OriginValidation,
            pkg,
            h.site,
            "message handler never reads the event's origin or source".to_string(),
        )
        .with(pkg, "registration", h.site);
        if let Some(f) = h.handler {
            finding = finding.with(pkg, "handler", g.functions[f.index()].site);
        }
        out.push(finding);
    }
    out
}
