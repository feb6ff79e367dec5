//! k-limited call-string propagation of facts over the value graph.

use std::collections::{BTreeSet, VecDeque};

use super::*;

/// Call string: the most recent call sites, oldest first, at most k long.
pub(crate) type Ctx = Vec<CallId>;

pub(crate) struct Facts<T> {
    pub at: Vec<BTreeSet<(Ctx, T)>>,
}

/// Next context when a fact crosses an edge, or `None` when the edge returns
/// to a call site other than the one on top of the context.
pub(crate) fn step(ctx: &Ctx, edge: EdgeKind, k: usize) -> Option<Ctx> {
    match edge {
        EdgeKind::Local => Some(ctx.clone()),
        EdgeKind::Call(c) => {
            if k == 0 {
                return Some(ctx.clone());
            }
            let mut next = ctx.clone();
            next.push(c);
            if next.len() > k {
                next.remove(0);
            }
            Some(next)
        }
        EdgeKind::Return(c) => match ctx.last() {
            None => Some(Vec::new()),
            Some(top) if *top == c => Some(ctx[..ctx.len() - 1].to_vec()),
            Some(_) => None,
        },
    }
}

/// Forward propagation from `seeds` (in the empty context) along successor
/// edges restricted to `allowed` nodes. `transfer(to, from, fact)` may drop
/// or rewrite a fact entering `to`. Each node keeps at most `cap` entries.
pub(crate) fn run<T: Ord + Clone>(
    succ: &[Vec<(ValueId, EdgeKind)>],
    allowed: &[bool],
    k: usize,
    cap: usize,
    seeds: impl IntoIterator<Item = (ValueId, T)>,
    transfer: impl Fn(ValueId, ValueId, &T) -> Option<T>,
) -> Facts<T> {
    let mut at: Vec<BTreeSet<(Ctx, T)>> = vec![BTreeSet::new(); succ.len()];
    let mut queue: VecDeque<(ValueId, Ctx, T)> = VecDeque::new();
    for (v, t) in seeds {
        if allowed[v.index()] && at[v.index()].insert((Vec::new(), t.clone())) {
            queue.push_back((v, Vec::new(), t));
        }
    }
    while let Some((v, ctx, t)) = queue.pop_front() {
        for &(s, edge) in &succ[v.index()] {
            if !allowed[s.index()] || at[s.index()].len() >= cap {
                continue;
            }
            let Some(next) = step(&ctx, edge, k) else { continue };
            let Some(t2) = transfer(s, v, &t) else { continue };
            if at[s.index()].insert((next.clone(), t2.clone())) {
                queue.push_back((s, next, t2));
            }
        }
    }
    Facts { at }
}

/// Nodes from which some target is reachable along input edges.
pub(crate) fn can_reach(g: &DefUseGraph, targets: impl IntoIterator<Item = ValueId>) -> Vec<bool> {
    let mut mark = vec![false; g.nodes.len()];
    let mut stack: Vec<ValueId> = Vec::new();
    for t in targets {
        if !mark[t.index()] {
            mark[t.index()] = true;
            stack.push(t);
        }
    }
    while let Some(v) = stack.pop() {
        for i in &g.node(v).inputs {
            if !mark[i.from.index()] {
                mark[i.from.index()] = true;
                stack.push(i.from);
            }
        }
    }
    mark
}
