//! Reaching definitions over each region's event tree.
//!
//! Inside a region the analysis is flow-sensitive: a definition kills earlier
//! ones, branches join, loops iterate to a fixpoint. Definitions made in other
//! regions reach every use through one `Cross` node per (variable, region).

use std::collections::HashMap;

use super::build::Ev;
use super::*;

struct State<'g> {
    g: &'g DefUseGraph,
    region: RegionId,
    values: HashMap<VarId, Vec<DefId>>,
    log: Vec<(VarId, Option<Vec<DefId>>)>,
    reach: Vec<Vec<DefId>>,
}

fn union(a: &[DefId], b: &[DefId]) -> Vec<DefId> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(x), Some(y)) if x == y => {
                i += 1;
                j += 1;
                *x
            }
            (Some(x), Some(y)) if x < y => {
                i += 1;
                *x
            }
            (Some(_), Some(y)) | (None, Some(y)) => {
                j += 1;
                *y
            }
            (Some(x), None) => {
                i += 1;
                *x
            }
            (None, None) => unreachable!(),
        };
        out.push(next);
    }
    out
}

impl State<'_> {
    /// Value on region entry: for a non-local variable of a function region,
    /// the region's own definitions (earlier invocations); otherwise nothing.
    fn entry(&self, v: VarId) -> Vec<DefId> {
        let Some(f) = self.g.regions[self.region.index()].func else {
            return Vec::new();
        };
        let fsite = self.g.functions[f.index()].site;
        let local = self.g.vars[v.index()]
            .decl
            .is_some_and(|d| d.file == fsite.file && fsite.span.contains(&d.span));
        if local {
            return Vec::new();
        }
        self.g.defs_by_var[v.index()]
            .iter()
            .copied()
            .filter(|d| self.g.defs[d.index()].region == self.region)
            .collect()
    }

    fn get(&self, v: VarId) -> Vec<DefId> {
        match self.values.get(&v) {
            Some(x) => x.clone(),
            None => self.entry(v),
        }
    }

    fn set(&mut self, v: VarId, value: Vec<DefId>) {
        let old = self.values.insert(v, value);
        self.log.push((v, old));
    }

    fn undo(&mut self, mark: usize) {
        while self.log.len() > mark {
            let (v, old) = self.log.pop().expect("log entry");
            match old {
                Some(x) => self.values.insert(v, x),
                None => self.values.remove(&v),
            };
        }
    }

    /// Variables changed since `mark` with their current values.
    fn changes(&self, mark: usize) -> Vec<(VarId, Vec<DefId>)> {
        let mut vars: Vec<VarId> = self.log[mark..].iter().map(|(v, _)| *v).collect();
        vars.sort();
        vars.dedup();
        vars.into_iter().map(|v| (v, self.get(v))).collect()
    }

    fn run(&mut self, events: &[Ev]) {
        for ev in events {
            match ev {
                Ev::Def(d, v) => self.set(*v, vec![*d]),
                Ev::Use(u, v) => {
                    let cur = self.get(*v);
                    let slot = &mut self.reach[u.index()];
                    if slot.is_empty() {
                        *slot = cur;
                    } else {
                        *slot = union(slot, &cur);
                    }
                }
                Ev::Branch(alts) => {
                    let mut outcomes = Vec::with_capacity(alts.len());
                    for alt in alts {
                        let mark = self.log.len();
                        self.run(alt);
                        outcomes.push(self.changes(mark));
                        self.undo(mark);
                    }
                    let mut merged: BTreeMap<VarId, Vec<DefId>> = BTreeMap::new();
                    for changes in &outcomes {
                        for (v, _) in changes {
                            merged.entry(*v).or_default();
                        }
                    }
                    for (v, acc) in merged.iter_mut() {
                        for changes in &outcomes {
                            let val = match changes.binary_search_by_key(v, |(x, _)| *x) {
                                Ok(i) => changes[i].1.clone(),
                                Err(_) => self.get(*v),
                            };
                            *acc = union(acc, &val);
                        }
                    }
                    for (v, val) in merged {
                        self.set(v, val);
                    }
                }
                Ev::Loop(body) => loop {
                    let mark = self.log.len();
                    self.run(body);
                    let changes = self.changes(mark);
                    self.undo(mark);
                    let mut grew = false;
                    for (v, after) in changes {
                        let before = self.get(v);
                        let joined = union(&before, &after);
                        if joined != before {
                            grew = true;
                            self.set(v, joined);
                        }
                    }
                    if !grew {
                        break;
                    }
                },
            }
        }
    }
}

pub(crate) fn compute(g: &mut DefUseGraph, events: &[Vec<Ev>]) {
    let mut reach = vec![Vec::new(); g.uses.len()];
    for (r, evs) in events.iter().enumerate() {
        let mut st = State {
            g,
            region: RegionId(r as u32),
            values: HashMap::new(),
            log: Vec::new(),
            reach,
        };
        st.run(evs);
        reach = st.reach;
    }

    let mut cross: HashMap<(VarId, RegionId), ValueId> = HashMap::new();
    for (i, local) in reach.into_iter().enumerate() {
        let (var, region, node, site) = {
            let u = &g.uses[i];
            (u.var, u.region, u.node, u.site)
        };
        let mut inputs: Vec<Input> = local
            .iter()
            .map(|d| Input { from: g.defs[d.index()].node, edge: EdgeKind::Local })
            .collect();
        let has_outside = g.defs_by_var[var.index()].iter().any(|d| g.defs[d.index()].region != region);
        if has_outside {
            let c = *cross.entry((var, region)).or_insert_with(|| {
                let inputs = g.defs_by_var[var.index()]
                    .iter()
                    .filter(|d| g.defs[d.index()].region != region)
                    .map(|d| Input { from: g.defs[d.index()].node, edge: EdgeKind::Local })
                    .collect();
                let id = ValueId(g.nodes.len() as u32);
                g.nodes.push(ValueNode { op: Op::Cross(var), site, inputs });
                id
            });
            inputs.push(Input { from: c, edge: EdgeKind::Local });
        }
        g.nodes[node.index()].inputs = inputs;
        g.uses[i].local_reaching = local;
    }
}
