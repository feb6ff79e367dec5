//! Sparse conditional constant propagation over the value graph.

use std::collections::VecDeque;

use serde::Serialize;

use super::*;

#[derive(Debug, Clone, Serialize)]
pub enum ConstValue {
    /// Not yet known (optimistic start).
    Top,
    Const(JsConst),
    /// Not a constant.
    Bottom,
}

impl ConstValue {
    pub fn meet(&self, other: &ConstValue) -> ConstValue {
        match (self, other) {
            (ConstValue::Top, x) | (x, ConstValue::Top) => x.clone(),
            (ConstValue::Const(a), ConstValue::Const(b)) if same(a, b) => self.clone(),
            _ => ConstValue::Bottom,
        }
    }
}

/// Equality that treats NaN as equal to itself, so the fixpoint settles.
fn same(a: &JsConst, b: &JsConst) -> bool {
    match (a, b) {
        (JsConst::Num(x), JsConst::Num(y)) => x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan()),
        _ => a == b,
    }
}

impl PartialEq for ConstValue {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (ConstValue::Top, ConstValue::Top) | (ConstValue::Bottom, ConstValue::Bottom) => true,
            (ConstValue::Const(a), ConstValue::Const(b)) => same(a, b),
            _ => false,
        }
    }
}

fn meet_inputs(vals: &[ConstValue], inputs: impl Iterator<Item = ValueId>) -> ConstValue {
    let mut acc: Option<ConstValue> = None;
    for i in inputs {
        let v = &vals[i.index()];
        acc = Some(match acc {
            None => v.clone(),
            Some(a) => a.meet(v),
        });
        if acc == Some(ConstValue::Bottom) {
            break;
        }
    }
    acc.unwrap_or(ConstValue::Bottom)
}

fn eval(g: &DefUseGraph, vals: &[ConstValue], n: ValueId) -> ConstValue {
    let node = g.node(n);
    let all = node.inputs.iter().map(|i| i.from);
    match &node.op {
        Op::Lit(c) => ConstValue::Const(c.clone()),
        Op::Def(_) | Op::Use(_) | Op::Cross(_) | Op::Join | Op::Param { .. } => meet_inputs(vals, all),
        Op::Add => {
            if node.inputs.len() != 2 {
                return ConstValue::Bottom;
            }
            let (a, b) = (&vals[node.inputs[0].from.index()], &vals[node.inputs[1].from.index()]);
            match (a, b) {
                (ConstValue::Const(x), ConstValue::Const(y)) => x.add(y).map_or(ConstValue::Bottom, ConstValue::Const),
                (ConstValue::Bottom, _) | (_, ConstValue::Bottom) => ConstValue::Bottom,
                _ => ConstValue::Top,
            }
        }
        Op::Call(c) if !g.calls[c.index()].targets.is_empty() => meet_inputs(
            vals,
            node.inputs.iter().filter(|i| matches!(i.edge, EdgeKind::Return(_))).map(|i| i.from),
        ),
        _ => ConstValue::Bottom,
    }
}

pub(crate) fn propagate(g: &mut DefUseGraph) {
    let n = g.nodes.len();
    let mut vals = vec![ConstValue::Top; n];
    let succ = g.successors();
    let mut queue: VecDeque<ValueId> = (0..n as u32).map(ValueId).collect();
    let mut queued = vec![true; n];
    while let Some(v) = queue.pop_front() {
        queued[v.index()] = false;
        let new = eval(g, &vals, v);
        if new != vals[v.index()] {
            vals[v.index()] = new;
            for (s, _) in &succ[v.index()] {
                if !queued[s.index()] {
                    queued[s.index()] = true;
                    queue.push_back(*s);
                }
            }
        }
    }
    for v in vals.iter_mut() {
        if *v == ConstValue::Top {
            *v = ConstValue::Bottom;
        }
    }
    g.consts = vals;
}

/// Fill in property and method names of computed keys that are constants.
pub(crate) fn resolve_keys(g: &mut DefUseGraph) {
    for i in 0..g.accesses.len() {
        if g.accesses[i].prop.is_none() {
            if let Some(k) = g.accesses[i].key {
                if let Some(c) = g.const_of(k) {
                    g.accesses[i].prop = Some(c.to_js_string());
                }
            }
        }
    }
    for i in 0..g.calls.len() {
        if g.calls[i].name.is_none() {
            if let Some(k) = g.calls[i].callee_key {
                if let Some(c) = g.const_of(k) {
                    g.calls[i].name = Some(c.to_js_string());
                }
            }
        }
    }
}
