//! Heuristic abstract types.
//!
//! A type names what a value is an instance of: a constructor's prototype, a
//! browser host object, a string created at some site, a property path from
//! another type, or the result of an `extend(a, b)` style helper. Inference
//! is one context-insensitive fixpoint; property values are tracked per
//! (type, property) slot, and each slot becomes a `Field` node afterwards.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::Serialize;

use super::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct TypeId(pub u32);

impl TypeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub enum TypeKind {
    /// Instances created by `new V()` for the constructor variable `V`.
    ObjectProto(VarId),
    /// Value of `base.prop`, or of `base.prop()` when `call` is set.
    MemberPath { base: TypeId, prop: String, call: bool },
    PrimitiveString(Site),
    PrimitiveOther,
    Function(FuncId),
    /// Browser object: `Document`, `Location`, `Window`, `DeviceStorage`, `MessageEvent`.
    Host(String),
    /// Result of a property-copying helper called at this site.
    Extension(Site),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AbstractType {
    pub kind: TypeKind,
    /// Types an extension result inherits properties from.
    pub parents: Vec<TypeId>,
}

#[derive(Debug, Clone, Default)]
pub struct TypeTable {
    types: Vec<AbstractType>,
    index: HashMap<TypeKind, TypeId>,
}

pub(crate) const MAX_TYPES_PER_NODE: usize = 8;
const MAX_PATH_DEPTH: usize = 4;

impl TypeTable {
    pub fn intern(&mut self, kind: TypeKind) -> TypeId {
        if let Some(t) = self.index.get(&kind) {
            return *t;
        }
        let t = TypeId(self.types.len() as u32);
        self.types.push(AbstractType { kind: kind.clone(), parents: Vec::new() });
        self.index.insert(kind, t);
        t
    }

    pub fn lookup(&self, kind: &TypeKind) -> Option<TypeId> {
        self.index.get(kind).copied()
    }

    pub fn kind(&self, t: TypeId) -> &TypeKind {
        &self.types[t.index()].kind
    }

    pub fn get(&self, t: TypeId) -> &AbstractType {
        &self.types[t.index()]
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn depth(&self, t: TypeId) -> usize {
        match self.kind(t) {
            TypeKind::MemberPath { base, .. } => 1 + self.depth(*base),
            _ => 0,
        }
    }

    /// The type a member path starts from.
    pub fn root(&self, t: TypeId) -> TypeId {
        match self.kind(t) {
            TypeKind::MemberPath { base, .. } => self.root(*base),
            _ => t,
        }
    }

    /// Whether `t` is the host object `name`.
    pub fn is_host(&self, t: TypeId, name: &str) -> bool {
        matches!(self.kind(t), TypeKind::Host(h) if h == name)
    }

    /// Readable form such as `XMLHttpRequest.prototype` or `Document.location`.
    pub fn describe(&self, t: TypeId, g: &DefUseGraph) -> String {
        match self.kind(t) {
            TypeKind::ObjectProto(v) => format!("{}.prototype", g.var(*v).name),
            TypeKind::MemberPath { base, prop, call } => {
                format!("{}.{}{}", self.describe(*base, g), prop, if *call { "()" } else { "" })
            }
            TypeKind::PrimitiveString(s) => format!("string@{}:{}", s.file.0, s.span.start),
            TypeKind::PrimitiveOther => "primitive".to_string(),
            TypeKind::Function(f) => match &g.functions[f.index()].name {
                Some(n) => format!("function {n}"),
                None => format!("function@{}", g.functions[f.index()].site.span.start),
            },
            TypeKind::Host(h) => h.clone(),
            TypeKind::Extension(s) => format!("extension@{}:{}", s.file.0, s.span.start),
        }
    }

    fn add_parents(&mut self, t: TypeId, parents: &[TypeId]) -> bool {
        let cur = &mut self.types[t.index()].parents;
        let before = cur.len();
        for p in parents {
            if *p != t && !cur.contains(p) {
                cur.push(*p);
            }
        }
        cur.sort();
        cur.len() != before
    }
}

/// Insert into a capped sorted set, keeping the smallest ids.
fn merge(into: &mut Vec<TypeId>, from: &[TypeId]) -> bool {
    let mut changed = false;
    for t in from {
        if let Err(pos) = into.binary_search(t) {
            if pos < MAX_TYPES_PER_NODE {
                into.insert(pos, *t);
                into.truncate(MAX_TYPES_PER_NODE);
                changed = true;
            }
        }
    }
    changed
}

struct Infer<'g> {
    g: &'g DefUseGraph,
    table: TypeTable,
    types: Vec<Vec<TypeId>>,
    slots: BTreeMap<(TypeId, String), Vec<TypeId>>,
    slot_values: BTreeMap<(TypeId, String), BTreeSet<ValueId>>,
    readers: BTreeMap<(TypeId, String), BTreeSet<ValueId>>,
    ext_readers: HashMap<TypeId, BTreeSet<ValueId>>,
    handler_params: BTreeSet<ValueId>,
    queue: VecDeque<ValueId>,
    queued: Vec<bool>,
}

impl Infer<'_> {
    fn push(&mut self, v: ValueId) {
        if !self.queued[v.index()] {
            self.queued[v.index()] = true;
            self.queue.push_back(v);
        }
    }

    fn host(&mut self, name: &str) -> TypeId {
        self.table.intern(TypeKind::Host(name.to_string()))
    }

    fn member_path(&mut self, base: TypeId, prop: &str, call: bool) -> Option<TypeId> {
        if !self.g.options.member_path_types || self.table.depth(base) >= MAX_PATH_DEPTH {
            return None;
        }
        Some(self.table.intern(TypeKind::MemberPath { base, prop: prop.to_string(), call }))
    }

    fn global_type(&mut self, var: VarId) -> Option<TypeId> {
        let v = self.g.var(var);
        if v.kind != VarKind::Global || !self.g.defs_by_var[var.index()].is_empty() {
            return None;
        }
        match v.name.as_str() {
            "document" => Some(self.host("Document")),
            "location" => Some(self.host("Location")),
            "window" | "self" | "top" | "parent" | "globalThis" => Some(self.host("Window")),
            _ => None,
        }
    }

    fn this_type(&mut self, f: Option<FuncId>) -> Option<TypeId> {
        let Some(f) = f else { return Some(self.host("Window")) };
        let func = &self.g.functions[f.index()];
        let owner = func.this_owner.or(func.var)?;
        Some(self.table.intern(TypeKind::ObjectProto(owner)))
    }

    fn input_types(&self, v: ValueId, filter: impl Fn(&Input) -> bool) -> Vec<TypeId> {
        let mut out = Vec::new();
        for i in self.g.node(v).inputs.iter().filter(|i| filter(i)) {
            merge(&mut out, &self.types[i.from.index()]);
        }
        out
    }

    /// Slot types for (t, prop), including those inherited by extension results.
    fn read_slot(&mut self, t: TypeId, prop: &str, reader: ValueId, out: &mut Vec<TypeId>) {
        let mut stack = vec![t];
        let mut seen = BTreeSet::new();
        while let Some(t) = stack.pop() {
            if !seen.insert(t) {
                continue;
            }
            let key = (t, prop.to_string());
            if let Some(s) = self.slots.get(&key) {
                merge(out, s);
            }
            self.readers.entry(key).or_default().insert(reader);
            if matches!(self.table.kind(t), TypeKind::Extension(_)) {
                self.ext_readers.entry(t).or_default().insert(reader);
                stack.extend(self.table.get(t).parents.iter().copied());
            }
        }
    }

    fn eval(&mut self, v: ValueId) -> Vec<TypeId> {
        let g = self.g;
        let node = g.node(v);
        let mut out = Vec::new();
        match &node.op {
            Op::Lit(JsConst::Str(_)) | Op::Template => {
                out.push(self.table.intern(TypeKind::PrimitiveString(node.site)));
            }
            Op::Lit(_) | Op::Arith => out.push(self.table.intern(TypeKind::PrimitiveOther)),
            Op::Add => {
                let inputs = self.input_types(v, |_| true);
                let stringy = node.inputs.iter().any(|i| g.const_of(i.from).is_some_and(JsConst::is_string))
                    || inputs.iter().any(|t| matches!(self.table.kind(*t), TypeKind::PrimitiveString(_)));
                let kind = if stringy { TypeKind::PrimitiveString(node.site) } else { TypeKind::PrimitiveOther };
                out.push(self.table.intern(kind));
            }
            Op::Def(_) | Op::Cross(_) | Op::Join | Op::Field(..) => out = self.input_types(v, |_| true),
            Op::Use(u) => {
                out = self.input_types(v, |_| true);
                if let Some(t) = self.global_type(g.uses[u.index()].var) {
                    merge(&mut out, &[t]);
                }
            }
            Op::Param { .. } => {
                out = self.input_types(v, |_| true);
                if self.handler_params.contains(&v) {
                    let t = self.host("MessageEvent");
                    merge(&mut out, &[t]);
                }
            }
            Op::Function(f) => out.push(self.table.intern(TypeKind::Function(*f))),
            Op::This(f) => {
                if let Some(t) = self.this_type(*f) {
                    out.push(t);
                }
            }
            Op::New(c) => {
                let call = &g.calls[c.index()];
                let ctor = g.var_of(call.callee).or_else(|| {
                    let chain = call.callee_chain.as_deref()?;
                    let (root, last) = chain.rsplit_once('.')?;
                    matches!(root, "window" | "self" | "globalThis").then(|| g.globals.get(last).copied()).flatten()
                });
                let owner = match call.targets.first() {
                    Some(f) => g.functions[f.index()].var.or(ctor),
                    None => ctor,
                };
                if let Some(o) = owner {
                    out.push(self.table.intern(TypeKind::ObjectProto(o)));
                }
            }
            Op::Call(c) => out = self.eval_call(*c),
            Op::Read(a) => {
                let access = &g.accesses[a.index()];
                let Some(prop) = access.prop.as_deref() else { return out };
                let objs = self.types[access.object.index()].clone();
                for t in objs {
                    let special = match (self.table.kind(t), prop) {
                        (TypeKind::Host(h), "document") if h == "Window" => Some(self.host("Document")),
                        (TypeKind::Host(h), "location") if h == "Window" || h == "Document" => {
                            Some(self.host("Location"))
                        }
                        (TypeKind::Function(f), "prototype") => g.functions[f.index()]
                            .var
                            .map(|owner| self.table.intern(TypeKind::ObjectProto(owner))),
                        _ => None,
                    };
                    match special {
                        Some(s) => {
                            merge(&mut out, &[s]);
                        }
                        None => {
                            if let Some(p) = self.member_path(t, prop, false) {
                                merge(&mut out, &[p]);
                            }
                        }
                    }
                    self.read_slot(t, prop, v, &mut out);
                }
            }
            _ => {}
        }
        out
    }

    fn eval_call(&mut self, c: CallId) -> Vec<TypeId> {
        let g = self.g;
        let call = &g.calls[c.index()];
        let mut out = Vec::new();
        if call.targets.iter().any(|f| g.functions[f.index()].extension_helper) {
            let t = self.table.intern(TypeKind::Extension(call.site));
            let mut parents = Vec::new();
            for a in &call.args {
                parents.extend(self.types[a.index()].iter().copied());
            }
            if self.table.add_parents(t, &parents) {
                let readers: Vec<ValueId> = self.ext_readers.get(&t).into_iter().flatten().copied().collect();
                readers.into_iter().for_each(|r| self.push(r));
            }
            out.push(t);
            return out;
        }
        if matches!(call.name.as_deref(), Some("getDeviceStorage" | "getDeviceStorages")) && !call.bare {
            out.push(self.host("DeviceStorage"));
            return out;
        }
        if !call.targets.is_empty() {
            return self.input_types(call.result, |i| matches!(i.edge, EdgeKind::Return(_)));
        }
        if let (Some(recv), Some(name)) = (call.receiver, call.name.as_deref()) {
            for t in self.types[recv.index()].clone() {
                if let Some(p) = self.member_path(t, name, true) {
                    merge(&mut out, &[p]);
                }
            }
        }
        out
    }

    fn apply_write(&mut self, a: AccessId) {
        let access = &self.g.accesses[a.index()];
        let (Some(prop), Some((value, _))) = (access.prop.clone(), access.write) else { return };
        let vals = self.types[value.index()].clone();
        for t in self.types[access.object.index()].clone() {
            let key = (t, prop.clone());
            self.slot_values.entry(key.clone()).or_default().insert(value);
            let slot = self.slots.entry(key.clone()).or_default();
            if merge(slot, &vals) {
                let readers: Vec<ValueId> = self.readers.get(&key).into_iter().flatten().copied().collect();
                readers.into_iter().for_each(|r| self.push(r));
            }
        }
    }
}

pub(crate) fn infer(g: &mut DefUseGraph) {
    let n = g.nodes.len();
    let mut extra: Vec<Vec<ValueId>> = vec![Vec::new(); n];
    for call in &g.calls {
        for src in call.receiver.iter().chain(&call.args) {
            extra[src.index()].push(call.result);
        }
    }
    let mut writes_by_node: HashMap<ValueId, Vec<AccessId>> = HashMap::new();
    for (i, a) in g.accesses.iter().enumerate() {
        if let Some((value, _)) = a.write {
            writes_by_node.entry(a.object).or_default().push(AccessId(i as u32));
            writes_by_node.entry(value).or_default().push(AccessId(i as u32));
        }
    }
    let handler_params = g
        .handlers
        .iter()
        .filter_map(|h| h.handler)
        .filter_map(|f| g.functions[f.index()].params.first().copied())
        .collect();
    let succ = g.successors();
    let mut inf = Infer {
        g,
        table: TypeTable::default(),
        types: vec![Vec::new(); n],
        slots: BTreeMap::new(),
        slot_values: BTreeMap::new(),
        readers: BTreeMap::new(),
        ext_readers: HashMap::new(),
        handler_params,
        queue: (0..n as u32).map(ValueId).collect(),
        queued: vec![true; n],
    };
    while let Some(v) = inf.queue.pop_front() {
        inf.queued[v.index()] = false;
        let new = inf.eval(v);
        let mut cur = std::mem::take(&mut inf.types[v.index()]);
        let changed = merge(&mut cur, &new);
        inf.types[v.index()] = cur;
        if !changed {
            continue;
        }
        for (s, _) in &succ[v.index()] {
            inf.push(*s);
        }
        for s in extra[v.index()].clone() {
            inf.push(s);
        }
        if let Some(ws) = writes_by_node.get(&v) {
            for w in ws.clone() {
                inf.apply_write(w);
            }
        }
    }

    let Infer { table, mut types, slots, slot_values, readers, .. } = inf;
    // Materialize heap slots as nodes so values flow from writes to reads.
    let mut field_of: BTreeMap<(TypeId, String), ValueId> = BTreeMap::new();
    for (key, values) in slot_values {
        let id = ValueId(g.nodes.len() as u32);
        let site = g.node(*values.iter().next().expect("slot value")).site;
        g.nodes.push(ValueNode {
            op: Op::Field(key.0, key.1.clone()),
            site,
            inputs: values.iter().map(|&from| Input { from, edge: EdgeKind::Local }).collect(),
        });
        types.push(slots.get(&key).cloned().unwrap_or_default());
        field_of.insert(key, id);
    }
    for (key, rs) in readers {
        if let Some(&field) = field_of.get(&key) {
            for r in rs {
                let inputs = &mut g.nodes[r.index()].inputs;
                if !inputs.iter().any(|i| i.from == field) {
                    inputs.push(Input { from: field, edge: EdgeKind::Local });
                }
            }
        }
    }
    g.consts.resize(g.nodes.len(), ConstValue::Bottom);
    g.types = table;
    g.node_types = types;
}
