//! Per-app def-use chains with k-limited interprocedural links, constant
//! propagation, heuristic types and catalog labels.
//!
//! Every expression of interest becomes a node of a value graph; a node's
//! inputs are the nodes its value may come from. Definitions and uses of
//! variables are nodes too, connected through reaching definitions.

mod build;
mod constants;
mod dump;
mod labels;
pub(crate) mod propagate;
mod reaching;
mod types;

use std::collections::BTreeMap;

use serde::Serialize;

use crate::ast::ParsedScript;
use crate::catalog::Catalog;
use crate::jsvalue::JsConst;
use crate::package::FileId;
use crate::span::Span;

pub use constants::ConstValue;
pub use labels::{FilterSite, Labels, SinkUse, SourceSite};
pub use types::{AbstractType, TypeId, TypeKind, TypeTable};

macro_rules! id_type {
    ($($name:ident),*) => {$(
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
        pub struct $name(pub u32);
        impl $name {
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }
    )*};
}
id_type!(VarId, DefId, UseId, ValueId, FuncId, CallId, RegionId, AccessId);

/// A location inside one of the app's files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Site {
    pub file: FileId,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum VarKind {
    /// Declared in a function scope (`let`/`const` are widened to the function).
    Declared { scope: u32 },
    /// Global name shared by every file of the app.
    Global,
    Param { func: FuncId, index: u32 },
    Return { func: FuncId },
}

#[derive(Debug, Clone, Serialize)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub decl: Option<Site>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    Literal,
    CallResult,
    Parameter,
    ObjectNew,
    MemberRead,
    FilterOutput,
    Unknown,
}

#[derive(Debug, Clone, Serialize)]
pub struct Definition {
    pub var: VarId,
    pub site: Site,
    /// Node holding the assigned value.
    pub value: ValueId,
    /// Node of the definition itself.
    pub node: ValueId,
    pub region: RegionId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum UseRole {
    Plain,
    SinkArgument,
    FilterArgument,
    PropertyName,
    CallArgument(u32),
    MessageOriginRead,
}

#[derive(Debug, Clone, Serialize)]
pub struct Use {
    pub var: VarId,
    pub site: Site,
    pub node: ValueId,
    pub region: RegionId,
    /// Reaching definitions from the use's own region (flow-sensitive part).
    pub local_reaching: Vec<DefId>,
    pub role: UseRole,
    pub label: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum EdgeKind {
    Local,
    /// Argument to parameter at a call site.
    Call(CallId),
    /// Return slot to call result at a call site.
    Return(CallId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Input {
    pub from: ValueId,
    pub edge: EdgeKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Op {
    Void,
    Unknown,
    Lit(JsConst),
    Def(DefId),
    Use(UseId),
    /// Definitions of a variable made outside the using region.
    Cross(VarId),
    Add,
    Join,
    /// Unmodeled operation; data flows through from every input.
    Opaque,
    /// String-producing operation (template with substitutions, `typeof`).
    Template,
    /// Number or boolean producing operation.
    Arith,
    Param { func: FuncId, index: u32 },
    Call(CallId),
    New(CallId),
    Read(AccessId),
    Function(FuncId),
    Object(u32),
    Array,
    This(Option<FuncId>),
    /// Heap slot for one (type, property) pair.
    Field(TypeId, String),
}

#[derive(Debug, Clone, Serialize)]
pub struct ValueNode {
    pub op: Op,
    pub site: Site,
    pub inputs: Vec<Input>,
}

/// A property read or write.
#[derive(Debug, Clone, Serialize)]
pub struct MemberAccess {
    pub object: ValueId,
    /// Static name, or the constant value of a computed key once resolved.
    pub prop: Option<String>,
    pub key: Option<ValueId>,
    /// Span of the member expression.
    pub site: Site,
    /// For writes: the stored value and the span of the whole assignment.
    pub write: Option<(ValueId, Site)>,
    /// For reads: the read node.
    pub node: Option<ValueId>,
    pub object_use: Option<UseId>,
    pub region: RegionId,
    pub stmt: u32,
}

#[derive(Debug, Clone, Serialize)]
pub struct CallSite {
    pub site: Site,
    pub callee: ValueId,
    /// Dotted text of a static callee such as `window.addEventListener`.
    pub callee_chain: Option<String>,
    /// Called name: the identifier or the method property.
    pub name: Option<String>,
    pub callee_key: Option<ValueId>,
    pub bare: bool,
    pub receiver: Option<ValueId>,
    pub receiver_chain: Option<String>,
    pub args: Vec<ValueId>,
    pub arg_sites: Vec<Site>,
    pub arg_literals: Vec<Option<JsConst>>,
    pub is_new: bool,
    pub targets: Vec<FuncId>,
    pub result: ValueId,
    pub region: RegionId,
    pub stmt: u32,
}

#[derive(Debug, Clone, Serialize)]
pub struct Function {
    pub site: Site,
    pub name: Option<String>,
    pub var: Option<VarId>,
    /// `Param` nodes, one per declared parameter.
    pub params: Vec<ValueId>,
    pub returns: Vec<DefId>,
    pub region: RegionId,
    pub is_arrow: bool,
    /// Copies properties in a `for-in` loop and returns an identifier.
    pub extension_helper: bool,
    /// Constructor whose instances `this` denotes (`X.prototype.m = function`).
    pub this_owner: Option<VarId>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Region {
    pub file: FileId,
    pub func: Option<FuncId>,
}

/// Message handler registration found in the code.
#[derive(Debug, Clone, Serialize)]
pub struct HandlerRegistration {
    pub site: Site,
    /// `addEventListener` with a literal `"message"` first argument.
    pub literal_call: bool,
    /// `onmessage =` assignment rather than a call.
    pub assignment: bool,
    pub handler: Option<FuncId>,
}

#[derive(Debug, Clone, Copy)]
pub struct AnalysisOptions {
    /// Call-string depth; 0 disables interprocedural edges.
    pub context_depth: usize,
    /// Key member-read types by receiver type and property name.
    pub member_path_types: bool,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self { context_depth: 1, member_path_types: true }
    }
}

#[derive(Debug, Clone)]
pub struct DefUseGraph {
    pub app_id: String,
    pub options: AnalysisOptions,
    pub vars: Vec<Variable>,
    pub defs: Vec<Definition>,
    pub uses: Vec<Use>,
    pub nodes: Vec<ValueNode>,
    pub accesses: Vec<MemberAccess>,
    pub calls: Vec<CallSite>,
    pub functions: Vec<Function>,
    pub regions: Vec<Region>,
    pub objects: Vec<Vec<(String, ValueId)>>,
    pub defs_by_var: Vec<Vec<DefId>>,
    pub uses_by_var: Vec<Vec<UseId>>,
    pub globals: BTreeMap<String, VarId>,
    /// Every identifier name and static member chain in the code.
    pub chains: std::collections::BTreeSet<String>,
    pub handlers: Vec<HandlerRegistration>,
    pub consts: Vec<ConstValue>,
    pub types: TypeTable,
    pub node_types: Vec<Vec<TypeId>>,
    pub labels: Labels,
}

pub(crate) const VOID: ValueId = ValueId(0);

impl DefUseGraph {
    pub fn node(&self, v: ValueId) -> &ValueNode {
        &self.nodes[v.index()]
    }

    pub fn var(&self, v: VarId) -> &Variable {
        &self.vars[v.index()]
    }

    pub fn var_named(&self, name: &str) -> Vec<VarId> {
        (0..self.vars.len() as u32).map(VarId).filter(|v| self.var(*v).name == name).collect()
    }

    /// All reaching definitions of a use: local ones plus definitions from other regions.
    pub fn reaching(&self, u: UseId) -> Vec<DefId> {
        let usage = &self.uses[u.index()];
        let mut out = usage.local_reaching.clone();
        out.extend(self.defs_by_var[usage.var.index()].iter().filter(|d| self.defs[d.index()].region != usage.region));
        out.sort();
        out.dedup();
        out
    }

    pub fn const_of(&self, v: ValueId) -> Option<&JsConst> {
        match &self.consts[v.index()] {
            ConstValue::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn const_str(&self, v: ValueId) -> Option<&str> {
        self.const_of(v).and_then(JsConst::as_str)
    }

    /// Variable-level constant table: every definition has the same constant value.
    pub fn constant_table(&self) -> BTreeMap<VarId, JsConst> {
        let mut table = BTreeMap::new();
        for (i, defs) in self.defs_by_var.iter().enumerate() {
            let Some(first) = defs.first() else { continue };
            let Some(c) = self.const_of(self.defs[first.index()].node) else { continue };
            if defs.iter().all(|d| self.const_of(self.defs[d.index()].node) == Some(c)) {
                table.insert(VarId(i as u32), c.clone());
            }
        }
        table
    }

    pub fn types_of(&self, v: ValueId) -> &[TypeId] {
        &self.node_types[v.index()]
    }

    pub fn def_kind(&self, d: DefId) -> ValueKind {
        let def = &self.defs[d.index()];
        if self.labels.is_filter(def.value) {
            return ValueKind::FilterOutput;
        }
        match &self.node(def.value).op {
            Op::Lit(_) => ValueKind::Literal,
            Op::Call(_) => ValueKind::CallResult,
            Op::Param { .. } => ValueKind::Parameter,
            Op::New(_) => ValueKind::ObjectNew,
            Op::Read(_) => ValueKind::MemberRead,
            _ => ValueKind::Unknown,
        }
    }

    /// Functions a value may denote directly: a function expression, or a
    /// variable whose reaching definitions are function values.
    pub fn functions_of(&self, v: ValueId) -> Vec<FuncId> {
        let mut out = Vec::new();
        match &self.node(v).op {
            Op::Function(f) => out.push(*f),
            Op::Use(u) => {
                for d in self.reaching(*u) {
                    if let Op::Function(f) = self.node(self.defs[d.index()].value).op {
                        out.push(f);
                    }
                }
            }
            _ => {}
        }
        out.sort();
        out.dedup();
        out
    }

    /// Variable read by a node that is a plain identifier use.
    pub fn var_of(&self, v: ValueId) -> Option<VarId> {
        match self.node(v).op {
            Op::Use(u) => Some(self.uses[u.index()].var),
            _ => None,
        }
    }

    /// Object-literal properties a value may hold, following copies.
    pub fn object_props(&self, v: ValueId) -> Vec<(String, ValueId)> {
        let mut out = Vec::new();
        let mut seen = std::collections::BTreeSet::new();
        let mut stack = vec![v];
        while let Some(n) = stack.pop() {
            if !seen.insert(n) || seen.len() > 64 {
                continue;
            }
            match &self.node(n).op {
                Op::Object(o) => out.extend(self.objects[*o as usize].iter().cloned()),
                Op::Def(_) | Op::Use(_) | Op::Cross(_) | Op::Join => {
                    stack.extend(self.node(n).inputs.iter().filter(|i| i.edge == EdgeKind::Local).map(|i| i.from))
                }
                _ => {}
            }
        }
        out
    }

    /// Whether the value is a string: a string constant, string-producing
    /// operation, or string-typed.
    pub fn is_string_valued(&self, v: ValueId) -> bool {
        if self.const_of(v).is_some_and(JsConst::is_string) {
            return true;
        }
        if matches!(self.node(v).op, Op::Template) {
            return true;
        }
        self.types_of(v).iter().any(|t| matches!(self.types.kind(*t), TypeKind::PrimitiveString(_)))
    }

    pub fn successors(&self) -> Vec<Vec<(ValueId, EdgeKind)>> {
        let mut succ = vec![Vec::new(); self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            for input in &n.inputs {
                succ[input.from.index()].push((ValueId(i as u32), input.edge));
            }
        }
        succ
    }

    /// Deterministic JSON dump for tests and debugging.
    pub fn debug_json(&self, pkg: &crate::package::AppPackage) -> serde_json::Value {
        dump::to_json(self, pkg)
    }
}

/// Build the full graph for one app: def-use chains, interprocedural edges,
/// constants, types and labels.
pub fn analyze(
    app_id: &str,
    scripts: &[ParsedScript],
    catalog: &Catalog,
    options: AnalysisOptions,
) -> DefUseGraph {
    let mut g = build_def_use(app_id, scripts, options);
    propagate_constants(&mut g);
    infer_types(&mut g);
    resolve_labels(&mut g, catalog);
    g
}

/// Def-use chains and interprocedural edges, without constants or types.
pub fn build_def_use(app_id: &str, scripts: &[ParsedScript], options: AnalysisOptions) -> DefUseGraph {
    let (mut g, events) = build::build(app_id, scripts, options);
    reaching::compute(&mut g, &events);
    build::link_calls(&mut g);
    g
}

pub fn propagate_constants(g: &mut DefUseGraph) {
    constants::propagate(g);
    constants::resolve_keys(g);
    build::find_handlers(g);
}

pub fn infer_types(g: &mut DefUseGraph) {
    types::infer(g);
}

pub fn resolve_labels(g: &mut DefUseGraph, catalog: &Catalog) {
    labels::resolve(g, catalog);
}
