//! AST walk producing variables, definitions, uses and the value graph.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::*;
use crate::ast::{AstNode, NodeKind};

/// Ordering skeleton of one region, used to compute reaching definitions.
#[derive(Debug)]
pub(crate) enum Ev {
    Def(DefId, VarId),
    Use(UseId, VarId),
    /// Alternatives; exactly one runs.
    Branch(Vec<Vec<Ev>>),
    /// Runs zero or more times.
    Loop(Vec<Ev>),
}

struct Scope {
    parent: Option<u32>,
    names: HashMap<String, VarId>,
}

struct Builder {
    g: DefUseGraph,
    scopes: Vec<Scope>,
    file: FileId,
    scope: Option<u32>,
    region: RegionId,
    func: Option<FuncId>,
    this_func: Option<FuncId>,
    stmt: u32,
    for_in_depth: u32,
    copy_in_loop: bool,
    returns_ident: bool,
    frames: Vec<Vec<Ev>>,
    region_events: Vec<Vec<Ev>>,
    return_vars: HashMap<FuncId, VarId>,
}

pub(crate) fn build(app_id: &str, scripts: &[ParsedScript], options: AnalysisOptions) -> (DefUseGraph, Vec<Vec<Ev>>) {
    let g = DefUseGraph {
        app_id: app_id.to_string(),
        options,
        vars: Vec::new(),
        defs: Vec::new(),
        uses: Vec::new(),
        nodes: vec![ValueNode {
            op: Op::Void,
            site: Site { file: FileId(0), span: Span::default() },
            inputs: Vec::new(),
        }],
        accesses: Vec::new(),
        calls: Vec::new(),
        functions: Vec::new(),
        regions: Vec::new(),
        objects: Vec::new(),
        defs_by_var: Vec::new(),
        uses_by_var: Vec::new(),
        globals: BTreeMap::new(),
        chains: BTreeSet::new(),
        handlers: Vec::new(),
        consts: Vec::new(),
        types: TypeTable::default(),
        node_types: Vec::new(),
        labels: Labels::default(),
    };
    let mut b = Builder {
        g,
        scopes: Vec::new(),
        file: FileId(0),
        scope: None,
        region: RegionId(0),
        func: None,
        this_func: None,
        stmt: 0,
        for_in_depth: 0,
        copy_in_loop: false,
        returns_ident: false,
        frames: Vec::new(),
        region_events: Vec::new(),
        return_vars: HashMap::new(),
    };
    for script in scripts {
        b.file = script.file;
        b.region = b.new_region(None);
        b.scope = None;
        b.func = None;
        b.this_func = None;
        b.stmt = 0;
        b.frames = vec![Vec::new()];
        b.body(&script.root.children);
        let events = b.frames.pop().unwrap_or_default();
        b.region_events[b.region.index()] = events;
    }
    (b.g, b.region_events)
}

fn literal_of(n: &AstNode) -> Option<JsConst> {
    match n.kind {
        NodeKind::StringLiteral => Some(JsConst::Str(n.text().unwrap_or_default().to_string())),
        NodeKind::TemplateLiteral if n.children.is_empty() => n.text().map(|t| JsConst::Str(t.to_string())),
        NodeKind::NumberLiteral => n.number().map(JsConst::Num),
        NodeKind::BooleanLiteral => Some(JsConst::Bool(n.text() == Some("true"))),
        NodeKind::NullLiteral => Some(JsConst::Null),
        _ => None,
    }
}

fn literal_key(n: &AstNode) -> Option<String> {
    match n.kind {
        NodeKind::StringLiteral | NodeKind::NumberLiteral => n.text().map(str::to_string),
        NodeKind::TemplateLiteral if n.children.is_empty() => n.text().map(str::to_string),
        _ => None,
    }
}

/// Binding identifiers inside a pattern, not entering nested functions.
fn collect_bindings<'a>(n: &'a AstNode, out: &mut Vec<&'a AstNode>) {
    match n.kind {
        NodeKind::Identifier { binding: true } => out.push(n),
        _ if n.is_function() => {}
        _ => n.children.iter().for_each(|c| collect_bindings(c, out)),
    }
}

/// Hoisted declarations of a function body: `var`/`let`/`const`, function
/// declarations, classes and catch parameters, excluding nested functions.
fn collect_decls<'a>(n: &'a AstNode, out: &mut Vec<&'a AstNode>) {
    match n.kind {
        NodeKind::FunctionDecl => {
            if let Some(name) = n.child(0).filter(|c| c.is_identifier()) {
                out.push(name);
            }
        }
        NodeKind::FunctionExpr | NodeKind::ArrowFunction => {}
        NodeKind::VarDecl => {
            if let Some(pattern) = n.child(0) {
                collect_bindings(pattern, out);
            }
        }
        NodeKind::Other if n.text() == Some("CatchClause") => {
            for c in &n.children {
                if c.kind == NodeKind::BlockStmt {
                    collect_decls(c, out);
                } else {
                    collect_bindings(c, out);
                }
            }
        }
        NodeKind::Other if n.text() == Some("Class") => {
            if let Some(name) = n.child(0).filter(|c| matches!(c.kind, NodeKind::Identifier { binding: true })) {
                out.push(name);
            }
        }
        _ => n.children.iter().for_each(|c| collect_decls(c, out)),
    }
}

impl Builder {
    fn site(&self, span: Span) -> Site {
        Site { file: self.file, span }
    }

    fn new_region(&mut self, func: Option<FuncId>) -> RegionId {
        let id = RegionId(self.g.regions.len() as u32);
        self.g.regions.push(Region { file: self.file, func });
        self.region_events.push(Vec::new());
        id
    }

    fn node(&mut self, op: Op, span: Span, inputs: &[ValueId]) -> ValueId {
        let id = ValueId(self.g.nodes.len() as u32);
        let inputs = inputs
            .iter()
            .filter(|v| **v != VOID)
            .map(|&from| Input { from, edge: EdgeKind::Local })
            .collect();
        self.g.nodes.push(ValueNode { op, site: Site { file: self.file, span }, inputs });
        id
    }

    fn emit(&mut self, ev: Ev) {
        if let Some(frame) = self.frames.last_mut() {
            frame.push(ev);
        }
    }

    fn new_var(&mut self, name: &str, kind: VarKind, decl: Option<Site>) -> VarId {
        let id = VarId(self.g.vars.len() as u32);
        self.g.vars.push(Variable { name: name.to_string(), kind, decl });
        self.g.defs_by_var.push(Vec::new());
        self.g.uses_by_var.push(Vec::new());
        id
    }

    fn global(&mut self, name: &str) -> VarId {
        if let Some(v) = self.g.globals.get(name) {
            return *v;
        }
        let v = self.new_var(name, VarKind::Global, None);
        self.g.globals.insert(name.to_string(), v);
        v
    }

    fn resolve(&mut self, name: &str) -> VarId {
        let mut s = self.scope;
        while let Some(i) = s {
            let scope = &self.scopes[i as usize];
            if let Some(v) = scope.names.get(name) {
                return *v;
            }
            s = scope.parent;
        }
        self.global(name)
    }

    fn define(&mut self, var: VarId, value: ValueId, span: Span, emit: bool) -> DefId {
        let d = DefId(self.g.defs.len() as u32);
        let node = self.node(Op::Def(d), span, &[value]);
        self.g.defs.push(Definition { var, site: self.site(span), value, node, region: self.region });
        self.g.defs_by_var[var.index()].push(d);
        if emit {
            self.emit(Ev::Def(d, var));
        }
        if let Op::Function(f) = self.g.nodes[value.index()].op {
            let func = &mut self.g.functions[f.index()];
            if func.var.is_none() {
                func.var = Some(var);
            }
        }
        d
    }

    fn define_ident(&mut self, ident: &AstNode, value: ValueId) {
        let name = ident.text().unwrap_or_default();
        let var = self.resolve(name);
        self.define(var, value, ident.span, true);
    }

    fn define_pattern(&mut self, pattern: &AstNode, value: ValueId) {
        if pattern.is_identifier() {
            self.define_ident(pattern, value);
            return;
        }
        let mut names = Vec::new();
        collect_bindings(pattern, &mut names);
        if names.is_empty() {
            // assignment targets use reference identifiers
            collect_assign_targets(pattern, &mut names);
        }
        for ident in names {
            let part = self.node(Op::Opaque, ident.span, &[value]);
            self.define_ident(ident, part);
        }
    }

    fn read_ident(&mut self, n: &AstNode) -> ValueId {
        let name = n.text().unwrap_or_default();
        let var = self.resolve(name);
        if name == "undefined" && self.g.vars[var.index()].kind == VarKind::Global {
            return self.node(Op::Lit(JsConst::Undefined), n.span, &[]);
        }
        if self.g.vars[var.index()].kind == VarKind::Global && !self.g.chains.contains(name) {
            self.g.chains.insert(name.to_string());
        }
        let u = UseId(self.g.uses.len() as u32);
        let node = self.node(Op::Use(u), n.span, &[]);
        self.g.uses.push(Use {
            var,
            site: self.site(n.span),
            node,
            region: self.region,
            local_reaching: Vec::new(),
            role: UseRole::Plain,
            label: None,
        });
        self.g.uses_by_var[var.index()].push(u);
        self.emit(Ev::Use(u, var));
        node
    }

    fn record_chain(&mut self, n: &AstNode) {
        if let Some(chain) = n.static_chain() {
            if !self.g.chains.contains(&chain) {
                self.g.chains.insert(chain);
            }
        }
    }

    fn branch(&mut self, alts: &[&AstNode], optional: bool) -> Vec<ValueId> {
        let mut evs = Vec::new();
        let mut values = Vec::new();
        for alt in alts {
            self.frames.push(Vec::new());
            values.push(self.expr(alt));
            evs.push(self.frames.pop().unwrap_or_default());
        }
        if optional {
            evs.push(Vec::new());
        }
        if evs.iter().any(|e| !e.is_empty()) {
            self.emit(Ev::Branch(evs));
        }
        values
    }

    fn in_loop(&mut self, f: impl FnOnce(&mut Self)) {
        self.frames.push(Vec::new());
        f(self);
        let body = self.frames.pop().unwrap_or_default();
        if !body.is_empty() {
            self.emit(Ev::Loop(body));
        }
    }

    /// Statement list with function declarations hoisted to the front.
    fn body(&mut self, stmts: &[AstNode]) {
        for s in stmts.iter().filter(|s| s.kind == NodeKind::FunctionDecl) {
            self.function_decl(s);
        }
        for s in stmts.iter().filter(|s| s.kind != NodeKind::FunctionDecl) {
            self.stmt += 1;
            self.expr(s);
        }
    }

    fn function_decl(&mut self, n: &AstNode) {
        let f = self.function(n);
        if let Some(name) = n.child(0).filter(|c| c.is_identifier()) {
            self.define_ident(name, f);
        }
    }

    fn function(&mut self, n: &AstNode) -> ValueId {
        let Some((name, params, body)) = n.function_parts() else {
            return self.other(n);
        };
        let f = FuncId(self.g.functions.len() as u32);
        let is_arrow = n.kind == NodeKind::ArrowFunction;
        self.g.functions.push(Function {
            site: self.site(n.span),
            name: name.and_then(|n| n.text()).map(str::to_string),
            var: None,
            params: Vec::new(),
            returns: Vec::new(),
            region: RegionId(0),
            is_arrow,
            extension_helper: false,
            this_owner: None,
        });
        let fnode = self.node(Op::Function(f), n.span, &[]);

        let scope_id = self.scopes.len() as u32;
        self.scopes.push(Scope { parent: self.scope, names: HashMap::new() });
        let mut names: HashMap<String, VarId> = HashMap::new();
        for (i, p) in params.children.iter().enumerate() {
            if p.is_identifier() {
                let name = p.text().unwrap_or_default();
                let v = self.new_var(name, VarKind::Param { func: f, index: i as u32 }, Some(self.site(p.span)));
                names.insert(name.to_string(), v);
            } else {
                let mut idents = Vec::new();
                collect_bindings(p, &mut idents);
                for ident in idents {
                    let name = ident.text().unwrap_or_default();
                    let v = self.new_var(name, VarKind::Declared { scope: scope_id }, Some(self.site(ident.span)));
                    names.insert(name.to_string(), v);
                }
            }
        }
        let mut decls = Vec::new();
        collect_decls(body, &mut decls);
        let self_name = name.filter(|_| n.kind == NodeKind::FunctionExpr);
        for ident in decls.into_iter().chain(self_name) {
            let nm = ident.text().unwrap_or_default();
            if !names.contains_key(nm) {
                let v = self.new_var(nm, VarKind::Declared { scope: scope_id }, Some(self.site(ident.span)));
                names.insert(nm.to_string(), v);
            }
        }
        self.scopes[scope_id as usize].names = names;

        let saved_scope = self.scope;
        let saved_region = self.region;
        let saved_func = self.func;
        let saved_this = self.this_func;
        let saved_stmt = self.stmt;
        let saved_for_in = self.for_in_depth;
        let saved_copy = self.copy_in_loop;
        let saved_ret = self.returns_ident;
        let saved_frames = std::mem::replace(&mut self.frames, vec![Vec::new()]);

        let region = self.new_region(Some(f));
        self.g.functions[f.index()].region = region;
        self.region = region;
        self.scope = Some(scope_id);
        self.func = Some(f);
        if !is_arrow {
            self.this_func = Some(f);
        }
        self.stmt = 0;
        self.for_in_depth = 0;
        self.copy_in_loop = false;
        self.returns_ident = false;

        for (i, p) in params.children.iter().enumerate() {
            let pnode = self.node(Op::Param { func: f, index: i as u32 }, p.span, &[]);
            self.g.functions[f.index()].params.push(pnode);
            let (pattern, init) = match p.kind {
                NodeKind::Other if p.text() == Some("FormalParameter") => (p.child(0), p.child(1)),
                _ => (Some(p), None),
            };
            if let Some(init) = init {
                let v = self.expr(init);
                if v != VOID {
                    self.g.nodes[pnode.index()].inputs.push(Input { from: v, edge: EdgeKind::Local });
                }
            }
            if let Some(pattern) = pattern {
                self.define_pattern(pattern, pnode);
            }
        }
        if let Some(name) = self_name {
            self.define_ident(name, fnode);
        }
        self.body(&body.children);

        if self.copy_in_loop && self.returns_ident {
            self.g.functions[f.index()].extension_helper = true;
        }
        let events = std::mem::replace(&mut self.frames, saved_frames).pop().unwrap_or_default();
        self.region_events[region.index()] = events;
        self.scope = saved_scope;
        self.region = saved_region;
        self.func = saved_func;
        self.this_func = saved_this;
        self.stmt = saved_stmt;
        self.for_in_depth = saved_for_in;
        self.copy_in_loop = saved_copy;
        self.returns_ident = saved_ret;
        fnode
    }

    fn expr(&mut self, n: &AstNode) -> ValueId {
        use NodeKind as K;
        match n.kind {
            K::Identifier { binding: false } => self.read_ident(n),
            K::Identifier { binding: true } => {
                let v = self.node(Op::Unknown, n.span, &[]);
                self.define_ident(n, v);
                VOID
            }
            K::PropertyName | K::Params => VOID,
            K::StringLiteral | K::NumberLiteral | K::BooleanLiteral | K::NullLiteral => match literal_of(n) {
                Some(c) => self.node(Op::Lit(c), n.span, &[]),
                None => self.node(Op::Unknown, n.span, &[]),
            },
            K::TemplateLiteral => {
                if let (Some(t), true) = (n.text(), n.children.is_empty()) {
                    return self.node(Op::Lit(JsConst::Str(t.to_string())), n.span, &[]);
                }
                let parts: Vec<_> = n.children.iter().map(|c| self.expr(c)).collect();
                self.node(Op::Template, n.span, &parts)
            }
            K::RegExpLiteral => self.node(Op::Unknown, n.span, &[]),
            K::BinaryExpr => {
                let l = n.child(0).map_or(VOID, |c| self.expr(c));
                let r = n.child(1).map_or(VOID, |c| self.expr(c));
                match n.text() {
                    Some("+") => self.node(Op::Add, n.span, &[l, r]),
                    Some("in" | "instanceof" | "==" | "!=" | "===" | "!==" | "<" | ">" | "<=" | ">=") => {
                        self.node(Op::Arith, n.span, &[])
                    }
                    _ => self.node(Op::Arith, n.span, &[l, r]),
                }
            }
            K::LogicalExpr => {
                let l = n.child(0).map_or(VOID, |c| self.expr(c));
                let r = match n.child(1) {
                    Some(c) => self.branch(&[c], true)[0],
                    None => VOID,
                };
                self.node(Op::Join, n.span, &[l, r])
            }
            K::ConditionalExpr => {
                if let Some(t) = n.child(0) {
                    self.expr(t);
                }
                let alts: Vec<&AstNode> = n.children.iter().skip(1).collect();
                let vals = self.branch(&alts, false);
                self.node(Op::Join, n.span, &vals)
            }
            K::UnaryExpr => self.unary(n),
            K::UpdateExpr => {
                let Some(target) = n.child(0) else { return VOID };
                match target.kind {
                    K::Identifier { .. } => {
                        let old = self.read_ident(target);
                        let v = self.node(Op::Arith, n.span, &[old]);
                        self.define_ident(target, v);
                        v
                    }
                    K::MemberExpr { .. } => {
                        let (obj, prop, key, object_use) = self.member_parts(target);
                        let old = self.push_read(obj, prop.clone(), key, object_use, target.span);
                        let v = self.node(Op::Arith, n.span, &[old]);
                        self.push_write(obj, prop, key, object_use, target.span, v, n.span);
                        v
                    }
                    _ => self.expr(target),
                }
            }
            K::SequenceExpr => {
                let mut last = VOID;
                for c in &n.children {
                    last = self.expr(c);
                }
                last
            }
            K::AssignExpr => self.assign(n),
            K::CallExpr => self.call(n, false),
            K::NewExpr => self.call(n, true),
            K::MemberExpr { .. } => {
                self.record_chain(n);
                let (obj, prop, key, object_use) = self.member_parts(n);
                self.push_read(obj, prop, key, object_use, n.span)
            }
            K::FunctionExpr | K::ArrowFunction => self.function(n),
            K::FunctionDecl => {
                self.function_decl(n);
                VOID
            }
            K::ObjectLiteral => self.object(n),
            K::ArrayLiteral => {
                let elems: Vec<_> = n.children.iter().map(|c| self.expr(c)).collect();
                self.node(Op::Array, n.span, &elems)
            }
            K::ThisExpr => self.node(Op::This(self.this_func), n.span, &[]),
            K::VarDecl => {
                if let (Some(pattern), Some(init)) = (n.child(0), n.child(1)) {
                    let v = self.expr(init);
                    self.define_pattern(pattern, v);
                }
                VOID
            }
            K::ReturnStmt => {
                let v = match n.child(0) {
                    Some(c) => {
                        if c.is_identifier() {
                            self.returns_ident = true;
                        }
                        self.expr(c)
                    }
                    None => self.node(Op::Lit(JsConst::Undefined), n.span, &[]),
                };
                if let Some(f) = self.func {
                    let var = match self.return_vars.get(&f) {
                        Some(v) => *v,
                        None => {
                            let v = self.new_var("<return>", VarKind::Return { func: f }, None);
                            self.return_vars.insert(f, v);
                            v
                        }
                    };
                    let d = self.define(var, v, n.span, false);
                    self.g.functions[f.index()].returns.push(d);
                }
                VOID
            }
            K::IfStmt => {
                if let Some(t) = n.child(0) {
                    self.expr(t);
                }
                let alts: Vec<&AstNode> = n.children.iter().skip(1).collect();
                self.branch(&alts, alts.len() < 2);
                VOID
            }
            K::BlockStmt | K::Program => {
                for c in &n.children {
                    self.stmt += 1;
                    self.expr(c);
                }
                VOID
            }
            K::LoopStmt => {
                self.loop_stmt(n);
                VOID
            }
            K::Property => {
                // only reached outside object literals (patterns); evaluate the value side
                let vals: Vec<_> = n.children.iter().skip(usize::from(n.text.is_some())).map(|c| self.expr(c)).collect();
                self.node(Op::Opaque, n.span, &vals)
            }
            K::Other => self.other(n),
        }
    }

    fn unary(&mut self, n: &AstNode) -> ValueId {
        let Some(arg) = n.child(0) else { return VOID };
        match n.text() {
            Some("-") if arg.kind == NodeKind::NumberLiteral => {
                let v = arg.number().map_or(f64::NAN, |x| -x);
                self.node(Op::Lit(JsConst::Num(v)), n.span, &[])
            }
            Some("void") => {
                self.expr(arg);
                self.node(Op::Lit(JsConst::Undefined), n.span, &[])
            }
            Some("typeof") => {
                self.expr(arg);
                self.node(Op::Template, n.span, &[])
            }
            Some("!" | "delete") => {
                self.expr(arg);
                self.node(Op::Arith, n.span, &[])
            }
            _ => {
                let v = self.expr(arg);
                self.node(Op::Arith, n.span, &[v])
            }
        }
    }

    fn loop_stmt(&mut self, n: &AstNode) {
        match n.text() {
            Some("for-in" | "for-of") => {
                let (Some(left), Some(right)) = (n.child(0), n.child(1)) else {
                    return;
                };
                let r = self.expr(right);
                let for_in = n.text() == Some("for-in");
                self.in_loop(|b| {
                    let item = b.node(Op::Opaque, left.span, &[r]);
                    match left.kind {
                        NodeKind::VarDecl => {
                            if let Some(p) = left.child(0) {
                                b.define_pattern(p, item);
                            }
                        }
                        NodeKind::MemberExpr { .. } => {
                            let (obj, prop, key, object_use) = b.member_parts(left);
                            b.push_write(obj, prop, key, object_use, left.span, item, left.span);
                        }
                        _ => b.define_pattern(left, item),
                    }
                    if for_in {
                        b.for_in_depth += 1;
                    }
                    for c in n.children.iter().skip(2) {
                        b.stmt += 1;
                        b.expr(c);
                    }
                    if for_in {
                        b.for_in_depth -= 1;
                    }
                });
            }
            _ => self.in_loop(|b| {
                for c in &n.children {
                    b.stmt += 1;
                    b.expr(c);
                }
            }),
        }
    }

    fn other(&mut self, n: &AstNode) -> ValueId {
        match n.text() {
            Some("SwitchStatement") => {
                let Some((disc, cases)) = n.children.split_first() else { return VOID };
                self.expr(disc);
                let alts: Vec<&AstNode> = cases.iter().collect();
                self.branch(&alts, true);
                VOID
            }
            Some("SwitchCase") => {
                for c in &n.children {
                    self.stmt += 1;
                    self.expr(c);
                }
                VOID
            }
            Some("TryStatement") => {
                for c in &n.children {
                    if c.text() == Some("CatchClause") {
                        self.branch(&[c], true);
                    } else {
                        self.expr(c);
                    }
                }
                VOID
            }
            Some("CatchClause") => {
                for c in &n.children {
                    if c.kind == NodeKind::BlockStmt {
                        self.expr(c);
                    } else {
                        let v = self.node(Op::Unknown, c.span, &[]);
                        self.define_pattern(c, v);
                    }
                }
                VOID
            }
            _ => {
                let vals: Vec<_> = n.children.iter().map(|c| self.expr(c)).collect();
                if vals.iter().all(|v| *v == VOID) {
                    VOID
                } else {
                    self.node(Op::Opaque, n.span, &vals)
                }
            }
        }
    }

    fn object(&mut self, n: &AstNode) -> ValueId {
        let mut props = Vec::new();
        let mut inputs = Vec::new();
        for p in &n.children {
            if p.kind == NodeKind::Property {
                if let Some(key) = p.text() {
                    let v = p.child(1).map_or(VOID, |c| self.expr(c));
                    props.push((key.to_string(), v));
                    inputs.push(v);
                } else {
                    for c in &p.children {
                        inputs.push(self.expr(c));
                    }
                }
            } else {
                inputs.push(self.expr(p));
            }
        }
        let idx = self.g.objects.len() as u32;
        self.g.objects.push(props);
        self.node(Op::Object(idx), n.span, &inputs)
    }

    fn member_parts(&mut self, n: &AstNode) -> (ValueId, Option<String>, Option<ValueId>, Option<UseId>) {
        let obj = n.child(0).map_or(VOID, |c| self.expr(c));
        let object_use = match self.g.nodes[obj.index()].op {
            Op::Use(u) => Some(u),
            _ => None,
        };
        let (prop, key) = match (n.kind, n.child(1)) {
            (NodeKind::MemberExpr { computed: true }, Some(k)) => match literal_key(k) {
                Some(p) => (Some(p), None),
                None => (None, Some(self.expr(k))),
            },
            (_, Some(p)) => (p.text().map(str::to_string), None),
            _ => (None, None),
        };
        (obj, prop, key, object_use)
    }

    fn push_read(
        &mut self,
        obj: ValueId,
        prop: Option<String>,
        key: Option<ValueId>,
        object_use: Option<UseId>,
        span: Span,
    ) -> ValueId {
        let a = AccessId(self.g.accesses.len() as u32);
        let node = self.node(Op::Read(a), span, &[obj]);
        self.g.accesses.push(MemberAccess {
            object: obj,
            prop,
            key,
            site: self.site(span),
            write: None,
            node: Some(node),
            object_use,
            region: self.region,
            stmt: self.stmt,
        });
        node
    }

    #[allow(clippy::too_many_arguments)]
    fn push_write(
        &mut self,
        obj: ValueId,
        prop: Option<String>,
        key: Option<ValueId>,
        object_use: Option<UseId>,
        span: Span,
        value: ValueId,
        assign_span: Span,
    ) {
        if key.is_some() && self.for_in_depth > 0 {
            self.copy_in_loop = true;
        }
        self.g.accesses.push(MemberAccess {
            object: obj,
            prop,
            key,
            site: self.site(span),
            write: Some((value, self.site(assign_span))),
            node: None,
            object_use,
            region: self.region,
            stmt: self.stmt,
        });
    }

    fn combine(&mut self, op: &str, old: ValueId, rhs: ValueId, span: Span) -> ValueId {
        match op {
            "+=" => self.node(Op::Add, span, &[old, rhs]),
            "||=" | "&&=" | "??=" => self.node(Op::Join, span, &[old, rhs]),
            _ => self.node(Op::Arith, span, &[old, rhs]),
        }
    }

    fn assign(&mut self, n: &AstNode) -> ValueId {
        let (Some(lhs), Some(rhs)) = (n.child(0), n.child(1)) else {
            return self.other(n);
        };
        let op = n.text().unwrap_or("=");
        match lhs.kind {
            NodeKind::Identifier { .. } => {
                let value = if op == "=" {
                    self.expr(rhs)
                } else {
                    let old = self.read_ident(lhs);
                    let r = self.expr(rhs);
                    self.combine(op, old, r, n.span)
                };
                self.define_ident(lhs, value);
                value
            }
            NodeKind::MemberExpr { .. } => {
                self.record_chain(lhs);
                let (obj, prop, key, object_use) = self.member_parts(lhs);
                let value = if op == "=" {
                    self.expr(rhs)
                } else {
                    let old = self.push_read(obj, prop.clone(), key, object_use, lhs.span);
                    let r = self.expr(rhs);
                    self.combine(op, old, r, n.span)
                };
                self.note_prototype(lhs, prop.as_deref(), value);
                self.push_write(obj, prop, key, object_use, lhs.span, value, n.span);
                value
            }
            _ => {
                let value = self.expr(rhs);
                self.define_pattern(lhs, value);
                value
            }
        }
    }

    /// `X.prototype.m = function` and `X.prototype = {...}` make `this` in those
    /// functions denote instances of `X`.
    fn note_prototype(&mut self, lhs: &AstNode, prop: Option<&str>, value: ValueId) {
        let owner_ident = if prop == Some("prototype") {
            lhs.child(0)
        } else {
            lhs.child(0)
                .filter(|o| o.member_property() == Some("prototype"))
                .and_then(|o| o.child(0))
        };
        let Some(owner) = owner_ident.filter(|o| o.is_identifier()) else { return };
        let owner_var = self.resolve(owner.text().unwrap_or_default());
        let mut funcs = Vec::new();
        match &self.g.nodes[value.index()].op {
            Op::Function(f) => funcs.push(*f),
            Op::Object(o) if prop == Some("prototype") => {
                for (_, v) in &self.g.objects[*o as usize] {
                    if let Op::Function(f) = self.g.nodes[v.index()].op {
                        funcs.push(f);
                    }
                }
            }
            _ => {}
        }
        for f in funcs {
            self.g.functions[f.index()].this_owner.get_or_insert(owner_var);
        }
    }

    fn call(&mut self, n: &AstNode, is_new: bool) -> ValueId {
        let Some((callee, args)) = n.children.split_first() else {
            return VOID;
        };
        let callee_chain = callee.static_chain();
        if let Some(chain) = &callee_chain {
            if !self.g.chains.contains(chain) {
                self.g.chains.insert(chain.clone());
            }
        }
        let mut receiver = None;
        let mut receiver_chain = None;
        let mut name = None;
        let mut callee_key = None;
        let mut bare = false;
        let callee_val = match callee.kind {
            NodeKind::MemberExpr { computed } => {
                let obj = callee.child(0).map_or(VOID, |c| self.expr(c));
                receiver = Some(obj);
                receiver_chain = callee.child(0).and_then(AstNode::static_chain);
                match (computed, callee.child(1)) {
                    (true, Some(k)) => {
                        name = literal_key(k);
                        if name.is_none() {
                            callee_key = Some(self.expr(k));
                        }
                    }
                    (false, Some(p)) => name = p.text().map(str::to_string),
                    _ => {}
                }
                VOID
            }
            NodeKind::Identifier { .. } => {
                bare = true;
                name = callee.text().map(str::to_string);
                self.read_ident(callee)
            }
            _ => self.expr(callee),
        };
        let mut arg_vals = Vec::with_capacity(args.len());
        let mut arg_sites = Vec::with_capacity(args.len());
        let mut arg_literals = Vec::with_capacity(args.len());
        for a in args {
            let v = self.expr(a);
            let v = if v == VOID { self.node(Op::Unknown, a.span, &[]) } else { v };
            arg_vals.push(v);
            arg_sites.push(self.site(a.span));
            arg_literals.push(literal_of(a));
        }
        let c = CallId(self.g.calls.len() as u32);
        let result = self.node(if is_new { Op::New(c) } else { Op::Call(c) }, n.span, &[]);
        self.g.calls.push(CallSite {
            site: self.site(n.span),
            callee: callee_val,
            callee_chain,
            name,
            callee_key,
            bare,
            receiver,
            receiver_chain,
            args: arg_vals,
            arg_sites,
            arg_literals,
            is_new,
            targets: Vec::new(),
            result,
            region: self.region,
            stmt: self.stmt,
        });
        result
    }
}

/// Reference identifiers that are assignment targets inside a destructuring target.
fn collect_assign_targets<'a>(n: &'a AstNode, out: &mut Vec<&'a AstNode>) {
    match n.kind {
        NodeKind::Identifier { .. } => out.push(n),
        NodeKind::MemberExpr { .. } => {}
        _ if n.is_function() => {}
        _ => n.children.iter().for_each(|c| collect_assign_targets(c, out)),
    }
}

/// Resolve direct call targets and add argument and return edges.
pub(crate) fn link_calls(g: &mut DefUseGraph) {
    let k = g.options.context_depth;
    for ci in 0..g.calls.len() {
        let c = CallId(ci as u32);
        let targets = g.functions_of(g.calls[ci].callee);
        let call = &g.calls[ci];
        if targets.is_empty() {
            let mut inputs: Vec<Input> = Vec::new();
            inputs.extend(call.receiver.iter().map(|&from| Input { from, edge: EdgeKind::Local }));
            inputs.extend(call.args.iter().map(|&from| Input { from, edge: EdgeKind::Local }));
            inputs.retain(|i| i.from != VOID);
            let result = call.result;
            g.nodes[result.index()].inputs.extend(inputs);
            continue;
        }
        if call.is_new {
            // the new object carries whatever its constructor was given
            let inputs: Vec<Input> =
                call.args.iter().filter(|&&a| a != VOID).map(|&from| Input { from, edge: EdgeKind::Local }).collect();
            let result = call.result;
            g.nodes[result.index()].inputs.extend(inputs);
        }
        let call = &g.calls[ci];
        if k > 0 {
            let args = call.args.clone();
            let result = call.result;
            let is_new = call.is_new;
            for &f in &targets {
                let func = &g.functions[f.index()];
                let params = func.params.clone();
                let returns: Vec<ValueId> = func.returns.iter().map(|d| g.defs[d.index()].node).collect();
                for (p, a) in params.iter().zip(&args) {
                    g.nodes[p.index()].inputs.push(Input { from: *a, edge: EdgeKind::Call(c) });
                }
                if !is_new {
                    g.nodes[result.index()]
                        .inputs
                        .extend(returns.into_iter().map(|from| Input { from, edge: EdgeKind::Return(c) }));
                }
            }
        }
        g.calls[ci].targets = targets;
    }
}

/// Message handler registrations: `addEventListener("message", h)` and `onmessage = h`.
pub(crate) fn find_handlers(g: &mut DefUseGraph) {
    let mut regs = Vec::new();
    for call in &g.calls {
        if call.name.as_deref() != Some("addEventListener") || call.args.len() < 2 {
            continue;
        }
        let literal_call = matches!(&call.arg_literals[0], Some(JsConst::Str(s)) if s == "message");
        if !literal_call && g.const_str(call.args[0]) != Some("message") {
            continue;
        }
        regs.push(HandlerRegistration {
            site: call.site,
            literal_call,
            assignment: false,
            handler: g.functions_of(call.args[1]).first().copied(),
        });
    }
    for a in &g.accesses {
        if let (Some("onmessage"), Some((value, site))) = (a.prop.as_deref(), a.write) {
            regs.push(HandlerRegistration {
                site,
                literal_call: false,
                assignment: true,
                handler: g.functions_of(value).first().copied(),
            });
        }
    }
    if let Some(&v) = g.globals.get("onmessage") {
        for d in &g.defs_by_var[v.index()] {
            let def = &g.defs[d.index()];
            regs.push(HandlerRegistration {
                site: def.site,
                literal_call: false,
                assignment: true,
                handler: g.functions_of(def.value).first().copied(),
            });
        }
    }
    regs.sort_by_key(|r| r.site);
    g.handlers = regs;
}
