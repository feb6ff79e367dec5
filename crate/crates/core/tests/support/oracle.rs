//! Random straight-line programs and a reference interpreter for their
//! def-use pairs and constant values.

use std::collections::BTreeMap;

use appsentry_core::ast::{parse_script, ScriptSource};
use appsentry_core::catalog::default_catalog;
use appsentry_core::dataflow::{analyze, AnalysisOptions, DefUseGraph};
use appsentry_core::jsvalue::JsConst;
use appsentry_core::package::{parse_manifest, AppPackage, FileId, SourceFile};
use appsentry_core::span::Span;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub enum Expr {
    Num(f64),
    Str(String),
    Var(String),
    Add(Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone)]
pub enum Stmt {
    Var(String, Expr),
    Assign(String, Expr),
    AddAssign(String, Expr),
    /// Expression statement reading variables only.
    Use(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Val {
    Num(f64),
    Str(String),
}

const LOCALS: [&str; 6] = ["a", "b", "c", "d", "e", "f"];
const FREE: [&str; 2] = ["ext1", "ext2"];

fn gen_expr(rng: &mut ChaCha8Rng, assigned: &[&'static str], depth: u32) -> Expr {
    let roll = rng.gen_range(0..10);
    if depth < 2 && roll < 3 {
        return Expr::Add(Box::new(gen_expr(rng, assigned, depth + 1)), Box::new(gen_expr(rng, assigned, depth + 1)));
    }
    match roll {
        0..=3 if !assigned.is_empty() => Expr::Var(assigned[rng.gen_range(0..assigned.len())].to_string()),
        4 => Expr::Var(FREE[rng.gen_range(0..FREE.len())].to_string()),
        5..=6 => {
            let n = rng.gen_range(0..4);
            Expr::Str((0..n).map(|_| rng.gen_range(b'a'..=b'z') as char).collect())
        }
        _ => {
            let whole = rng.gen_range(0..1000) as f64;
            Expr::Num(if rng.gen_bool(0.2) { whole + 0.5 } else { whole })
        }
    }
}

pub fn generate(rng: &mut ChaCha8Rng) -> Vec<Stmt> {
    let n = rng.gen_range(1..=30);
    let mut assigned: Vec<&'static str> = Vec::new();
    let mut out = Vec::new();
    for _ in 0..n {
        let roll = rng.gen_range(0..10);
        let e = gen_expr(rng, &assigned, 0);
        let target = LOCALS[rng.gen_range(0..LOCALS.len())];
        let stmt = if roll < 1 {
            Stmt::Use(e)
        } else if roll < 3 && assigned.contains(&target) {
            Stmt::AddAssign(target.to_string(), e)
        } else if roll < 6 {
            Stmt::Var(target.to_string(), e)
        } else {
            Stmt::Assign(target.to_string(), e)
        };
        if !assigned.contains(&target) && !matches!(stmt, Stmt::Use(_)) {
            assigned.push(target);
        }
        out.push(stmt);
    }
    out
}

fn quote(s: &str) -> String {
    format!("'{s}'")
}

fn render_expr(e: &Expr, out: &mut String) {
    match e {
        Expr::Num(x) => out.push_str(&format!("{x}")),
        Expr::Str(s) => out.push_str(&quote(s)),
        Expr::Var(v) => out.push_str(v),
        Expr::Add(l, r) => {
            render_expr(l, out);
            out.push_str(" + ");
            if matches!(**r, Expr::Add(..)) {
                out.push('(');
                render_expr(r, out);
                out.push(')');
            } else {
                render_expr(r, out);
            }
        }
    }
}

pub fn render(prog: &[Stmt]) -> String {
    let mut out = String::new();
    for s in prog {
        match s {
            Stmt::Var(v, e) => {
                out.push_str(&format!("var {v} = "));
                render_expr(e, &mut out);
            }
            Stmt::Assign(v, e) => {
                out.push_str(&format!("{v} = "));
                render_expr(e, &mut out);
            }
            Stmt::AddAssign(v, e) => {
                out.push_str(&format!("{v} += "));
                render_expr(e, &mut out);
            }
            Stmt::Use(e) => {
                out.push_str("sink(");
                render_expr(e, &mut out);
                out.push(')');
            }
        }
        out.push_str(";\n");
    }
    out
}

fn num_text(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

fn add(a: &Val, b: &Val) -> Val {
    let text = |v: &Val| match v {
        Val::Num(x) => num_text(*x),
        Val::Str(s) => s.clone(),
    };
    match (a, b) {
        (Val::Num(x), Val::Num(y)) => Val::Num(x + y),
        _ => Val::Str(text(a) + &text(b)),
    }
}

/// What the interpreter expects: for each variable, the reaching definition
/// (index among that variable's definitions in source order) of each use in
/// source order, and the variable's constant value if every definition
/// computes the same known value.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Expected {
    pub reaching: BTreeMap<String, Vec<Option<usize>>>,
    pub constants: BTreeMap<String, Val>,
}

struct Interp {
    env: BTreeMap<String, (usize, Option<Val>)>,
    defs: BTreeMap<String, Vec<Option<Val>>>,
    reaching: BTreeMap<String, Vec<Option<usize>>>,
}

impl Interp {
    fn eval(&mut self, e: &Expr) -> Option<Val> {
        match e {
            Expr::Num(x) => Some(Val::Num(*x)),
            Expr::Str(s) => Some(Val::Str(s.clone())),
            Expr::Var(v) => {
                let cur = self.env.get(v).cloned();
                self.reaching.entry(v.clone()).or_default().push(cur.as_ref().map(|c| c.0));
                cur.and_then(|c| c.1)
            }
            Expr::Add(l, r) => {
                let a = self.eval(l);
                let b = self.eval(r);
                Some(add(&a?, &b?))
            }
        }
    }

    fn define(&mut self, v: &str, val: Option<Val>) {
        let defs = self.defs.entry(v.to_string()).or_default();
        defs.push(val.clone());
        self.env.insert(v.to_string(), (defs.len() - 1, val));
    }
}

pub fn interpret(prog: &[Stmt]) -> Expected {
    let mut it = Interp { env: BTreeMap::new(), defs: BTreeMap::new(), reaching: BTreeMap::new() };
    for s in prog {
        match s {
            Stmt::Var(v, e) | Stmt::Assign(v, e) => {
                let val = it.eval(e);
                it.define(v, val);
            }
            Stmt::AddAssign(v, e) => {
                let old = it.eval(&Expr::Var(v.clone()));
                let rhs = it.eval(e);
                let val = old.zip(rhs).map(|(a, b)| add(&a, &b));
                it.define(v, val);
            }
            Stmt::Use(e) => {
                it.eval(e);
            }
        }
    }
    let mut constants = BTreeMap::new();
    for (v, vals) in &it.defs {
        if let Some(Some(first)) = vals.first() {
            if vals.iter().all(|x| x.as_ref() == Some(first)) {
                constants.insert(v.clone(), first.clone());
            }
        }
    }
    for v in FREE {
        it.reaching.entry(v.to_string()).or_default();
    }
    it.reaching.retain(|_, uses| !uses.is_empty());
    Expected { reaching: it.reaching, constants }
}

pub fn analyze_text(src: &str) -> DefUseGraph {
    let manifest = parse_manifest(br#"{"name":"oracle"}"#).expect("manifest");
    let pkg = AppPackage::from_files("oracle", manifest, vec![SourceFile::new("p.js", src.as_bytes())]);
    let f = &pkg.files[0];
    let script = parse_script(ScriptSource {
        file: FileId(0),
        path: &f.path,
        host: &f.content,
        lines: &f.lines,
        range: Span::new(0, f.content.len() as u32),
    })
    .expect("generated program parses");
    analyze(&pkg.app_id, &[script], &default_catalog(), AnalysisOptions::default())
}

/// The same view of the analysis result.
pub fn observed(g: &DefUseGraph) -> Expected {
    let mut reaching = BTreeMap::new();
    let mut constants = BTreeMap::new();
    let table = g.constant_table();
    for (i, var) in g.vars.iter().enumerate() {
        if !LOCALS.contains(&var.name.as_str()) && !FREE.contains(&var.name.as_str()) {
            continue;
        }
        let mut defs = g.defs_by_var[i].clone();
        defs.sort_by_key(|d| g.defs[d.index()].site.span.start);
        let mut uses = g.uses_by_var[i].clone();
        uses.sort_by_key(|u| g.uses[u.index()].site.span.start);
        if !uses.is_empty() {
            let per_use: Vec<Option<usize>> = uses
                .iter()
                .map(|u| {
                    let r = g.reaching(*u);
                    assert!(r.len() <= 1, "straight-line use with {} reaching defs", r.len());
                    r.first().map(|d| defs.iter().position(|x| x == d).expect("def of the variable"))
                })
                .collect();
            reaching.insert(var.name.clone(), per_use);
        }
        if let Some(c) = table.get(&appsentry_core::dataflow::VarId(i as u32)) {
            let v = match c {
                JsConst::Num(x) => Val::Num(*x),
                JsConst::Str(s) => Val::Str(s.clone()),
                other => panic!("unexpected constant {other:?}"),
            };
            constants.insert(var.name.clone(), v);
        }
    }
    Expected { reaching, constants }
}
