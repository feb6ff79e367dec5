//! Script parsing into a uniform syntax tree, plus pattern-directed call search.
//!
//! Parsing is delegated to `oxc_parser`; the typed oxc tree is flattened into
//! [`AstNode`]s whose kinds cover what the analysis models. Everything else is
//! kept as [`NodeKind::Other`] with its children so no subtree is lost.

use std::fmt;

use oxc_allocator::Allocator;
use oxc_ast::ast::{ArrowFunctionBody, FunctionType, VariableDeclarationKind};
use oxc_ast::AstKind;
use oxc_ast_visit::Visit;
use oxc_parser::{ParseOptions, Parser};
use oxc_span::{GetSpan, SourceType};
use serde::Serialize;

use crate::jsvalue::number_to_string;
use crate::package::FileId;
use crate::span::{LineIndex, SourceSpan, Span};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum NodeKind {
    Program,
    FunctionDecl,
    FunctionExpr,
    ArrowFunction,
    Params,
    VarDecl,
    AssignExpr,
    CallExpr,
    NewExpr,
    MemberExpr { computed: bool },
    Identifier { binding: bool },
    /// Non-reference name: static member property, object key, method key.
    PropertyName,
    StringLiteral,
    NumberLiteral,
    BooleanLiteral,
    NullLiteral,
    RegExpLiteral,
    TemplateLiteral,
    ObjectLiteral,
    ArrayLiteral,
    Property,
    BinaryExpr,
    LogicalExpr,
    ConditionalExpr,
    UnaryExpr,
    UpdateExpr,
    SequenceExpr,
    ThisExpr,
    ReturnStmt,
    IfStmt,
    BlockStmt,
    LoopStmt,
    Other,
}

/// One syntax node.
///
/// `text` carries the payload: identifier names, decoded string values, the
/// `ToString` form of numbers, operators, the static key of a property, the
/// declaration keyword of a `VarDecl`, or the syntax name of an `Other` node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AstNode {
    pub kind: NodeKind,
    pub span: Span,
    pub text: Option<Box<str>>,
    pub children: Vec<AstNode>,
}

impl AstNode {
    fn new(kind: NodeKind, span: Span, text: Option<&str>) -> Self {
        Self { kind, span, text: text.map(Into::into), children: Vec::new() }
    }

    pub fn text(&self) -> Option<&str> {
        self.text.as_deref()
    }

    pub fn child(&self, i: usize) -> Option<&AstNode> {
        self.children.get(i)
    }

    pub fn number(&self) -> Option<f64> {
        match self.kind {
            NodeKind::NumberLiteral => self.text().and_then(|t| t.parse().ok()),
            _ => None,
        }
    }

    pub fn is_identifier(&self) -> bool {
        matches!(self.kind, NodeKind::Identifier { .. })
    }

    pub fn is_function(&self) -> bool {
        matches!(
            self.kind,
            NodeKind::FunctionDecl | NodeKind::FunctionExpr | NodeKind::ArrowFunction
        )
    }

    /// For function nodes: (name, params, body).
    pub fn function_parts(&self) -> Option<(Option<&AstNode>, &AstNode, &AstNode)> {
        if !self.is_function() {
            return None;
        }
        let (name, rest) = match self.children.first() {
            Some(n) if n.is_identifier() => (Some(n), &self.children[1..]),
            _ => (None, &self.children[..]),
        };
        let params = rest.iter().find(|c| c.kind == NodeKind::Params)?;
        let body = rest.iter().rev().find(|c| c.kind == NodeKind::BlockStmt)?;
        Some((name, params, body))
    }

    /// Dotted text of a static member chain such as `window.document.write`.
    pub fn static_chain(&self) -> Option<String> {
        match self.kind {
            NodeKind::Identifier { .. } => self.text().map(str::to_string),
            NodeKind::ThisExpr => Some("this".to_string()),
            NodeKind::MemberExpr { computed } => {
                let object = self.child(0)?.static_chain()?;
                let prop = self.child(1)?;
                let name = match (computed, prop.kind) {
                    (false, _) => prop.text()?,
                    (true, NodeKind::StringLiteral) => prop.text()?,
                    _ => return None,
                };
                Some(format!("{object}.{name}"))
            }
            _ => None,
        }
    }

    /// Name of the accessed property when it is static or a string literal.
    pub fn member_property(&self) -> Option<&str> {
        match self.kind {
            NodeKind::MemberExpr { computed: false } => self.child(1)?.text(),
            NodeKind::MemberExpr { computed: true } => {
                let prop = self.child(1)?;
                (prop.kind == NodeKind::StringLiteral).then(|| prop.text()).flatten()
            }
            _ => None,
        }
    }

    /// Pre-order traversal.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a AstNode)) {
        f(self);
        for c in &self.children {
            c.walk(f);
        }
    }
}

/// A parsed script: root `Program` node plus the file it came from.
#[derive(Debug, Clone)]
pub struct ParsedScript {
    pub file: FileId,
    pub root: AstNode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParseDiagnostic {
    pub span: SourceSpan,
    pub message: String,
}

impl fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}:{}: {}",
            self.span.file, self.span.start_line, self.span.start_col, self.message
        )
    }
}

/// Where a script lives: a whole file or a byte range inside markup.
#[derive(Debug, Clone, Copy)]
pub struct ScriptSource<'a> {
    pub file: FileId,
    pub path: &'a str,
    /// Full text of the hosting file.
    pub host: &'a str,
    pub lines: &'a LineIndex,
    /// Byte range of the script inside `host`.
    pub range: Span,
}

/// Parse one script. Spans in the result are offsets into the host file.
pub fn parse_script(src: ScriptSource<'_>) -> Result<ParsedScript, ParseDiagnostic> {
    let text = &src.host[src.range.start as usize..src.range.end as usize];
    let allocator = Allocator::default();
    let options = ParseOptions { preserve_parens: false, ..ParseOptions::default() };

    let mut ret = Parser::new(&allocator, text, SourceType::script()).with_options(options).parse();
    if ret.fatal_error || ret.diagnostics.has_errors() {
        // ES module syntax only parses in module goal.
        let module = Parser::new(&allocator, text, SourceType::mjs()).with_options(options).parse();
        if module.fatal_error || module.diagnostics.has_errors() {
            let first = ret.diagnostics.errors().next();
            let offset = first
                .and_then(|d| d.labels.first().map(|l| l.offset() as u32))
                .unwrap_or(0)
                .min(text.len() as u32);
            let message = first.map(|d| d.message.to_string()).unwrap_or_else(|| "syntax error".into());
            let at = Span::new(offset, offset).shifted(src.range.start);
            return Err(ParseDiagnostic { span: src.lines.resolve(src.path, src.host, at), message });
        }
        ret = module;
    }

    let mut conv = Converter::new(src.range.start);
    conv.visit_program(&ret.program);
    let mut root = conv.finish();
    root.span = src.range;
    Ok(ParsedScript { file: src.file, root })
}

enum Frame {
    Node(AstNode),
    /// Transparent wrapper: children attach to the nearest node frame.
    Elided { decl_kind: Option<&'static str> },
}

struct Converter {
    base: u32,
    stack: Vec<Frame>,
    skip_depth: usize,
    done: Option<AstNode>,
}

impl Converter {
    fn new(base: u32) -> Self {
        Self { base, stack: Vec::new(), skip_depth: 0, done: None }
    }

    fn finish(self) -> AstNode {
        self.done.unwrap_or_else(|| AstNode::new(NodeKind::Program, Span::default(), None))
    }

    fn span(&self, s: oxc_span::Span) -> Span {
        Span::new(s.start + self.base, s.end + self.base)
    }

    fn enclosing_decl_kind(&self) -> Option<&'static str> {
        match self.stack.last() {
            Some(Frame::Elided { decl_kind }) => *decl_kind,
            _ => None,
        }
    }

    fn attach(&mut self, node: AstNode) {
        for frame in self.stack.iter_mut().rev() {
            if let Frame::Node(parent) = frame {
                parent.children.push(node);
                return;
            }
        }
        self.done = Some(node);
    }

    fn classify(&self, kind: &AstKind<'_>) -> Option<Frame> {
        use NodeKind as K;
        let sp = self.span(kind.span());
        let node = |k: NodeKind, text: Option<&str>| Some(Frame::Node(AstNode::new(k, sp, text)));
        let elide = || Some(Frame::Elided { decl_kind: None });
        match kind {
            AstKind::Program(_) => node(K::Program, None),
            AstKind::Function(f) => match f.r#type {
                FunctionType::FunctionDeclaration => node(K::FunctionDecl, None),
                FunctionType::FunctionExpression => node(K::FunctionExpr, None),
                _ => None,
            },
            AstKind::ArrowFunctionExpression(_) => node(K::ArrowFunction, None),
            AstKind::FormalParameters(_) => node(K::Params, None),
            AstKind::FormalParameter(p) => {
                if p.initializer.is_some() {
                    node(K::Other, Some("FormalParameter"))
                } else {
                    elide()
                }
            }
            AstKind::FunctionBody(_) => node(K::BlockStmt, None),
            AstKind::VariableDeclaration(d) => Some(Frame::Elided {
                decl_kind: Some(match d.kind {
                    VariableDeclarationKind::Var => "var",
                    VariableDeclarationKind::Let => "let",
                    VariableDeclarationKind::Const => "const",
                    _ => "using",
                }),
            }),
            AstKind::VariableDeclarator(_) => node(K::VarDecl, Some(self.enclosing_decl_kind().unwrap_or("var"))),
            AstKind::AssignmentExpression(a) => node(K::AssignExpr, Some(a.operator.as_str())),
            AstKind::CallExpression(_) => node(K::CallExpr, None),
            AstKind::NewExpression(_) => node(K::NewExpr, None),
            AstKind::StaticMemberExpression(_) => node(K::MemberExpr { computed: false }, None),
            AstKind::ComputedMemberExpression(_) => node(K::MemberExpr { computed: true }, None),
            AstKind::IdentifierReference(id) => node(K::Identifier { binding: false }, Some(id.name.as_str())),
            AstKind::IdentifierName(id) => node(K::PropertyName, Some(id.name.as_str())),
            AstKind::BindingIdentifier(id) => node(K::Identifier { binding: true }, Some(id.name.as_str())),
            AstKind::StringLiteral(s) => {
                let value = if s.lone_surrogates {
                    decode_lossy_surrogates(s.value.as_str())
                } else {
                    s.value.as_str().to_string()
                };
                node(K::StringLiteral, Some(&value))
            }
            AstKind::NumericLiteral(n) => node(K::NumberLiteral, Some(&number_to_string(n.value))),
            AstKind::BooleanLiteral(b) => node(K::BooleanLiteral, Some(if b.value { "true" } else { "false" })),
            AstKind::NullLiteral(_) => node(K::NullLiteral, Some("null")),
            AstKind::RegExpLiteral(r) => node(K::RegExpLiteral, r.raw.as_ref().map(|r| r.as_str())),
            AstKind::TemplateLiteral(t) => {
                let cooked = if t.expressions.is_empty() && t.quasis.len() == 1 {
                    t.quasis[0].value.cooked.as_ref().map(|c| c.as_str())
                } else {
                    None
                };
                node(K::TemplateLiteral, cooked)
            }
            AstKind::ObjectExpression(_) => node(K::ObjectLiteral, None),
            AstKind::ArrayExpression(_) => node(K::ArrayLiteral, None),
            AstKind::ObjectProperty(p) => {
                let key = if p.computed { None } else { p.key.static_name() };
                node(K::Property, key.as_deref())
            }
            AstKind::BinaryExpression(b) => node(K::BinaryExpr, Some(b.operator.as_str())),
            AstKind::LogicalExpression(l) => node(K::LogicalExpr, Some(l.operator.as_str())),
            AstKind::ConditionalExpression(_) => node(K::ConditionalExpr, None),
            AstKind::UnaryExpression(u) => node(K::UnaryExpr, Some(u.operator.as_str())),
            AstKind::UpdateExpression(u) => node(K::UpdateExpr, Some(u.operator.as_str())),
            AstKind::SequenceExpression(_) => node(K::SequenceExpr, None),
            AstKind::ThisExpression(_) => node(K::ThisExpr, None),
            AstKind::ReturnStatement(_) => node(K::ReturnStmt, None),
            AstKind::IfStatement(_) => node(K::IfStmt, None),
            AstKind::BlockStatement(_) => node(K::BlockStmt, None),
            AstKind::ForStatement(_) => node(K::LoopStmt, Some("for")),
            AstKind::ForInStatement(_) => node(K::LoopStmt, Some("for-in")),
            AstKind::ForOfStatement(_) => node(K::LoopStmt, Some("for-of")),
            AstKind::WhileStatement(_) => node(K::LoopStmt, Some("while")),
            AstKind::DoWhileStatement(_) => node(K::LoopStmt, Some("do-while")),
            AstKind::ExpressionStatement(_)
            | AstKind::ParenthesizedExpression(_)
            | AstKind::ChainExpression(_) => elide(),
            AstKind::TemplateElement(_)
            | AstKind::Directive(_)
            | AstKind::Hashbang(_)
            | AstKind::EmptyStatement(_)
            | AstKind::Elision(_)
            | AstKind::LabelIdentifier(_) => None,
            other => {
                let name = format!("{:?}", other.ty());
                if name.starts_with("TS") {
                    None
                } else {
                    node(K::Other, Some(&name))
                }
            }
        }
    }
}

impl<'a> Visit<'a> for Converter {
    fn enter_node(&mut self, kind: AstKind<'a>) {
        if self.skip_depth > 0 {
            self.skip_depth += 1;
            return;
        }
        match self.classify(&kind) {
            Some(frame) => self.stack.push(frame),
            None => self.skip_depth = 1,
        }
    }

    fn leave_node(&mut self, kind: AstKind<'a>) {
        if self.skip_depth > 0 {
            self.skip_depth -= 1;
            return;
        }
        let Some(frame) = self.stack.pop() else { return };
        if let Frame::Node(mut node) = frame {
            if let AstKind::ArrowFunctionExpression(arrow) = kind {
                if let ArrowFunctionBody::FunctionBody(_) = arrow.body {
                } else if let Some(expr) = node.children.pop() {
                    // Concise body: model as `{ return expr; }`.
                    let sp = expr.span;
                    let mut ret = AstNode::new(NodeKind::ReturnStmt, sp, None);
                    ret.children.push(expr);
                    let mut block = AstNode::new(NodeKind::BlockStmt, sp, None);
                    block.children.push(ret);
                    node.children.push(block);
                }
            }
            self.attach(node);
        }
    }
}

/// oxc escapes lone surrogates as U+FFFD followed by four hex digits; collapse each to U+FFFD.
fn decode_lossy_surrogates(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        out.push(c);
        if c == '\u{FFFD}' {
            for _ in 0..4 {
                chars.next();
            }
        }
    }
    out
}

/// Callee pattern for [`find_calls`]: `addEventListener` matches a bare call or
/// any member chain ending in `.addEventListener`; `window.addEventListener`
/// requires the trailing chain segments to match.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CalleePattern {
    segments: Vec<String>,
}

impl CalleePattern {
    pub fn new(pattern: &str) -> Self {
        Self { segments: pattern.split('.').map(str::to_string).collect() }
    }

    pub fn matches(&self, callee: &AstNode) -> bool {
        let mut node = callee;
        for (i, seg) in self.segments.iter().enumerate().rev() {
            let last = i == 0;
            match node.kind {
                NodeKind::Identifier { .. } => return last && node.text() == Some(seg.as_str()),
                NodeKind::MemberExpr { .. } => {
                    if node.member_property() != Some(seg.as_str()) {
                        return false;
                    }
                    if last {
                        return true;
                    }
                    match node.child(0) {
                        Some(obj) => node = obj,
                        None => return false,
                    }
                }
                NodeKind::ThisExpr => return last && seg == "this",
                _ => return false,
            }
        }
        false
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ArgPredicate {
    /// String literal (or substitution-free template) equal to the value.
    Equals(String),
    /// Any string literal.
    StringLiteral,
    Any,
}

impl ArgPredicate {
    fn matches(&self, arg: &AstNode) -> bool {
        let literal = matches!(arg.kind, NodeKind::StringLiteral)
            || (arg.kind == NodeKind::TemplateLiteral && arg.text.is_some());
        match self {
            ArgPredicate::Any => true,
            ArgPredicate::StringLiteral => literal,
            ArgPredicate::Equals(v) => literal && arg.text() == Some(v.as_str()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CallQuery {
    pub callee: CalleePattern,
    pub args: Vec<(usize, ArgPredicate)>,
    pub min_args: usize,
}

impl CallQuery {
    pub fn new(callee: &str) -> Self {
        Self { callee: CalleePattern::new(callee), args: Vec::new(), min_args: 0 }
    }

    pub fn arg(mut self, index: usize, pred: ArgPredicate) -> Self {
        self.min_args = self.min_args.max(index + 1);
        self.args.push((index, pred));
        self
    }

    pub fn min_args(mut self, n: usize) -> Self {
        self.min_args = self.min_args.max(n);
        self
    }
}

/// Every `CallExpr` under `ast` whose callee and literal arguments satisfy the query.
pub fn find_calls<'a>(ast: &'a AstNode, query: &CallQuery) -> Vec<&'a AstNode> {
    let mut out = Vec::new();
    ast.walk(&mut |n| {
        if n.kind != NodeKind::CallExpr {
            return;
        }
        let Some(callee) = n.child(0) else { return };
        let args = &n.children[1..];
        if args.len() >= query.min_args
            && query.callee.matches(callee)
            && query.args.iter().all(|(i, p)| args.get(*i).is_some_and(|a| p.matches(a)))
        {
            out.push(n);
        }
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(src: &str) -> Result<AstNode, ParseDiagnostic> {
        let lines = LineIndex::new(src);
        parse_script(ScriptSource {
            file: FileId(0),
            path: "t.js",
            host: src,
            lines: &lines,
            range: Span::new(0, src.len() as u32),
        })
        .map(|p| p.root)
    }

    fn kinds(n: &AstNode) -> String {
        let name = format!("{:?}", n.kind);
        let name = name.split(' ').next().unwrap().to_string();
        if n.children.is_empty() {
            name
        } else {
            let inner: Vec<_> = n.children.iter().map(kinds).collect();
            format!("{name}[{}]", inner.join(", "))
        }
    }

    #[test]
    fn var_declaration_shape() {
        let ast = parse("var a = 1;").unwrap();
        assert_eq!(kinds(&ast), "Program[VarDecl[Identifier, NumberLiteral]]");
        let decl = &ast.children[0];
        assert_eq!(decl.text(), Some("var"));
        assert_eq!(decl.children[0].text(), Some("a"));
        assert_eq!(decl.children[1].number(), Some(1.0));
    }

    #[test]
    fn hex_escapes_are_decoded() {
        let ast = parse(r#"var p = "\x69\x6e\x6e\x65\x72\x48\x54\x4d\x4c";"#).unwrap();
        let lit = &ast.children[0].children[1];
        assert_eq!(lit.kind, NodeKind::StringLiteral);
        assert_eq!(lit.text(), Some("innerHTML"));
    }

    #[test]
    fn syntax_error_reports_line() {
        let err = parse("var = ;").unwrap_err();
        assert_eq!(err.span.start_line, 1);
        let err = parse("ok();\n\nvar = ;").unwrap_err();
        assert_eq!(err.span.start_line, 3);
    }

    #[test]
    fn concise_arrow_body_becomes_return() {
        let ast = parse("var f = x => x + 1;").unwrap();
        let arrow = &ast.children[0].children[1];
        let (_, params, body) = arrow.function_parts().unwrap();
        assert_eq!(params.children.len(), 1);
        assert_eq!(body.children[0].kind, NodeKind::ReturnStmt);
    }

    #[test]
    fn template_without_substitutions_is_constant() {
        let ast = parse("a = `x${b}`; c = `plain`;").unwrap();
        assert_eq!(ast.children[0].children[1].text(), None);
        assert_eq!(ast.children[1].children[1].text(), Some("plain"));
    }

    #[test]
    fn find_message_listener() {
        let src = "window.addEventListener('message', function(evt) {\n  authWindow.close();\n});";
        let ast = parse(src).unwrap();
        let q = CallQuery::new("addEventListener").arg(0, ArgPredicate::Equals("message".into()));
        assert_eq!(find_calls(&ast, &q).len(), 1);
        let ast = parse("addEventListener('click', f);").unwrap();
        assert!(find_calls(&ast, &q).is_empty());
    }

    #[test]
    fn find_open_with_two_args() {
        let ast = parse("xhr.open(\"GET\", u); open(1);").unwrap();
        let q = CallQuery::new("open").min_args(2);
        let hits = find_calls(&ast, &q);
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].children.len(), 3);
    }

    #[test]
    fn chained_callee_pattern() {
        let ast = parse("window.addEventListener('message', h); self.addEventListener('message', h);").unwrap();
        let q = CallQuery::new("window.addEventListener");
        assert_eq!(find_calls(&ast, &q).len(), 1);
    }

    #[test]
    fn module_syntax_falls_back() {
        assert!(parse("import x from './x.js'; x();").is_ok());
    }
}
