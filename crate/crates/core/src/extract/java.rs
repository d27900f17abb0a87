//! Java front-end: tree-sitter syntax tree to [`MethodUsageModel`]s.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet, HashMap};

use tree_sitter::{Node, Parser, Tree};

use super::{ExtractError, ExtractWarning};
use crate::model::{MethodSignature, MethodUsageModel, SourceLocation, TrackedObject, UsageEvent};

const METHOD_KINDS: &[&str] = &["method_declaration", "constructor_declaration"];
const TYPE_DECL_KINDS: &[&str] = &[
    "class_declaration",
    "interface_declaration",
    "enum_declaration",
    "record_declaration",
];

thread_local! {
    static PARSER: RefCell<Option<Parser>> = const { RefCell::new(None) };
}

fn parse_tree(source: &str) -> Result<Tree, ExtractError> {
    PARSER.with(|cell| {
        let mut slot = cell.borrow_mut();
        if slot.is_none() {
            let mut p = Parser::new();
            p.set_language(&tree_sitter_java::LANGUAGE.into())
                .map_err(|e| ExtractError::ParserSetup(e.to_string()))?;
            *slot = Some(p);
        }
        slot.as_mut()
            .and_then(|p| p.parse(source, None))
            .ok_or_else(|| ExtractError::ParserSetup("parser returned no tree".into()))
    })
}

/// Result of extracting one compilation unit.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedFile {
    pub models: Vec<MethodUsageModel>,
    pub warnings: Vec<ExtractWarning>,
    /// Declared type name to its direct supertypes.
    pub supertypes: BTreeMap<String, BTreeSet<String>>,
}

/// Extracts one model per method or constructor body in `source`.
///
/// Syntax errors outside method bodies fail the whole file; a method whose
/// body contains errors is skipped with a warning.
pub fn parse_method_models(
    source: &str,
    file_path: &str,
    project_id: &str,
    version_id: &str,
) -> Result<ParsedFile, ExtractError> {
    let file_path = crate::model::normalize_path(file_path)?;
    let tree = parse_tree(source)?;
    let root = tree.root_node();
    let src = source.as_bytes();

    let mut broken_methods = BTreeSet::new();
    if root.has_error() {
        let mut errors = Vec::new();
        collect_errors(root, &mut errors);
        for err in errors {
            match enclosing_method_body(err) {
                Some(m) => {
                    broken_methods.insert(m.id());
                }
                None => {
                    let pos = err.start_position();
                    return Err(ExtractError::Parse {
                        file: file_path,
                        line: pos.row + 1,
                        column: pos.column + 1,
                    });
                }
            }
        }
    }

    let mut out = ParsedFile::default();
    let mut methods = Vec::new();
    collect_kinds(root, METHOD_KINDS, &mut methods);
    collect_supertypes(root, src, &mut out.supertypes);

    for method in methods {
        let name = method_name(method, src);
        let line = method.start_position().row as u32 + 1;
        if broken_methods.contains(&method.id()) {
            out.warnings.push(ExtractWarning {
                file: file_path.clone(),
                line: Some(line),
                message: format!("skipped method `{name}`: syntax error in body"),
            });
            continue;
        }
        let Some(body) = method.child_by_field_name("body") else {
            continue;
        };
        let location = SourceLocation::new(project_id, version_id, &file_path, name, Some(line))?;
        let class = enclosing_class(method, src);
        let mut ex = MethodExtractor::new(src, class, location);
        ex.declare_scope(method);
        ex.stmt(body);
        let model = ex.finish();
        debug_assert!(model.validate().is_ok(), "{:?}", model.validate());
        out.models.push(model);
    }
    Ok(out)
}

fn collect_errors<'t>(node: Node<'t>, out: &mut Vec<Node<'t>>) {
    if node.is_error() || node.is_missing() {
        out.push(node);
        return;
    }
    if !node.has_error() {
        return;
    }
    for child in children(node) {
        collect_errors(child, out);
    }
}

fn enclosing_method_body(node: Node<'_>) -> Option<Node<'_>> {
    let mut cur = node;
    while let Some(parent) = cur.parent() {
        if METHOD_KINDS.contains(&parent.kind()) {
            let body = parent.child_by_field_name("body")?;
            return (body.id() == cur.id()).then_some(parent);
        }
        cur = parent;
    }
    None
}

fn children(node: Node<'_>) -> Vec<Node<'_>> {
    let mut cursor = node.walk();
    node.children(&mut cursor).collect()
}

fn named_children(node: Node<'_>) -> Vec<Node<'_>> {
    let mut cursor = node.walk();
    node.named_children(&mut cursor).collect()
}

fn collect_kinds<'t>(node: Node<'t>, kinds: &[&str], out: &mut Vec<Node<'t>>) {
    if kinds.contains(&node.kind()) {
        out.push(node);
    }
    for child in named_children(node) {
        collect_kinds(child, kinds, out);
    }
}

fn text<'s>(node: Node<'_>, src: &'s [u8]) -> &'s str {
    node.utf8_text(src).unwrap_or("")
}

fn method_name(method: Node<'_>, src: &[u8]) -> String {
    if method.kind() == "constructor_declaration" {
        return "<init>".to_owned();
    }
    method
        .child_by_field_name("name")
        .map(|n| text(n, src).to_owned())
        .unwrap_or_else(|| "<unknown>".to_owned())
}

/// Base type name without type arguments; `None` for `var`.
fn type_name(node: Node<'_>, src: &[u8]) -> Option<String> {
    let raw = match node.kind() {
        "generic_type" => named_children(node)
            .into_iter()
            .find(|c| c.kind() != "type_arguments")
            .map(|c| text(c, src).to_owned())?,
        "array_type" => {
            let elem = node.child_by_field_name("element").and_then(|e| type_name(e, src))?;
            let dims = node.child_by_field_name("dimensions").map(|d| text(d, src)).unwrap_or("[]");
            format!("{elem}{}", dims.split_whitespace().collect::<String>())
        }
        _ => text(node, src).split_whitespace().collect(),
    };
    (raw != "var" && !raw.is_empty()).then_some(raw)
}

fn enclosing_class<'t>(node: Node<'t>, src: &[u8]) -> Option<(String, Node<'t>)> {
    let mut cur = node.parent();
    while let Some(n) = cur {
        if TYPE_DECL_KINDS.contains(&n.kind()) {
            let name = n.child_by_field_name("name").map(|x| text(x, src).to_owned())?;
            return Some((name, n.child_by_field_name("body")?));
        }
        if n.kind() == "object_creation_expression" {
            if let Some(body) = named_children(n).into_iter().find(|c| c.kind() == "class_body") {
                let ty = n.child_by_field_name("type").and_then(|t| type_name(t, src))?;
                return Some((ty, body));
            }
        }
        cur = n.parent();
    }
    None
}

fn collect_supertypes(root: Node<'_>, src: &[u8], out: &mut BTreeMap<String, BTreeSet<String>>) {
    let mut decls = Vec::new();
    collect_kinds(root, TYPE_DECL_KINDS, &mut decls);
    for decl in decls {
        let Some(name) = decl.child_by_field_name("name") else {
            continue;
        };
        let mut supers = BTreeSet::new();
        for child in named_children(decl) {
            if matches!(child.kind(), "superclass" | "super_interfaces" | "extends_interfaces") {
                let mut types = Vec::new();
                collect_kinds(
                    child,
                    &["type_identifier", "scoped_type_identifier", "generic_type"],
                    &mut types,
                );
                for t in types {
                    // Nested identifiers of a generic are visited too; keep outermost only.
                    if t.parent().is_some_and(|p| p.kind() == "generic_type" || p.kind() == "scoped_type_identifier") {
                        continue;
                    }
                    if let Some(n) = type_name(t, src) {
                        supers.insert(n);
                    }
                }
            }
        }
        out.entry(text(name, src).to_owned()).or_default().extend(supers);
    }
}

/// What an expression evaluates to, as far as object tracking goes.
enum Value {
    Object(String),
    /// Result of a call or creation; materialized as a fresh object on demand.
    Fresh(Option<String>),
    Nothing,
}

struct TryFrame {
    body: Vec<usize>,
    handlers: Vec<usize>,
}

struct MethodExtractor<'s> {
    src: &'s [u8],
    class_name: Option<String>,
    location: SourceLocation,
    /// Declared variables in declaration order with their static types.
    declared: Vec<(String, Option<String>)>,
    decl_index: HashMap<String, usize>,
    parent: Vec<usize>,
    objects: Vec<TrackedObject>,
    object_index: HashMap<String, usize>,
    events: Vec<UsageEvent>,
    fresh: usize,
    in_condition: usize,
    successors: BTreeSet<(usize, usize)>,
}

impl<'s> MethodExtractor<'s> {
    fn new(src: &'s [u8], class: Option<(String, Node<'_>)>, location: SourceLocation) -> Self {
        let mut ex = Self {
            src,
            class_name: class.as_ref().map(|c| c.0.clone()),
            location,
            declared: Vec::new(),
            decl_index: HashMap::new(),
            parent: Vec::new(),
            objects: Vec::new(),
            object_index: HashMap::new(),
            events: Vec::new(),
            fresh: 0,
            in_condition: 0,
            successors: BTreeSet::new(),
        };
        if let Some((_, body)) = class {
            for member in named_children(body) {
                if member.kind() == "field_declaration" {
                    ex.declare_declarators(member);
                }
            }
        }
        ex
    }

    fn text(&self, node: Node<'_>) -> &'s str {
        text(node, self.src)
    }

    fn declare(&mut self, name: &str, ty: Option<String>) {
        if let Some(&i) = self.decl_index.get(name) {
            if self.declared[i].1.is_none() {
                self.declared[i].1 = ty;
            }
            return;
        }
        self.decl_index.insert(name.to_owned(), self.declared.len());
        self.parent.push(self.declared.len());
        self.declared.push((name.to_owned(), ty));
    }

    fn declare_declarators(&mut self, decl: Node<'_>) {
        let ty = decl.child_by_field_name("type").and_then(|t| type_name(t, self.src));
        let mut cursor = decl.walk();
        let declarators: Vec<_> = decl.children_by_field_name("declarator", &mut cursor).collect();
        for d in declarators {
            if let Some(name) = d.child_by_field_name("name") {
                let inferred = ty.clone().or_else(|| self.creation_type(d.child_by_field_name("value")));
                self.declare(self.text(name), inferred);
            }
        }
    }

    fn creation_type(&self, value: Option<Node<'_>>) -> Option<String> {
        let v = value?;
        (v.kind() == "object_creation_expression")
            .then(|| v.child_by_field_name("type").and_then(|t| type_name(t, self.src)))
            .flatten()
    }

    fn find(&mut self, i: usize) -> usize {
        let mut r = i;
        while self.parent[r] != r {
            r = self.parent[r];
        }
        let mut c = i;
        while self.parent[c] != r {
            let next = self.parent[c];
            self.parent[c] = r;
            c = next;
        }
        r
    }

    fn union(&mut self, a: &str, b: &str) {
        let (Some(&ia), Some(&ib)) = (self.decl_index.get(a), self.decl_index.get(b)) else {
            return;
        };
        let (ra, rb) = (self.find(ia), self.find(ib));
        // The earlier declaration is the canonical name.
        let (keep, drop) = if ra <= rb { (ra, rb) } else { (rb, ra) };
        self.parent[drop] = keep;
    }

    /// Declarations and copy assignments in the method, excluding nested
    /// class bodies and lambdas.
    fn declare_scope(&mut self, method: Node<'_>) {
        let mut copies = Vec::new();
        self.scan_scope(method, &mut copies);
        for (a, b) in copies {
            self.union(&a, &b);
        }
    }

    fn copy_source(&self, node: Node<'_>) -> Option<String> {
        match node.kind() {
            "identifier" => Some(self.text(node).to_owned()),
            "field_access" => {
                let obj = node.child_by_field_name("object")?;
                (obj.kind() == "this")
                    .then(|| node.child_by_field_name("field").map(|f| self.text(f).to_owned()))
                    .flatten()
            }
            "parenthesized_expression" | "cast_expression" => {
                let inner = node.child_by_field_name("value").or_else(|| named_children(node).pop())?;
                self.copy_source(inner)
            }
            _ => None,
        }
    }

    fn scan_scope(&mut self, node: Node<'_>, copies: &mut Vec<(String, String)>) {
        match node.kind() {
            "class_body" | "lambda_expression" | "local_class_declaration" | "class_declaration" => return,
            "formal_parameter" | "spread_parameter" | "catch_formal_parameter" | "resource" => {
                let ty = node
                    .child_by_field_name("type")
                    .or_else(|| named_children(node).into_iter().find(|c| c.kind() == "catch_type"))
                    .and_then(|t| type_name(t, self.src));
                let name = node.child_by_field_name("name").or_else(|| {
                    named_children(node)
                        .into_iter()
                        .find(|c| c.kind() == "variable_declarator")
                        .and_then(|d| d.child_by_field_name("name"))
                });
                if let Some(name) = name {
                    let ty = ty.or_else(|| self.creation_type(node.child_by_field_name("value")));
                    self.declare(self.text(name), ty);
                    if let Some(src) = node.child_by_field_name("value").and_then(|v| self.copy_source(v)) {
                        copies.push((self.text(name).to_owned(), src));
                    }
                }
            }
            "local_variable_declaration" => {
                self.declare_declarators(node);
                let mut cursor = node.walk();
                let declarators: Vec<_> = node.children_by_field_name("declarator", &mut cursor).collect();
                for d in declarators {
                    if let (Some(name), Some(src)) = (
                        d.child_by_field_name("name"),
                        d.child_by_field_name("value").and_then(|v| self.copy_source(v)),
                    ) {
                        copies.push((self.text(name).to_owned(), src));
                    }
                }
            }
            "enhanced_for_statement" => {
                if let Some(name) = node.child_by_field_name("name") {
                    let ty = node.child_by_field_name("type").and_then(|t| type_name(t, self.src));
                    self.declare(self.text(name), ty);
                }
            }
            "assignment_expression" => {
                let op = node.child_by_field_name("operator").map(|o| self.text(o));
                if op == Some("=") {
                    if let (Some(l), Some(r)) = (
                        node.child_by_field_name("left").and_then(|l| self.copy_source(l)),
                        node.child_by_field_name("right").and_then(|r| self.copy_source(r)),
                    ) {
                        copies.push((l, r));
                    }
                }
            }
            _ => {}
        }
        for child in named_children(node) {
            self.scan_scope(child, copies);
        }
    }

    fn object(&mut self, name: &str, ty: Option<String>) -> String {
        if !self.object_index.contains_key(name) {
            self.object_index.insert(name.to_owned(), self.objects.len());
            self.objects.push(TrackedObject {
                name: name.to_owned(),
                static_type: ty,
            });
        }
        name.to_owned()
    }

    fn fresh_object(&mut self, ty: Option<String>) -> String {
        self.fresh += 1;
        let name = format!("${}", self.fresh);
        self.object(&name, ty)
    }

    fn variable(&mut self, name: &str) -> String {
        match self.decl_index.get(name).copied() {
            Some(i) => {
                let root = self.find(i);
                let canonical = self.declared[root].0.clone();
                let mut ty = self.declared[root].1.clone();
                if ty.is_none() {
                    for j in 0..self.declared.len() {
                        if self.find(j) == root && self.declared[j].1.is_some() {
                            ty = self.declared[j].1.clone();
                            break;
                        }
                    }
                }
                self.object(&canonical, ty)
            }
            None if name.starts_with(|c: char| c.is_ascii_uppercase()) => {
                self.object(name, Some(name.to_owned()))
            }
            None => self.object(name, None),
        }
    }

    fn materialize(&mut self, v: Value) -> Option<String> {
        match v {
            Value::Object(o) => Some(o),
            Value::Fresh(ty) => Some(self.fresh_object(ty)),
            Value::Nothing => None,
        }
    }

    fn emit(&mut self, ev: UsageEvent) -> usize {
        self.events.push(ev);
        self.events.len() - 1
    }

    fn args(&mut self, node: Node<'_>) {
        if let Some(args) = node.child_by_field_name("arguments") {
            for a in named_children(args) {
                self.expr(a);
            }
        }
    }

    fn expr(&mut self, node: Node<'_>) -> Value {
        match node.kind() {
            "identifier" => Value::Object(self.variable(self.text(node))),
            "this" => Value::Object(self.object("this", self.class_name.clone())),
            "super" => Value::Object(self.object("super", None)),
            "string_literal" | "text_block" => Value::Fresh(Some("String".to_owned())),
            "null_literal" | "true" | "false" | "decimal_integer_literal" | "hex_integer_literal"
            | "octal_integer_literal" | "binary_integer_literal" | "decimal_floating_point_literal"
            | "hex_floating_point_literal" | "character_literal" | "class_literal" => Value::Nothing,
            "lambda_expression" | "method_reference" | "class_body" => Value::Nothing,
            "parenthesized_expression" => match named_children(node).into_iter().next() {
                Some(inner) => self.expr(inner),
                None => Value::Nothing,
            },
            "cast_expression" => match node.child_by_field_name("value") {
                Some(v) => self.expr(v),
                None => Value::Nothing,
            },
            "field_access" => {
                let obj = node.child_by_field_name("object");
                let field = node.child_by_field_name("field").map(|f| self.text(f));
                match (obj, field) {
                    (Some(o), Some(f)) if o.kind() == "this" => Value::Object(self.variable(f)),
                    _ => {
                        if let Some(o) = obj {
                            if o.kind() != "identifier" && o.kind() != "field_access" {
                                self.expr(o);
                            }
                        }
                        let name: String = self.text(node).split_whitespace().collect();
                        Value::Object(self.object(&name, None))
                    }
                }
            }
            "method_invocation" => self.invocation(node),
            "object_creation_expression" => {
                self.args(node);
                Value::Fresh(node.child_by_field_name("type").and_then(|t| type_name(t, self.src)))
            }
            "ternary_expression" => {
                if let Some(c) = node.child_by_field_name("condition") {
                    self.condition(c);
                }
                self.emit(UsageEvent::BranchEnter);
                if let Some(c) = node.child_by_field_name("consequence") {
                    self.expr(c);
                }
                self.emit(UsageEvent::BranchElse);
                if let Some(a) = node.child_by_field_name("alternative") {
                    self.expr(a);
                }
                self.emit(UsageEvent::BranchExit);
                Value::Nothing
            }
            "binary_expression" if self.in_condition > 0 => {
                self.null_comparison(node);
                Value::Nothing
            }
            "assignment_expression" => {
                if let Some(r) = node.child_by_field_name("right") {
                    self.expr(r);
                }
                if let Some(l) = node.child_by_field_name("left") {
                    if l.kind() != "identifier" && l.kind() != "field_access" {
                        self.expr(l);
                    }
                }
                Value::Nothing
            }
            "switch_expression" => {
                self.switch(node);
                Value::Nothing
            }
            _ => {
                for child in named_children(node) {
                    self.expr(child);
                }
                Value::Nothing
            }
        }
    }

    fn invocation(&mut self, node: Node<'_>) -> Value {
        let receiver = match node.child_by_field_name("object") {
            Some(o) => {
                let v = self.expr(o);
                self.materialize(v).unwrap_or_else(|| self.fresh_object(None))
            }
            None => self.object("this", self.class_name.clone()),
        };
        self.args(node);
        let name = node.child_by_field_name("name").map(|n| self.text(n)).unwrap_or("");
        let arity = node
            .child_by_field_name("arguments")
            .map(|a| named_children(a).len() as u32)
            .unwrap_or(0);
        let ty = self.objects[self.object_index[&receiver]].static_type.clone();
        let Ok(method) = MethodSignature::new(ty.as_deref(), name, arity) else {
            return Value::Nothing;
        };
        self.emit(UsageEvent::Call {
            object: receiver.clone(),
            method: method.clone(),
        });
        if self.in_condition > 0 {
            self.emit(UsageEvent::ValueCheck {
                object: receiver,
                method,
            });
        }
        Value::Fresh(None)
    }

    fn null_comparison(&mut self, node: Node<'_>) {
        let op = node.child_by_field_name("operator").map(|o| self.text(o));
        let (Some(l), Some(r)) = (node.child_by_field_name("left"), node.child_by_field_name("right")) else {
            return;
        };
        if matches!(op, Some("==" | "!=")) && (l.kind() == "null_literal" || r.kind() == "null_literal") {
            let other = if l.kind() == "null_literal" { r } else { l };
            // The call itself is recorded, but its value check is the null check.
            self.in_condition -= 1;
            let v = self.expr(other);
            self.in_condition += 1;
            if let Some(obj) = self.materialize(v) {
                self.emit(UsageEvent::NullCheck { object: obj });
            }
            return;
        }
        self.expr(l);
        self.expr(r);
    }

    fn condition(&mut self, node: Node<'_>) {
        self.in_condition += 1;
        self.expr(node);
        self.in_condition -= 1;
    }

    fn block_of(&mut self, node: Option<Node<'_>>) {
        if let Some(n) = node {
            self.stmt(n);
        }
    }

    fn stmt(&mut self, node: Node<'_>) {
        match node.kind() {
            "block" | "constructor_body" | "switch_block_statement_group" => {
                for child in named_children(node) {
                    if child.kind() != "switch_label" {
                        self.stmt(child);
                    }
                }
            }
            "local_variable_declaration" => {
                let mut cursor = node.walk();
                let declarators: Vec<_> = node.children_by_field_name("declarator", &mut cursor).collect();
                for d in declarators {
                    if let Some(v) = d.child_by_field_name("value") {
                        self.expr(v);
                    }
                }
            }
            "if_statement" => {
                if let Some(c) = node.child_by_field_name("condition") {
                    self.condition(c);
                }
                self.emit(UsageEvent::BranchEnter);
                self.block_of(node.child_by_field_name("consequence"));
                if let Some(alt) = node.child_by_field_name("alternative") {
                    self.emit(UsageEvent::BranchElse);
                    self.stmt(alt);
                }
                self.emit(UsageEvent::BranchExit);
            }
            "while_statement" => {
                self.emit(UsageEvent::LoopEnter);
                if let Some(c) = node.child_by_field_name("condition") {
                    self.condition(c);
                }
                self.emit(UsageEvent::LoopBody);
                self.block_of(node.child_by_field_name("body"));
                self.emit(UsageEvent::LoopExit);
            }
            "for_statement" => {
                let mut cursor = node.walk();
                let inits: Vec<_> = node.children_by_field_name("init", &mut cursor).collect();
                for i in inits {
                    self.stmt(i);
                }
                self.emit(UsageEvent::LoopEnter);
                if let Some(c) = node.child_by_field_name("condition") {
                    self.condition(c);
                }
                self.emit(UsageEvent::LoopBody);
                self.block_of(node.child_by_field_name("body"));
                let mut cursor = node.walk();
                let updates: Vec<_> = node.children_by_field_name("update", &mut cursor).collect();
                for u in updates {
                    self.expr(u);
                }
                self.emit(UsageEvent::LoopExit);
            }
            "enhanced_for_statement" => {
                if let Some(v) = node.child_by_field_name("value") {
                    self.expr(v);
                }
                self.emit(UsageEvent::LoopEnter);
                self.emit(UsageEvent::LoopBody);
                self.block_of(node.child_by_field_name("body"));
                self.emit(UsageEvent::LoopExit);
            }
            "do_statement" => {
                // Body and condition form the header, so the body runs on every path.
                self.emit(UsageEvent::LoopEnter);
                self.block_of(node.child_by_field_name("body"));
                if let Some(c) = node.child_by_field_name("condition") {
                    self.condition(c);
                }
                self.emit(UsageEvent::LoopBody);
                self.emit(UsageEvent::LoopExit);
            }
            "try_statement" | "try_with_resources_statement" => self.try_stmt(node),
            "switch_expression" | "switch_statement" => self.switch(node),
            "synchronized_statement" => {
                for child in named_children(node) {
                    if child.kind() == "block" {
                        self.stmt(child);
                    } else {
                        self.expr(child);
                    }
                }
            }
            "labeled_statement" => {
                for child in named_children(node) {
                    if child.kind() != "identifier" {
                        self.stmt(child);
                    }
                }
            }
            "explicit_constructor_invocation" => self.args(node),
            "local_class_declaration" | "class_declaration" | "interface_declaration"
            | "enum_declaration" | "record_declaration" | "break_statement" | "continue_statement"
            | "line_comment" | "block_comment" | ";" => {}
            "expression_statement" | "return_statement" | "throw_statement" | "yield_statement"
            | "assert_statement" => {
                for child in named_children(node) {
                    self.expr(child);
                }
            }
            _ => {
                self.expr(node);
            }
        }
    }

    fn switch(&mut self, node: Node<'_>) {
        if let Some(c) = node.child_by_field_name("condition") {
            self.expr(c);
        }
        let Some(body) = node.child_by_field_name("body") else {
            return;
        };
        self.emit(UsageEvent::BranchEnter);
        let mut has_default = false;
        let mut first = true;
        for arm in named_children(body) {
            if !matches!(arm.kind(), "switch_block_statement_group" | "switch_rule") {
                continue;
            }
            if !first {
                self.emit(UsageEvent::BranchElse);
            }
            first = false;
            for child in named_children(arm) {
                if child.kind() == "switch_label" {
                    has_default |= self.text(child).trim_start().starts_with("default");
                } else {
                    self.stmt(child);
                }
            }
        }
        if !has_default {
            self.emit(UsageEvent::BranchElse);
        }
        self.emit(UsageEvent::BranchExit);
    }

    fn calls_between(&self, from: usize, to: usize) -> Vec<usize> {
        (from..to)
            .filter(|&i| matches!(self.events[i], UsageEvent::Call { .. }))
            .collect()
    }

    fn try_stmt(&mut self, node: Node<'_>) {
        self.emit(UsageEvent::TryEnter);
        let body_start = self.events.len();
        if let Some(res) = node.child_by_field_name("resources") {
            for r in named_children(res) {
                match r.child_by_field_name("value") {
                    Some(v) => {
                        self.expr(v);
                    }
                    None => {
                        self.expr(r);
                    }
                }
            }
        }
        self.block_of(node.child_by_field_name("body"));
        let mut frame = TryFrame {
            body: self.calls_between(body_start, self.events.len()),
            handlers: Vec::new(),
        };
        for child in named_children(node) {
            match child.kind() {
                "catch_clause" => {
                    let ty = named_children(child)
                        .into_iter()
                        .find(|c| c.kind() == "catch_formal_parameter")
                        .and_then(|p| named_children(p).into_iter().find(|c| c.kind() == "catch_type"))
                        .map(|t| self.text(t).split_whitespace().collect::<Vec<_>>().join(" "))
                        .unwrap_or_default();
                    self.emit(UsageEvent::CatchEnter { exception_type: ty });
                    let start = self.events.len();
                    self.block_of(child.child_by_field_name("body"));
                    frame.handlers.push(start);
                    let handler_calls = self.calls_between(start, self.events.len());
                    frame.body.iter().for_each(|&b| {
                        handler_calls.iter().for_each(|&h| {
                            self.successors.insert((b, h));
                        })
                    });
                }
                "finally_clause" => {
                    self.emit(UsageEvent::FinallyEnter);
                    let start = self.events.len();
                    for b in named_children(child) {
                        self.stmt(b);
                    }
                    let fin = self.calls_between(start, self.events.len());
                    let mut sources = frame.body.clone();
                    for &h in &frame.handlers {
                        sources.extend(self.calls_between(h, start));
                    }
                    for &s in &sources {
                        for &f in &fin {
                            self.successors.insert((s, f));
                        }
                    }
                }
                _ => {}
            }
        }
        self.emit(UsageEvent::TryExit);
    }

    fn finish(self) -> MethodUsageModel {
        MethodUsageModel {
            location: self.location,
            objects: self.objects,
            events: self.events,
            exceptional_successors: self.successors,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn models(body: &str) -> Vec<MethodUsageModel> {
        let src = format!("class A {{ void m(java.util.Iterator<String> it, java.io.Writer w) {{ {body} }} }}");
        parse_method_models(&src, "A.java", "p", "v").unwrap().models
    }

    fn calls(m: &MethodUsageModel) -> Vec<String> {
        m.calls().map(|(_, o, s)| format!("{o}.{}", s.name)).collect()
    }

    #[test]
    fn straight_line_iterator() {
        let ms = models("it.hasNext(); it.next();");
        assert_eq!(ms.len(), 1);
        let m = &ms[0];
        assert_eq!(m.objects.len(), 1);
        assert_eq!(m.objects[0].static_type.as_deref(), Some("java.util.Iterator"));
        assert_eq!(
            m.events,
            vec![
                UsageEvent::Call {
                    object: "it".into(),
                    method: MethodSignature::of(Some("java.util.Iterator"), "hasNext", 0)
                },
                UsageEvent::Call {
                    object: "it".into(),
                    method: MethodSignature::of(Some("java.util.Iterator"), "next", 0)
                },
            ]
        );
    }

    #[test]
    fn empty_body_gives_empty_events() {
        let ms = models("int x = 1;");
        assert!(ms[0].events.is_empty());
    }

    #[test]
    fn try_finally_records_exceptional_order() {
        let ms = models("try { w.write(\"x\"); } finally { w.close(); }");
        let m = &ms[0];
        assert_eq!(m.exceptional_successors, BTreeSet::from([(1, 3)]));
        assert!(matches!(m.events[0], UsageEvent::TryEnter));
        assert!(matches!(m.events[2], UsageEvent::FinallyEnter));
    }

    #[test]
    fn chained_receiver_is_fresh_and_untyped() {
        let ms = models("it.next().toString();");
        let m = &ms[0];
        assert_eq!(calls(m), vec!["it.next", "$1.toString"]);
        assert_eq!(m.object("$1").unwrap().static_type, None);
    }

    #[test]
    fn null_comparison_becomes_null_check() {
        let ms = models("Object o = it.next(); if (o != null) { o.hashCode(); }");
        let m = &ms[0];
        assert!(m.events.contains(&UsageEvent::NullCheck { object: "o".into() }));
    }

    #[test]
    fn copies_alias_to_first_declaration() {
        let ms = models("java.util.Iterator<String> j = it; j.next();");
        assert_eq!(calls(&ms[0]), vec!["it.next"]);
    }

    #[test]
    fn while_condition_is_loop_header() {
        let ms = models("while (it.hasNext()) { it.next(); }");
        let ev = &ms[0].events;
        assert!(matches!(ev[0], UsageEvent::LoopEnter));
        assert!(matches!(ev[1], UsageEvent::Call { .. }));
        assert!(matches!(ev[2], UsageEvent::ValueCheck { .. }));
        assert!(matches!(ev[3], UsageEvent::LoopBody));
        assert!(ms[0].validate().is_ok());
    }

    #[test]
    fn lambdas_and_constructors_add_no_calls() {
        let ms = models("Runnable r = () -> it.next(); Object o = new Object(); java.util.function.Function<Object,String> f = Object::toString;");
        assert!(ms[0].calls().next().is_none());
    }

    #[test]
    fn anonymous_class_methods_are_separate_models() {
        let src = "class A { void m() { Runnable r = new Runnable() { public void run() { go(); } }; r.run(); } }";
        let ms = parse_method_models(src, "A.java", "p", "v").unwrap().models;
        assert_eq!(ms.len(), 2);
        assert_eq!(ms[0].location.method_name, "m");
        assert_eq!(ms[1].location.method_name, "run");
        assert_eq!(ms[1].object("this").unwrap().static_type.as_deref(), Some("Runnable"));
    }

    #[test]
    fn fields_are_objects_and_this_access_resolves() {
        let src = "class A { java.util.List<String> items; void m() { this.items.clear(); items.size(); } }";
        let ms = parse_method_models(src, "A.java", "p", "v").unwrap().models;
        assert_eq!(calls(&ms[0]), vec!["items.clear", "items.size"]);
        assert_eq!(ms[0].objects.len(), 1);
    }

    #[test]
    fn syntax_error_outside_method_fails_file() {
        let err = parse_method_models("class A { int = ; }", "x/A.java", "p", "v").unwrap_err();
        match err {
            ExtractError::Parse { file, line, .. } => {
                assert_eq!(file, "x/A.java");
                assert_eq!(line, 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn broken_method_is_skipped_with_warning() {
        let src = "class A {\n void ok() { a.b(); }\n void bad() { a.b( ; }\n}";
        let parsed = parse_method_models(src, "A.java", "p", "v").unwrap();
        assert_eq!(parsed.models.len(), 1);
        assert_eq!(parsed.warnings.len(), 1);
        assert!(parsed.warnings[0].message.contains("bad"));
    }

    #[test]
    fn supertypes_are_collected() {
        let src = "class A extends java.io.Reader implements Comparable<A>, Runnable {}";
        let parsed = parse_method_models(src, "A.java", "p", "v").unwrap();
        let s = &parsed.supertypes["A"];
        assert!(s.contains("java.io.Reader"));
        assert!(s.contains("Comparable"));
        assert!(s.contains("Runnable"));
    }
}
