//! CEIR, the minimal typed three-address representation all analyses run on.
//!
//! A program is a JSON document (one file per app): classes hold methods,
//! methods hold an ordered statement list. Control flow is statement order
//! plus forward/backward `branch` statements with opaque conditions. Library
//! methods appear in the `externals` list and have no bodies; calls to them
//! are treated atomically by the dataflow rules. The full schema and its
//! validation rules are described in `docs/ceir.md`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, SchemaViolation};

pub const CEIR_VERSION: u32 = 1;

/// A literal constant. Byte/char-array contents are written as strings.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Literal {
    Bool(bool),
    Int(i64),
    Str(String),
}

impl std::fmt::Display for Literal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Literal::Bool(b) => write!(f, "{b}"),
            Literal::Int(i) => write!(f, "{i}"),
            Literal::Str(s) => write!(f, "{s:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum StatementKind {
    /// `dst = literal` with a declared semantic type.
    Const {
        dst: String,
        value: Literal,
        #[serde(rename = "type")]
        ty: String,
    },
    /// `dst = src` local-to-local copy.
    Assign { dst: String, src: String },
    /// Call of `callee`; `receiver` is only valid for external callees
    /// (program-defined methods are static).
    Call {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dst: Option<String>,
        callee: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        receiver: Option<String>,
        #[serde(default)]
        args: Vec<String>,
    },
    /// `dst = class.field`
    FieldLoad {
        dst: String,
        class: String,
        field: String,
    },
    /// `class.field = value`
    FieldStore {
        class: String,
        field: String,
        value: String,
    },
    /// Conditional jump to the statement with id `target`; the condition is
    /// opaque and both outcomes are assumed feasible.
    Branch { cond: String, target: usize },
    Return {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        value: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Statement {
    pub id: usize,
    #[serde(flatten)]
    pub kind: StatementKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodDef {
    pub signature: String,
    #[serde(default)]
    pub params: Vec<Param>,
    #[serde(default)]
    pub body: Vec<Statement>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassDef {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extends: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub implements: Vec<String>,
    #[serde(default)]
    pub methods: Vec<MethodDef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Program {
    pub ceir_version: u32,
    pub app_id: String,
    #[serde(default)]
    pub classes: Vec<ClassDef>,
    #[serde(default)]
    pub entry_methods: Vec<String>,
    /// Declared-but-bodiless library method signatures.
    #[serde(default)]
    pub externals: Vec<String>,
}

/// A code location: a method signature plus a statement id within it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Loc {
    pub method: String,
    pub stmt: usize,
}

impl Loc {
    pub fn new(method: impl Into<String>, stmt: usize) -> Self {
        Loc {
            method: method.into(),
            stmt,
        }
    }
}

impl std::fmt::Display for Loc {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}#{}", self.method, self.stmt)
    }
}

impl StatementKind {
    /// Locals this statement reads.
    pub fn uses(&self) -> Vec<&str> {
        match self {
            StatementKind::Const { .. } => vec![],
            StatementKind::Assign { src, .. } => vec![src.as_str()],
            StatementKind::Call { receiver, args, .. } => receiver
                .iter()
                .map(String::as_str)
                .chain(args.iter().map(String::as_str))
                .collect(),
            StatementKind::FieldLoad { .. } => vec![],
            StatementKind::FieldStore { value, .. } => vec![value.as_str()],
            StatementKind::Branch { cond, .. } => vec![cond.as_str()],
            StatementKind::Return { value } => value.iter().map(String::as_str).collect(),
        }
    }

    /// Local this statement defines, if any.
    pub fn def(&self) -> Option<&str> {
        match self {
            StatementKind::Const { dst, .. } => Some(dst),
            StatementKind::Assign { dst, .. } => Some(dst),
            StatementKind::Call { dst, .. } => dst.as_deref(),
            StatementKind::FieldLoad { dst, .. } => Some(dst),
            _ => None,
        }
    }
}

impl MethodDef {
    pub fn stmt(&self, id: usize) -> Option<&Statement> {
        self.body.iter().find(|s| s.id == id)
    }

    /// Position of the statement with the given id in the body.
    pub fn stmt_pos(&self, id: usize) -> Option<usize> {
        self.body.iter().position(|s| s.id == id)
    }

    /// Names declared in this method: params plus every statement destination.
    pub fn declared_locals(&self) -> BTreeSet<&str> {
        let mut names: BTreeSet<&str> = self.params.iter().map(|p| p.name.as_str()).collect();
        for stmt in &self.body {
            if let Some(d) = stmt.kind.def() {
                names.insert(d);
            }
        }
        names
    }

    /// Successor positions of the statement at `pos`, per the control-flow
    /// rules: fallthrough plus branch targets; `return` has none.
    pub fn successors(&self, pos: usize) -> Vec<usize> {
        let mut succ = Vec::new();
        match &self.body[pos].kind {
            StatementKind::Return { .. } => {}
            StatementKind::Branch { target, .. } => {
                if pos + 1 < self.body.len() {
                    succ.push(pos + 1);
                }
                if let Some(t) = self.stmt_pos(*target) {
                    succ.push(t);
                }
            }
            _ => {
                if pos + 1 < self.body.len() {
                    succ.push(pos + 1);
                }
            }
        }
        succ
    }
}

impl Program {
    /// Looks up a program-defined method by signature.
    pub fn method(&self, signature: &str) -> Option<&MethodDef> {
        self.classes
            .iter()
            .flat_map(|c| c.methods.iter())
            .find(|m| m.signature == signature)
    }

    pub fn methods(&self) -> impl Iterator<Item = &MethodDef> {
        self.classes.iter().flat_map(|c| c.methods.iter())
    }

    pub fn is_external(&self, signature: &str) -> bool {
        self.externals.iter().any(|e| e == signature)
    }

    /// Resolves a location to its statement.
    pub fn stmt_at(&self, loc: &Loc) -> Result<&Statement> {
        self.method(&loc.method)
            .and_then(|m| m.stmt(loc.stmt))
            .ok_or_else(|| Error::domain(format!("unresolvable location {loc}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("program serialization cannot fail")
    }
}

/// Parses and validates a CEIR document. On failure every schema violation is
/// reported, each naming the statement or method it was found in.
pub fn parse_program(text: &str) -> Result<Program> {
    let program: Program =
        serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))?;
    let violations = validate(&program);
    if violations.is_empty() {
        Ok(program)
    } else {
        Err(Error::Schema(violations))
    }
}

fn validate(program: &Program) -> Vec<SchemaViolation> {
    let mut violations = Vec::new();
    let mut push = |context: String, message: String| {
        violations.push(SchemaViolation { context, message });
    };

    if program.ceir_version != CEIR_VERSION {
        push(
            "document".into(),
            format!(
                "ceir_version {} is not supported (expected {CEIR_VERSION})",
                program.ceir_version
            ),
        );
    }
    if program.app_id.is_empty() {
        push("document".into(), "app_id must be non-empty".into());
    }

    let mut defined: BTreeSet<&str> = BTreeSet::new();
    for class in &program.classes {
        for method in &class.methods {
            if !defined.insert(&method.signature) {
                push(
                    format!("method {}", method.signature),
                    "duplicate method definition".into(),
                );
            }
        }
    }
    let externals: BTreeSet<&str> = program.externals.iter().map(String::as_str).collect();
    for sig in &externals {
        if defined.contains(sig) {
            push(
                format!("method {sig}"),
                "declared both external and defined".into(),
            );
        }
    }

    for entry in &program.entry_methods {
        if !defined.contains(entry.as_str()) {
            push(
                format!("entry method {entry}"),
                "does not resolve to a defined method".into(),
            );
        }
    }

    for class in &program.classes {
        for method in &class.methods {
            let ctx = |stmt_id: usize| format!("method {} stmt {}", method.signature, stmt_id);

            let mut ids = BTreeSet::new();
            for stmt in &method.body {
                if !ids.insert(stmt.id) {
                    push(ctx(stmt.id), "duplicate statement id".into());
                }
            }

            let locals = method.declared_locals();
            for stmt in &method.body {
                for used in stmt.kind.uses() {
                    if !locals.contains(used) {
                        push(
                            ctx(stmt.id),
                            format!("operand {used:?} is not a declared local or param"),
                        );
                    }
                }
                match &stmt.kind {
                    StatementKind::Branch { target, .. } => {
                        if !ids.contains(target) {
                            push(ctx(stmt.id), format!("branch target {target} out of range"));
                        }
                    }
                    StatementKind::Call {
                        callee, receiver, ..
                    } => {
                        let internal = defined.contains(callee.as_str());
                        if !internal && !externals.contains(callee.as_str()) {
                            push(
                                ctx(stmt.id),
                                format!(
                                    "callee {callee:?} is neither defined nor declared external"
                                ),
                            );
                        }
                        if internal && receiver.is_some() {
                            push(
                                ctx(stmt.id),
                                "receiver is not allowed on calls to program-defined methods"
                                    .into(),
                            );
                        }
                        if internal {
                            let callee_def = program.method(callee).expect("checked above");
                            if let StatementKind::Call { args, .. } = &stmt.kind {
                                if args.len() != callee_def.params.len() {
                                    push(
                                        ctx(stmt.id),
                                        format!(
                                            "call passes {} args but {} declares {} params",
                                            args.len(),
                                            callee,
                                            callee_def.params.len()
                                        ),
                                    );
                                }
                            }
                        }
                    }
                    _ => {}
                }
            }
        }
    }

    violations
}

/// All call sites of `sig`, in class/method/statement order.
pub fn call_sites_of(program: &Program, sig: &str) -> Vec<Loc> {
    let mut sites = Vec::new();
    for method in program.methods() {
        for stmt in &method.body {
            if let StatementKind::Call { callee, .. } = &stmt.kind {
                if callee == sig {
                    sites.push(Loc::new(method.signature.clone(), stmt.id));
                }
            }
        }
    }
    sites
}

/// Simple class-name extraction from a fully qualified method signature,
/// e.g. `java.net.URL.<init>(java.lang.String)` yields `java.net.URL`.
pub fn class_of_signature(sig: &str) -> Option<&str> {
    let paren = sig.find('(')?;
    let head = &sig[..paren];
    let dot = head.rfind('.')?;
    Some(&head[..dot])
}

/// Simple method-name extraction, e.g. `verify` from
/// `com.app.V.verify(java.lang.String)`.
pub fn simple_name(sig: &str) -> Option<&str> {
    let paren = sig.find('(')?;
    let head = &sig[..paren];
    let dot = head.rfind('.')?;
    Some(&head[dot + 1..])
}
