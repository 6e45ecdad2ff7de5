//! Intra-procedural constant propagation over reaching definitions.
//!
//! Per-local lattice: undefined → known literal → non-constant. Joins of
//! disagreeing literals widen straight to non-constant, so loops terminate
//! without further machinery. Method parameters and call results are
//! non-constant from the start.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::ir::{Literal, Loc, MethodDef, Program, Statement, StatementKind};

/// Outcome of asking for the constant value of a call argument.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConstValue {
    Literal(Literal),
    NonConstant,
}

impl ConstValue {
    pub fn as_str(&self) -> Option<&str> {
        match self {
            ConstValue::Literal(Literal::Str(s)) => Some(s),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            ConstValue::Literal(Literal::Int(i)) => Some(*i),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Flat {
    Bottom,
    Const(Literal),
    Top,
}

impl Flat {
    fn join(&self, other: &Flat) -> Flat {
        match (self, other) {
            (Flat::Bottom, x) | (x, Flat::Bottom) => x.clone(),
            (Flat::Top, _) | (_, Flat::Top) => Flat::Top,
            (Flat::Const(a), Flat::Const(b)) => {
                if a == b {
                    Flat::Const(a.clone())
                } else {
                    Flat::Top
                }
            }
        }
    }
}

type State = BTreeMap<String, Flat>;

fn join_states(a: &State, b: &State) -> State {
    let mut out = a.clone();
    for (k, v) in b {
        let merged = match out.get(k) {
            Some(existing) => existing.join(v),
            None => v.clone(),
        };
        out.insert(k.clone(), merged);
    }
    out
}

fn transfer(stmt: &Statement, state: &mut State) {
    match &stmt.kind {
        StatementKind::Const { dst, value, .. } => {
            state.insert(dst.clone(), Flat::Const(value.clone()));
        }
        StatementKind::Assign { dst, src } => {
            let v = state.get(src).cloned().unwrap_or(Flat::Bottom);
            state.insert(dst.clone(), v);
        }
        StatementKind::Call { dst: Some(dst), .. } | StatementKind::FieldLoad { dst, .. } => {
            state.insert(dst.clone(), Flat::Top);
        }
        _ => {}
    }
}

/// Fixpoint of the per-statement IN states for one method.
fn analyze(method: &MethodDef) -> Vec<State> {
    let n = method.body.len();
    let mut entry: State = State::new();
    for p in &method.params {
        entry.insert(p.name.clone(), Flat::Top);
    }

    let mut ins: Vec<Option<State>> = vec![None; n];
    if n == 0 {
        return Vec::new();
    }
    ins[0] = Some(entry);

    let mut changed = true;
    while changed {
        changed = false;
        for pos in 0..n {
            let Some(in_state) = ins[pos].clone() else {
                continue;
            };
            let mut out = in_state;
            transfer(&method.body[pos], &mut out);
            for succ in method.successors(pos) {
                let merged = match &ins[succ] {
                    Some(existing) => join_states(existing, &out),
                    None => out.clone(),
                };
                if ins[succ].as_ref() != Some(&merged) {
                    ins[succ] = Some(merged);
                    changed = true;
                }
            }
        }
    }

    ins.into_iter().map(|s| s.unwrap_or_default()).collect()
}

/// Constant value of argument `index` at the call site `call`. Returns the
/// literal iff every reaching definition of the argument yields that literal.
pub fn constant_arg(program: &Program, call: &Loc, index: usize) -> Result<ConstValue> {
    let method = program
        .method(&call.method)
        .ok_or_else(|| Error::domain(format!("no method {}", call.method)))?;
    let pos = method
        .stmt_pos(call.stmt)
        .ok_or_else(|| Error::domain(format!("no statement {call}")))?;
    let StatementKind::Call { args, .. } = &method.body[pos].kind else {
        return Err(Error::domain(format!("{call} is not a call statement")));
    };
    let arg = args
        .get(index)
        .ok_or_else(|| Error::domain(format!("call {call} has no argument at index {index}")))?;

    let states = analyze(method);
    Ok(match states[pos].get(arg) {
        Some(Flat::Const(lit)) => ConstValue::Literal(lit.clone()),
        // Bottom means no definition reaches the call; no literal evidence.
        _ => ConstValue::NonConstant,
    })
}
