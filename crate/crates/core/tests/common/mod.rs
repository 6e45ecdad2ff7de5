//! Shared test support: a seeded generator for small loop-free CEIR programs
//! and brute-force oracles (exhaustive path enumeration) that the dataflow
//! and constant-propagation engines are checked against.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use cryptorisk_core::dataflow::{TaintConfig, TaintFlow};
use cryptorisk_core::ir::{
    parse_program, ClassDef, Literal, Loc, MethodDef, Param, Program, Statement, StatementKind,
};
use cryptorisk_core::taxonomy::Taxonomy;

pub const GEN_SOURCE: &str = "gen.lib.Source.read()";
pub const GEN_SINK: &str = "gen.lib.Sink.emit(java.lang.String)";
const GEN_MIX: &str = "gen.lib.Util.mix(java.lang.String,java.lang.String)";
const GEN_CONSUME: &str = "gen.lib.Util.consume(java.lang.String)";
const GEN_PUT: &str = "gen.lib.Holder.put(java.lang.String)";

/// Builds a random loop-free program: methods form a call DAG (each method
/// calls at most one strictly-later method), branches only jump forward, and
/// every operand is defined. The result is re-validated through the parser.
pub fn generate_program(seed: u64) -> Program {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_methods = rng.gen_range(3..=5);

    let signatures: Vec<String> = (0..n_methods)
        .map(|i| {
            let params = rng.gen_range(0..=2);
            let param_list = vec!["java.lang.String"; params].join(",");
            format!("gen.app.M{i}.run{i}({param_list})")
        })
        .collect();
    let param_counts: Vec<usize> = signatures
        .iter()
        .map(|s| {
            let inner = &s[s.find('(').unwrap() + 1..s.len() - 1];
            if inner.is_empty() {
                0
            } else {
                inner.split(',').count()
            }
        })
        .collect();

    let mut methods = Vec::new();
    for i in 0..n_methods {
        let n_stmts = rng.gen_range(5..=7);
        let params: Vec<Param> = (0..param_counts[i])
            .map(|j| Param {
                name: format!("p{j}"),
                ty: "java.lang.String".to_string(),
            })
            .collect();
        let mut locals: Vec<String> = params.iter().map(|p| p.name.clone()).collect();
        let mut body: Vec<Statement> = Vec::new();
        let mut branched = false;
        let mut called_internal = false;

        for id in 0..n_stmts {
            let is_last = id == n_stmts - 1;
            if is_last && !locals.is_empty() {
                let value = locals.choose(&mut rng).unwrap().clone();
                body.push(Statement {
                    id,
                    kind: StatementKind::Return { value: Some(value) },
                });
                continue;
            }

            let kind = if locals.is_empty() {
                0 // must produce a value first
            } else {
                rng.gen_range(0..12)
            };
            let dst = format!("v{id}");
            // Recently defined locals are likelier to be tainted; bias sinks
            // and copies toward them to keep the oracle suite non-vacuous.
            let pick = |rng: &mut ChaCha8Rng, locals: &[String]| {
                if rng.gen_bool(0.5) {
                    locals.last().unwrap().clone()
                } else {
                    locals.choose(rng).unwrap().clone()
                }
            };

            let stmt = match kind {
                0 => {
                    let value = if rng.gen_bool(0.5) {
                        Literal::Str(format!("s{}", rng.gen_range(0..4)))
                    } else {
                        Literal::Int(rng.gen_range(0..100))
                    };
                    locals.push(dst.clone());
                    StatementKind::Const {
                        dst,
                        value,
                        ty: "java.lang.String".to_string(),
                    }
                }
                1 => {
                    let src = pick(&mut rng, &locals);
                    locals.push(dst.clone());
                    StatementKind::Assign { dst, src }
                }
                2 | 3 => {
                    locals.push(dst.clone());
                    StatementKind::Call {
                        dst: Some(dst),
                        callee: GEN_SOURCE.to_string(),
                        receiver: None,
                        args: vec![],
                    }
                }
                4..=6 => StatementKind::Call {
                    dst: None,
                    callee: GEN_SINK.to_string(),
                    receiver: None,
                    args: vec![pick(&mut rng, &locals)],
                },
                7 => {
                    let a = pick(&mut rng, &locals);
                    let b = pick(&mut rng, &locals);
                    locals.push(dst.clone());
                    StatementKind::Call {
                        dst: Some(dst),
                        callee: GEN_MIX.to_string(),
                        receiver: None,
                        args: vec![a, b],
                    }
                }
                8 => StatementKind::FieldStore {
                    class: "gen.app.G".to_string(),
                    field: format!("f{}", rng.gen_range(0..2)),
                    value: pick(&mut rng, &locals),
                },
                9 => {
                    locals.push(dst.clone());
                    StatementKind::FieldLoad {
                        dst,
                        class: "gen.app.G".to_string(),
                        field: format!("f{}", rng.gen_range(0..2)),
                    }
                }
                10 => {
                    if !called_internal && i + 1 < n_methods {
                        let callee_idx = rng.gen_range(i + 1..n_methods);
                        called_internal = true;
                        let args = (0..param_counts[callee_idx])
                            .map(|_| pick(&mut rng, &locals))
                            .collect();
                        locals.push(dst.clone());
                        StatementKind::Call {
                            dst: Some(dst),
                            callee: signatures[callee_idx].clone(),
                            receiver: None,
                            args,
                        }
                    } else if !branched && id + 2 < n_stmts {
                        branched = true;
                        StatementKind::Branch {
                            cond: pick(&mut rng, &locals),
                            target: rng.gen_range(id + 1..n_stmts),
                        }
                    } else {
                        StatementKind::Call {
                            dst: None,
                            callee: GEN_CONSUME.to_string(),
                            receiver: None,
                            args: vec![pick(&mut rng, &locals)],
                        }
                    }
                }
                _ => {
                    let receiver = pick(&mut rng, &locals);
                    let arg = pick(&mut rng, &locals);
                    StatementKind::Call {
                        dst: None,
                        callee: GEN_PUT.to_string(),
                        receiver: Some(receiver),
                        args: vec![arg],
                    }
                }
            };
            body.push(Statement { id, kind: stmt });
        }

        methods.push(MethodDef {
            signature: signatures[i].clone(),
            params,
            body,
        });
    }

    let program = Program {
        ceir_version: 1,
        app_id: format!("gen-{seed}"),
        classes: vec![ClassDef {
            name: "gen.app.M".to_string(),
            extends: None,
            implements: vec![],
            methods,
        }],
        entry_methods: vec![signatures[0].clone()],
        externals: vec![
            GEN_SOURCE.to_string(),
            GEN_SINK.to_string(),
            GEN_MIX.to_string(),
            GEN_CONSUME.to_string(),
            GEN_PUT.to_string(),
        ],
    };
    parse_program(&program.to_json()).expect("generated program must validate")
}

pub fn gen_taint_config(depth: usize) -> TaintConfig {
    TaintConfig::new([GEN_SOURCE.to_string()], [GEN_SINK.to_string()]).with_depth(depth)
}

type Origins = BTreeSet<Loc>;
type Env = BTreeMap<String, Origins>;
type Fields = BTreeMap<(String, String), Origins>;

/// Exhaustive acyclic-path enumeration with the same local transfer rules as
/// the engine, used as the ground-truth lower bound: every flow it finds must
/// also be found by `taint_connect`.
pub fn oracle_flows(
    program: &Program,
    taxonomy: &Taxonomy,
    cfg: &TaintConfig,
) -> BTreeSet<TaintFlow> {
    let mut flows = BTreeSet::new();
    for method in program.methods() {
        let env: Env = method
            .params
            .iter()
            .map(|p| (p.name.clone(), Origins::new()))
            .collect();
        walk(
            program,
            taxonomy,
            cfg,
            method,
            0,
            env,
            Fields::new(),
            &mut BTreeSet::new(),
            &mut flows,
        );
    }
    flows
}

#[allow(clippy::too_many_arguments)]
fn walk(
    program: &Program,
    taxonomy: &Taxonomy,
    cfg: &TaintConfig,
    method: &MethodDef,
    pos: usize,
    mut env: Env,
    mut fields: Fields,
    visited: &mut BTreeSet<usize>,
    flows: &mut BTreeSet<TaintFlow>,
) -> Vec<(Origins, Fields)> {
    if pos >= method.body.len() || visited.contains(&pos) {
        return vec![(Origins::new(), fields)];
    }
    visited.insert(pos);

    let stmt = &method.body[pos];
    let loc = Loc::new(method.signature.clone(), stmt.id);
    let outcomes = match &stmt.kind {
        StatementKind::Return { value } => {
            let ret = value
                .as_ref()
                .and_then(|v| env.get(v).cloned())
                .unwrap_or_default();
            visited.remove(&pos);
            return vec![(ret, fields)];
        }
        StatementKind::Branch { .. } => {
            let mut outs = Vec::new();
            for succ in method.successors(pos) {
                outs.extend(walk(
                    program,
                    taxonomy,
                    cfg,
                    method,
                    succ,
                    env.clone(),
                    fields.clone(),
                    visited,
                    flows,
                ));
            }
            visited.remove(&pos);
            return outs;
        }
        StatementKind::Const { dst, .. } => {
            env.insert(dst.clone(), Origins::new());
            None
        }
        StatementKind::Assign { dst, src } => {
            let v = env.get(src).cloned().unwrap_or_default();
            env.insert(dst.clone(), v);
            None
        }
        StatementKind::FieldStore {
            class,
            field,
            value,
        } => {
            let origins = env.get(value).cloned().unwrap_or_default();
            fields
                .entry((class.clone(), field.clone()))
                .or_default()
                .extend(origins);
            None
        }
        StatementKind::FieldLoad { dst, class, field } => {
            let v = fields
                .get(&(class.clone(), field.clone()))
                .cloned()
                .unwrap_or_default();
            env.insert(dst.clone(), v);
            None
        }
        StatementKind::Call {
            dst,
            callee,
            receiver,
            args,
        } => {
            let mut inputs = Origins::new();
            for a in args {
                inputs.extend(env.get(a).cloned().unwrap_or_default());
            }
            if let Some(r) = receiver {
                inputs.extend(env.get(r).cloned().unwrap_or_default());
            }
            if cfg.sinks.contains(callee) {
                for origin in &inputs {
                    flows.insert(TaintFlow {
                        source: origin.clone(),
                        sink: loc.clone(),
                    });
                }
            }
            let is_source = cfg.sources.contains(callee);
            let taints_receiver = taxonomy
                .api(callee)
                .map(|e| e.taints_receiver)
                .unwrap_or(false);

            if let Some(callee_def) = program.method(callee) {
                // Fork over every path through the callee.
                let bound: Env = callee_def
                    .params
                    .iter()
                    .zip(args)
                    .map(|(p, a)| (p.name.clone(), env.get(a).cloned().unwrap_or_default()))
                    .collect();
                let callee_outcomes = walk(
                    program,
                    taxonomy,
                    cfg,
                    callee_def,
                    0,
                    bound,
                    fields.clone(),
                    &mut BTreeSet::new(),
                    flows,
                );
                Some((callee_outcomes, is_source, taints_receiver, inputs))
            } else {
                let mut result = inputs.clone();
                if is_source {
                    result.insert(loc.clone());
                }
                if taints_receiver {
                    if let Some(r) = receiver {
                        let mut extra = inputs.clone();
                        if is_source {
                            extra.insert(loc.clone());
                        }
                        env.entry(r.clone()).or_default().extend(extra);
                    }
                }
                if let Some(d) = dst {
                    env.insert(d.clone(), result);
                }
                None
            }
        }
    };

    let result = if let Some((callee_outcomes, is_source, _tr, _inputs)) = outcomes {
        // Internal call: continue this path once per callee outcome.
        let mut outs = Vec::new();
        let StatementKind::Call { dst, .. } = &stmt.kind else {
            unreachable!()
        };
        for (ret, fields_after) in callee_outcomes {
            let mut env2 = env.clone();
            if let Some(d) = dst {
                let mut r = ret.clone();
                if is_source {
                    r.insert(loc.clone());
                }
                env2.insert(d.clone(), r);
            }
            for succ in method.successors(pos) {
                outs.extend(walk(
                    program,
                    taxonomy,
                    cfg,
                    method,
                    succ,
                    env2.clone(),
                    fields_after.clone(),
                    visited,
                    flows,
                ));
            }
            if method.successors(pos).is_empty() {
                outs.push((Origins::new(), fields_after.clone()));
            }
        }
        outs
    } else {
        let succ = method.successors(pos);
        if succ.is_empty() {
            vec![(Origins::new(), fields)]
        } else {
            let mut outs = Vec::new();
            for s in succ {
                outs.extend(walk(
                    program,
                    taxonomy,
                    cfg,
                    method,
                    s,
                    env.clone(),
                    fields.clone(),
                    visited,
                    flows,
                ));
            }
            outs
        }
    };
    visited.remove(&pos);
    result
}

/// Concrete values an argument can hold at a call site, one entry per acyclic
/// path that reaches it. `None` marks a value unknowable on that path (call
/// results, field loads, parameters).
pub fn oracle_arg_values(program: &Program, call: &Loc, index: usize) -> Vec<Option<Literal>> {
    let method = program.method(&call.method).expect("method exists");
    let target = method.stmt_pos(call.stmt).expect("stmt exists");
    let arg = match &method.body[target].kind {
        StatementKind::Call { args, .. } => args[index].clone(),
        _ => panic!("not a call"),
    };

    #[derive(Clone)]
    struct CEnv(BTreeMap<String, Option<Literal>>);

    let mut results = Vec::new();
    let mut init = CEnv(BTreeMap::new());
    for p in &method.params {
        init.0.insert(p.name.clone(), None);
    }

    fn go(
        method: &MethodDef,
        pos: usize,
        target: usize,
        arg: &str,
        mut env: CEnv,
        visited: &mut BTreeSet<usize>,
        results: &mut Vec<Option<Literal>>,
    ) {
        if pos >= method.body.len() || visited.contains(&pos) {
            return;
        }
        if pos == target {
            if let Some(v) = env.0.get(arg) {
                results.push(v.clone());
            }
            return;
        }
        visited.insert(pos);
        match &method.body[pos].kind {
            StatementKind::Const { dst, value, .. } => {
                env.0.insert(dst.clone(), Some(value.clone()));
            }
            StatementKind::Assign { dst, src } => {
                let v = env.0.get(src).cloned().flatten();
                env.0.insert(dst.clone(), v);
            }
            StatementKind::Call { dst: Some(d), .. } => {
                env.0.insert(d.clone(), None);
            }
            StatementKind::FieldLoad { dst, .. } => {
                env.0.insert(dst.clone(), None);
            }
            _ => {}
        }
        for succ in method.successors(pos) {
            go(method, succ, target, arg, env.clone(), visited, results);
        }
        visited.remove(&pos);
    }

    go(
        method,
        0,
        target,
        &arg,
        init,
        &mut BTreeSet::new(),
        &mut results,
    );
    results
}
