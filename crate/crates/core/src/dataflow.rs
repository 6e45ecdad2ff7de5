//! Misuse-originating data-flow analysis: taint-connection between source and
//! sink call sites, source refinement from parameter-related APIs to the
//! data-related APIs they affect, backward data-source tracking to categorize
//! sinks, and the annotation pass that fills each misuse tuple's sink list.
//!
//! The taint engine is a deliberately simple over-approximation: branch
//! conditions are opaque, fields are merged per (class, field) across the
//! whole program, and inter-procedural propagation follows call arguments and
//! return values down to a bounded call depth. Every method is analyzed as a
//! root, so flows are found regardless of entry-point reachability.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ir::{call_sites_of, class_of_signature, Loc, Program, StatementKind};
use crate::misuse::MisuseTuple;
use crate::taxonomy::{ApiClass, ApiKind, SinkCategory, Taxonomy};

/// Sources, sinks, and the inter-procedural call-depth bound of one run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaintConfig {
    pub sources: BTreeSet<String>,
    pub sinks: BTreeSet<String>,
    /// How many program-defined call frames taint may cross; must be ≥ 1.
    pub depth: usize,
}

pub const DEFAULT_CALL_DEPTH: usize = 3;

impl TaintConfig {
    pub fn new(
        sources: impl IntoIterator<Item = String>,
        sinks: impl IntoIterator<Item = String>,
    ) -> Self {
        TaintConfig {
            sources: sources.into_iter().collect(),
            sinks: sinks.into_iter().collect(),
            depth: DEFAULT_CALL_DEPTH,
        }
    }

    pub fn with_depth(mut self, depth: usize) -> Self {
        self.depth = depth;
        self
    }

    /// Configured signatures that occur nowhere in the program, reported as
    /// warnings rather than failures.
    pub fn warnings(&self, program: &Program) -> Vec<String> {
        self.sources
            .iter()
            .map(|s| ("source", s))
            .chain(self.sinks.iter().map(|s| ("sink", s)))
            .filter(|(_, sig)| call_sites_of(program, sig).is_empty() && !program.is_external(sig))
            .map(|(kind, sig)| format!("{kind} {sig:?} has no call site in {}", program.app_id))
            .collect()
    }
}

/// A witnessed source-to-sink connection.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TaintFlow {
    pub source: Loc,
    pub sink: Loc,
}

/// One sidecar record per (source, sink) pair reached during annotation.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FlowRecord {
    pub source: Loc,
    pub sink: Loc,
    pub category: SinkCategory,
}

type Origins = BTreeSet<Loc>;
type LocalState = BTreeMap<String, Origins>;

struct Engine<'a> {
    program: &'a Program,
    taxonomy: &'a Taxonomy,
    cfg: &'a TaintConfig,
    field_taint: BTreeMap<(String, String), Origins>,
    flows: BTreeSet<TaintFlow>,
}

impl<'a> Engine<'a> {
    fn run(mut self) -> BTreeSet<TaintFlow> {
        loop {
            let before = (self.flows.len(), self.field_size());
            for method in self.program.methods() {
                self.analyze(&method.signature, LocalState::new(), self.cfg.depth);
            }
            if (self.flows.len(), self.field_size()) == before {
                return self.flows;
            }
        }
    }

    fn field_size(&self) -> usize {
        self.field_taint.values().map(BTreeSet::len).sum()
    }

    /// Propagates taint through one method body to a fixpoint and returns the
    /// origins that may reach its return value. `budget` counts the remaining
    /// descents into program-defined callees.
    fn analyze(&mut self, signature: &str, params: LocalState, budget: usize) -> Origins {
        let Some(method) = self.program.method(signature) else {
            return Origins::new();
        };
        let n = method.body.len();
        if n == 0 {
            return Origins::new();
        }

        let mut ins: Vec<LocalState> = vec![LocalState::new(); n];
        ins[0] = params;
        // Statements only participate once control flow can reach them.
        let mut reached = vec![false; n];
        reached[0] = true;
        let mut returns = Origins::new();

        // The method body is borrowed from `self.program`, which outlives
        // `self`; clone the statements we dispatch on so recursive calls can
        // borrow `self` mutably.
        let body: Vec<(usize, StatementKind)> =
            method.body.iter().map(|s| (s.id, s.kind.clone())).collect();
        let successors: Vec<Vec<usize>> = (0..n).map(|pos| method.successors(pos)).collect();
        let method_sig = method.signature.clone();

        let mut changed = true;
        while changed {
            changed = false;
            for pos in 0..n {
                if !reached[pos] {
                    continue;
                }
                let mut state = ins[pos].clone();
                let (stmt_id, kind) = &body[pos];
                self.transfer(
                    &method_sig,
                    *stmt_id,
                    kind,
                    &mut state,
                    budget,
                    &mut returns,
                );
                for &succ in &successors[pos] {
                    if !reached[succ] {
                        reached[succ] = true;
                        changed = true;
                    }
                    let merged = join(&ins[succ], &state);
                    if merged != ins[succ] {
                        ins[succ] = merged;
                        changed = true;
                    }
                }
                // Re-run until return origins stabilize too.
                if let StatementKind::Return { value: Some(v) } = kind {
                    let origins = ins[pos].get(v).cloned().unwrap_or_default();
                    let before = returns.len();
                    returns.extend(origins);
                    if returns.len() != before {
                        changed = true;
                    }
                }
            }
        }

        returns
    }

    fn transfer(
        &mut self,
        method: &str,
        stmt_id: usize,
        kind: &StatementKind,
        state: &mut LocalState,
        budget: usize,
        _returns: &mut Origins,
    ) {
        match kind {
            StatementKind::Const { dst, .. } => {
                state.insert(dst.clone(), Origins::new());
            }
            StatementKind::Assign { dst, src } => {
                let v = state.get(src).cloned().unwrap_or_default();
                state.insert(dst.clone(), v);
            }
            StatementKind::FieldStore {
                class,
                field,
                value,
            } => {
                let origins = state.get(value).cloned().unwrap_or_default();
                if !origins.is_empty() {
                    self.field_taint
                        .entry((class.clone(), field.clone()))
                        .or_default()
                        .extend(origins);
                }
            }
            StatementKind::FieldLoad { dst, class, field } => {
                let v = self
                    .field_taint
                    .get(&(class.clone(), field.clone()))
                    .cloned()
                    .unwrap_or_default();
                state.insert(dst.clone(), v);
            }
            StatementKind::Call {
                dst,
                callee,
                receiver,
                args,
            } => {
                let loc = Loc::new(method, stmt_id);
                let mut inputs = Origins::new();
                for a in args {
                    inputs.extend(state.get(a).cloned().unwrap_or_default());
                }
                if let Some(r) = receiver {
                    inputs.extend(state.get(r).cloned().unwrap_or_default());
                }

                // A tainted value reaching a sink's argument or receiver
                // witnesses one flow per origin.
                if self.cfg.sinks.contains(callee) {
                    for origin in &inputs {
                        self.flows.insert(TaintFlow {
                            source: origin.clone(),
                            sink: loc.clone(),
                        });
                    }
                }

                let is_source = self.cfg.sources.contains(callee);
                let internal = self.program.method(callee).is_some();

                let mut result = if internal {
                    if budget > 0 {
                        let callee_def = self.program.method(callee).unwrap();
                        let mut bound = LocalState::new();
                        for (param, arg) in callee_def.params.clone().iter().zip(args) {
                            bound.insert(
                                param.name.clone(),
                                state.get(arg).cloned().unwrap_or_default(),
                            );
                        }
                        self.analyze(callee, bound, budget - 1)
                    } else {
                        Origins::new()
                    }
                } else {
                    // External callees propagate tainted inputs to the result.
                    inputs.clone()
                };

                if is_source {
                    result.insert(loc.clone());
                }

                // Parameter-setting APIs absorb their inputs into the receiver.
                let taints_receiver = self
                    .taxonomy
                    .api(callee)
                    .map(|e| e.taints_receiver)
                    .unwrap_or(false);
                if taints_receiver {
                    if let Some(r) = receiver {
                        let mut extra = inputs.clone();
                        if is_source {
                            extra.insert(loc.clone());
                        }
                        state.entry(r.clone()).or_default().extend(extra);
                    }
                }

                if let Some(d) = dst {
                    state.insert(d.clone(), result);
                }
            }
            StatementKind::Branch { .. } | StatementKind::Return { .. } => {}
        }
    }
}

fn join(a: &LocalState, b: &LocalState) -> LocalState {
    let mut out = a.clone();
    for (k, v) in b {
        out.entry(k.clone()).or_default().extend(v.iter().cloned());
    }
    out
}

/// Derives every (source call site, sink call site) pair connected by taint.
pub fn taint_connect(
    program: &Program,
    taxonomy: &Taxonomy,
    cfg: &TaintConfig,
) -> BTreeSet<TaintFlow> {
    Engine {
        program,
        taxonomy,
        cfg,
        field_taint: BTreeMap::new(),
        flows: BTreeSet::new(),
    }
    .run()
}

/// Refines a misused API into the source set for its data-flow run: the API
/// itself, plus — for parameter-related APIs — every data-related API whose
/// call sites it taints.
pub fn refine_sources(
    m: &str,
    program: &Program,
    taxonomy: &Taxonomy,
    depth: usize,
) -> Result<BTreeSet<String>> {
    let mut sources = BTreeSet::from([m.to_string()]);
    match taxonomy.classify_api(m) {
        ApiClass::Unknown => {
            return Err(Error::domain(format!(
                "cannot refine {m:?}: not a cataloged crypto API"
            )))
        }
        ApiClass::Dapi => {}
        ApiClass::Papi => {
            let dapi_sinks = taxonomy.apis_of_kind(ApiKind::DAPI);
            let cfg = TaintConfig::new([m.to_string()], dapi_sinks).with_depth(depth);
            for flow in taint_connect(program, taxonomy, &cfg) {
                if let Ok(stmt) = program.stmt_at(&flow.sink) {
                    if let StatementKind::Call { callee, .. } = &stmt.kind {
                        sources.insert(callee.clone());
                    }
                }
            }
        }
    }
    Ok(sources)
}

/// Backward intra-procedural data-source tracking: walks def-use edges from a
/// sink call's receiver and arguments, collects the semantic types it passes,
/// and returns the most sensitive category among their tags and the sink
/// API's default category.
pub fn categorize_sink(program: &Program, taxonomy: &Taxonomy, sink: &Loc) -> Result<SinkCategory> {
    let stmt = program.stmt_at(sink)?;
    let StatementKind::Call {
        callee,
        receiver,
        args,
        ..
    } = &stmt.kind
    else {
        return Err(Error::domain(format!("{sink} is not a call statement")));
    };
    let entry = taxonomy
        .api(callee)
        .filter(|e| e.is_sink)
        .ok_or_else(|| Error::domain(format!("{callee:?} at {sink} is not a cataloged sink")))?;
    let default = entry
        .default_sink_category
        .expect("catalog validation guarantees sink defaults");

    let method = program.method(&sink.method).expect("stmt_at resolved it");
    let mut worklist: Vec<&str> = args.iter().map(String::as_str).collect();
    if let Some(r) = receiver {
        worklist.push(r);
    }
    let mut visited: BTreeSet<&str> = worklist.iter().copied().collect();
    let mut types: BTreeSet<&str> = BTreeSet::new();

    while let Some(local) = worklist.pop() {
        if let Some(param) = method.params.iter().find(|p| p.name == local) {
            types.insert(&param.ty);
        }
        for s in &method.body {
            if s.kind.def() != Some(local) {
                continue;
            }
            match &s.kind {
                StatementKind::Const { ty, .. } => {
                    types.insert(ty);
                }
                StatementKind::Assign { src, .. } => {
                    if visited.insert(src) {
                        worklist.push(src);
                    }
                }
                StatementKind::FieldLoad { class, .. } => {
                    types.insert(class);
                }
                StatementKind::Call {
                    callee: c,
                    receiver: r,
                    args: a,
                    ..
                } => {
                    if let Some(class) = class_of_signature(c) {
                        types.insert(class);
                    }
                    for used in a.iter().chain(r.iter()) {
                        if visited.insert(used) {
                            worklist.push(used);
                        }
                    }
                }
                _ => {}
            }
        }
    }

    let mut categories: BTreeSet<SinkCategory> =
        types.iter().filter_map(|t| taxonomy.type_tag(t)).collect();
    categories.insert(default);
    Ok(taxonomy
        .most_sensitive(categories)
        .expect("default category is always present"))
}

/// Fills each tuple's sink-category multiset: refine its misused API into
/// sources, connect taint to the configured sinks, keep flows whose source
/// call site lies in the tuple's parent method, and categorize each distinct
/// sink call site reached. Tuples whose API has no call site in the parent
/// method (or is not cataloged) are flagged unlocatable and left empty.
/// Nothing but `S` and the flag is ever modified.
pub fn annotate(
    tuples: &mut [MisuseTuple],
    program: &Program,
    taxonomy: &Taxonomy,
    sinks: &BTreeSet<String>,
    depth: usize,
) -> Result<Vec<FlowRecord>> {
    let mut records = BTreeSet::new();
    for tuple in tuples.iter_mut() {
        if taxonomy.classify_api(&tuple.api) == ApiClass::Unknown {
            tuple.unlocatable = true;
            continue;
        }
        let locatable = call_sites_of(program, &tuple.api)
            .iter()
            .any(|l| l.method == tuple.parent);
        if !locatable {
            tuple.unlocatable = true;
            continue;
        }

        let sources = refine_sources(&tuple.api, program, taxonomy, depth)?;
        let cfg = TaintConfig::new(sources, sinks.iter().cloned()).with_depth(depth);
        let flows = taint_connect(program, taxonomy, &cfg);

        let mut sink_locs: BTreeSet<Loc> = BTreeSet::new();
        let mut kept: Vec<TaintFlow> = Vec::new();
        for flow in flows {
            if flow.source.method == tuple.parent {
                sink_locs.insert(flow.sink.clone());
                kept.push(flow);
            }
        }

        let mut categories = Vec::new();
        let mut by_sink: BTreeMap<Loc, SinkCategory> = BTreeMap::new();
        for sink in &sink_locs {
            let cat = categorize_sink(program, taxonomy, sink)?;
            by_sink.insert(sink.clone(), cat);
            categories.push(cat);
        }
        categories.sort();
        tuple.sink_categories = categories;

        for flow in kept {
            records.insert(FlowRecord {
                category: by_sink[&flow.sink],
                source: flow.source,
                sink: flow.sink,
            });
        }
    }
    Ok(records.into_iter().collect())
}
