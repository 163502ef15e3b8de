//! The ten metamorphic transformations and the chaining policy.
//!
//! Each transformation takes a program and returns a follow-up program plus
//! a [`TransformRecord`] describing how the follow-up's output relates to
//! the source's. Only qubit reordering and partitioning change the output;
//! after either of them a chain stops.

mod record;

pub use record::*;

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::GATE_SETS;
use crate::circuit::{
    interaction_components, Circuit, CompositeOp, CouplingMap, GateOp, Instruction, ParamValue, Program,
};
use crate::generator::{expand_gate_ops, GenRng};

/// Largest register any bundled simulator accepts; added registers must
/// stay within it.
pub const MAX_TOTAL_QUBITS: usize = 14;
/// Upper bound on qubits added by one AddRegister application.
pub const MAX_ADDED_QUBITS: usize = 3;
/// Upper bound on gates in an injected null-effect subcircuit.
pub const MAX_NULL_EFFECT_GATES: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransformError {
    #[error("precondition of '{0}' does not hold")]
    PreconditionViolated(TransformId),
    #[error("the circuit has no literal parameters to replace")]
    NoLiteralsAvailable,
    #[error("only one backend is registered")]
    OnlyOneBackend,
}

/// Chain length policy: at most `max_transforms` per follow-up, and always
/// stop after a transformation that changes the output.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformChainPolicy {
    pub max_transforms: usize,
    pub stop_after_non_preserving: bool,
}

impl Default for TransformChainPolicy {
    fn default() -> Self {
        TransformChainPolicy { max_transforms: 4, stop_after_non_preserving: true }
    }
}

/// What the transformations may assume about the platform.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransformContext {
    /// Registered backend ids, for the change-of-backend transformation.
    pub backends: Vec<String>,
}

impl TransformContext {
    pub fn new(backends: Vec<String>) -> Self {
        TransformContext { backends }
    }
}

/// A follow-up is one program, or two sub-programs after partitioning.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum FollowUp {
    Single { program: Program },
    Partitioned { a: Program, b: Program },
}

impl FollowUp {
    pub fn programs(&self) -> Vec<&Program> {
        match self {
            FollowUp::Single { program } => vec![program],
            FollowUp::Partitioned { a, b } => vec![a, b],
        }
    }
}

/// Whether `id` may be applied to `p`.
pub fn precondition(id: TransformId, p: &Program, ctx: &TransformContext) -> bool {
    match id {
        TransformId::AddRegister => p.config.coupling_map.is_none() && p.circuit.n_qubits < MAX_TOTAL_QUBITS,
        TransformId::Partition => interaction_components(&p.circuit).len() >= 2,
        TransformId::CouplingMap => !p.provenance.iter().any(|r| r.id() == TransformId::AddRegister),
        TransformId::InjectParams => literal_slots(&p.circuit).next().is_some(),
        TransformId::Backend => ctx.backends.iter().any(|b| *b != p.config.backend_id),
        _ => true,
    }
}

fn with_record(mut p: Program, kind: TransformKind) -> (Program, TransformRecord) {
    let record = TransformRecord::new(kind);
    p.provenance.push(record.clone());
    (p, record)
}

fn check(id: TransformId, p: &Program, ctx: &TransformContext) -> Result<(), TransformError> {
    if precondition(id, p, ctx) {
        return Ok(());
    }
    Err(match id {
        TransformId::InjectParams => TransformError::NoLiteralsAvailable,
        TransformId::Backend => TransformError::OnlyOneBackend,
        other => TransformError::PreconditionViolated(other),
    })
}

/// Applies transformation `id`.
pub fn apply(
    id: TransformId,
    p: &Program,
    rng: &mut GenRng,
    ctx: &TransformContext,
) -> Result<(FollowUp, TransformRecord), TransformError> {
    let single = |r: (Program, TransformRecord)| (FollowUp::Single { program: r.0 }, r.1);
    Ok(match id {
        TransformId::QubitOrder => single(apply_qubit_order(p, rng)),
        TransformId::NullEffect => single(apply_null_effect(p, rng)),
        TransformId::AddRegister => single(apply_add_register(p, rng, ctx)?),
        TransformId::InjectParams => single(apply_inject_params(p, rng)?),
        TransformId::Partition => {
            let (a, b, record) = apply_partition(p, rng, ctx)?;
            (FollowUp::Partitioned { a, b }, record)
        }
        TransformId::QasmRoundtrip => single(apply_qasm_roundtrip(p)),
        TransformId::CouplingMap => single(apply_change_coupling_map(p, rng, ctx)?),
        TransformId::GateSet => single(apply_change_gate_set(p, rng)),
        TransformId::OptLevel => single(apply_change_opt_level(p, rng)),
        TransformId::Backend => single(apply_change_backend(p, rng, ctx)?),
    })
}

/// Moves every gate from qubit `q` to `m(q)` for a uniform random
/// permutation `m`. Measurements keep their `(qubit, clbit)` wiring, so
/// follow-up clbit `m(q)` carries what source clbit `q` carried.
pub fn apply_qubit_order(p: &Program, rng: &mut GenRng) -> (Program, TransformRecord) {
    let mut mapping: Vec<usize> = (0..p.circuit.n_qubits).collect();
    mapping.shuffle(rng);
    with_record(permute_qubits(p, &mapping), TransformKind::QubitOrder { mapping })
}

/// Rewrites gate and composite operands through `mapping`.
pub fn permute_qubits(p: &Program, mapping: &[usize]) -> Program {
    let mut out = p.clone();
    for ins in &mut out.circuit.instructions {
        match ins {
            Instruction::Gate(g) => g.qubits.iter_mut().for_each(|q| *q = mapping[*q]),
            Instruction::Composite(c) => c.qubits.iter_mut().for_each(|q| *q = mapping[*q]),
            Instruction::Measure { .. } => {}
        }
    }
    out
}

fn fresh_subcircuit_name(c: &Circuit) -> String {
    (0..).map(|k| format!("subcirc_{k}")).find(|n| !c.subcircuits.contains_key(n)).expect("unbounded")
}

/// Inserts a random subcircuit over the full registers immediately
/// followed by its inverse, somewhere before the measurements.
pub fn apply_null_effect(p: &Program, rng: &mut GenRng) -> (Program, TransformRecord) {
    let mut out = p.clone();
    let c = &mut out.circuit;
    let mut sub = Circuit::new(c.n_qubits, c.n_clbits);
    if c.n_qubits > 0 {
        sub.instructions = expand_gate_ops(c.n_qubits, MAX_NULL_EFFECT_GATES, rng);
    }
    let name = fresh_subcircuit_name(c);
    let at = rng.gen_range(0..=c.measurement_start());
    let call = |inverted| {
        Instruction::Composite(CompositeOp {
            sub: name.clone(),
            qubits: (0..c.n_qubits).collect(),
            clbits: (0..c.n_clbits).collect(),
            inverted,
        })
    };
    let pair = [call(false), call(true)];
    c.instructions.splice(at..at, pair);
    c.subcircuits.insert(name.clone(), sub);
    with_record(out, TransformKind::NullEffect { subcircuit: name })
}

/// Appends `k ∈ [1, 3]` idle qubits with fresh clbits and measures them.
pub fn apply_add_register(
    p: &Program,
    rng: &mut GenRng,
    ctx: &TransformContext,
) -> Result<(Program, TransformRecord), TransformError> {
    check(TransformId::AddRegister, p, ctx)?;
    let mut out = p.clone();
    let c = &mut out.circuit;
    let room = MAX_TOTAL_QUBITS - c.n_qubits;
    let k = rng.gen_range(1..=MAX_ADDED_QUBITS.min(room));
    let (q0, c0) = (c.n_qubits, c.n_clbits);
    c.n_qubits += k;
    c.n_clbits += k;
    for i in 0..k {
        c.measure(q0 + i, c0 + i);
    }
    Ok(with_record(out, TransformKind::AddRegister { size: k, added_clbits: (c0..c0 + k).collect() }))
}

/// `(instruction index, parameter index)` of every literal angle in a
/// top-level gate.
fn literal_slots(c: &Circuit) -> impl Iterator<Item = (usize, usize)> + '_ {
    c.instructions.iter().enumerate().flat_map(|(i, ins)| {
        let params: &[ParamValue] = match ins {
            Instruction::Gate(g) => &g.params,
            _ => &[],
        };
        params.iter().enumerate().filter(|(_, v)| v.literal().is_some()).map(move |(k, _)| (i, k))
    })
}

/// Replaces a random nonempty subset of literal angles with fresh symbols
/// and binds each symbol to the literal it replaced.
pub fn apply_inject_params(p: &Program, rng: &mut GenRng) -> Result<(Program, TransformRecord), TransformError> {
    let slots: Vec<(usize, usize)> = literal_slots(&p.circuit).collect();
    if slots.is_empty() {
        return Err(TransformError::NoLiteralsAvailable);
    }
    let count = rng.gen_range(1..=slots.len());
    let mut chosen: Vec<(usize, usize)> = slots.choose_multiple(rng, count).copied().collect();
    chosen.sort_unstable();
    let mut out = p.clone();
    let mut taken: BTreeSet<String> = out.circuit.symbols();
    taken.extend(out.bindings.keys().cloned());
    let mut next = 0usize;
    let mut symbols = BTreeMap::new();
    for (i, k) in chosen {
        let name = loop {
            let candidate = format!("p{next}");
            next += 1;
            if !taken.contains(&candidate) {
                break candidate;
            }
        };
        let Instruction::Gate(g) = &mut out.circuit.instructions[i] else { unreachable!("slots index gates") };
        let value = g.params[k].literal().expect("slot is literal");
        g.params[k] = ParamValue::Symbol(name.clone());
        out.bindings.insert(name.clone(), value);
        symbols.insert(name, value);
    }
    Ok(with_record(out, TransformKind::InjectParams { symbols }))
}

/// Splits a circuit whose interaction graph has several components into two
/// independent sub-programs. Classical bits follow the qubit that last
/// writes them; unmeasured clbits go to the first group.
pub fn apply_partition(
    p: &Program,
    rng: &mut GenRng,
    ctx: &TransformContext,
) -> Result<(Program, Program, TransformRecord), TransformError> {
    check(TransformId::Partition, p, ctx)?;
    let mut components = interaction_components(&p.circuit);
    components.shuffle(rng);
    let split = rng.gen_range(1..components.len());
    let mut groups: [Vec<usize>; 2] =
        [components[..split].concat(), components[split..].concat()];
    groups.iter_mut().for_each(|g| g.sort_unstable());
    let c = &p.circuit;
    let mut qubit_group = vec![0usize; c.n_qubits];
    for &q in &groups[1] {
        qubit_group[q] = 1;
    }
    let mut clbit_group = vec![0usize; c.n_clbits];
    for (q, b) in c.flattened().map_err(|_| TransformError::PreconditionViolated(TransformId::Partition))?.measurements() {
        clbit_group[b] = qubit_group[q];
    }
    let clbits: [Vec<usize>; 2] =
        [0, 1].map(|g| (0..c.n_clbits).filter(|&b| clbit_group[b] == g).collect());
    let mut subs = Vec::new();
    for g in 0..2 {
        let qmap: BTreeMap<usize, usize> = groups[g].iter().enumerate().map(|(i, &q)| (q, i)).collect();
        let cmap: BTreeMap<usize, usize> = clbits[g].iter().enumerate().map(|(i, &b)| (b, i)).collect();
        let mut sub = Circuit::new(groups[g].len(), clbits[g].len());
        for ins in &c.instructions {
            if !ins.qubits().iter().all(|q| qmap.contains_key(q)) {
                continue;
            }
            let mapped = match ins {
                Instruction::Gate(gate) => Instruction::Gate(GateOp {
                    qubits: gate.qubits.iter().map(|q| qmap[q]).collect(),
                    ..gate.clone()
                }),
                Instruction::Measure { qubit, clbit } => match cmap.get(clbit) {
                    Some(&b) => Instruction::Measure { qubit: qmap[qubit], clbit: b },
                    // Overwritten later by the other group.
                    None => continue,
                },
                Instruction::Composite(op) => {
                    let clbits = op
                        .clbits
                        .iter()
                        .map(|b| cmap.get(b).copied())
                        .collect::<Option<Vec<_>>>()
                        .ok_or(TransformError::PreconditionViolated(TransformId::Partition))?;
                    Instruction::Composite(CompositeOp {
                        qubits: op.qubits.iter().map(|q| qmap[q]).collect(),
                        clbits,
                        ..op.clone()
                    })
                }
            };
            sub.instructions.push(mapped);
        }
        let used: BTreeSet<String> = sub
            .instructions
            .iter()
            .filter_map(|i| match i {
                Instruction::Composite(op) => Some(op.sub.clone()),
                _ => None,
            })
            .collect();
        sub.subcircuits = c.subcircuits.iter().filter(|(k, _)| used.contains(*k)).map(|(k, v)| (k.clone(), v.clone())).collect();
        let symbols = sub.symbols();
        let mut program = Program::new(sub, p.config.clone());
        program.bindings = p.bindings.iter().filter(|(k, _)| symbols.contains(*k)).map(|(k, v)| (k.clone(), *v)).collect();
        if g == 1 {
            program.config.seed = p.config.seed.rotate_left(32);
        }
        subs.push(program);
    }
    let kind = TransformKind::Partition { qubits: groups, clbits };
    let record = TransformRecord::new(kind);
    let mut b = subs.pop().expect("two groups");
    let mut a = subs.pop().expect("two groups");
    for prog in [&mut a, &mut b] {
        prog.provenance = p.provenance.clone();
        prog.provenance.push(record.clone());
    }
    Ok((a, b, record))
}

/// Exports the circuit to OpenQASM and re-imports it right before
/// transpilation.
pub fn apply_qasm_roundtrip(p: &Program) -> (Program, TransformRecord) {
    let mut out = p.clone();
    out.config.qasm_roundtrip = true;
    with_record(out, TransformKind::QasmRoundtrip)
}

/// A random connected graph over `n` qubits: a random spanning tree plus a
/// few random extra edges.
pub fn random_coupling_map(n: usize, rng: &mut GenRng) -> CouplingMap {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut edges: BTreeSet<[usize; 2]> = BTreeSet::new();
    for i in 1..n {
        let j = order[rng.gen_range(0..i)];
        let (a, b) = (order[i].min(j), order[i].max(j));
        edges.insert([a, b]);
    }
    if n >= 3 {
        let extra = rng.gen_range(0..=n / 2);
        for _ in 0..extra {
            let a = rng.gen_range(0..n);
            let b = rng.gen_range(0..n);
            if a != b {
                edges.insert([a.min(b), a.max(b)]);
            }
        }
    }
    CouplingMap::new(n, edges.into_iter().collect()).expect("spanning tree is connected")
}

pub fn apply_change_coupling_map(
    p: &Program,
    rng: &mut GenRng,
    ctx: &TransformContext,
) -> Result<(Program, TransformRecord), TransformError> {
    check(TransformId::CouplingMap, p, ctx)?;
    let mut out = p.clone();
    let map = random_coupling_map(p.circuit.n_qubits, rng);
    out.config.coupling_map = Some(map.clone());
    Ok(with_record(out, TransformKind::CouplingMap { map }))
}

pub fn apply_change_gate_set(p: &Program, rng: &mut GenRng) -> (Program, TransformRecord) {
    let set = GATE_SETS[rng.gen_range(0..GATE_SETS.len())];
    let mut out = p.clone();
    out.config.target_gate_set = Some(set.gate_names());
    with_record(out, TransformKind::GateSet { name: set.name.to_string(), gates: set.gate_names() })
}

pub fn apply_change_opt_level(p: &Program, rng: &mut GenRng) -> (Program, TransformRecord) {
    let old = p.config.opt_level;
    let choices: Vec<u8> = (0..=3).filter(|&l| l != old).collect();
    let new = choices[rng.gen_range(0..choices.len())];
    let mut out = p.clone();
    out.config.opt_level = new;
    with_record(out, TransformKind::OptLevel { old, new })
}

pub fn apply_change_backend(
    p: &Program,
    rng: &mut GenRng,
    ctx: &TransformContext,
) -> Result<(Program, TransformRecord), TransformError> {
    check(TransformId::Backend, p, ctx)?;
    let old = p.config.backend_id.clone();
    let choices: Vec<&String> = ctx.backends.iter().filter(|b| **b != old).collect();
    let new = choices[rng.gen_range(0..choices.len())].clone();
    let mut out = p.clone();
    out.config.backend_id = new.clone();
    Ok(with_record(out, TransformKind::Backend { old, new }))
}

/// Applies between 1 and `policy.max_transforms` uniformly sampled
/// transformations whose preconditions hold, stopping right after one that
/// changes the output.
pub fn chain_transforms(
    p: &Program,
    policy: &TransformChainPolicy,
    rng: &mut GenRng,
    ctx: &TransformContext,
) -> (FollowUp, Vec<TransformRecord>) {
    let to_apply = rng.gen_range(1..=policy.max_transforms.max(1));
    let mut current = p.clone();
    let mut records = Vec::new();
    // Preconditions can rule kinds out, so bound the number of draws.
    let mut draws = 0;
    while records.len() < to_apply && draws < 100 * to_apply {
        draws += 1;
        let id = TransformId::ALL[rng.gen_range(0..TransformId::ALL.len())];
        if !precondition(id, &current, ctx) {
            continue;
        }
        let (follow, record) = apply(id, &current, rng, ctx).expect("precondition checked");
        records.push(record.clone());
        match follow {
            FollowUp::Single { program } => current = program,
            partitioned => return (partitioned, records),
        }
        if policy.stop_after_non_preserving && !record.semantics_preserving {
            break;
        }
    }
    (FollowUp::Single { program: current }, records)
}
