//! Leveled optimization passes.
//!
//! | level | passes |
//! |-------|--------|
//! | 0 | none |
//! | 1 | identity removal, adjacent-inverse cancellation |
//! | 2 | level 1 + rotation merging |
//! | 3 | level 2 + commutation-aware cancellation |
//!
//! Passes run to a fixpoint. Each pass only deletes or merges
//! instructions, so the gate count never increases.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::circuit::{Circuit, CircuitError, CompositeOp, GateOp, Instruction, ParamValue};
use crate::defects::{Defect, DefectSet};
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OptimizeError {
    #[error("optimization level {0} outside 0..=3")]
    BadLevel(u8),
    #[error("too many subscripts in einsum: {indices} indices exceed the limit of {limit}")]
    TooManySubscripts { indices: usize, limit: usize },
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

/// The optimization passes in pipeline order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pass {
    IdentityRemoval,
    AdjacentInverseCancellation,
    RotationMerging,
    CommutationCancellation,
}

/// The passes run at `level`; each level extends the previous one.
pub fn pass_pipeline(level: u8) -> Vec<Pass> {
    use Pass::*;
    match level {
        0 => vec![],
        1 => vec![IdentityRemoval, AdjacentInverseCancellation],
        2 => vec![IdentityRemoval, AdjacentInverseCancellation, RotationMerging],
        _ => vec![IdentityRemoval, AdjacentInverseCancellation, RotationMerging, CommutationCancellation],
    }
}

const MAX_ROUNDS: usize = 8;
/// Tolerance for treating a product of unitaries as the identity.
const IDENTITY_TOL: f64 = 1e-12;
/// Largest operand union for which commutation is decided by matrices.
const MAX_COMMUTE_WIDTH: usize = 6;
/// Scratch-space limit of the commutation check (three indices per qubit).
const SUBSCRIPT_LIMIT: usize = 32;

/// Optimizes the top-level instruction list of `c` at `level`.
pub fn optimize(c: &Circuit, level: u8, defects: &DefectSet) -> Result<Circuit, OptimizeError> {
    if level > 3 {
        return Err(OptimizeError::BadLevel(level));
    }
    let passes = pass_pipeline(level);
    let mut out = c.clone();
    for _ in 0..MAX_ROUNDS {
        let before = out.instructions.clone();
        for pass in &passes {
            out.instructions = match pass {
                Pass::IdentityRemoval => remove_identities(&out.instructions),
                Pass::AdjacentInverseCancellation => cancel_adjacent(&out.instructions),
                Pass::RotationMerging => merge_rotations(&out.instructions),
                Pass::CommutationCancellation => cancel_commuting(&out, defects)?,
            };
        }
        if out.instructions == before {
            break;
        }
    }
    Ok(out)
}

fn is_identity(m: &Matrix) -> bool {
    m.approx_eq_up_to_phase(&Matrix::identity(m.dim()), IDENTITY_TOL)
}

fn remove_identities(ins: &[Instruction]) -> Vec<Instruction> {
    ins.iter()
        .filter(|i| match i {
            Instruction::Gate(g) => !g.matrix().map(|m| is_identity(&m)).unwrap_or(false),
            _ => true,
        })
        .cloned()
        .collect()
}

fn params_equal(a: &[ParamValue], b: &[ParamValue]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| match (x, y) {
            (ParamValue::Literal(x), ParamValue::Literal(y)) => (x - y).abs() <= IDENTITY_TOL,
            _ => x == y,
        })
}

/// Structural inverse check: `b` is written exactly as the inverse of `a`.
fn structural_inverse(a: &Instruction, b: &Instruction) -> bool {
    match (a, b) {
        (Instruction::Gate(a), Instruction::Gate(b)) => {
            let inv = a.inverse();
            inv.gate.name == b.gate.name
                && inv.qubits == b.qubits
                && inv.adjoint == b.adjoint
                && params_equal(&inv.params, &b.params)
        }
        (Instruction::Composite(a), Instruction::Composite(b)) => {
            a.sub == b.sub && a.qubits == b.qubits && a.clbits == b.clbits && a.inverted != b.inverted
        }
        _ => false,
    }
}

fn same_qubit_set(a: &[usize], b: &[usize]) -> bool {
    a.len() == b.len() && a.iter().all(|q| b.contains(q))
}

/// Runs `decide(previous, current)` on every pair of instructions that are
/// adjacent on all of their qubits; `Some(replacement)` replaces the pair.
fn fold_adjacent(
    ins: &[Instruction],
    n_qubits: usize,
    mut decide: impl FnMut(&Instruction, &Instruction) -> Option<Vec<Instruction>>,
) -> Vec<Instruction> {
    let mut out: Vec<Option<Instruction>> = Vec::with_capacity(ins.len());
    let mut stacks: Vec<Vec<usize>> = vec![Vec::new(); n_qubits];
    for cur in ins {
        let qs = cur.qubits();
        let tops: BTreeSet<Option<usize>> = qs.iter().map(|&q| stacks[q].last().copied()).collect();
        if let (1, Some(&Some(j))) = (tops.len(), tops.iter().next()) {
            let prev = out[j].as_ref().expect("stack entries are live");
            if !cur.is_measure() && !prev.is_measure() && same_qubit_set(prev.qubits(), qs) {
                if let Some(replacement) = decide(prev, cur) {
                    out[j] = None;
                    for &q in qs {
                        stacks[q].pop();
                    }
                    // A merged instruction takes the place of the pair.
                    for r in replacement {
                        for &q in r.qubits() {
                            stacks[q].push(out.len());
                        }
                        out.push(Some(r));
                    }
                    continue;
                }
            }
        }
        for &q in qs {
            stacks[q].push(out.len());
        }
        out.push(Some(cur.clone()));
    }
    out.into_iter().flatten().collect()
}

fn width(ins: &[Instruction]) -> usize {
    ins.iter().flat_map(|i| i.qubits().iter().copied()).max().map_or(0, |m| m + 1)
}

fn cancel_adjacent(ins: &[Instruction]) -> Vec<Instruction> {
    fold_adjacent(ins, width(ins), |a, b| structural_inverse(a, b).then(Vec::new))
}

fn merge_rotations(ins: &[Instruction]) -> Vec<Instruction> {
    fold_adjacent(ins, width(ins), |a, b| match (a, b) {
        (Instruction::Gate(a), Instruction::Gate(b))
            if a.gate.additive && a.gate.name == b.gate.name && a.qubits == b.qubits && !a.adjoint && !b.adjoint =>
        {
            let (x, y) = (a.params[0].literal()?, b.params[0].literal()?);
            Some(vec![Instruction::Gate(GateOp { params: vec![ParamValue::Literal(x + y)], ..a.clone() })])
        }
        _ => None,
    })
}

/// The unitary of an instruction on its own operands, or `None` when the
/// instruction is not analyzable (measurements, unbound parameters).
fn local_unitary(c: &Circuit, ins: &Instruction) -> Option<Matrix> {
    match ins {
        Instruction::Gate(g) => g.matrix().ok(),
        Instruction::Composite(op) => composite_unitary(c, op),
        Instruction::Measure { .. } => None,
    }
}

fn composite_unitary(c: &Circuit, op: &CompositeOp) -> Option<Matrix> {
    let sub = c.subcircuits.get(&op.sub)?;
    let body = if op.inverted { crate::circuit::inverse_circuit(sub).ok()? } else { sub.clone() };
    let flat = body.flattened().ok()?;
    let n = flat.n_qubits;
    flat.instructions.iter().try_fold(Matrix::identity(1 << n), |acc, i| match i {
        Instruction::Gate(g) => Some(g.matrix().ok()?.embed(&g.qubits, n).mul(&acc)),
        _ => None,
    })
}

/// Embeds an instruction's unitary into the register spanned by `union`.
fn on_union(m: &Matrix, qubits: &[usize], union: &[usize]) -> Matrix {
    let local: Vec<usize> = qubits.iter().map(|q| union.iter().position(|u| u == q).expect("in union")).collect();
    m.embed(&local, union.len())
}

/// Whether the instruction may take part in commutation analysis. Wide
/// subcircuits are opaque to the pass; the commutation-overflow defect lets
/// them through.
fn analyzable(ins: &Instruction, defects: &DefectSet) -> bool {
    match ins {
        Instruction::Gate(g) => g.bound_params().is_ok(),
        Instruction::Composite(_) => defects.contains(Defect::CommutationOverflow),
        Instruction::Measure { .. } => false,
    }
}

enum Relation {
    Inverse,
    Commute,
    Blocked,
}

/// Decides how `prev` relates to the later instruction `cur`.
fn relate(c: &Circuit, prev: &Instruction, cur: &Instruction) -> Result<Relation, OptimizeError> {
    let union: Vec<usize> =
        prev.qubits().iter().chain(cur.qubits()).copied().collect::<BTreeSet<_>>().into_iter().collect();
    let indices = 3 * union.len();
    if indices > SUBSCRIPT_LIMIT {
        return Err(OptimizeError::TooManySubscripts { indices, limit: SUBSCRIPT_LIMIT });
    }
    if structural_inverse(prev, cur) {
        return Ok(Relation::Inverse);
    }
    if union.len() > MAX_COMMUTE_WIDTH {
        return Ok(Relation::Blocked);
    }
    let (Some(a), Some(b)) = (local_unitary(c, prev), local_unitary(c, cur)) else {
        return Ok(Relation::Blocked);
    };
    let a = on_union(&a, prev.qubits(), &union);
    let b = on_union(&b, cur.qubits(), &union);
    let ba = b.mul(&a);
    if same_qubit_set(prev.qubits(), cur.qubits()) && is_identity(&ba) {
        return Ok(Relation::Inverse);
    }
    if ba.max_abs_diff(&a.mul(&b)) < IDENTITY_TOL {
        return Ok(Relation::Commute);
    }
    Ok(Relation::Blocked)
}

/// Cancels an instruction against an earlier inverse that it can be
/// commuted back to.
fn cancel_commuting(c: &Circuit, defects: &DefectSet) -> Result<Vec<Instruction>, OptimizeError> {
    let mut out: Vec<Option<Instruction>> = Vec::with_capacity(c.instructions.len());
    'next: for cur in &c.instructions {
        if analyzable(cur, defects) {
            for j in (0..out.len()).rev() {
                let Some(prev) = &out[j] else { continue };
                if !prev.qubits().iter().any(|q| cur.qubits().contains(q)) {
                    continue;
                }
                if !analyzable(prev, defects) {
                    break;
                }
                match relate(c, prev, cur)? {
                    Relation::Inverse => {
                        out[j] = None;
                        continue 'next;
                    }
                    Relation::Commute => {}
                    Relation::Blocked => break,
                }
            }
        }
        out.push(Some(cur.clone()));
    }
    Ok(out.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{expand_gate_ops, rng_from_seed};

    fn unitary(c: &Circuit) -> Matrix {
        let flat = c.flattened().unwrap();
        flat.instructions.iter().fold(Matrix::identity(1 << c.n_qubits), |acc, i| match i {
            Instruction::Gate(g) => g.matrix().unwrap().embed(&g.qubits, c.n_qubits).mul(&acc),
            _ => acc,
        })
    }

    fn none() -> DefectSet {
        DefectSet::none()
    }

    #[test]
    fn pipelines_grow_with_level() {
        assert!(pass_pipeline(0).is_empty());
        for l in 1..=3u8 {
            let lower = pass_pipeline(l - 1);
            let higher = pass_pipeline(l);
            assert!(lower.iter().all(|p| higher.contains(p)));
            assert!(higher.len() > lower.len());
        }
    }

    #[test]
    fn double_x_cancels() {
        let mut c = Circuit::new(1, 0);
        c.gate("x", &[], &[0]).gate("x", &[], &[0]);
        for level in 1..=3 {
            assert!(optimize(&c, level, &none()).unwrap().instructions.is_empty());
        }
        assert_eq!(optimize(&c, 0, &none()).unwrap(), c);
    }

    #[test]
    fn rotations_merge() {
        let mut c = Circuit::new(1, 0);
        c.gate("rz", &[0.3], &[0]).gate("rz", &[0.4], &[0]);
        let o = optimize(&c, 2, &none()).unwrap();
        assert_eq!(o.instructions, vec![Instruction::gate("rz", &[0.3 + 0.4], &[0])]);
        assert_eq!(optimize(&c, 1, &none()).unwrap(), c);
    }

    #[test]
    fn commuting_gates_let_inverses_meet() {
        // rz on the control commutes with cx, so the two cx gates meet.
        let mut c = Circuit::new(2, 0);
        c.gate("z", &[], &[0]).gate("cx", &[], &[0, 1]).gate("rz", &[0.2], &[0]).gate("cx", &[], &[0, 1]);
        let o = optimize(&c, 3, &none()).unwrap();
        assert!(o.gate_count() < c.gate_count());
        assert!(unitary(&o).approx_eq_up_to_phase(&unitary(&c), 1e-9));
        assert_eq!(optimize(&c, 2, &none()).unwrap().gate_count(), c.gate_count());
    }

    #[test]
    fn measures_are_kept() {
        let mut c = Circuit::new(2, 1);
        c.gate("x", &[], &[1]).measure(0, 0).gate("x", &[], &[1]);
        assert_eq!(optimize(&c, 3, &none()).unwrap().instructions, vec![Instruction::Measure { qubit: 0, clbit: 0 }]);
        let mut c = Circuit::new(1, 1);
        c.gate("h", &[], &[0]).measure(0, 0);
        assert_eq!(optimize(&c, 3, &none()).unwrap(), c);
    }

    #[test]
    fn random_circuits_keep_their_unitary() {
        let mut rng = rng_from_seed(9);
        for round in 0..200 {
            let n = 1 + round % 4;
            let mut c = Circuit::new(n, 0);
            c.instructions = expand_gate_ops(n, 30, &mut rng);
            // Mirror a prefix so that cancellations actually happen.
            let k = c.instructions.len() / 2;
            let tail: Vec<_> = c.instructions[..k].iter().rev().map(|i| match i {
                Instruction::Gate(g) => Instruction::Gate(g.inverse()),
                other => other.clone(),
            }).collect();
            c.instructions.extend(tail);
            let u = unitary(&c);
            for level in 0..=3 {
                let o = optimize(&c, level, &none()).unwrap();
                assert!(o.gate_count() <= c.gate_count());
                assert!(unitary(&o).approx_eq_up_to_phase(&u, 1e-7), "round {round} level {level}");
            }
        }
    }

    fn wide_composite_pair(n: usize) -> Circuit {
        let mut sub = Circuit::new(n, 0);
        sub.gate("h", &[], &[0]).gate("cx", &[], &[0, n - 1]);
        let mut c = Circuit::new(n, n);
        c.subcircuits.insert("subcirc_0".into(), sub.clone());
        c.subcircuits.insert("subcirc_0_dg".into(), crate::circuit::inverse_circuit(&sub).unwrap());
        let all: Vec<usize> = (0..n).collect();
        c.gate("x", &[], &[1]);
        for name in ["subcirc_0", "subcirc_0_dg"] {
            c.push(Instruction::Composite(CompositeOp { sub: name.into(), qubits: all.clone(), clbits: vec![], inverted: false }));
        }
        c.measure_all();
        c
    }

    #[test]
    fn wide_subcircuits_are_opaque() {
        let c = wide_composite_pair(11);
        assert_eq!(optimize(&c, 3, &none()).unwrap(), c);
    }

    #[test]
    fn overflow_defect_trips_at_eleven_qubits() {
        let defect = DefectSet::only(Defect::CommutationOverflow);
        let e = optimize(&wide_composite_pair(11), 3, &defect).unwrap_err();
        assert_eq!(e.to_string(), "too many subscripts in einsum: 33 indices exceed the limit of 32");
        // Ten qubits still fit; the defect is silent there.
        assert!(optimize(&wide_composite_pair(10), 3, &defect).is_ok());
        assert!(optimize(&wide_composite_pair(11), 2, &defect).is_ok());
    }
}
