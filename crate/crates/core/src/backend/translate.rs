//! Gate-set translation by a fixed table of rewrite rules.
//!
//! Every catalog gate is first lowered to `{u, cx}`; the `u` gates are then
//! rewritten into the target set. All rules are exact up to global phase.

use std::collections::BTreeSet;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use thiserror::Error;

use crate::circuit::gates::pauli_x;
use crate::circuit::{gate, Circuit, CircuitError, GateOp, Instruction};
use crate::defects::{Defect, DefectSet};
use crate::linalg::{euler_zyz, sqrt_2x2, Matrix};

/// A named universal gate set the translator can target.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GateSet {
    pub name: &'static str,
    pub gates: &'static [&'static str],
}

pub const GATE_SETS: [GateSet; 3] = [
    GateSet { name: "U1", gates: &["rx", "ry", "rz", "p", "cx"] },
    GateSet { name: "U2", gates: &["rz", "sx", "x", "cx"] },
    GateSet { name: "U3", gates: &["u", "cx"] },
];

impl GateSet {
    pub fn named(name: &str) -> Option<GateSet> {
        GATE_SETS.iter().copied().find(|s| s.name == name)
    }

    /// The registered set containing exactly `gates` (order-insensitive).
    pub fn matching(gates: &[String]) -> Option<GateSet> {
        let wanted: BTreeSet<&str> = gates.iter().map(String::as_str).collect();
        GATE_SETS.iter().copied().find(|s| s.gates.iter().copied().collect::<BTreeSet<_>>() == wanted)
    }

    pub fn gate_names(&self) -> Vec<String> {
        self.gates.iter().map(|g| g.to_string()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TranslateError {
    #[error("no registered universal gate set equals [{0}]")]
    UnknownGateSet(String),
    #[error("Cannot translate '{gate}' to basis '{basis}': no decomposition rule")]
    NoDecompositionRule { gate: String, basis: String },
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

/// Rewrites `c` (composites expanded) so that it only uses `target` gates
/// plus measurements.
pub fn translate_to_gate_set(c: &Circuit, target: &[String], defects: &DefectSet) -> Result<Circuit, TranslateError> {
    let set = GateSet::matching(target).ok_or_else(|| TranslateError::UnknownGateSet(target.join(", ")))?;
    let flat = c.flattened()?;
    let mut out = Circuit::new(c.n_qubits, c.n_clbits);
    for ins in flat.instructions {
        match ins {
            Instruction::Gate(g) => {
                if g.gate.name == "id" && defects.contains(Defect::MissingIdRule) {
                    return Err(TranslateError::NoDecompositionRule { gate: "id".into(), basis: set.name.into() });
                }
                for low in lower(&g)? {
                    out.instructions.extend(to_target(&low, set)?.into_iter().map(Instruction::Gate));
                }
            }
            other => out.instructions.push(other),
        }
    }
    Ok(out)
}

fn op(name: &str, params: &[f64], qubits: &[usize]) -> GateOp {
    GateOp::lit(name, params, qubits)
}

/// `u(θ,φ,λ)` and `cx` into the target set.
fn to_target(g: &GateOp, set: GateSet) -> Result<Vec<GateOp>, TranslateError> {
    if g.gate.name == "cx" || set.name == "U3" {
        return Ok(vec![g.clone()]);
    }
    let p = g.bound_params()?;
    let (theta, phi, lambda) = (p[0], p[1], p[2]);
    let q = &g.qubits[..];
    Ok(match set.name {
        "U1" => vec![op("rz", &[lambda], q), op("ry", &[theta], q), op("rz", &[phi], q)],
        _ => vec![
            op("rz", &[lambda], q),
            op("sx", &[], q),
            op("rz", &[theta + PI], q),
            op("sx", &[], q),
            op("rz", &[phi + PI], q),
        ],
    })
}

/// Lowers one gate to `{u, cx}`, exact up to global phase.
pub fn lower(g: &GateOp) -> Result<Vec<GateOp>, CircuitError> {
    let name = g.gate.name;
    if g.adjoint {
        let forward = GateOp { adjoint: false, ..g.clone() };
        return Ok(lower(&forward)?.iter().rev().map(GateOp::inverse).collect());
    }
    if name == "u" || name == "cx" {
        return Ok(vec![g.clone()]);
    }
    let p = g.bound_params()?;
    let q = &g.qubits;
    if g.gate.arity == 1 {
        if name == "id" {
            return Ok(Vec::new());
        }
        let (theta, phi, lambda, _) = euler_zyz(&g.matrix()?);
        return Ok(vec![op("u", &[theta, phi, lambda], q)]);
    }
    let rule = rule(name, &p, q);
    let mut out = Vec::new();
    for step in rule {
        out.extend(lower(&step)?);
    }
    Ok(out)
}

/// One rewrite step into gates that are simpler (fewer qubits or closer to
/// `{u, cx}`).
fn rule(name: &str, p: &[f64], q: &[usize]) -> Vec<GateOp> {
    let a = q[0];
    let b = q.get(1).copied().unwrap_or(0);
    match name {
        "cy" => vec![op("sdg", &[], &[b]), op("cx", &[], &[a, b]), op("s", &[], &[b])],
        "cz" => vec![op("h", &[], &[b]), op("cx", &[], &[a, b]), op("h", &[], &[b])],
        "ch" => vec![
            op("s", &[], &[b]),
            op("h", &[], &[b]),
            op("t", &[], &[b]),
            op("cx", &[], &[a, b]),
            op("tdg", &[], &[b]),
            op("h", &[], &[b]),
            op("sdg", &[], &[b]),
        ],
        "swap" => vec![op("cx", &[], &[a, b]), op("cx", &[], &[b, a]), op("cx", &[], &[a, b])],
        "iswap" => vec![
            op("s", &[], &[a]),
            op("s", &[], &[b]),
            op("h", &[], &[a]),
            op("cx", &[], &[a, b]),
            op("cx", &[], &[b, a]),
            op("h", &[], &[b]),
        ],
        "dcx" => vec![op("cx", &[], &[a, b]), op("cx", &[], &[b, a])],
        "ecr" => vec![op("rzx", &[FRAC_PI_4], &[a, b]), op("x", &[], &[a]), op("rzx", &[-FRAC_PI_4], &[a, b])],
        "csx" => vec![op("h", &[], &[b]), op("cp", &[FRAC_PI_2], &[a, b]), op("h", &[], &[b])],
        "crx" => vec![op("h", &[], &[b]), op("crz", &[p[0]], &[a, b]), op("h", &[], &[b])],
        "cry" => vec![
            op("ry", &[p[0] / 2.0], &[b]),
            op("cx", &[], &[a, b]),
            op("ry", &[-p[0] / 2.0], &[b]),
            op("cx", &[], &[a, b]),
        ],
        "crz" => vec![
            op("rz", &[p[0] / 2.0], &[b]),
            op("cx", &[], &[a, b]),
            op("rz", &[-p[0] / 2.0], &[b]),
            op("cx", &[], &[a, b]),
        ],
        "cp" => vec![
            op("p", &[p[0] / 2.0], &[a]),
            op("cx", &[], &[a, b]),
            op("p", &[-p[0] / 2.0], &[b]),
            op("cx", &[], &[a, b]),
            op("p", &[p[0] / 2.0], &[b]),
        ],
        "cu" => {
            let (theta, phi, lambda, gamma) = (p[0], p[1], p[2], p[3]);
            vec![
                op("p", &[gamma], &[a]),
                op("p", &[(lambda + phi) / 2.0], &[a]),
                op("p", &[(lambda - phi) / 2.0], &[b]),
                op("cx", &[], &[a, b]),
                op("u", &[-theta / 2.0, 0.0, -(phi + lambda) / 2.0], &[b]),
                op("cx", &[], &[a, b]),
                op("u", &[theta / 2.0, phi, 0.0], &[b]),
            ]
        }
        "rxx" => vec![
            op("h", &[], &[a]),
            op("h", &[], &[b]),
            op("cx", &[], &[a, b]),
            op("rz", &[p[0]], &[b]),
            op("cx", &[], &[a, b]),
            op("h", &[], &[a]),
            op("h", &[], &[b]),
        ],
        "ryy" => vec![
            op("rx", &[FRAC_PI_2], &[a]),
            op("rx", &[FRAC_PI_2], &[b]),
            op("cx", &[], &[a, b]),
            op("rz", &[p[0]], &[b]),
            op("cx", &[], &[a, b]),
            op("rx", &[-FRAC_PI_2], &[a]),
            op("rx", &[-FRAC_PI_2], &[b]),
        ],
        "rzz" => vec![op("cx", &[], &[a, b]), op("rz", &[p[0]], &[b]), op("cx", &[], &[a, b])],
        "rzx" => vec![
            op("h", &[], &[b]),
            op("cx", &[], &[a, b]),
            op("rz", &[p[0]], &[b]),
            op("cx", &[], &[a, b]),
            op("h", &[], &[b]),
        ],
        "ccx" => toffoli(q[0], q[1], q[2]),
        "cswap" => {
            let c = q[2];
            let mut v = vec![op("cx", &[], &[c, b])];
            v.extend(toffoli(a, b, c));
            v.push(op("cx", &[], &[c, b]));
            v
        }
        "ccz" => {
            let c = q[2];
            let mut v = vec![op("h", &[], &[c])];
            v.extend(toffoli(a, b, c));
            v.push(op("h", &[], &[c]));
            v
        }
        "rccx" => {
            let c = q[2];
            vec![
                op("u2", &[0.0, PI], &[c]),
                op("p", &[FRAC_PI_4], &[c]),
                op("cx", &[], &[b, c]),
                op("p", &[-FRAC_PI_4], &[c]),
                op("cx", &[], &[a, c]),
                op("p", &[FRAC_PI_4], &[c]),
                op("cx", &[], &[b, c]),
                op("p", &[-FRAC_PI_4], &[c]),
                op("u2", &[0.0, PI], &[c]),
            ]
        }
        "c3x" | "c4x" => multi_controlled(&q[..q.len() - 1], q[q.len() - 1], &pauli_x()),
        "c3sx" => multi_controlled(&q[..3], q[3], &gate("sx").expect("sx in catalog").unitary(&[])),
        other => unreachable!("no rewrite rule for '{other}'"),
    }
}

/// The standard 15-gate Toffoli circuit (controls `a`, `b`, target `c`).
fn toffoli(a: usize, b: usize, c: usize) -> Vec<GateOp> {
    vec![
        op("h", &[], &[c]),
        op("cx", &[], &[b, c]),
        op("tdg", &[], &[c]),
        op("cx", &[], &[a, c]),
        op("t", &[], &[c]),
        op("cx", &[], &[b, c]),
        op("tdg", &[], &[c]),
        op("cx", &[], &[a, c]),
        op("t", &[], &[b]),
        op("t", &[], &[c]),
        op("h", &[], &[c]),
        op("cx", &[], &[a, b]),
        op("t", &[], &[a]),
        op("tdg", &[], &[b]),
        op("cx", &[], &[a, b]),
    ]
}

fn is_pauli_x(u: &Matrix) -> bool {
    u.max_abs_diff(&pauli_x()) < 1e-12
}

/// `u` on `target` controlled by all of `controls`, built recursively from
/// square roots: `C(V) · C^{k-1}X · C(V†) · C^{k-1}X · C^{k-1}(V)`.
fn multi_controlled(controls: &[usize], target: usize, u: &Matrix) -> Vec<GateOp> {
    match controls.len() {
        1 if is_pauli_x(u) => return vec![op("cx", &[], &[controls[0], target])],
        2 if is_pauli_x(u) => return vec![op("ccx", &[], &[controls[0], controls[1], target])],
        1 => {
            let (theta, phi, lambda, alpha) = euler_zyz(u);
            return vec![op("cu", &[theta, phi, lambda, alpha], &[controls[0], target])];
        }
        _ => {}
    }
    let (last, rest) = controls.split_last().expect("at least two controls");
    let v = sqrt_2x2(u);
    let mut out = multi_controlled(&[*last], target, &v);
    out.extend(multi_controlled(rest, *last, &pauli_x()));
    out.extend(multi_controlled(&[*last], target, &v.adjoint()));
    out.extend(multi_controlled(rest, *last, &pauli_x()));
    out.extend(multi_controlled(rest, target, &v));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::gates::catalog;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Unitary of a gate list over `n` qubits.
    fn unitary(ops: &[GateOp], n: usize) -> Matrix {
        ops.iter().fold(Matrix::identity(1 << n), |acc, g| g.matrix().unwrap().embed(&g.qubits, n).mul(&acc))
    }

    fn random_op(spec: &crate::circuit::gates::GateSpec, rng: &mut ChaCha8Rng, adjoint: bool) -> GateOp {
        let params: Vec<f64> = (0..spec.param_count).map(|_| rng.gen_range(-7.0..7.0)).collect();
        // Reverse the operands so the rules are checked off the identity layout.
        let qubits: Vec<usize> = (0..spec.arity).rev().collect();
        let mut g = GateOp::lit(spec.name, &params, &qubits);
        g.adjoint = adjoint;
        g
    }

    #[test]
    fn every_rule_is_exact_up_to_phase() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for spec in catalog().iter() {
            for trial in 0..20 {
                let g = random_op(spec, &mut rng, trial % 2 == 1);
                let n = spec.arity;
                let expected = g.matrix().unwrap().embed(&g.qubits, n);
                let low = lower(&g).unwrap();
                assert!(low.iter().all(|x| matches!(x.gate.name, "u" | "cx") && !x.adjoint), "{}", spec.name);
                assert!(unitary(&low, n).approx_eq_up_to_phase(&expected, 1e-7), "rule for {} (adjoint {})", spec.name, g.adjoint);
                for set in GATE_SETS {
                    let mut c = Circuit::new(n, 0);
                    c.push(Instruction::Gate(g.clone()));
                    let t = translate_to_gate_set(&c, &set.gate_names(), &DefectSet::none()).unwrap();
                    let ops: Vec<GateOp> = t
                        .instructions
                        .iter()
                        .map(|i| match i {
                            Instruction::Gate(g) => g.clone(),
                            _ => unreachable!(),
                        })
                        .collect();
                    assert!(ops.iter().all(|o| set.gates.contains(&o.gate.name)));
                    assert!(unitary(&ops, n).approx_eq_up_to_phase(&expected, 1e-7), "{} in {}", spec.name, set.name);
                }
            }
        }
    }

    #[test]
    fn hadamard_under_u1() {
        let mut c = Circuit::new(1, 1);
        c.gate("h", &[], &[0]).measure(0, 0);
        let t = translate_to_gate_set(&c, &GateSet::named("U1").unwrap().gate_names(), &DefectSet::none()).unwrap();
        let names: Vec<&str> = t
            .instructions
            .iter()
            .filter_map(|i| match i {
                Instruction::Gate(g) => Some(g.gate.name),
                _ => None,
            })
            .collect();
        assert_eq!(names, ["rz", "ry", "rz"]);
        assert!(t.instructions.last().unwrap().is_measure());
    }

    #[test]
    fn identity_gate_is_dropped_or_fails_under_defect() {
        let mut c = Circuit::new(1, 0);
        c.gate("id", &[], &[0]);
        let u1 = GateSet::named("U1").unwrap().gate_names();
        assert!(translate_to_gate_set(&c, &u1, &DefectSet::none()).unwrap().instructions.is_empty());
        let e = translate_to_gate_set(&c, &u1, &DefectSet::only(Defect::MissingIdRule)).unwrap_err();
        assert_eq!(e.to_string(), "Cannot translate 'id' to basis 'U1': no decomposition rule");
    }

    #[test]
    fn gate_set_lookup_ignores_order() {
        let set = GateSet::matching(&["cx".into(), "u".into()]).unwrap();
        assert_eq!(set.name, "U3");
        assert!(GateSet::matching(&["h".into(), "cx".into()]).is_none());
    }
}
