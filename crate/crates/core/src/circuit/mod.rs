//! Quantum program representation: gates, circuits with named
//! subcircuits, symbolic parameters, and execution configuration.

pub mod gates;
mod program;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Matrix;
pub use gates::{catalog, gate, GateCatalog, GateSpec, InverseRule};
pub use program::{CouplingMap, CouplingMapError, ExecConfig, Program};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CircuitError {
    #[error("unknown gate '{0}'")]
    UnknownGate(String),
    #[error("gate '{gate}' acts on {expected} qubits but got {found}")]
    WrongArity { gate: String, expected: usize, found: usize },
    #[error("gate '{gate}' takes {expected} parameters but got {found}")]
    WrongParamCount { gate: String, expected: usize, found: usize },
    #[error("qubit index {index} out of range for {size} qubits")]
    QubitOutOfRange { index: usize, size: usize },
    #[error("clbit index {index} out of range for {size} clbits")]
    ClbitOutOfRange { index: usize, size: usize },
    #[error("qubit {0} used twice by one instruction")]
    DuplicateQubit(usize),
    #[error("unknown subcircuit '{0}'")]
    UnknownSubcircuit(String),
    #[error("composite '{name}' expects {expected_q} qubits and {expected_c} clbits, got {found_q} and {found_c}")]
    CompositeShape { name: String, expected_q: usize, expected_c: usize, found_q: usize, found_c: usize },
    #[error("operation on qubit {0} after it was measured")]
    OperationAfterMeasure(usize),
    #[error("invalid parameter symbol '{0}'")]
    InvalidSymbol(String),
    #[error("non-finite parameter value")]
    NonFiniteParameter,
    #[error("circuit contains a measurement and cannot be inverted")]
    MeasurementNotInvertible,
    #[error("unbound parameter '{0}'")]
    UnboundParameter(String),
}

/// A gate angle: a literal in radians or a named free parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Literal(f64),
    Symbol(String),
}

impl ParamValue {
    pub fn literal(&self) -> Option<f64> {
        match self {
            ParamValue::Literal(v) => Some(*v),
            ParamValue::Symbol(_) => None,
        }
    }
}

impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Literal(v)
    }
}

/// `[a-z][a-z0-9_]*`
pub fn is_valid_symbol(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some('a'..='z')) && chars.all(|c| matches!(c, 'a'..='z' | '0'..='9' | '_'))
}

#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct GateOp {
    #[serde(with = "gate_by_name")]
    pub gate: &'static GateSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub params: Vec<ParamValue>,
    pub qubits: Vec<usize>,
    /// Apply the conjugate transpose of the gate.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub adjoint: bool,
}

impl fmt::Debug for GateOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.gate.name)?;
        if self.adjoint {
            write!(f, "†")?;
        }
        if !self.params.is_empty() {
            write!(f, "{:?}", self.params)?;
        }
        write!(f, " {:?}", self.qubits)
    }
}

impl GateOp {
    pub fn new(name: &str, params: Vec<ParamValue>, qubits: Vec<usize>) -> Result<Self, CircuitError> {
        let spec = gate(name).ok_or_else(|| CircuitError::UnknownGate(name.to_string()))?;
        let op = GateOp { gate: spec, params, qubits, adjoint: false };
        op.check_shape()?;
        Ok(op)
    }

    /// A gate with literal angles. Panics on unknown names or bad shapes;
    /// meant for fixed circuits in code and tests.
    pub fn lit(name: &str, params: &[f64], qubits: &[usize]) -> Self {
        Self::new(name, params.iter().map(|&p| ParamValue::Literal(p)).collect(), qubits.to_vec())
            .unwrap_or_else(|e| panic!("bad gate {name}: {e}"))
    }

    fn check_shape(&self) -> Result<(), CircuitError> {
        if self.qubits.len() != self.gate.arity {
            return Err(CircuitError::WrongArity {
                gate: self.gate.name.to_string(),
                expected: self.gate.arity,
                found: self.qubits.len(),
            });
        }
        if self.params.len() != self.gate.param_count {
            return Err(CircuitError::WrongParamCount {
                gate: self.gate.name.to_string(),
                expected: self.gate.param_count,
                found: self.params.len(),
            });
        }
        Ok(())
    }

    /// Literal parameter values, or the first unbound symbol.
    pub fn bound_params(&self) -> Result<Vec<f64>, CircuitError> {
        self.params
            .iter()
            .map(|p| match p {
                ParamValue::Literal(v) => Ok(*v),
                ParamValue::Symbol(s) => Err(CircuitError::UnboundParameter(s.clone())),
            })
            .collect()
    }

    /// The unitary this instruction applies, adjoint included.
    pub fn matrix(&self) -> Result<Matrix, CircuitError> {
        let m = self.gate.unitary(&self.bound_params()?);
        Ok(if self.adjoint { m.adjoint() } else { m })
    }

    /// The instruction undoing this one.
    pub fn inverse(&self) -> GateOp {
        if self.adjoint {
            return GateOp { adjoint: false, ..self.clone() };
        }
        let marker = || GateOp { adjoint: true, ..self.clone() };
        let Ok(values) = self.bound_params() else {
            // Symbolic angles: only parameter-free rewrites are safe.
            return match self.gate.inverse {
                InverseRule::SelfInverse | InverseRule::Partner(_) | InverseRule::SwapOperands => {
                    let (spec, _, swapped) = gates::catalog_inverse(self.gate, &[]).expect("catalog inverse");
                    let params = if self.gate.param_count == 0 { Vec::new() } else { self.params.clone() };
                    let mut qubits = self.qubits.clone();
                    if swapped {
                        qubits.reverse();
                    }
                    GateOp { gate: spec, params, qubits, adjoint: false }
                }
                _ => marker(),
            };
        };
        match gates::catalog_inverse(self.gate, &values) {
            Some((spec, params, swapped)) => {
                let mut qubits = self.qubits.clone();
                if swapped {
                    qubits.reverse();
                }
                GateOp { gate: spec, params: params.into_iter().map(ParamValue::Literal).collect(), qubits, adjoint: false }
            }
            None => marker(),
        }
    }

    pub fn symbols(&self) -> impl Iterator<Item = &str> {
        self.params.iter().filter_map(|p| match p {
            ParamValue::Symbol(s) => Some(s.as_str()),
            ParamValue::Literal(_) => None,
        })
    }
}

/// Application of a named subcircuit, optionally inverted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompositeOp {
    pub sub: String,
    pub qubits: Vec<usize>,
    #[serde(default)]
    pub clbits: Vec<usize>,
    #[serde(default)]
    pub inverted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Instruction {
    Gate(GateOp),
    Measure { qubit: usize, clbit: usize },
    Composite(CompositeOp),
}

impl Instruction {
    pub fn gate(name: &str, params: &[f64], qubits: &[usize]) -> Self {
        Instruction::Gate(GateOp::lit(name, params, qubits))
    }

    pub fn qubits(&self) -> &[usize] {
        match self {
            Instruction::Gate(g) => &g.qubits,
            Instruction::Measure { qubit, .. } => std::slice::from_ref(qubit),
            Instruction::Composite(c) => &c.qubits,
        }
    }

    pub fn is_measure(&self) -> bool {
        matches!(self, Instruction::Measure { .. })
    }
}

/// Ordered instructions over flat quantum and classical registers.
///
/// A `Composite` refers to an entry of the `subcircuits` table of the
/// circuit that contains it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub n_qubits: usize,
    pub n_clbits: usize,
    pub instructions: Vec<Instruction>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub subcircuits: BTreeMap<String, Circuit>,
}

impl Circuit {
    pub fn new(n_qubits: usize, n_clbits: usize) -> Self {
        Circuit { n_qubits, n_clbits, instructions: Vec::new(), subcircuits: BTreeMap::new() }
    }

    pub fn push(&mut self, instruction: Instruction) -> &mut Self {
        self.instructions.push(instruction);
        self
    }

    /// Appends a literal-parameter gate. Panics on unknown gates.
    pub fn gate(&mut self, name: &str, params: &[f64], qubits: &[usize]) -> &mut Self {
        self.push(Instruction::gate(name, params, qubits))
    }

    pub fn measure(&mut self, qubit: usize, clbit: usize) -> &mut Self {
        self.push(Instruction::Measure { qubit, clbit })
    }

    /// Measures qubit `i` into clbit `i` for every qubit.
    pub fn measure_all(&mut self) -> &mut Self {
        for q in 0..self.n_qubits.min(self.n_clbits) {
            self.measure(q, q);
        }
        self
    }

    /// Number of non-measurement instructions at the top level.
    pub fn gate_count(&self) -> usize {
        self.instructions.iter().filter(|i| !i.is_measure()).count()
    }

    pub fn has_measure(&self) -> bool {
        self.instructions.iter().any(Instruction::is_measure)
            || self.subcircuits.values().any(Circuit::has_measure)
    }

    /// Index of the first top-level measurement (or the length when none).
    pub fn measurement_start(&self) -> usize {
        self.instructions.iter().position(Instruction::is_measure).unwrap_or(self.instructions.len())
    }

    /// `(qubit, clbit)` pairs of all top-level measurements, in order.
    pub fn measurements(&self) -> Vec<(usize, usize)> {
        self.instructions
            .iter()
            .filter_map(|i| match i {
                Instruction::Measure { qubit, clbit } => Some((*qubit, *clbit)),
                _ => None,
            })
            .collect()
    }

    /// Free parameter names, including those inside subcircuits.
    pub fn symbols(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_symbols(&mut out);
        out
    }

    fn collect_symbols(&self, out: &mut BTreeSet<String>) {
        for ins in &self.instructions {
            if let Instruction::Gate(g) = ins {
                out.extend(g.symbols().map(str::to_string));
            }
        }
        for sub in self.subcircuits.values() {
            sub.collect_symbols(out);
        }
    }

    /// Checks index bounds, gate shapes, composite shapes, symbol names,
    /// and the rule that nothing touches a qubit after it is measured.
    pub fn validate(&self) -> Result<(), CircuitError> {
        let mut measured = vec![false; self.n_qubits];
        for ins in &self.instructions {
            let qubits = ins.qubits();
            let mut seen = BTreeSet::new();
            for &q in qubits {
                if q >= self.n_qubits {
                    return Err(CircuitError::QubitOutOfRange { index: q, size: self.n_qubits });
                }
                if !seen.insert(q) {
                    return Err(CircuitError::DuplicateQubit(q));
                }
            }
            match ins {
                Instruction::Gate(g) => {
                    g.check_shape()?;
                    for p in &g.params {
                        match p {
                            ParamValue::Literal(v) if !v.is_finite() => return Err(CircuitError::NonFiniteParameter),
                            ParamValue::Symbol(s) if !is_valid_symbol(s) => {
                                return Err(CircuitError::InvalidSymbol(s.clone()))
                            }
                            _ => {}
                        }
                    }
                }
                Instruction::Measure { clbit, .. } => {
                    if *clbit >= self.n_clbits {
                        return Err(CircuitError::ClbitOutOfRange { index: *clbit, size: self.n_clbits });
                    }
                }
                Instruction::Composite(c) => {
                    let sub = self
                        .subcircuits
                        .get(&c.sub)
                        .ok_or_else(|| CircuitError::UnknownSubcircuit(c.sub.clone()))?;
                    if sub.n_qubits != c.qubits.len() || sub.n_clbits != c.clbits.len() {
                        return Err(CircuitError::CompositeShape {
                            name: c.sub.clone(),
                            expected_q: sub.n_qubits,
                            expected_c: sub.n_clbits,
                            found_q: c.qubits.len(),
                            found_c: c.clbits.len(),
                        });
                    }
                    let mut seen_c = BTreeSet::new();
                    for &b in &c.clbits {
                        if b >= self.n_clbits {
                            return Err(CircuitError::ClbitOutOfRange { index: b, size: self.n_clbits });
                        }
                        if !seen_c.insert(b) {
                            return Err(CircuitError::DuplicateQubit(b));
                        }
                    }
                }
            }
            if !ins.is_measure() {
                if let Some(&q) = qubits.iter().find(|&&q| measured[q]) {
                    return Err(CircuitError::OperationAfterMeasure(q));
                }
            } else {
                measured[qubits[0]] = true;
            }
        }
        for sub in self.subcircuits.values() {
            sub.validate()?;
        }
        Ok(())
    }

    /// Replaces every composite by its (possibly inverted) body, recursively.
    pub fn flattened(&self) -> Result<Circuit, CircuitError> {
        let mut out = Circuit::new(self.n_qubits, self.n_clbits);
        self.flatten_into(&mut out, &(0..self.n_qubits).collect::<Vec<_>>(), &(0..self.n_clbits).collect::<Vec<_>>())?;
        Ok(out)
    }

    fn flatten_into(&self, out: &mut Circuit, qmap: &[usize], cmap: &[usize]) -> Result<(), CircuitError> {
        for ins in &self.instructions {
            match ins {
                Instruction::Gate(g) => {
                    let mut g = g.clone();
                    g.qubits = g.qubits.iter().map(|&q| qmap[q]).collect();
                    out.instructions.push(Instruction::Gate(g));
                }
                Instruction::Measure { qubit, clbit } => {
                    out.instructions.push(Instruction::Measure { qubit: qmap[*qubit], clbit: cmap[*clbit] });
                }
                Instruction::Composite(c) => {
                    let sub = self
                        .subcircuits
                        .get(&c.sub)
                        .ok_or_else(|| CircuitError::UnknownSubcircuit(c.sub.clone()))?;
                    let body = if c.inverted { inverse_circuit(sub)? } else { sub.clone() };
                    let q: Vec<usize> = c.qubits.iter().map(|&q| qmap[q]).collect();
                    let cb: Vec<usize> = c.clbits.iter().map(|&b| cmap[b]).collect();
                    body.flatten_into(out, &q, &cb)?;
                }
            }
        }
        Ok(())
    }

    /// Qubits touched by at least one non-measure instruction.
    pub fn active_qubits(&self) -> BTreeSet<usize> {
        self.instructions
            .iter()
            .filter(|i| !i.is_measure())
            .flat_map(|i| i.qubits().iter().copied())
            .collect()
    }
}

/// The circuit undoing `c`: instructions reversed, each replaced by its
/// inverse. Composites flip their `inverted` flag.
pub fn inverse_circuit(c: &Circuit) -> Result<Circuit, CircuitError> {
    if c.has_measure() {
        return Err(CircuitError::MeasurementNotInvertible);
    }
    let instructions = c
        .instructions
        .iter()
        .rev()
        .map(|ins| match ins {
            Instruction::Gate(g) => Instruction::Gate(g.inverse()),
            Instruction::Composite(op) => Instruction::Composite(CompositeOp { inverted: !op.inverted, ..op.clone() }),
            Instruction::Measure { .. } => unreachable!("checked above"),
        })
        .collect();
    Ok(Circuit { instructions, ..c.clone() })
}

/// Connected components of the qubit interaction graph: qubits are linked
/// when they appear together in a multi-qubit gate or composite. Components
/// are sorted and listed by their smallest qubit.
pub fn interaction_components(c: &Circuit) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..c.n_qubits).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for ins in c.instructions.iter().filter(|i| !i.is_measure()) {
        let qs = ins.qubits();
        for w in qs.windows(2) {
            let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for q in 0..c.n_qubits {
        let root = find(&mut parent, q);
        groups.entry(root).or_default().push(q);
    }
    let mut out: Vec<Vec<usize>> = groups.into_values().collect();
    out.sort_by_key(|g| g[0]);
    out
}

mod gate_by_name {
    use super::{gate, GateSpec};
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(spec: &&'static GateSpec, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(spec.name)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<&'static GateSpec, D::Error> {
        let name = String::deserialize(d)?;
        gate(&name).ok_or_else(|| D::Error::custom(format!("unknown gate '{name}'")))
    }
}
