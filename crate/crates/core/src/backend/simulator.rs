use std::collections::BTreeSet;

use thiserror::Error;

use crate::circuit::{Circuit, CircuitError, Instruction};
use crate::linalg::{gather_bits, scatter_bits, Matrix, C64, ONE, ZERO};

/// Amplitudes over `2^n` basis states; qubit 0 is the least significant
/// bit of the basis index.
#[derive(Clone, Debug, PartialEq)]
pub struct Statevector {
    n_qubits: usize,
    amps: Vec<C64>,
}

impl Statevector {
    /// `|0…0⟩`
    pub fn zero(n_qubits: usize) -> Self {
        let mut amps = vec![ZERO; 1 << n_qubits];
        amps[0] = ONE;
        Statevector { n_qubits, amps }
    }

    pub fn from_amplitudes(n_qubits: usize, amps: Vec<C64>) -> Self {
        assert_eq!(amps.len(), 1 << n_qubits, "wrong amplitude count");
        Statevector { n_qubits, amps }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Largest amplitude difference after removing a global phase.
    pub fn distance_up_to_phase(&self, other: &Statevector) -> f64 {
        let overlap: C64 = self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum();
        let phase = if overlap.norm() > 1e-12 { overlap / overlap.norm() } else { ONE };
        self.amps.iter().zip(&other.amps).map(|(a, b)| (a * phase - b).norm()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("unbound parameter '{0}'")]
    UnboundParameter(String),
    #[error("circuit needs {needed} qubits but backend '{backend}' supports at most {cap}")]
    QubitLimitExceeded { backend: String, needed: usize, cap: usize },
    #[error("{0}")]
    InvalidCircuit(String),
}

impl From<CircuitError> for SimError {
    fn from(e: CircuitError) -> Self {
        match e {
            CircuitError::UnboundParameter(s) => SimError::UnboundParameter(s),
            other => SimError::InvalidCircuit(other.to_string()),
        }
    }
}

/// A statevector simulator. Measurements are ignored here; sampling reads
/// them from the circuit afterwards.
pub trait Simulator: Send + Sync {
    fn id(&self) -> &'static str;
    fn simulate(&self, c: &Circuit) -> Result<Statevector, SimError>;
}

/// The gate unitaries of `c` in application order, composites expanded.
fn gate_sequence(c: &Circuit) -> Result<Vec<(Matrix, Vec<usize>)>, SimError> {
    let flat = c.flattened()?;
    flat.instructions
        .iter()
        .filter_map(|ins| match ins {
            Instruction::Gate(g) => Some(g.matrix().map(|m| (m, g.qubits.clone())).map_err(SimError::from)),
            _ => None,
        })
        .collect()
}

/// Matrix-free gate application on the full statevector.
pub struct DenseSimulator {
    pub max_qubits: usize,
}

impl Default for DenseSimulator {
    fn default() -> Self {
        DenseSimulator { max_qubits: 14 }
    }
}

impl DenseSimulator {
    pub const ID: &'static str = "sv-dense";
}

fn apply_one(amps: &mut [C64], m: &Matrix, t: usize) {
    let (a, b, cc, d) = (m.get(0, 0), m.get(0, 1), m.get(1, 0), m.get(1, 1));
    let step = 1 << t;
    for base in (0..amps.len()).step_by(step << 1) {
        for i in base..base + step {
            let (x, y) = (amps[i], amps[i + step]);
            amps[i] = a * x + b * y;
            amps[i + step] = cc * x + d * y;
        }
    }
}

fn apply_many(amps: &mut [C64], m: &Matrix, targets: &[usize]) {
    let k = targets.len();
    let dim = 1 << k;
    let mask: usize = targets.iter().map(|&t| 1 << t).sum();
    let offsets: Vec<usize> = (0..dim).map(|s| scatter_bits(s, targets)).collect();
    let mut buf = vec![ZERO; dim];
    for base in (0..amps.len()).filter(|i| i & mask == 0) {
        for (s, &off) in offsets.iter().enumerate() {
            buf[s] = amps[base | off];
        }
        for (r, &off) in offsets.iter().enumerate() {
            let row = &m.as_slice()[r * dim..(r + 1) * dim];
            amps[base | off] = row.iter().zip(&buf).map(|(x, y)| x * y).sum();
        }
    }
}

impl Simulator for DenseSimulator {
    fn id(&self) -> &'static str {
        Self::ID
    }

    fn simulate(&self, c: &Circuit) -> Result<Statevector, SimError> {
        if c.n_qubits > self.max_qubits {
            return Err(SimError::QubitLimitExceeded { backend: self.id().into(), needed: c.n_qubits, cap: self.max_qubits });
        }
        let mut sv = Statevector::zero(c.n_qubits);
        for (m, targets) in gate_sequence(c)? {
            if targets.len() == 1 {
                apply_one(&mut sv.amps, &m, targets[0]);
            } else {
                apply_many(&mut sv.amps, &m, &targets);
            }
        }
        Ok(sv)
    }
}

/// Explicit unitary accumulation: consecutive gates are fused into blocks of
/// at most `block_width` qubits whose unitaries are built by matrix products;
/// each block unitary is then applied to the state.
pub struct UnitarySimulator {
    /// Limit on qubits touched by gates (enough for the widest follow-up);
    /// idle qubits stay in `|0⟩`.
    pub max_active_qubits: usize,
    pub block_width: usize,
}

impl Default for UnitarySimulator {
    fn default() -> Self {
        UnitarySimulator { max_active_qubits: 14, block_width: 6 }
    }
}

impl UnitarySimulator {
    pub const ID: &'static str = "sv-unitary";

    fn fuse(&self, gates: Vec<(Matrix, Vec<usize>)>) -> Vec<(Matrix, Vec<usize>)> {
        let mut blocks: Vec<(Vec<(Matrix, Vec<usize>)>, BTreeSet<usize>)> = Vec::new();
        for (m, q) in gates {
            if let Some((members, support)) = blocks.last_mut() {
                let grown = support.iter().chain(&q).copied().collect::<BTreeSet<_>>();
                if grown.len() <= self.block_width.max(q.len()) {
                    members.push((m, q));
                    *support = grown;
                    continue;
                }
            }
            let support = q.iter().copied().collect();
            blocks.push((vec![(m, q)], support));
        }
        blocks
            .into_iter()
            .map(|(members, support)| {
                let qubits: Vec<usize> = support.into_iter().collect();
                let w = qubits.len();
                let u = members.iter().fold(Matrix::identity(1 << w), |acc, (m, q)| {
                    let local: Vec<usize> = q.iter().map(|x| qubits.iter().position(|y| y == x).unwrap()).collect();
                    m.embed(&local, w).mul(&acc)
                });
                (u, qubits)
            })
            .collect()
    }
}

impl Simulator for UnitarySimulator {
    fn id(&self) -> &'static str {
        Self::ID
    }

    fn simulate(&self, c: &Circuit) -> Result<Statevector, SimError> {
        let gates = gate_sequence(c)?;
        let active: BTreeSet<usize> = gates.iter().flat_map(|(_, q)| q.iter().copied()).collect();
        if active.len() > self.max_active_qubits {
            return Err(SimError::QubitLimitExceeded {
                backend: self.id().into(),
                needed: active.len(),
                cap: self.max_active_qubits,
            });
        }
        let mut amps = vec![ZERO; 1 << c.n_qubits];
        amps[0] = ONE;
        for (u, qubits) in self.fuse(gates) {
            let dim = u.dim();
            let mask: usize = qubits.iter().map(|&q| 1 << q).sum();
            let mut next = amps.clone();
            for index in 0..amps.len() {
                let row = gather_bits(index, &qubits);
                let base = index & !mask;
                next[index] = (0..dim).map(|col| u.get(row, col) * amps[base | scatter_bits(col, &qubits)]).sum();
            }
            amps = next;
        }
        Ok(Statevector { n_qubits: c.n_qubits, amps })
    }
}
