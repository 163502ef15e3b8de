//! Greedy SWAP routing onto a coupling map.

use thiserror::Error;

use super::translate::lower;
use crate::circuit::{Circuit, CircuitError, CouplingMap, GateOp, Instruction};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RouteError {
    #[error("circuit needs {needed} qubits but the coupling map has {available}")]
    MapTooSmall { needed: usize, available: usize },
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

/// Places logical qubits on the map (initially the identity layout) and moves
/// operands together with SWAPs along shortest paths whenever a two-qubit
/// gate acts on non-adjacent physical qubits. Gates on three or more qubits
/// are decomposed first. Measurements are deferred to the end and wired
/// through the final layout, so the observable distribution is unchanged.
/// The result is defined over `map.n_qubits()` physical qubits.
pub fn route_to_coupling_map(c: &Circuit, map: &CouplingMap) -> Result<Circuit, RouteError> {
    if map.n_qubits() < c.n_qubits {
        return Err(RouteError::MapTooSmall { needed: c.n_qubits, available: map.n_qubits() });
    }
    let flat = c.flattened()?;
    let mut l2p: Vec<usize> = (0..map.n_qubits()).collect();
    let mut p2l = l2p.clone();
    let mut out = Circuit::new(map.n_qubits(), c.n_clbits);
    let mut measures = Vec::new();
    for ins in flat.instructions {
        let g = match ins {
            Instruction::Gate(g) => g,
            Instruction::Measure { qubit, clbit } => {
                measures.push((qubit, clbit));
                continue;
            }
            Instruction::Composite(_) => unreachable!("flattened"),
        };
        let parts = if g.gate.arity >= 3 { lower(&g)? } else { vec![g] };
        for g in parts {
            if g.qubits.len() == 2 {
                let (a, b) = (g.qubits[0], g.qubits[1]);
                if !map.connected(l2p[a], l2p[b]) {
                    let path = map.shortest_path(l2p[a], l2p[b]);
                    for w in path[..path.len() - 1].windows(2) {
                        let (x, y) = (w[0], w[1]);
                        for (s, t) in [(x, y), (y, x), (x, y)] {
                            out.instructions.push(Instruction::gate("cx", &[], &[s, t]));
                        }
                        let (lx, ly) = (p2l[x], p2l[y]);
                        p2l.swap(x, y);
                        l2p[lx] = y;
                        l2p[ly] = x;
                    }
                }
            }
            let qubits = g.qubits.iter().map(|&q| l2p[q]).collect();
            out.instructions.push(Instruction::Gate(GateOp { qubits, ..g }));
        }
    }
    for (q, clbit) in measures {
        out.instructions.push(Instruction::Measure { qubit: l2p[q], clbit });
    }
    Ok(out)
}
