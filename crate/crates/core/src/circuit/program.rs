use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{gate, Circuit};
use crate::transforms::TransformRecord;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CouplingMapError {
    #[error("self-loop on qubit {0}")]
    SelfLoop(usize),
    #[error("duplicate edge {0}-{1}")]
    DuplicateEdge(usize, usize),
    #[error("edge {0}-{1} leaves the {2}-qubit device")]
    OutOfRange(usize, usize, usize),
    #[error("coupling map is not connected")]
    Disconnected,
}

/// Undirected connectivity graph over physical qubits `0..n_qubits`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawCouplingMap", into = "RawCouplingMap")]
pub struct CouplingMap {
    n_qubits: usize,
    edges: Vec<[usize; 2]>,
}

#[derive(Serialize, Deserialize)]
struct RawCouplingMap {
    n_qubits: usize,
    edges: Vec<[usize; 2]>,
}

impl TryFrom<RawCouplingMap> for CouplingMap {
    type Error = CouplingMapError;
    fn try_from(raw: RawCouplingMap) -> Result<Self, Self::Error> {
        CouplingMap::new(raw.n_qubits, raw.edges)
    }
}

impl From<CouplingMap> for RawCouplingMap {
    fn from(m: CouplingMap) -> Self {
        RawCouplingMap { n_qubits: m.n_qubits, edges: m.edges }
    }
}

impl CouplingMap {
    /// Validates and stores a connected map. Edge order is kept.
    pub fn new(n_qubits: usize, edges: Vec<[usize; 2]>) -> Result<Self, CouplingMapError> {
        let mut seen = BTreeSet::new();
        for &[a, b] in &edges {
            if a == b {
                return Err(CouplingMapError::SelfLoop(a));
            }
            if a >= n_qubits || b >= n_qubits {
                return Err(CouplingMapError::OutOfRange(a, b, n_qubits));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(CouplingMapError::DuplicateEdge(a, b));
            }
        }
        let map = CouplingMap { n_qubits, edges };
        if n_qubits > 0 && map.distances_from(0).iter().any(Option::is_none) {
            return Err(CouplingMapError::Disconnected);
        }
        Ok(map)
    }

    /// A line `0-1-…-(n-1)`.
    pub fn line(n_qubits: usize) -> Self {
        let edges = (1..n_qubits).map(|i| [i - 1, i]).collect();
        CouplingMap::new(n_qubits, edges).expect("line is connected")
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn connected(&self, a: usize, b: usize) -> bool {
        self.edges.iter().any(|&[x, y]| (x, y) == (a, b) || (x, y) == (b, a))
    }

    pub fn neighbors(&self, q: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .edges
            .iter()
            .filter_map(|&[x, y]| if x == q { Some(y) } else if y == q { Some(x) } else { None })
            .collect();
        out.sort_unstable();
        out
    }

    fn distances_from(&self, start: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n_qubits];
        dist[start] = Some(0);
        let mut queue = VecDeque::from([start]);
        while let Some(q) = queue.pop_front() {
            for n in self.neighbors(q) {
                if dist[n].is_none() {
                    dist[n] = Some(dist[q].unwrap() + 1);
                    queue.push_back(n);
                }
            }
        }
        dist
    }

    /// A shortest path `from → to` (inclusive), ties broken by lowest index.
    pub fn shortest_path(&self, from: usize, to: usize) -> Vec<usize> {
        let mut prev = vec![usize::MAX; self.n_qubits];
        prev[from] = from;
        let mut queue = VecDeque::from([from]);
        while let Some(q) = queue.pop_front() {
            if q == to {
                break;
            }
            for n in self.neighbors(q) {
                if prev[n] == usize::MAX {
                    prev[n] = q;
                    queue.push_back(n);
                }
            }
        }
        let mut path = vec![to];
        let mut cur = to;
        while cur != from {
            cur = prev[cur];
            path.push(cur);
        }
        path.reverse();
        path
    }
}

/// How and where a program is executed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExecConfig {
    pub backend_id: String,
    pub opt_level: u8,
    pub coupling_map: Option<CouplingMap>,
    pub target_gate_set: Option<Vec<String>>,
    pub shots: u64,
    pub seed: u64,
    /// Export to OpenQASM and re-import before transpilation.
    #[serde(default)]
    pub qasm_roundtrip: bool,
}

impl ExecConfig {
    pub fn new(backend_id: &str, shots: u64, seed: u64) -> Self {
        ExecConfig {
            backend_id: backend_id.to_string(),
            opt_level: 0,
            coupling_map: None,
            target_gate_set: None,
            shots,
            seed,
            qasm_roundtrip: false,
        }
    }

    /// Checks the value-level invariants (level range, shots, gate names).
    pub fn validate(&self) -> Result<(), String> {
        if self.opt_level > 3 {
            return Err(format!("optimization level {} outside 0..=3", self.opt_level));
        }
        if self.shots == 0 {
            return Err("shots must be positive".into());
        }
        if let Some(set) = &self.target_gate_set {
            if let Some(bad) = set.iter().find(|g| gate(g).is_none()) {
                return Err(format!("unknown gate '{bad}' in target gate set"));
            }
        }
        Ok(())
    }
}

/// A circuit together with everything needed to run it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Program {
    pub circuit: Circuit,
    pub config: ExecConfig,
    #[serde(default)]
    pub bindings: BTreeMap<String, f64>,
    #[serde(default)]
    pub provenance: Vec<TransformRecord>,
}

impl Program {
    pub fn new(circuit: Circuit, config: ExecConfig) -> Self {
        Program { circuit, config, bindings: BTreeMap::new(), provenance: Vec::new() }
    }

    /// Deterministic JSON form used in reports and reproduction files.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("programs always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Symbols in the circuit that have no binding.
    pub fn unbound_symbols(&self) -> Vec<String> {
        self.circuit.symbols().into_iter().filter(|s| !self.bindings.contains_key(s)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coupling_map_checks() {
        assert!(CouplingMap::new(3, vec![[0, 1], [1, 2]]).is_ok());
        assert_eq!(CouplingMap::new(3, vec![[0, 1]]), Err(CouplingMapError::Disconnected));
        assert_eq!(CouplingMap::new(2, vec![[1, 1]]), Err(CouplingMapError::SelfLoop(1)));
        assert_eq!(CouplingMap::new(2, vec![[0, 1], [1, 0]]), Err(CouplingMapError::DuplicateEdge(1, 0)));
        assert!(CouplingMap::new(1, vec![]).is_ok());
    }

    #[test]
    fn shortest_path_on_line() {
        let m = CouplingMap::line(4);
        assert_eq!(m.shortest_path(0, 3), vec![0, 1, 2, 3]);
        assert_eq!(m.shortest_path(2, 2), vec![2]);
    }

    #[test]
    fn coupling_map_serde_validates() {
        let bad = r#"{"n_qubits":3,"edges":[[0,1]]}"#;
        assert!(serde_json::from_str::<CouplingMap>(bad).is_err());
        let m = CouplingMap::line(3);
        let back: CouplingMap = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn config_validation() {
        let mut c = ExecConfig::new("sv-dense", 1024, 1);
        assert!(c.validate().is_ok());
        c.target_gate_set = Some(vec!["cx".into(), "nope".into()]);
        assert!(c.validate().is_err());
        c.target_gate_set = None;
        c.shots = 0;
        assert!(c.validate().is_err());
    }
}
