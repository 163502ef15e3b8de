use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::circuit::CouplingMap;

/// The ten transformation families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformId {
    QubitOrder,
    NullEffect,
    AddRegister,
    InjectParams,
    Partition,
    QasmRoundtrip,
    CouplingMap,
    GateSet,
    OptLevel,
    Backend,
}

impl TransformId {
    pub const ALL: [TransformId; 10] = [
        TransformId::QubitOrder,
        TransformId::NullEffect,
        TransformId::AddRegister,
        TransformId::InjectParams,
        TransformId::Partition,
        TransformId::QasmRoundtrip,
        TransformId::CouplingMap,
        TransformId::GateSet,
        TransformId::OptLevel,
        TransformId::Backend,
    ];

    /// Human-readable name used in reports.
    pub fn title(self) -> &'static str {
        match self {
            TransformId::QubitOrder => "Change of qubit order",
            TransformId::NullEffect => "Inject null-effect operation",
            TransformId::AddRegister => "Add quantum register",
            TransformId::InjectParams => "Inject parameters",
            TransformId::Partition => "Partitioned execution",
            TransformId::QasmRoundtrip => "Roundtrip conversion via QASM",
            TransformId::CouplingMap => "Change of coupling map",
            TransformId::GateSet => "Change of gate set",
            TransformId::OptLevel => "Change of optimization level",
            TransformId::Backend => "Change of backend",
        }
    }

    /// Only qubit reordering and partitioning change the observable output.
    pub fn semantics_preserving(self) -> bool {
        !matches!(self, TransformId::QubitOrder | TransformId::Partition)
    }
}

impl fmt::Display for TransformId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.title())
    }
}

/// What a transformation did, with the metadata needed to undo its effect
/// on the output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TransformKind {
    /// Logical qubit `q` now lives on qubit `mapping[q]`.
    QubitOrder { mapping: Vec<usize> },
    NullEffect { subcircuit: String },
    /// `size` fresh qubits, measured into the listed new clbits.
    AddRegister { size: usize, added_clbits: Vec<usize> },
    /// Fresh symbol → the literal it replaced.
    InjectParams { symbols: BTreeMap<String, f64> },
    /// Qubit groups of the two sub-programs and the source clbits each
    /// sub-program's clbits stand for (sub clbit `k` ↔ `clbits[g][k]`).
    Partition { qubits: [Vec<usize>; 2], clbits: [Vec<usize>; 2] },
    QasmRoundtrip,
    CouplingMap { map: CouplingMap },
    GateSet { name: String, gates: Vec<String> },
    OptLevel { old: u8, new: u8 },
    Backend { old: String, new: String },
}

impl TransformKind {
    pub fn id(&self) -> TransformId {
        match self {
            TransformKind::QubitOrder { .. } => TransformId::QubitOrder,
            TransformKind::NullEffect { .. } => TransformId::NullEffect,
            TransformKind::AddRegister { .. } => TransformId::AddRegister,
            TransformKind::InjectParams { .. } => TransformId::InjectParams,
            TransformKind::Partition { .. } => TransformId::Partition,
            TransformKind::QasmRoundtrip => TransformId::QasmRoundtrip,
            TransformKind::CouplingMap { .. } => TransformId::CouplingMap,
            TransformKind::GateSet { .. } => TransformId::GateSet,
            TransformKind::OptLevel { .. } => TransformId::OptLevel,
            TransformKind::Backend { .. } => TransformId::Backend,
        }
    }
}

/// The expected relation between source and follow-up outputs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum OutputRelation {
    Equivalence,
    RemappedEquivalence { mapping: Vec<usize> },
    ProductEquivalence { a: Vec<usize>, b: Vec<usize> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformRecord {
    pub name: String,
    pub kind: TransformKind,
    pub semantics_preserving: bool,
    pub output_relation: OutputRelation,
}

impl TransformRecord {
    pub fn new(kind: TransformKind) -> Self {
        let id = kind.id();
        let output_relation = match &kind {
            TransformKind::QubitOrder { mapping } => OutputRelation::RemappedEquivalence { mapping: mapping.clone() },
            TransformKind::Partition { qubits, .. } => {
                OutputRelation::ProductEquivalence { a: qubits[0].clone(), b: qubits[1].clone() }
            }
            _ => OutputRelation::Equivalence,
        };
        TransformRecord {
            name: id.title().to_string(),
            kind,
            semantics_preserving: id.semantics_preserving(),
            output_relation,
        }
    }

    pub fn id(&self) -> TransformId {
        self.kind.id()
    }
}
