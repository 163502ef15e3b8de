//! Deliberately planted toolchain defects.
//!
//! The bundled platform is correct by default. Each defect re-creates a
//! known class of compiler bug so that campaigns have something to find;
//! they are switched on one at a time through the library API.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Defect {
    /// The exporter names the inverse of a subcircuit like the subcircuit
    /// itself, so the output declares one gate twice.
    DuplicateGateDef,
    /// Gate-set translation has no rule for `id`.
    MissingIdRule,
    /// The exporter keeps classical-bit operands on subcircuit calls, so the
    /// call has more operands than the definition declares.
    CompositeClbitExport,
    /// Commutation analysis sizes its scratch space from every operand of a
    /// wide subcircuit instead of skipping it, and overflows at 11 qubits.
    CommutationOverflow,
    /// The parameter-binding check only recognises symbols of
    /// single-parameter gates.
    PartialBindingCheck,
}

impl Defect {
    pub const ALL: [Defect; 5] = [
        Defect::DuplicateGateDef,
        Defect::MissingIdRule,
        Defect::CompositeClbitExport,
        Defect::CommutationOverflow,
        Defect::PartialBindingCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Defect::DuplicateGateDef => "duplicate_gate_def",
            Defect::MissingIdRule => "missing_id_rule",
            Defect::CompositeClbitExport => "composite_clbit_export",
            Defect::CommutationOverflow => "commutation_overflow",
            Defect::PartialBindingCheck => "partial_binding_check",
        }
    }
}

impl fmt::Display for Defect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The set of enabled defects (empty = correct platform).
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DefectSet(BTreeSet<Defect>);

impl DefectSet {
    pub fn none() -> Self {
        DefectSet::default()
    }

    pub fn only(defect: Defect) -> Self {
        DefectSet(BTreeSet::from([defect]))
    }

    pub fn contains(&self, defect: Defect) -> bool {
        self.0.contains(&defect)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = Defect> + '_ {
        self.0.iter().copied()
    }
}
