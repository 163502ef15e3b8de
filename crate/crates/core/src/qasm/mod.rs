//! OpenQASM 2.0 export and import.
//!
//! Subcircuits become `gate` definitions, emitted once each in dependency
//! order; inverted subcircuits get a separate `<name>_dg` definition. The
//! importer accepts the `qelib1.inc` gate library, every catalog gate, and a
//! few legacy aliases (`u3`, `u1`, `cu1`, `cu3`, `U`, `CX`, `c3sqrtx`).

mod emit;
mod lexer;
mod parser;

use std::fmt;

use thiserror::Error;

pub use emit::{emit, emit_with, GateDef, QasmDocument};
pub use parser::{parse, MAX_CLBITS, MAX_QUBITS};

/// Position of a parse error (1-based).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}:{}", self.line, self.col)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("{0}")]
    Syntax(String),
    #[error("Cannot find gate definition for '{0}'")]
    UnknownGate(String),
    #[error("'{name}' uses {found} qubits but is declared for {declared} qubits")]
    ArityMismatch { name: String, found: usize, declared: usize },
    #[error("'{name}' takes {declared} parameters but {found} were given")]
    ParamCountMismatch { name: String, found: usize, declared: usize },
    #[error("Duplicate declaration for gate '{0}'")]
    DuplicateGateDef(String),
    #[error("Duplicate declaration for register '{0}'")]
    DuplicateRegister(String),
    #[error("unknown register '{0}'")]
    UnknownRegister(String),
    #[error("index {index} out of range for register '{name}' of size {size}")]
    IndexOutOfRange { name: String, index: u64, size: usize },
    #[error("register sizes differ in broadcast ({0} vs {1})")]
    BroadcastMismatch(usize, usize),
    #[error("qubit used twice in one operation")]
    RepeatedQubit,
    #[error("unsupported construct: {0}")]
    Unsupported(String),
    #[error("limit exceeded: {0}")]
    LimitExceeded(String),
    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{pos}: {kind}")]
pub struct ParseError {
    pub pos: Pos,
    pub kind: ParseErrorKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum EmitError {
    /// The circuit has no OpenQASM 2.0 form (measuring subcircuits,
    /// unbound parameters, non-finite angles).
    #[error("cannot export to QASM: {0}")]
    UnrepresentableConstruct(String),
}
