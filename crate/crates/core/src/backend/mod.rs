//! The bundled platform under test: a small transpiler (parameter binding,
//! optional QASM roundtrip, gate-set translation, routing, optimization) in
//! front of two independent statevector simulators.
//!
//! Every failure inside the pipeline becomes an [`ExecutionOutcome::Crash`]
//! tagged with the [`Phase`] it happened in; nothing escapes as a panic or
//! an error value.

pub mod distribution;
pub mod optimize;
pub mod route;
pub mod simulator;
pub mod translate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, GateOp, Instruction, ParamValue, Program};
use crate::defects::{Defect, DefectSet};
use crate::generator::rng_from_seed;
use crate::qasm;

pub use distribution::{
    key_value, measurement_probabilities, render_key, sample, sample_probabilities, DistributionError,
    OutputDistribution, Probabilities,
};
pub use optimize::{optimize, pass_pipeline, OptimizeError, Pass};
pub use route::{route_to_coupling_map, RouteError};
pub use simulator::{DenseSimulator, SimError, Simulator, Statevector, UnitarySimulator};
pub use translate::{translate_to_gate_set, GateSet, TranslateError, GATE_SETS};

/// Pipeline stage in which an execution failed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Transpile,
    Translate,
    Route,
    Optimize,
    Qasm,
    Simulate,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Transpile => "transpile",
            Phase::Translate => "translate",
            Phase::Route => "route",
            Phase::Optimize => "optimize",
            Phase::Qasm => "qasm",
            Phase::Simulate => "simulate",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A failed execution: where and why.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Crash {
    pub phase: Phase,
    pub message: String,
}

impl Crash {
    fn new(phase: Phase, message: impl ToString) -> Self {
        let message = message.to_string();
        let message = if message.is_empty() { format!("{phase} failed") } else { message };
        Crash { phase, message }
    }
}

impl fmt::Display for Crash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.phase, self.message)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ExecutionOutcome {
    Success { distribution: OutputDistribution },
    Crash { phase: Phase, message: String },
}

impl ExecutionOutcome {
    pub fn is_crash(&self) -> bool {
        matches!(self, ExecutionOutcome::Crash { .. })
    }

    pub fn distribution(&self) -> Option<&OutputDistribution> {
        match self {
            ExecutionOutcome::Success { distribution } => Some(distribution),
            ExecutionOutcome::Crash { .. } => None,
        }
    }
}

impl From<Crash> for ExecutionOutcome {
    fn from(c: Crash) -> Self {
        ExecutionOutcome::Crash { phase: c.phase, message: c.message }
    }
}

/// Registered simulators plus the (normally empty) set of planted defects.
#[derive(Clone)]
pub struct Platform {
    backends: BTreeMap<String, Arc<dyn Simulator>>,
    defects: DefectSet,
}

impl fmt::Debug for Platform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Platform").field("backends", &self.backend_ids()).field("defects", &self.defects).finish()
    }
}

impl Default for Platform {
    fn default() -> Self {
        Self::standard()
    }
}

impl Platform {
    /// Both bundled backends, no defects.
    pub fn standard() -> Self {
        Self::with_defects(DefectSet::none())
    }

    pub fn with_defects(defects: DefectSet) -> Self {
        let backends: Vec<Arc<dyn Simulator>> =
            vec![Arc::new(DenseSimulator::default()), Arc::new(UnitarySimulator::default())];
        Self::with_backends(backends, defects)
    }

    pub fn with_backends(backends: Vec<Arc<dyn Simulator>>, defects: DefectSet) -> Self {
        Platform { backends: backends.into_iter().map(|b| (b.id().to_string(), b)).collect(), defects }
    }

    pub fn backend_ids(&self) -> Vec<String> {
        self.backends.keys().cloned().collect()
    }

    pub fn defects(&self) -> &DefectSet {
        &self.defects
    }

    /// Runs the full pipeline and samples `config.shots` outcomes with an
    /// RNG seeded from `config.seed`.
    pub fn execute(&self, p: &Program) -> ExecutionOutcome {
        match self.execute_exact(p) {
            Ok(probs) => {
                let mut rng = rng_from_seed(p.config.seed);
                ExecutionOutcome::Success { distribution: sample_probabilities(&probs, p.config.shots, &mut rng) }
            }
            Err(crash) => crash.into(),
        }
    }

    /// Runs the pipeline and returns exact outcome probabilities instead of
    /// samples.
    pub fn execute_exact(&self, p: &Program) -> Result<Probabilities, Crash> {
        let circuit = self.transpile(p)?;
        let backend = self
            .backends
            .get(&p.config.backend_id)
            .ok_or_else(|| Crash::new(Phase::Simulate, format!("unknown backend '{}'", p.config.backend_id)))?;
        let sv = backend.simulate(&circuit).map_err(|e| Crash::new(Phase::Simulate, e))?;
        let flat = circuit.flattened().map_err(|e| Crash::new(Phase::Simulate, e))?;
        Ok(measurement_probabilities(&sv, &flat.measurements(), circuit.n_clbits))
    }

    /// The pipeline up to (not including) simulation: validation, binding,
    /// optional QASM roundtrip, translation, routing and optimization.
    pub fn transpile(&self, p: &Program) -> Result<Circuit, Crash> {
        let cfg = &p.config;
        p.circuit.validate().map_err(|e| Crash::new(Phase::Transpile, e))?;
        cfg.validate().map_err(|e| Crash::new(Phase::Transpile, e))?;
        self.check_bindings(p)?;
        let mut c = bind(&p.circuit, &p.bindings);
        if cfg.qasm_roundtrip {
            let text = qasm::emit_with(&c, &self.defects).map_err(|e| Crash::new(Phase::Qasm, e))?;
            c = qasm::parse(&text).map_err(|e| Crash::new(Phase::Qasm, e))?;
        }
        if let Some(target) = &cfg.target_gate_set {
            c = translate_to_gate_set(&c, target, &self.defects).map_err(|e| Crash::new(Phase::Translate, e))?;
        }
        if let Some(map) = &cfg.coupling_map {
            c = route_to_coupling_map(&c, map).map_err(|e| Crash::new(Phase::Route, e))?;
        }
        optimize(&c, cfg.opt_level, &self.defects).map_err(|e| Crash::new(Phase::Optimize, e))
    }

    /// Every binding must name a parameter of the circuit.
    fn check_bindings(&self, p: &Program) -> Result<(), Crash> {
        let known = if self.defects.contains(Defect::PartialBindingCheck) {
            single_parameter_symbols(&p.circuit)
        } else {
            p.circuit.symbols()
        };
        match p.bindings.keys().find(|k| !known.contains(*k)) {
            Some(extra) => {
                Err(Crash::new(Phase::Transpile, format!("Cannot bind parameter '{extra}': not present in the circuit")))
            }
            None => Ok(()),
        }
    }
}

/// Symbols of single-parameter gates only (the partial binding check).
fn single_parameter_symbols(c: &Circuit) -> BTreeSet<String> {
    let mut out: BTreeSet<String> = c
        .instructions
        .iter()
        .filter_map(|i| match i {
            Instruction::Gate(g) if g.gate.param_count == 1 => Some(g.symbols().map(str::to_string)),
            _ => None,
        })
        .flatten()
        .collect();
    for sub in c.subcircuits.values() {
        out.extend(single_parameter_symbols(sub));
    }
    out
}

/// Substitutes bound values for symbols, recursively through subcircuits.
/// Adjoint markers on gates that now have literal angles are resolved to
/// their catalog inverse where one exists.
pub fn bind(c: &Circuit, bindings: &BTreeMap<String, f64>) -> Circuit {
    let instructions = c
        .instructions
        .iter()
        .map(|ins| match ins {
            Instruction::Gate(g) => Instruction::Gate(bind_gate(g, bindings)),
            other => other.clone(),
        })
        .collect();
    Circuit {
        n_qubits: c.n_qubits,
        n_clbits: c.n_clbits,
        instructions,
        subcircuits: c.subcircuits.iter().map(|(k, v)| (k.clone(), bind(v, bindings))).collect(),
    }
}

fn bind_gate(g: &GateOp, bindings: &BTreeMap<String, f64>) -> GateOp {
    let params = g
        .params
        .iter()
        .map(|p| match p {
            ParamValue::Symbol(s) => bindings.get(s).map_or_else(|| p.clone(), |v| ParamValue::Literal(*v)),
            lit => lit.clone(),
        })
        .collect();
    let bound = GateOp { params, ..g.clone() };
    if bound.adjoint && bound.bound_params().is_ok() {
        let forward = GateOp { adjoint: false, ..bound.clone() };
        forward.inverse()
    } else {
        bound
    }
}
