//! Random source programs: a fixed template (registers, gate sequence,
//! measure-all, execution settings) filled with a random gate sequence.

use std::f64::consts::TAU;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{catalog, Circuit, ExecConfig, GateOp, GateSpec, Instruction, ParamValue, Program};

/// The seedable generator used everywhere randomness is needed.
pub type GenRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> GenRng {
    GenRng::seed_from_u64(seed)
}

/// Largest register a generated program may use. Adding up to three extra
/// qubits later must still fit every simulator.
pub const MAX_GENERATED_QUBITS: usize = 11;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShotsPolicy {
    /// Confidence-interval sizing, never below 1024.
    Estimated,
    Fixed(u64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub min_qubits: usize,
    pub max_qubits: usize,
    pub max_gates: usize,
    pub opt_level_choices: Vec<u8>,
    pub backend_choices: Vec<String>,
    pub shots_policy: ShotsPolicy,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            min_qubits: 1,
            max_qubits: MAX_GENERATED_QUBITS,
            max_gates: 30,
            opt_level_choices: vec![0, 1, 2, 3],
            backend_choices: vec!["sv-dense".into(), "sv-unitary".into()],
            shots_policy: ShotsPolicy::Estimated,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenConfigError {
    #[error("need 1 <= min_qubits <= max_qubits <= {MAX_GENERATED_QUBITS}, got {0}..={1}")]
    QubitRange(usize, usize),
    #[error("max_gates must be at least 1")]
    NoGates,
    #[error("optimization level choices must be a nonempty subset of 0..=3")]
    OptLevels,
    #[error("backend choices must be nonempty")]
    NoBackends,
    #[error("fixed shot count must be positive")]
    ZeroShots,
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), GenConfigError> {
        if self.min_qubits < 1 || self.min_qubits > self.max_qubits || self.max_qubits > MAX_GENERATED_QUBITS {
            return Err(GenConfigError::QubitRange(self.min_qubits, self.max_qubits));
        }
        if self.max_gates < 1 {
            return Err(GenConfigError::NoGates);
        }
        if self.opt_level_choices.is_empty() || self.opt_level_choices.iter().any(|&l| l > 3) {
            return Err(GenConfigError::OptLevels);
        }
        if self.backend_choices.is_empty() {
            return Err(GenConfigError::NoBackends);
        }
        if self.shots_policy == ShotsPolicy::Fixed(0) {
            return Err(GenConfigError::ZeroShots);
        }
        Ok(())
    }
}

/// A uniformly chosen gate with random distinct operands and fresh angles
/// in `[0, 2π)`.
pub fn random_gate(n_qubits: usize, rng: &mut GenRng) -> GateOp {
    let candidates: Vec<&'static GateSpec> = catalog().iter().filter(|g| g.arity <= n_qubits).collect();
    random_gate_from(&candidates, n_qubits, rng)
}

fn random_gate_from(candidates: &[&'static GateSpec], n_qubits: usize, rng: &mut GenRng) -> GateOp {
    let spec = candidates[rng.gen_range(0..candidates.len())];
    let qubits = sample(rng, n_qubits, spec.arity).into_vec();
    let params = (0..spec.param_count).map(|_| ParamValue::Literal(rng.gen_range(0.0..TAU))).collect();
    GateOp { gate: spec, params, qubits, adjoint: false }
}

/// Between 0 and `max_gates` random gate instructions (uniform length).
pub fn expand_gate_ops(n_qubits: usize, max_gates: usize, rng: &mut GenRng) -> Vec<Instruction> {
    assert!(n_qubits >= 1, "need at least one qubit");
    let candidates: Vec<&'static GateSpec> = catalog().iter().filter(|g| g.arity <= n_qubits).collect();
    let len = rng.gen_range(0..=max_gates);
    (0..len).map(|_| Instruction::Gate(random_gate_from(&candidates, n_qubits, rng))).collect()
}

/// `max(1024, ⌈z²·p(1−p)/ε²⌉)` with `z = 1.96`, `ε = 0.05` and
/// `p = 2⁻ⁿ` clamped to `[0.01, 0.5]`, or the fixed count.
pub fn estimate_shots(circuit: &Circuit, policy: ShotsPolicy) -> u64 {
    match policy {
        ShotsPolicy::Fixed(n) => n,
        ShotsPolicy::Estimated => {
            let (z, eps) = (1.96f64, 0.05f64);
            let p = 0.5f64.powi(circuit.n_qubits.min(64) as i32).clamp(0.01, 0.5);
            let n = (z * z * p * (1.0 - p) / (eps * eps)).ceil() as u64;
            n.max(1024)
        }
    }
}

/// A fresh source program. Panics on an invalid configuration.
pub fn generate_program(cfg: &GenConfig, rng: &mut GenRng) -> Program {
    cfg.validate().expect("invalid generator configuration");
    let n = rng.gen_range(cfg.min_qubits..=cfg.max_qubits);
    let mut circuit = Circuit::new(n, n);
    circuit.instructions = expand_gate_ops(n, cfg.max_gates, rng);
    circuit.measure_all();
    let opt_level = cfg.opt_level_choices[rng.gen_range(0..cfg.opt_level_choices.len())];
    let backend = &cfg.backend_choices[rng.gen_range(0..cfg.backend_choices.len())];
    let seed = rng.gen();
    let mut config = ExecConfig::new(backend, estimate_shots(&circuit, cfg.shots_policy), seed);
    config.opt_level = opt_level;
    Program::new(circuit, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn single_qubit_gets_only_one_qubit_gates() {
        let mut rng = rng_from_seed(3);
        for _ in 0..200 {
            for ins in expand_gate_ops(1, 30, &mut rng) {
                assert_eq!(ins.qubits().len(), 1);
            }
        }
    }

    #[test]
    fn coverage_of_catalog() {
        let mut rng = rng_from_seed(11);
        let mut seen = BTreeSet::new();
        for _ in 0..10_000 {
            for ins in expand_gate_ops(5, 30, &mut rng) {
                if let Instruction::Gate(g) = ins {
                    seen.insert(g.gate.name);
                }
            }
        }
        let all: BTreeSet<_> = catalog().iter().map(|g| g.name).collect();
        assert_eq!(seen, all);
    }

    #[test]
    fn programs_are_valid_and_measure_last() {
        let cfg = GenConfig::default();
        let mut rng = rng_from_seed(5);
        for _ in 0..500 {
            let p = generate_program(&cfg, &mut rng);
            p.circuit.validate().unwrap();
            let n = p.circuit.n_qubits;
            assert_eq!(p.circuit.n_clbits, n);
            assert!((1..=11).contains(&n));
            assert!(p.circuit.gate_count() <= 30);
            let tail: Vec<_> = p.circuit.instructions[p.circuit.measurement_start()..].to_vec();
            assert_eq!(tail.len(), n);
            assert!(p.config.coupling_map.is_none() && p.config.target_gate_set.is_none());
        }
    }

    #[test]
    fn deterministic() {
        let cfg = GenConfig::default();
        let a = generate_program(&cfg, &mut rng_from_seed(42)).to_canonical_json();
        let b = generate_program(&cfg, &mut rng_from_seed(42)).to_canonical_json();
        assert_eq!(a, b);
    }

    #[test]
    fn shots_policy() {
        let c2 = Circuit::new(2, 2);
        assert!(estimate_shots(&c2, ShotsPolicy::Estimated) >= 1024);
        assert_eq!(estimate_shots(&c2, ShotsPolicy::Fixed(8192)), 8192);
        assert_eq!(estimate_shots(&c2, ShotsPolicy::Fixed(1024)), 1024);
    }

    #[test]
    fn size_histogram_is_diverse() {
        let cfg = GenConfig::default();
        let mut rng = rng_from_seed(9);
        let mut cells = BTreeSet::new();
        for _ in 0..1000 {
            let p = generate_program(&cfg, &mut rng);
            cells.insert((p.circuit.n_qubits, p.circuit.gate_count()));
        }
        // 11 register sizes × 31 lengths, every cell reachable.
        let total = 11 * 31;
        assert!(cells.len() * 10 >= total * 8, "covered {} of {total}", cells.len());
    }
}
