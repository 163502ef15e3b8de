//! The gate catalog.
//!
//! Every multi-qubit matrix is little-endian in its operands: operand `k` is
//! bit `k` of the matrix index. Controlled gates list their controls first.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4};
use std::fmt;
use std::sync::OnceLock;

use crate::linalg::{c, cis, Matrix, I, ONE, ZERO};

/// How the inverse of a gate is expressed without leaving the catalog.
#[derive(Clone, Copy)]
pub enum InverseRule {
    SelfInverse,
    /// Parameter-free partner gate (`s` ↔ `sdg`).
    Partner(&'static str),
    /// Same gate with every angle negated.
    NegateParams,
    /// Arbitrary rewrite to a (possibly different) catalog gate.
    Rewrite(fn(&[f64]) -> (&'static str, Vec<f64>)),
    /// Same gate with its two operands swapped.
    SwapOperands,
    /// No catalog form; the instruction carries an adjoint marker.
    Adjoint,
}

pub struct GateSpec {
    pub name: &'static str,
    pub arity: usize,
    pub param_count: usize,
    builder: fn(&[f64]) -> Matrix,
    pub inverse: InverseRule,
    /// `g(a)·g(b) = g(a + b)` for single-parameter rotations.
    pub additive: bool,
}

impl GateSpec {
    /// The gate's unitary for bound parameter values.
    ///
    /// Panics if `params.len() != self.param_count`.
    pub fn unitary(&self, params: &[f64]) -> Matrix {
        assert_eq!(params.len(), self.param_count, "wrong parameter count for {}", self.name);
        (self.builder)(params)
    }
}

impl fmt::Debug for GateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GateSpec({}, arity {}, {} params)", self.name, self.arity, self.param_count)
    }
}

impl PartialEq for GateSpec {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
    }
}

impl Eq for GateSpec {}

pub struct GateCatalog {
    gates: Vec<GateSpec>,
    by_name: BTreeMap<&'static str, usize>,
}

impl GateCatalog {
    pub fn lookup(&self, name: &str) -> Option<&GateSpec> {
        self.by_name.get(name).map(|&i| &self.gates[i])
    }

    /// Gates in catalog order.
    pub fn iter(&self) -> impl Iterator<Item = &GateSpec> {
        self.gates.iter()
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }
}

/// The process-wide catalog.
pub fn catalog() -> &'static GateCatalog {
    static CATALOG: OnceLock<GateCatalog> = OnceLock::new();
    CATALOG.get_or_init(build_gate_catalog)
}

/// Looks a gate up in the process-wide catalog.
pub fn gate(name: &str) -> Option<&'static GateSpec> {
    catalog().lookup(name)
}

pub fn build_gate_catalog() -> GateCatalog {
    use InverseRule::*;
    let g = |name, arity, param_count, builder, inverse, additive| GateSpec {
        name,
        arity,
        param_count,
        builder,
        inverse,
        additive,
    };
    let gates = vec![
        // one qubit
        g("id", 1, 0, (|_| Matrix::identity(2)) as fn(&[f64]) -> Matrix, SelfInverse, false),
        g("x", 1, 0, |_| pauli_x(), SelfInverse, false),
        g("y", 1, 0, |_| pauli_y(), SelfInverse, false),
        g("z", 1, 0, |_| pauli_z(), SelfInverse, false),
        g("h", 1, 0, |_| hadamard(), SelfInverse, false),
        g("s", 1, 0, |_| phase(FRAC_PI_2), Partner("sdg"), false),
        g("sdg", 1, 0, |_| phase(-FRAC_PI_2), Partner("s"), false),
        g("t", 1, 0, |_| phase(FRAC_PI_4), Partner("tdg"), false),
        g("tdg", 1, 0, |_| phase(-FRAC_PI_4), Partner("t"), false),
        g("sx", 1, 0, |_| sqrt_x(), Partner("sxdg"), false),
        g("sxdg", 1, 0, |_| sqrt_x().adjoint(), Partner("sx"), false),
        g("rx", 1, 1, |p| rx(p[0]), NegateParams, true),
        g("ry", 1, 1, |p| ry(p[0]), NegateParams, true),
        g("rz", 1, 1, |p| rz(p[0]), NegateParams, true),
        g("p", 1, 1, |p| phase(p[0]), NegateParams, true),
        g("r", 1, 2, |p| r_gate(p[0], p[1]), Rewrite(|p| ("r", vec![-p[0], p[1]])), false),
        g(
            "u2",
            1,
            2,
            |p| u3(FRAC_PI_2, p[0], p[1]),
            Rewrite(|p| ("u", vec![-FRAC_PI_2, -p[1], -p[0]])),
            false,
        ),
        g("u", 1, 3, |p| u3(p[0], p[1], p[2]), Rewrite(|p| ("u", vec![-p[0], -p[2], -p[1]])), false),
        // two qubits
        g("cx", 2, 0, |_| controlled(&pauli_x(), 1), SelfInverse, false),
        g("cy", 2, 0, |_| controlled(&pauli_y(), 1), SelfInverse, false),
        g("cz", 2, 0, |_| controlled(&pauli_z(), 1), SelfInverse, false),
        g("ch", 2, 0, |_| controlled(&hadamard(), 1), SelfInverse, false),
        g("swap", 2, 0, |_| swap(), SelfInverse, false),
        g("iswap", 2, 0, |_| iswap(), Adjoint, false),
        g("dcx", 2, 0, |_| dcx(), SwapOperands, false),
        g("ecr", 2, 0, |_| ecr(), SelfInverse, false),
        g("csx", 2, 0, |_| controlled(&sqrt_x(), 1), Adjoint, false),
        g("crx", 2, 1, |p| controlled(&rx(p[0]), 1), NegateParams, true),
        g("cry", 2, 1, |p| controlled(&ry(p[0]), 1), NegateParams, true),
        g("crz", 2, 1, |p| controlled(&rz(p[0]), 1), NegateParams, true),
        g("cp", 2, 1, |p| controlled(&phase(p[0]), 1), NegateParams, true),
        g(
            "cu",
            2,
            4,
            |p| controlled(&u3(p[0], p[1], p[2]).scale(cis(p[3])), 1),
            Rewrite(|p| ("cu", vec![-p[0], -p[2], -p[1], -p[3]])),
            false,
        ),
        g("rxx", 2, 1, |p| pauli_rotation(&[Pauli::X, Pauli::X], p[0]), NegateParams, true),
        g("ryy", 2, 1, |p| pauli_rotation(&[Pauli::Y, Pauli::Y], p[0]), NegateParams, true),
        g("rzz", 2, 1, |p| pauli_rotation(&[Pauli::Z, Pauli::Z], p[0]), NegateParams, true),
        // Z on operand 0, X on operand 1.
        g("rzx", 2, 1, |p| pauli_rotation(&[Pauli::Z, Pauli::X], p[0]), NegateParams, true),
        // three qubits
        g("ccx", 3, 0, |_| controlled(&pauli_x(), 2), SelfInverse, false),
        g("cswap", 3, 0, |_| controlled(&swap(), 1), SelfInverse, false),
        g("ccz", 3, 0, |_| controlled(&pauli_z(), 2), SelfInverse, false),
        g("rccx", 3, 0, |_| rccx(), SelfInverse, false),
        // four and five qubits
        g("c3x", 4, 0, |_| controlled(&pauli_x(), 3), SelfInverse, false),
        g("c3sx", 4, 0, |_| controlled(&sqrt_x(), 3), Adjoint, false),
        g("c4x", 5, 0, |_| controlled(&pauli_x(), 4), SelfInverse, false),
    ];
    let by_name = gates.iter().enumerate().map(|(i, g)| (g.name, i)).collect();
    GateCatalog { gates, by_name }
}

pub fn pauli_x() -> Matrix {
    Matrix::from_rows([[ZERO, ONE], [ONE, ZERO]])
}

pub fn pauli_y() -> Matrix {
    Matrix::from_rows([[ZERO, -I], [I, ZERO]])
}

pub fn pauli_z() -> Matrix {
    Matrix::diagonal(&[ONE, -ONE])
}

pub fn hadamard() -> Matrix {
    let h = c(FRAC_1_SQRT_2, 0.0);
    Matrix::from_rows([[h, h], [h, -h]])
}

fn phase(lambda: f64) -> Matrix {
    Matrix::diagonal(&[ONE, cis(lambda)])
}

fn sqrt_x() -> Matrix {
    let a = c(0.5, 0.5);
    let b = c(0.5, -0.5);
    Matrix::from_rows([[a, b], [b, a]])
}

fn rx(theta: f64) -> Matrix {
    let (co, si) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    Matrix::from_rows([[c(co, 0.0), c(0.0, -si)], [c(0.0, -si), c(co, 0.0)]])
}

fn ry(theta: f64) -> Matrix {
    let (co, si) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    Matrix::from_rows([[c(co, 0.0), c(-si, 0.0)], [c(si, 0.0), c(co, 0.0)]])
}

fn rz(theta: f64) -> Matrix {
    Matrix::diagonal(&[cis(-theta / 2.0), cis(theta / 2.0)])
}

fn r_gate(theta: f64, phi: f64) -> Matrix {
    let (co, si) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    Matrix::from_rows([
        [c(co, 0.0), -I * cis(-phi) * si],
        [-I * cis(phi) * si, c(co, 0.0)],
    ])
}

pub(crate) fn u3(theta: f64, phi: f64, lambda: f64) -> Matrix {
    let (co, si) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    Matrix::from_rows([
        [c(co, 0.0), -cis(lambda) * si],
        [cis(phi) * si, cis(phi + lambda) * co],
    ])
}

fn swap() -> Matrix {
    let mut m = Matrix::zeros(4);
    for (r, col) in [(0, 0), (1, 2), (2, 1), (3, 3)] {
        m.set(r, col, ONE);
    }
    m
}

fn iswap() -> Matrix {
    let mut m = Matrix::zeros(4);
    m.set(0, 0, ONE);
    m.set(1, 2, I);
    m.set(2, 1, I);
    m.set(3, 3, ONE);
    m
}

fn dcx() -> Matrix {
    // cx(0→1) then cx(1→0)
    let cx01 = controlled(&pauli_x(), 1);
    let mut cx10 = Matrix::zeros(4);
    for (r, col) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
        cx10.set(r, col, ONE);
    }
    cx10.mul(&cx01)
}

fn ecr() -> Matrix {
    let k = FRAC_1_SQRT_2;
    Matrix::from_rows([
        [ZERO, c(k, 0.0), ZERO, c(0.0, k)],
        [c(k, 0.0), ZERO, c(0.0, -k), ZERO],
        [ZERO, c(0.0, k), ZERO, c(k, 0.0)],
        [c(0.0, -k), ZERO, c(k, 0.0), ZERO],
    ])
}

/// Relative-phase Toffoli, defined by its standard nine-gate circuit.
fn rccx() -> Matrix {
    let h = hadamard();
    let t = phase(FRAC_PI_4);
    let tdg = phase(-FRAC_PI_4);
    let cx = controlled(&pauli_x(), 1);
    let steps: [(&Matrix, &[usize]); 9] = [
        (&h, &[2]),
        (&t, &[2]),
        (&cx, &[1, 2]),
        (&tdg, &[2]),
        (&cx, &[0, 2]),
        (&t, &[2]),
        (&cx, &[1, 2]),
        (&tdg, &[2]),
        (&h, &[2]),
    ];
    steps
        .iter()
        .fold(Matrix::identity(8), |acc, (m, q)| m.embed(q, 3).mul(&acc))
}

#[derive(Clone, Copy)]
enum Pauli {
    X,
    Y,
    Z,
}

/// `exp(−i θ/2 · P_{n−1} ⊗ … ⊗ P_0)` with `paulis[k]` acting on operand `k`.
fn pauli_rotation(paulis: &[Pauli], theta: f64) -> Matrix {
    let op = paulis.iter().fold(Matrix::identity(1), |acc, p| {
        let m = match p {
            Pauli::X => pauli_x(),
            Pauli::Y => pauli_y(),
            Pauli::Z => pauli_z(),
        };
        m.kron(&acc)
    });
    let dim = op.dim();
    Matrix::identity(dim)
        .scale(c((theta / 2.0).cos(), 0.0))
        .add(&op.scale(c(0.0, -(theta / 2.0).sin())))
}

/// `base` controlled on `n_controls` operands placed in the low index bits.
pub fn controlled(base: &Matrix, n_controls: usize) -> Matrix {
    let bdim = base.dim();
    let dim = bdim << n_controls;
    let ctrl_mask = (1 << n_controls) - 1;
    let mut m = Matrix::identity(dim);
    for i in 0..bdim {
        for j in 0..bdim {
            let row = (i << n_controls) | ctrl_mask;
            let col = (j << n_controls) | ctrl_mask;
            m.set(row, col, base.get(i, j));
        }
    }
    m
}

/// Resolves the catalog inverse of `name(params)`. `None` means the gate
/// needs the adjoint marker. The flag reports whether the two operands must
/// be swapped.
pub fn catalog_inverse(spec: &GateSpec, params: &[f64]) -> Option<(&'static GateSpec, Vec<f64>, bool)> {
    match spec.inverse {
        InverseRule::SelfInverse => Some((gate(spec.name)?, params.to_vec(), false)),
        InverseRule::Partner(p) => Some((gate(p)?, Vec::new(), false)),
        InverseRule::NegateParams => Some((gate(spec.name)?, params.iter().map(|x| -x).collect(), false)),
        InverseRule::Rewrite(f) => {
            let (name, ps) = f(params);
            Some((gate(name)?, ps, false))
        }
        InverseRule::SwapOperands => Some((gate(spec.name)?, params.to_vec(), true)),
        InverseRule::Adjoint => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_params(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-4.0 * PI..4.0 * PI)).collect()
    }

    #[test]
    fn catalog_shape() {
        let cat = catalog();
        assert!(cat.len() >= 30);
        for a in 1..=5 {
            assert!(cat.iter().any(|g| g.arity == a), "no gate of arity {a}");
        }
        for p in 0..=4 {
            assert!(cat.iter().any(|g| g.param_count == p), "no gate with {p} params");
        }
        let required = [
            "id", "x", "y", "z", "h", "s", "sdg", "t", "tdg", "sx", "rx", "ry", "rz", "p", "u", "cx", "cy", "cz",
            "ch", "swap", "crx", "cry", "crz", "cp", "rxx", "ryy", "rzz", "rzx", "ccx", "cswap",
        ];
        for name in required {
            assert!(cat.lookup(name).is_some(), "missing {name}");
        }
    }

    #[test]
    fn names_unique() {
        let cat = catalog();
        assert_eq!(cat.by_name.len(), cat.gates.len());
    }

    #[test]
    fn hadamard_lookup() {
        let h = gate("h").unwrap();
        assert_eq!((h.arity, h.param_count), (1, 0));
        let k = FRAC_1_SQRT_2;
        let expected = Matrix::from_rows([[c(k, 0.0), c(k, 0.0)], [c(k, 0.0), c(-k, 0.0)]]);
        assert!(h.unitary(&[]).max_abs_diff(&expected) < 1e-15);
        assert_eq!(gate("id").unwrap().unitary(&[]), Matrix::identity(2));
        let crz = gate("crz").unwrap();
        assert_eq!((crz.arity, crz.param_count), (2, 1));
    }

    #[test]
    fn every_gate_is_unitary_for_random_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for g in catalog().iter() {
            let trials = if g.param_count == 0 { 1 } else { 1000 };
            for _ in 0..trials {
                let p = random_params(&mut rng, g.param_count);
                let m = g.unitary(&p);
                assert_eq!(m.dim(), 1 << g.arity);
                assert!(m.unitarity_error() < 1e-9, "{} not unitary for {p:?}", g.name);
            }
        }
    }

    #[test]
    fn catalog_inverses_undo_the_gate() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for g in catalog().iter() {
            let p = random_params(&mut rng, g.param_count);
            let m = g.unitary(&p);
            let inv = match catalog_inverse(g, &p) {
                None => m.adjoint(),
                Some((spec, ps, swapped)) => {
                    let mi = spec.unitary(&ps);
                    if swapped {
                        mi.embed(&[1, 0], 2)
                    } else {
                        mi
                    }
                }
            };
            assert!(inv.mul(&m).max_abs_diff(&Matrix::identity(m.dim())) < 1e-9, "{}", g.name);
        }
    }

    #[test]
    fn additive_gates_compose() {
        for g in catalog().iter().filter(|g| g.additive) {
            let m = g.unitary(&[0.4]).mul(&g.unitary(&[1.1]));
            assert!(m.max_abs_diff(&g.unitary(&[1.5])) < 1e-12, "{}", g.name);
        }
    }

    #[test]
    fn cx_is_control_low_target_high() {
        let cx = gate("cx").unwrap().unitary(&[]);
        // |c=1,t=0> = index 1 maps to |c=1,t=1> = index 3
        assert_eq!(cx.get(3, 1), ONE);
        assert_eq!(cx.get(2, 2), ONE);
    }

    #[test]
    fn adjoint_marked_gates_have_order_four() {
        // The QASM exporter writes g† as g·g·g.
        for g in catalog().iter().filter(|g| matches!(g.inverse, InverseRule::Adjoint)) {
            let m = g.unitary(&[]);
            let cube = m.mul(&m).mul(&m);
            assert!(cube.max_abs_diff(&m.adjoint()) < 1e-12, "{}", g.name);
        }
    }
}
