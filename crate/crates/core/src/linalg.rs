//! Small dense complex matrices.
//!
//! Gate unitaries are at most 32x32, and the transpiler only ever multiplies
//! matrices over a handful of qubits, so a flat row-major `Vec` is all we need.

use num_complex::Complex64;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Shorthand for a complex number.
#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// `e^{i theta}`
#[inline]
pub fn cis(theta: f64) -> C64 {
    C64::from_polar(1.0, theta)
}

/// A square complex matrix stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    dim: usize,
    data: Vec<C64>,
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Matrix {
            dim,
            data: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = ONE;
        }
        m
    }

    /// Builds a matrix from rows. Panics if the rows are not square.
    pub fn from_rows<const N: usize>(rows: [[C64; N]; N]) -> Self {
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Matrix { dim: N, data }
    }

    pub fn from_vec(dim: usize, data: Vec<C64>) -> Self {
        assert_eq!(data.len(), dim * dim, "matrix data has wrong length");
        Matrix { dim, data }
    }

    pub fn diagonal(entries: &[C64]) -> Self {
        let mut m = Self::zeros(entries.len());
        for (i, &e) in entries.iter().enumerate() {
            m.set(i, i, e);
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[row * self.dim + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: C64) {
        self.data[row * self.dim + col] = value;
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn scale(&self, k: C64) -> Matrix {
        Matrix {
            dim: self.dim,
            data: self.data.iter().map(|&x| x * k).collect(),
        }
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.dim, other.dim);
        Matrix {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    /// `self * other`
    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.dim, other.dim, "dimension mismatch in product");
        let n = self.dim;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == ZERO {
                    continue;
                }
                let row = &other.data[k * n..(k + 1) * n];
                let dst = &mut out.data[i * n..(i + 1) * n];
                for (d, &b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        out
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Matrix {
        let n = self.dim;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.data[j * n + i] = self.data[i * n + j].conj();
            }
        }
        out
    }

    /// Kronecker product `self ⊗ other`; `other` occupies the low index bits.
    pub fn kron(&self, other: &Matrix) -> Matrix {
        let (a, b) = (self.dim, other.dim);
        let n = a * b;
        let mut out = Matrix::zeros(n);
        for i in 0..a {
            for j in 0..a {
                let x = self.get(i, j);
                if x == ZERO {
                    continue;
                }
                for k in 0..b {
                    for l in 0..b {
                        out.data[(i * b + k) * n + (j * b + l)] = x * other.get(k, l);
                    }
                }
            }
        }
        out
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// Largest entry-wise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `‖M·M† − I‖∞` (max entry modulus).
    pub fn unitarity_error(&self) -> f64 {
        self.mul(&self.adjoint())
            .max_abs_diff(&Matrix::identity(self.dim))
    }

    /// Equality up to a global phase: checks `self ≈ λ·other` with `|λ| = 1`.
    pub fn approx_eq_up_to_phase(&self, other: &Matrix, tol: f64) -> bool {
        if self.dim != other.dim {
            return false;
        }
        // Pick the phase from the largest entry of `other`.
        let (idx, _) = other
            .data
            .iter()
            .enumerate()
            .fold((0, -1.0), |best, (i, z)| if z.norm() > best.1 { (i, z.norm()) } else { best });
        let o = other.data[idx];
        if o.norm() < 1e-12 {
            return self.data.iter().all(|z| z.norm() <= tol);
        }
        let phase = self.data[idx] / o;
        if (phase.norm() - 1.0).abs() > tol {
            return false;
        }
        self.max_abs_diff(&other.scale(phase)) <= tol
    }

    /// Embeds a gate acting on `targets` (little-endian: `targets[k]` is bit
    /// `k` of the gate's own index) into an `n_qubits` register.
    pub fn embed(&self, targets: &[usize], n_qubits: usize) -> Matrix {
        let k = targets.len();
        assert_eq!(self.dim, 1 << k);
        let n = 1usize << n_qubits;
        let mut out = Matrix::zeros(n);
        let mask: usize = targets.iter().map(|&t| 1 << t).sum();
        for col in 0..n {
            let base = col & !mask;
            let sub_col = gather_bits(col, targets);
            for sub_row in 0..(1 << k) {
                let v = self.get(sub_row, sub_col);
                if v != ZERO {
                    let row = base | scatter_bits(sub_row, targets);
                    out.data[row * n + col] = v;
                }
            }
        }
        out
    }
}

/// Collects bits `targets[k]` of `index` into bit `k` of the result.
#[inline]
pub fn gather_bits(index: usize, targets: &[usize]) -> usize {
    targets
        .iter()
        .enumerate()
        .fold(0, |acc, (k, &t)| acc | (((index >> t) & 1) << k))
}

/// Inverse of [`gather_bits`]: spreads bit `k` of `sub` to bit `targets[k]`.
#[inline]
pub fn scatter_bits(sub: usize, targets: &[usize]) -> usize {
    targets
        .iter()
        .enumerate()
        .fold(0, |acc, (k, &t)| acc | (((sub >> k) & 1) << t))
}

/// Square root of a 2x2 unitary, itself unitary.
pub fn sqrt_2x2(u: &Matrix) -> Matrix {
    assert_eq!(u.dim(), 2);
    let det = u.get(0, 0) * u.get(1, 1) - u.get(0, 1) * u.get(1, 0);
    let tr = u.trace();
    // sqrt(U) = (U + sI) / t with s = ±sqrt(det), t = sqrt(tr + 2s).
    let s0 = det.sqrt();
    let pick = |s: C64| {
        let t = (tr + s * 2.0).sqrt();
        (s, t)
    };
    let (s, t) = {
        let a = pick(s0);
        let b = pick(-s0);
        if a.1.norm() >= b.1.norm() {
            a
        } else {
            b
        }
    };
    u.add(&Matrix::identity(2).scale(s)).scale(ONE / t)
}

/// Euler angles of a 2x2 unitary: `U = e^{iα} · u(θ, φ, λ)` where
/// `u(θ,φ,λ) = [[cos θ/2, −e^{iλ} sin θ/2], [e^{iφ} sin θ/2, e^{i(φ+λ)} cos θ/2]]`.
/// Returns `(θ, φ, λ, α)`.
pub fn euler_zyz(u: &Matrix) -> (f64, f64, f64, f64) {
    assert_eq!(u.dim(), 2);
    let (a, b, cc, d) = (u.get(0, 0), u.get(0, 1), u.get(1, 0), u.get(1, 1));
    let cos = a.norm().min(1.0);
    let sin = cc.norm().min(1.0);
    let theta = 2.0 * sin.atan2(cos);
    if sin < 1e-12 {
        // Diagonal: U = e^{iα} diag(1, e^{i(φ+λ)}); put everything in λ.
        let alpha = a.arg();
        let lam = d.arg() - alpha;
        return (theta, 0.0, lam, alpha);
    }
    if cos < 1e-12 {
        // Anti-diagonal: α + φ = arg(c), α + λ = arg(−b); pick α = 0.
        let alpha = 0.0;
        let phi = cc.arg();
        let lam = (-b).arg();
        return (theta, phi, lam, alpha);
    }
    let alpha = a.arg();
    let phi = cc.arg() - alpha;
    let lam = (-b).arg() - alpha;
    (theta, phi, lam, alpha)
}
