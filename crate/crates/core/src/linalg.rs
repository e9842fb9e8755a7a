//! Small dense helpers on complex matrices.
//!
//! The frame and qubit are ordered frame ⊗ qubit, so the composite index of
//! frame basis state `i` and qubit state `s` is `2 * i + s`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;

pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Trace out the qubit factor of a `2d × 2d` operator.
pub fn partial_trace_qubit(x: &CMatrix) -> CMatrix {
    let d = x.nrows() / 2;
    CMatrix::from_fn(d, d, |i, j| x[(2 * i, 2 * j)] + x[(2 * i + 1, 2 * j + 1)])
}

/// Trace out the frame factor of a `2d × 2d` operator.
pub fn partial_trace_frame(x: &CMatrix) -> CMatrix {
    let d = x.nrows() / 2;
    CMatrix::from_fn(2, 2, |s, t| (0..d).map(|i| x[(2 * i + s, 2 * i + t)]).sum())
}

pub fn trace(x: &CMatrix) -> Complex64 {
    x.diagonal().iter().sum()
}

/// `Tr[a b]` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let n = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// `Tr[a b]` when `b` vanishes outside `|i − k| ≤ band`.
pub fn trace_product_banded(a: &CMatrix, b: &CMatrix, band: usize) -> Complex64 {
    let n = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for k in i.saturating_sub(band)..(i + band + 1).min(n) {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

pub fn max_abs(x: &CMatrix) -> f64 {
    x.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max).sqrt()
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm_sqr())
        .fold(0.0, f64::max)
        .sqrt()
}

pub fn hermitian_defect(x: &CMatrix) -> f64 {
    let n = x.nrows();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for i in 0..=j {
            worst = worst.max((x[(i, j)] - x[(j, i)].conj()).norm_sqr());
        }
    }
    worst.sqrt()
}

pub fn hermitize(x: &CMatrix) -> CMatrix {
    (x + x.adjoint()).scale(0.5)
}

/// Eigenvalues (ascending) and eigenvectors of a Hermitian matrix. Only the
/// Hermitian part of `x` is used.
pub fn eigh(x: &CMatrix) -> (DVector<f64>, CMatrix) {
    let eig = SymmetricEigen::new(hermitize(x));
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let vectors = CMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

pub fn eigvalsh(x: &CMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(hermitize(x))
        .eigenvalues
        .iter()
        .copied()
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn min_eigenvalue(x: &CMatrix) -> f64 {
    eigvalsh(x).first().copied().unwrap_or(0.0)
}

/// `exp(coeff · h)` for Hermitian `h`, through its eigendecomposition.
pub fn expm_hermitian(h: &CMatrix, coeff: Complex64) -> CMatrix {
    let (values, vectors) = eigh(h);
    let n = values.len();
    let mut scaled = vectors.clone();
    for j in 0..n {
        let f = (coeff * values[j]).exp();
        for i in 0..n {
            scaled[(i, j)] *= f;
        }
    }
    scaled * vectors.adjoint()
}

/// Number of eigenvalues above one half; the rank of an orthogonal projector.
pub fn projector_rank(p: &CMatrix) -> usize {
    eigvalsh(p).into_iter().filter(|&v| v > 0.5).count()
}

pub fn pauli() -> [CMatrix; 3] {
    let z0 = c(0.0);
    let sx = CMatrix::from_row_slice(2, 2, &[z0, c(1.0), c(1.0), z0]);
    let sy = CMatrix::from_row_slice(2, 2, &[z0, -I, I, z0]);
    let sz = CMatrix::from_row_slice(2, 2, &[c(1.0), z0, z0, c(-1.0)]);
    [sx, sy, sz]
}
