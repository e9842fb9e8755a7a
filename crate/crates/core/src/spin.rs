//! su(2) matrix representations in the descending-m basis.
//!
//! Index 0 holds `m = l`, index `d - 1` holds `m = -l`. Every other module
//! inherits this ordering.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, QrfError, Result};
use crate::linalg::{c, eigh, CMatrix, I};

/// A spin quantum number stored as `2l` so half-integer spins are exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct SpinQuantum {
    twice_l: u32,
}

impl SpinQuantum {
    pub fn from_twice(twice_l: u32) -> Result<Self> {
        if twice_l == 0 {
            return Err(QrfError::InvalidSpin(0));
        }
        Ok(Self { twice_l })
    }

    /// Spin from a value like `16.0` or `1.5`; anything that is not a
    /// positive multiple of one half is rejected.
    pub fn from_l(l: f64) -> Result<Self> {
        ensure_finite("l", l)?;
        let twice = 2.0 * l;
        if twice < 0.5 || (twice - twice.round()).abs() > 1e-9 || twice > u32::MAX as f64 {
            return Err(QrfError::ParameterOutOfRange {
                name: "l",
                value: l,
                allowed: "positive multiple of 1/2",
            });
        }
        Self::from_twice(twice.round() as u32)
    }

    pub fn twice_l(self) -> u32 {
        self.twice_l
    }

    pub fn l(self) -> f64 {
        self.twice_l as f64 / 2.0
    }

    pub fn dim(self) -> usize {
        self.twice_l as usize + 1
    }

    pub fn is_integer(self) -> bool {
        self.twice_l % 2 == 0
    }

    /// `l (l + 1)`.
    pub fn casimir(self) -> f64 {
        let l = self.l();
        l * (l + 1.0)
    }

    /// Magnetic number held at basis index `i`.
    pub fn m_at(self, i: usize) -> f64 {
        self.l() - i as f64
    }

    /// Basis index of magnetic number `k`, if `k` is one of `l, l-1, …, -l`.
    pub fn index_of(self, k: f64) -> Result<usize> {
        let l = self.l();
        let offset = l - k;
        if !k.is_finite()
            || offset < -1e-9
            || offset > 2.0 * l + 1e-9
            || (offset - offset.round()).abs() > 1e-9
        {
            return Err(QrfError::MagneticNumberOutOfRange { l, k });
        }
        Ok(offset.round() as usize)
    }
}

impl TryFrom<u32> for SpinQuantum {
    type Error = QrfError;
    fn try_from(twice_l: u32) -> Result<Self> {
        Self::from_twice(twice_l)
    }
}

impl From<SpinQuantum> for u32 {
    fn from(s: SpinQuantum) -> u32 {
        s.twice_l
    }
}

impl std::fmt::Display for SpinQuantum {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.twice_l / 2)
        } else {
            write!(f, "{}/2", self.twice_l)
        }
    }
}

/// Dense `L_x, L_y, L_z, L_+, L_-` for one spin, plus the banded data the
/// structured channel kernels use directly.
#[derive(Debug, Clone)]
pub struct SpinOperators {
    pub spin: SpinQuantum,
    pub lx: CMatrix,
    pub ly: CMatrix,
    pub lz: CMatrix,
    pub lplus: CMatrix,
    pub lminus: CMatrix,
    /// `m` at each basis index.
    pub m: Vec<f64>,
    /// `ladder[i] = <m_i | L_+ | m_{i+1}>`, length `d - 1`.
    pub ladder: Vec<f64>,
    /// Symmetrized products `½{L_a, L_b}` indexed `[a][b]` with a, b in x, y, z.
    pub sym_products: [[CMatrix; 3]; 3],
    ly_eigenvalues: DVector<f64>,
    ly_eigenvectors: CMatrix,
}

pub fn build_spin_operators(spin: SpinQuantum) -> SpinOperators {
    let d = spin.dim();
    let l = spin.l();
    let m: Vec<f64> = (0..d).map(|i| spin.m_at(i)).collect();
    // <l, m | L+ | l, m-1> = sqrt(l(l+1) - m(m-1)) with m = m_i.
    let ladder: Vec<f64> = (0..d - 1)
        .map(|i| (l * (l + 1.0) - m[i] * (m[i] - 1.0)).sqrt())
        .collect();

    let mut lplus = CMatrix::zeros(d, d);
    for (i, &u) in ladder.iter().enumerate() {
        lplus[(i, i + 1)] = c(u);
    }
    let lminus = lplus.adjoint();
    let lz = CMatrix::from_diagonal(&DVector::from_iterator(d, m.iter().map(|&v| c(v))));
    let lx = (&lplus + &lminus).scale(0.5);
    let ly = (&lplus - &lminus).map(|v| v * (-0.5 * I));

    let ops = [&lx, &ly, &lz];
    let sym_products = std::array::from_fn(|a| {
        std::array::from_fn(|b| (ops[a] * ops[b] + ops[b] * ops[a]).scale(0.5))
    });
    let (ly_eigenvalues, ly_eigenvectors) = eigh(&ly);

    SpinOperators {
        spin,
        lx,
        ly,
        lz,
        lplus,
        lminus,
        m,
        ladder,
        sym_products,
        ly_eigenvalues,
        ly_eigenvectors,
    }
}

impl SpinOperators {
    pub fn new(spin: SpinQuantum) -> Self {
        build_spin_operators(spin)
    }

    pub fn dim(&self) -> usize {
        self.spin.dim()
    }

    pub fn l(&self) -> f64 {
        self.spin.l()
    }

    /// Cartesian component by index 0, 1, 2 for x, y, z.
    pub fn component(&self, a: usize) -> &CMatrix {
        match a {
            0 => &self.lx,
            1 => &self.ly,
            2 => &self.lz,
            _ => panic!("component index {a} out of range"),
        }
    }

    /// `exp(-i β L_y)`.
    pub fn rotation_y(&self, beta: f64) -> Result<CMatrix> {
        ensure_finite("beta", beta)?;
        let d = self.dim();
        let mut scaled = self.ly_eigenvectors.clone();
        for j in 0..d {
            let phase = Complex64::from_polar(1.0, -beta * self.ly_eigenvalues[j]);
            for i in 0..d {
                scaled[(i, j)] *= phase;
            }
        }
        Ok(scaled * self.ly_eigenvectors.adjoint())
    }

    /// `L'_x(θ) = L_x cosθ − L_z sinθ`, `L'_y = L_y`, `L'_z(θ) = L_z cosθ + L_x sinθ`.
    pub fn rotated_frame(&self, theta: f64) -> [CMatrix; 3] {
        let (s, co) = theta.sin_cos();
        [
            &self.lx * c(co) - &self.lz * c(s),
            self.ly.clone(),
            &self.lz * c(co) + &self.lx * c(s),
        ]
    }
}

pub fn rotation_y(beta: f64, ops: &SpinOperators) -> Result<CMatrix> {
    ops.rotation_y(beta)
}
