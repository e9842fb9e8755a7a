//! Frame and source states: density matrices and the state families used
//! throughout (coherent, rotated Dicke, Dicke mixtures, thermal, quadratic
//! Bloch).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, QrfError, Result};
use crate::linalg::{self, c, CMatrix};
use crate::spin::SpinOperators;

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-12;
pub const POSITIVITY_TOL: f64 = 1e-10;

/// Drift above which [`DensityMatrix::sanitize`] rewrites the matrix.
pub const HYGIENE_TRIGGER: f64 = 1e-13;
/// Drift above which a hygiene correction is logged.
pub const HYGIENE_WARN: f64 = 1e-10;

/// A Hermitian, unit-trace, positive-semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    entries: CMatrix,
}

impl DensityMatrix {
    /// Validate and wrap a matrix.
    pub fn new(entries: CMatrix) -> Result<Self> {
        let rho = Self { entries };
        rho.validate()?;
        Ok(rho)
    }

    /// Wrap without the eigenvalue check. Channel outputs use this; the
    /// trajectory engine re-validates at its own cadence.
    pub fn from_matrix_unchecked(entries: CMatrix) -> Self {
        Self { entries }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            entries: linalg::identity(dim).scale(1.0 / dim as f64),
        }
    }

    /// `|ψ⟩⟨ψ|` for a normalized vector given as a matrix column.
    pub fn pure(psi: &CMatrix) -> Self {
        let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        Self {
            entries: (psi * psi.adjoint()).scale(1.0 / norm2),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.entries;
        if !m.is_square() {
            return Err(QrfError::InvalidDensityMatrix(format!(
                "shape {}x{} is not square",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(QrfError::InvalidDensityMatrix("non-finite entry".into()));
        }
        let herm = linalg::hermitian_defect(m);
        if herm > HERMITIAN_TOL {
            return Err(QrfError::InvalidDensityMatrix(format!(
                "Hermitian defect {herm:e}"
            )));
        }
        let tr = linalg::trace(m);
        if (tr - c(1.0)).norm() > TRACE_TOL {
            return Err(QrfError::InvalidDensityMatrix(format!(
                "trace {tr} differs from 1"
            )));
        }
        let min = linalg::min_eigenvalue(m);
        if min < -POSITIVITY_TOL {
            return Err(QrfError::NotPositive { min_eigenvalue: min });
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_matrix(self) -> CMatrix {
        self.entries
    }

    pub fn trace(&self) -> Complex64 {
        linalg::trace(&self.entries)
    }

    pub fn purity(&self) -> f64 {
        linalg::trace_product(&self.entries, &self.entries).re
    }

    /// `Tr[ρ A]`.
    pub fn expect(&self, a: &CMatrix) -> Complex64 {
        linalg::trace_product(&self.entries, a)
    }

    /// `⟨L⟩` from the banded structure of the spin operators, O(d).
    pub fn mean_l(&self, ops: &SpinOperators) -> [f64; 3] {
        let rho = &self.entries;
        let lz: f64 = ops.m.iter().enumerate().map(|(i, &m)| m * rho[(i, i)].re).sum();
        // Tr[L+ ρ] = Σ u_i ρ_{i+1,i} = ⟨Lx⟩ + i⟨Ly⟩.
        let lp: Complex64 = ops
            .ladder
            .iter()
            .enumerate()
            .map(|(i, &u)| rho[(i + 1, i)] * u)
            .sum();
        [lp.re, lp.im, lz]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::min_eigenvalue(&self.entries)
    }

    /// Restore Hermiticity and unit trace when floating-point drift exceeds
    /// [`HYGIENE_TRIGGER`]. Returns the size of the correction.
    pub fn sanitize(&mut self) -> f64 {
        let herm = linalg::hermitian_defect(&self.entries);
        let tr = linalg::trace(&self.entries);
        let trace_drift = (tr - c(1.0)).norm();
        let drift = herm.max(trace_drift);
        if drift > HYGIENE_TRIGGER {
            let mut fixed = linalg::hermitize(&self.entries);
            let t = linalg::trace(&fixed).re;
            fixed.scale_mut(1.0 / t);
            self.entries = fixed;
            if drift > HYGIENE_WARN {
                log::warn!("density-matrix hygiene corrected drift of {drift:e}");
            }
        }
        drift
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        linalg::max_abs_diff(&self.entries, &other.entries)
    }

    /// Convex combination `Σ w_k ρ_k`.
    pub fn mixture(parts: &[(f64, &DensityMatrix)]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| QrfError::Precondition("empty mixture".into()))?;
        let d = first.1.dim();
        let mut acc = CMatrix::zeros(d, d);
        for (w, rho) in parts {
            if rho.dim() != d {
                return Err(QrfError::DimensionMismatch {
                    expected: d,
                    got: rho.dim(),
                });
            }
            acc += rho.matrix().scale(*w);
        }
        Ok(Self::from_matrix_unchecked(acc))
    }
}

/// A spin-1/2 source `ξ = ½(I + z σ_z)`; `z > 0` is the S ensemble and
/// `z < 0` the anti-polarized S̄ ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct SourceQubit {
    z: f64,
}

impl SourceQubit {
    pub fn new(z: f64) -> Result<Self> {
        ensure_finite("z", z)?;
        if z.abs() > 1.0 {
            return Err(QrfError::ParameterOutOfRange {
                name: "z",
                value: z,
                allowed: "[-1, 1]",
            });
        }
        Ok(Self { z })
    }

    pub fn z(self) -> f64 {
        self.z
    }

    /// The oppositely polarized source.
    pub fn flipped(self) -> Self {
        Self { z: -self.z }
    }

    pub fn matrix(self) -> CMatrix {
        CMatrix::from_row_slice(
            2,
            2,
            &[c(0.5 * (1.0 + self.z)), c(0.0), c(0.0), c(0.5 * (1.0 - self.z))],
        )
    }
}

impl TryFrom<f64> for SourceQubit {
    type Error = QrfError;
    fn try_from(z: f64) -> Result<Self> {
        Self::new(z)
    }
}

impl From<SourceQubit> for f64 {
    fn from(q: SourceQubit) -> f64 {
        q.z
    }
}

pub fn source_state(q: SourceQubit) -> DensityMatrix {
    DensityMatrix::from_matrix_unchecked(q.matrix())
}

fn rotated_basis_state(ops: &SpinOperators, index: usize, theta: f64) -> Result<DensityMatrix> {
    let r = ops.rotation_y(theta)?;
    Ok(DensityMatrix::pure(&r.columns(index, 1).into_owned()))
}

/// `exp(-iθL_y)|l,l⟩`, a spin-coherent state with `⟨L⟩ = l(sinθ, 0, cosθ)`.
pub fn coherent_state(ops: &SpinOperators, theta: f64) -> Result<DensityMatrix> {
    rotated_basis_state(ops, 0, theta)
}

/// `exp(-iθL_y)|l,k⟩⟨l,k|exp(iθL_y)`.
pub fn rotated_dicke_state(ops: &SpinOperators, k: f64, theta: f64) -> Result<DensityMatrix> {
    let idx = ops.spin.index_of(k)?;
    rotated_basis_state(ops, idx, theta)
}

/// `p`-weighted mixture of two rotated Dicke states sharing the angle `beta`.
pub fn mixed_dicke_state(
    ops: &SpinOperators,
    k1: f64,
    k2: f64,
    p: f64,
    beta: f64,
) -> Result<DensityMatrix> {
    ensure_finite("p", p)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(QrfError::ParameterOutOfRange {
            name: "p",
            value: p,
            allowed: "[0, 1]",
        });
    }
    let i1 = ops.spin.index_of(k1)?;
    let i2 = ops.spin.index_of(k2)?;
    let r = ops.rotation_y(beta)?;
    let a = DensityMatrix::pure(&r.columns(i1, 1).into_owned());
    let b = DensityMatrix::pure(&r.columns(i2, 1).into_owned());
    DensityMatrix::mixture(&[(p, &a), (1.0 - p, &b)])
}

/// Mean magnetic number of the Gibbs weights `exp(-β m)`, evaluated with a
/// shifted exponent so large |β l| does not overflow.
fn gibbs_weights(ops: &SpinOperators, beta: f64) -> Vec<f64> {
    let exps: Vec<f64> = ops.m.iter().map(|&m| -beta * m).collect();
    let top = exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = exps.iter().map(|&e| (e - top).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

fn gibbs_mean_m(ops: &SpinOperators, beta: f64) -> f64 {
    gibbs_weights(ops, beta)
        .iter()
        .zip(&ops.m)
        .map(|(w, m)| w * m)
        .sum()
}

pub const THERMAL_BETA_BRACKET: f64 = 50.0;

/// Inverse temperature with `⟨L_z⟩_β = r l` for the Gibbs state `exp(-β L_z)/Z`.
pub fn thermal_beta(ops: &SpinOperators, r: f64) -> Result<f64> {
    ensure_finite("r", r)?;
    if r.abs() >= 1.0 {
        return Err(QrfError::UnreachablePolarization(r));
    }
    if r == 0.0 {
        return Ok(0.0);
    }
    let l = ops.l();
    let target = r * l;
    // ⟨m⟩_β is strictly decreasing in β.
    let (mut lo, mut hi) = (-THERMAL_BETA_BRACKET, THERMAL_BETA_BRACKET);
    if target > gibbs_mean_m(ops, lo) || target < gibbs_mean_m(ops, hi) {
        return Err(QrfError::UnreachablePolarization(r));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f = gibbs_mean_m(ops, mid);
        if (f - target).abs() <= 1e-13 * l {
            return Ok(mid);
        }
        if f > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-16 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `exp(-β L'_z(θ)) / Z` with β chosen so the polarization is `r`.
pub fn thermal_partial_coherent(ops: &SpinOperators, r: f64, theta: f64) -> Result<DensityMatrix> {
    let beta = thermal_beta(ops, r)?;
    let w = gibbs_weights(ops, beta);
    let rot = ops.rotation_y(theta)?;
    let d = ops.dim();
    let mut scaled = rot.clone();
    for j in 0..d {
        for i in 0..d {
            scaled[(i, j)] *= w[j];
        }
    }
    let rho = scaled * rot.adjoint();
    Ok(DensityMatrix::from_matrix_unchecked(linalg::hermitize(&rho)))
}

/// Parameters of a quadratic Bloch state
/// `ρ = (1/d)(I + R·L + ½ Σ T^{ab}{L_a, L_b})`.
///
/// The linear part is stored as `bloch = ⟨L⟩ / l`, so the literal coefficient
/// is `R = 3·bloch / (l + 1)`. For `l = 1/2` this is the ordinary qubit Bloch
/// vector: `bloch = (0, 0, 1)` is `|↑⟩⟨↑|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticBlochSpec {
    pub bloch: [f64; 3],
    pub t: [[f64; 3]; 3],
}

impl QuadraticBlochSpec {
    pub fn new(bloch: [f64; 3], t: [[f64; 3]; 3]) -> Result<Self> {
        let spec = Self { bloch, t };
        spec.validate()?;
        Ok(spec)
    }

    /// Build from the literal coefficient vector `R` of the expansion.
    pub fn from_literal(l: f64, r_literal: [f64; 3], t: [[f64; 3]; 3]) -> Result<Self> {
        let k = (l + 1.0) / 3.0;
        Self::new(r_literal.map(|x| x * k), t)
    }

    pub fn literal_r(&self, l: f64) -> [f64; 3] {
        let k = 3.0 / (l + 1.0);
        self.bloch.map(|x| x * k)
    }

    pub fn validate(&self) -> Result<()> {
        for v in self.bloch.iter().chain(self.t.iter().flatten()) {
            ensure_finite("quadratic Bloch parameter", *v)?;
        }
        for a in 0..3 {
            for b in 0..3 {
                if (self.t[a][b] - self.t[b][a]).abs() > 1e-12 {
                    return Err(QrfError::ParameterOutOfRange {
                        name: "T (asymmetry)",
                        value: self.t[a][b] - self.t[b][a],
                        allowed: "symmetric tensor",
                    });
                }
            }
        }
        let tr = self.t[0][0] + self.t[1][1] + self.t[2][2];
        if tr.abs() > 1e-12 {
            return Err(QrfError::ParameterOutOfRange {
                name: "trace(T)",
                value: tr,
                allowed: "traceless tensor",
            });
        }
        Ok(())
    }
}

pub fn quadratic_bloch_state(ops: &SpinOperators, spec: &QuadraticBlochSpec) -> Result<DensityMatrix> {
    spec.validate()?;
    let d = ops.dim();
    let r = spec.literal_r(ops.l());
    let mut m = linalg::identity(d);
    for a in 0..3 {
        m += ops.component(a).scale(r[a]);
        for b in 0..3 {
            m += ops.sym_products[a][b].scale(spec.t[a][b]);
        }
    }
    m.scale_mut(1.0 / d as f64);
    let min = linalg::min_eigenvalue(&m);
    if min < -POSITIVITY_TOL {
        return Err(QrfError::NotPositive { min_eigenvalue: min });
    }
    DensityMatrix::new(linalg::hermitize(&m))
}
