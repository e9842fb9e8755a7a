//! Frame descriptors and the operational success probability.

use serde::{Deserialize, Serialize};

use crate::analytic::{RotationPrediction, Validity};
use crate::channels::ProjectorPair;
use crate::spin::SpinOperators;
use crate::error::{QrfError, Result};
use crate::linalg::{self, c, CMatrix};
use crate::states::{DensityMatrix, SourceQubit};
use crate::trajectory::{self, CorrectionStrategy};

/// `|⟨L⟩|` at or below this is treated as unpolarized.
pub const UNPOLARIZED_TOL: f64 = 1e-10;
/// `|⟨L_y⟩| / |⟨L⟩|` above this marks a state as out of the X-Z plane.
pub const OUT_OF_PLANE_TOL: f64 = 1e-8;
/// Hard cap on the lifetime search.
pub const LIFETIME_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSummary {
    pub mean_l: [f64; 3],
    /// `|⟨L⟩| / l`.
    pub r: f64,
    /// `atan2(⟨L_x⟩, ⟨L_z⟩)` for in-plane states, the polar angle of `⟨L⟩` otherwise.
    pub theta: f64,
    pub out_of_plane: f64,
    /// `⟨½{L'_i, L'_j}⟩` in the frame rotated by `theta` about Y.
    pub quad: [[f64; 3]; 3],
}

impl FrameSummary {
    pub fn in_plane(&self) -> bool {
        self.out_of_plane <= OUT_OF_PLANE_TOL
    }

    pub fn norm(&self) -> f64 {
        norm3(self.mean_l)
    }
}

pub(crate) fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

pub(crate) fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Lab-frame symmetrized second moments `⟨½{L_a, L_b}⟩`.
pub fn lab_moments(rho: &DensityMatrix, ops: &SpinOperators) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in a..3 {
            // Products of two spin components are pentadiagonal.
            let v = linalg::trace_product_banded(rho.matrix(), &ops.sym_products[a][b], 2).re;
            out[a][b] = v;
            out[b][a] = v;
        }
    }
    out
}

/// Re-express lab moments in the frame `L'_x = L_x cosθ − L_z sinθ`,
/// `L'_y = L_y`, `L'_z = L_z cosθ + L_x sinθ`.
pub fn rotate_moments(m: &[[f64; 3]; 3], theta: f64) -> [[f64; 3]; 3] {
    let (s, co) = theta.sin_cos();
    let r = [[co, 0.0, -s], [0.0, 1.0, 0.0], [s, 0.0, co]];
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mut acc = 0.0;
            for a in 0..3 {
                for b in 0..3 {
                    acc += r[i][a] * m[a][b] * r[j][b];
                }
            }
            out[i][j] = acc;
        }
    }
    out
}

pub fn summarize_frame(rho: &DensityMatrix, ops: &SpinOperators) -> Result<FrameSummary> {
    let mean_l = rho.mean_l(ops);
    let norm = norm3(mean_l);
    if !(norm > UNPOLARIZED_TOL) {
        return Err(QrfError::UnpolarizedFrame(norm));
    }
    let out_of_plane = mean_l[1].abs() / norm;
    let theta = if out_of_plane <= OUT_OF_PLANE_TOL {
        mean_l[0].atan2(mean_l[2])
    } else {
        (mean_l[0].hypot(mean_l[1])).atan2(mean_l[2])
    };
    Ok(FrameSummary {
        mean_l,
        r: norm / ops.l(),
        theta,
        out_of_plane,
        quad: rotate_moments(&lab_moments(rho, ops), theta),
    })
}

/// Wrap an angle to `(−π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    let w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// `after.theta − before.theta` in `(−π, π]`.
pub fn rotation_between(before: &FrameSummary, after: &FrameSummary) -> Result<f64> {
    for s in [before, after] {
        if !s.in_plane() {
            return Err(QrfError::OutOfPlane(s.out_of_plane));
        }
    }
    Ok(wrap_angle(after.theta - before.theta))
}

/// Smallest rotation carrying the direction of `before` onto that of `after`.
pub fn axis_angle_fit(before: [f64; 3], after: [f64; 3]) -> Result<RotationPrediction> {
    let (nb, na) = (norm3(before), norm3(after));
    if !(nb > 0.0 && na > 0.0) {
        return Err(QrfError::DegenerateRotation("zero vector"));
    }
    let cr = cross3(before, after);
    let sin = norm3(cr) / (nb * na);
    let cos = dot3(before, after) / (nb * na);
    if sin < 1e-15 {
        if cos < 0.0 {
            return Err(QrfError::DegenerateRotation("antiparallel vectors"));
        }
        return Ok(RotationPrediction {
            omega: 0.0,
            axis: [0.0, 0.0, 1.0],
            validity: Validity::Fitted,
        });
    }
    let n = norm3(cr);
    Ok(RotationPrediction {
        omega: sin.atan2(cos),
        axis: [cr[0] / n, cr[1] / n, cr[2] / n],
        validity: Validity::Fitted,
    })
}

fn check_unit(n_hat: [f64; 3]) -> Result<()> {
    let n = norm3(n_hat);
    if !n.is_finite() || (n - 1.0).abs() > 1e-9 {
        return Err(QrfError::ParameterOutOfRange {
            name: "n_hat",
            value: n,
            allowed: "unit vector",
        });
    }
    Ok(())
}

/// `½(1 + n̂·⟨L⟩/(l+½))`.
pub fn p_succ(rho: &DensityMatrix, ops: &SpinOperators, n_hat: [f64; 3]) -> Result<f64> {
    check_unit(n_hat)?;
    Ok(p_succ_unchecked(rho.mean_l(ops), ops.l(), n_hat))
}

/// [`p_succ`] from a recorded `⟨L⟩`.
pub fn p_succ_from_mean_l(mean_l: [f64; 3], l: f64, n_hat: [f64; 3]) -> Result<f64> {
    check_unit(n_hat)?;
    Ok(p_succ_unchecked(mean_l, l, n_hat))
}

pub(crate) fn p_succ_unchecked(mean_l: [f64; 3], l: f64, n_hat: [f64; 3]) -> f64 {
    (0.5 * (1.0 + dot3(n_hat, mean_l) / (l + 0.5))).clamp(0.0, 1.0)
}

/// Qubit projector `|n̂⟩⟨n̂| = ½(I + n̂·σ)`.
fn qubit_projector(n_hat: [f64; 3]) -> CMatrix {
    let paulis = linalg::pauli();
    let mut m = linalg::identity(2);
    for a in 0..3 {
        m += paulis[a].scale(n_hat[a]);
    }
    m.scale(0.5)
}

/// `½ Tr[Π₊(ρ ⊗ |n̂⟩⟨n̂|) + Π₋(ρ ⊗ |−n̂⟩⟨−n̂|)]` on the composite space.
pub fn p_succ_trace(rho: &DensityMatrix, pair: &ProjectorPair, n_hat: [f64; 3]) -> Result<f64> {
    check_unit(n_hat)?;
    let up = linalg::kron(rho.matrix(), &qubit_projector(n_hat));
    let down = linalg::kron(rho.matrix(), &qubit_projector(n_hat.map(|v| -v)));
    let t = linalg::trace_product(&pair.pi_plus, &up) + linalg::trace_product(&pair.pi_minus, &down);
    Ok(0.5 * (t * c(1.0)).re)
}

/// Outcome of a lifetime search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Lifetime {
    /// First measurement count at which `P_succ` fell below the threshold.
    Crossed(u64),
    /// The threshold was not crossed within the cap.
    Capped(u64),
}

impl Lifetime {
    pub fn steps(self) -> u64 {
        match self {
            Lifetime::Crossed(n) | Lifetime::Capped(n) => n,
        }
    }
}

/// Number of measurements, under average evolution with `strategy`, before
/// `P_succ` along the initial frame direction drops below `threshold`.
/// Corrective interactions are not counted.
pub fn usable_lifetime(
    rho0: &DensityMatrix,
    q: SourceQubit,
    ops: &SpinOperators,
    threshold: f64,
    strategy: &CorrectionStrategy,
) -> Result<Lifetime> {
    usable_lifetime_capped(rho0, q, ops, threshold, strategy, LIFETIME_CAP)
}

pub fn usable_lifetime_capped(
    rho0: &DensityMatrix,
    q: SourceQubit,
    ops: &SpinOperators,
    threshold: f64,
    strategy: &CorrectionStrategy,
    cap: u64,
) -> Result<Lifetime> {
    let start = rho0.mean_l(ops);
    let norm = norm3(start);
    if !(norm > UNPOLARIZED_TOL) {
        return Err(QrfError::UnpolarizedFrame(norm));
    }
    let n_hat = start.map(|v| v / norm);
    let p0 = p_succ_unchecked(start, ops.l(), n_hat);
    if !(threshold > 0.5 && threshold < p0) {
        return Err(QrfError::Precondition(format!(
            "lifetime threshold {threshold} must lie in (0.5, {p0})"
        )));
    }
    let mut evolver = trajectory::AverageEvolver::new(rho0.clone(), q, ops, strategy)?;
    for n in 1..=cap {
        evolver.measure()?;
        let p = p_succ_unchecked(evolver.state().mean_l(ops), ops.l(), n_hat);
        if p < threshold {
            return Ok(Lifetime::Crossed(n));
        }
    }
    Ok(Lifetime::Capped(cap))
}

/// Ordinary least squares slope and intercept of `ln y` against `ln x`.
pub fn loglog_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(QrfError::Precondition("log-log fit needs two or more paired points".into()));
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0)) {
        return Err(QrfError::Precondition("log-log fit needs positive data".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}
