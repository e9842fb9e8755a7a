//! Closed-form large-l predictions for the rotation of the frame.
//!
//! Angles follow the convention `Ω = θ_after − θ_before` with `θ` measured
//! from +Z toward +X. Quotients of the form `tan Ω = num / den` are
//! evaluated as `atan2(num·sgn(den), |den|)`, which is the principal branch
//! away from `den = 0` and continuous through it.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, QrfError, Result};
use crate::linalg;
use crate::metrics::FrameSummary;
use crate::spin::{SpinOperators, SpinQuantum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Validity {
    Average,
    PlusOutcome,
    MinusOutcome,
    Unitary,
    /// Extracted from two polarization vectors rather than predicted.
    Fitted,
}

/// Right-handed rotation by `omega` about `axis`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationPrediction {
    pub omega: f64,
    pub axis: [f64; 3],
    pub validity: Validity,
}

impl RotationPrediction {
    /// `omega · axis`.
    pub fn rotation_vector(&self) -> [f64; 3] {
        self.axis.map(|a| a * self.omega)
    }

    /// Apply the rotation to `v` (Rodrigues).
    pub fn rotate(&self, v: [f64; 3]) -> [f64; 3] {
        let k = self.axis;
        let (s, c) = self.omega.sin_cos();
        let kv = crate::metrics::dot3(k, v);
        let kxv = crate::metrics::cross3(k, v);
        std::array::from_fn(|i| v[i] * c + kxv[i] * s + k[i] * kv * (1.0 - c))
    }
}

fn check_polarization(r: f64) -> Result<()> {
    ensure_finite("r", r)?;
    if r == 0.0 || r.abs() > 1.0 + 1e-9 {
        return Err(QrfError::ParameterOutOfRange {
            name: "r",
            value: r,
            allowed: "0 < |r| <= 1",
        });
    }
    Ok(())
}

fn check_z(z: f64) -> Result<()> {
    ensure_finite("z", z)?;
    if z.abs() > 1.0 {
        return Err(QrfError::ParameterOutOfRange {
            name: "z",
            value: z,
            allowed: "[-1, 1]",
        });
    }
    Ok(())
}

fn check_l(l: f64) -> Result<()> {
    SpinQuantum::from_l(l).map(|_| ())
}

/// `Ω` with `tan Ω = num / den`.
fn atan_quotient(num: f64, den: f64) -> f64 {
    if den < 0.0 {
        (-num).atan2(-den)
    } else {
        num.atan2(den)
    }
}

/// `Ω = −(r z / 2l) sin θ`.
pub fn average_drift_angle(l: f64, r: f64, z: f64, theta: f64) -> Result<f64> {
    check_l(l)?;
    if l < 1.0 {
        return Err(QrfError::ParameterOutOfRange {
            name: "l",
            value: l,
            allowed: "l >= 1",
        });
    }
    ensure_finite("r", r)?;
    check_z(z)?;
    ensure_finite("theta", theta)?;
    Ok(-(r * z / (2.0 * l)) * theta.sin())
}

/// `Ω± = −arctan[z sinθ (r² ± [l(1−r²)+1]) / (2rl(1 ± zr cosθ))]`.
pub fn selective_angles_partially_coherent(l: f64, r: f64, z: f64, theta: f64) -> Result<(f64, f64)> {
    check_l(l)?;
    check_polarization(r)?;
    check_z(z)?;
    ensure_finite("theta", theta)?;
    let (s, c) = theta.sin_cos();
    let branch = |sign: f64| {
        let num = z * s * (r * r + sign * (l * (1.0 - r * r) + 1.0));
        let den = 2.0 * r * l * (1.0 + sign * z * r * c);
        -atan_quotient(num, den)
    };
    Ok((branch(1.0), branch(-1.0)))
}

/// `l → ∞` limit of [`selective_angles_partially_coherent`]:
/// `Ω± = ±arctan[z(r²−1) sinθ / (2r(1 ± zr cosθ))]`.
pub fn selective_angles_large_l(r: f64, z: f64, theta: f64) -> Result<(f64, f64)> {
    check_polarization(r)?;
    check_z(z)?;
    ensure_finite("theta", theta)?;
    let (s, c) = theta.sin_cos();
    let branch = |sign: f64| {
        sign * atan_quotient(z * (r * r - 1.0) * s, 2.0 * r * (1.0 + sign * z * r * c))
    };
    Ok((branch(1.0), branch(-1.0)))
}

/// Which denominator to use in the moment-based angle formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneralForm {
    /// Denominator `1 ± (z/rl²)(cosθ⟨L'_z²⟩ − sinθ⟨L'_xL'_z⟩)`; reduces exactly to
    /// the partially coherent formula on Dicke moments and is the tangent form
    /// of the implicit relation in [`implicit_omega_residual`].
    #[default]
    Consistent,
    /// As above with an additional `(zr/2l) cosθ` in the denominator.
    Printed,
}

/// `Ω±` from the state's actual rotated second moments.
pub fn selective_angles_general(frame: &FrameSummary, l: f64, z: f64) -> Result<(f64, f64)> {
    selective_angles_general_with(frame, l, z, GeneralForm::Consistent)
}

pub fn selective_angles_general_with(
    frame: &FrameSummary,
    l: f64,
    z: f64,
    form: GeneralForm,
) -> Result<(f64, f64)> {
    check_l(l)?;
    check_z(z)?;
    let r = frame.r;
    if !(r > 0.0) {
        return Err(QrfError::UnpolarizedFrame(r * l));
    }
    let (s, c) = frame.theta.sin_cos();
    let q = &frame.quad;
    let (xx, zz, xz) = (q[0][0], q[2][2], q[0][2]);
    let k = z / (r * l * l);
    let base = match form {
        GeneralForm::Consistent => 1.0,
        GeneralForm::Printed => 1.0 + z * r / (2.0 * l) * c,
    };
    let branch = |sign: f64| {
        let num = -(z * r / (2.0 * l)) * s + sign * k * (c * xz - s * xx);
        let den = base + sign * k * (c * zz - s * xz);
        atan_quotient(num, den)
    };
    Ok((branch(1.0), branch(-1.0)))
}

/// Source of the quartic trace coefficients used by the quadratic Bloch formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuarticSource {
    #[default]
    BruteForce,
    Printed,
}

/// `(α_l, β_l)` from the closed forms
/// `α = l(l+1)(2l+1)(1+2l(l+1))/15`, `β = l(l+1)(4l²−1)(2l+3)/15`.
pub fn quartic_coefficients_printed(l: f64) -> (f64, f64) {
    let alpha = l * (l + 1.0) * (2.0 * l + 1.0) * (1.0 + 2.0 * l * (l + 1.0)) / 15.0;
    let beta = l * (l + 1.0) * (4.0 * l * l - 1.0) * (2.0 * l + 3.0) / 15.0;
    (alpha, beta)
}

/// `(α_l, β_l)` read off `Tr[{L_x,L_x}{L_y,L_y}]` and `Tr[{L_x,L_y}{L_x,L_y}]`.
pub fn quartic_coefficients_brute(ops: &SpinOperators) -> (f64, f64) {
    (
        su2_quartic_trace_brute(ops, 0, 0, 1, 1),
        su2_quartic_trace_brute(ops, 0, 1, 0, 1),
    )
}

fn delta(a: usize, b: usize) -> f64 {
    if a == b {
        1.0
    } else {
        0.0
    }
}

fn isotropic(alpha: f64, beta: f64, i: usize, j: usize, k: usize, m: usize) -> f64 {
    alpha * delta(i, j) * delta(k, m) + beta * (delta(i, k) * delta(j, m) + delta(i, m) * delta(j, k))
}

fn check_indices(idx: [usize; 4]) -> Result<()> {
    if let Some(&bad) = idx.iter().find(|&&v| v > 2) {
        return Err(QrfError::ParameterOutOfRange {
            name: "index",
            value: bad as f64,
            allowed: "0, 1, 2 for x, y, z",
        });
    }
    Ok(())
}

/// `α_l δ_ij δ_km + β_l (δ_ik δ_jm + δ_im δ_jk)` with the closed-form coefficients.
pub fn su2_quartic_trace(l: f64, i: usize, j: usize, k: usize, m: usize) -> Result<f64> {
    check_l(l)?;
    check_indices([i, j, k, m])?;
    let (alpha, beta) = quartic_coefficients_printed(l);
    Ok(isotropic(alpha, beta, i, j, k, m))
}

/// `Tr[{L_i,L_j}{L_k,L_m}]` by direct matrix products.
pub fn su2_quartic_trace_brute(ops: &SpinOperators, i: usize, j: usize, k: usize, m: usize) -> f64 {
    4.0 * linalg::trace_product(&ops.sym_products[i][j], &ops.sym_products[k][m]).re
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuarticAudit {
    pub l: f64,
    pub alpha_printed: f64,
    pub beta_printed: f64,
    pub alpha_brute: f64,
    pub beta_brute: f64,
    /// Worst `|Tr[{L_i,L_j}{L_k,L_m}] − isotropic form|` over all 81 index
    /// choices, using the brute-force coefficients.
    pub isotropy_residual: f64,
    /// Worst deviation of the printed closed form from the brute-force trace.
    pub printed_max_error: f64,
}

impl QuarticAudit {
    /// Brute-force over printed; `None` if the printed value is zero.
    pub fn alpha_ratio(&self) -> Option<f64> {
        (self.alpha_printed != 0.0).then(|| self.alpha_brute / self.alpha_printed)
    }

    pub fn beta_ratio(&self) -> Option<f64> {
        (self.beta_printed != 0.0).then(|| self.beta_brute / self.beta_printed)
    }
}

pub fn audit_quartic_trace(spin: SpinQuantum) -> QuarticAudit {
    let ops = SpinOperators::new(spin);
    let l = spin.l();
    let (alpha_printed, beta_printed) = quartic_coefficients_printed(l);
    let (alpha_brute, beta_brute) = quartic_coefficients_brute(&ops);
    let mut isotropy_residual: f64 = 0.0;
    let mut printed_max_error: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                for m in 0..3 {
                    let t = su2_quartic_trace_brute(&ops, i, j, k, m);
                    isotropy_residual =
                        isotropy_residual.max((t - isotropic(alpha_brute, beta_brute, i, j, k, m)).abs());
                    printed_max_error = printed_max_error
                        .max((t - isotropic(alpha_printed, beta_printed, i, j, k, m)).abs());
                }
            }
        }
    }
    QuarticAudit {
        l,
        alpha_printed,
        beta_printed,
        alpha_brute,
        beta_brute,
        isotropy_residual,
        printed_max_error,
    }
}

/// `β_l` from the selected source. The brute-force value is exact; only
/// `β_l` enters the angle formula because `T` is traceless.
pub fn quartic_beta(spin: SpinQuantum, source: QuarticSource) -> f64 {
    match source {
        QuarticSource::Printed => quartic_coefficients_printed(spin.l()).1,
        QuarticSource::BruteForce => {
            let ops = SpinOperators::new(spin);
            quartic_coefficients_brute(&ops).1
        }
    }
}

fn check_tensor(t: &[[f64; 3]; 3]) -> Result<()> {
    for row in t {
        for &v in row {
            ensure_finite("T", v)?;
        }
    }
    let asym = (t[0][1] - t[1][0])
        .abs()
        .max((t[0][2] - t[2][0]).abs())
        .max((t[1][2] - t[2][1]).abs());
    let trace = t[0][0] + t[1][1] + t[2][2];
    let scale = t.iter().flatten().fold(1.0_f64, |m, v| m.max(v.abs()));
    if asym > 1e-12 * scale || trace.abs() > 1e-12 * scale {
        return Err(QrfError::Precondition(format!(
            "T must be symmetric and traceless (asymmetry {asym:e}, trace {trace:e})"
        )));
    }
    Ok(())
}

/// `tan Ω± = −(15zr² sinθ ± z(l+1)(d²−4)T₁(θ)) / (30rl ± z(l+1)(d²−4)T₂(θ))`
/// with `T₁ = T^{xx} cosθ sin2θ − T^{zz} sinθ cos2θ + T^{xz} cos3θ` and
/// `T₂ = T^{xx} sinθ sin2θ + T^{zz} cosθ cos2θ + T^{xz} sin3θ`.
///
/// The factor `(l+1)(d²−4)/15` is `β_l/(l d)`; `source` picks where `β_l`
/// comes from.
pub fn selective_angles_quadratic_bloch(
    l: f64,
    r: f64,
    z: f64,
    theta: f64,
    t: &[[f64; 3]; 3],
    source: QuarticSource,
) -> Result<(f64, f64)> {
    let spin = SpinQuantum::from_l(l)?;
    check_polarization(r)?;
    check_z(z)?;
    ensure_finite("theta", theta)?;
    check_tensor(t)?;
    let d = spin.dim() as f64;
    let g = z * quartic_beta(spin, source) / (l * d);
    let (s, c) = theta.sin_cos();
    let (s2, c2) = (2.0 * theta).sin_cos();
    let (s3, c3) = (3.0 * theta).sin_cos();
    let t1 = t[0][0] * c * s2 - t[2][2] * s * c2 + t[0][2] * c3;
    let t2 = t[0][0] * s * s2 + t[2][2] * c * c2 + t[0][2] * s3;
    let branch = |sign: f64| {
        let num = z * r * r * s + sign * g * t1;
        let den = 2.0 * r * l + sign * g * t2;
        -atan_quotient(num, den)
    };
    Ok((branch(1.0), branch(-1.0)))
}

/// Axis and signed angle of the polarization rotation produced by `F_γ`.
///
/// To first order in `1/l`, `δ⟨L⟩ = ω × ⟨L⟩` with
/// `ω = −(0, (zr/l) sinθ sin²(γ/2), (z/2l) sinγ)`. The returned axis is that
/// vector's direction up to the sign of `z`, and `omega = −Ω_F` with
/// `Ω_F = (z/l) sin(γ/2) √(r² sin²θ sin²(γ/2) + cos²(γ/2))`, so that
/// `omega · axis = ω`. At `γ = π` the axis is `(0, 1, 0)`.
pub fn unitary_rotation_prediction(l: f64, r: f64, z: f64, theta: f64, gamma: f64) -> Result<RotationPrediction> {
    check_l(l)?;
    check_polarization(r)?;
    check_z(z)?;
    ensure_finite("theta", theta)?;
    ensure_finite("gamma", gamma)?;
    // sin(π) is not exactly zero in floating point; pin the axis at γ ≡ π.
    let at_pi = (gamma - PI).rem_euclid(2.0 * PI) == 0.0;
    let (hs, hc) = if at_pi { (1.0, 0.0) } else { (0.5 * gamma).sin_cos() };
    let st = theta.sin();
    let omega_f = (z / l) * hs * (r * r * st * st * hs * hs + hc * hc).sqrt();
    if omega_f == 0.0 {
        return Ok(RotationPrediction {
            omega: 0.0,
            axis: [0.0, 1.0, 0.0],
            validity: Validity::Unitary,
        });
    }
    let a = (z * r / l) * st * hs * hs;
    let b = (z / l) * hs * hc;
    let axis = [0.0, a / omega_f, b / omega_f];
    let n = crate::metrics::norm3(axis);
    Ok(RotationPrediction {
        omega: -omega_f,
        axis: axis.map(|v| v / n),
        validity: Validity::Unitary,
    })
}

/// The axis direction `(0, (1/r) cscθ cot(γ/2), 1)` as printed, normalized.
/// Kept for comparison; see [`unitary_rotation_prediction`] for the axis
/// that matches the exact channel.
pub fn unitary_axis_printed(r: f64, theta: f64, gamma: f64) -> Result<[f64; 3]> {
    check_polarization(r)?;
    ensure_finite("theta", theta)?;
    ensure_finite("gamma", gamma)?;
    let st = theta.sin();
    let hs = (0.5 * gamma).sin();
    if st.abs() < 1e-300 {
        return Err(QrfError::Singular("csc(theta) at theta = 0 or pi"));
    }
    if hs.abs() < 1e-300 {
        return Err(QrfError::Singular("cot(gamma/2) at gamma = 0 mod 2pi"));
    }
    let y = (0.5 * gamma).cos() / (hs * r * st);
    if !y.is_finite() {
        return Err(QrfError::NonFinite("printed axis component"));
    }
    let n = (1.0 + y * y).sqrt();
    Ok([0.0, y / n, 1.0 / n])
}

/// Large-l outcome probabilities `½ ± ½ zr cosθ`.
pub fn outcome_probability(l: f64, r: f64, z: f64, theta: f64) -> Result<(f64, f64)> {
    check_l(l)?;
    ensure_finite("r", r)?;
    check_z(z)?;
    ensure_finite("theta", theta)?;
    let h = 0.5 * z * r * theta.cos();
    Ok((0.5 + h, 0.5 - h))
}

/// Lab-frame moments entering the implicit angle relation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImplicitMoments {
    /// `⟨L_z²⟩`.
    pub lz_sq: f64,
    /// `⟨{L_z, L_x}⟩`.
    pub lz_lx_anti: f64,
}

impl ImplicitMoments {
    pub fn from_lab(moments: &[[f64; 3]; 3]) -> Self {
        Self {
            lz_sq: moments[2][2],
            lz_lx_anti: 2.0 * moments[0][2],
        }
    }
}

/// Residual of
/// `sinΩ/sin(Ω+θ) + (zr/2l) sinθ cosΩ/sin(Ω+θ) ± (z/2rl²)[2⟨L_z²⟩ − cot(Ω+θ)⟨{L_z,L_x}⟩]`.
///
/// Multiplying through by `sin(Ω+θ)` leaves an equation linear in
/// `(sinΩ, cosΩ)` whose root is the [`GeneralForm::Consistent`] angle.
/// The `Printed` form replaces `sinθ/sin(Ω+θ)` in the second term by 1.
#[allow(clippy::too_many_arguments)]
pub fn implicit_omega_residual(
    omega: f64,
    l: f64,
    r: f64,
    z: f64,
    theta: f64,
    moments: ImplicitMoments,
    sign: f64,
    form: GeneralForm,
) -> Result<f64> {
    check_l(l)?;
    check_polarization(r)?;
    check_z(z)?;
    ensure_finite("omega", omega)?;
    ensure_finite("theta", theta)?;
    let sum = omega + theta;
    let ss = sum.sin();
    if ss.abs() < 1e-12 {
        return Err(QrfError::Singular("sin(omega + theta) vanishes"));
    }
    let cot = sum.cos() / ss;
    let drift = match form {
        GeneralForm::Consistent => (z * r / (2.0 * l)) * theta.sin() * omega.cos() / ss,
        GeneralForm::Printed => (z * r / (2.0 * l)) * omega.cos(),
    };
    let quad = sign * (z / (2.0 * r * l * l)) * (2.0 * moments.lz_sq - cot * moments.lz_lx_anti);
    Ok(omega.sin() / ss + drift + quad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{lab_moments, summarize_frame};
    use crate::states::{coherent_state, rotated_dicke_state};

    #[test]
    fn drift_values() {
        assert_eq!(average_drift_angle(16.0, 1.0, 1.0, 0.0).unwrap(), 0.0);
        assert_eq!(average_drift_angle(16.0, 1.0, 1.0, PI / 2.0).unwrap(), -0.03125);
        assert!(average_drift_angle(4.0, 0.5, 0.3, 1.0).unwrap() < 0.0);
        assert!(average_drift_angle(0.5, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn partially_coherent_special_cases() {
        for theta in [0.1, 0.7, PI / 2.0, 2.5, 3.0] {
            let (_, m) = selective_angles_partially_coherent(16.0, 1.0, 1.0, theta).unwrap();
            assert_eq!(m, 0.0);
        }
        let (p, m) = selective_angles_partially_coherent(16.0, 0.4, 0.8, 0.0).unwrap();
        assert_eq!((p, m), (0.0, 0.0));
        assert!(selective_angles_partially_coherent(16.0, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn large_l_limit() {
        let (r, z, theta) = (0.5, 0.9, 1.1);
        let (lp, lm) = selective_angles_large_l(r, z, theta).unwrap();
        let (p, m) = selective_angles_partially_coherent(1e8, r, z, theta).unwrap();
        assert!((p - lp).abs() < 1e-7 && (m - lm).abs() < 1e-7);
        // For z > 0 the plus outcome tilts toward the source axis, minus away from it.
        assert!(lp < 0.0 && lm > 0.0);
    }

    #[test]
    fn general_form_matches_dicke_closed_form() {
        let o = SpinOperators::new(SpinQuantum::from_l(20.0).unwrap());
        for (k, theta) in [(20.0, 0.4), (8.0, 1.2), (3.0, PI / 2.0), (12.0, 2.6)] {
            let s = summarize_frame(&rotated_dicke_state(&o, k, theta).unwrap(), &o).unwrap();
            let (gp, gm) = selective_angles_general(&s, 20.0, 0.7).unwrap();
            let (p, m) = selective_angles_partially_coherent(20.0, k / 20.0, 0.7, theta).unwrap();
            assert!((gp - p).abs() < 1e-12 && (gm - m).abs() < 1e-12, "k={k} theta={theta}");
        }
    }

    #[test]
    fn printed_general_form_agrees_at_equator_only() {
        let o = SpinOperators::new(SpinQuantum::from_l(20.0).unwrap());
        let s = summarize_frame(&rotated_dicke_state(&o, 8.0, PI / 2.0).unwrap(), &o).unwrap();
        let a = selective_angles_general_with(&s, 20.0, 1.0, GeneralForm::Printed).unwrap();
        let b = selective_angles_partially_coherent(20.0, 0.4, 1.0, PI / 2.0).unwrap();
        assert!((a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12);
        let s = summarize_frame(&rotated_dicke_state(&o, 8.0, 0.5).unwrap(), &o).unwrap();
        let a = selective_angles_general_with(&s, 20.0, 1.0, GeneralForm::Printed).unwrap();
        let b = selective_angles_partially_coherent(20.0, 0.4, 1.0, 0.5).unwrap();
        assert!((a.0 - b.0).abs() > 1e-6);
    }

    #[test]
    fn quartic_audit_low_spins() {
        let half = audit_quartic_trace(SpinQuantum::from_twice(1).unwrap());
        assert!((half.alpha_brute - 0.5).abs() < 1e-14);
        assert!(half.beta_brute.abs() < 1e-14);
        assert!((half.alpha_printed - 0.25).abs() < 1e-14);
        let one = audit_quartic_trace(SpinQuantum::from_twice(2).unwrap());
        assert!((one.alpha_printed - 2.0).abs() < 1e-14 && (one.beta_printed - 2.0).abs() < 1e-14);
        assert!((one.alpha_brute - 4.0).abs() < 1e-13 && (one.beta_brute - 2.0).abs() < 1e-13);
        for twice in 1..=8 {
            let a = audit_quartic_trace(SpinQuantum::from_twice(twice).unwrap());
            assert!(a.isotropy_residual < 1e-10);
            assert!((a.alpha_ratio().unwrap() - 2.0).abs() < 1e-12);
            if let Some(b) = a.beta_ratio() {
                assert!((b - 1.0).abs() < 1e-12);
            }
        }
        let zzzz = su2_quartic_trace(0.5, 2, 2, 2, 2).unwrap();
        assert!((zzzz - 0.25).abs() < 1e-15);
        let o = SpinOperators::new(SpinQuantum::from_twice(1).unwrap());
        assert!((su2_quartic_trace_brute(&o, 2, 2, 2, 2) - 0.5).abs() < 1e-15);
        assert_eq!(su2_quartic_trace(3.0, 0, 1, 0, 1).unwrap(), quartic_coefficients_printed(3.0).1);
    }

    #[test]
    fn quadratic_bloch_special_cases() {
        let zero = [[0.0; 3]; 3];
        for theta in [0.3, 1.0, 2.0] {
            let (p, m) = selective_angles_quadratic_bloch(10.0, 0.2, 1.0, theta, &zero, QuarticSource::BruteForce).unwrap();
            let drift = -(0.2 * theta.sin() / 20.0).atan();
            assert!((p - drift).abs() < 1e-14 && (m - drift).abs() < 1e-14);
        }
        let t = [[0.01, 0.0, 0.0], [0.0, 0.02, 0.0], [0.0, 0.0, -0.03]];
        let (p, m) = selective_angles_quadratic_bloch(10.0, 0.2, 1.0, 0.0, &t, QuarticSource::BruteForce).unwrap();
        assert!(p.abs() < 1e-15 && m.abs() < 1e-15);
        let bad = [[0.01, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]];
        assert!(selective_angles_quadratic_bloch(10.0, 0.2, 1.0, 0.5, &bad, QuarticSource::BruteForce).is_err());
    }

    #[test]
    fn unitary_prediction_axes() {
        let p = unitary_rotation_prediction(16.0, 1.0, 1.0, PI / 2.0, PI).unwrap();
        assert_eq!(p.axis, [0.0, 1.0, 0.0]);
        assert!((p.omega + 1.0 / 16.0).abs() < 1e-15);
        let q = unitary_rotation_prediction(16.0, 0.7, 1.0, 1.0, 1.3).unwrap();
        assert!((crate::metrics::norm3(q.axis) - 1.0).abs() < 1e-12);
        let far = unitary_rotation_prediction(1e9, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert!(far.omega.abs() < 1e-9);
        let none = unitary_rotation_prediction(16.0, 1.0, 1.0, 1.0, 0.0).unwrap();
        assert_eq!(none.omega, 0.0);

        // The printed axis coincides with the derived one at θ = π/2, r = 1, γ = π/2.
        let printed = unitary_axis_printed(1.0, PI / 2.0, PI / 2.0).unwrap();
        let derived = unitary_rotation_prediction(16.0, 1.0, 1.0, PI / 2.0, PI / 2.0).unwrap().axis;
        for i in 0..3 {
            assert!((printed[i] - derived[i]).abs() < 1e-12);
        }
        assert!(matches!(unitary_axis_printed(1.0, 0.0, 1.0), Err(QrfError::Singular(_))));
        assert!(matches!(unitary_axis_printed(1.0, 1.0, 0.0), Err(QrfError::Singular(_))));
    }

    #[test]
    fn large_l_probabilities() {
        assert_eq!(outcome_probability(16.0, 1.0, 1.0, PI / 2.0).unwrap().0, 0.5 + 0.5 * (PI / 2.0).cos());
        assert_eq!(outcome_probability(16.0, 1.0, 1.0, 0.0).unwrap(), (1.0, 0.0));
    }

    #[test]
    fn implicit_relation_root() {
        let o = SpinOperators::new(SpinQuantum::from_l(12.0).unwrap());
        for (k, theta, z) in [(6.0, 1.0, 0.8), (12.0, 2.0, 1.0), (3.0, PI / 2.0, -0.5)] {
            let rho = rotated_dicke_state(&o, k, theta).unwrap();
            let s = summarize_frame(&rho, &o).unwrap();
            let mom = ImplicitMoments::from_lab(&lab_moments(&rho, &o));
            let (p, m) = selective_angles_general(&s, 12.0, z).unwrap();
            for (omega, sign) in [(p, 1.0), (m, -1.0)] {
                let res = implicit_omega_residual(omega, 12.0, s.r, z, s.theta, mom, sign, GeneralForm::Consistent).unwrap();
                assert!(res.abs() < 1e-9, "{res}");
            }
        }
        let rho = coherent_state(&o, PI / 2.0).unwrap();
        let mom = ImplicitMoments::from_lab(&lab_moments(&rho, &o));
        for form in [GeneralForm::Consistent, GeneralForm::Printed] {
            let res = implicit_omega_residual(0.0, 12.0, 1.0, 1.0, PI / 2.0, mom, -1.0, form).unwrap();
            assert!(res.abs() < 1e-12);
            let res = implicit_omega_residual(0.0, 12.0, 1.0, 0.0, PI / 2.0, mom, 1.0, form).unwrap();
            assert_eq!(res, 0.0);
        }
    }
}
