//! Reference computations built from first principles: spin matrices from
//! the ladder formula, irrep projectors from the total Casimir, channels as
//! explicit partial traces on the composite space. Nothing here calls the
//! simulator, so agreement with it is evidence rather than tautology.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

pub type M = DMatrix<Complex64>;

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

pub fn identity(n: usize) -> M {
    M::identity(n, n)
}

pub fn kron(a: &M, b: &M) -> M {
    a.kronecker(b)
}

/// `Tr_qubit` of an operator on frame ⊗ qubit.
pub fn trace_out_qubit(x: &M) -> M {
    let d = x.nrows() / 2;
    M::from_fn(d, d, |i, j| x[(2 * i, 2 * j)] + x[(2 * i + 1, 2 * j + 1)])
}

/// `Tr_frame` of an operator on frame ⊗ qubit.
pub fn trace_out_frame(x: &M) -> M {
    let d = x.nrows() / 2;
    M::from_fn(2, 2, |s, t| (0..d).map(|i| x[(2 * i + s, 2 * i + t)]).sum())
}

pub fn max_abs(x: &M) -> f64 {
    x.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &M, b: &M) -> f64 {
    max_abs(&(a - b))
}

pub fn trace(x: &M) -> Complex64 {
    x.diagonal().iter().sum()
}

/// Ascending eigenvalues of the Hermitian part of `x`.
pub fn eigenvalues(x: &M) -> Vec<f64> {
    let h = (x + x.adjoint()).scale(0.5);
    let mut v: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// `(L_x, L_y, L_z)` for spin `twice_l/2`, basis ordered `m = l, l−1, …, −l`.
pub fn spin_matrices(twice_l: u32) -> [M; 3] {
    let d = twice_l as usize + 1;
    let l = twice_l as f64 / 2.0;
    let m = |i: usize| l - i as f64;
    // ⟨m+1|J₊|m⟩ = √(l(l+1) − m(m+1)); row i−1 holds m+1 when column i holds m.
    let jp = M::from_fn(d, d, |r, c| {
        if c >= 1 && r == c - 1 {
            re((l * (l + 1.0) - m(c) * (m(c) + 1.0)).sqrt())
        } else {
            re(0.0)
        }
    });
    let jm = jp.adjoint();
    let lx = (&jp + &jm).scale(0.5);
    let ly = (&jp - &jm) * Complex64::new(0.0, -0.5);
    let lz = M::from_fn(d, d, |r, c| if r == c { re(m(r)) } else { re(0.0) });
    [lx, ly, lz]
}

pub fn pauli() -> [M; 3] {
    let o = re(0.0);
    let i = Complex64::new(0.0, 1.0);
    [
        M::from_row_slice(2, 2, &[o, re(1.0), re(1.0), o]),
        M::from_row_slice(2, 2, &[o, -i, i, o]),
        M::from_row_slice(2, 2, &[re(1.0), o, o, re(-1.0)]),
    ]
}

/// Projectors onto total spin `l ± ½`, from `J² = Σ (L_a ⊗ I + I ⊗ σ_a/2)²`.
pub fn irrep_projectors(twice_l: u32) -> (M, M) {
    let l = twice_l as f64 / 2.0;
    let d = twice_l as usize + 1;
    let ls = spin_matrices(twice_l);
    let sig = pauli();
    let mut j2 = M::zeros(2 * d, 2 * d);
    for a in 0..3 {
        let ja = kron(&ls[a], &identity(2)) + kron(&identity(d), &sig[a].scale(0.5));
        j2 += &ja * &ja;
    }
    let (jp, jm) = (l + 0.5, l - 0.5);
    let (cp, cm) = (jp * (jp + 1.0), jm * (jm + 1.0));
    let id = identity(2 * d);
    let plus = (&j2 - id.scale(cm)).scale(1.0 / (cp - cm));
    let minus = &id - &plus;
    (plus, minus)
}

/// `½(I + z σ_z)`.
pub fn source_state(z: f64) -> M {
    let o = re(0.0);
    M::from_row_slice(2, 2, &[re(0.5 * (1.0 + z)), o, o, re(0.5 * (1.0 - z))])
}

/// `Tr_s[Π (ρ⊗ξ) Π]`, unnormalized.
pub fn selective(rho: &M, z: f64, pi: &M) -> M {
    trace_out_qubit(&(pi * kron(rho, &source_state(z)) * pi))
}

pub fn average(rho: &M, z: f64, pp: &M, pm: &M) -> M {
    selective(rho, z, pp) + selective(rho, z, pm)
}

/// The averaged map written with all three components:
/// `(½ + 1/2d²)ρ + (2/d²)Σ L_iρL_i + (z/d²)(L_zρ + ρL_z + L₊ρL₋ − L₋ρL₊)`.
pub fn average_component_form(rho: &M, z: f64, ls: &[M; 3]) -> M {
    let d = rho.nrows() as f64;
    let d2 = d * d;
    let i = Complex64::new(0.0, 1.0);
    let lp = &ls[0] + &ls[1] * i;
    let lm = &ls[0] - &ls[1] * i;
    let mut out = rho.scale(0.5 + 0.5 / d2);
    for a in ls {
        out += (a * rho * a).scale(2.0 / d2);
    }
    out += (&ls[2] * rho + rho * &ls[2] + &lp * rho * &lm - &lm * rho * &lp).scale(z / d2);
    out
}

/// `Tr_s[U(ρ⊗ξ)U†]` with `U = Π₊ + e^{−iγ}Π₋`.
pub fn unitary(rho: &M, z: f64, gamma: f64, pp: &M, pm: &M) -> M {
    let u = pp + pm * Complex64::from_polar(1.0, -gamma);
    trace_out_qubit(&(&u * kron(rho, &source_state(z)) * u.adjoint()))
}

/// `Λ = Tr_R[Π (ρ ⊗ I₂)]`.
pub fn induced_povm(rho: &M, pi: &M) -> M {
    trace_out_frame(&(pi * kron(rho, &identity(2))))
}

/// Smallest eigenvalue of the Choi matrix `Σ_ij |i⟩⟨j| ⊗ Φ(|i⟩⟨j|)`.
pub fn choi_min_eigenvalue(d: usize, channel: impl Fn(&M) -> M) -> f64 {
    let mut choi = M::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            let mut e = M::zeros(d, d);
            e[(i, j)] = re(1.0);
            let out = channel(&e);
            for a in 0..d {
                for b in 0..d {
                    choi[(i * d + a, j * d + b)] = out[(a, b)];
                }
            }
        }
    }
    eigenvalues(&choi)[0]
}

pub fn expect(rho: &M, a: &M) -> f64 {
    trace(&(rho * a)).re
}

pub fn mean_l(rho: &M, ls: &[M; 3]) -> [f64; 3] {
    [expect(rho, &ls[0]), expect(rho, &ls[1]), expect(rho, &ls[2])]
}

pub fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Angle from +Z toward +X of the X–Z projection.
pub fn in_plane_angle(v: [f64; 3]) -> f64 {
    v[0].atan2(v[2])
}

/// `exp(−iθL_y)|l,k⟩⟨l,k|exp(iθL_y)` through the eigenbasis of `L_y`.
pub fn rotated_dicke(twice_l: u32, k: f64, theta: f64) -> M {
    let ls = spin_matrices(twice_l);
    let l = twice_l as f64 / 2.0;
    let idx = (l - k).round() as usize;
    let eig = SymmetricEigen::new(ls[1].clone());
    let phases = M::from_diagonal(&eig.eigenvalues.map(|v| Complex64::from_polar(1.0, -theta * v)));
    let rot = &eig.eigenvectors * phases * eig.eigenvectors.adjoint();
    let psi = rot.column(idx).into_owned();
    &psi * psi.adjoint()
}

/// Average drift angle `−(zr/2l) sinθ`.
pub fn drift_angle(l: f64, r: f64, z: f64, theta: f64) -> f64 {
    -(z * r / (2.0 * l)) * theta.sin()
}

/// `Ω± = −arctan[z sinθ (r² ± [l(1−r²)+1]) / (2rl(1 ± zr cosθ))]`.
pub fn selective_angles(l: f64, r: f64, z: f64, theta: f64) -> (f64, f64) {
    let f = |s: f64| {
        -((z * theta.sin() * (r * r + s * (l * (1.0 - r * r) + 1.0))) / (2.0 * r * l * (1.0 + s * z * r * theta.cos())))
            .atan()
    };
    (f(1.0), f(-1.0))
}

/// `lim Ω± = ±arctan[z(r²−1) sinθ / (2r(1 ± zr cosθ))]`.
pub fn selective_angles_limit(r: f64, z: f64, theta: f64) -> (f64, f64) {
    let f = |s: f64| s * ((z * (r * r - 1.0) * theta.sin()) / (2.0 * r * (1.0 + s * z * r * theta.cos()))).atan();
    (f(1.0), f(-1.0))
}

/// Rotation of the in-plane angle under `F_π`: twice the average drift.
pub fn unitary_pi_angle(l: f64, r: f64, z: f64, theta: f64) -> f64 {
    -(z * r / l) * theta.sin()
}

/// Unit vector along `(0, cscθ cot(γ/2)/r, 1)`.
pub fn unitary_axis(r: f64, theta: f64, gamma: f64) -> [f64; 3] {
    let y = 1.0 / (r * theta.sin() * (0.5 * gamma).tan());
    let n = (1.0 + y * y).sqrt();
    [0.0, y / n, 1.0 / n]
}

/// `(α_l, β_l)` as `Tr[{L_x,L_x}{L_y,L_y}]` and `Tr[{L_x,L_y}{L_x,L_y}]`.
pub fn quartic_traces(twice_l: u32) -> (f64, f64) {
    let [lx, ly, _] = spin_matrices(twice_l);
    let anti = |a: &M, b: &M| a * b + b * a;
    let xx = anti(&lx, &lx);
    let yy = anti(&ly, &ly);
    let xy = anti(&lx, &ly);
    (trace(&(&xx * &yy)).re, trace(&(&xy * &xy)).re)
}

/// The closed forms `α = l(l+1)(2l+1)(1+2l(l+1))/15`, `β = l(l+1)(4l²−1)(2l+3)/15`.
pub fn quartic_closed_form(l: f64) -> (f64, f64) {
    (
        l * (l + 1.0) * (2.0 * l + 1.0) * (1.0 + 2.0 * l * (l + 1.0)) / 15.0,
        l * (l + 1.0) * (4.0 * l * l - 1.0) * (2.0 * l + 3.0) / 15.0,
    )
}

/// Least-squares slope of `ln y` on `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
