//! Back-action of a single interaction on the frame.
//!
//! Every channel has two implementations. The production path works on the
//! `d × d` frame matrix through the banded structure of `L_±` and the
//! diagonal `L_z`, at O(d²) per application. The tensor path builds
//! `ρ ⊗ ξ` on the `2d`-dimensional composite space, sandwiches it with the
//! irrep projectors and traces the qubit out; it exists to cross-check the
//! production path.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, QrfError, Result};
use crate::linalg::{self, c, CMatrix};
use crate::spin::{SpinOperators, SpinQuantum};
use crate::states::{DensityMatrix, SourceQubit};

/// Probability below which conditioning on an outcome is refused.
pub const OUTCOME_THRESHOLD: f64 = 1e-12;

/// Default cap on the frame dimension for Choi certification (l ≤ 8).
pub const CHOI_DIM_CAP: usize = 17;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    /// Total spin `j = l + 1/2`.
    #[serde(rename = "+")]
    Plus,
    /// Total spin `j = l - 1/2`.
    #[serde(rename = "-")]
    Minus,
}

impl Outcome {
    pub fn sign(self) -> f64 {
        match self {
            Outcome::Plus => 1.0,
            Outcome::Minus => -1.0,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Outcome::Plus => '+',
            Outcome::Minus => '-',
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            Outcome::Plus => Outcome::Minus,
            Outcome::Minus => Outcome::Plus,
        }
    }
}

/// Projectors onto the `j = l ± 1/2` irreps of frame ⊗ qubit.
#[derive(Debug, Clone)]
pub struct ProjectorPair {
    pub spin: SpinQuantum,
    pub pi_plus: CMatrix,
    pub pi_minus: CMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectorReport {
    pub completeness: f64,
    pub idempotence_plus: f64,
    pub idempotence_minus: f64,
    pub hermiticity: f64,
    pub orthogonality: f64,
    pub rank_plus: usize,
    pub rank_minus: usize,
}

impl ProjectorReport {
    pub fn worst_defect(&self) -> f64 {
        [
            self.completeness,
            self.idempotence_plus,
            self.idempotence_minus,
            self.hermiticity,
            self.orthogonality,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// `L·S = Σ_i L_i ⊗ σ_i / 2` on the composite space.
pub fn spin_coupling(ops: &SpinOperators) -> CMatrix {
    let paulis = linalg::pauli();
    let mut ls = CMatrix::zeros(2 * ops.dim(), 2 * ops.dim());
    for (a, sigma) in paulis.iter().enumerate() {
        ls += linalg::kron(ops.component(a), &sigma.scale(0.5));
    }
    ls
}

/// `Π± = ½(I ± (4 L·S + I)/d)`.
pub fn build_projectors(ops: &SpinOperators) -> ProjectorPair {
    let n = 2 * ops.dim();
    let d = ops.dim() as f64;
    let id = linalg::identity(n);
    let a = (spin_coupling(ops).scale(4.0) + &id).scale(1.0 / d);
    ProjectorPair {
        spin: ops.spin,
        pi_plus: (&id + &a).scale(0.5),
        pi_minus: (&id - &a).scale(0.5),
    }
}

static PROJECTOR_CACHE: OnceLock<RwLock<HashMap<SpinQuantum, Arc<ProjectorPair>>>> =
    OnceLock::new();

/// Memoized [`build_projectors`]. Concurrent first calls for the same spin
/// may both build, but only one result is ever published.
pub fn cached_projectors(ops: &SpinOperators) -> Arc<ProjectorPair> {
    let cache = PROJECTOR_CACHE.get_or_init(|| RwLock::new(HashMap::new()));
    if let Some(p) = cache.read().expect("projector cache poisoned").get(&ops.spin) {
        return Arc::clone(p);
    }
    let built = Arc::new(build_projectors(ops));
    let mut guard = cache.write().expect("projector cache poisoned");
    Arc::clone(guard.entry(ops.spin).or_insert(built))
}

impl ProjectorPair {
    pub fn report(&self) -> ProjectorReport {
        let n = self.pi_plus.nrows();
        let (p, m) = (&self.pi_plus, &self.pi_minus);
        ProjectorReport {
            completeness: linalg::max_abs_diff(&(p + m), &linalg::identity(n)),
            idempotence_plus: linalg::max_abs_diff(&(p * p), p),
            idempotence_minus: linalg::max_abs_diff(&(m * m), m),
            hermiticity: linalg::hermitian_defect(p).max(linalg::hermitian_defect(m)),
            orthogonality: linalg::max_abs(&(p * m)),
            rank_plus: linalg::projector_rank(p),
            rank_minus: linalg::projector_rank(m),
        }
    }

    pub fn get(&self, outcome: Outcome) -> &CMatrix {
        match outcome {
            Outcome::Plus => &self.pi_plus,
            Outcome::Minus => &self.pi_minus,
        }
    }
}

/// Effective two-outcome measurement on the source qubit.
#[derive(Debug, Clone)]
pub struct InducedPovm {
    pub plus: CMatrix,
    pub minus: CMatrix,
}

/// `Λ₊ = ((l+1)/d) I + n̂_ρ·S`, `Λ₋ = (l/d) I − n̂_ρ·S` with `n̂_ρ = ⟨L⟩/(l+½)`.
pub fn induced_povm(rho: &DensityMatrix, ops: &SpinOperators) -> InducedPovm {
    let l = ops.l();
    let d = ops.dim() as f64;
    let n = rho.mean_l(ops).map(|v| v / (l + 0.5));
    let paulis = linalg::pauli();
    let mut ns = CMatrix::zeros(2, 2);
    for a in 0..3 {
        ns += paulis[a].scale(0.5 * n[a]);
    }
    let id = linalg::identity(2);
    InducedPovm {
        plus: id.scale((l + 1.0) / d) + &ns,
        minus: id.scale(l / d) - &ns,
    }
}

/// `Λ± = Tr_R[Π± (ρ ⊗ I₂)]` from the composite-space projectors.
pub fn induced_povm_tensor(rho: &DensityMatrix, pair: &ProjectorPair) -> InducedPovm {
    let big = linalg::kron(rho.matrix(), &linalg::identity(2));
    InducedPovm {
        plus: linalg::partial_trace_frame(&(&pair.pi_plus * &big)),
        minus: linalg::partial_trace_frame(&(&pair.pi_minus * &big)),
    }
}

fn check_dims(m: &CMatrix, ops: &SpinOperators) -> Result<()> {
    if m.nrows() != ops.dim() || m.ncols() != ops.dim() {
        return Err(QrfError::DimensionMismatch {
            expected: ops.dim(),
            got: m.nrows(),
        });
    }
    Ok(())
}

/// Coefficients of a map of the form
/// `ρ_ij (a + b(m_i+m_j) + c m_i m_j + i e (m_i−m_j)) + up (L₊ρL₋)_ij + down (L₋ρL₊)_ij`,
/// which covers every frame map built from one source qubit.
struct BandedMap {
    a: f64,
    b: f64,
    c: f64,
    e: f64,
    up: f64,
    down: f64,
}

impl BandedMap {
    /// `(L₊ρL₋)_ij = u_i ρ_{i+1,j+1} u_j`, `(L₋ρL₊)_ij = u_{i−1} ρ_{i−1,j−1} u_{j−1}`.
    fn apply(&self, rho: &CMatrix, ops: &SpinOperators) -> CMatrix {
        let d = ops.dim();
        let (ms, u) = (&ops.m, &ops.ladder);
        let src = rho.as_slice();
        let mut out = CMatrix::zeros(d, d);
        let dst = out.as_mut_slice();
        for j in 0..d {
            let mj = ms[j];
            let col = &src[j * d..(j + 1) * d];
            let row = &mut dst[j * d..(j + 1) * d];
            for i in 0..d {
                let mi = ms[i];
                let w = Complex64::new(self.a + self.b * (mi + mj) + self.c * mi * mj, self.e * (mi - mj));
                row[i] = col[i] * w;
            }
            if j + 1 < d {
                let next = &src[(j + 1) * d..(j + 2) * d];
                let f = self.up * u[j];
                for i in 0..d - 1 {
                    row[i] += next[i + 1] * (f * u[i]);
                }
            }
            if j >= 1 {
                let prev = &src[(j - 1) * d..j * d];
                let f = self.down * u[j - 1];
                for i in 1..d {
                    row[i] += prev[i - 1] * (f * u[i - 1]);
                }
            }
        }
        out
    }
}

/// Operator-sum form of the outcome-averaged map:
/// `(½ + (1−z²)/2d²)ρ + (2/d²)(L_z+z/2)ρ(L_z+z/2) + ((1+z)/d²)L₊ρL₋ + ((1−z)/d²)L₋ρL₊`.
pub fn average_map(m: &CMatrix, q: SourceQubit, ops: &SpinOperators) -> CMatrix {
    let z = q.z();
    let d2 = (ops.dim() * ops.dim()) as f64;
    BandedMap {
        a: 0.5 + (1.0 - z * z) / (2.0 * d2) + z * z / (2.0 * d2),
        b: z / d2,
        c: 2.0 / d2,
        e: 0.0,
        up: (1.0 + z) / d2,
        down: (1.0 - z) / d2,
    }
    .apply(m, ops)
}

/// Unnormalized selective map `p± E±[ρ]` in its explicit expanded form
/// `(¼ ± 1/2d + (1−z²)/4d²)ρ ± (z/2d){L_z,ρ} + (1/d²)(L_z+z/2)ρ(L_z+z/2) + ((1+z)/2d²)L₊ρL₋ + ((1−z)/2d²)L₋ρL₊`.
pub fn selective_map(m: &CMatrix, q: SourceQubit, ops: &SpinOperators, outcome: Outcome) -> CMatrix {
    let z = q.z();
    let s = outcome.sign();
    let df = ops.dim() as f64;
    let d2 = df * df;
    BandedMap {
        a: 0.25 + s / (2.0 * df) + (1.0 - z * z) / (4.0 * d2) + z * z / (4.0 * d2),
        b: s * z / (2.0 * df) + z / (2.0 * d2),
        c: 1.0 / d2,
        e: 0.0,
        up: (1.0 + z) / (2.0 * d2),
        down: (1.0 - z) / (2.0 * d2),
    }
    .apply(m, ops)
}

/// `Tr_s[U(ρ⊗ξ)U†]` for `U = Π₊ + e^{−iγ}Π₋`, reduced to frame operators:
/// `cos²(γ/2)ρ + (iz sinγ/d)[L_z,ρ] + (sin²(γ/2)/d²)(ρ + 2z{L_z,ρ} + 4L_zρL_z + 2(1+z)L₊ρL₋ + 2(1−z)L₋ρL₊)`.
pub fn unitary_map(m: &CMatrix, q: SourceQubit, ops: &SpinOperators, gamma: f64) -> CMatrix {
    let z = q.z();
    let df = ops.dim() as f64;
    let (half_s, half_c) = (0.5 * gamma).sin_cos();
    let sin2 = half_s * half_s / (df * df);
    BandedMap {
        a: half_c * half_c + sin2,
        b: 2.0 * z * sin2,
        c: 4.0 * sin2,
        e: z * gamma.sin() / df,
        up: 2.0 * (1.0 + z) * sin2,
        down: 2.0 * (1.0 - z) * sin2,
    }
    .apply(m, ops)
}

/// Outcome-averaged back-action `E[ρ]`.
pub fn average_channel(rho: &DensityMatrix, q: SourceQubit, ops: &SpinOperators) -> Result<DensityMatrix> {
    check_dims(rho.matrix(), ops)?;
    Ok(DensityMatrix::from_matrix_unchecked(average_map(rho.matrix(), q, ops)))
}

/// `E[ρ] = Tr_s[Π₊(ρ⊗ξ)Π₊ + Π₋(ρ⊗ξ)Π₋]` on the composite space.
pub fn average_channel_tensor(rho: &DensityMatrix, q: SourceQubit, pair: &ProjectorPair) -> DensityMatrix {
    let big = linalg::kron(rho.matrix(), &q.matrix());
    let out = &pair.pi_plus * &big * &pair.pi_plus + &pair.pi_minus * &big * &pair.pi_minus;
    DensityMatrix::from_matrix_unchecked(linalg::partial_trace_qubit(&out))
}

/// Result of conditioning on one measurement outcome.
#[derive(Debug, Clone)]
pub struct SelectiveOutcome {
    pub outcome: Outcome,
    pub probability: f64,
    pub post_state: DensityMatrix,
}

fn normalize_selective(unnormalized: CMatrix, outcome: Outcome) -> Result<SelectiveOutcome> {
    let probability = linalg::trace(&unnormalized).re;
    if !(probability >= OUTCOME_THRESHOLD) {
        return Err(QrfError::OutcomeImpossible {
            outcome: outcome.symbol(),
            probability,
        });
    }
    Ok(SelectiveOutcome {
        outcome,
        probability: probability.min(1.0),
        post_state: DensityMatrix::from_matrix_unchecked(unnormalized.scale(1.0 / probability)),
    })
}

/// `E±[ρ] = Tr_s[Π±(ρ⊗ξ)Π±] / p±` with `p± = Tr[Π±(ρ⊗ξ)]`.
pub fn selective_channel(
    rho: &DensityMatrix,
    q: SourceQubit,
    ops: &SpinOperators,
    outcome: Outcome,
) -> Result<SelectiveOutcome> {
    check_dims(rho.matrix(), ops)?;
    normalize_selective(selective_map(rho.matrix(), q, ops, outcome), outcome)
}

pub fn selective_channel_tensor(
    rho: &DensityMatrix,
    q: SourceQubit,
    pair: &ProjectorPair,
    outcome: Outcome,
) -> Result<SelectiveOutcome> {
    let big = linalg::kron(rho.matrix(), &q.matrix());
    let p = pair.get(outcome);
    normalize_selective(linalg::partial_trace_qubit(&(p * &big * p)), outcome)
}

/// Exact finite-l outcome probabilities `p± = ½ ± (1 + 2z⟨L_z⟩)/(2d)`.
pub fn outcome_probabilities(rho: &DensityMatrix, q: SourceQubit, ops: &SpinOperators) -> (f64, f64) {
    let lz = rho.mean_l(ops)[2];
    let d = ops.dim() as f64;
    let delta = (1.0 + 2.0 * q.z() * lz) / (2.0 * d);
    ((0.5 + delta).clamp(0.0, 1.0), (0.5 - delta).clamp(0.0, 1.0))
}

/// Interaction phase `γ = t (l + ½)` for a coupling `e^{i t L·S}` of duration `t`.
pub fn gamma_from_duration(t: f64, spin: SpinQuantum) -> f64 {
    t * (spin.l() + 0.5)
}

/// Frame back-action `F_γ[ρ]` of the rotationally invariant unitary.
pub fn unitary_channel(
    rho: &DensityMatrix,
    q: SourceQubit,
    ops: &SpinOperators,
    gamma: f64,
) -> Result<DensityMatrix> {
    ensure_finite("gamma", gamma)?;
    check_dims(rho.matrix(), ops)?;
    Ok(DensityMatrix::from_matrix_unchecked(unitary_map(rho.matrix(), q, ops, gamma)))
}

/// `F_γ` as the four projector sandwiches
/// `Π₊XΠ₊ + Π₋XΠ₋ + e^{−iγ}Π₋XΠ₊ + e^{iγ}Π₊XΠ₋` with `X = ρ⊗ξ`, qubit traced.
pub fn unitary_channel_tensor(
    rho: &DensityMatrix,
    q: SourceQubit,
    pair: &ProjectorPair,
    gamma: f64,
) -> DensityMatrix {
    let big = linalg::kron(rho.matrix(), &q.matrix());
    let (p, m) = (&pair.pi_plus, &pair.pi_minus);
    let px = p * &big;
    let mx = m * &big;
    let out = &px * p
        + &mx * m
        + (&mx * p).map(|v| v * Complex64::from_polar(1.0, -gamma))
        + (&px * m).map(|v| v * Complex64::from_polar(1.0, gamma));
    DensityMatrix::from_matrix_unchecked(linalg::partial_trace_qubit(&out))
}

/// Choi-matrix certificate of a linear map on `d × d` matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CptpReport {
    pub dim: usize,
    pub choi_min_eigenvalue: f64,
    pub tp_defect: f64,
}

pub const CP_TOL: f64 = 1e-10;
pub const TP_TOL: f64 = 1e-12;

impl CptpReport {
    pub fn completely_positive(&self) -> bool {
        self.choi_min_eigenvalue >= -CP_TOL
    }

    pub fn trace_preserving(&self) -> bool {
        self.tp_defect <= TP_TOL
    }

    pub fn is_cptp(&self) -> bool {
        self.completely_positive() && self.trace_preserving()
    }
}

/// Act with `channel` on every matrix unit `|i⟩⟨j|`, assemble the Choi
/// matrix `Σ |i⟩⟨j| ⊗ Φ(|i⟩⟨j|)` and report its smallest eigenvalue and
/// the worst deviation of `Tr Φ(|i⟩⟨j|)` from `δ_ij`.
pub fn verify_cptp<F>(channel: F, dim: usize, dim_cap: usize) -> Result<CptpReport>
where
    F: Fn(&CMatrix) -> CMatrix,
{
    if dim > dim_cap {
        return Err(QrfError::ChoiCapExceeded { d: dim, cap: dim_cap });
    }
    let n = dim * dim;
    let mut choi = CMatrix::zeros(n, n);
    let mut tp_defect: f64 = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            let mut unit = CMatrix::zeros(dim, dim);
            unit[(i, j)] = c(1.0);
            let out = channel(&unit);
            let expected = if i == j { c(1.0) } else { c(0.0) };
            tp_defect = tp_defect.max((linalg::trace(&out) - expected).norm());
            for a in 0..dim {
                for b in 0..dim {
                    choi[(i * dim + a, j * dim + b)] = out[(a, b)];
                }
            }
        }
    }
    Ok(CptpReport {
        dim,
        choi_min_eigenvalue: linalg::min_eigenvalue(&choi),
        tp_defect,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::I;
    use crate::states::{coherent_state, rotated_dicke_state, thermal_partial_coherent};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn ops(l: f64) -> SpinOperators {
        SpinOperators::new(SpinQuantum::from_l(l).unwrap())
    }

    fn src(z: f64) -> SourceQubit {
        SourceQubit::new(z).unwrap()
    }

    fn random_state(d: usize, rng: &mut ChaCha8Rng) -> DensityMatrix {
        let g = CMatrix::from_fn(d, d, |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let m = &g * g.adjoint();
        let t = linalg::trace(&m).re;
        DensityMatrix::from_matrix_unchecked(m.scale(1.0 / t))
    }

    #[test]
    fn projector_algebra_spin_half() {
        let pair = build_projectors(&ops(0.5));
        let rep = pair.report();
        assert!(rep.worst_defect() < 1e-12);
        assert_eq!((rep.rank_plus, rep.rank_minus), (3, 1));
        // The singlet (|↑↓⟩ − |↓↑⟩)/√2 is the range of Π₋.
        let s = 1.0 / 2f64.sqrt();
        let singlet = CMatrix::from_column_slice(4, 1, &[c(0.0), c(s), c(-s), c(0.0)]);
        let proj = &singlet * singlet.adjoint();
        assert!(linalg::max_abs_diff(&proj, &pair.pi_minus) < 1e-14);
    }

    #[test]
    fn projector_ranks_spin_sixteen() {
        let rep = build_projectors(&ops(16.0)).report();
        assert_eq!((rep.rank_plus, rep.rank_minus), (34, 32));
        assert!(rep.worst_defect() < 1e-12);
    }

    #[test]
    fn coupling_spectrum() {
        // 4L·S + I has eigenvalues +d (j = l+1/2) and -d (j = l-1/2).
        let o = ops(2.5);
        let a = spin_coupling(&o).scale(4.0) + linalg::identity(2 * o.dim());
        let d = o.dim() as f64;
        for v in linalg::eigvalsh(&a) {
            assert!((v.abs() - d).abs() < 1e-12, "{v}");
        }
    }

    #[test]
    fn cached_projectors_are_shared() {
        let o = ops(3.0);
        let a = cached_projectors(&o);
        let b = cached_projectors(&o);
        assert!(Arc::ptr_eq(&a, &b));
    }

    #[test]
    fn povm_paths_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for l in [0.5, 1.0, 2.5, 6.0] {
            let o = ops(l);
            let pair = build_projectors(&o);
            let rho = random_state(o.dim(), &mut rng);
            let a = induced_povm(&rho, &o);
            let b = induced_povm_tensor(&rho, &pair);
            assert!(linalg::max_abs_diff(&a.plus, &b.plus) < 1e-12);
            assert!(linalg::max_abs_diff(&a.minus, &b.minus) < 1e-12);
            let sum = &a.plus + &a.minus;
            assert!(linalg::max_abs_diff(&sum, &linalg::identity(2)) < 1e-14);
            assert!(linalg::min_eigenvalue(&a.plus) > -1e-12);
            assert!(linalg::min_eigenvalue(&a.minus) > -1e-12);
        }
    }

    #[test]
    fn povm_of_maximally_mixed_frame() {
        let o = ops(4.0);
        let povm = induced_povm(&DensityMatrix::maximally_mixed(9), &o);
        assert!(linalg::max_abs_diff(&povm.plus, &linalg::identity(2).scale(5.0 / 9.0)) < 1e-15);
        assert!(linalg::max_abs_diff(&povm.minus, &linalg::identity(2).scale(4.0 / 9.0)) < 1e-15);
    }

    #[test]
    fn povm_large_spin_limits() {
        let o = ops(200.0);
        let up = induced_povm(&coherent_state(&o, 0.0).unwrap(), &o);
        let proj_up = CMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(0.0)]);
        assert!(linalg::max_abs_diff(&up.plus, &proj_up) < 2.0 / 200.0);

        // Fuzzy measurement ½(I ± 2r n̂·S) for a partially polarized frame.
        let theta = 0.8;
        let rho = thermal_partial_coherent(&o, 0.5, theta).unwrap();
        let povm = induced_povm(&rho, &o);
        let [sx, _, sz] = linalg::pauli();
        let ns = (sx.scale(theta.sin()) + sz.scale(theta.cos())).scale(0.5);
        let fuzzy_plus = (linalg::identity(2) + ns.scale(2.0 * 0.5)).scale(0.5);
        assert!(linalg::max_abs_diff(&povm.plus, &fuzzy_plus) < 1.0 / 200.0);
    }

    #[test]
    fn average_channel_paths_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for l in [0.5, 1.0, 1.5, 4.0, 9.5] {
            let o = ops(l);
            let pair = build_projectors(&o);
            for _ in 0..5 {
                let rho = random_state(o.dim(), &mut rng);
                let q = src(rng.random::<f64>() * 2.0 - 1.0);
                let fast = average_channel(&rho, q, &o).unwrap();
                let tensor = average_channel_tensor(&rho, q, &pair);
                assert!(fast.max_abs_diff(&tensor) < 1e-12);
                assert!((fast.trace().re - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn unpolarized_average_channel() {
        let o = ops(3.0);
        let d = 7.0;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rho = random_state(7, &mut rng);
        let out = average_channel(&rho, src(0.0), &o).unwrap();
        let mut expect = rho.matrix().scale(0.5 + 1.0 / (2.0 * d * d));
        for a in 0..3 {
            let la = o.component(a);
            expect += (la * rho.matrix() * la).scale(2.0 / (d * d));
        }
        assert!(linalg::max_abs_diff(out.matrix(), &expect) < 1e-13);

        let flat = DensityMatrix::maximally_mixed(7);
        let fixed = average_channel(&flat, src(0.0), &o).unwrap();
        assert!(fixed.max_abs_diff(&flat) < 1e-12);
    }

    #[test]
    fn average_channel_drifts_toward_source() {
        let o = ops(5.0);
        let flat = DensityMatrix::maximally_mixed(11);
        for z in [0.3, 1.0] {
            let out = average_channel(&flat, src(z), &o).unwrap();
            let brute = out.expect(&o.lz).re;
            assert!(brute > 0.0);
            assert!((out.mean_l(&o)[2] - brute).abs() < 1e-13);
        }
        let out = average_channel(&flat, src(-0.5), &o).unwrap();
        assert!(out.mean_l(&o)[2] < 0.0);
    }

    #[test]
    fn selective_mixture_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let twice = rng.random_range(1..=40u32);
            let o = SpinOperators::new(SpinQuantum::from_twice(twice).unwrap());
            let rho = random_state(o.dim(), &mut rng);
            let q = src(rng.random::<f64>() * 2.0 - 1.0);
            let avg = average_channel(&rho, q, &o).unwrap();
            let plus = selective_channel(&rho, q, &o, Outcome::Plus).unwrap();
            let minus = selective_channel(&rho, q, &o, Outcome::Minus).unwrap();
            let mix = plus.post_state.matrix().scale(plus.probability)
                + minus.post_state.matrix().scale(minus.probability);
            assert!(linalg::max_abs_diff(&mix, avg.matrix()) <= 1e-12);
            assert!((plus.probability + minus.probability - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn selective_paths_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for l in [0.5, 2.0, 7.5] {
            let o = ops(l);
            let pair = build_projectors(&o);
            let rho = random_state(o.dim(), &mut rng);
            let q = src(0.63);
            for outcome in [Outcome::Plus, Outcome::Minus] {
                let a = selective_channel(&rho, q, &o, outcome).unwrap();
                let b = selective_channel_tensor(&rho, q, &pair, outcome).unwrap();
                assert!((a.probability - b.probability).abs() < 1e-12);
                assert!(a.post_state.max_abs_diff(&b.post_state) < 1e-12);
                let (pp, pm) = outcome_probabilities(&rho, q, &o);
                let p = if outcome == Outcome::Plus { pp } else { pm };
                assert!((p - a.probability).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn aligned_coherent_state_is_certain_plus() {
        let o = ops(6.0);
        let rho = coherent_state(&o, 0.0).unwrap();
        let q = src(1.0);
        let plus = selective_channel(&rho, q, &o, Outcome::Plus).unwrap();
        assert!((plus.probability - 1.0).abs() < 1e-12);
        assert!(matches!(
            selective_channel(&rho, q, &o, Outcome::Minus),
            Err(QrfError::OutcomeImpossible { outcome: '-', .. })
        ));
    }

    #[test]
    fn equatorial_probability() {
        let o = ops(16.0);
        let rho = coherent_state(&o, PI / 2.0).unwrap();
        let plus = selective_channel(&rho, src(1.0), &o, Outcome::Plus).unwrap();
        assert!((plus.probability - (0.5 + 1.0 / 66.0)).abs() < 1e-12);
    }

    #[test]
    fn coherent_minus_outcome_keeps_inclination() {
        let o = ops(16.0);
        let theta = PI / 3.0;
        let rho = coherent_state(&o, theta).unwrap();
        let minus = selective_channel(&rho, src(1.0), &o, Outcome::Minus).unwrap();
        let l = minus.post_state.mean_l(&o);
        assert!((l[0].atan2(l[2]) - theta).abs() < 1e-9);
    }

    #[test]
    fn equatorial_symmetry_is_preserved() {
        let o = ops(10.0);
        let q = src(0.8);
        for theta in [0.2, 1.0, 2.5, PI] {
            for rho in [
                coherent_state(&o, theta).unwrap(),
                rotated_dicke_state(&o, 4.0, theta).unwrap(),
                thermal_partial_coherent(&o, 0.4, theta).unwrap(),
            ] {
                assert!(average_channel(&rho, q, &o).unwrap().mean_l(&o)[1].abs() < 1e-10);
                for outcome in [Outcome::Plus, Outcome::Minus] {
                    if let Ok(sel) = selective_channel(&rho, q, &o, outcome) {
                        assert!(sel.post_state.mean_l(&o)[1].abs() < 1e-10);
                    }
                }
            }
        }
    }

    /// The reduced form with the explicit `L_yρL_x − L_xρL_y` cross term.
    fn unitary_closed_form(rho: &CMatrix, z: f64, o: &SpinOperators, gamma: f64) -> CMatrix {
        let d = o.dim() as f64;
        let d2 = d * d;
        let s2 = (0.5 * gamma).sin().powi(2);
        let mut out = rho.scale((d2 + 1.0 + (d2 - 1.0) * gamma.cos()) / (2.0 * d2));
        for a in 0..3 {
            let la = o.component(a);
            out += (la * rho * la).scale(4.0 * s2 / d2);
        }
        let cross = &o.ly * rho * &o.lx - &o.lx * rho * &o.ly;
        out += cross.map(|v| v * I * (z * 4.0 * s2 / d2));
        out += (&o.lz * rho + rho * &o.lz).scale(2.0 * z * s2 / d2);
        out += (&o.lz * rho - rho * &o.lz).map(|v| v * I * (z / d * gamma.sin()));
        out
    }

    #[test]
    fn unitary_channel_paths_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for l in [0.5, 1.0, 3.5, 8.0] {
            let o = ops(l);
            let pair = build_projectors(&o);
            for gamma in [0.0, 0.4, 1.3, PI, 5.0] {
                let rho = random_state(o.dim(), &mut rng);
                let q = src(rng.random::<f64>() * 2.0 - 1.0);
                let fast = unitary_channel(&rho, q, &o, gamma).unwrap();
                let tensor = unitary_channel_tensor(&rho, q, &pair, gamma);
                assert!(fast.max_abs_diff(&tensor) < 1e-12, "l={l} gamma={gamma}");
                let closed = unitary_closed_form(rho.matrix(), q.z(), &o, gamma);
                assert!(linalg::max_abs_diff(fast.matrix(), &closed) < 1e-12);
                assert!((fast.trace().re - 1.0).abs() < 1e-12);

                // Direct U (ρ⊗ξ) U†.
                let n = 2 * o.dim();
                let u = &pair.pi_plus + pair.pi_minus.map(|v| v * Complex64::from_polar(1.0, -gamma));
                assert!(linalg::max_abs_diff(&(&u * u.adjoint()), &linalg::identity(n)) < 1e-12);
                let big = linalg::kron(rho.matrix(), &q.matrix());
                let direct = linalg::partial_trace_qubit(&(&u * big * u.adjoint()));
                assert!(linalg::max_abs_diff(&direct, fast.matrix()) < 1e-12);
            }
        }
    }

    #[test]
    fn unitary_channel_identity_at_zero() {
        let o = ops(7.0);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let rho = random_state(15, &mut rng);
        let out = unitary_channel(&rho, src(0.9), &o, 0.0).unwrap();
        assert_eq!(out.matrix(), rho.matrix());
    }

    #[test]
    fn full_period_duration_phase() {
        // 2π(l+½) = π d: odd d gives π, even d gives 0.
        for twice in [1u32, 2, 5, 32, 33] {
            let spin = SpinQuantum::from_twice(twice).unwrap();
            let expected = if spin.is_integer() { PI } else { 0.0 };
            for t in [2.0 * PI, -2.0 * PI] {
                let g = gamma_from_duration(t, spin).rem_euclid(2.0 * PI);
                let err = (g - expected).abs().min((g - expected - 2.0 * PI).abs());
                assert!(err < 1e-9, "2l={twice} g={g}");
            }
        }
    }

    #[test]
    fn choi_certificates() {
        let o = ops(2.0);
        let q = src(0.7);
        let avg = verify_cptp(|m| average_map(m, q, &o), 5, CHOI_DIM_CAP).unwrap();
        assert!(avg.is_cptp(), "{avg:?}");
        let uni = verify_cptp(|m| unitary_map(m, q, &o, 1.3), 5, CHOI_DIM_CAP).unwrap();
        assert!(uni.is_cptp(), "{uni:?}");
        for outcome in [Outcome::Plus, Outcome::Minus] {
            let sel = verify_cptp(|m| selective_map(m, q, &o, outcome), 5, CHOI_DIM_CAP).unwrap();
            assert!(sel.completely_positive());
        }
        assert!(matches!(
            verify_cptp(|m| m.clone(), 18, CHOI_DIM_CAP),
            Err(QrfError::ChoiCapExceeded { d: 18, cap: 17 })
        ));
    }

    #[test]
    fn choi_flags_corrupted_projector() {
        let o = ops(2.0);
        let q = src(0.7);
        let mut pair = build_projectors(&o);
        pair.pi_plus.scale_mut(1.01);
        let report = verify_cptp(
            |m| {
                let big = linalg::kron(m, &q.matrix());
                let out = &pair.pi_plus * &big * &pair.pi_plus + &pair.pi_minus * &big * &pair.pi_minus;
                linalg::partial_trace_qubit(&out)
            },
            5,
            CHOI_DIM_CAP,
        )
        .unwrap();
        assert!(report.tp_defect > 1e-3);
        assert!(!report.is_cptp());
    }
}
