//! Sequential evolution of the frame under repeated interactions.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{self, Outcome};
use crate::error::{ensure_finite, QrfError, Result};
use crate::linalg::CMatrix;
use crate::metrics::{self, FrameSummary};
use crate::spin::SpinOperators;
use crate::states::{DensityMatrix, SourceQubit};

/// Identifier written next to every seeded output.
pub const RNG_ALGORITHM: &str = "chacha20/rand_chacha-0.9/seed_from_u64/f64-per-measurement";

/// Hygiene corrections larger than this abort the run.
pub const FATAL_DRIFT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepKind {
    Measure { source: SourceQubit },
    Unitary { source: SourceQubit, gamma: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<StepKind>", into = "Vec<StepKind>")]
pub struct Schedule {
    steps: Vec<StepKind>,
}

impl Schedule {
    pub fn new(steps: Vec<StepKind>) -> Result<Self> {
        if steps.is_empty() {
            return Err(QrfError::InvalidSchedule("schedule has no steps".into()));
        }
        for (i, s) in steps.iter().enumerate() {
            if let StepKind::Unitary { gamma, .. } = s {
                if !gamma.is_finite() {
                    return Err(QrfError::InvalidSchedule(format!("step {i}: non-finite gamma")));
                }
            }
        }
        Ok(Self { steps })
    }

    pub fn measurements(n: usize, source: SourceQubit) -> Result<Self> {
        Self::new(vec![StepKind::Measure { source }; n])
    }

    pub fn unitaries(n: usize, source: SourceQubit, gamma: f64) -> Result<Self> {
        Self::new(vec![StepKind::Unitary { source, gamma }; n])
    }

    pub fn steps(&self) -> &[StepKind] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

impl TryFrom<Vec<StepKind>> for Schedule {
    type Error = QrfError;
    fn try_from(steps: Vec<StepKind>) -> Result<Self> {
        Self::new(steps)
    }
}

impl From<Schedule> for Vec<StepKind> {
    fn from(s: Schedule) -> Self {
        s.steps
    }
}

/// What happens between measurements. Every corrective unitary draws its
/// particle from the anti-polarized ensemble (source `−z`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CorrectionStrategy {
    #[default]
    None,
    /// Measurements alternate between the `z` and `−z` ensembles.
    AlternatingAntipolarized,
    /// A corrective unitary after every `k` measurements.
    UnitaryEveryK { k: u32, gamma: f64 },
    /// A corrective unitary after each `+` outcome.
    UnitaryAfterEachPlus { gamma: f64 },
    /// After each measurement, pick source sign and `γ` to restore the known inclination.
    ConditionalTuned { theta_known: f64 },
}

impl CorrectionStrategy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            CorrectionStrategy::UnitaryEveryK { k, gamma } => {
                if k == 0 {
                    return Err(QrfError::InvalidStrategy("k must be at least 1".into()));
                }
                ensure_gamma(gamma)
            }
            CorrectionStrategy::UnitaryAfterEachPlus { gamma } => ensure_gamma(gamma),
            CorrectionStrategy::ConditionalTuned { theta_known } => {
                if !(theta_known > 0.0 && theta_known < PI) {
                    return Err(QrfError::InvalidStrategy(format!(
                        "theta_known = {theta_known} must lie in (0, pi)"
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CorrectionStrategy::None => "none",
            CorrectionStrategy::AlternatingAntipolarized => "alternating_antipolarized",
            CorrectionStrategy::UnitaryEveryK { .. } => "unitary_every_k",
            CorrectionStrategy::UnitaryAfterEachPlus { .. } => "unitary_after_each_plus",
            CorrectionStrategy::ConditionalTuned { .. } => "conditional_tuned",
        }
    }
}

fn ensure_gamma(gamma: f64) -> Result<()> {
    if gamma.is_finite() {
        Ok(())
    } else {
        Err(QrfError::InvalidStrategy("gamma must be finite".into()))
    }
}

/// Sanitize after a channel application and turn gross drift into an error.
fn hygiene(rho: &mut DensityMatrix) -> Result<()> {
    let drift = rho.sanitize();
    if !(drift <= FATAL_DRIFT) {
        return Err(QrfError::NumericalInvariant(format!(
            "state drifted by {drift:e} from a unit-trace Hermitian matrix"
        )));
    }
    Ok(())
}

/// Polarization snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    /// Schedule steps applied so far, corrective ones included.
    pub step: usize,
    /// Measurements applied so far.
    pub measurements: usize,
    pub mean_l: [f64; 3],
    /// `None` when the frame is unpolarized.
    pub frame: Option<FrameSummary>,
}

impl Snapshot {
    fn take(rho: &DensityMatrix, ops: &SpinOperators, step: usize, measurements: usize) -> Self {
        Self {
            step,
            measurements,
            mean_l: rho.mean_l(ops),
            frame: metrics::summarize_frame(rho, ops).ok(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AverageRun {
    pub snapshots: Vec<Snapshot>,
    pub final_state: DensityMatrix,
}

fn apply_step(rho: &DensityMatrix, step: &StepKind, ops: &SpinOperators) -> Result<DensityMatrix> {
    let mut next = match *step {
        StepKind::Measure { source } => channels::average_channel(rho, source, ops)?,
        StepKind::Unitary { source, gamma } => channels::unitary_channel(rho, source, ops, gamma)?,
    };
    hygiene(&mut next)?;
    Ok(next)
}

/// Iterate the outcome-averaged maps along `schedule`, snapshotting the
/// initial state, every `record_every` steps and the final state.
pub fn run_average(
    rho0: &DensityMatrix,
    schedule: &Schedule,
    record_every: usize,
    ops: &SpinOperators,
) -> Result<AverageRun> {
    if record_every == 0 {
        return Err(QrfError::Precondition("record_every must be at least 1".into()));
    }
    rho0.validate()?;
    let mut rho = rho0.clone();
    let mut measurements = 0;
    let mut snapshots = vec![Snapshot::take(&rho, ops, 0, 0)];
    let n = schedule.len();
    for (i, step) in schedule.steps().iter().enumerate() {
        rho = apply_step(&rho, step, ops)?;
        if matches!(step, StepKind::Measure { .. }) {
            measurements += 1;
        }
        if (i + 1) % record_every == 0 || i + 1 == n {
            snapshots.push(Snapshot::take(&rho, ops, i + 1, measurements));
        }
    }
    Ok(AverageRun {
        snapshots,
        final_state: rho,
    })
}

/// Outcome-averaged evolution under a correction strategy, one measurement
/// at a time.
///
/// For `UnitaryAfterEachPlus` the averaged map is `F[p₊E₊ρ] + p₋E₋ρ`, which
/// is still linear in `ρ`. `ConditionalTuned` depends nonlinearly on the
/// state and has no averaged form.
pub struct AverageEvolver<'a> {
    rho: DensityMatrix,
    source: SourceQubit,
    ops: &'a SpinOperators,
    strategy: CorrectionStrategy,
    measurements: u64,
}

impl<'a> AverageEvolver<'a> {
    pub fn new(
        rho0: DensityMatrix,
        source: SourceQubit,
        ops: &'a SpinOperators,
        strategy: &CorrectionStrategy,
    ) -> Result<Self> {
        strategy.validate()?;
        if let CorrectionStrategy::ConditionalTuned { .. } = strategy {
            return Err(QrfError::InvalidStrategy(
                "conditional_tuned has no outcome-averaged form; use stochastic runs".into(),
            ));
        }
        if rho0.dim() != ops.dim() {
            return Err(QrfError::DimensionMismatch {
                expected: ops.dim(),
                got: rho0.dim(),
            });
        }
        Ok(Self {
            rho: rho0,
            source,
            ops,
            strategy: *strategy,
            measurements: 0,
        })
    }

    pub fn state(&self) -> &DensityMatrix {
        &self.rho
    }

    pub fn measurements(&self) -> u64 {
        self.measurements
    }

    /// One measurement plus whatever correction the strategy attaches to it.
    pub fn measure(&mut self) -> Result<()> {
        let ops = self.ops;
        let q = self.source;
        let corrective = q.flipped();
        let m = self.rho.matrix();
        let next: CMatrix = match self.strategy {
            CorrectionStrategy::None => channels::average_map(m, q, ops),
            CorrectionStrategy::AlternatingAntipolarized => {
                let src = if self.measurements % 2 == 0 { q } else { corrective };
                channels::average_map(m, src, ops)
            }
            CorrectionStrategy::UnitaryEveryK { k, gamma } => {
                let e = channels::average_map(m, q, ops);
                if (self.measurements + 1) % k as u64 == 0 {
                    channels::unitary_map(&e, corrective, ops, gamma)
                } else {
                    e
                }
            }
            CorrectionStrategy::UnitaryAfterEachPlus { gamma } => {
                let plus = channels::selective_map(m, q, ops, Outcome::Plus);
                let minus = channels::selective_map(m, q, ops, Outcome::Minus);
                channels::unitary_map(&plus, corrective, ops, gamma) + minus
            }
            CorrectionStrategy::ConditionalTuned { .. } => unreachable!("rejected in new"),
        };
        let mut rho = DensityMatrix::from_matrix_unchecked(next);
        hygiene(&mut rho)?;
        self.rho = rho;
        self.measurements += 1;
        Ok(())
    }
}

/// Average evolution for `n_measure` measurements under `strategy`.
pub fn run_average_strategy(
    rho0: &DensityMatrix,
    n_measure: usize,
    q: SourceQubit,
    strategy: &CorrectionStrategy,
    record_every: usize,
    ops: &SpinOperators,
) -> Result<AverageRun> {
    if record_every == 0 {
        return Err(QrfError::Precondition("record_every must be at least 1".into()));
    }
    rho0.validate()?;
    let mut ev = AverageEvolver::new(rho0.clone(), q, ops, strategy)?;
    let mut snapshots = vec![Snapshot::take(ev.state(), ops, 0, 0)];
    for i in 1..=n_measure {
        ev.measure()?;
        if i % record_every == 0 || i == n_measure {
            snapshots.push(Snapshot::take(ev.state(), ops, i, i));
        }
    }
    Ok(AverageRun {
        snapshots,
        final_state: ev.rho,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectionEvent {
    /// Number of measurements completed when the correction was applied.
    pub after_measurement: usize,
    pub gamma: f64,
    pub source_z: f64,
    /// Inclination error left after the correction, when the strategy targets one.
    pub residual: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub outcomes: Vec<Outcome>,
    /// Probability of each realized outcome.
    pub probabilities: Vec<f64>,
    /// Index 0 is the initial state; index `n` follows measurement `n` and its corrections.
    pub snapshots: Vec<Snapshot>,
    /// `P_succ` along the initial frame direction, aligned with `snapshots`.
    pub p_succ_series: Vec<f64>,
    pub correction_events: Vec<CorrectionEvent>,
    #[serde(skip)]
    pub final_state: Option<DensityMatrix>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StochasticOptions {
    pub keep_final_state: bool,
}

/// Unit vector along `⟨L⟩`, or +Z for an unpolarized frame.
fn reference_direction(mean_l: [f64; 3]) -> [f64; 3] {
    let n = metrics::norm3(mean_l);
    if n > metrics::UNPOLARIZED_TOL {
        mean_l.map(|v| v / n)
    } else {
        [0.0, 0.0, 1.0]
    }
}

pub fn run_stochastic(
    rho0: &DensityMatrix,
    n_measure: usize,
    q: SourceQubit,
    strategy: &CorrectionStrategy,
    seed: u64,
    ops: &SpinOperators,
) -> Result<TrajectoryRecord> {
    run_stochastic_with(rho0, n_measure, q, strategy, seed, ops, StochasticOptions::default())
}

/// One measurement record. Outcomes are drawn with the exact finite-l
/// probabilities from a ChaCha20 stream seeded by `seed`, one uniform
/// variate per measurement; an outcome with probability below the
/// conditioning threshold is never selected.
pub fn run_stochastic_with(
    rho0: &DensityMatrix,
    n_measure: usize,
    q: SourceQubit,
    strategy: &CorrectionStrategy,
    seed: u64,
    ops: &SpinOperators,
    opts: StochasticOptions,
) -> Result<TrajectoryRecord> {
    if n_measure == 0 {
        return Err(QrfError::Precondition("n_measure must be at least 1".into()));
    }
    strategy.validate()?;
    rho0.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let l = ops.l();
    let n_hat = reference_direction(rho0.mean_l(ops));
    let corrective = q.flipped();

    let mut rho = rho0.clone();
    let mut outcomes = Vec::with_capacity(n_measure);
    let mut probabilities = Vec::with_capacity(n_measure);
    let mut snapshots = Vec::with_capacity(n_measure + 1);
    let mut p_succ_series = Vec::with_capacity(n_measure + 1);
    let mut correction_events = Vec::new();
    let mut steps = 0;

    let first = Snapshot::take(&rho, ops, 0, 0);
    p_succ_series.push(metrics::p_succ_unchecked(first.mean_l, l, n_hat));
    snapshots.push(first);

    for n in 1..=n_measure {
        let src = match strategy {
            CorrectionStrategy::AlternatingAntipolarized if n % 2 == 0 => corrective,
            _ => q,
        };
        let m = rho.matrix();
        let plus = channels::selective_map(m, src, ops, Outcome::Plus);
        let p_plus = crate::linalg::trace(&plus).re;
        if !(-1e-9..=1.0 + 1e-9).contains(&p_plus) {
            return Err(QrfError::NumericalInvariant(format!("outcome probability {p_plus} outside [0, 1]")));
        }
        let u: f64 = rng.random();
        let outcome = if p_plus < channels::OUTCOME_THRESHOLD {
            Outcome::Minus
        } else if 1.0 - p_plus < channels::OUTCOME_THRESHOLD {
            Outcome::Plus
        } else if u < p_plus {
            Outcome::Plus
        } else {
            Outcome::Minus
        };
        let (unnorm, p) = match outcome {
            Outcome::Plus => (plus, p_plus),
            Outcome::Minus => (channels::selective_map(m, src, ops, Outcome::Minus), 1.0 - p_plus),
        };
        let mut next = DensityMatrix::from_matrix_unchecked(unnorm.scale(1.0 / p));
        hygiene(&mut next)?;
        rho = next;
        steps += 1;
        outcomes.push(outcome);
        probabilities.push(p.clamp(0.0, 1.0));

        let correction = match *strategy {
            CorrectionStrategy::UnitaryEveryK { k, gamma } if n % k as usize == 0 => Some(gamma),
            CorrectionStrategy::UnitaryAfterEachPlus { gamma } if outcome == Outcome::Plus => Some(gamma),
            _ => None,
        };
        if let Some(gamma) = correction {
            rho = apply_step(&rho, &StepKind::Unitary { source: corrective, gamma }, ops)?;
            steps += 1;
            correction_events.push(CorrectionEvent {
                after_measurement: n,
                gamma,
                source_z: corrective.z(),
                residual: None,
            });
        }
        if let CorrectionStrategy::ConditionalTuned { theta_known } = *strategy {
            let fix = conditional_correction_step(&rho, theta_known, outcome, q, ops)?;
            if fix.gamma != 0.0 {
                steps += 1;
                correction_events.push(CorrectionEvent {
                    after_measurement: n,
                    gamma: fix.gamma,
                    source_z: fix.source_z,
                    residual: Some(fix.residual),
                });
            }
            rho = fix.corrected;
        }

        let snap = Snapshot::take(&rho, ops, steps, n);
        p_succ_series.push(metrics::p_succ_unchecked(snap.mean_l, l, n_hat));
        snapshots.push(snap);
    }

    Ok(TrajectoryRecord {
        seed,
        outcomes,
        probabilities,
        snapshots,
        p_succ_series,
        correction_events,
        final_state: opts.keep_final_state.then_some(rho),
    })
}

/// Independent records for each seed, in seed order. Runs on the current
/// rayon pool; each record depends only on its own seed.
pub fn run_ensemble(
    rho0: &DensityMatrix,
    n_measure: usize,
    q: SourceQubit,
    strategy: &CorrectionStrategy,
    seeds: &[u64],
    ops: &SpinOperators,
    opts: StochasticOptions,
) -> Result<Vec<TrajectoryRecord>> {
    seeds
        .par_iter()
        .map(|&seed| run_stochastic_with(rho0, n_measure, q, strategy, seed, ops, opts))
        .collect()
}

/// Polar angle of `⟨L⟩` from +Z, in `[0, π]`.
pub fn inclination(mean_l: [f64; 3]) -> f64 {
    mean_l[0].hypot(mean_l[1]).atan2(mean_l[2])
}

#[derive(Debug, Clone)]
pub struct ConditionalCorrection {
    pub outcome: Outcome,
    /// `0` when no correction helps.
    pub gamma: f64,
    pub source_z: f64,
    /// `|θ_after − θ_known|` achieved.
    pub residual: f64,
    pub corrected: DensityMatrix,
}

const CONDITIONAL_GRID: usize = 48;
const GOLDEN_TOL: f64 = 1e-6;

/// Golden-section minimization of `f` on `[a, b]` down to `tol`.
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    let fx = f(x);
    (x, fx)
}

/// Choose a corrective unitary, sourced from `q` or its flip, that brings
/// the inclination of `rho` back to `theta_known`.
///
/// `γ` is scanned on a uniform grid over `[0, 2π]` for both source signs and
/// the best grid cell is refined by golden-section search to `1e-6` in `γ`.
/// If nothing beats leaving the state alone, `γ = 0` is returned.
pub fn conditional_correction_step(
    rho: &DensityMatrix,
    theta_known: f64,
    outcome: Outcome,
    q: SourceQubit,
    ops: &SpinOperators,
) -> Result<ConditionalCorrection> {
    ensure_finite("theta_known", theta_known)?;
    if !(theta_known > 0.0 && theta_known < PI) {
        return Err(QrfError::ParameterOutOfRange {
            name: "theta_known",
            value: theta_known,
            allowed: "(0, pi)",
        });
    }
    let residual_of = |m: &CMatrix| {
        let r = DensityMatrix::from_matrix_unchecked(m.clone());
        (inclination(r.mean_l(ops)) - theta_known).abs()
    };
    let untouched = residual_of(rho.matrix());
    let mut best = (untouched, 0.0, q.z());
    if untouched > 1e-12 {
        let mag = q.z().abs();
        for sz in [mag, -mag] {
            let src = SourceQubit::new(sz)?;
            let eval = |g: f64| residual_of(&channels::unitary_map(rho.matrix(), src, ops, g));
            let step = 2.0 * PI / CONDITIONAL_GRID as f64;
            let grid: Vec<f64> = (0..=CONDITIONAL_GRID).map(|k| eval(k as f64 * step)).collect();
            let k = (1..CONDITIONAL_GRID)
                .min_by(|&a, &b| grid[a].total_cmp(&grid[b]))
                .unwrap_or(1);
            let (g, res) = golden_section(eval, (k - 1) as f64 * step, (k + 1) as f64 * step, GOLDEN_TOL);
            if res < best.0 {
                best = (res, g, sz);
            }
        }
    }
    let (residual, gamma, source_z) = best;
    let corrected = if gamma == 0.0 {
        rho.clone()
    } else {
        let mut c = channels::unitary_channel(rho, SourceQubit::new(source_z)?, ops, gamma)?;
        hygiene(&mut c)?;
        c
    };
    Ok(ConditionalCorrection {
        outcome,
        gamma,
        source_z,
        residual,
        corrected,
    })
}

/// Mean and standard error of the mean; zero error for one sample.
fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct StepStatistics {
    pub measurements: usize,
    pub mean_l: [f64; 3],
    pub se_l: [f64; 3],
    pub theta_mean: f64,
    pub theta_se: f64,
    /// Mean of `θ_n − θ_0`, wrapped to `(−π, π]` per record.
    pub cumulative_angle_mean: f64,
    pub cumulative_angle_se: f64,
    pub p_succ_mean: f64,
    pub p_succ_se: f64,
    /// Fraction of `+` outcomes at this measurement; `None` for the initial row.
    pub plus_fraction: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EnsembleSummary {
    pub n_records: usize,
    pub steps: Vec<StepStatistics>,
}

fn snapshot_theta(s: &Snapshot) -> f64 {
    match &s.frame {
        Some(f) => f.theta,
        None => f64::NAN,
    }
}

pub fn ensemble_statistics(records: &[TrajectoryRecord]) -> Result<EnsembleSummary> {
    let first = records
        .first()
        .ok_or_else(|| QrfError::MixedRecords("no records".into()))?;
    let len = first.snapshots.len();
    if let Some(bad) = records.iter().find(|r| r.snapshots.len() != len || r.outcomes.len() + 1 != len) {
        return Err(QrfError::MixedRecords(format!(
            "record for seed {} has {} snapshots, expected {len}",
            bad.seed,
            bad.snapshots.len()
        )));
    }
    let mut steps = Vec::with_capacity(len);
    for i in 0..len {
        let col = |f: &dyn Fn(&TrajectoryRecord) -> f64| -> Vec<f64> { records.iter().map(f).collect() };
        let comps: Vec<(f64, f64)> = (0..3)
            .map(|a| mean_se(&col(&|r| r.snapshots[i].mean_l[a])))
            .collect();
        let (theta_mean, theta_se) = mean_se(&col(&|r| snapshot_theta(&r.snapshots[i])));
        let (cumulative_angle_mean, cumulative_angle_se) = mean_se(&col(&|r| {
            metrics::wrap_angle(snapshot_theta(&r.snapshots[i]) - snapshot_theta(&r.snapshots[0]))
        }));
        let (p_succ_mean, p_succ_se) = mean_se(&col(&|r| r.p_succ_series[i]));
        let plus_fraction = (i > 0).then(|| {
            records.iter().filter(|r| r.outcomes[i - 1] == Outcome::Plus).count() as f64 / records.len() as f64
        });
        steps.push(StepStatistics {
            measurements: first.snapshots[i].measurements,
            mean_l: [comps[0].0, comps[1].0, comps[2].0],
            se_l: [comps[0].1, comps[1].1, comps[2].1],
            theta_mean,
            theta_se,
            cumulative_angle_mean,
            cumulative_angle_se,
            p_succ_mean,
            p_succ_se,
            plus_fraction,
        });
    }
    Ok(EnsembleSummary {
        n_records: records.len(),
        steps,
    })
}

/// Average of the final states kept by [`StochasticOptions::keep_final_state`].
pub fn ensemble_mean_state(records: &[TrajectoryRecord]) -> Result<DensityMatrix> {
    let states: Vec<&DensityMatrix> = records
        .iter()
        .map(|r| {
            r.final_state
                .as_ref()
                .ok_or_else(|| QrfError::MixedRecords("record was run without keep_final_state".into()))
        })
        .collect::<Result<_>>()?;
    let w = 1.0 / states.len().max(1) as f64;
    DensityMatrix::mixture(&states.iter().map(|s| (w, *s)).collect::<Vec<_>>())
}
