use qrf_core::analytic;
use qrf_core::channels::{self, Outcome};
use qrf_core::metrics::{self, Lifetime};
use qrf_core::trajectory::{self, AverageRun, Schedule, StochasticOptions};
use qrf_core::{CorrectionStrategy, DensityMatrix, SpinOperators};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{Experiment, ExperimentConfig, Resolved};
use crate::error::{CliError, CliResult};
use crate::output::{Cell, ExperimentOutput, Table};

pub fn run_experiment(cfg: &ExperimentConfig) -> CliResult<ExperimentOutput> {
    let r = cfg.resolve()?;
    match r.experiment {
        Experiment::Fig1 => run_fig1(&r),
        Experiment::Fig2 => run_fig2(&r),
        Experiment::Fig3 => run_fig3(&r),
        Experiment::Fig4 => run_fig4(&r),
        Experiment::Fig5 => run_fig5(&r),
        Experiment::Scaling => run_scaling(&r),
        Experiment::Custom => run_custom(&r),
    }
}

fn unit_or_z(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if n > metrics::UNPOLARIZED_TOL {
        v.map(|x| x / n)
    } else {
        [0.0, 0.0, 1.0]
    }
}

fn finite_max(xs: impl IntoIterator<Item = f64>) -> Option<f64> {
    xs.into_iter().filter(|x| x.is_finite()).reduce(f64::max)
}

/// Exact one-step rotations of the frame under each outcome, next to the
/// closed-form angles evaluated at the state's measured `(r, θ)`.
pub fn run_fig1(r: &Resolved) -> CliResult<ExperimentOutput> {
    let ops = SpinOperators::new(r.spin);
    let l = ops.l();
    let rows: Vec<[f64; 5]> = r
        .thetas
        .par_iter()
        .map(|&theta| -> CliResult<[f64; 5]> {
            let rho = r.state.build(&ops, theta)?;
            let before = metrics::summarize_frame(&rho, &ops)?;
            let exact = |outcome| -> CliResult<f64> {
                match channels::selective_channel(&rho, r.source, &ops, outcome) {
                    Ok(s) => Ok(metrics::rotation_between(&before, &metrics::summarize_frame(&s.post_state, &ops)?)?),
                    Err(qrf_core::QrfError::OutcomeImpossible { .. }) => Ok(f64::NAN),
                    Err(e) => Err(e.into()),
                }
            };
            let (ap, am) = analytic::selective_angles_partially_coherent(l, before.r, r.source.z(), before.theta)
                .unwrap_or((f64::NAN, f64::NAN));
            Ok([theta, exact(Outcome::Plus)?, exact(Outcome::Minus)?, ap, am])
        })
        .collect::<CliResult<_>>()?;

    let mut table = Table::new([
        "theta",
        "omega_plus_exact",
        "omega_minus_exact",
        "omega_plus_analytic",
        "omega_minus_analytic",
        "abs_err_plus",
        "abs_err_minus",
    ]);
    let (mut over, mut total) = (0usize, 0usize);
    let mut rel_gap: f64 = 0.0;
    for [t, ep, em, ap, am] in &rows {
        table.push(vec![
            (*t).into(),
            (*ep).into(),
            (*em).into(),
            (*ap).into(),
            (*am).into(),
            (ep - ap).abs().into(),
            (em - am).abs().into(),
        ]);
        for (e, a) in [(ep, ap), (em, am)] {
            if e.is_finite() && a.is_finite() && e.abs() > 1e-12 {
                total += 1;
                if a.abs() >= e.abs() {
                    over += 1;
                }
                rel_gap = rel_gap.max((a.abs() - e.abs()).abs() / e.abs());
            }
        }
    }
    let summary = json!({
        "points": rows.len(),
        "branch_points_compared": total,
        "analytic_overestimates_fraction": if total > 0 { over as f64 / total as f64 } else { f64::NAN },
        "max_relative_gap": rel_gap,
        "max_abs_err_plus": finite_max(rows.iter().map(|x| (x[1] - x[3]).abs())),
        "max_abs_err_minus": finite_max(rows.iter().map(|x| (x[2] - x[4]).abs())),
    });
    Ok(ExperimentOutput { table, summary })
}

fn mean_l_over_l(run: &AverageRun, l: f64) -> Vec<(usize, [f64; 3])> {
    run.snapshots.iter().map(|s| (s.step, s.mean_l.map(|v| v / l))).collect()
}

/// Repeated unitary interactions with `+z` particles.
pub fn run_fig2(r: &Resolved) -> CliResult<ExperimentOutput> {
    let ops = SpinOperators::new(r.spin);
    let rho = r.state.build(&ops, r.theta)?;
    let schedule = Schedule::unitaries(r.n_steps, r.source, r.gamma)?;
    let run = trajectory::run_average(&rho, &schedule, r.record_every, &ops)?;
    let mut table = Table::new(["step", "Lx_over_l", "Ly_over_l", "Lz_over_l"]);
    let series = mean_l_over_l(&run, ops.l());
    for (step, v) in &series {
        table.push(vec![(*step).into(), v[0].into(), v[1].into(), v[2].into()]);
    }
    let one = trajectory::run_average(&rho, &Schedule::unitaries(1, r.source, r.gamma)?, 1, &ops)?;
    let first_step_angle = metrics::axis_angle_fit(one.snapshots[0].mean_l, one.snapshots[1].mean_l)
        .map(|f| f.omega)
        .unwrap_or(f64::NAN);
    let summary = json!({
        "gamma": r.gamma,
        "max_abs_Ly_over_l": finite_max(series.iter().map(|(_, v)| v[1].abs())),
        "first_step_angle": first_step_angle,
    });
    Ok(ExperimentOutput { table, summary })
}

fn p_succ_series(run: &AverageRun, l: f64, n_hat: [f64; 3]) -> CliResult<Vec<f64>> {
    run.snapshots
        .iter()
        .map(|s| metrics::p_succ_from_mean_l(s.mean_l, l, n_hat).map_err(CliError::from))
        .collect()
}

/// `P_succ` along the initial direction for measurements and for unitaries at each `γ`.
pub fn run_fig3(r: &Resolved) -> CliResult<ExperimentOutput> {
    let ops = SpinOperators::new(r.spin);
    let l = ops.l();
    let rho = r.state.build(&ops, r.theta)?;
    let n_hat = unit_or_z(rho.mean_l(&ops));
    let mut schedules = vec![Schedule::measurements(r.n_steps, r.source)?];
    for &g in &r.gammas {
        schedules.push(Schedule::unitaries(r.n_steps, r.source, g)?);
    }
    let runs: Vec<AverageRun> = schedules
        .par_iter()
        .map(|s| trajectory::run_average(&rho, s, r.record_every, &ops).map_err(CliError::from))
        .collect::<CliResult<_>>()?;
    let series: Vec<Vec<f64>> = runs
        .iter()
        .map(|run| p_succ_series(run, l, n_hat))
        .collect::<CliResult<_>>()?;
    let mut cols = vec!["step".to_string(), "p_succ_measurement".to_string()];
    cols.extend(r.gammas.iter().map(|g| format!("p_succ_unitary_gamma_{g}")));
    let mut table = Table::new(cols);
    for (i, snap) in runs[0].snapshots.iter().enumerate() {
        let mut row: Vec<Cell> = vec![snap.step.into()];
        row.extend(series.iter().map(|s| Cell::from(s[i])));
        table.push(row);
    }
    let finals: Vec<Value> = series.iter().map(|s| json!(s.last().copied())).collect();
    let summary = json!({
        "n_hat": n_hat,
        "initial_p_succ": series[0][0],
        "gammas": r.gammas,
        "final_p_succ": finals,
    });
    Ok(ExperimentOutput { table, summary })
}

/// Uncorrected measurements against measurements with a `−z` unitary after every two.
pub fn run_fig4(r: &Resolved) -> CliResult<ExperimentOutput> {
    let ops = SpinOperators::new(r.spin);
    let l = ops.l();
    let rho = r.state.build(&ops, r.theta)?;
    let strategies = [
        CorrectionStrategy::None,
        CorrectionStrategy::UnitaryEveryK { k: 2, gamma: r.gamma },
    ];
    let runs: Vec<AverageRun> = strategies
        .par_iter()
        .map(|s| {
            trajectory::run_average_strategy(&rho, r.n_steps, r.source, s, r.record_every, &ops).map_err(CliError::from)
        })
        .collect::<CliResult<_>>()?;
    let unc = mean_l_over_l(&runs[0], l);
    let cor = mean_l_over_l(&runs[1], l);
    let mut table = Table::new([
        "step",
        "Lx_over_l_uncorrected",
        "Lz_over_l_uncorrected",
        "Lx_over_l_corrected",
        "Lz_over_l_corrected",
    ]);
    for ((step, u), (_, c)) in unc.iter().zip(&cor) {
        table.push(vec![(*step).into(), u[0].into(), u[2].into(), c[0].into(), c[2].into()]);
    }
    let start = cor[0].1;
    let deviation = finite_max(cor.iter().map(|(_, c)| (c[0] - start[0]).hypot(c[2] - start[2])));
    let direction = finite_max(cor.iter().map(|(_, c)| {
        metrics::wrap_angle(c[0].atan2(c[2]) - start[0].atan2(start[2])).abs()
    }));
    let summary = json!({
        "correction_gamma": r.gamma,
        "max_deviation_corrected": deviation,
        "max_direction_change_corrected": direction,
        "final_uncorrected": unc.last().map(|(_, u)| [u[0], u[2]]),
        "final_corrected": cor.last().map(|(_, c)| [c[0], c[2]]),
    });
    Ok(ExperimentOutput { table, summary })
}

fn fig5_strategies(gamma: f64) -> [CorrectionStrategy; 3] {
    [
        CorrectionStrategy::None,
        CorrectionStrategy::UnitaryEveryK { k: 2, gamma },
        CorrectionStrategy::UnitaryAfterEachPlus { gamma },
    ]
}

/// `P_succ` against the number of measurements, corrective particles not
/// counted. With seeds the curves are ensemble means with standard errors,
/// otherwise the outcome-averaged evolution.
pub fn run_fig5(r: &Resolved) -> CliResult<ExperimentOutput> {
    let ops = SpinOperators::new(r.spin);
    let l = ops.l();
    let rho = r.state.build(&ops, r.theta)?;
    let n_hat = unit_or_z(rho.mean_l(&ops));
    let strategies = fig5_strategies(r.gamma);
    let names = ["p_succ_uncorrected", "p_succ_unitary_every2", "p_succ_after_each_plus"];
    match &r.seeds {
        None => {
            let runs: Vec<AverageRun> = strategies
                .par_iter()
                .map(|s| {
                    trajectory::run_average_strategy(&rho, r.n_steps, r.source, s, r.record_every, &ops)
                        .map_err(CliError::from)
                })
                .collect::<CliResult<_>>()?;
            let series: Vec<Vec<f64>> = runs
                .iter()
                .map(|run| p_succ_series(run, l, n_hat))
                .collect::<CliResult<_>>()?;
            let mut cols = vec!["n_measurements"];
            cols.extend(names);
            let mut table = Table::new(cols);
            for (i, snap) in runs[0].snapshots.iter().enumerate() {
                let mut row: Vec<Cell> = vec![snap.measurements.into()];
                row.extend(series.iter().map(|s| Cell::from(s[i])));
                table.push(row);
            }
            let summary = json!({
                "mode": "average",
                "correction_gamma": r.gamma,
                "final": series.iter().map(|s| s.last().copied()).collect::<Vec<_>>(),
            });
            Ok(ExperimentOutput { table, summary })
        }
        Some(seeds) => {
            let mut stats = Vec::with_capacity(3);
            for s in &strategies {
                let recs = trajectory::run_ensemble(&rho, r.n_steps, r.source, s, seeds, &ops, StochasticOptions::default())?;
                stats.push(trajectory::ensemble_statistics(&recs)?);
            }
            let mut cols: Vec<String> = vec!["n_measurements".into()];
            for n in names {
                cols.push(n.into());
                cols.push(format!("{n}_se"));
            }
            let mut table = Table::new(cols);
            for i in (0..=r.n_steps).filter(|i| i % r.record_every == 0 || *i == r.n_steps) {
                let mut row: Vec<Cell> = vec![stats[0].steps[i].measurements.into()];
                for s in &stats {
                    row.push(s.steps[i].p_succ_mean.into());
                    row.push(s.steps[i].p_succ_se.into());
                }
                table.push(row);
            }
            let summary = json!({
                "mode": "ensemble",
                "records": seeds.len(),
                "correction_gamma": r.gamma,
                "final": stats.iter().map(|s| s.steps.last().map(|x| x.p_succ_mean)).collect::<Vec<_>>(),
            });
            Ok(ExperimentOutput { table, summary })
        }
    }
}

/// Lifetimes over `l` for each threshold, with the fitted power of `l`.
pub fn run_scaling(r: &Resolved) -> CliResult<ExperimentOutput> {
    let cases: Vec<(usize, f64)> = r
        .thresholds
        .iter()
        .flat_map(|&t| (0..r.l_list.len()).map(move |i| (i, t)))
        .collect();
    let results: Vec<(f64, f64, Lifetime)> = cases
        .par_iter()
        .map(|&(i, t)| -> CliResult<(f64, f64, Lifetime)> {
            let ops = SpinOperators::new(r.l_list[i]);
            let rho = r.state.build(&ops, r.theta)?;
            let life = metrics::usable_lifetime(&rho, r.source, &ops, t, &r.strategy)?;
            Ok((ops.l(), t, life))
        })
        .collect::<CliResult<_>>()?;
    let mut table = Table::new(["l", "z", "threshold", "lifetime"]);
    for (l, t, life) in &results {
        table.push(vec![(*l).into(), r.source.z().into(), (*t).into(), Cell::Int(life.steps() as i64)]);
    }
    let mut fits = Vec::new();
    for &t in &r.thresholds {
        let pts: Vec<&(f64, f64, Lifetime)> = results.iter().filter(|x| x.1 == t).collect();
        let capped: Vec<f64> = pts.iter().filter(|x| matches!(x.2, Lifetime::Capped(_))).map(|x| x.0).collect();
        let mut entry = json!({ "threshold": t, "capped_l": capped });
        if pts.len() >= 2 && capped.is_empty() {
            let xs: Vec<f64> = pts.iter().map(|x| x.0).collect();
            let ys: Vec<f64> = pts.iter().map(|x| x.2.steps() as f64).collect();
            let (slope, intercept) = metrics::loglog_fit(&xs, &ys)?;
            entry["exponent"] = json!(slope);
            entry["log_prefactor"] = json!(intercept);
        }
        fits.push(entry);
    }
    let summary = json!({ "z": r.source.z(), "strategy": r.strategy, "fits": fits });
    Ok(ExperimentOutput { table, summary })
}

fn theta_of(mean_l: [f64; 3]) -> f64 {
    let n = (mean_l[0] * mean_l[0] + mean_l[1] * mean_l[1] + mean_l[2] * mean_l[2]).sqrt();
    if n > metrics::UNPOLARIZED_TOL {
        trajectory::inclination(mean_l)
    } else {
        f64::NAN
    }
}

/// Any state, source and strategy; average evolution or, with seeds, ensemble statistics.
pub fn run_custom(r: &Resolved) -> CliResult<ExperimentOutput> {
    let ops = SpinOperators::new(r.spin);
    let l = ops.l();
    let rho: DensityMatrix = r.state.build(&ops, r.theta)?;
    let n_hat = unit_or_z(rho.mean_l(&ops));
    match &r.seeds {
        None => {
            let run = trajectory::run_average_strategy(&rho, r.n_steps, r.source, &r.strategy, r.record_every, &ops)?;
            let mut table = Table::new(["n_measurements", "Lx_over_l", "Ly_over_l", "Lz_over_l", "theta", "p_succ"]);
            for s in &run.snapshots {
                let v = s.mean_l.map(|x| x / l);
                let p = metrics::p_succ_from_mean_l(s.mean_l, l, n_hat)?;
                table.push(vec![s.measurements.into(), v[0].into(), v[1].into(), v[2].into(), theta_of(s.mean_l).into(), p.into()]);
            }
            let summary = json!({ "mode": "average", "strategy": r.strategy, "n_hat": n_hat });
            Ok(ExperimentOutput { table, summary })
        }
        Some(seeds) => {
            let recs = trajectory::run_ensemble(&rho, r.n_steps, r.source, &r.strategy, seeds, &ops, StochasticOptions::default())?;
            let stats = trajectory::ensemble_statistics(&recs)?;
            let mut table = Table::new([
                "n_measurements",
                "Lx_over_l_mean",
                "Ly_over_l_mean",
                "Lz_over_l_mean",
                "Lx_over_l_se",
                "Ly_over_l_se",
                "Lz_over_l_se",
                "theta_mean",
                "theta_se",
                "cumulative_angle_mean",
                "cumulative_angle_se",
                "p_succ_mean",
                "p_succ_se",
                "plus_fraction",
            ]);
            for (i, s) in stats.steps.iter().enumerate() {
                if !(i % r.record_every == 0 || i == r.n_steps) {
                    continue;
                }
                let mut row: Vec<Cell> = vec![s.measurements.into()];
                row.extend(s.mean_l.iter().chain(&s.se_l).map(|v| Cell::from(v / l)));
                for v in [s.theta_mean, s.theta_se, s.cumulative_angle_mean, s.cumulative_angle_se, s.p_succ_mean, s.p_succ_se] {
                    row.push(v.into());
                }
                row.push(s.plus_fraction.unwrap_or(f64::NAN).into());
                table.push(row);
            }
            let corrections: usize = recs.iter().map(|x| x.correction_events.len()).sum();
            let summary = json!({
                "mode": "ensemble",
                "records": recs.len(),
                "strategy": r.strategy,
                "mean_corrections_per_record": corrections as f64 / recs.len() as f64,
            });
            Ok(ExperimentOutput { table, summary })
        }
    }
}
