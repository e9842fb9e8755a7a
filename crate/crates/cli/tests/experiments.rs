use std::f64::consts::PI;

use proptest::prelude::*;
use qrf_core::QrfError;
use qrf_sim::config::{OneOrMany, StateFamily};
use qrf_sim::{run_experiment, CliError, Experiment, ExperimentConfig, ExperimentOutput};

fn run(cfg: &ExperimentConfig) -> ExperimentOutput {
    run_experiment(cfg).unwrap()
}

fn col(out: &ExperimentOutput, name: &str) -> Vec<f64> {
    out.table.column(name).unwrap_or_else(|| panic!("no column {name} in {:?}", out.table.columns))
}

#[test]
fn unitary_with_zero_strength_leaves_the_frame_alone() {
    let mut cfg = ExperimentConfig::new(Experiment::Fig2);
    cfg.l = Some(8.0);
    cfg.n_steps = Some(20);
    cfg.gamma = Some(0.0);
    let out = run(&cfg);
    for name in ["Lx_over_l", "Ly_over_l", "Lz_over_l"] {
        let c = col(&out, name);
        assert!(c.iter().all(|v| *v == c[0]), "{name}");
    }
}

#[test]
fn repeated_unitaries_tilt_out_of_plane_by_one_over_l() {
    let angle = |l| {
        let mut cfg = ExperimentConfig::new(Experiment::Fig2);
        cfg.l = Some(l);
        cfg.n_steps = Some(5);
        let out = run(&cfg);
        assert!(col(&out, "Ly_over_l").iter().skip(1).all(|v| v.abs() > 1e-6));
        out.summary["first_step_angle"].as_f64().unwrap()
    };
    let ratio = angle(16.0) / angle(160.0);
    assert!((9.0..=11.0).contains(&ratio), "{ratio}");
}

#[test]
fn success_probability_decays_under_measurement() {
    let mut cfg = ExperimentConfig::new(Experiment::Fig3);
    cfg.l = Some(16.0);
    cfg.n_steps = Some(60);
    cfg.gammas = Some(vec![0.0, PI]);
    let out = run(&cfg);
    let m = col(&out, "p_succ_measurement");
    assert!((m[0] - 0.5 * (1.0 + 16.0 / 16.5)).abs() < 1e-14);
    assert!(m.windows(2).all(|w| w[1] < w[0]));
    let still = col(&out, "p_succ_unitary_gamma_0");
    assert!(still.iter().all(|v| (v - m[0]).abs() < 1e-14));
    let strong = col(&out, &format!("p_succ_unitary_gamma_{PI}"));
    assert!(strong.last().unwrap() < &m[0]);
}

#[test]
fn corrected_trajectory_keeps_direction_and_shrinks_with_l() {
    let dev = |l| {
        let mut cfg = ExperimentConfig::new(Experiment::Fig4);
        cfg.l = Some(l);
        let out = run(&cfg);
        assert_eq!(out.table.columns.len(), 5);
        assert_eq!(out.table.rows.len(), 201);
        let unc = col(&out, "Lx_over_l_uncorrected");
        let cor_x = col(&out, "Lx_over_l_corrected");
        let cor_z = col(&out, "Lz_over_l_corrected");
        // Uncorrected, the frame turns toward +Z, so L_x falls well below the corrected curve.
        assert!(unc.last().unwrap() + 0.2 < *cor_x.last().unwrap());
        assert!(cor_z.iter().all(|v| v.abs() < 0.05));
        assert!(out.summary["max_direction_change_corrected"].as_f64().unwrap() < 0.05);
        out.summary["max_deviation_corrected"].as_f64().unwrap()
    };
    let ratio = dev(16.0) / dev(32.0);
    assert!((3.0..=4.5).contains(&ratio), "{ratio}");
}

#[test]
fn corrections_pay_off_after_enough_measurements() {
    let mut cfg = ExperimentConfig::new(Experiment::Fig5);
    cfg.l = Some(16.0);
    cfg.n_steps = Some(200);
    let out = run(&cfg);
    let n = col(&out, "n_measurements");
    let unc = col(&out, "p_succ_uncorrected");
    let every2 = col(&out, "p_succ_unitary_every2");
    let plus = col(&out, "p_succ_after_each_plus");
    assert_eq!(unc[0], every2[0]);
    assert_eq!(unc[0], plus[0]);
    for i in (0..n.len()).filter(|&i| n[i] >= 50.0) {
        assert!(every2[i] > unc[i], "every2 at {}", n[i]);
        assert!(plus[i] > unc[i], "after-plus at {}", n[i]);
    }
}

#[test]
fn ensemble_columns_carry_standard_errors() {
    let mut cfg = ExperimentConfig::new(Experiment::Fig5);
    cfg.l = Some(4.0);
    cfg.n_steps = Some(10);
    cfg.seeds = Some((0..40).collect());
    let out = run(&cfg);
    assert_eq!(out.table.columns.len(), 7);
    let se = col(&out, "p_succ_uncorrected_se");
    assert!(se[0] < 1e-12);
    assert!(se[10] > 0.0);
    assert_eq!(out.summary["records"], 40);
}

#[test]
fn scaling_fit_needs_two_lengths() {
    let mut cfg = ExperimentConfig::new(Experiment::Scaling);
    cfg.l_list = Some(vec![8.0]);
    let out = run(&cfg);
    assert!(out.summary["fits"][0].get("exponent").is_none());

    cfg.l_list = Some(vec![8.0, 16.0, 32.0]);
    cfg.z = Some(0.0);
    cfg.threshold = Some(OneOrMany::One(0.85));
    let out = run(&cfg);
    let exponent = out.summary["fits"][0]["exponent"].as_f64().unwrap();
    assert!((exponent - 2.0).abs() < 0.2, "{exponent}");
    assert_eq!(col(&out, "lifetime"), vec![43.0, 178.0, 721.0]);
}

#[test]
fn mixture_rotations_stay_close_to_the_closed_form() {
    let mut cfg = ExperimentConfig::new(Experiment::Fig1);
    cfg.l = Some(40.0);
    cfg.state = Some(StateFamily::MixedDicke { k1: 4.0, k2: 16.0, p: 0.2 });
    let out = run(&cfg);
    let gap = out.summary["max_relative_gap"].as_f64().unwrap();
    assert!(gap < 0.15, "{gap}");
    assert_eq!(out.table.rows.len(), 19);
}

#[test]
fn custom_accepts_every_strategy_with_an_average_form() {
    for strategy in [
        r#"{"kind":"none"}"#,
        r#"{"kind":"alternating_antipolarized"}"#,
        r#"{"kind":"unitary_every_k","k":3,"gamma":3.0}"#,
        r#"{"kind":"unitary_after_each_plus","gamma":3.0}"#,
    ] {
        let text = format!(r#"{{"experiment":"custom","l":3,"n_steps":4,"strategy":{strategy}}}"#);
        let out = run(&ExperimentConfig::from_json(&text).unwrap());
        assert_eq!(out.table.rows.len(), 5);
    }
    let text = r#"{"experiment":"custom","l":3,"n_steps":4,"strategy":{"kind":"conditional_tuned","theta_known":1.0}}"#;
    assert_eq!(run_experiment(&ExperimentConfig::from_json(text).unwrap()).unwrap_err().exit_code(), 2);
}

#[test]
fn state_health_failures_map_to_exit_3() {
    let e = CliError::from(QrfError::NumericalInvariant("trace drifted".into()));
    assert_eq!(e.exit_code(), 3);
    assert_eq!(e.diagnostic(), "qrf-sim: numerical-invariant: numerical invariant violated: trace drifted");
    let e = CliError::from(QrfError::Precondition("bad\nthing".into()));
    assert_eq!(e.exit_code(), 2);
    assert!(!e.diagnostic().contains('\n'));
}

fn config_strategy() -> impl Strategy<Value = ExperimentConfig> {
    (
        1u32..40,
        -1.0f64..=1.0,
        0.01f64..3.1,
        prop::option::of(1usize..500),
        prop::option::of(prop::collection::vec(any::<u64>(), 1..5)),
        prop::option::of(-10.0f64..10.0),
    )
        .prop_map(|(twice_l, z, theta, n_steps, seeds, gamma)| {
            let mut cfg = ExperimentConfig::new(Experiment::Fig5);
            cfg.l = Some(twice_l as f64 / 2.0);
            cfg.z = Some(z);
            cfg.theta = Some(theta);
            cfg.n_steps = n_steps;
            cfg.seeds = seeds;
            cfg.gamma = gamma;
            cfg
        })
}

proptest! {
    #[test]
    fn config_json_round_trips(cfg in config_strategy()) {
        let back = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.hash(), cfg.hash());
        let mut moved = cfg.clone();
        moved.output = Some("elsewhere/run.csv".into());
        prop_assert_eq!(moved.hash(), cfg.hash());
    }
}
