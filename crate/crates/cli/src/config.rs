use std::f64::consts::PI;
use std::path::PathBuf;

use qrf_core::states::{self, DensityMatrix};
use qrf_core::{CorrectionStrategy, SourceQubit, SpinOperators, SpinQuantum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Largest frame accepted from a config; keeps dense runs at desk scale.
pub const MAX_TWICE_L: u32 = 1024;
pub const MAX_STEPS: usize = 1_000_000;
pub const MAX_GRID_POINTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Scaling,
    Custom,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Fig1 => "fig1",
            Experiment::Fig2 => "fig2",
            Experiment::Fig3 => "fig3",
            Experiment::Fig4 => "fig4",
            Experiment::Fig5 => "fig5",
            Experiment::Scaling => "scaling",
            Experiment::Custom => "custom",
        }
    }
}

/// Initial frame state, rotated to `theta` about the Y axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateFamily {
    Coherent {},
    RotatedDicke { k: f64 },
    MixedDicke { k1: f64, k2: f64, p: f64 },
    /// Gibbs state with polarization `r`.
    Thermal { r: f64 },
    MaximallyMixed {},
}

impl StateFamily {
    pub fn build(&self, ops: &SpinOperators, theta: f64) -> CliResult<DensityMatrix> {
        let rho = match *self {
            StateFamily::Coherent {} => states::coherent_state(ops, theta),
            StateFamily::RotatedDicke { k } => states::rotated_dicke_state(ops, k, theta),
            StateFamily::MixedDicke { k1, k2, p } => states::mixed_dicke_state(ops, k1, k2, p, theta),
            StateFamily::Thermal { r } => states::thermal_partial_coherent(ops, r, theta),
            StateFamily::MaximallyMixed {} => Ok(DensityMatrix::maximally_mixed(ops.dim())),
        };
        rho.map_err(|e| CliError::Config(format!("state: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformGrid {
    /// Interior points `iπ/(points+1)`, `i = 1..=points`.
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ThetaGrid {
    List(Vec<f64>),
    Uniform(UniformGrid),
}

impl ThetaGrid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            ThetaGrid::List(v) => v.clone(),
            ThetaGrid::Uniform(g) => (1..=g.points).map(|i| i as f64 * PI / (g.points + 1) as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    pub fn values(&self) -> Vec<f64> {
        match self {
            OneOrMany::One(v) => vec![*v],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

/// One JSON document describing a run. Absent fields take per-experiment
/// defaults; fields an experiment does not read are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_list: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<StateFamily>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_grid: Option<ThetaGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<CorrectionStrategy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<OneOrMany>,
    /// Interaction strength of the unitary (fig2) or of the corrective unitary (fig4, fig5).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Unitary columns of fig3.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gammas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_every: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            l: None,
            l_list: None,
            state: None,
            z: None,
            theta: None,
            theta_grid: None,
            n_steps: None,
            strategy: None,
            seeds: None,
            output: None,
            threshold: None,
            gamma: None,
            gammas: None,
            record_every: None,
        }
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("config parse: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the compact serialization with the output path removed,
    /// so the hash names the physics and not where it was written.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = None;
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        format!("{:x}", Sha256::digest(&bytes))
    }

    fn present(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        macro_rules! mark {
            ($($f:ident),*) => { $( if self.$f.is_some() { v.push(stringify!($f)); } )* };
        }
        mark!(l, l_list, state, z, theta, theta_grid, n_steps, strategy, seeds, threshold, gamma, gammas, record_every);
        v
    }

    fn allowed(&self) -> &'static [&'static str] {
        match self.experiment {
            Experiment::Fig1 => &["l", "state", "z", "theta_grid"],
            Experiment::Fig2 => &["l", "state", "z", "theta", "n_steps", "gamma", "record_every"],
            Experiment::Fig3 => &["l", "state", "z", "theta", "n_steps", "gamma", "gammas", "record_every"],
            Experiment::Fig4 => &["l", "state", "z", "theta", "n_steps", "gamma", "record_every"],
            Experiment::Fig5 => &["l", "state", "z", "theta", "n_steps", "gamma", "seeds", "record_every"],
            Experiment::Scaling => &["l_list", "state", "z", "theta", "threshold", "strategy"],
            Experiment::Custom => &["l", "state", "z", "theta", "n_steps", "strategy", "seeds", "record_every"],
        }
    }

    /// Fill defaults and check every physical parameter.
    pub fn resolve(&self) -> CliResult<Resolved> {
        let allowed = self.allowed();
        if let Some(f) = self.present().into_iter().find(|f| !allowed.contains(f)) {
            return Err(CliError::Config(format!(
                "field `{f}` is not used by experiment {}",
                self.experiment.name()
            )));
        }
        let e = self.experiment;
        let default_l = if e == Experiment::Fig1 { 100.0 } else { 16.0 };
        let spin = spin_from(self.l.unwrap_or(default_l), "l")?;
        let l_list = match &self.l_list {
            Some(v) if v.is_empty() => return Err(CliError::Config("l_list must not be empty".into())),
            Some(v) => v.iter().map(|&l| spin_from(l, "l_list")).collect::<CliResult<Vec<_>>>()?,
            None => [8.0, 16.0, 32.0, 64.0].iter().map(|&l| spin_from(l, "l_list")).collect::<CliResult<_>>()?,
        };
        let state = self.state.clone().unwrap_or(if e == Experiment::Fig1 {
            StateFamily::MixedDicke { k1: 10.0, k2: 40.0, p: 0.2 }
        } else {
            StateFamily::Coherent {}
        });
        let z = self.z.unwrap_or(1.0);
        let source = SourceQubit::new(z).map_err(|err| CliError::Config(format!("z: {err}")))?;
        let theta = self.theta.unwrap_or(PI / 2.0);
        check_theta(theta, "theta")?;
        let thetas = self
            .theta_grid
            .clone()
            .unwrap_or(ThetaGrid::Uniform(UniformGrid { points: 19 }))
            .values();
        if thetas.is_empty() || thetas.len() > MAX_GRID_POINTS {
            return Err(CliError::Config(format!(
                "theta_grid must have between 1 and {MAX_GRID_POINTS} points"
            )));
        }
        for &t in &thetas {
            check_theta(t, "theta_grid")?;
        }
        let default_steps = match e {
            Experiment::Fig2 | Experiment::Fig3 => 500,
            Experiment::Fig4 | Experiment::Fig5 => 200,
            _ => 100,
        };
        let n_steps = self.n_steps.unwrap_or(default_steps);
        if n_steps == 0 || n_steps > MAX_STEPS {
            return Err(CliError::Config(format!("n_steps = {n_steps} must lie in 1..={MAX_STEPS}")));
        }
        let record_every = self.record_every.unwrap_or(1);
        if record_every == 0 {
            return Err(CliError::Config("record_every must be at least 1".into()));
        }
        let default_gamma = if e == Experiment::Fig2 { PI / 2.0 } else { PI };
        let gamma = self.gamma.unwrap_or(default_gamma);
        check_finite(gamma, "gamma")?;
        let gammas = match (&self.gammas, self.gamma) {
            (Some(_), Some(_)) => return Err(CliError::Config("set either gamma or gammas, not both".into())),
            (Some(v), None) => v.clone(),
            (None, Some(g)) => vec![g],
            (None, None) => vec![PI / 4.0, PI / 2.0, PI],
        };
        if gammas.is_empty() {
            return Err(CliError::Config("gammas must not be empty".into()));
        }
        for &g in &gammas {
            check_finite(g, "gammas")?;
        }
        let thresholds = self.threshold.clone().unwrap_or(OneOrMany::One(0.9)).values();
        if thresholds.is_empty() {
            return Err(CliError::Config("threshold list must not be empty".into()));
        }
        for &t in &thresholds {
            if !(t > 0.5 && t < 1.0) {
                return Err(CliError::Config(format!("threshold = {t} must lie in (0.5, 1)")));
            }
        }
        let strategy = self.strategy.unwrap_or_default();
        strategy.validate().map_err(|err| CliError::Config(format!("strategy: {err}")))?;
        let seeds = self.seeds.clone();
        if matches!(&seeds, Some(s) if s.is_empty()) {
            return Err(CliError::Config("seeds must not be empty".into()));
        }
        Ok(Resolved {
            experiment: e,
            spin,
            l_list,
            state,
            source,
            theta,
            thetas,
            n_steps,
            record_every,
            gamma,
            gammas,
            thresholds,
            strategy,
            seeds,
        })
    }
}

/// A config with every default filled in and every range checked.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub experiment: Experiment,
    pub spin: SpinQuantum,
    pub l_list: Vec<SpinQuantum>,
    pub state: StateFamily,
    pub source: SourceQubit,
    pub theta: f64,
    pub thetas: Vec<f64>,
    pub n_steps: usize,
    pub record_every: usize,
    pub gamma: f64,
    pub gammas: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub strategy: CorrectionStrategy,
    pub seeds: Option<Vec<u64>>,
}

fn check_finite(v: f64, name: &str) -> CliResult<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be finite")))
    }
}

fn check_theta(t: f64, name: &str) -> CliResult<()> {
    if (0.0..=PI).contains(&t) {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} = {t} must lie in [0, pi]")))
    }
}

fn spin_from(l: f64, name: &str) -> CliResult<SpinQuantum> {
    let spin = SpinQuantum::from_l(l).map_err(|e| CliError::Config(format!("{name}: {e}")))?;
    if spin.twice_l() > MAX_TWICE_L {
        return Err(CliError::Config(format!(
            "{name} = {l} exceeds the supported maximum {}",
            MAX_TWICE_L as f64 / 2.0
        )));
    }
    Ok(spin)
}
