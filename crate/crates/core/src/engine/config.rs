use serde::{Deserialize, Serialize};

use crate::acquisition::{AcquisitionParams, BaseAcquisition};
use crate::design::default_initial_size;
use crate::error::{Error, Result};
use crate::gate::{extended_float, DEFAULT_GATE_SAMPLES, DEFAULT_TAU};
use crate::objectives::{objective_by_id, Objective};
use crate::optimizer::OptimizerSettings;
use crate::space::ConfigSpace;
use crate::surrogate::{ForestSettings, GpSettings, SurrogateKind, SurrogateSettings};
use crate::synthesis::Policy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorMode {
    #[default]
    None,
    Scheduled,
    RandomTiming,
    Interactive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    /// Trials completed when the prior is submitted.
    pub iteration: usize,
    pub policy: Policy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RandomTiming {
    pub rate: f64,
    pub policy: Policy,
}

impl Default for RandomTiming {
    fn default() -> Self {
        Self {
            rate: 0.15,
            policy: Policy::Expert,
        }
    }
}

/// Size of the exploratory corpus behind scripted priors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusSpec {
    pub seeds: usize,
    pub iters: usize,
    pub clusters: usize,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            seeds: 10,
            iters: 500,
            clusters: 100,
        }
    }
}

fn default_tau() -> f64 {
    DEFAULT_TAU
}

fn default_kappa() -> f64 {
    1.0
}

fn default_decay_power() -> f64 {
    2.0
}

fn default_gate_samples() -> usize {
    DEFAULT_GATE_SAMPLES
}

/// Everything that determines a run. Serialized as the run-config JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub objective: String,
    /// Must match the objective's space when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<ConfigSpace>,
    pub budget: usize,
    #[serde(default)]
    pub surrogate: SurrogateKind,
    /// Defaults to a tenth of the budget.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default = "default_tau", with = "extended_float")]
    pub tau: f64,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default = "default_decay_power")]
    pub decay_power: f64,
    /// Defaults to `max(5, 2 * dim)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_init: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub prior_mode: PriorMode,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub schedule: Vec<ScheduleEntry>,
    #[serde(default)]
    pub random_timing: RandomTiming,
    #[serde(default)]
    pub corpus: CorpusSpec,
    #[serde(default)]
    pub acquisition: BaseAcquisition,
    #[serde(default = "default_gate_samples")]
    pub gate_samples: usize,
    #[serde(default)]
    pub optimizer: OptimizerSettings,
    #[serde(default)]
    pub gp: GpSettings,
    #[serde(default)]
    pub forest: ForestSettings,
    /// Pause after every trial; lets humans steer fast objectives.
    #[serde(default)]
    pub iteration_delay_ms: u64,
    /// Stamp events with wall-clock time (makes logs non-reproducible).
    #[serde(default)]
    pub wall_clock: bool,
}

impl RunConfig {
    pub fn new(objective: &str, budget: usize, seed: u64) -> Self {
        Self {
            objective: objective.into(),
            space: None,
            budget,
            surrogate: SurrogateKind::Gp,
            beta: None,
            tau: DEFAULT_TAU,
            kappa: 1.0,
            decay_power: 2.0,
            n_init: None,
            seed,
            prior_mode: PriorMode::None,
            schedule: Vec::new(),
            random_timing: RandomTiming::default(),
            corpus: CorpusSpec::default(),
            acquisition: BaseAcquisition::Ei,
            gate_samples: DEFAULT_GATE_SAMPLES,
            optimizer: OptimizerSettings::default(),
            gp: GpSettings::default(),
            forest: ForestSettings::default(),
            iteration_delay_ms: 0,
            wall_clock: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidRunConfig(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run config serializes")
    }

    pub fn beta(&self) -> f64 {
        self.beta.unwrap_or(self.budget as f64 / 10.0)
    }

    pub fn n_init(&self, dim: usize) -> usize {
        self.n_init.unwrap_or_else(|| default_initial_size(dim))
    }

    pub fn acquisition_params(&self) -> AcquisitionParams {
        AcquisitionParams {
            beta: self.beta(),
            kappa: self.kappa,
            decay_power: self.decay_power,
            base: self.acquisition,
        }
    }

    pub fn surrogate_settings(&self) -> SurrogateSettings {
        SurrogateSettings {
            kind: self.surrogate,
            gp: self.gp.clone(),
            forest: self.forest.clone(),
        }
    }

    /// Resolves the objective and checks every invariant of the config.
    pub fn validate(&self) -> Result<std::sync::Arc<dyn Objective>> {
        let bad = |m: String| Err(Error::InvalidRunConfig(m));
        let objective = objective_by_id(&self.objective)?;
        if let Some(space) = &self.space {
            if space.fingerprint() != objective.space().fingerprint() {
                return bad(format!("space does not match objective `{}`", self.objective));
            }
        }
        if self.budget == 0 {
            return bad("budget must be at least 1".into());
        }
        let n_init = self.n_init(objective.dimension());
        if n_init == 0 || n_init >= self.budget {
            return bad(format!("n_init {n_init} must lie in [1, budget {})", self.budget));
        }
        if !(self.beta() >= 0.0) || !self.beta().is_finite() {
            return bad(format!("beta must be finite and non-negative, got {}", self.beta()));
        }
        if !(self.kappa > 0.0) || !self.kappa.is_finite() {
            return bad(format!("kappa must be positive, got {}", self.kappa));
        }
        if !(self.decay_power > 0.0) || !self.decay_power.is_finite() {
            return bad(format!("decay_power must be positive, got {}", self.decay_power));
        }
        if self.tau.is_nan() {
            return bad("tau must not be NaN".into());
        }
        if self.gate_samples == 0 {
            return bad("gate_samples must be at least 1".into());
        }
        if self.optimizer.pool_size == 0 {
            return bad("optimizer.pool_size must be at least 1".into());
        }
        if !(self.random_timing.rate >= 0.0) {
            return bad("random_timing.rate must be non-negative".into());
        }
        if self.prior_mode == PriorMode::Scheduled && self.schedule.is_empty() {
            return bad("scheduled prior mode needs a non-empty schedule".into());
        }
        if self.schedule.windows(2).any(|w| w[0].iteration >= w[1].iteration) {
            return bad("schedule iterations must be strictly increasing".into());
        }
        if let Some(e) = self.schedule.iter().find(|e| e.iteration >= self.budget) {
            return bad(format!("schedule iteration {} is not below the budget", e.iteration));
        }
        Ok(objective)
    }
}
