use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::acquisition::ActivePrior;
use crate::error::Result;
use crate::gate::GateVerdict;
use crate::prior::Prior;
use crate::space::{ConfigSpace, Configuration, EncodedVector};
use crate::surrogate::SurrogateModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialSource {
    Init,
    Bo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    /// 1-based position in the run.
    pub iteration: usize,
    pub config: Configuration,
    pub loss: f64,
    pub source: TrialSource,
    /// The objective failed and `loss` is an imputed penalty.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Incumbent {
    pub config: Configuration,
    pub loss: f64,
    pub iteration: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorRecord {
    pub id: String,
    pub prior: Prior,
    pub verdict: GateVerdict,
    /// Trials completed when the prior was assessed.
    pub submitted_at: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arrival_iteration: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Created,
    Running,
    AwaitingPriorDecision,
    Finished,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Trial,
    IncumbentUpdate,
    PriorSubmitted,
    PriorVerdict,
    PriorOverridden,
    PriorActivated,
    Warning,
    Finished,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    /// Position in the run's event log, starting at 0.
    pub seq: u64,
    pub kind: EventKind,
    /// Trials completed when the event was recorded.
    pub iteration: usize,
    pub payload: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<String>,
}

/// Full trajectory of a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunState {
    pub objective: String,
    pub seed: u64,
    pub budget: usize,
    pub known_min: f64,
    pub status: RunStatus,
    pub iteration: usize,
    pub trials: Vec<Trial>,
    pub incumbent: Option<Incumbent>,
    pub active_priors: Vec<ActivePrior>,
    /// Every assessed prior, accepted or not, in submission order.
    pub priors: Vec<PriorRecord>,
    pub events: Vec<Event>,
    #[serde(skip)]
    pub(crate) encoded: Vec<EncodedVector>,
}

impl RunState {
    pub fn new(objective: &str, seed: u64, budget: usize, known_min: f64) -> Self {
        Self {
            objective: objective.into(),
            seed,
            budget,
            known_min,
            status: RunStatus::Created,
            iteration: 0,
            trials: Vec::new(),
            incumbent: None,
            active_priors: Vec::new(),
            priors: Vec::new(),
            events: Vec::new(),
            encoded: Vec::new(),
        }
    }

    pub fn regret(&self, loss: f64) -> f64 {
        (loss - self.known_min).max(0.0)
    }

    /// Best loss after each trial.
    pub fn incumbent_trajectory(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.trials
            .iter()
            .map(|t| {
                if !t.failed {
                    best = best.min(t.loss);
                }
                best
            })
            .collect()
    }

    pub fn regret_trajectory(&self) -> Vec<f64> {
        self.incumbent_trajectory().into_iter().map(|l| self.regret(l)).collect()
    }

    /// Writes the `iteration,incumbent_loss,regret` table.
    pub fn write_results_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iteration", "incumbent_loss", "regret"])
            .map_err(csv_err)?;
        for (i, best) in self.incumbent_trajectory().into_iter().enumerate() {
            w.write_record([
                (i + 1).to_string(),
                best.to_string(),
                self.regret(best).to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_events_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn snapshot(&self, model: Option<Arc<SurrogateModel>>, space: &ConfigSpace) -> Snapshot {
        Snapshot {
            objective: self.objective.clone(),
            seed: self.seed,
            budget: self.budget,
            known_min: self.known_min,
            status: self.status,
            iteration: self.iteration,
            trials: self.trials.clone(),
            incumbent: self.incumbent.clone(),
            regret: self.incumbent.as_ref().map(|i| self.regret(i.loss)),
            active_priors: self.active_priors.clone(),
            priors: self.priors.clone(),
            event_count: self.events.len() as u64,
            model,
            incumbent_encoded: self
                .incumbent
                .as_ref()
                .and_then(|i| space.encode(&i.config).ok()),
        }
    }
}

pub(crate) fn csv_err(e: csv::Error) -> crate::error::Error {
    crate::error::Error::Io(std::io::Error::other(e))
}

/// Immutable view of a run between iterations, with the surrogate fitted on
/// exactly `trials`.
#[derive(Debug, Clone, Serialize)]
pub struct Snapshot {
    pub objective: String,
    pub seed: u64,
    pub budget: usize,
    pub known_min: f64,
    pub status: RunStatus,
    pub iteration: usize,
    pub trials: Vec<Trial>,
    pub incumbent: Option<Incumbent>,
    pub regret: Option<f64>,
    pub active_priors: Vec<ActivePrior>,
    pub priors: Vec<PriorRecord>,
    pub event_count: u64,
    #[serde(skip)]
    pub model: Option<Arc<SurrogateModel>>,
    #[serde(skip)]
    pub incumbent_encoded: Option<EncodedVector>,
}

impl Snapshot {
    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("snapshot serializes")
    }
}
