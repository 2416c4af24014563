//! Live runs: one engine thread each, an append-only event log that stream
//! clients replay and follow, and the latest snapshot for gating and queries.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use dynabo_core::engine::{
    self, intake_channel, ChannelSource, Event, EventKind, Intake, IntakeSender, PriorMode, RunConfig, RunObserver,
    RunState, RunStatus, Snapshot, Sources,
};
use dynabo_core::gate::{assess_prior, GateVerdict};
use dynabo_core::objectives::Objective;
use dynabo_core::prior::Prior;
use dynabo_core::rng::{stream, Purpose};
use dynabo_core::space::ConfigSpace;
use dynabo_core::surrogate::{self, SurrogateModel};
use dynabo_core::synthesis::scripted_source;
use serde::Serialize;
use tokio::sync::watch;
use uuid::Uuid;

/// Capacity of each run's prior queue.
const QUEUE_CAPACITY: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub enum ApiError {
    BadRequest(String),
    NotFound(String),
    Conflict(String),
    Unavailable(String),
}

#[derive(Debug, Clone, Copy)]
struct ApiPrior {
    verdict: GateVerdict,
    overridden: bool,
}

#[derive(Default)]
struct Submissions {
    count: u64,
    priors: BTreeMap<String, ApiPrior>,
}

pub struct Run {
    pub id: Uuid,
    pub config: RunConfig,
    objective: Arc<dyn Objective>,
    snapshot: RwLock<Arc<Snapshot>>,
    events: RwLock<Vec<Event>>,
    /// Bumped on every appended event and when the worker exits.
    tick: watch::Sender<u64>,
    closed: RwLock<Option<Result<(), String>>>,
    intake: IntakeSender,
    submissions: Mutex<Submissions>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub run_id: Uuid,
    pub status: RunStatus,
    pub objective: String,
    pub iteration: usize,
    pub budget: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SlicePoint {
    pub value: serde_json::Value,
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Slice {
    pub dim: String,
    pub iteration: usize,
    pub incumbent: serde_json::Value,
    pub points: Vec<SlicePoint>,
}

struct Relay(Arc<Run>);

impl RunObserver for Relay {
    fn on_event(&mut self, event: &Event) {
        self.0.events.write().unwrap().push(event.clone());
        self.0.tick.send_modify(|t| *t += 1);
    }

    fn on_snapshot(&mut self, snapshot: Arc<Snapshot>) {
        let mut slot = self.0.snapshot.write().unwrap();
        // the closing snapshot drops the model; keep the last one for slices
        if snapshot.model.is_none() && snapshot.status == RunStatus::Finished {
            let mut last = (*snapshot).clone();
            last.model = slot.model.clone();
            *slot = Arc::new(last);
        } else {
            *slot = snapshot;
        }
    }
}

impl Run {
    /// Validates `config` and starts its engine on a dedicated thread.
    pub fn start(config: RunConfig, data_dir: PathBuf) -> Result<Arc<Run>, ApiError> {
        let (run, rx) = Run::prepare(config)?;
        let worker = run.clone();
        std::thread::Builder::new()
            .name(format!("run-{}", run.id))
            .spawn(move || worker.work(rx, &data_dir))
            .map_err(|e| ApiError::Unavailable(e.to_string()))?;
        Ok(run)
    }

    fn prepare(config: RunConfig) -> Result<(Arc<Run>, ChannelSource), ApiError> {
        let objective = config.validate().map_err(|e| ApiError::BadRequest(e.to_string()))?;
        if !matches!(config.prior_mode, PriorMode::Interactive | PriorMode::Scheduled) {
            return Err(ApiError::BadRequest(
                "prior_mode must be `interactive` or `scheduled` for served runs".into(),
            ));
        }
        let idle = RunState::new(objective.id(), config.seed, config.budget, objective.known_min());
        let (tx, rx) = intake_channel(QUEUE_CAPACITY);
        let run = Arc::new(Run {
            id: Uuid::new_v4(),
            snapshot: RwLock::new(Arc::new(idle.snapshot(None, objective.space()))),
            config,
            objective,
            events: RwLock::new(Vec::new()),
            tick: watch::channel(0).0,
            closed: RwLock::new(None),
            intake: tx,
            submissions: Mutex::new(Submissions::default()),
        });
        Ok((run, rx))
    }

    fn work(self: Arc<Self>, rx: ChannelSource, data_dir: &Path) {
        let outcome = (|| {
            let mut sources = Sources(vec![Box::new(rx)]);
            if let Some(s) = scripted_source(&self.config, self.objective.as_ref(), data_dir)? {
                sources.0.push(Box::new(s));
            }
            engine::run(&self.config, self.objective.as_ref(), &mut sources, &mut Relay(self.clone()))
        })();
        *self.closed.write().unwrap() = Some(outcome.map(|_| ()).map_err(|e| e.to_string()));
        self.tick.send_modify(|t| *t += 1);
    }

    pub fn space(&self) -> &ConfigSpace {
        self.objective.space()
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot.read().unwrap().clone()
    }

    pub fn error(&self) -> Option<String> {
        self.closed.read().unwrap().clone().and_then(|r| r.err())
    }

    pub fn is_closed(&self) -> bool {
        self.closed.read().unwrap().is_some()
    }

    pub fn status(&self) -> RunStatus {
        if self.error().is_some() {
            RunStatus::Failed
        } else {
            self.snapshot().status
        }
    }

    pub fn summary(&self) -> RunSummary {
        let snap = self.snapshot();
        RunSummary {
            run_id: self.id,
            status: self.status(),
            objective: snap.objective.clone(),
            iteration: snap.iteration,
            budget: snap.budget,
            error: self.error(),
        }
    }

    /// Events from position `from` on.
    pub fn events_from(&self, from: usize) -> Vec<Event> {
        let events = self.events.read().unwrap();
        events.get(from..).map(<[Event]>::to_vec).unwrap_or_default()
    }

    pub fn subscribe(&self) -> watch::Receiver<u64> {
        self.tick.subscribe()
    }

    fn ensure_live(&self) -> Result<(), ApiError> {
        match self.status() {
            RunStatus::Finished | RunStatus::Failed => Err(ApiError::Conflict(format!("run {} has ended", self.id))),
            _ if self.is_closed() => Err(ApiError::Conflict(format!("run {} has ended", self.id))),
            _ => Ok(()),
        }
    }

    fn queue(&self, intake: Intake) -> Result<(), ApiError> {
        self.intake.push(intake).map_err(|_| {
            if self.is_closed() {
                ApiError::Conflict(format!("run {} has ended", self.id))
            } else {
                ApiError::Unavailable("prior queue is full; retry shortly".into())
            }
        })
    }

    /// Gates `prior` against the latest snapshot and hands the decision to
    /// the engine, which records it at its next iteration boundary. Blocks for
    /// the length of one assessment.
    pub fn submit_prior(&self, prior: Prior) -> Result<(String, GateVerdict), ApiError> {
        let space = self.objective.space();
        prior.compile(space).map_err(|e| ApiError::BadRequest(e.to_string()))?;
        let mut subs = self.submissions.lock().unwrap();
        self.ensure_live()?;
        let snap = self.snapshot();
        let k = subs.count;
        let model = self.model_for(&snap, k)?;
        let incumbent = snap
            .incumbent_encoded
            .as_ref()
            .ok_or_else(|| ApiError::Conflict("run has no observations yet".into()))?;
        let verdict = assess_prior(
            &prior,
            &model,
            space,
            Some(&incumbent.0),
            self.config.kappa,
            self.config.tau,
            self.config.gate_samples,
            &mut stream(self.config.seed, Purpose::Service, 2 * k),
        )
        .map_err(|e| ApiError::BadRequest(e.to_string()))?;
        let id = format!("u{}", k + 1);
        self.queue(Intake::Decided {
            id: id.clone(),
            prior,
            verdict,
        })?;
        subs.count += 1;
        subs.priors.insert(
            id.clone(),
            ApiPrior {
                verdict,
                overridden: false,
            },
        );
        Ok((id, verdict))
    }

    /// The snapshot's surrogate, or one fitted on its trials while the
    /// initial design is still running.
    fn model_for(&self, snap: &Snapshot, k: u64) -> Result<Arc<SurrogateModel>, ApiError> {
        if let Some(m) = &snap.model {
            return Ok(m.clone());
        }
        if snap.trials.len() < 2 {
            return Err(ApiError::Conflict(
                "the surrogate needs at least two observations before priors can be assessed".into(),
            ));
        }
        let observations: Vec<_> = snap.trials.iter().map(|t| (t.config.clone(), t.loss)).collect();
        surrogate::fit_configs(
            &observations,
            self.objective.space(),
            &self.config.surrogate_settings(),
            &mut stream(self.config.seed, Purpose::Service, 2 * k + 1),
        )
        .map(Arc::new)
        .map_err(|e| ApiError::Conflict(e.to_string()))
    }

    /// Activates a rejected prior at the next iteration boundary.
    pub fn override_prior(&self, pid: &str) -> Result<GateVerdict, ApiError> {
        let mut subs = self.submissions.lock().unwrap();
        let snap = self.snapshot();
        let known = match subs.priors.get(pid) {
            Some(p) => *p,
            None => snap
                .priors
                .iter()
                .find(|r| r.id == pid)
                .map(|r| ApiPrior {
                    verdict: r.verdict,
                    overridden: r.verdict.overridden,
                })
                .ok_or_else(|| ApiError::NotFound(format!("unknown prior `{pid}`")))?,
        };
        self.ensure_live()?;
        let verdict = match known.verdict.override_rejection() {
            Some(v) if !known.overridden => v,
            _ => return Err(ApiError::Conflict(format!("prior `{pid}` is already accepted"))),
        };
        self.queue(Intake::Override { id: pid.to_string() })?;
        subs.priors.insert(
            pid.to_string(),
            ApiPrior {
                verdict,
                overridden: true,
            },
        );
        Ok(verdict)
    }

    /// Surrogate mean and variance along `dim` through the incumbent.
    pub fn slice(&self, dim: &str, points: usize) -> Result<Slice, ApiError> {
        let space = self.objective.space();
        let i = space
            .index_of(dim)
            .ok_or_else(|| ApiError::BadRequest(format!("unknown hyperparameter `{dim}`")))?;
        let snap = self.snapshot();
        let (Some(model), Some(base)) = (&snap.model, &snap.incumbent_encoded) else {
            return Err(ApiError::Conflict("no surrogate has been fitted yet".into()));
        };
        if !space.is_active_encoded(&base.0, i) {
            return Err(ApiError::BadRequest(format!("`{dim}` is inactive at the incumbent")));
        }
        let param = &space.params()[i];
        let values: Vec<f64> = if param.is_numeric() {
            let n = points.clamp(2, 1000);
            let mut v: Vec<f64> = (0..n).map(|j| space.from_unit(i, j as f64 / (n - 1) as f64)).collect();
            v.dedup();
            v
        } else {
            (0..param.categories().len()).map(|c| c as f64).collect()
        };
        let label = |v: f64| -> serde_json::Value {
            if param.is_numeric() {
                serde_json::json!(v)
            } else {
                serde_json::json!(param.categories()[v as usize])
            }
        };
        let mut rng = stream(self.config.seed, Purpose::Service, u64::MAX);
        let points = values
            .into_iter()
            .map(|v| {
                let mut coords = base.0.clone();
                space.set_coord(&mut coords, i, v, &mut rng);
                let p = model.predict_encoded(&coords);
                SlicePoint {
                    value: label(v),
                    mean: p.mean,
                    variance: p.variance,
                }
            })
            .collect();
        Ok(Slice {
            dim: dim.to_string(),
            iteration: snap.iteration,
            incumbent: label(base.0[i]),
            points,
        })
    }
}

/// Names an event kind the way the event log does.
pub fn kind_name(kind: EventKind) -> String {
    serde_json::to_value(kind)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}
