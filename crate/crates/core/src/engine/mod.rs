//! The optimization loop: initial design, surrogate refit, prior intake,
//! proposal and evaluation, with an append-only event log.
//!
//! Random streams per run: the initial design draws from
//! `(seed, InitialDesign, 0)`, the surrogate fit before trial `t + 1` from
//! `(seed, SurrogateFit, t)`, and its proposal from `(seed, Proposal, t)`.
//! Gate assessments use `(seed, Gate, k)` for the k-th assessed prior, so the
//! trial sequence of a run without priors depends on nothing else.

mod config;
mod schedule;
mod source;
mod state;

use std::sync::Arc;
use std::time::Duration;

use serde_json::json;

pub use config::{CorpusSpec, PriorMode, RandomTiming, RunConfig, ScheduleEntry};
pub use schedule::random_prior_schedule;
pub use source::{
    intake_channel, ChannelSource, FixedSource, Handling, Intake, IntakeSender, NoPriors, PollView,
    PriorSource, Sources, Submission,
};
pub use state::{
    Event, EventKind, Incumbent, PriorRecord, RunState, RunStatus, Snapshot, Trial, TrialSource,
};

use crate::acquisition::{AcquisitionContext, ActivePrior};
use crate::design::initial_design;
use crate::error::Result;
use crate::gate::{assess_prior, GateVerdict};
use crate::objectives::Objective;
use crate::optimizer::propose_next;
use crate::prior::Prior;
use crate::rng::{stream, Purpose};
use crate::space::{ConfigSpace, EncodedVector};
use crate::surrogate::{self, SurrogateModel};

/// Receives events and snapshots as a run progresses.
pub trait RunObserver {
    fn on_event(&mut self, _event: &Event) {}
    fn on_snapshot(&mut self, _snapshot: Arc<Snapshot>) {}
}

impl RunObserver for () {}

/// Writes each event as one JSON line and flushes.
pub struct JsonlWriter<W: std::io::Write>(pub W);

impl<W: std::io::Write> RunObserver for JsonlWriter<W> {
    fn on_event(&mut self, event: &Event) {
        if serde_json::to_writer(&mut self.0, event).is_ok() {
            let _ = self.0.write_all(b"\n");
            let _ = self.0.flush();
        }
    }
}

#[derive(Default, Clone, Copy)]
struct Decay {
    power: Option<f64>,
    aged_from: Option<usize>,
}

struct Engine<'a> {
    cfg: &'a RunConfig,
    objective: &'a dyn Objective,
    space: &'a ConfigSpace,
    observer: &'a mut dyn RunObserver,
    state: RunState,
    assessed: u64,
}

impl Engine<'_> {
    fn emit(&mut self, kind: EventKind, payload: serde_json::Value) {
        let event = Event {
            seq: self.state.events.len() as u64,
            kind,
            iteration: self.state.iteration,
            payload,
            wall_time: self
                .cfg
                .wall_clock
                .then(|| chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)),
        };
        self.observer.on_event(&event);
        self.state.events.push(event);
    }

    fn publish(&mut self, model: Option<Arc<SurrogateModel>>) {
        let snap = Arc::new(self.state.snapshot(model, self.space));
        self.observer.on_snapshot(snap);
    }

    fn evaluate(&mut self, coords: EncodedVector, source: TrialSource) -> Result<()> {
        let config = self.space.decode(&coords)?;
        let (loss, failed) = match self.objective.evaluate(&config) {
            Ok(loss) => (loss, false),
            Err(e) => {
                let worst = self
                    .state
                    .trials
                    .iter()
                    .map(|t| t.loss)
                    .fold(f64::NEG_INFINITY, f64::max);
                let penalty = if worst.is_finite() { worst + worst.abs() * 0.1 } else { 1.0 };
                self.emit(
                    EventKind::Warning,
                    json!({"message": format!("{e}; imputing loss {penalty}")}),
                );
                (penalty, true)
            }
        };
        self.state.iteration += 1;
        let iteration = self.state.iteration;
        self.state.trials.push(Trial {
            iteration,
            config: config.clone(),
            loss,
            source,
            failed,
        });
        self.state.encoded.push(coords);
        let improved = !failed && self.state.incumbent.as_ref().is_none_or(|i| loss < i.loss);
        if improved {
            let previous = self.state.incumbent.as_ref().map(|i| i.loss);
            self.state.incumbent = Some(Incumbent {
                config: config.clone(),
                loss,
                iteration,
            });
            self.emit(
                EventKind::IncumbentUpdate,
                json!({"config": config, "loss": loss, "previous_loss": previous}),
            );
        }
        let best = self.state.incumbent.as_ref().map(|i| i.loss);
        let regret = best.map(|b| self.state.regret(b));
        self.emit(
            EventKind::Trial,
            json!({
                "iteration": iteration,
                "config": config,
                "loss": loss,
                "source": source,
                "failed": failed,
                "incumbent_loss": best,
                "regret": regret,
            }),
        );
        Ok(())
    }

    fn next_prior_id(&self) -> String {
        format!("p{}", self.state.priors.len() + 1)
    }

    fn activate(&mut self, id: &str, prior: Prior, decay: Decay, overridden: bool) {
        let arrival = decay.aged_from.unwrap_or(self.state.iteration).min(self.state.iteration);
        self.state.active_priors.push(ActivePrior {
            id: id.to_string(),
            prior,
            arrival_iteration: arrival,
            decay_power: decay.power,
        });
        if let Some(rec) = self.state.priors.iter_mut().find(|r| r.id == id) {
            rec.arrival_iteration = Some(arrival);
        }
        self.emit(
            EventKind::PriorActivated,
            json!({"prior_id": id, "arrival_iteration": arrival, "overridden": overridden}),
        );
    }

    fn record(&mut self, id: String, prior: Prior, verdict: GateVerdict, decay: Decay) {
        self.emit(EventKind::PriorSubmitted, json!({"prior_id": id, "prior": prior}));
        self.emit(EventKind::PriorVerdict, json!({"prior_id": id, "verdict": verdict}));
        self.state.priors.push(PriorRecord {
            id: id.clone(),
            prior: prior.clone(),
            verdict,
            submitted_at: self.state.iteration,
            arrival_iteration: None,
        });
        if verdict.accepted {
            self.activate(&id, prior, decay, verdict.overridden);
        }
    }

    fn intake(&mut self, items: Vec<Intake>, model: &SurrogateModel) -> Result<()> {
        for item in items {
            match item {
                Intake::Submit(sub) => {
                    let id = sub.id.clone().unwrap_or_else(|| self.next_prior_id());
                    if let Err(e) = sub.prior.compile(self.space) {
                        self.emit(EventKind::Warning, json!({"message": format!("prior {id} ignored: {e}")}));
                        continue;
                    }
                    let (tau, decay) = match sub.handling {
                        Handling::Gate => (self.cfg.tau, Decay::default()),
                        Handling::Force { decay_power, aged_from } => (
                            f64::NEG_INFINITY,
                            Decay {
                                power: decay_power,
                                aged_from,
                            },
                        ),
                    };
                    let inc = self.state.incumbent.as_ref().map(|i| self.space.encode(&i.config)).transpose()?;
                    let mut rng = stream(self.cfg.seed, Purpose::Gate, self.assessed);
                    self.assessed += 1;
                    let verdict = assess_prior(
                        &sub.prior,
                        model,
                        self.space,
                        inc.as_deref(),
                        self.cfg.kappa,
                        tau,
                        self.cfg.gate_samples,
                        &mut rng,
                    )?;
                    self.record(id, sub.prior, verdict, decay);
                }
                Intake::Decided { id, prior, verdict } => {
                    if self.state.priors.iter().any(|r| r.id == id) {
                        self.emit(EventKind::Warning, json!({"message": format!("duplicate prior id {id}")}));
                        continue;
                    }
                    self.record(id, prior, verdict, Decay::default());
                }
                Intake::Override { id } => {
                    let Some(rec) = self.state.priors.iter_mut().find(|r| r.id == id) else {
                        self.emit(EventKind::Warning, json!({"message": format!("override of unknown prior {id}")}));
                        continue;
                    };
                    let Some(verdict) = rec.verdict.override_rejection() else {
                        self.emit(
                            EventKind::Warning,
                            json!({"message": format!("prior {id} already accepted; override ignored")}),
                        );
                        continue;
                    };
                    rec.verdict = verdict;
                    let prior = rec.prior.clone();
                    self.emit(EventKind::PriorOverridden, json!({"prior_id": id, "verdict": verdict}));
                    self.activate(&id, prior, Decay::default(), true);
                }
            }
        }
        Ok(())
    }

    fn run(mut self, source: &mut dyn PriorSource) -> Result<RunState> {
        let cfg = self.cfg;
        let space = self.space;
        let n_init = cfg.n_init(space.dim());
        let settings = cfg.surrogate_settings();
        let params = cfg.acquisition_params();
        self.state.status = RunStatus::Running;
        self.publish(None);

        let design = initial_design(space, n_init, &mut stream(cfg.seed, Purpose::InitialDesign, 0));
        for coords in design {
            self.evaluate(coords, TrialSource::Init)?;
            self.publish(None);
            self.pause();
        }

        for t in n_init..cfg.budget {
            let observations: Vec<(EncodedVector, f64)> = self
                .state
                .encoded
                .iter()
                .cloned()
                .zip(self.state.trials.iter().map(|t| t.loss))
                .collect();
            let model = Arc::new(surrogate::fit(
                &observations,
                space,
                &settings,
                &mut stream(cfg.seed, Purpose::SurrogateFit, t as u64),
            )?);
            for w in model.warnings() {
                self.emit(EventKind::Warning, json!({"message": w}));
            }
            self.publish(Some(model.clone()));

            let items = {
                let view = PollView {
                    iteration: t,
                    n_init,
                    budget: cfg.budget,
                    space,
                    incumbent: self.state.incumbent.as_ref().map(|i| (&i.config, i.loss)),
                };
                source.poll(&view)?
            };
            if !items.is_empty() {
                self.intake(items, &model)?;
                self.publish(Some(model.clone()));
            }

            let incumbent_loss = self.state.incumbent.as_ref().map_or(f64::INFINITY, |i| i.loss);
            let ctx = AcquisitionContext::new(&model, space, incumbent_loss, t, params, &self.state.active_priors)?;
            let proposal = propose_next(
                &ctx,
                &self.state.active_priors,
                &cfg.optimizer,
                &mut stream(cfg.seed, Purpose::Proposal, t as u64),
            )?;
            if proposal.fallback {
                self.emit(
                    EventKind::Warning,
                    json!({"message": "acquisition flat over the pool; proposing the most uncertain candidate"}),
                );
            }
            self.evaluate(proposal.coords, TrialSource::Bo)?;
            self.publish(Some(model));
            self.pause();
        }

        self.state.status = RunStatus::Finished;
        let best = self.state.incumbent.as_ref().map(|i| i.loss);
        let regret = best.map(|b| self.state.regret(b));
        self.emit(
            EventKind::Finished,
            json!({"trials": self.state.trials.len(), "incumbent_loss": best, "regret": regret}),
        );
        self.publish(None);
        Ok(self.state)
    }

    fn pause(&self) {
        if self.cfg.iteration_delay_ms > 0 {
            std::thread::sleep(Duration::from_millis(self.cfg.iteration_delay_ms));
        }
    }
}

/// Runs one optimization to completion.
pub fn run(
    cfg: &RunConfig,
    objective: &dyn Objective,
    source: &mut dyn PriorSource,
    observer: &mut dyn RunObserver,
) -> Result<RunState> {
    cfg.validate()?;
    let engine = Engine {
        cfg,
        objective,
        space: objective.space(),
        observer,
        state: RunState::new(objective.id(), cfg.seed, cfg.budget, objective.known_min()),
        assessed: 0,
    };
    engine.run(source)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::branin;
    use crate::space::Configuration;
    use std::collections::BTreeMap;

    fn quick(budget: usize, seed: u64) -> RunConfig {
        let mut cfg = RunConfig::new("branin", budget, seed);
        cfg.optimizer.pool_size = 300;
        cfg.gp.restarts = 2;
        cfg
    }

    #[test]
    fn runs_are_reproducible_and_complete() {
        let obj = branin();
        let a = run(&quick(12, 3), &obj, &mut NoPriors, &mut ()).unwrap();
        let b = run(&quick(12, 3), &obj, &mut NoPriors, &mut ()).unwrap();
        assert_eq!(a.trials, b.trials);
        assert_eq!(a.trials.len(), 12);
        assert_eq!(a.status, RunStatus::Finished);
        let traj = a.incumbent_trajectory();
        assert!(traj.windows(2).all(|w| w[1] <= w[0]));
        let min = a.trials.iter().map(|t| t.loss).fold(f64::INFINITY, f64::min);
        assert_eq!(a.incumbent.unwrap().loss, min);
        assert_eq!(a.events.last().unwrap().kind, EventKind::Finished);
        assert!(a.events.iter().enumerate().all(|(i, e)| e.seq == i as u64));
    }

    fn prior_near_optimum() -> Prior {
        Prior::new(
            "user",
            Configuration::new().with_number("x1", 3.1).with_number("x2", 2.3),
            BTreeMap::from([("x1".into(), 1.0), ("x2".into(), 1.0)]),
        )
    }

    #[test]
    fn every_submission_gets_one_verdict_and_at_most_one_activation() {
        let obj = branin();
        let mut cfg = quick(14, 1);
        cfg.tau = f64::INFINITY;
        let mut src = FixedSource::new(vec![
            (6, Submission::gated(prior_near_optimum())),
            (8, Submission::gated(prior_near_optimum())),
        ]);
        let s = run(&cfg, &obj, &mut src, &mut ()).unwrap();
        let count = |k: EventKind| s.events.iter().filter(|e| e.kind == k).count();
        assert_eq!(count(EventKind::PriorSubmitted), 2);
        assert_eq!(count(EventKind::PriorVerdict), 2);
        assert_eq!(count(EventKind::PriorActivated), 0);
        assert!(s.active_priors.is_empty());

        cfg.tau = f64::NEG_INFINITY;
        let mut src = FixedSource::new(vec![(6, Submission::gated(prior_near_optimum()))]);
        let s = run(&cfg, &obj, &mut src, &mut ()).unwrap();
        assert_eq!(s.active_priors.len(), 1);
        assert_eq!(s.active_priors[0].arrival_iteration, 6);
        let verdict_at = s.events.iter().find(|e| e.kind == EventKind::PriorVerdict).unwrap().iteration;
        assert_eq!(verdict_at, 6);
    }

    #[test]
    fn override_activates_rejected_prior() {
        let obj = branin();
        let mut cfg = quick(12, 2);
        cfg.tau = f64::INFINITY;
        let (tx, mut src) = intake_channel(8);
        tx.push(Intake::Submit(Submission {
            id: Some("mine".into()),
            prior: prior_near_optimum(),
            handling: Handling::Gate,
        }))
        .unwrap();
        tx.push(Intake::Override { id: "mine".into() }).unwrap();
        tx.push(Intake::Override { id: "mine".into() }).unwrap();
        let s = run(&cfg, &obj, &mut src, &mut ()).unwrap();
        let kinds: Vec<EventKind> = s
            .events
            .iter()
            .map(|e| e.kind)
            .filter(|k| !matches!(k, EventKind::Trial | EventKind::IncumbentUpdate))
            .collect();
        assert_eq!(
            kinds,
            vec![
                EventKind::PriorSubmitted,
                EventKind::PriorVerdict,
                EventKind::PriorOverridden,
                EventKind::PriorActivated,
                EventKind::Warning,
                EventKind::Finished
            ]
        );
        assert!(s.priors[0].verdict.overridden);
        assert!(s.priors[0].verdict.accepted);
    }

    #[test]
    fn wall_clock_is_opt_in() {
        let obj = branin();
        let s = run(&quick(7, 0), &obj, &mut NoPriors, &mut ()).unwrap();
        assert!(s.events.iter().all(|e| e.wall_time.is_none()));
        let mut cfg = quick(7, 0);
        cfg.wall_clock = true;
        let s = run(&cfg, &obj, &mut NoPriors, &mut ()).unwrap();
        assert!(s.events.iter().all(|e| e.wall_time.is_some()));
    }
}
