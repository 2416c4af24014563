use crossbeam_channel::{Receiver, Sender, TrySendError};

use crate::gate::GateVerdict;
use crate::prior::Prior;
use crate::space::{ConfigSpace, Configuration};

/// How the engine treats a submitted prior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Handling {
    /// Assess with the rejection gate at the run's threshold.
    Gate,
    /// Activate unconditionally, optionally with its own decay power and an
    /// earlier arrival iteration from which its age is counted.
    Force {
        decay_power: Option<f64>,
        aged_from: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Submission {
    /// Assigned by the engine when absent.
    pub id: Option<String>,
    pub prior: Prior,
    pub handling: Handling,
}

impl Submission {
    pub fn gated(prior: Prior) -> Self {
        Self {
            id: None,
            prior,
            handling: Handling::Gate,
        }
    }
}

/// Messages a prior source hands to the engine at an iteration boundary.
#[derive(Debug, Clone, PartialEq)]
pub enum Intake {
    Submit(Submission),
    /// Assessed elsewhere against a snapshot; the engine records and applies it.
    Decided { id: String, prior: Prior, verdict: GateVerdict },
    /// Activate a previously rejected prior.
    Override { id: String },
}

/// What a source may inspect when asked for priors.
pub struct PollView<'a> {
    /// Trials completed.
    pub iteration: usize,
    pub n_init: usize,
    pub budget: usize,
    pub space: &'a ConfigSpace,
    pub incumbent: Option<(&'a Configuration, f64)>,
}

pub trait PriorSource {
    /// Called once per iteration boundary after the initial design.
    fn poll(&mut self, view: &PollView<'_>) -> crate::Result<Vec<Intake>>;
}

/// A source that never submits anything.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoPriors;

impl PriorSource for NoPriors {
    fn poll(&mut self, _: &PollView<'_>) -> crate::Result<Vec<Intake>> {
        Ok(Vec::new())
    }
}

/// Fixed submissions keyed by the iteration at which they are handed over.
#[derive(Debug, Default, Clone)]
pub struct FixedSource {
    pending: Vec<(usize, Submission)>,
}

impl FixedSource {
    pub fn new(mut pending: Vec<(usize, Submission)>) -> Self {
        pending.sort_by_key(|(t, _)| *t);
        Self { pending }
    }
}

impl PriorSource for FixedSource {
    fn poll(&mut self, view: &PollView<'_>) -> crate::Result<Vec<Intake>> {
        let due = self.pending.iter().take_while(|(t, _)| *t <= view.iteration).count();
        Ok(self
            .pending
            .drain(..due)
            .map(|(_, s)| Intake::Submit(s))
            .collect())
    }
}

/// Bounded queue feeding an engine from another thread.
#[derive(Debug, Clone)]
pub struct IntakeSender(Sender<Intake>);

impl IntakeSender {
    /// Fails when the queue is full or the run is gone.
    pub fn push(&self, intake: Intake) -> Result<(), Intake> {
        self.0.try_send(intake).map_err(|e| match e {
            TrySendError::Full(i) | TrySendError::Disconnected(i) => i,
        })
    }
}

#[derive(Debug)]
pub struct ChannelSource {
    rx: Receiver<Intake>,
}

pub fn intake_channel(capacity: usize) -> (IntakeSender, ChannelSource) {
    let (tx, rx) = crossbeam_channel::bounded(capacity);
    (IntakeSender(tx), ChannelSource { rx })
}

impl PriorSource for ChannelSource {
    fn poll(&mut self, _: &PollView<'_>) -> crate::Result<Vec<Intake>> {
        Ok(self.rx.try_iter().collect())
    }
}

/// Polls several sources in order and concatenates their intake.
#[derive(Default)]
pub struct Sources(pub Vec<Box<dyn PriorSource + Send>>);

impl PriorSource for Sources {
    fn poll(&mut self, view: &PollView<'_>) -> crate::Result<Vec<Intake>> {
        let mut out = Vec::new();
        for s in &mut self.0 {
            out.extend(s.poll(view)?);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn prior() -> Prior {
        Prior::new("t", Configuration::new().with_number("x", 0.5), BTreeMap::from([("x".into(), 0.1)]))
    }

    fn view(space: &ConfigSpace, t: usize) -> PollView<'_> {
        PollView {
            iteration: t,
            n_init: 5,
            budget: 20,
            space,
            incumbent: None,
        }
    }

    #[test]
    fn fixed_source_releases_due_submissions_once() {
        let space = ConfigSpace::new(vec![crate::space::HyperparameterDef::float("x", 0.0, 1.0)]).unwrap();
        let mut src = FixedSource::new(vec![(8, Submission::gated(prior())), (6, Submission::gated(prior()))]);
        assert_eq!(src.poll(&view(&space, 5)).unwrap().len(), 0);
        assert_eq!(src.poll(&view(&space, 7)).unwrap().len(), 1);
        assert_eq!(src.poll(&view(&space, 9)).unwrap().len(), 1);
        assert_eq!(src.poll(&view(&space, 10)).unwrap().len(), 0);
    }

    #[test]
    fn channel_source_drains_in_order() {
        let space = ConfigSpace::new(vec![crate::space::HyperparameterDef::float("x", 0.0, 1.0)]).unwrap();
        let (tx, mut src) = intake_channel(2);
        tx.push(Intake::Override { id: "a".into() }).unwrap();
        tx.push(Intake::Override { id: "b".into() }).unwrap();
        assert!(tx.push(Intake::Override { id: "c".into() }).is_err());
        let got = src.poll(&view(&space, 5)).unwrap();
        assert_eq!(
            got,
            vec![Intake::Override { id: "a".into() }, Intake::Override { id: "b".into() }]
        );
    }
}
