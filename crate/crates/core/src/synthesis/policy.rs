use std::path::Path;
use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use super::cluster::{cluster_corpus, ClusterCorpus};
use super::corpus::{load_or_generate, CorpusOptions};
use super::Policy;
use crate::engine::{
    random_prior_schedule, Handling, Intake, PollView, PriorMode, PriorSource, RunConfig, Submission,
};
use crate::error::{Error, Result};
use crate::objectives::Objective;
use crate::prior::{build_synthetic_prior, Prior};
use crate::rng::{stream, Purpose};
use crate::space::{gower_distance, ConfigSpace, Configuration};

const LOCAL_NEIGHBORS: usize = 10;
const ADVERSARIAL_POOL: usize = 5;

/// A prior drawn from a clustered corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    pub policy: Policy,
    pub prior: Prior,
    pub cluster: usize,
    pub center_loss: f64,
    pub note: Option<String>,
}

fn weighted_pick<R: Rng + ?Sized>(n: usize, rate: f64, rng: &mut R) -> usize {
    let w: Vec<f64> = (0..n).map(|i| (rate * i as f64).exp()).collect();
    WeightedIndex::new(&w).expect("positive weights").sample(rng)
}

/// Draws the `k`-th (1-based) prior of `policy` given the current incumbent.
pub fn draw_prior<R: Rng + ?Sized>(
    corpus: &ClusterCorpus,
    space: &ConfigSpace,
    policy: Policy,
    incumbent: (&Configuration, f64),
    k: usize,
    rng: &mut R,
) -> Result<Draw> {
    let clusters = &corpus.clusters;
    if clusters.is_empty() {
        return Err(Error::Corpus("no clusters".into()));
    }
    let mut note = None;
    let (cluster, member) = match policy {
        Policy::Expert | Policy::Advanced => {
            let eligible = clusters.iter().take_while(|c| c.median_loss <= incumbent.1).count();
            let c = if eligible == 0 {
                note = Some(format!("no cluster beats the incumbent loss {}; using the best cluster", incumbent.1));
                0
            } else {
                let rate = if policy == Policy::Expert { 0.1 } else { 0.15 };
                weighted_pick(eligible, rate, rng)
            };
            let members = &clusters[c].members;
            let m = if policy == Policy::Expert {
                (0..members.len())
                    .min_by(|&a, &b| members[a].loss.total_cmp(&members[b].loss))
                    .expect("non-empty cluster")
            } else {
                rng.random_range(0..members.len())
            };
            (c, m)
        }
        Policy::Local => {
            let mut by_distance = clusters
                .iter()
                .enumerate()
                .map(|(i, c)| Ok((gower_distance(&c.centroid, incumbent.0, space)?, i)))
                .collect::<Result<Vec<_>>>()?;
            by_distance.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let c = by_distance
                .iter()
                .take(LOCAL_NEIGHBORS)
                .map(|&(_, i)| i)
                .min()
                .expect("non-empty");
            (c, rng.random_range(0..clusters[c].members.len()))
        }
        Policy::Adversarial => {
            let pool = ADVERSARIAL_POOL.min(clusters.len());
            let c = clusters.len() - pool + rng.random_range(0..pool);
            let members = &clusters[c].members;
            let m = (0..members.len())
                .max_by(|&a, &b| members[a].loss.total_cmp(&members[b].loss))
                .expect("non-empty cluster");
            (c, m)
        }
    };
    let entry = &clusters[cluster].members[member];
    let mut prior = build_synthetic_prior(&entry.config, space, k)?;
    prior.label = format!("{policy}-{k}");
    Ok(Draw {
        policy,
        prior,
        cluster,
        center_loss: entry.loss,
        note,
    })
}

/// When scripted priors arrive.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicyPlan {
    /// `(trials completed, policy)` pairs.
    Scheduled(Vec<(usize, Policy)>),
    /// Arrivals drawn with [`random_prior_schedule`] once the initial design is done.
    Random { rate: f64, policy: Policy },
}

/// Submits scripted priors to a run. The k-th prior draws from the
/// `(seed, PolicyDraw, k - 1)` stream.
pub struct PolicySource {
    corpus: Arc<ClusterCorpus>,
    seed: u64,
    pending: Option<Vec<(usize, Policy)>>,
    plan: PolicyPlan,
    handling: Handling,
    issued: usize,
    pub draws: Vec<Draw>,
}

impl PolicySource {
    pub fn new(corpus: Arc<ClusterCorpus>, seed: u64, plan: PolicyPlan) -> Self {
        Self {
            corpus,
            seed,
            pending: None,
            plan,
            handling: Handling::Gate,
            issued: 0,
            draws: Vec::new(),
        }
    }

    pub fn with_handling(mut self, handling: Handling) -> Self {
        self.handling = handling;
        self
    }
}

impl PriorSource for PolicySource {
    fn poll(&mut self, view: &PollView<'_>) -> Result<Vec<Intake>> {
        let pending = self.pending.get_or_insert_with(|| match &self.plan {
            PolicyPlan::Scheduled(entries) => entries.clone(),
            PolicyPlan::Random { rate, policy } => {
                let mut rng = stream(self.seed, Purpose::PriorTiming, 0);
                random_prior_schedule(&mut rng, view.budget, view.n_init, *rate)
                    .into_iter()
                    .map(|t| (t, *policy))
                    .collect()
            }
        });
        let due = pending.iter().take_while(|(t, _)| *t <= view.iteration).count();
        let due: Vec<Policy> = pending.drain(..due).map(|(_, p)| p).collect();
        let Some(incumbent) = view.incumbent else {
            return Ok(Vec::new());
        };
        let mut out = Vec::new();
        for policy in due {
            let mut rng = stream(self.seed, Purpose::PolicyDraw, self.issued as u64);
            self.issued += 1;
            let draw = draw_prior(&self.corpus, view.space, policy, incumbent, self.issued, &mut rng)?;
            out.push(Intake::Submit(Submission {
                id: None,
                prior: draw.prior.clone(),
                handling: self.handling,
            }));
            self.draws.push(draw);
        }
        Ok(out)
    }
}

/// The scripted source a run config asks for, clustering (and, on a cache
/// miss, generating) the corpus under `data_dir`. `None` for prior modes
/// without scripted priors.
pub fn scripted_source(cfg: &RunConfig, objective: &dyn Objective, data_dir: &Path) -> Result<Option<PolicySource>> {
    let plan = match cfg.prior_mode {
        PriorMode::Scheduled => PolicyPlan::Scheduled(cfg.schedule.iter().map(|e| (e.iteration, e.policy)).collect()),
        PriorMode::RandomTiming => PolicyPlan::Random {
            rate: cfg.random_timing.rate,
            policy: cfg.random_timing.policy,
        },
        PriorMode::None | PriorMode::Interactive => return Ok(None),
    };
    let options = CorpusOptions {
        seeds: cfg.corpus.seeds,
        iters: cfg.corpus.iters,
        ..CorpusOptions::default()
    };
    let (corpus, _) = load_or_generate(data_dir, objective, &options)?;
    let clustered = cluster_corpus(&corpus, objective.space(), cfg.corpus.clusters)?;
    Ok(Some(PolicySource::new(Arc::new(clustered), cfg.seed, plan)))
}
