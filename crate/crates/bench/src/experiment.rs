use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use dynabo_core::engine::{
    run, FixedSource, Handling, NoPriors, RunConfig, RunState, Submission,
};
use dynabo_core::gate::{extended_float, DEFAULT_TAU};
use dynabo_core::objectives::objective_by_id;
use dynabo_core::rng::{stream, Purpose};
use dynabo_core::synthesis::{
    cluster_corpus, draw_prior, load_or_generate, ClusterCorpus, CorpusOptions, Policy, PolicyPlan,
    PolicySource,
};
use dynabo_core::{Error, Result};

use crate::stats::{mean, stderr, wilcoxon_signed_rank, Alternative, WilcoxonResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Vanilla,
    StaticPrior,
    DynaboAcceptAll,
    DynaboGated,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Vanilla,
        Method::StaticPrior,
        Method::DynaboAcceptAll,
        Method::DynaboGated,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Vanilla => "vanilla",
            Method::StaticPrior => "static_prior",
            Method::DynaboAcceptAll => "dynabo_accept_all",
            Method::DynaboGated => "dynabo_gated",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorTiming {
    /// Trials completed when each prior is submitted.
    Fixed(Vec<usize>),
    Random { rate: f64 },
}

/// Real that may be `"inf"` / `"-inf"` in JSON.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Tau(#[serde(with = "extended_float")] pub f64);

pub fn default_tau_grid() -> Vec<Tau> {
    [f64::NEG_INFINITY, -0.5, -0.25, -0.15, -0.05, 0.0, 0.05, f64::INFINITY]
        .into_iter()
        .map(Tau)
        .collect()
}

fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}
fn default_policy() -> Policy {
    Policy::Expert
}
fn default_seeds() -> usize {
    30
}
fn default_budget() -> usize {
    100
}
fn default_timing() -> PriorTiming {
    PriorTiming::Fixed(vec![25, 45, 65, 85])
}
fn default_tau() -> f64 {
    DEFAULT_TAU
}
fn default_clusters() -> usize {
    100
}

/// One benchmark experiment, read from a JSON spec file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub objective: String,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_policy")]
    pub policy: Policy,
    /// Policies covered by a τ sweep; defaults to `[policy]`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sweep_policies: Vec<Policy>,
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    #[serde(default)]
    pub first_seed: u64,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default = "default_timing")]
    pub timing: PriorTiming,
    #[serde(default = "default_tau", with = "extended_float")]
    pub tau: f64,
    #[serde(default = "default_tau_grid")]
    pub tau_grid: Vec<Tau>,
    #[serde(default)]
    pub corpus: CorpusOptions,
    #[serde(default = "default_clusters")]
    pub clusters: usize,
    /// Base run config fields (surrogate, optimizer, gp, …) applied to every run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<serde_json::Value>,
}

impl ExperimentSpec {
    pub fn new(objective: &str) -> Self {
        serde_json::from_value(serde_json::json!({ "objective": objective })).expect("defaults")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text).map_err(|e| Error::InvalidRunConfig(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidRunConfig(m));
        if self.seeds == 0 {
            return bad("seeds must be at least 1".into());
        }
        if self.methods.is_empty() {
            return bad("methods must not be empty".into());
        }
        self.run_config(Method::DynaboGated, self.first_seed, self.tau)?
            .validate()?;
        if let PriorTiming::Fixed(ts) = &self.timing {
            if ts.is_empty() && self.methods.iter().any(|m| *m != Method::Vanilla) {
                return bad("prior methods need at least one prior iteration".into());
            }
            let n_init = self.base_config(0)?.n_init(objective_by_id(&self.objective)?.dimension());
            if let Some(t) = ts.iter().find(|&&t| t < n_init) {
                return bad(format!("prior iteration {t} precedes the initial design ({n_init})"));
            }
        }
        Ok(())
    }

    pub fn seed_list(&self) -> Vec<u64> {
        (0..self.seeds as u64).map(|i| self.first_seed + i).collect()
    }

    fn base_config(&self, seed: u64) -> Result<RunConfig> {
        let mut value = self.base.clone().unwrap_or_else(|| serde_json::json!({}));
        let obj = value
            .as_object_mut()
            .ok_or_else(|| Error::InvalidRunConfig("base must be a JSON object".into()))?;
        obj.insert("objective".into(), self.objective.clone().into());
        obj.insert("budget".into(), self.budget.into());
        obj.insert("seed".into(), seed.into());
        serde_json::from_value(value).map_err(|e| Error::InvalidRunConfig(format!("base: {e}")))
    }

    /// The run configuration of `method` for one seed.
    pub fn run_config(&self, method: Method, seed: u64, tau: f64) -> Result<RunConfig> {
        let mut cfg = self.base_config(seed)?;
        cfg.tau = match method {
            Method::DynaboAcceptAll => f64::NEG_INFINITY,
            _ => tau,
        };
        Ok(cfg)
    }

    pub fn plan(&self, policy: Policy) -> PolicyPlan {
        match &self.timing {
            PriorTiming::Fixed(ts) => PolicyPlan::Scheduled(ts.iter().map(|&t| (t, policy)).collect()),
            PriorTiming::Random { rate } => PolicyPlan::Random { rate: *rate, policy },
        }
    }
}

/// Loads (or generates and caches under `data_dir`) and clusters the corpus.
pub fn prepare_corpus(spec: &ExperimentSpec, data_dir: &Path) -> Result<Arc<ClusterCorpus>> {
    let objective = objective_by_id(&spec.objective)?;
    let (corpus, _) = load_or_generate(data_dir, objective.as_ref(), &spec.corpus)?;
    Ok(Arc::new(cluster_corpus(&corpus, objective.space(), spec.clusters)?))
}

#[derive(Debug, Clone, Serialize)]
pub struct RunOutcome {
    pub method: Method,
    pub policy: Option<Policy>,
    pub seed: u64,
    #[serde(with = "extended_float")]
    pub tau: f64,
    pub incumbent_losses: Vec<f64>,
    pub regrets: Vec<f64>,
    pub priors_offered: usize,
    pub priors_accepted: usize,
    /// Corpus loss of each drawn prior center.
    pub center_losses: Vec<f64>,
}

impl RunOutcome {
    fn from_state(method: Method, policy: Option<Policy>, tau: f64, state: &RunState, centers: Vec<f64>) -> Self {
        Self {
            method,
            policy,
            seed: state.seed,
            tau,
            incumbent_losses: state.incumbent_trajectory(),
            regrets: state.regret_trajectory(),
            priors_offered: state.priors.len(),
            priors_accepted: state.priors.iter().filter(|p| p.verdict.accepted).count(),
            center_losses: centers,
        }
    }

    pub fn final_regret(&self) -> f64 {
        *self.regrets.last().expect("non-empty run")
    }

    /// Regret after `trial` trials (1-based).
    pub fn regret_at(&self, trial: usize) -> f64 {
        self.regrets[trial.clamp(1, self.regrets.len()) - 1]
    }
}

/// Runs one method for one seed.
pub fn run_method(
    spec: &ExperimentSpec,
    corpus: Option<&Arc<ClusterCorpus>>,
    method: Method,
    policy: Policy,
    seed: u64,
    tau: f64,
) -> Result<RunOutcome> {
    let cfg = spec.run_config(method, seed, tau)?;
    let objective = cfg.validate()?;
    let need_corpus = || corpus.ok_or_else(|| Error::Corpus("prior methods need a corpus".into()));
    match method {
        Method::Vanilla => {
            let state = run(&cfg, objective.as_ref(), &mut NoPriors, &mut ())?;
            Ok(RunOutcome::from_state(method, None, tau, &state, Vec::new()))
        }
        Method::DynaboGated | Method::DynaboAcceptAll => {
            let mut source = PolicySource::new(need_corpus()?.clone(), seed, spec.plan(policy));
            let state = run(&cfg, objective.as_ref(), &mut source, &mut ())?;
            let centers = source.draws.iter().map(|d| d.center_loss).collect();
            Ok(RunOutcome::from_state(method, Some(policy), cfg.tau, &state, centers))
        }
        Method::StaticPrior => {
            let corpus = need_corpus()?;
            let n_init = cfg.n_init(objective.dimension());
            // the prior the dynamic runs receive first, drawn from the same
            // incumbent: every method shares the prior-free prefix
            let first_at = match &spec.timing {
                PriorTiming::Fixed(ts) => ts.first().copied().unwrap_or(n_init),
                PriorTiming::Random { .. } => n_init,
            };
            let mut prefix_cfg = cfg.clone();
            prefix_cfg.budget = first_at.max(n_init + 1);
            let prefix = run(&prefix_cfg, objective.as_ref(), &mut NoPriors, &mut ())?;
            let view_incumbent = prefix
                .trials
                .iter()
                .take(first_at)
                .filter(|t| !t.failed)
                .min_by(|a, b| a.loss.total_cmp(&b.loss))
                .ok_or(Error::NoIncumbent)?;
            let draw = draw_prior(
                corpus,
                objective.space(),
                policy,
                (&view_incumbent.config, view_incumbent.loss),
                1,
                &mut stream(seed, Purpose::PolicyDraw, 0),
            )?;
            let mut source = FixedSource::new(vec![(
                n_init,
                Submission {
                    id: None,
                    prior: draw.prior.clone(),
                    handling: Handling::Force {
                        decay_power: Some(1.0),
                        aged_from: Some(0),
                    },
                },
            )]);
            let state = run(&cfg, objective.as_ref(), &mut source, &mut ())?;
            Ok(RunOutcome::from_state(method, Some(policy), tau, &state, vec![draw.center_loss]))
        }
    }
}

/// Results of an experiment: one outcome per (method, seed).
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentResult {
    pub objective: String,
    pub policy: Policy,
    pub budget: usize,
    pub outcomes: Vec<RunOutcome>,
}

pub fn run_experiment(spec: &ExperimentSpec, data_dir: &Path) -> Result<ExperimentResult> {
    spec.validate()?;
    let corpus = if spec.methods.iter().any(|m| *m != Method::Vanilla) {
        Some(prepare_corpus(spec, data_dir)?)
    } else {
        None
    };
    run_experiment_with(spec, corpus.as_ref())
}

/// Runs every (method, seed) pair in parallel against a prepared corpus.
pub fn run_experiment_with(spec: &ExperimentSpec, corpus: Option<&Arc<ClusterCorpus>>) -> Result<ExperimentResult> {
    let jobs: Vec<(Method, u64)> = spec
        .methods
        .iter()
        .flat_map(|&m| spec.seed_list().into_iter().map(move |s| (m, s)))
        .collect();
    let outcomes = jobs
        .par_iter()
        .map(|&(m, s)| run_method(spec, corpus, m, spec.policy, s, spec.tau))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentResult {
        objective: spec.objective.clone(),
        policy: spec.policy,
        budget: spec.budget,
        outcomes,
    })
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Paired one-sided test that `method` ends with lower regret than `baseline`
/// on the same seeds.
#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub method: Method,
    pub baseline: Method,
    pub mean_final_regret: f64,
    pub baseline_mean_final_regret: f64,
    pub test: WilcoxonResult,
}

impl ExperimentResult {
    pub fn compare(&self, method: Method, baseline: Method) -> Option<Comparison> {
        let a: Vec<f64> = self.by_method(method).iter().map(|o| o.final_regret()).collect();
        let b: Vec<f64> = self.by_method(baseline).iter().map(|o| o.final_regret()).collect();
        if a.is_empty() || a.len() != b.len() {
            return None;
        }
        Some(Comparison {
            method,
            baseline,
            mean_final_regret: mean(&a),
            baseline_mean_final_regret: mean(&b),
            test: wilcoxon_signed_rank(&a, &b, Alternative::Less),
        })
    }

    /// The gated method against every other method present.
    pub fn comparisons(&self) -> Vec<Comparison> {
        Method::ALL
            .into_iter()
            .filter(|&m| m != Method::DynaboGated)
            .filter_map(|m| self.compare(Method::DynaboGated, m))
            .collect()
    }

    pub fn by_method(&self, method: Method) -> Vec<&RunOutcome> {
        let mut v: Vec<&RunOutcome> = self.outcomes.iter().filter(|o| o.method == method).collect();
        v.sort_by_key(|o| o.seed);
        v
    }

    /// Long table `objective,method,policy,seed,iteration,incumbent_loss,regret`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["objective", "method", "policy", "seed", "iteration", "incumbent_loss", "regret"])
            .map_err(csv_err)?;
        for o in &self.outcomes {
            let policy = o.policy.map(|p| p.name()).unwrap_or("none");
            for (i, (l, r)) in o.incumbent_losses.iter().zip(&o.regrets).enumerate() {
                w.write_record([
                    self.objective.as_str(),
                    o.method.name(),
                    policy,
                    &o.seed.to_string(),
                    &(i + 1).to_string(),
                    &l.to_string(),
                    &r.to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Table `method,iteration,mean_regret,stderr_regret,runs`.
    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["method", "iteration", "mean_regret", "stderr_regret", "runs"])
            .map_err(csv_err)?;
        let mut methods: BTreeMap<Method, Vec<&RunOutcome>> = BTreeMap::new();
        for o in &self.outcomes {
            methods.entry(o.method).or_default().push(o);
        }
        for (m, runs) in methods {
            for t in 1..=self.budget {
                let at: Vec<f64> = runs.iter().map(|o| o.regret_at(t)).collect();
                w.write_record([
                    m.name().to_string(),
                    t.to_string(),
                    mean(&at).to_string(),
                    stderr(&at).to_string(),
                    at.len().to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// One row of a τ sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub objective: String,
    pub policy: Policy,
    #[serde(with = "extended_float")]
    pub tau: f64,
    pub seed: u64,
    pub final_regret: f64,
    pub priors_offered: usize,
    pub priors_accepted: usize,
    pub acceptance_rate: f64,
}

/// Gated runs for every τ in the grid, every sweep policy and every seed.
pub fn tau_sweep(spec: &ExperimentSpec, data_dir: &Path) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let corpus = prepare_corpus(spec, data_dir)?;
    tau_sweep_with(spec, &corpus)
}

pub fn tau_sweep_with(spec: &ExperimentSpec, corpus: &Arc<ClusterCorpus>) -> Result<Vec<SweepRow>> {
    let policies = if spec.sweep_policies.is_empty() {
        vec![spec.policy]
    } else {
        spec.sweep_policies.clone()
    };
    let mut jobs = Vec::new();
    for &p in &policies {
        for tau in &spec.tau_grid {
            for s in spec.seed_list() {
                jobs.push((p, tau.0, s));
            }
        }
    }
    jobs.par_iter()
        .map(|&(p, tau, s)| {
            let o = run_method(spec, Some(corpus), Method::DynaboGated, p, s, tau)?;
            Ok(SweepRow {
                objective: spec.objective.clone(),
                policy: p,
                tau,
                seed: s,
                final_regret: o.final_regret(),
                priors_offered: o.priors_offered,
                priors_accepted: o.priors_accepted,
                acceptance_rate: if o.priors_offered == 0 {
                    0.0
                } else {
                    o.priors_accepted as f64 / o.priors_offered as f64
                },
            })
        })
        .collect()
}

/// Table `objective,policy,tau,seed,final_regret,priors_offered,priors_accepted,acceptance_rate`.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    if rows.is_empty() {
        w.write_record([
            "objective",
            "policy",
            "tau",
            "seed",
            "final_regret",
            "priors_offered",
            "priors_accepted",
            "acceptance_rate",
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
