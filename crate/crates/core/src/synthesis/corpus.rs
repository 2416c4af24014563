use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acquisition::BaseAcquisition;
use crate::engine::{run, NoPriors, RunConfig};
use crate::error::{Error, Result};
use crate::objectives::Objective;
use crate::rng::{stream, Purpose};
use crate::space::Configuration;
use crate::surrogate::SurrogateKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub config: Configuration,
    pub loss: f64,
    pub was_incumbent: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusOptions {
    /// Runs per acquisition function.
    pub seeds: usize,
    pub iters: usize,
    pub seed: u64,
    pub pool_size: usize,
}

impl Default for CorpusOptions {
    fn default() -> Self {
        Self {
            seeds: 10,
            iters: 500,
            seed: 0,
            pool_size: 5000,
        }
    }
}

/// Configuration–loss pairs from exploratory runs, sorted by loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub objective: String,
    pub fingerprint: String,
    pub options: CorpusOptions,
    pub entries: Vec<CorpusEntry>,
}

impl Corpus {
    pub fn file_name(objective: &str, fingerprint: &str, o: &CorpusOptions) -> String {
        format!(
            "corpus-{objective}-{}-s{}-i{}-r{}-p{}.json",
            &fingerprint[..12.min(fingerprint.len())],
            o.seeds,
            o.iters,
            o.seed,
            o.pool_size
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, serde_json::to_vec(self)?)?;
        std::fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        serde_json::from_slice(&bytes).map_err(|e| Error::Corpus(format!("{}: {e}", path.display())))
    }
}

/// Runs vanilla optimization with EI and with LCB, `seeds` times each, and
/// keeps every run's incumbents plus as many randomly chosen other trials.
pub fn generate_corpus(objective: &dyn Objective, options: &CorpusOptions) -> Result<Corpus> {
    let jobs: Vec<BaseAcquisition> = (0..options.seeds)
        .flat_map(|_| [BaseAcquisition::Ei, BaseAcquisition::Lcb])
        .collect();
    let per_run = jobs
        .par_iter()
        .enumerate()
        .map(|(job, &acq)| {
            let seed = options.seed.wrapping_mul(1_000_003).wrapping_add(job as u64);
            let mut cfg = RunConfig::new(objective.id(), options.iters, seed);
            cfg.surrogate = SurrogateKind::Rf;
            cfg.acquisition = acq;
            cfg.optimizer.pool_size = options.pool_size;
            let state = run(&cfg, objective, &mut NoPriors, &mut ())?;
            let mut best = f64::INFINITY;
            let mut incumbents = Vec::new();
            let mut others = Vec::new();
            for t in state.trials.iter().filter(|t| !t.failed) {
                let entry = CorpusEntry {
                    config: t.config.clone(),
                    loss: t.loss,
                    was_incumbent: t.loss < best,
                };
                best = best.min(t.loss);
                if entry.was_incumbent {
                    incumbents.push(entry);
                } else {
                    others.push(entry);
                }
            }
            let n = incumbents.len().min(others.len());
            let mut rng = stream(options.seed, Purpose::Corpus, job as u64);
            let mut picked: Vec<usize> = sample(&mut rng, others.len(), n).into_vec();
            picked.sort_unstable();
            incumbents.extend(picked.into_iter().map(|i| others[i].clone()));
            Ok(incumbents)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut entries: Vec<CorpusEntry> = per_run.into_iter().flatten().collect();
    entries.sort_by(|a, b| a.loss.total_cmp(&b.loss));
    Ok(Corpus {
        objective: objective.id().to_string(),
        fingerprint: objective.space().fingerprint(),
        options: *options,
        entries,
    })
}

/// Loads the corpus cached under `dir`, generating and saving it if absent.
pub fn load_or_generate(dir: &Path, objective: &dyn Objective, options: &CorpusOptions) -> Result<(Corpus, PathBuf)> {
    let fingerprint = objective.space().fingerprint();
    let path = dir.join(Corpus::file_name(objective.id(), &fingerprint, options));
    if path.exists() {
        let corpus = Corpus::load(&path)?;
        if corpus.fingerprint == fingerprint && corpus.options == *options {
            return Ok((corpus, path));
        }
    }
    let corpus = generate_corpus(objective, options)?;
    corpus.save(&path)?;
    Ok((corpus, path))
}
