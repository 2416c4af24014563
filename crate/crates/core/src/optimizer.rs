//! Acquisition maximization: a random candidate pool, partly drawn from the
//! active priors, followed by hill climbing from the best pool points.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::acquisition::{AcquisitionContext, ActivePrior, BaseAcquisition};
use crate::error::Result;
use crate::prior::CompiledPrior;
use crate::space::{ConfigSpace, EncodedVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerSettings {
    pub pool_size: usize,
    pub local_starts: usize,
    /// Rate of the exponential decay of a prior's pool share with age.
    pub allocation_decay: f64,
    /// Upper bound on the pool fraction drawn from priors.
    pub prior_fraction_cap: f64,
    /// Initial numeric step, as a fraction of the dimension's range.
    pub step_scale: f64,
    /// Step halvings tried before a numeric move counts as failed.
    pub step_levels: usize,
    /// Maximum improving sweeps per local-search walk.
    pub neighbor_steps: usize,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            pool_size: 5000,
            local_starts: 10,
            allocation_decay: 0.126,
            prior_fraction_cap: 0.9,
            step_scale: 0.2,
            step_levels: 8,
            neighbor_steps: 50,
        }
    }
}

/// How the candidate pool is split between priors and uniform sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePlan {
    pub pool_size: usize,
    /// Prior id and number of candidates drawn from it, in activation order.
    pub per_prior_counts: Vec<(String, usize)>,
    pub uniform_count: usize,
    pub local_starts: usize,
    pub neighbor_steps: usize,
}

impl CandidatePlan {
    pub fn prior_total(&self) -> usize {
        self.per_prior_counts.iter().map(|(_, c)| c).sum()
    }
}

/// Pool fractions for priors of the given ages: `exp(-decay * age)` each,
/// rescaled to sum to `cap` when their total exceeds it.
pub fn allocation_fractions(ages: &[usize], decay: f64, cap: f64) -> Vec<f64> {
    let weights: Vec<f64> = ages.iter().map(|&a| (-decay * a as f64).exp()).collect();
    let total: f64 = weights.iter().sum();
    if total <= cap {
        weights
    } else {
        weights.iter().map(|w| cap * w / total).collect()
    }
}

/// Rounds fractions of `pool` to counts whose sum stays within `cap * pool`.
fn round_counts(fractions: &[f64], pool: usize, cap: f64) -> Vec<usize> {
    let exact: Vec<f64> = fractions.iter().map(|f| f * pool as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|x| x.round() as usize).collect();
    let limit = (cap * pool as f64).floor() as usize;
    while counts.iter().sum::<usize>() > limit {
        let worst = (0..counts.len())
            .filter(|&i| counts[i] > 0)
            .max_by(|&a, &b| {
                (counts[a] as f64 - exact[a]).total_cmp(&(counts[b] as f64 - exact[b]))
            })
            .expect("positive count");
        counts[worst] -= 1;
    }
    counts
}

/// Splits the pool between priors of age at least 1 and uniform sampling.
pub fn allocate_candidates(
    active: &[ActivePrior],
    iteration: usize,
    settings: &OptimizerSettings,
) -> CandidatePlan {
    let live: Vec<&ActivePrior> = active.iter().filter(|p| p.age(iteration) >= 1).collect();
    let ages: Vec<usize> = live.iter().map(|p| p.age(iteration)).collect();
    let fractions = allocation_fractions(&ages, settings.allocation_decay, settings.prior_fraction_cap);
    let counts = round_counts(&fractions, settings.pool_size, settings.prior_fraction_cap);
    let per_prior_counts: Vec<(String, usize)> =
        live.iter().zip(counts).map(|(p, c)| (p.id.clone(), c)).collect();
    let prior_total: usize = per_prior_counts.iter().map(|(_, c)| c).sum();
    CandidatePlan {
        pool_size: settings.pool_size,
        per_prior_counts,
        uniform_count: settings.pool_size - prior_total,
        local_starts: settings.local_starts,
        neighbor_steps: settings.neighbor_steps,
    }
}

/// Outcome of one acquisition maximization.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub coords: EncodedVector,
    pub acquisition: f64,
    /// Acquisition was zero over the whole pool; the most uncertain point was
    /// returned instead.
    pub fallback: bool,
    pub plan: CandidatePlan,
}

struct Scored {
    coords: Vec<f64>,
    alpha: f64,
}

fn hill_climb<R: Rng + ?Sized>(
    start: &Scored,
    ctx: &AcquisitionContext<'_>,
    space: &ConfigSpace,
    settings: &OptimizerSettings,
    rng: &mut R,
) -> Scored {
    let mut x = start.coords.clone();
    let mut best = start.alpha;
    for _ in 0..settings.neighbor_steps {
        let mut improved = false;
        for i in 0..space.dim() {
            if !space.is_active_encoded(&x, i) {
                continue;
            }
            let param = &space.params()[i];
            if param.is_numeric() {
                let unit = space.to_unit(i, x[i]);
                let mut scale = settings.step_scale;
                for _ in 0..settings.step_levels {
                    let z: f64 = rng.sample(StandardNormal);
                    let value = space.legalize(i, space.from_unit(i, (unit + scale * z).clamp(0.0, 1.0)));
                    if value != x[i] {
                        let mut y = x.clone();
                        y[i] = value;
                        let a = ctx.score(&y).0;
                        if a > best {
                            best = a;
                            x = y;
                            improved = true;
                            break;
                        }
                    }
                    scale *= 0.5;
                }
            } else {
                let current = x[i];
                let mut choice: Option<(Vec<f64>, f64)> = None;
                for c in 0..param.categories().len() {
                    if c as f64 == current {
                        continue;
                    }
                    let mut y = x.clone();
                    space.set_coord(&mut y, i, c as f64, rng);
                    let a = ctx.score(&y).0;
                    if a > choice.as_ref().map_or(best, |(_, s)| *s) {
                        choice = Some((y, a));
                    }
                }
                if let Some((y, a)) = choice {
                    x = y;
                    best = a;
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    Scored { coords: x, alpha: best }
}

/// Maximizes the prior-weighted acquisition over `space`.
pub fn propose_next<R: Rng + ?Sized>(
    ctx: &AcquisitionContext<'_>,
    active: &[ActivePrior],
    settings: &OptimizerSettings,
    rng: &mut R,
) -> Result<Proposal> {
    let space = ctx.space;
    let plan = allocate_candidates(active, ctx.iteration, settings);
    let mut pool: Vec<Vec<f64>> = Vec::with_capacity(plan.pool_size);
    for (id, count) in &plan.per_prior_counts {
        let prior = active.iter().find(|p| &p.id == id).expect("planned prior is active");
        let compiled: CompiledPrior = prior.prior.compile(space)?;
        pool.extend((0..*count).map(|_| compiled.sample_encoded(space, rng).0));
    }
    pool.extend((0..plan.uniform_count).map(|_| space.sample_uniform_encoded(rng).0));

    let scores: Vec<(f64, f64)> = pool.iter().map(|c| ctx.score(c)).collect();
    let mut best_idx = 0;
    for (i, s) in scores.iter().enumerate() {
        if s.0 > scores[best_idx].0 {
            best_idx = i;
        }
    }
    if ctx.params.base == BaseAcquisition::Ei && !(scores[best_idx].0 > 0.0) {
        let mut widest = 0;
        for (i, s) in scores.iter().enumerate() {
            if s.1 > scores[widest].1 {
                widest = i;
            }
        }
        return Ok(Proposal {
            coords: EncodedVector(pool.swap_remove(widest)),
            acquisition: scores[widest].0,
            fallback: true,
            plan,
        });
    }

    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.sort_by(|&a, &b| scores[b].0.total_cmp(&scores[a].0).then(a.cmp(&b)));
    let mut best = Scored {
        coords: pool[best_idx].clone(),
        alpha: scores[best_idx].0,
    };
    for &i in order.iter().take(plan.local_starts) {
        let start = Scored {
            coords: pool[i].clone(),
            alpha: scores[i].0,
        };
        let end = hill_climb(&start, ctx, space, settings, rng);
        if end.alpha > best.alpha {
            best = end;
        }
    }
    Ok(Proposal {
        coords: EncodedVector(best.coords),
        acquisition: best.alpha,
        fallback: false,
        plan,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquisition::AcquisitionParams;
    use crate::prior::Prior;
    use crate::rng::{stream, Purpose};
    use crate::space::{Configuration, HyperparameterDef};
    use crate::surrogate::{fit, SurrogateSettings};
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn prior_at(id: &str, arrival: usize) -> ActivePrior {
        ActivePrior {
            id: id.into(),
            prior: Prior::new(
                id,
                Configuration::new().with_number("x", 0.5),
                BTreeMap::from([("x".into(), 0.1)]),
            ),
            arrival_iteration: arrival,
            decay_power: None,
        }
    }

    #[test]
    fn empty_allocation_is_uniform() {
        let plan = allocate_candidates(&[], 10, &OptimizerSettings::default());
        assert_eq!(plan.uniform_count, 5000);
        assert!(plan.per_prior_counts.is_empty());
    }

    #[test]
    fn single_prior_allocation() {
        let plan = allocate_candidates(&[prior_at("a", 9)], 10, &OptimizerSettings::default());
        // round(5000 * exp(-0.126)) = round(4408.07)
        assert_eq!(plan.per_prior_counts, vec![("a".to_string(), 4408)]);
        assert_eq!(plan.uniform_count, 592);
    }

    #[test]
    fn two_prior_allocation_hits_cap() {
        let fr = allocation_fractions(&[1, 10], 0.126, 0.9);
        assert!((fr[0] + fr[1] - 0.9).abs() < 1e-12);
        let plan = allocate_candidates(
            &[prior_at("old", 0), prior_at("new", 9)],
            10,
            &OptimizerSettings::default(),
        );
        assert_eq!(plan.prior_total() + plan.uniform_count, 5000);
        assert!(plan.prior_total() <= 4500);
        assert_eq!(plan.per_prior_counts[0].1, 1095);
    }

    #[test]
    fn age_zero_priors_get_no_candidates() {
        let plan = allocate_candidates(&[prior_at("a", 10)], 10, &OptimizerSettings::default());
        assert!(plan.per_prior_counts.is_empty());
    }

    proptest! {
        #[test]
        fn allocation_respects_cap(ages in proptest::collection::vec(1usize..40, 0..12), pool in 1usize..6000) {
            let fr = allocation_fractions(&ages, 0.126, 0.9);
            prop_assert!(fr.iter().sum::<f64>() <= 0.9 + 1e-12);
            let counts = round_counts(&fr, pool, 0.9);
            let total: usize = counts.iter().sum();
            prop_assert!(total as f64 <= 0.9 * pool as f64);
        }
    }

    fn quadratic_model() -> (ConfigSpace, crate::surrogate::SurrogateModel, f64) {
        let space = ConfigSpace::new(vec![HyperparameterDef::float("x", 0.0, 1.0)]).unwrap();
        let xs = [0.0, 0.2, 0.45, 0.7, 0.9, 1.0];
        let obs: Vec<(EncodedVector, f64)> =
            xs.iter().map(|&x| (EncodedVector(vec![x]), (x - 0.6f64).powi(2))).collect();
        let best = obs.iter().map(|o| o.1).fold(f64::INFINITY, f64::min);
        let model = fit(&obs, &space, &SurrogateSettings::default(), &mut stream(0, Purpose::SurrogateFit, 0)).unwrap();
        (space, model, best)
    }

    fn params() -> AcquisitionParams {
        AcquisitionParams::new(10.0, 1.0, 2.0)
    }

    #[test]
    fn proposal_beats_every_pool_point() {
        let (space, model, best) = quadratic_model();
        let ctx = AcquisitionContext::new(&model, &space, best, 6, params(), &[]).unwrap();
        let settings = OptimizerSettings {
            pool_size: 500,
            ..Default::default()
        };
        let p = propose_next(&ctx, &[], &settings, &mut stream(1, Purpose::Proposal, 0)).unwrap();
        let mut rng = stream(1, Purpose::Proposal, 0);
        for _ in 0..500 {
            let v = space.sample_uniform_encoded(&mut rng);
            assert!(ctx.ei(&p.coords) >= ctx.ei(&v));
        }
        assert!(!p.fallback);
    }

    #[test]
    fn proposals_are_deterministic() {
        let (space, model, best) = quadratic_model();
        let active = [prior_at("a", 2)];
        let ctx = AcquisitionContext::new(&model, &space, best, 6, params(), &active).unwrap();
        let settings = OptimizerSettings::default();
        let a = propose_next(&ctx, &active, &settings, &mut stream(4, Purpose::Proposal, 6)).unwrap();
        let b = propose_next(&ctx, &active, &settings, &mut stream(4, Purpose::Proposal, 6)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sharp_prior_pulls_proposals_to_its_center() {
        let (space, model, best) = quadratic_model();
        let sd = 0.02;
        let center = 0.3;
        let active = [ActivePrior {
            id: "p".into(),
            prior: Prior::new(
                "p",
                Configuration::new().with_number("x", center),
                BTreeMap::from([("x".into(), sd)]),
            ),
            arrival_iteration: 5,
            decay_power: None,
        }];
        let ctx = AcquisitionContext::new(
            &model,
            &space,
            best,
            6,
            AcquisitionParams {
                beta: 100.0,
                ..params()
            },
            &active,
        )
        .unwrap();
        let settings = OptimizerSettings {
            pool_size: 1000,
            ..Default::default()
        };
        let hits = (0..50)
            .filter(|&seed| {
                let p = propose_next(&ctx, &active, &settings, &mut stream(seed, Purpose::Proposal, 0)).unwrap();
                (p.coords[0] - center).abs() <= 2.0 * sd
            })
            .count();
        assert!(hits >= 45, "{hits}/50");
    }

    #[test]
    fn flat_acquisition_falls_back_to_variance() {
        let space = ConfigSpace::new(vec![HyperparameterDef::float("x", 0.0, 1.0)]).unwrap();
        let obs = vec![(EncodedVector(vec![0.1]), 5.0), (EncodedVector(vec![0.9]), 5.0)];
        let model = fit(&obs, &space, &SurrogateSettings::default(), &mut stream(0, Purpose::SurrogateFit, 0)).unwrap();
        let ctx = AcquisitionContext::new(&model, &space, -1e6, 2, params(), &[]).unwrap();
        let settings = OptimizerSettings {
            pool_size: 200,
            ..Default::default()
        };
        let p = propose_next(&ctx, &[], &settings, &mut stream(0, Purpose::Proposal, 0)).unwrap();
        assert!(p.fallback);
    }
}
