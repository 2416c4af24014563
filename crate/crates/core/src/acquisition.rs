//! Expected improvement, lower confidence bound, and the prior-weighted
//! acquisition that multiplies EI by each active prior's density raised to a
//! fading exponent `beta / age^power`.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::Result;
use crate::prior::{CompiledPrior, Prior, DENSITY_FLOOR};
use crate::space::ConfigSpace;
use crate::surrogate::{PosteriorPrediction, SurrogateModel};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density.
pub fn normal_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Standard normal distribution function.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Closed-form expected improvement below `best` for a Gaussian with the
/// given mean and standard deviation.
pub fn expected_improvement(mean: f64, std_dev: f64, best: f64) -> f64 {
    let gap = best - mean;
    if !(std_dev > 0.0) {
        return gap.max(0.0);
    }
    let z = gap / std_dev;
    (gap * normal_cdf(z) + std_dev * normal_pdf(z)).max(0.0)
}

/// Negated lower confidence bound, so larger is better.
pub fn lower_confidence_bound(mean: f64, std_dev: f64, kappa: f64) -> f64 {
    -(mean - kappa * std_dev)
}

/// Exponent applied to a prior density of the given age; `None` for age 0.
pub fn decay_exponent(beta: f64, age: usize, power: f64) -> Option<f64> {
    (age > 0).then(|| beta / (age as f64).powf(power))
}

/// Weight contributed by one prior density of the given age.
pub fn decay_weight(density: f64, beta: f64, age: usize, power: f64) -> f64 {
    match decay_exponent(beta, age, power) {
        Some(e) => density.clamp(DENSITY_FLOOR, 1.0).powf(e),
        None => 1.0,
    }
}

/// A prior that passed the gate (or was overridden), with the iteration at
/// which it arrived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivePrior {
    pub id: String,
    pub prior: Prior,
    pub arrival_iteration: usize,
    /// Per-prior override of the context's decay power.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay_power: Option<f64>,
}

impl ActivePrior {
    pub fn age(&self, iteration: usize) -> usize {
        iteration.saturating_sub(self.arrival_iteration)
    }
}

/// Acquisition maximized when proposing configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseAcquisition {
    #[default]
    Ei,
    Lcb,
}

/// Tunables shared by every acquisition evaluation in a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionParams {
    pub beta: f64,
    pub kappa: f64,
    pub decay_power: f64,
    #[serde(default)]
    pub base: BaseAcquisition,
}

impl AcquisitionParams {
    pub fn new(beta: f64, kappa: f64, decay_power: f64) -> Self {
        Self {
            beta,
            kappa,
            decay_power,
            base: BaseAcquisition::Ei,
        }
    }
}

#[derive(Debug, Clone)]
struct WeightedPrior {
    compiled: CompiledPrior,
    exponent: f64,
}

/// Everything needed to score configurations at one iteration.
#[derive(Debug, Clone)]
pub struct AcquisitionContext<'a> {
    pub model: &'a SurrogateModel,
    pub space: &'a ConfigSpace,
    pub incumbent_loss: f64,
    pub iteration: usize,
    pub params: AcquisitionParams,
    weighted: Vec<WeightedPrior>,
}

impl<'a> AcquisitionContext<'a> {
    /// Priors of age 0 are ignored until the next iteration.
    pub fn new(
        model: &'a SurrogateModel,
        space: &'a ConfigSpace,
        incumbent_loss: f64,
        iteration: usize,
        params: AcquisitionParams,
        active: &[ActivePrior],
    ) -> Result<Self> {
        let mut weighted = Vec::new();
        for ap in active {
            let power = ap.decay_power.unwrap_or(params.decay_power);
            if let Some(exponent) = decay_exponent(params.beta, ap.age(iteration), power) {
                weighted.push(WeightedPrior {
                    compiled: ap.prior.compile(space)?,
                    exponent,
                });
            }
        }
        Ok(Self {
            model,
            space,
            incumbent_loss,
            iteration,
            params,
            weighted,
        })
    }

    /// Number of priors that currently shape the acquisition.
    pub fn weighted_prior_count(&self) -> usize {
        self.weighted.len()
    }

    pub fn predict(&self, coords: &[f64]) -> PosteriorPrediction {
        self.model.predict_encoded(coords)
    }

    pub fn ei(&self, coords: &[f64]) -> f64 {
        let p = self.predict(coords);
        expected_improvement(p.mean, p.std_dev(), self.incumbent_loss)
    }

    pub fn lcb(&self, coords: &[f64]) -> f64 {
        let p = self.predict(coords);
        lower_confidence_bound(p.mean, p.std_dev(), self.params.kappa)
    }

    /// Product of clipped prior densities raised to their fading exponents.
    pub fn dyna_weight(&self, coords: &[f64]) -> f64 {
        self.weighted
            .iter()
            .map(|w| w.compiled.density(coords, self.space).powf(w.exponent))
            .product()
    }

    pub fn alpha_dyna(&self, coords: &[f64]) -> f64 {
        let ei = self.ei(coords);
        if self.weighted.is_empty() {
            ei
        } else {
            ei * self.dyna_weight(coords)
        }
    }

    /// Base acquisition (weighted by the priors) and predictive variance.
    pub fn score(&self, coords: &[f64]) -> (f64, f64) {
        let p = self.predict(coords);
        let base = match self.params.base {
            BaseAcquisition::Ei => expected_improvement(p.mean, p.std_dev(), self.incumbent_loss),
            BaseAcquisition::Lcb => lower_confidence_bound(p.mean, p.std_dev(), self.params.kappa),
        };
        let alpha = if self.weighted.is_empty() {
            base
        } else {
            base * self.dyna_weight(coords)
        };
        (alpha, p.variance)
    }
}
