//! Probabilistic surrogate models: predictive mean and variance of the loss.
//!
//! Two backends share one interface: a Gaussian process ([`gp`]) and a
//! random forest ([`forest`]). Models are refit from scratch on every call to
//! [`fit`] and are immutable afterwards. Losses enter untransformed.

pub mod forest;
pub mod gp;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{ConfigSpace, Configuration, EncodedVector};

pub use forest::{ForestSettings, ForestSurrogate};
pub use gp::{GpHyperparameters, GpSettings, GpSurrogate};

/// Predictive distribution of the loss at one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosteriorPrediction {
    pub mean: f64,
    pub variance: f64,
}

impl PosteriorPrediction {
    pub fn std_dev(&self) -> f64 {
        self.variance.max(0.0).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurrogateKind {
    #[default]
    Gp,
    Rf,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SurrogateSettings {
    pub kind: SurrogateKind,
    pub gp: GpSettings,
    pub forest: ForestSettings,
}

impl SurrogateSettings {
    pub fn of_kind(kind: SurrogateKind) -> Self {
        Self {
            kind,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone)]
pub enum SurrogateModel {
    Gp(GpSurrogate),
    Forest(ForestSurrogate),
}

impl SurrogateModel {
    pub fn predict_encoded(&self, coords: &[f64]) -> PosteriorPrediction {
        match self {
            SurrogateModel::Gp(gp) => gp.predict(coords),
            SurrogateModel::Forest(rf) => rf.predict(coords),
        }
    }

    pub fn predict(&self, config: &Configuration, space: &ConfigSpace) -> Result<PosteriorPrediction> {
        Ok(self.predict_encoded(&space.encode(config)?))
    }

    /// Non-fatal fit issues worth surfacing to the caller.
    pub fn warnings(&self) -> Vec<String> {
        match self {
            SurrogateModel::Gp(gp) if gp.is_degenerate() => {
                vec!["all training inputs identical; GP fell back to a noise-only model".into()]
            }
            _ => Vec::new(),
        }
    }
}

/// Fits a surrogate to encoded observations.
pub fn fit<R: Rng + ?Sized>(
    observations: &[(EncodedVector, f64)],
    space: &ConfigSpace,
    settings: &SurrogateSettings,
    rng: &mut R,
) -> Result<SurrogateModel> {
    if observations.len() < 2 {
        return Err(Error::Surrogate(format!(
            "need at least 2 observations, got {}",
            observations.len()
        )));
    }
    if let Some((_, y)) = observations.iter().find(|(_, y)| !y.is_finite()) {
        return Err(Error::Surrogate(format!("non-finite loss {y}")));
    }
    let xs: Vec<Vec<f64>> = observations.iter().map(|(x, _)| x.0.clone()).collect();
    let ys: Vec<f64> = observations.iter().map(|(_, y)| *y).collect();
    Ok(match settings.kind {
        SurrogateKind::Gp => SurrogateModel::Gp(GpSurrogate::fit(&xs, &ys, space, &settings.gp, rng)?),
        SurrogateKind::Rf => {
            SurrogateModel::Forest(ForestSurrogate::fit(&xs, &ys, space, &settings.forest, rng))
        }
    })
}

/// Fits a surrogate to configuration–loss pairs.
pub fn fit_configs<R: Rng + ?Sized>(
    observations: &[(Configuration, f64)],
    space: &ConfigSpace,
    settings: &SurrogateSettings,
    rng: &mut R,
) -> Result<SurrogateModel> {
    let encoded = observations
        .iter()
        .map(|(c, y)| Ok((space.encode(c)?, *y)))
        .collect::<Result<Vec<_>>>()?;
    fit(&encoded, space, settings, rng)
}
