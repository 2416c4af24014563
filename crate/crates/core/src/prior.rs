//! User beliefs about the optimum's location.
//!
//! A [`Prior`] centers a max-normalized Gaussian kernel on each numeric
//! dimension (log domain for log-scaled dims) and puts full weight on the
//! center category of each categorical dimension, `categorical_off_mass` on
//! the others. Densities are products of per-dimension factors, so the center
//! always scores exactly 1 and the codomain is `[1e-12, 1]` after clipping.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{ConfigSpace, Configuration, Domain, EncodedVector, INACTIVE};

/// Floor applied to prior densities.
pub const DENSITY_FLOOR: f64 = 1e-12;

/// Probability of keeping the center category when sampling from a prior.
pub const CENTER_CATEGORY_PROB: f64 = 0.9;

const MAX_REJECTION_ATTEMPTS: usize = 100;

fn default_off_mass() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prior {
    #[serde(default = "default_label")]
    pub label: String,
    pub center: Configuration,
    /// Per numeric hyperparameter; log domain for log-scaled dims.
    #[serde(default)]
    pub stds: BTreeMap<String, f64>,
    #[serde(default = "default_off_mass")]
    pub categorical_off_mass: f64,
}

fn default_label() -> String {
    "user".into()
}

/// Per-dimension belief, resolved against a space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DimBelief {
    /// Numeric dim: mean and std in the prior's domain (log for log dims).
    Normal { mean: f64, std: f64, log: bool },
    /// Categorical dim: index of the center category.
    Mode(usize),
    /// Dimension inactive at the center; contributes no factor.
    Absent,
}

/// A prior validated against and indexed by a space.
#[derive(Debug, Clone)]
pub struct CompiledPrior {
    pub beliefs: Vec<DimBelief>,
    pub center: EncodedVector,
    pub categorical_off_mass: f64,
}

impl Prior {
    pub fn new(label: &str, center: Configuration, stds: BTreeMap<String, f64>) -> Self {
        Self {
            label: label.to_string(),
            center,
            stds,
            categorical_off_mass: default_off_mass(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Checks the prior against `space` and resolves per-dimension beliefs.
    pub fn compile(&self, space: &ConfigSpace) -> Result<CompiledPrior> {
        let bad = |msg: String| Err(Error::InvalidPrior(msg));
        if !(self.categorical_off_mass > 0.0 && self.categorical_off_mass < 1.0) {
            return bad(format!(
                "categorical_off_mass {} must lie in (0, 1)",
                self.categorical_off_mass
            ));
        }
        let center = space
            .encode(&self.center)
            .map_err(|e| Error::InvalidPrior(format!("center: {e}")))?;
        for (name, std) in &self.stds {
            match space.param(name) {
                None => return bad(format!("std for undeclared hyperparameter `{name}`")),
                Some(p) if !p.is_numeric() => {
                    return bad(format!("std given for categorical `{name}`"))
                }
                Some(_) if !(std.is_finite() && *std > 0.0) => {
                    return bad(format!("std for `{name}` must be positive, got {std}"))
                }
                _ => {}
            }
        }
        let mut beliefs = Vec::with_capacity(space.dim());
        for (i, p) in space.params().iter().enumerate() {
            let active = space.is_active_encoded(&center, i);
            let belief = match (&p.domain, active) {
                (_, false) => DimBelief::Absent,
                (Domain::Numeric { log_scale, .. }, true) => {
                    let Some(&std) = self.stds.get(&p.name) else {
                        return bad(format!("active numeric `{}` has no std", p.name));
                    };
                    let mean = if *log_scale { center[i].ln() } else { center[i] };
                    DimBelief::Normal {
                        mean,
                        std,
                        log: *log_scale,
                    }
                }
                (Domain::Categorical { .. }, true) => DimBelief::Mode(center[i] as usize),
            };
            beliefs.push(belief);
        }
        Ok(CompiledPrior {
            beliefs,
            center,
            categorical_off_mass: self.categorical_off_mass,
        })
    }

    /// Density at `config`, in `[1e-12, 1]`.
    pub fn density(&self, config: &Configuration, space: &ConfigSpace) -> Result<f64> {
        let compiled = self.compile(space)?;
        Ok(compiled.density(&space.encode(config)?, space))
    }

    /// Draws `n` configurations around the prior's center.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        space: &ConfigSpace,
        rng: &mut R,
        n: usize,
    ) -> Result<Vec<Configuration>> {
        let compiled = self.compile(space)?;
        Ok((0..n)
            .map(|_| {
                let v = compiled.sample_encoded(space, rng);
                space.decode(&v).expect("prior samples are valid")
            })
            .collect())
    }
}

impl CompiledPrior {
    /// Density at an encoded vector, clipped to `[1e-12, 1]`.
    pub fn density(&self, coords: &[f64], space: &ConfigSpace) -> f64 {
        let mut d = 1.0;
        for (i, belief) in self.beliefs.iter().enumerate() {
            if !space.is_active_encoded(coords, i) {
                continue;
            }
            match *belief {
                DimBelief::Absent => {}
                DimBelief::Normal { mean, std, log } => {
                    let x = if log { coords[i].ln() } else { coords[i] };
                    let z = (x - mean) / std;
                    d *= (-0.5 * z * z).exp();
                }
                DimBelief::Mode(c) => {
                    if coords[i] != c as f64 {
                        d *= self.categorical_off_mass;
                    }
                }
            }
            if d < DENSITY_FLOOR {
                return DENSITY_FLOOR;
            }
        }
        d.clamp(DENSITY_FLOOR, 1.0)
    }

    /// Maps a standardized normal draw `z` to a value of numeric dim `i`
    /// around `mean` (in the prior's domain), clamped and rounded.
    pub fn numeric_value(space: &ConfigSpace, i: usize, mean: f64, std: f64, log: bool, z: f64) -> f64 {
        let x = mean + std * z;
        space.legalize(i, if log { x.exp() } else { x })
    }

    fn truncated_normal<R: Rng + ?Sized>(
        space: &ConfigSpace,
        i: usize,
        mean: f64,
        std: f64,
        log: bool,
        rng: &mut R,
    ) -> f64 {
        let (lower, upper) = space.params()[i].bounds().expect("numeric");
        let (lo, hi) = if log { (lower.ln(), upper.ln()) } else { (lower, upper) };
        let mut x = mean;
        for _ in 0..MAX_REJECTION_ATTEMPTS {
            let z: f64 = rng.sample(StandardNormal);
            x = mean + std * z;
            if x >= lo && x <= hi {
                break;
            }
        }
        space.legalize(i, if log { x.exp() } else { x })
    }

    /// One draw: truncated normal per numeric dim, center category with
    /// probability 0.9 otherwise a uniform other category, then conditional
    /// children re-resolved (uniform when the center has no belief for them).
    pub fn sample_encoded<R: Rng + ?Sized>(&self, space: &ConfigSpace, rng: &mut R) -> EncodedVector {
        let mut coords = vec![INACTIVE; space.dim()];
        for pass in 0..2 {
            for i in 0..space.dim() {
                let conditional = space.is_conditional(i);
                if (pass == 0) == conditional {
                    continue;
                }
                if conditional && !space.is_active_encoded(&coords, i) {
                    continue;
                }
                coords[i] = match self.beliefs[i] {
                    DimBelief::Normal { mean, std, log } => {
                        Self::truncated_normal(space, i, mean, std, log, rng)
                    }
                    DimBelief::Mode(c) => {
                        let k = space.params()[i].categories().len();
                        if k == 1 || rng.random::<f64>() < CENTER_CATEGORY_PROB {
                            c as f64
                        } else {
                            let other = rng.random_range(0..k - 1);
                            (if other >= c { other + 1 } else { other }) as f64
                        }
                    }
                    DimBelief::Absent => space.sample_dim(i, rng),
                };
            }
        }
        EncodedVector(coords)
    }
}

/// Prior whose numeric widths shrink with the prior's index `k` (1-based):
/// `σ = width / (5k)`, log-domain width for log-scaled dims.
pub fn build_synthetic_prior(center: &Configuration, space: &ConfigSpace, k: usize) -> Result<Prior> {
    if k == 0 {
        return Err(Error::InvalidPrior("prior index starts at 1".into()));
    }
    space.validate(center)?;
    let mut stds = BTreeMap::new();
    for (i, p) in space.params().iter().enumerate() {
        if p.is_numeric() && center.is_active(&p.name) {
            let width = space.prior_width(i).expect("numeric");
            stds.insert(p.name.clone(), width / (k as f64 * 5.0));
        }
    }
    Ok(Prior::new(&format!("synthetic-{k}"), center.clone(), stds))
}
