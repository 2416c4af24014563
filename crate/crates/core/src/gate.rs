//! Prior rejection: compares the mean LCB of configurations drawn around the
//! prior's center with that of configurations drawn around the incumbent.
//!
//! Both regions reuse the same standardized draws (with antithetic pairs), so
//! a prior centered on the incumbent with matching widths has margin exactly 0.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::acquisition::lower_confidence_bound;
use crate::error::{Error, Result};
use crate::prior::{CompiledPrior, DimBelief, Prior, CENTER_CATEGORY_PROB};
use crate::space::{ConfigSpace, INACTIVE};
use crate::surrogate::SurrogateModel;

pub const DEFAULT_TAU: f64 = -0.15;
pub const DEFAULT_GATE_SAMPLES: usize = 500;

/// Serde for reals that may be infinite: non-finite values travel as the
/// strings `"inf"` and `"-inf"`.
pub mod extended_float {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else if *v < 0.0 {
            s.serialize_str("-inf")
        } else {
            s.serialize_str("nan")
        }
    }

    pub fn parse(text: &str) -> Option<f64> {
        match text.trim().to_ascii_lowercase().as_str() {
            "inf" | "+inf" | "infinity" | "+infinity" => Some(f64::INFINITY),
            "-inf" | "-infinity" => Some(f64::NEG_INFINITY),
            other => other.parse().ok(),
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Number(v) => Ok(v),
            Repr::Text(t) => parse(&t).ok_or_else(|| de::Error::custom(format!("not a number: {t}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateVerdict {
    pub accepted: bool,
    pub prior_mean_lcb: f64,
    pub incumbent_mean_lcb: f64,
    pub margin: f64,
    #[serde(with = "extended_float")]
    pub tau: f64,
    pub sample_count: usize,
    pub overridden: bool,
}

impl GateVerdict {
    /// Accepts a rejected prior on the user's authority. Returns `None` when
    /// the verdict was already an acceptance.
    pub fn override_rejection(&self) -> Option<GateVerdict> {
        (!self.accepted).then(|| GateVerdict {
            accepted: true,
            overridden: true,
            ..*self
        })
    }

    /// The verdict the same evidence would give under another threshold.
    pub fn with_tau(&self, tau: f64) -> GateVerdict {
        GateVerdict {
            accepted: self.margin >= tau,
            tau,
            ..*self
        }
    }
}

struct Draw {
    z: Vec<f64>,
    u: Vec<f64>,
}

/// One configuration around `center`, using the prior's widths where it has
/// them and the shared uniform draw elsewhere.
fn region_sample(space: &ConfigSpace, prior: &CompiledPrior, center: &[f64], draw: &Draw, sign: f64) -> Vec<f64> {
    let mut coords = vec![INACTIVE; space.dim()];
    for pass in 0..2 {
        for i in 0..space.dim() {
            let conditional = space.is_conditional(i);
            if (pass == 0) == conditional || (conditional && !space.is_active_encoded(&coords, i)) {
                continue;
            }
            let center_active = space.is_active_encoded(center, i);
            let param = &space.params()[i];
            let (u, z) = (draw.u[i], sign * draw.z[i]);
            coords[i] = if param.is_numeric() {
                match prior.beliefs[i] {
                    DimBelief::Normal { std, log, .. } if center_active => {
                        let mean = if log { center[i].ln() } else { center[i] };
                        CompiledPrior::numeric_value(space, i, mean, std, log, z)
                    }
                    _ => space.from_unit(i, u),
                }
            } else {
                let k = param.categories().len();
                if !center_active {
                    ((u * k as f64) as usize).min(k - 1) as f64
                } else {
                    let c = center[i] as usize;
                    if k == 1 || u < CENTER_CATEGORY_PROB {
                        c as f64
                    } else {
                        let t = (u - CENTER_CATEGORY_PROB) / (1.0 - CENTER_CATEGORY_PROB);
                        let other = ((t * (k - 1) as f64) as usize).min(k - 2);
                        (if other >= c { other + 1 } else { other }) as f64
                    }
                }
            };
        }
    }
    coords
}

/// Gates `prior` against the incumbent region of `model`.
#[allow(clippy::too_many_arguments)]
pub fn assess_prior<R: Rng + ?Sized>(
    prior: &Prior,
    model: &SurrogateModel,
    space: &ConfigSpace,
    incumbent: Option<&[f64]>,
    kappa: f64,
    tau: f64,
    samples: usize,
    rng: &mut R,
) -> Result<GateVerdict> {
    let incumbent = incumbent.ok_or(Error::NoIncumbent)?;
    let compiled = prior.compile(space)?;
    let samples = samples.max(1);
    let dim = space.dim();
    let mut prior_total = 0.0;
    let mut inc_total = 0.0;
    let mut k = 0;
    while k < samples {
        let draw = Draw {
            z: (0..dim).map(|_| rng.sample(StandardNormal)).collect(),
            u: (0..dim).map(|_| rng.random()).collect(),
        };
        for sign in [1.0, -1.0] {
            if k == samples {
                break;
            }
            let lcb = |c: &[f64]| {
                let p = model.predict_encoded(c);
                lower_confidence_bound(p.mean, p.std_dev(), kappa)
            };
            prior_total += lcb(&region_sample(space, &compiled, &compiled.center, &draw, sign));
            inc_total += lcb(&region_sample(space, &compiled, incumbent, &draw, sign));
            k += 1;
        }
    }
    let prior_mean_lcb = prior_total / samples as f64;
    let incumbent_mean_lcb = inc_total / samples as f64;
    let margin = prior_mean_lcb - incumbent_mean_lcb;
    Ok(GateVerdict {
        accepted: margin >= tau,
        prior_mean_lcb,
        incumbent_mean_lcb,
        margin,
        tau,
        sample_count: samples,
        overridden: false,
    })
}
