//! Gaussian-process regression with a Matérn-5/2 ARD kernel.
//!
//! Inputs are mapped to features first: numeric dims to the unit interval
//! (log domain for log-scaled dims, `-1` when inactive), categorical dims to
//! one-hot columns that share the dimension's length-scale. Targets are
//! standardized; predictions are returned in loss units.
//!
//! Kernel hyperparameters (length-scales, amplitude, noise) maximize the log
//! marginal likelihood via Nelder–Mead in log space from several starts.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::PosteriorPrediction;
use crate::error::{Error, Result};
use crate::linalg::{cholesky_with_jitter, cholesky_solve, forward_solve};
use crate::space::{ConfigSpace, Domain};

const SQRT5: f64 = 2.236_067_977_499_79;

const LOG_LENGTH_BOUNDS: (f64, f64) = (-4.605_170_185_988_091, 2.995_732_273_553_991); // [0.01, 20]
const LOG_AMPLITUDE_BOUNDS: (f64, f64) = (-2.995_732_273_553_991, 2.995_732_273_553_991); // [0.05, 20]
const LOG_NOISE_BOUNDS: (f64, f64) = (-13.815_510_557_964_274, -0.693_147_180_559_945_3); // [1e-6, 0.5]

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GpSettings {
    /// Number of likelihood-optimization starts.
    pub restarts: usize,
    /// Likelihood evaluations per start.
    pub evals_per_start: usize,
}

impl Default for GpSettings {
    fn default() -> Self {
        Self {
            restarts: 8,
            evals_per_start: 120,
        }
    }
}

/// Kernel hyperparameters in standardized-target units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpHyperparameters {
    /// One length-scale per hyperparameter dimension.
    pub length_scales: Vec<f64>,
    pub amplitude: f64,
    pub noise: f64,
}

/// Maps encoded vectors to GP features.
#[derive(Debug, Clone)]
struct FeatureMap {
    space: ConfigSpace,
    /// Hyperparameter dimension of each feature column.
    column_dims: Vec<usize>,
}

impl FeatureMap {
    fn new(space: &ConfigSpace) -> Self {
        let mut column_dims = Vec::new();
        for (i, p) in space.params().iter().enumerate() {
            match &p.domain {
                Domain::Numeric { .. } => column_dims.push(i),
                Domain::Categorical { categories } => {
                    column_dims.extend(std::iter::repeat(i).take(categories.len()))
                }
            }
        }
        Self {
            space: space.clone(),
            column_dims,
        }
    }

    fn width(&self) -> usize {
        self.column_dims.len()
    }

    fn features(&self, coords: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.width());
        for (i, p) in self.space.params().iter().enumerate() {
            let active = self.space.is_active_encoded(coords, i);
            match &p.domain {
                Domain::Numeric { .. } => out.push(if active {
                    self.space.to_unit(i, coords[i])
                } else {
                    -1.0
                }),
                Domain::Categorical { categories } => {
                    for k in 0..categories.len() {
                        out.push(if active && coords[i] == k as f64 { 1.0 } else { 0.0 });
                    }
                }
            }
        }
        out
    }
}

#[inline]
fn matern52(r2: f64) -> f64 {
    let r = r2.sqrt();
    (1.0 + SQRT5 * r + 5.0 / 3.0 * r2) * (-SQRT5 * r).exp()
}

/// A fitted Gaussian-process surrogate.
#[derive(Debug, Clone)]
pub struct GpSurrogate {
    features: FeatureMap,
    hyper: GpHyperparameters,
    /// Training features divided by the per-column length-scale.
    scaled: Vec<Vec<f64>>,
    inv_scale: Vec<f64>,
    chol: Vec<f64>,
    alpha: Vec<f64>,
    y_mean: f64,
    y_std: f64,
    y_var: f64,
    degenerate: bool,
}

struct Standardized {
    values: Vec<f64>,
    mean: f64,
    std: f64,
    var: f64,
}

fn standardize(ys: &[f64]) -> Standardized {
    let n = ys.len() as f64;
    let mean = ys.iter().sum::<f64>() / n;
    let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n;
    let std = if var > 0.0 { var.sqrt() } else { 1.0 };
    Standardized {
        values: ys.iter().map(|y| (y - mean) / std).collect(),
        mean,
        std,
        var,
    }
}

struct Factorization {
    chol: Vec<f64>,
    alpha: Vec<f64>,
    log_marginal: f64,
}

fn column_inv_scale(map: &FeatureMap, hyper: &GpHyperparameters) -> Vec<f64> {
    map.column_dims
        .iter()
        .map(|&d| 1.0 / hyper.length_scales[d])
        .collect()
}

fn factorize(
    feats: &[Vec<f64>],
    y: &[f64],
    map: &FeatureMap,
    hyper: &GpHyperparameters,
) -> Option<Factorization> {
    let n = feats.len();
    let inv = column_inv_scale(map, hyper);
    let scaled: Vec<Vec<f64>> = feats
        .iter()
        .map(|f| f.iter().zip(&inv).map(|(x, s)| x * s).collect())
        .collect();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        k[i * n + i] = hyper.amplitude + hyper.noise;
        for j in 0..i {
            let r2: f64 = scaled[i]
                .iter()
                .zip(&scaled[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            let v = hyper.amplitude * matern52(r2);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    let (chol, _) = cholesky_with_jitter(&k, n)?;
    let mut alpha = y.to_vec();
    cholesky_solve(&chol, n, &mut alpha);
    let fit: f64 = y.iter().zip(&alpha).map(|(a, b)| a * b).sum();
    let log_det: f64 = (0..n).map(|i| chol[i * n + i].ln()).sum();
    let log_marginal =
        -0.5 * fit - log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
    Some(Factorization {
        chol,
        alpha,
        log_marginal,
    })
}

fn unpack(theta: &[f64], dims: usize) -> GpHyperparameters {
    GpHyperparameters {
        length_scales: theta[..dims].iter().map(|t| t.exp()).collect(),
        amplitude: theta[dims].exp(),
        noise: theta[dims + 1].exp(),
    }
}

fn bounds(dims: usize) -> Vec<(f64, f64)> {
    let mut b = vec![LOG_LENGTH_BOUNDS; dims];
    b.push(LOG_AMPLITUDE_BOUNDS);
    b.push(LOG_NOISE_BOUNDS);
    b
}

fn clamp_to(theta: &mut [f64], bounds: &[(f64, f64)]) {
    for (t, (lo, hi)) in theta.iter_mut().zip(bounds) {
        *t = t.clamp(*lo, *hi);
    }
}

/// Nelder–Mead minimization with box clamping. Returns the best point found.
fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    start: &[f64],
    step: f64,
    bounds: &[(f64, f64)],
    max_evals: usize,
    mut f: F,
) -> (Vec<f64>, f64) {
    let p = start.len();
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(p + 1);
    let mut first = start.to_vec();
    clamp_to(&mut first, bounds);
    simplex.push(first.clone());
    for i in 0..p {
        let mut v = first.clone();
        v[i] += if v[i] + step <= bounds[i].1 { step } else { -step };
        clamp_to(&mut v, bounds);
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    let mut evals = p + 1;
    while evals < max_evals {
        let mut order: Vec<usize> = (0..=p).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        if (values[p] - values[0]).abs() < 1e-7 * (1.0 + values[0].abs()) {
            break;
        }
        let centroid: Vec<f64> = (0..p)
            .map(|j| simplex[..p].iter().map(|v| v[j]).sum::<f64>() / p as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            let mut v: Vec<f64> = centroid
                .iter()
                .zip(&simplex[p])
                .map(|(c, w)| c + t * (w - c))
                .collect();
            clamp_to(&mut v, bounds);
            v
        };
        let reflected = along(-1.0);
        let fr = f(&reflected);
        evals += 1;
        if fr < values[0] {
            let expanded = along(-2.0);
            let fe = f(&expanded);
            evals += 1;
            if fe < fr {
                simplex[p] = expanded;
                values[p] = fe;
            } else {
                simplex[p] = reflected;
                values[p] = fr;
            }
        } else if fr < values[p - 1] {
            simplex[p] = reflected;
            values[p] = fr;
        } else {
            let contracted = if fr < values[p] { along(-0.5) } else { along(0.5) };
            let fc = f(&contracted);
            evals += 1;
            if fc < values[p].min(fr) {
                simplex[p] = contracted;
                values[p] = fc;
            } else {
                for i in 1..=p {
                    let shrunk: Vec<f64> = simplex[0]
                        .iter()
                        .zip(&simplex[i])
                        .map(|(b, v)| b + 0.5 * (v - b))
                        .collect();
                    values[i] = f(&shrunk);
                    simplex[i] = shrunk;
                }
                evals += p;
            }
        }
    }
    let best = (0..=p)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .expect("non-empty simplex");
    (simplex[best].clone(), values[best])
}

impl GpSurrogate {
    /// Fits kernel hyperparameters by maximizing the log marginal likelihood.
    pub fn fit<R: Rng + ?Sized>(
        xs: &[Vec<f64>],
        ys: &[f64],
        space: &ConfigSpace,
        settings: &GpSettings,
        rng: &mut R,
    ) -> Result<Self> {
        let map = FeatureMap::new(space);
        let feats: Vec<Vec<f64>> = xs.iter().map(|x| map.features(x)).collect();
        let st = standardize(ys);
        let dims = space.dim();
        if feats.iter().all(|f| f == &feats[0]) {
            return Ok(Self::degenerate(map, &st));
        }
        let bnds = bounds(dims);
        let mut objective = |theta: &[f64]| -> f64 {
            match factorize(&feats, &st.values, &map, &unpack(theta, dims)) {
                Some(f) if f.log_marginal.is_finite() => -f.log_marginal,
                _ => f64::INFINITY,
            }
        };
        let mut default_start = vec![0.3f64.ln(); dims];
        default_start.push(0.0);
        default_start.push(1e-3f64.ln());
        let mut best: Option<(Vec<f64>, f64)> = None;
        for restart in 0..settings.restarts.max(1) {
            let start = if restart == 0 {
                default_start.clone()
            } else {
                bnds.iter()
                    .map(|(lo, hi)| lo + rng.random::<f64>() * (hi - lo))
                    .collect()
            };
            let (theta, value) =
                nelder_mead(&start, 0.7, &bnds, settings.evals_per_start, &mut objective);
            if best.as_ref().is_none_or(|(_, v)| value < *v) {
                best = Some((theta, value));
            }
        }
        let (theta, value) = best.expect("at least one restart");
        if !value.is_finite() {
            return Err(Error::Surrogate(
                "kernel matrix not positive definite for any hyperparameters".into(),
            ));
        }
        Self::with_features(map, feats, st, unpack(&theta, dims))
    }

    /// Builds a GP with fixed hyperparameters (no likelihood optimization).
    pub fn with_hyperparameters(
        xs: &[Vec<f64>],
        ys: &[f64],
        space: &ConfigSpace,
        hyper: GpHyperparameters,
    ) -> Result<Self> {
        if hyper.length_scales.len() != space.dim() {
            return Err(Error::Surrogate("one length-scale per dimension required".into()));
        }
        let map = FeatureMap::new(space);
        let feats: Vec<Vec<f64>> = xs.iter().map(|x| map.features(x)).collect();
        Self::with_features(map, feats, standardize(ys), hyper)
    }

    fn with_features(
        map: FeatureMap,
        feats: Vec<Vec<f64>>,
        st: Standardized,
        hyper: GpHyperparameters,
    ) -> Result<Self> {
        let fact = factorize(&feats, &st.values, &map, &hyper).ok_or_else(|| {
            Error::Surrogate("kernel matrix not positive definite after jitter".into())
        })?;
        let inv_scale = column_inv_scale(&map, &hyper);
        let scaled = feats
            .iter()
            .map(|f| f.iter().zip(&inv_scale).map(|(x, s)| x * s).collect())
            .collect();
        Ok(Self {
            features: map,
            hyper,
            scaled,
            inv_scale,
            chol: fact.chol,
            alpha: fact.alpha,
            y_mean: st.mean,
            y_std: st.std,
            y_var: st.var,
            degenerate: false,
        })
    }

    fn degenerate(map: FeatureMap, st: &Standardized) -> Self {
        let dims = map.space.dim();
        Self {
            features: map,
            hyper: GpHyperparameters {
                length_scales: vec![1.0; dims],
                amplitude: 1.0,
                noise: 1.0,
            },
            scaled: Vec::new(),
            inv_scale: Vec::new(),
            chol: Vec::new(),
            alpha: Vec::new(),
            y_mean: st.mean,
            y_std: st.std,
            y_var: st.var,
            degenerate: true,
        }
    }

    /// Whether the fit fell back to a noise-only model (identical inputs).
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn hyperparameters(&self) -> &GpHyperparameters {
        &self.hyper
    }

    /// Prior variance of the latent function, in loss² units.
    pub fn prior_variance(&self) -> f64 {
        if self.degenerate {
            self.y_var
        } else {
            self.hyper.amplitude * self.y_std * self.y_std
        }
    }

    /// Observation-noise variance, in loss² units.
    pub fn noise_variance(&self) -> f64 {
        self.hyper.noise * self.y_std * self.y_std
    }

    pub fn predict(&self, coords: &[f64]) -> PosteriorPrediction {
        if self.degenerate {
            return PosteriorPrediction {
                mean: self.y_mean,
                variance: self.y_var,
            };
        }
        let q: Vec<f64> = self
            .features
            .features(coords)
            .iter()
            .zip(&self.inv_scale)
            .map(|(x, s)| x * s)
            .collect();
        let n = self.scaled.len();
        let mut kstar: Vec<f64> = self
            .scaled
            .iter()
            .map(|row| {
                let r2: f64 = row.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum();
                self.hyper.amplitude * matern52(r2)
            })
            .collect();
        let mean: f64 = kstar.iter().zip(&self.alpha).map(|(k, a)| k * a).sum();
        forward_solve(&self.chol, n, &mut kstar);
        let explained: f64 = kstar.iter().map(|v| v * v).sum();
        let var = (self.hyper.amplitude - explained).max(0.0);
        PosteriorPrediction {
            mean: mean * self.y_std + self.y_mean,
            variance: var * self.y_std * self.y_std,
        }
    }
}
