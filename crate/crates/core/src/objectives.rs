//! Synthetic objectives with known minima.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::space::{ConfigSpace, Configuration, HyperparameterDef};

/// A loss to minimize over a configuration space.
pub trait Objective: Send + Sync {
    fn id(&self) -> &str;
    fn space(&self) -> &ConfigSpace;
    /// Lower bound on the loss, used as the regret reference.
    fn known_min(&self) -> f64;
    fn evaluate(&self, config: &Configuration) -> Result<f64>;

    fn dimension(&self) -> usize {
        self.space().dim()
    }
}

/// Objective given by a function of the encoded vector.
pub struct Synthetic {
    id: String,
    space: ConfigSpace,
    known_min: f64,
    f: fn(&[f64]) -> f64,
}

impl fmt::Debug for Synthetic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Synthetic").field("id", &self.id).finish()
    }
}

impl Synthetic {
    pub fn new(id: &str, space: ConfigSpace, known_min: f64, f: fn(&[f64]) -> f64) -> Self {
        Self {
            id: id.into(),
            space,
            known_min,
            f,
        }
    }

    pub fn evaluate_encoded(&self, coords: &[f64]) -> f64 {
        (self.f)(coords)
    }
}

impl Objective for Synthetic {
    fn id(&self) -> &str {
        &self.id
    }

    fn space(&self) -> &ConfigSpace {
        &self.space
    }

    fn known_min(&self) -> f64 {
        self.known_min
    }

    fn evaluate(&self, config: &Configuration) -> Result<f64> {
        let v = self.space.encode(config)?;
        let y = (self.f)(&v);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(Error::Objective(format!("{} returned {y}", self.id)))
        }
    }
}

pub const BRANIN_MIN: f64 = 0.397_887_357_729_738_16;
pub const HARTMANN6_MIN: f64 = -3.322_368_011_415_515;

pub fn branin_fn(x: &[f64]) -> f64 {
    let (x1, x2) = (x[0], x[1]);
    let b = 5.1 / (4.0 * PI * PI);
    let c = 5.0 / PI;
    let t = 1.0 / (8.0 * PI);
    (x2 - b * x1 * x1 + c * x1 - 6.0).powi(2) + 10.0 * (1.0 - t) * x1.cos() + 10.0
}

const H6_ALPHA: [f64; 4] = [1.0, 1.2, 3.0, 3.2];
const H6_A: [[f64; 6]; 4] = [
    [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
    [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
    [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
    [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
];
const H6_P: [[f64; 6]; 4] = [
    [0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886],
    [0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991],
    [0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650],
    [0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381],
];

pub fn hartmann6_fn(x: &[f64]) -> f64 {
    -(0..4)
        .map(|i| {
            let inner: f64 = (0..6).map(|j| H6_A[i][j] * (x[j] - H6_P[i][j]).powi(2)).sum();
            H6_ALPHA[i] * (-inner).exp()
        })
        .sum::<f64>()
}

pub fn rastrigin_fn(x: &[f64]) -> f64 {
    10.0 * x.len() as f64 + x.iter().map(|v| v * v - 10.0 * (2.0 * PI * v).cos()).sum::<f64>()
}

const OPTIMIZER_OFFSETS: [f64; 3] = [0.5, 0.0, 0.25];
const ACTIVATION_OFFSETS: [f64; 2] = [0.0, 0.3];

/// Coordinates: x, lr, optimizer, activation, momentum (only with sgd).
pub fn mixed_fn(v: &[f64]) -> f64 {
    let x = v[0];
    let lr = v[1];
    let opt = v[2] as usize;
    let act = v[3] as usize;
    let mut y = (x - 0.5).powi(2) + (lr.log10() + 2.0).powi(2) / 4.0;
    y += OPTIMIZER_OFFSETS[opt] + ACTIVATION_OFFSETS[act];
    if opt == 0 {
        y += (v[4] - 0.9).powi(2);
    }
    y
}

pub fn branin() -> Synthetic {
    let space = ConfigSpace::new(vec![
        HyperparameterDef::float("x1", -5.0, 10.0),
        HyperparameterDef::float("x2", 0.0, 15.0),
    ])
    .expect("valid space");
    Synthetic::new("branin", space, BRANIN_MIN, branin_fn)
}

pub fn hartmann6() -> Synthetic {
    let space = ConfigSpace::new((1..=6).map(|i| HyperparameterDef::float(&format!("x{i}"), 0.0, 1.0)).collect())
        .expect("valid space");
    Synthetic::new("hartmann6", space, HARTMANN6_MIN, hartmann6_fn)
}

pub fn rastrigin4() -> Synthetic {
    let space = ConfigSpace::new(
        (1..=4)
            .map(|i| HyperparameterDef::float(&format!("x{i}"), -5.12, 5.12))
            .collect(),
    )
    .expect("valid space");
    Synthetic::new("rastrigin4", space, 0.0, rastrigin_fn)
}

pub fn mixed_synth() -> Synthetic {
    let space = ConfigSpace::new(vec![
        HyperparameterDef::float("x", -2.0, 2.0),
        HyperparameterDef::log_float("lr", 1e-4, 1.0),
        HyperparameterDef::categorical("optimizer", &["sgd", "adam", "rmsprop"]),
        HyperparameterDef::categorical("activation", &["relu", "tanh"]),
        HyperparameterDef::float("momentum", 0.0, 1.0).when("optimizer", "sgd"),
    ])
    .expect("valid space");
    // x = 0.5, lr = 1e-2, adam, relu
    Synthetic::new("mixed_synth", space, 0.0, mixed_fn)
}

pub const BUILTIN_IDS: [&str; 4] = ["branin", "hartmann6", "rastrigin4", "mixed_synth"];

pub fn builtin_objectives() -> Vec<Arc<dyn Objective>> {
    BUILTIN_IDS
        .iter()
        .map(|id| objective_by_id(id).expect("builtin"))
        .collect()
}

pub fn objective_by_id(id: &str) -> Result<Arc<dyn Objective>> {
    Ok(match id {
        "branin" => Arc::new(branin()),
        "hartmann6" => Arc::new(hartmann6()),
        "rastrigin4" => Arc::new(rastrigin4()),
        "mixed_synth" => Arc::new(mixed_synth()),
        other => {
            return Err(Error::UnknownObjective(format!(
                "`{other}` (known: {})",
                BUILTIN_IDS.join(", ")
            )))
        }
    })
}
