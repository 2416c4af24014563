//! Mixed hyperparameter spaces.
//!
//! A [`ConfigSpace`] holds numeric (float or integer, optionally log-scaled)
//! and categorical hyperparameters. A hyperparameter may be conditional on a
//! single categorical parent taking a given value; conditions are one level
//! deep, so activation is resolved by sampling parents before children.
//!
//! Configurations have two representations:
//!
//! * [`Configuration`], a name-to-value map holding only active values;
//! * [`EncodedVector`], a dense vector in declaration order with raw numeric
//!   values, category indices, and `-1` for inactive dimensions.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::Deref;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Encoding of an inactive dimension.
pub const INACTIVE: f64 = -1.0;

/// Value domain of a single hyperparameter.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Numeric {
        lower: f64,
        upper: f64,
        log_scale: bool,
        integer: bool,
    },
    Categorical {
        categories: Vec<String>,
    },
}

/// Activation condition: the hyperparameter is active only when `parent`
/// takes the category `value`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Condition {
    pub parent: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperparameterDef {
    pub name: String,
    pub domain: Domain,
    pub condition: Option<Condition>,
}

impl HyperparameterDef {
    pub fn float(name: &str, lower: f64, upper: f64) -> Self {
        Self::numeric(name, lower, upper, false, false)
    }

    pub fn log_float(name: &str, lower: f64, upper: f64) -> Self {
        Self::numeric(name, lower, upper, true, false)
    }

    pub fn int(name: &str, lower: i64, upper: i64) -> Self {
        Self::numeric(name, lower as f64, upper as f64, false, true)
    }

    pub fn numeric(name: &str, lower: f64, upper: f64, log_scale: bool, integer: bool) -> Self {
        Self {
            name: name.to_string(),
            domain: Domain::Numeric {
                lower,
                upper,
                log_scale,
                integer,
            },
            condition: None,
        }
    }

    pub fn categorical(name: &str, categories: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            domain: Domain::Categorical {
                categories: categories.iter().map(|c| c.to_string()).collect(),
            },
            condition: None,
        }
    }

    /// Makes this hyperparameter conditional on `parent == value`.
    pub fn when(mut self, parent: &str, value: &str) -> Self {
        self.condition = Some(Condition {
            parent: parent.to_string(),
            value: value.to_string(),
        });
        self
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self.domain, Domain::Numeric { .. })
    }

    /// Bounds of a numeric hyperparameter.
    pub fn bounds(&self) -> Option<(f64, f64)> {
        match self.domain {
            Domain::Numeric { lower, upper, .. } => Some((lower, upper)),
            Domain::Categorical { .. } => None,
        }
    }

    pub fn is_log(&self) -> bool {
        matches!(self.domain, Domain::Numeric { log_scale: true, .. })
    }

    pub fn categories(&self) -> &[String] {
        match &self.domain {
            Domain::Categorical { categories } => categories,
            Domain::Numeric { .. } => &[],
        }
    }
}

/// A single hyperparameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Number(f64),
    Category(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Number(v) => Some(*v),
            ParamValue::Category(_) => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            ParamValue::Number(_) => None,
            ParamValue::Category(c) => Some(c),
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Number(v) => write!(f, "{v}"),
            ParamValue::Category(c) => write!(f, "{c}"),
        }
    }
}

/// A configuration: values of the active hyperparameters, keyed by name.
/// Inactive hyperparameters are absent.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Configuration {
    pub values: BTreeMap<String, ParamValue>,
}

impl Configuration {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, value: ParamValue) -> Self {
        self.values.insert(name.to_string(), value);
        self
    }

    pub fn with_number(self, name: &str, value: f64) -> Self {
        self.with(name, ParamValue::Number(value))
    }

    pub fn with_category(self, name: &str, value: &str) -> Self {
        self.with(name, ParamValue::Category(value.to_string()))
    }

    pub fn get(&self, name: &str) -> Option<&ParamValue> {
        self.values.get(name)
    }

    pub fn number(&self, name: &str) -> Option<f64> {
        self.get(name).and_then(ParamValue::as_f64)
    }

    pub fn category(&self, name: &str) -> Option<&str> {
        self.get(name).and_then(ParamValue::as_str)
    }

    pub fn is_active(&self, name: &str) -> bool {
        self.values.contains_key(name)
    }

    /// Activity of every hyperparameter of `space`.
    pub fn active_mask(&self, space: &ConfigSpace) -> BTreeMap<String, bool> {
        space
            .params()
            .iter()
            .map(|p| (p.name.clone(), self.is_active(&p.name)))
            .collect()
    }
}

/// Dense encoding of a configuration in declaration order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EncodedVector(pub Vec<f64>);

impl Deref for EncodedVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// A validated mixed configuration space.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigSpace {
    params: Vec<HyperparameterDef>,
    index: HashMap<String, usize>,
    /// `(parent index, required category index)` per hyperparameter.
    parents: Vec<Option<(usize, usize)>>,
    children: Vec<Vec<usize>>,
}

impl ConfigSpace {
    pub fn new(params: Vec<HyperparameterDef>) -> Result<Self> {
        let invalid = |msg: String| Err(Error::InvalidSpace(msg));
        if params.is_empty() {
            return invalid("space has no hyperparameters".into());
        }
        let mut index = HashMap::new();
        for (i, p) in params.iter().enumerate() {
            if p.name.is_empty() {
                return invalid(format!("hyperparameter #{i} has an empty name"));
            }
            if index.insert(p.name.clone(), i).is_some() {
                return invalid(format!("duplicate hyperparameter `{}`", p.name));
            }
            match &p.domain {
                Domain::Numeric {
                    lower,
                    upper,
                    log_scale,
                    integer,
                } => {
                    if !(lower.is_finite() && upper.is_finite()) || lower >= upper {
                        return invalid(format!("`{}` needs finite lower < upper", p.name));
                    }
                    if *log_scale && *lower <= 0.0 {
                        return invalid(format!("log-scale `{}` needs lower > 0", p.name));
                    }
                    if *integer && (lower.fract() != 0.0 || upper.fract() != 0.0) {
                        return invalid(format!("integer `{}` needs integral bounds", p.name));
                    }
                }
                Domain::Categorical { categories } => {
                    if categories.is_empty() {
                        return invalid(format!("categorical `{}` has no categories", p.name));
                    }
                    for (j, c) in categories.iter().enumerate() {
                        if categories[..j].contains(c) {
                            return invalid(format!("categorical `{}` repeats `{c}`", p.name));
                        }
                    }
                }
            }
        }
        let mut parents = Vec::with_capacity(params.len());
        for p in &params {
            let Some(cond) = &p.condition else {
                parents.push(None);
                continue;
            };
            let Some(&pi) = index.get(&cond.parent) else {
                return invalid(format!("`{}` conditions on unknown `{}`", p.name, cond.parent));
            };
            let parent = &params[pi];
            if parent.condition.is_some() {
                return invalid(format!(
                    "`{}` conditions on `{}`, which is itself conditional",
                    p.name, parent.name
                ));
            }
            let Domain::Categorical { categories } = &parent.domain else {
                return invalid(format!("`{}` conditions on numeric `{}`", p.name, parent.name));
            };
            let Some(ci) = categories.iter().position(|c| *c == cond.value) else {
                return invalid(format!(
                    "`{}` conditions on `{}` = `{}`, which is not a category",
                    p.name, parent.name, cond.value
                ));
            };
            parents.push(Some((pi, ci)));
        }
        let mut children = vec![Vec::new(); params.len()];
        for (i, p) in parents.iter().enumerate() {
            if let Some((pi, _)) = p {
                children[*pi].push(i);
            }
        }
        Ok(Self {
            params,
            index,
            parents,
            children,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("space serializes")
    }

    pub fn params(&self) -> &[HyperparameterDef] {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.params.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn param(&self, name: &str) -> Option<&HyperparameterDef> {
        self.index_of(name).map(|i| &self.params[i])
    }

    pub fn is_conditional(&self, i: usize) -> bool {
        self.parents[i].is_some()
    }

    pub fn parent_of(&self, i: usize) -> Option<(usize, usize)> {
        self.parents[i]
    }

    pub fn children_of(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    /// Whether dimension `i` is active in the (partially) encoded vector.
    /// Parents must already be resolved.
    pub fn is_active_encoded(&self, coords: &[f64], i: usize) -> bool {
        match self.parents[i] {
            None => true,
            Some((pi, ci)) => coords[pi] == ci as f64,
        }
    }

    /// Hex digest of the canonical JSON form.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("space serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    /// Range used to normalize numeric dimension `i` in distances. Dimensions
    /// that can be inactive extend their range to include the `-1` sentinel.
    pub fn distance_range(&self, i: usize) -> Option<(f64, f64)> {
        let (lower, upper) = self.params[i].bounds()?;
        if self.is_conditional(i) {
            Some((lower.min(INACTIVE), upper))
        } else {
            Some((lower, upper))
        }
    }

    /// Maps an active numeric value to `[0, 1]`, log-scaled dims in log domain.
    pub fn to_unit(&self, i: usize, value: f64) -> f64 {
        match self.params[i].domain {
            Domain::Numeric {
                lower,
                upper,
                log_scale: true,
                ..
            } => (value.ln() - lower.ln()) / (upper.ln() - lower.ln()),
            Domain::Numeric { lower, upper, .. } => (value - lower) / (upper - lower),
            Domain::Categorical { .. } => value,
        }
    }

    /// Inverse of [`to_unit`](Self::to_unit), clamped and rounded to a legal value.
    pub fn from_unit(&self, i: usize, unit: f64) -> f64 {
        let raw = match self.params[i].domain {
            Domain::Numeric {
                lower,
                upper,
                log_scale: true,
                ..
            } => (lower.ln() + unit * (upper.ln() - lower.ln())).exp(),
            Domain::Numeric { lower, upper, .. } => lower + unit * (upper - lower),
            Domain::Categorical { .. } => unit,
        };
        self.legalize(i, raw)
    }

    /// Clamps a numeric value into bounds and rounds integer dims.
    pub fn legalize(&self, i: usize, value: f64) -> f64 {
        match self.params[i].domain {
            Domain::Numeric {
                lower,
                upper,
                integer,
                ..
            } => {
                let v = if integer { value.round() } else { value };
                v.clamp(lower, upper)
            }
            Domain::Categorical { .. } => value,
        }
    }

    /// Width of numeric dim `i` in the domain its priors live in (log domain
    /// for log-scaled dims).
    pub fn prior_width(&self, i: usize) -> Option<f64> {
        match self.params[i].domain {
            Domain::Numeric {
                lower,
                upper,
                log_scale,
                ..
            } => Some(if log_scale {
                (upper.ln() - lower.ln()).abs()
            } else {
                (upper - lower).abs()
            }),
            Domain::Categorical { .. } => None,
        }
    }

    pub fn validate(&self, config: &Configuration) -> Result<()> {
        self.encode(config).map(|_| ())
    }

    /// Encodes a configuration, validating bounds, categories and activation.
    pub fn encode(&self, config: &Configuration) -> Result<EncodedVector> {
        let bad = |msg: String| Err(Error::InvalidConfiguration(msg));
        for name in config.values.keys() {
            if !self.index.contains_key(name) {
                return bad(format!("undeclared hyperparameter `{name}`"));
            }
        }
        let mut coords = vec![INACTIVE; self.dim()];
        // unconditional dims first, so every parent is known before its children
        for pass in 0..2 {
            for (i, p) in self.params.iter().enumerate() {
                if (pass == 0) == self.is_conditional(i) {
                    continue;
                }
                let active = self.is_active_encoded(&coords, i);
                let value = config.get(&p.name);
                match (active, value) {
                    (false, None) => {}
                    (false, Some(_)) => {
                        return bad(format!("`{}` is set but inactive", p.name));
                    }
                    (true, None) => return bad(format!("active `{}` has no value", p.name)),
                    (true, Some(v)) => coords[i] = self.encode_value(i, v)?,
                }
            }
        }
        Ok(EncodedVector(coords))
    }

    fn encode_value(&self, i: usize, value: &ParamValue) -> Result<f64> {
        let p = &self.params[i];
        match (&p.domain, value) {
            (
                Domain::Numeric {
                    lower,
                    upper,
                    integer,
                    ..
                },
                ParamValue::Number(v),
            ) => {
                if !v.is_finite() || v < lower || v > upper {
                    return Err(Error::InvalidConfiguration(format!(
                        "`{}` = {v} outside [{lower}, {upper}]",
                        p.name
                    )));
                }
                if *integer && v.fract() != 0.0 {
                    return Err(Error::InvalidConfiguration(format!(
                        "integer `{}` = {v} is not integral",
                        p.name
                    )));
                }
                Ok(*v)
            }
            (Domain::Categorical { categories }, ParamValue::Category(c)) => categories
                .iter()
                .position(|x| x == c)
                .map(|k| k as f64)
                .ok_or_else(|| {
                    Error::InvalidConfiguration(format!("`{}` has no category `{c}`", p.name))
                }),
            _ => Err(Error::InvalidConfiguration(format!(
                "`{}` has a value of the wrong kind",
                p.name
            ))),
        }
    }

    /// Decodes a vector, rejecting out-of-bounds or inconsistent coordinates.
    pub fn decode(&self, vector: &[f64]) -> Result<Configuration> {
        let bad = |msg: String| Err(Error::InvalidConfiguration(msg));
        if vector.len() != self.dim() {
            return bad(format!("expected {} coords, got {}", self.dim(), vector.len()));
        }
        let mut config = Configuration::new();
        for (i, p) in self.params.iter().enumerate() {
            let x = vector[i];
            if self.parents[i].is_some() {
                if !self.is_active_encoded(vector, i) {
                    if x != INACTIVE {
                        return bad(format!("inactive `{}` must be encoded as -1", p.name));
                    }
                    continue;
                }
            }
            let value = match &p.domain {
                Domain::Numeric {
                    lower,
                    upper,
                    integer,
                    ..
                } => {
                    if !x.is_finite() || x < *lower || x > *upper {
                        return bad(format!("`{}` = {x} outside [{lower}, {upper}]", p.name));
                    }
                    if *integer && x.fract() != 0.0 {
                        return bad(format!("integer `{}` = {x} is not integral", p.name));
                    }
                    ParamValue::Number(x)
                }
                Domain::Categorical { categories } => {
                    if x.fract() != 0.0 || x < 0.0 || x as usize >= categories.len() {
                        return bad(format!("`{}` has no category index {x}", p.name));
                    }
                    ParamValue::Category(categories[x as usize].clone())
                }
            };
            config.values.insert(p.name.clone(), value);
        }
        Ok(config)
    }

    /// Draws one value for dimension `i` uniformly (log-uniform for log dims).
    pub fn sample_dim<R: Rng + ?Sized>(&self, i: usize, rng: &mut R) -> f64 {
        match &self.params[i].domain {
            Domain::Numeric {
                lower,
                upper,
                log_scale,
                ..
            } => {
                let u: f64 = rng.random();
                let raw = if *log_scale {
                    (lower.ln() + u * (upper.ln() - lower.ln())).exp()
                } else {
                    lower + u * (upper - lower)
                };
                self.legalize(i, raw)
            }
            Domain::Categorical { categories } => rng.random_range(0..categories.len()) as f64,
        }
    }

    /// Sets coordinate `i` and re-resolves the activity of its children:
    /// children that turn inactive get the sentinel, children that turn
    /// active get a uniform draw.
    pub fn set_coord<R: Rng + ?Sized>(&self, coords: &mut [f64], i: usize, value: f64, rng: &mut R) {
        let before: Vec<bool> = self.children[i]
            .iter()
            .map(|&c| self.is_active_encoded(coords, c))
            .collect();
        coords[i] = value;
        for (&c, was_active) in self.children[i].iter().zip(before) {
            match (was_active, self.is_active_encoded(coords, c)) {
                (true, false) => coords[c] = INACTIVE,
                (false, true) => coords[c] = self.sample_dim(c, rng),
                _ => {}
            }
        }
    }

    /// One uniform sample in encoded form; parents are drawn before children.
    pub fn sample_uniform_encoded<R: Rng + ?Sized>(&self, rng: &mut R) -> EncodedVector {
        let mut coords = vec![INACTIVE; self.dim()];
        for i in 0..self.dim() {
            if self.parents[i].is_none() {
                coords[i] = self.sample_dim(i, rng);
            }
        }
        for i in 0..self.dim() {
            if self.parents[i].is_some() && self.is_active_encoded(&coords, i) {
                coords[i] = self.sample_dim(i, rng);
            }
        }
        EncodedVector(coords)
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<Configuration> {
        (0..n)
            .map(|_| {
                let v = self.sample_uniform_encoded(rng);
                self.decode(&v).expect("uniform samples are valid")
            })
            .collect()
    }

    /// Gower distance between encoded vectors.
    pub fn gower_encoded(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut total = 0.0;
        for (i, p) in self.params.iter().enumerate() {
            total += match p.domain {
                Domain::Numeric { .. } => {
                    let (lo, hi) = self.distance_range(i).expect("numeric");
                    ((a[i] - b[i]).abs() / (hi - lo)).min(1.0)
                }
                Domain::Categorical { .. } => {
                    if a[i] == b[i] {
                        0.0
                    } else {
                        1.0
                    }
                }
            };
        }
        total / self.dim() as f64
    }
}

/// Gower distance between two configurations of `space`.
pub fn gower_distance(a: &Configuration, b: &Configuration, space: &ConfigSpace) -> Result<f64> {
    Ok(space.gower_encoded(&space.encode(a)?, &space.encode(b)?))
}

// JSON form of a space definition.

#[derive(Serialize, Deserialize)]
struct RawSpace {
    hyperparameters: Vec<RawParam>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum RawKind {
    Float,
    Int,
    Categorical,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParam {
    name: String,
    #[serde(rename = "type")]
    kind: RawKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lower: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    upper: Option<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    log: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    categories: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    condition: Option<Condition>,
}

impl TryFrom<RawSpace> for ConfigSpace {
    type Error = Error;

    fn try_from(raw: RawSpace) -> Result<Self> {
        let mut params = Vec::with_capacity(raw.hyperparameters.len());
        for p in raw.hyperparameters {
            let domain = match p.kind {
                RawKind::Float | RawKind::Int => {
                    let (Some(lower), Some(upper)) = (p.lower, p.upper) else {
                        return Err(Error::InvalidSpace(format!(
                            "numeric `{}` needs lower and upper",
                            p.name
                        )));
                    };
                    if !p.categories.is_empty() {
                        return Err(Error::InvalidSpace(format!(
                            "numeric `{}` must not list categories",
                            p.name
                        )));
                    }
                    Domain::Numeric {
                        lower,
                        upper,
                        log_scale: p.log,
                        integer: matches!(p.kind, RawKind::Int),
                    }
                }
                RawKind::Categorical => {
                    if p.lower.is_some() || p.upper.is_some() || p.log {
                        return Err(Error::InvalidSpace(format!(
                            "categorical `{}` must not carry bounds",
                            p.name
                        )));
                    }
                    Domain::Categorical {
                        categories: p.categories,
                    }
                }
            };
            params.push(HyperparameterDef {
                name: p.name,
                domain,
                condition: p.condition,
            });
        }
        ConfigSpace::new(params)
    }
}

impl From<&ConfigSpace> for RawSpace {
    fn from(space: &ConfigSpace) -> Self {
        let hyperparameters = space
            .params
            .iter()
            .map(|p| match &p.domain {
                Domain::Numeric {
                    lower,
                    upper,
                    log_scale,
                    integer,
                } => RawParam {
                    name: p.name.clone(),
                    kind: if *integer { RawKind::Int } else { RawKind::Float },
                    lower: Some(*lower),
                    upper: Some(*upper),
                    log: *log_scale,
                    categories: Vec::new(),
                    condition: p.condition.clone(),
                },
                Domain::Categorical { categories } => RawParam {
                    name: p.name.clone(),
                    kind: RawKind::Categorical,
                    lower: None,
                    upper: None,
                    log: false,
                    categories: categories.clone(),
                    condition: p.condition.clone(),
                },
            })
            .collect();
        RawSpace { hyperparameters }
    }
}

impl Serialize for ConfigSpace {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RawSpace::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for ConfigSpace {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawSpace::deserialize(d)?;
        ConfigSpace::try_from(raw).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use proptest::prelude::*;

    fn conditional_space() -> ConfigSpace {
        ConfigSpace::new(vec![
            HyperparameterDef::categorical("c", &["a", "b"]),
            HyperparameterDef::float("y", 0.0, 1.0).when("c", "a"),
        ])
        .unwrap()
    }

    #[test]
    fn uniform_samples_respect_bounds_and_seed() {
        let space = ConfigSpace::new(vec![HyperparameterDef::float("x", 0.0, 1.0)]).unwrap();
        let a = space.sample_uniform(&mut stream(1, Purpose::Corpus, 0), 3);
        let b = space.sample_uniform(&mut stream(1, Purpose::Corpus, 0), 3);
        assert_eq!(a, b);
        for c in &a {
            let x = c.number("x").unwrap();
            assert!((0.0..=1.0).contains(&x));
        }
    }

    #[test]
    fn inactive_child_is_encoded_as_sentinel() {
        let space = conditional_space();
        for c in space.sample_uniform(&mut stream(2, Purpose::Corpus, 0), 200) {
            let v = space.encode(&c).unwrap();
            if c.category("c") == Some("b") {
                assert!(!c.is_active("y"));
                assert_eq!(v[1], INACTIVE);
            } else {
                assert!(c.is_active("y"));
            }
        }
    }

    #[test]
    fn log_uniform_median_is_geometric_midpoint() {
        let space = ConfigSpace::new(vec![HyperparameterDef::log_float("x", 1e-4, 1.0)]).unwrap();
        let mut rng = stream(3, Purpose::Corpus, 0);
        let n = 10_000;
        let below = (0..n)
            .filter(|_| space.sample_uniform_encoded(&mut rng)[0] < 1e-2)
            .count();
        // log-uniform CDF at 1e-2 over [1e-4, 1] is exactly one half
        let frac = below as f64 / n as f64;
        assert!((frac - 0.5).abs() <= 0.02, "fraction {frac}");
    }

    #[test]
    fn gower_examples() {
        let space = ConfigSpace::new(vec![
            HyperparameterDef::float("x", 0.0, 10.0),
            HyperparameterDef::categorical("c", &["p", "q"]),
        ])
        .unwrap();
        let a = Configuration::new().with_number("x", 2.0).with_category("c", "p");
        let b = Configuration::new().with_number("x", 7.0).with_category("c", "p");
        assert_eq!(gower_distance(&a, &a, &space).unwrap(), 0.0);
        assert!((gower_distance(&a, &b, &space).unwrap() - 0.25).abs() < 1e-15);
        let lo = Configuration::new().with_number("x", 0.0).with_category("c", "p");
        let hi = Configuration::new().with_number("x", 10.0).with_category("c", "q");
        assert_eq!(gower_distance(&lo, &hi, &space).unwrap(), 1.0);
    }

    #[test]
    fn gower_range_covers_sentinel_for_conditional_dims() {
        let space = ConfigSpace::new(vec![
            HyperparameterDef::categorical("c", &["a", "b"]),
            HyperparameterDef::float("y", 0.0, 1.0).when("c", "a"),
        ])
        .unwrap();
        assert_eq!(space.distance_range(1), Some((-1.0, 1.0)));
        let on = Configuration::new().with_category("c", "a").with_number("y", 1.0);
        let off = Configuration::new().with_category("c", "b");
        assert_eq!(gower_distance(&on, &off, &space).unwrap(), 1.0);
    }

    #[test]
    fn encode_examples() {
        let space = ConfigSpace::new(vec![
            HyperparameterDef::categorical("c", &["a", "b", "c"]),
            HyperparameterDef::float("y", 0.0, 1.0).when("c", "a"),
        ])
        .unwrap();
        let cfg = Configuration::new().with_category("c", "b");
        let v = space.encode(&cfg).unwrap();
        assert_eq!(v.0, vec![1.0, INACTIVE]);
        assert_eq!(space.decode(&v).unwrap(), cfg);
    }

    #[test]
    fn decode_rejects_bad_coords() {
        let space = conditional_space();
        assert!(space.decode(&[0.0, 1.5]).is_err());
        assert!(space.decode(&[2.0, INACTIVE]).is_err());
        assert!(space.decode(&[1.0, 0.5]).is_err());
        assert!(space.decode(&[0.0]).is_err());
    }

    #[test]
    fn encode_rejects_invalid_configurations() {
        let space = conditional_space();
        let undeclared = Configuration::new().with_category("c", "a").with_number("z", 0.1);
        assert!(space.encode(&undeclared).is_err());
        let inactive_set = Configuration::new().with_category("c", "b").with_number("y", 0.1);
        assert!(space.encode(&inactive_set).is_err());
        let missing = Configuration::new().with_category("c", "a");
        assert!(space.encode(&missing).is_err());
        let wrong_kind = Configuration::new().with_number("c", 0.0);
        assert!(space.encode(&wrong_kind).is_err());
    }

    #[test]
    fn construction_rejects_invalid_definitions() {
        assert!(ConfigSpace::new(vec![HyperparameterDef::float("x", 1.0, 1.0)]).is_err());
        assert!(ConfigSpace::new(vec![HyperparameterDef::log_float("x", 0.0, 1.0)]).is_err());
        assert!(ConfigSpace::new(vec![HyperparameterDef::categorical("c", &[])]).is_err());
        assert!(ConfigSpace::new(vec![HyperparameterDef::categorical("c", &["a", "a"])]).is_err());
        assert!(
            ConfigSpace::new(vec![HyperparameterDef::float("y", 0.0, 1.0).when("c", "a")]).is_err()
        );
        assert!(ConfigSpace::new(vec![
            HyperparameterDef::float("x", 0.0, 1.0),
            HyperparameterDef::float("y", 0.0, 1.0).when("x", "a"),
        ])
        .is_err());
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"hyperparameters": [
            {"name": "lr", "type": "float", "lower": 1e-4, "upper": 1.0, "log": true},
            {"name": "layers", "type": "int", "lower": 1, "upper": 8},
            {"name": "opt", "type": "categorical", "categories": ["sgd", "adam"]},
            {"name": "momentum", "type": "float", "lower": 0.0, "upper": 0.99,
             "condition": {"parent": "opt", "value": "sgd"}}
        ]}"#;
        let space = ConfigSpace::from_json(text).unwrap();
        assert_eq!(space.dim(), 4);
        assert!(space.params()[0].is_log());
        assert!(space.is_conditional(3));
        let again = ConfigSpace::from_json(&space.to_json()).unwrap();
        assert_eq!(space, again);
        assert_eq!(space.fingerprint(), again.fingerprint());
        assert!(ConfigSpace::from_json(r#"{"hyperparameters": [{"name": "x", "type": "float"}]}"#)
            .is_err());
    }

    fn arb_space() -> impl Strategy<Value = ConfigSpace> {
        let numeric = (-10.0f64..10.0, 0.1f64..20.0, any::<bool>(), any::<bool>()).prop_map(
            |(lo, width, log, int)| {
                if log {
                    (lo.abs() + 0.01, lo.abs() + 0.01 + width, true, false)
                } else if int {
                    (lo.floor(), lo.floor() + width.ceil(), false, true)
                } else {
                    (lo, lo + width, false, false)
                }
            },
        );
        (prop::collection::vec(numeric, 1..4), 1usize..4, any::<bool>()).prop_map(
            |(nums, ncat, conditional)| {
                let mut params = vec![HyperparameterDef::categorical(
                    "cat",
                    &["u", "v", "w"][..ncat],
                )];
                for (k, (lo, hi, log, int)) in nums.into_iter().enumerate() {
                    let mut p = HyperparameterDef::numeric(&format!("n{k}"), lo, hi, log, int);
                    if conditional && k == 0 {
                        p = p.when("cat", "u");
                    }
                    params.push(p);
                }
                ConfigSpace::new(params).unwrap()
            },
        )
    }

    proptest! {
        #[test]
        fn uniform_samples_are_valid_and_round_trip(space in arb_space(), seed in any::<u64>()) {
            let mut rng = stream(seed, Purpose::Corpus, 0);
            for c in space.sample_uniform(&mut rng, 20) {
                let v = space.encode(&c).unwrap();
                prop_assert_eq!(v.len(), space.dim());
                prop_assert_eq!(space.decode(&v).unwrap(), c);
            }
        }

        #[test]
        fn gower_is_a_bounded_symmetric_dissimilarity(space in arb_space(), seed in any::<u64>()) {
            let mut rng = stream(seed, Purpose::Corpus, 1);
            let a = space.sample_uniform_encoded(&mut rng);
            let b = space.sample_uniform_encoded(&mut rng);
            let ab = space.gower_encoded(&a, &b);
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert_eq!(ab, space.gower_encoded(&b, &a));
            prop_assert_eq!(space.gower_encoded(&a, &a), 0.0);
        }
    }
}
