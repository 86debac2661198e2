//! Search spaces, trials and the reversible feature mapping.
//!
//! Non-categorical parameters are mapped to `[0, 1]` according to their
//! scaling; categorical parameters are represented by their index into the
//! list of feasible values. The GP consumes [`FeatureVector`]s, the firefly
//! optimizer works on a one-hot expansion of the categorical slots.

use std::collections::{BTreeMap, HashSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scaling applied to a bounded parameter before it is fed to the model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ScaleType {
    #[default]
    Linear,
    Log,
    ReverseLog,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ParameterKind {
    Double { min: f64, max: f64, scaling: ScaleType },
    Integer { min: f64, max: f64, scaling: ScaleType },
    /// Feasible values are strictly increasing.
    Discrete { values: Vec<f64>, scaling: ScaleType },
    Categorical { values: Vec<String> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParameter", into = "RawParameter")]
pub struct ParameterConfig {
    pub name: String,
    pub kind: ParameterKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
enum RawType {
    Double,
    Integer,
    Discrete,
    Categorical,
}

/// Wire form of a parameter in the study JSON.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParameter {
    name: String,
    #[serde(rename = "type")]
    kind: RawType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bounds: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    feasible_values: Option<Vec<serde_json::Value>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scaling: Option<ScaleType>,
}

impl TryFrom<RawParameter> for ParameterConfig {
    type Error = Error;

    fn try_from(raw: RawParameter) -> Result<Self> {
        let scaling = raw.scaling.unwrap_or_default();
        let bounds = || {
            raw.bounds.ok_or_else(|| {
                Error::Validation(format!("parameter '{}' requires bounds", raw.name))
            })
        };
        let kind = match raw.kind {
            RawType::Double => {
                let [min, max] = bounds()?;
                ParameterKind::Double { min, max, scaling }
            }
            RawType::Integer => {
                let [min, max] = bounds()?;
                ParameterKind::Integer { min, max, scaling }
            }
            RawType::Discrete => {
                let values = raw
                    .feasible_values
                    .as_ref()
                    .ok_or_else(|| {
                        Error::Validation(format!("parameter '{}' requires feasible_values", raw.name))
                    })?
                    .iter()
                    .map(|v| {
                        v.as_f64().ok_or_else(|| {
                            Error::Validation(format!(
                                "parameter '{}': DISCRETE feasible values must be numbers",
                                raw.name
                            ))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                ParameterKind::Discrete { values, scaling }
            }
            RawType::Categorical => {
                if raw.scaling.is_some() {
                    return Err(Error::Validation(format!(
                        "parameter '{}': CATEGORICAL parameters take no scaling",
                        raw.name
                    )));
                }
                let values = raw
                    .feasible_values
                    .as_ref()
                    .ok_or_else(|| {
                        Error::Validation(format!("parameter '{}' requires feasible_values", raw.name))
                    })?
                    .iter()
                    .map(|v| match v {
                        serde_json::Value::String(s) => Ok(s.clone()),
                        _ => Err(Error::Validation(format!(
                            "parameter '{}': CATEGORICAL feasible values must be strings",
                            raw.name
                        ))),
                    })
                    .collect::<Result<Vec<_>>>()?;
                ParameterKind::Categorical { values }
            }
        };
        ParameterConfig::new(raw.name, kind)
    }
}

impl From<ParameterConfig> for RawParameter {
    fn from(p: ParameterConfig) -> Self {
        let (kind, bounds, feasible_values, scaling) = match p.kind {
            ParameterKind::Double { min, max, scaling } => {
                (RawType::Double, Some([min, max]), None, Some(scaling))
            }
            ParameterKind::Integer { min, max, scaling } => {
                (RawType::Integer, Some([min, max]), None, Some(scaling))
            }
            ParameterKind::Discrete { values, scaling } => (
                RawType::Discrete,
                None,
                Some(values.into_iter().map(serde_json::Value::from).collect()),
                Some(scaling),
            ),
            ParameterKind::Categorical { values } => (
                RawType::Categorical,
                None,
                Some(values.into_iter().map(serde_json::Value::from).collect()),
                None,
            ),
        };
        RawParameter { name: p.name, kind, bounds, feasible_values, scaling }
    }
}

impl ParameterConfig {
    pub fn new(name: impl Into<String>, kind: ParameterKind) -> Result<Self> {
        let name = name.into();
        let bad = |msg: &str| Err(Error::Validation(format!("parameter '{name}': {msg}")));
        match &kind {
            ParameterKind::Double { min, max, scaling }
            | ParameterKind::Integer { min, max, scaling } => {
                if !(min.is_finite() && max.is_finite()) || min >= max {
                    return bad("bounds must be finite with min < max");
                }
                if *scaling != ScaleType::Linear && *min <= 0.0 {
                    return bad("log scaling requires min > 0");
                }
                if matches!(kind, ParameterKind::Integer { .. })
                    && (min.fract() != 0.0 || max.fract() != 0.0)
                {
                    return bad("INTEGER bounds must be whole numbers");
                }
            }
            ParameterKind::Discrete { values, scaling } => {
                if values.is_empty() {
                    return bad("feasible_values must be non-empty");
                }
                if values.iter().any(|v| !v.is_finite()) || values.windows(2).any(|w| w[0] >= w[1]) {
                    return bad("DISCRETE feasible_values must be finite and strictly increasing");
                }
                if *scaling != ScaleType::Linear && values[0] <= 0.0 {
                    return bad("log scaling requires min > 0");
                }
            }
            ParameterKind::Categorical { values } => {
                if values.is_empty() {
                    return bad("feasible_values must be non-empty");
                }
                let unique: HashSet<&String> = values.iter().collect();
                if unique.len() != values.len() {
                    return bad("duplicate categories");
                }
            }
        }
        Ok(Self { name, kind })
    }

    pub fn double(name: &str, min: f64, max: f64, scaling: ScaleType) -> Result<Self> {
        Self::new(name, ParameterKind::Double { min, max, scaling })
    }

    pub fn integer(name: &str, min: i64, max: i64) -> Result<Self> {
        Self::new(
            name,
            ParameterKind::Integer { min: min as f64, max: max as f64, scaling: ScaleType::Linear },
        )
    }

    pub fn discrete(name: &str, values: Vec<f64>, scaling: ScaleType) -> Result<Self> {
        Self::new(name, ParameterKind::Discrete { values, scaling })
    }

    pub fn categorical<S: Into<String>>(name: &str, values: impl IntoIterator<Item = S>) -> Result<Self> {
        Self::new(
            name,
            ParameterKind::Categorical { values: values.into_iter().map(Into::into).collect() },
        )
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self.kind, ParameterKind::Categorical { .. })
    }

    /// `(min, max)` for non-categorical parameters. DISCRETE parameters use
    /// the extreme feasible values.
    pub fn bounds(&self) -> Option<(f64, f64)> {
        match &self.kind {
            ParameterKind::Double { min, max, .. } | ParameterKind::Integer { min, max, .. } => {
                Some((*min, *max))
            }
            ParameterKind::Discrete { values, .. } => Some((values[0], values[values.len() - 1])),
            ParameterKind::Categorical { .. } => None,
        }
    }

    pub fn scaling(&self) -> Option<ScaleType> {
        match &self.kind {
            ParameterKind::Double { scaling, .. }
            | ParameterKind::Integer { scaling, .. }
            | ParameterKind::Discrete { scaling, .. } => Some(*scaling),
            ParameterKind::Categorical { .. } => None,
        }
    }

    pub fn num_categories(&self) -> usize {
        match &self.kind {
            ParameterKind::Categorical { values } => values.len(),
            _ => 0,
        }
    }

    /// Snap a raw value to the nearest feasible value of this parameter.
    fn snap(&self, value: f64) -> f64 {
        match &self.kind {
            ParameterKind::Double { min, max, .. } => value.clamp(*min, *max),
            ParameterKind::Integer { min, max, .. } => value.round().clamp(*min, *max),
            ParameterKind::Discrete { values, .. } => nearest(values, value),
            ParameterKind::Categorical { .. } => value,
        }
    }
}

fn nearest(sorted: &[f64], value: f64) -> f64 {
    let idx = sorted.partition_point(|v| *v < value);
    match idx {
        0 => sorted[0],
        i if i == sorted.len() => sorted[i - 1],
        i => {
            if (value - sorted[i - 1]) <= (sorted[i] - value) {
                sorted[i - 1]
            } else {
                sorted[i]
            }
        }
    }
}

fn log_unit(value: f64, min: f64, max: f64) -> Result<f64> {
    if value <= 0.0 {
        return Err(Error::Domain(format!("log scaling of non-positive value {value}")));
    }
    let (lo, hi) = (min.ln(), max.ln());
    Ok((value.ln() - lo) / (hi - lo))
}

fn log_value(u: f64, min: f64, max: f64) -> f64 {
    let (lo, hi) = (min.ln(), max.ln());
    (lo + u * (hi - lo)).exp()
}

/// Map a parameter value into the unit interval according to its scaling.
///
/// Values outside the bounds map outside `[0, 1]`; callers that need
/// in-range features clamp afterwards.
pub fn scale_to_unit(value: f64, config: &ParameterConfig) -> Result<f64> {
    let (min, max) = config.bounds().ok_or_else(|| {
        Error::Validation(format!("parameter '{}' is categorical", config.name))
    })?;
    if min == max {
        // single-valued DISCRETE
        return Ok(0.5);
    }
    match config.scaling().unwrap_or_default() {
        ScaleType::Linear => Ok((value - min) / (max - min)),
        ScaleType::Log => log_unit(value, min, max),
        // Mirror about the midpoint, log-scale, mirror back.
        ScaleType::ReverseLog => Ok(1.0 - log_unit(min + max - value, min, max)?),
    }
}

/// Inverse of [`scale_to_unit`]; INTEGER and DISCRETE outputs snap to the
/// nearest feasible value.
pub fn unscale_from_unit(u: f64, config: &ParameterConfig) -> f64 {
    let Some((min, max)) = config.bounds() else {
        return u;
    };
    if min == max {
        return min;
    }
    let u = u.clamp(0.0, 1.0);
    let raw = match config.scaling().unwrap_or_default() {
        ScaleType::Linear => min + u * (max - min),
        ScaleType::Log => log_value(u, min, max),
        ScaleType::ReverseLog => min + max - log_value(1.0 - u, min, max),
    };
    config.snap(raw)
}

/// Search space: an ordered list of uniquely named parameters.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ParameterConfig>", into = "Vec<ParameterConfig>")]
pub struct SearchSpace {
    parameters: Vec<ParameterConfig>,
}

impl TryFrom<Vec<ParameterConfig>> for SearchSpace {
    type Error = Error;
    fn try_from(parameters: Vec<ParameterConfig>) -> Result<Self> {
        SearchSpace::new(parameters)
    }
}

impl From<SearchSpace> for Vec<ParameterConfig> {
    fn from(s: SearchSpace) -> Self {
        s.parameters
    }
}

/// A parameter value as seen by users: a number or a category label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
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
            ParamValue::Category(s) => Some(s),
            ParamValue::Number(_) => None,
        }
    }
}

pub type ParameterDict = BTreeMap<String, ParamValue>;

/// Model-space representation of a trial's parameters.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    /// One scaled value per non-categorical parameter, in canonical order.
    pub continuous: Vec<f64>,
    /// One category index per categorical parameter, in canonical order.
    pub categorical: Vec<usize>,
}

impl FeatureVector {
    pub fn new(continuous: Vec<f64>, categorical: Vec<usize>) -> Self {
        Self { continuous, categorical }
    }
}

impl SearchSpace {
    pub fn new(parameters: Vec<ParameterConfig>) -> Result<Self> {
        let mut seen = HashSet::new();
        for p in &parameters {
            if !seen.insert(p.name.as_str()) {
                return Err(Error::Validation(format!("duplicate parameter name '{}'", p.name)));
            }
        }
        Ok(Self { parameters })
    }

    pub fn parameters(&self) -> &[ParameterConfig] {
        &self.parameters
    }

    pub fn len(&self) -> usize {
        self.parameters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parameters.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&ParameterConfig> {
        self.parameters.iter().find(|p| p.name == name)
    }

    pub fn continuous_params(&self) -> impl Iterator<Item = &ParameterConfig> {
        self.parameters.iter().filter(|p| !p.is_categorical())
    }

    pub fn categorical_params(&self) -> impl Iterator<Item = &ParameterConfig> {
        self.parameters.iter().filter(|p| p.is_categorical())
    }

    pub fn num_continuous(&self) -> usize {
        self.continuous_params().count()
    }

    pub fn num_categorical(&self) -> usize {
        self.categorical_params().count()
    }

    /// Number of categories for each categorical parameter, in order.
    pub fn category_sizes(&self) -> Vec<usize> {
        self.categorical_params().map(ParameterConfig::num_categories).collect()
    }

    /// Map user-facing parameters to model features.
    ///
    /// Out-of-bounds numeric values are clamped into `[0, 1]` with a warning.
    pub fn featurize(&self, params: &ParameterDict) -> Result<FeatureVector> {
        let mut continuous = Vec::with_capacity(self.num_continuous());
        let mut categorical = Vec::with_capacity(self.num_categorical());
        for p in &self.parameters {
            let value = params
                .get(&p.name)
                .ok_or_else(|| Error::Validation(format!("missing parameter '{}'", p.name)))?;
            match &p.kind {
                ParameterKind::Categorical { values } => {
                    let label = value.as_str().ok_or_else(|| {
                        Error::Validation(format!("parameter '{}' expects a category label", p.name))
                    })?;
                    let idx = values.iter().position(|v| v == label).ok_or_else(|| {
                        Error::Validation(format!("infeasible category '{label}' for '{}'", p.name))
                    })?;
                    categorical.push(idx);
                }
                kind => {
                    let v = value.as_f64().filter(|v| v.is_finite()).ok_or_else(|| {
                        Error::Validation(format!("parameter '{}' expects a finite number", p.name))
                    })?;
                    match kind {
                        ParameterKind::Integer { .. } if v.fract() != 0.0 => {
                            return Err(Error::Validation(format!(
                                "parameter '{}' expects an integer, got {v}",
                                p.name
                            )));
                        }
                        ParameterKind::Discrete { values, .. }
                            if !values.iter().any(|f| (f - v).abs() <= 1e-9 * f.abs().max(1.0)) =>
                        {
                            return Err(Error::Validation(format!(
                                "value {v} is not feasible for '{}'",
                                p.name
                            )));
                        }
                        _ => {}
                    }
                    let u = scale_to_unit(v, p)?;
                    if !(-1e-9..=1.0 + 1e-9).contains(&u) {
                        log::warn!("parameter '{}' value {v} outside its bounds; clamping", p.name);
                    }
                    continuous.push(u.clamp(0.0, 1.0));
                }
            }
        }
        Ok(FeatureVector { continuous, categorical })
    }

    /// Map model features back to user-facing parameter values.
    pub fn unfeaturize(&self, features: &FeatureVector) -> ParameterDict {
        let mut cont = features.continuous.iter();
        let mut cat = features.categorical.iter();
        let mut out = ParameterDict::new();
        for p in &self.parameters {
            let value = match &p.kind {
                ParameterKind::Categorical { values } => {
                    let idx = *cat.next().expect("categorical feature count mismatch");
                    ParamValue::Category(values[idx.min(values.len() - 1)].clone())
                }
                _ => {
                    let u = *cont.next().expect("continuous feature count mismatch");
                    ParamValue::Number(unscale_from_unit(u, p))
                }
            };
            out.insert(p.name.clone(), value);
        }
        out
    }

    /// Snap each continuous feature to the unit value of the nearest
    /// feasible parameter value (identity for DOUBLE after clamping).
    pub fn snap_features(&self, features: &mut FeatureVector) {
        for (u, p) in features.continuous.iter_mut().zip(self.continuous_params()) {
            let clamped = u.clamp(0.0, 1.0);
            *u = match p.kind {
                ParameterKind::Double { .. } => clamped,
                _ => scale_to_unit(unscale_from_unit(clamped, p), p)
                    .map(|v| v.clamp(0.0, 1.0))
                    .unwrap_or(clamped),
            };
        }
    }

    /// Feature vector of the space center: `u = 0.5` for numeric parameters
    /// (snapped to feasible values) and uniformly random categories.
    pub fn center_features<R: Rng + ?Sized>(&self, rng: &mut R) -> FeatureVector {
        let mut f = FeatureVector {
            continuous: vec![0.5; self.num_continuous()],
            categorical: self.category_sizes().iter().map(|&n| rng.random_range(0..n)).collect(),
        };
        self.snap_features(&mut f);
        f
    }

    /// Uniformly random feasible features (uniform in scaled space).
    pub fn random_features<R: Rng + ?Sized>(&self, rng: &mut R) -> FeatureVector {
        let mut f = FeatureVector {
            continuous: (0..self.num_continuous()).map(|_| rng.random::<f64>()).collect(),
            categorical: self.category_sizes().iter().map(|&n| rng.random_range(0..n)).collect(),
        };
        self.snap_features(&mut f);
        f
    }
}

/// Map one parameter dictionary to features; free-function form of
/// [`SearchSpace::featurize`].
pub fn featurize(params: &ParameterDict, space: &SearchSpace) -> Result<FeatureVector> {
    space.featurize(params)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Goal {
    #[default]
    Maximize,
    Minimize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    pub name: String,
    #[serde(default)]
    pub goal: Goal,
}

/// Search space plus the metrics to optimize.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemStatement {
    #[serde(rename = "parameters")]
    pub space: SearchSpace,
    pub objectives: Vec<ObjectiveSpec>,
}

impl ProblemStatement {
    pub fn new(space: SearchSpace, objectives: Vec<ObjectiveSpec>) -> Result<Self> {
        let p = Self { space, objectives };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.objectives.is_empty() {
            return Err(Error::Validation("at least one objective is required".into()));
        }
        let mut seen = HashSet::new();
        for o in &self.objectives {
            if !seen.insert(o.name.as_str()) {
                return Err(Error::Validation(format!("duplicate objective '{}'", o.name)));
            }
        }
        Ok(())
    }

    pub fn num_metrics(&self) -> usize {
        self.objectives.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TrialState {
    Pending,
    Completed,
    Infeasible,
}

/// How a suggestion was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuggestionOrigin {
    Center,
    QuasiRandom,
    Ucb,
    PureExploration,
    MultiObjective,
    /// GP modeling failed; the point is uniformly random.
    RandomFallback,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub id: u64,
    pub parameters: ParameterDict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measurement: Option<Vec<f64>>,
    pub state: TrialState,
    pub origin: SuggestionOrigin,
    /// Logical timestamp of creation.
    pub created_at: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completed_at: Option<u64>,
}

impl Trial {
    pub fn is_pending(&self) -> bool {
        self.state == TrialState::Pending
    }
}
