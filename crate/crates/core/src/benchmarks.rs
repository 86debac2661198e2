//! Synthetic benchmark objectives for maximization.
//!
//! Base functions are negated BBOB-style functions with their optimum value 0
//! at the origin (no rotations or oscillation transforms). Wrappers add a
//! random shift, categorization onto a 10-point grid, noise and category
//! permutations; two bi-objective problems are included for multi-objective
//! runs.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::search_space::{ObjectiveSpec, ParamValue, ParameterConfig, ParameterDict, ProblemStatement, ScaleType, SearchSpace};

/// Every benchmark parameter ranges over `[-DOMAIN, DOMAIN]`.
pub const DOMAIN: f64 = 5.0;
pub const GRID_POINTS: usize = 10;
const NOISE_EPS: f64 = 1e-199;

macro_rules! named_enum {
    ($name:ident { $($variant:ident),* $(,)? }) => {
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
        pub enum $name { $($variant),* }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),*];

            pub fn name(self) -> &'static str {
                match self { $($name::$variant => stringify!($variant)),* }
            }
        }

        impl FromStr for $name {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                Self::ALL
                    .iter()
                    .copied()
                    .find(|f| f.name().eq_ignore_ascii_case(s))
                    .ok_or_else(|| Error::Config(format!("unknown {} '{s}'", stringify!($name))))
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }
    };
}

named_enum!(BbobFunction {
    Sphere,
    Rastrigin,
    Rosenbrock,
    Discus,
    BentCigar,
    LinearSlope,
    AttractiveSector,
    SharpRidge,
    DifferentPowers,
    Lunacek,
});

named_enum!(MoFunction { BiSphere, BiRastrigin });

fn sq_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// `i / (d - 1)`, with 0 for one-dimensional inputs.
fn ramp(i: usize, d: usize) -> f64 {
    if d > 1 {
        i as f64 / (d - 1) as f64
    } else {
        0.0
    }
}

fn rastrigin(x: &[f64]) -> f64 {
    10.0 * (x.len() as f64 - x.iter().map(|v| (2.0 * PI * v).cos()).sum::<f64>()) + sq_norm(x)
}

/// Standard (minimization) value of a base function at `x`.
fn bbob_raw(f: BbobFunction, x: &[f64]) -> f64 {
    let d = x.len();
    match f {
        BbobFunction::Sphere => sq_norm(x),
        BbobFunction::Rastrigin => rastrigin(x),
        BbobFunction::Rosenbrock => {
            let c = (d as f64).sqrt() / 8.0;
            let c = c.max(1.0);
            let z: Vec<f64> = x.iter().map(|v| c * v + 1.0).collect();
            z.windows(2).map(|w| 100.0 * (w[0] * w[0] - w[1]).powi(2) + (w[0] - 1.0).powi(2)).sum()
        }
        BbobFunction::Discus => x.first().map_or(0.0, |a| 1e6 * a * a) + sq_norm(x.get(1..).unwrap_or(&[])),
        BbobFunction::BentCigar => x.first().map_or(0.0, |a| a * a) + 1e6 * sq_norm(x.get(1..).unwrap_or(&[])),
        BbobFunction::LinearSlope => {
            x.iter().enumerate().map(|(i, v)| 10f64.powf(ramp(i, d)) * (-v).max(0.0)).sum()
        }
        BbobFunction::AttractiveSector => {
            let s: f64 = x.iter().map(|v| if *v > 0.0 { (100.0 * v).powi(2) } else { v * v }).sum();
            s.powf(0.9)
        }
        BbobFunction::SharpRidge => {
            x.first().map_or(0.0, |a| a * a) + 100.0 * sq_norm(x.get(1..).unwrap_or(&[])).sqrt()
        }
        BbobFunction::DifferentPowers => {
            x.iter().enumerate().map(|(i, v)| v.abs().powf(2.0 + 4.0 * ramp(i, d))).sum::<f64>().sqrt()
        }
        BbobFunction::Lunacek => {
            let mu0 = 2.5;
            let s = 1.0 - 1.0 / (2.0 * (d as f64 + 20.0).sqrt() - 8.2);
            let mu1 = -((mu0 * mu0 - 1.0) / s).sqrt();
            let xh: Vec<f64> = x.iter().map(|v| v + mu0).collect();
            let a: f64 = xh.iter().map(|v| (v - mu0).powi(2)).sum();
            let b: f64 = d as f64 + s * xh.iter().map(|v| (v - mu1).powi(2)).sum::<f64>();
            a.min(b) + 10.0 * x.iter().map(|v| 1.0 - (2.0 * PI * v).cos()).sum::<f64>()
        }
    }
}

/// Negated base function: maximization, optimum 0 at the origin.
pub fn bbob(f: BbobFunction, x: &[f64]) -> f64 {
    -bbob_raw(f, x)
}

pub fn bbob_by_name(name: &str, x: &[f64]) -> Result<f64> {
    Ok(bbob(name.parse()?, x))
}

pub fn mo_benchmark(f: MoFunction, x: &[f64]) -> [f64; 2] {
    let shifted: Vec<f64> = x.iter().map(|v| v - 1.0).collect();
    match f {
        MoFunction::BiSphere => [-sq_norm(x), -sq_norm(&shifted)],
        MoFunction::BiRastrigin => [-rastrigin(x), -rastrigin(&shifted)],
    }
}

/// `x ↦ f(x − c)`.
pub fn shift_wrapper<F: Fn(&[f64]) -> f64>(f: F, c: Vec<f64>) -> impl Fn(&[f64]) -> f64 {
    move |x| {
        let z: Vec<f64> = x.iter().zip(&c).map(|(a, b)| a - b).collect();
        f(&z)
    }
}

pub fn sample_shift<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-DOMAIN..=DOMAIN)).collect()
}

/// Value of grid category `idx`: 10 equidistant points over `[-5, 5]`.
pub fn grid_value(idx: usize) -> f64 {
    -DOMAIN + idx as f64 * (2.0 * DOMAIN / (GRID_POINTS - 1) as f64)
}

/// Category index of an exact grid value.
pub fn grid_index(value: f64) -> Option<usize> {
    (0..GRID_POINTS).find(|&i| grid_value(i) == value)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NoiseModel {
    Gaussian,
    Uniform,
    Cauchy,
}

/// Random inputs of one noise application, drawn up front so the noise
/// formulas are deterministic functions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseDraws {
    pub normal_a: f64,
    pub normal_b: f64,
    pub uniform_a: f64,
    pub uniform_b: f64,
}

impl NoiseDraws {
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self {
            normal_a: rng.sample(StandardNormal),
            normal_b: rng.sample(StandardNormal),
            uniform_a: rng.random(),
            uniform_b: rng.random(),
        }
    }
}

/// Apply a noise model to the (negated, so non-positive near optimum)
/// objective `f` in dimension `d`.
pub fn apply_noise(model: NoiseModel, f: f64, d: usize, draws: &NoiseDraws) -> f64 {
    match model {
        NoiseModel::Gaussian => f * draws.normal_a.exp(),
        NoiseModel::Uniform => {
            if f == 0.0 {
                return 0.0;
            }
            let base = (1e9 / (-f + NOISE_EPS)).max(1.0);
            let exponent = (0.49 + 1.0 / d as f64) * draws.uniform_b;
            // log space: the multiplier can overflow for |f| near zero.
            let log_mag = f.abs().ln() + draws.uniform_a.ln() + exponent * base.ln();
            f.signum() * log_mag.exp()
        }
        NoiseModel::Cauchy => {
            let indicator = if draws.uniform_a < 0.2 { 1.0 } else { 0.0 };
            f - (1000.0 + indicator * draws.normal_a / (draws.normal_b.abs() + NOISE_EPS)).max(0.0)
        }
    }
}

/// Apply per-parameter category permutations: label index `i` of parameter
/// `k` is evaluated as category `perms[k][i]`.
pub fn permute_categories(indices: &[usize], perms: &[Vec<usize>]) -> Vec<usize> {
    indices.iter().zip(perms).map(|(&i, p)| p[i]).collect()
}

pub fn invert_permutation(p: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; p.len()];
    for (i, &v) in p.iter().enumerate() {
        inv[v] = i;
    }
    inv
}

/// Mean absolute value of each metric over `grid_size` evenly spaced points
/// on the diagonal from `lower` to `upper`; zero means become 1.
pub fn metric_normalizers<F: Fn(&[f64]) -> Vec<f64>>(f: F, lower: &[f64], upper: &[f64], grid_size: usize) -> Vec<f64> {
    let mut sums: Vec<f64> = Vec::new();
    for k in 0..grid_size {
        let t = if grid_size > 1 { k as f64 / (grid_size - 1) as f64 } else { 0.5 };
        let x: Vec<f64> = lower.iter().zip(upper).map(|(a, b)| a + t * (b - a)).collect();
        let y = f(&x);
        if sums.is_empty() {
            sums = vec![0.0; y.len()];
        }
        sums.iter_mut().zip(&y).for_each(|(s, v)| *s += v.abs());
    }
    sums.into_iter()
        .map(|s| {
            let m = s / grid_size as f64;
            if m > 0.0 && m.is_finite() {
                m
            } else {
                1.0
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BaseFunction {
    Single(BbobFunction),
    Multi(MoFunction),
}

impl BaseFunction {
    pub fn num_objectives(self) -> usize {
        match self {
            BaseFunction::Single(_) => 1,
            BaseFunction::Multi(_) => 2,
        }
    }

    pub fn evaluate(self, x: &[f64]) -> Vec<f64> {
        match self {
            BaseFunction::Single(f) => vec![bbob(f, x)],
            BaseFunction::Multi(f) => mo_benchmark(f, x).to_vec(),
        }
    }
}

impl FromStr for BaseFunction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        s.parse::<BbobFunction>()
            .map(BaseFunction::Single)
            .or_else(|_| s.parse::<MoFunction>().map(BaseFunction::Multi))
            .map_err(|_| Error::Config(format!("unknown benchmark function '{s}'")))
    }
}

impl fmt::Display for BaseFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaseFunction::Single(b) => b.fmt(f),
            BaseFunction::Multi(m) => m.fmt(f),
        }
    }
}

fn default_true() -> bool {
    true
}

/// Declarative benchmark description (part of the bench manifest).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkSpec {
    /// Display name; defaults to `<function>-d<dimension>`.
    #[serde(default)]
    pub name: Option<String>,
    pub function: String,
    pub dimension: usize,
    /// Fixed shift vector; overrides `random_shift`.
    #[serde(default)]
    pub shift: Option<Vec<f64>>,
    /// Draw a fresh `U[-5, 5]` shift per repeat.
    #[serde(default = "default_true")]
    pub random_shift: bool,
    #[serde(default)]
    pub categorize_fraction: f64,
    #[serde(default)]
    pub noise: Option<NoiseModel>,
    #[serde(default)]
    pub permute_categories: bool,
    /// Expected number of objectives (checked against the function).
    #[serde(default)]
    pub objectives: Option<usize>,
    /// Divide each metric by its mean magnitude along the diagonal; default
    /// on for multi-objective functions.
    #[serde(default)]
    pub normalize_metrics: Option<bool>,
}

impl BenchmarkSpec {
    pub fn new(function: &str, dimension: usize) -> Self {
        Self {
            name: None,
            function: function.into(),
            dimension,
            shift: None,
            random_shift: true,
            categorize_fraction: 0.0,
            noise: None,
            permute_categories: false,
            objectives: None,
            normalize_metrics: None,
        }
    }

    pub fn id(&self) -> String {
        self.name.clone().unwrap_or_else(|| format!("{}-d{}", self.function, self.dimension))
    }

    pub fn base(&self) -> Result<BaseFunction> {
        self.function.parse()
    }

    pub fn num_categorized(&self) -> usize {
        (self.categorize_fraction * self.dimension as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let base = self.base()?;
        if self.dimension == 0 {
            return Err(Error::Config("benchmark dimension must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.categorize_fraction) {
            return Err(Error::Config("categorize_fraction must lie in [0, 1]".into()));
        }
        if let Some(s) = &self.shift {
            if s.len() != self.dimension || s.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config("shift must be a finite vector of the benchmark dimension".into()));
            }
        }
        if let Some(m) = self.objectives {
            if m != base.num_objectives() {
                return Err(Error::Config(format!(
                    "function {} has {} objectives, benchmark declares {m}",
                    self.function,
                    base.num_objectives()
                )));
            }
        }
        Ok(())
    }

    /// Search space: the first `num_categorized` parameters are categorical
    /// over the grid, the rest are DOUBLE on `[-5, 5]`.
    pub fn search_space(&self) -> Result<SearchSpace> {
        let k = self.num_categorized();
        let labels: Vec<String> = (0..GRID_POINTS).map(|i| i.to_string()).collect();
        let params = (0..self.dimension)
            .map(|i| {
                let name = format!("x{i}");
                if i < k {
                    ParameterConfig::categorical(&name, labels.clone())
                } else {
                    ParameterConfig::double(&name, -DOMAIN, DOMAIN, ScaleType::Linear)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        SearchSpace::new(params)
    }

    pub fn problem(&self) -> Result<ProblemStatement> {
        let m = self.base()?.num_objectives();
        let objectives = (0..m).map(|j| ObjectiveSpec { name: format!("f{j}"), goal: Default::default() }).collect();
        ProblemStatement::new(self.search_space()?, objectives)
    }

    /// Draw the per-repeat randomness (shift, permutations) and build an
    /// evaluable instance.
    pub fn instantiate<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<BenchmarkInstance> {
        self.validate()?;
        let base = self.base()?;
        let shift = match (&self.shift, self.random_shift) {
            (Some(s), _) => s.clone(),
            (None, true) => sample_shift(self.dimension, rng),
            (None, false) => vec![0.0; self.dimension],
        };
        let k = self.num_categorized();
        let permutations = (0..k)
            .map(|_| {
                let mut p: Vec<usize> = (0..GRID_POINTS).collect();
                if self.permute_categories {
                    p.shuffle(rng);
                }
                p
            })
            .collect();
        let mut inst = BenchmarkInstance {
            spec: self.clone(),
            base,
            problem: self.problem()?,
            shift,
            permutations,
            normalizers: vec![1.0; base.num_objectives()],
        };
        if self.normalize_metrics.unwrap_or(base.num_objectives() > 1) {
            let lower = vec![-DOMAIN; self.dimension];
            let upper = vec![DOMAIN; self.dimension];
            inst.normalizers = metric_normalizers(|x| inst.raw(x), &lower, &upper, 100);
        }
        Ok(inst)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub objectives: Vec<f64>,
    pub noiseless: Vec<f64>,
}

/// A benchmark with its per-repeat randomness fixed.
#[derive(Clone, Debug)]
pub struct BenchmarkInstance {
    pub spec: BenchmarkSpec,
    pub base: BaseFunction,
    pub problem: ProblemStatement,
    pub shift: Vec<f64>,
    pub permutations: Vec<Vec<usize>>,
    pub normalizers: Vec<f64>,
}

impl BenchmarkInstance {
    /// Shifted, unnormalized, noiseless objectives at a real point.
    fn raw(&self, x: &[f64]) -> Vec<f64> {
        let z: Vec<f64> = x.iter().zip(&self.shift).map(|(a, c)| a - c).collect();
        self.base.evaluate(&z)
    }

    /// Real-valued point encoded by a parameter assignment.
    pub fn decode(&self, params: &ParameterDict) -> Result<Vec<f64>> {
        let k = self.permutations.len();
        (0..self.spec.dimension)
            .map(|i| {
                let name = format!("x{i}");
                let v = params.get(&name).ok_or_else(|| Error::Validation(format!("missing parameter '{name}'")))?;
                if i < k {
                    let idx: usize = v
                        .as_str()
                        .and_then(|s| s.parse().ok())
                        .filter(|i| *i < GRID_POINTS)
                        .ok_or_else(|| Error::Validation(format!("invalid category for '{name}'")))?;
                    Ok(grid_value(self.permutations[i][idx]))
                } else {
                    v.as_f64().ok_or_else(|| Error::Validation(format!("parameter '{name}' must be numeric")))
                }
            })
            .collect()
    }

    /// Parameter assignment for a real point (categorized coordinates must be
    /// grid values).
    pub fn encode(&self, x: &[f64]) -> Result<ParameterDict> {
        let k = self.permutations.len();
        let mut out = ParameterDict::new();
        for (i, &v) in x.iter().enumerate() {
            let value = if i < k {
                let g = grid_index(v).ok_or_else(|| Error::Validation(format!("{v} is not a grid value")))?;
                let label = invert_permutation(&self.permutations[i])[g];
                ParamValue::Category(label.to_string())
            } else {
                ParamValue::Number(v)
            };
            out.insert(format!("x{i}"), value);
        }
        Ok(out)
    }

    pub fn noiseless_at(&self, x: &[f64]) -> Vec<f64> {
        self.raw(x).iter().zip(&self.normalizers).map(|(v, n)| v / n).collect()
    }

    /// Evaluate a trial's parameters; noise (if any) draws from `rng`.
    pub fn evaluate<R: Rng + ?Sized>(&self, params: &ParameterDict, rng: &mut R) -> Result<Evaluation> {
        let x = self.decode(params)?;
        let raw = self.raw(&x);
        let noisy: Vec<f64> = match self.spec.noise {
            None => raw.clone(),
            Some(model) => raw
                .iter()
                .map(|&f| apply_noise(model, f, self.spec.dimension, &NoiseDraws::sample(rng)))
                .collect(),
        };
        let norm = |v: &[f64]| v.iter().zip(&self.normalizers).map(|(a, n)| a / n).collect::<Vec<f64>>();
        Ok(Evaluation { objectives: norm(&noisy), noiseless: norm(&raw) })
    }
}
