//! Matern-5/2 ARD Gaussian process over mixed continuous/categorical
//! features.
//!
//! Hyperparameters are log-amplitude, per-dimension log squared length
//! scales (one per categorical parameter) and log noise. Each has a
//! truncated normal prior; the MAP estimate maximizes the log prior plus the
//! GP log marginal likelihood with a box-constrained quasi-Newton method.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lbfgsb::{self, LbfgsbConfig};
use crate::search_space::FeatureVector;
use crate::special::normal_cdf;

/// Whether `exp(epsilon_log)` is the observation noise variance (true) or its
/// standard deviation (false, variance `exp(2 epsilon_log)`).
pub const NOISE_IS_VARIANCE: bool = true;

/// Diagonal jitter relative to the kernel variance α², escalated by ×10 on
/// Cholesky failure up to [`MAX_JITTER`].
pub const BASE_JITTER: f64 = 1e-10;
pub const MAX_JITTER: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpHyperparameters {
    pub alpha_log: f64,
    /// Log squared length scales: continuous dimensions first, then one per
    /// categorical parameter.
    pub lambda_log: Vec<f64>,
    pub epsilon_log: f64,
}

impl GpHyperparameters {
    pub fn amplitude(&self) -> f64 {
        self.alpha_log.exp()
    }

    pub fn noise_variance(&self) -> f64 {
        noise_variance(self.epsilon_log)
    }

    /// Flatten as `[alpha_log, lambda_log.., epsilon_log]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.lambda_log.len() + 2);
        v.push(self.alpha_log);
        v.extend_from_slice(&self.lambda_log);
        v.push(self.epsilon_log);
        v
    }

    pub fn from_slice(v: &[f64]) -> Self {
        let n = v.len();
        Self { alpha_log: v[0], lambda_log: v[1..n - 1].to_vec(), epsilon_log: v[n - 1] }
    }
}

fn noise_variance(epsilon_log: f64) -> f64 {
    if NOISE_IS_VARIANCE {
        epsilon_log.exp()
    } else {
        (2.0 * epsilon_log).exp()
    }
}

fn noise_variance_derivative(epsilon_log: f64) -> f64 {
    if NOISE_IS_VARIANCE {
        epsilon_log.exp()
    } else {
        2.0 * (2.0 * epsilon_log).exp()
    }
}

/// Normal distribution with given mean and variance, truncated to
/// `[lower, upper]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncatedNormal {
    pub mean: f64,
    pub variance: f64,
    pub lower: f64,
    pub upper: f64,
}

impl TruncatedNormal {
    pub const fn new(mean: f64, variance: f64, lower: f64, upper: f64) -> Self {
        Self { mean, variance, lower, upper }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower && x <= self.upper
    }

    /// Log density; `-inf` outside the support.
    pub fn log_pdf(&self, x: f64) -> f64 {
        if !self.contains(x) {
            return f64::NEG_INFINITY;
        }
        let sd = self.variance.sqrt();
        let mass = normal_cdf((self.upper - self.mean) / sd) - normal_cdf((self.lower - self.mean) / sd);
        -0.5 * (x - self.mean).powi(2) / self.variance
            - 0.5 * (2.0 * std::f64::consts::PI * self.variance).ln()
            - mass.ln()
    }

    pub fn d_log_pdf(&self, x: f64) -> f64 {
        -(x - self.mean) / self.variance
    }

    pub fn clamp_mean(&self) -> f64 {
        self.mean.clamp(self.lower, self.upper)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub alpha_log: TruncatedNormal,
    /// Shared by every length-scale dimension.
    pub lambda_log: TruncatedNormal,
    pub epsilon_log: TruncatedNormal,
}

impl Default for PriorSpec {
    fn default() -> Self {
        Self {
            alpha_log: TruncatedNormal::new(0.039f64.ln(), 50.0, -3.0, 1.0),
            lambda_log: TruncatedNormal::new(0.5f64.ln(), 50.0, -2.0, 1.0),
            epsilon_log: TruncatedNormal::new(0.0039f64.ln(), 50.0, -10.0, 0.0),
        }
    }
}

impl PriorSpec {
    /// Lower and upper bounds of the flattened hyperparameter vector.
    pub fn bounds(&self, dims: usize) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![self.alpha_log.lower];
        let mut hi = vec![self.alpha_log.upper];
        lo.extend(std::iter::repeat_n(self.lambda_log.lower, dims));
        hi.extend(std::iter::repeat_n(self.lambda_log.upper, dims));
        lo.push(self.epsilon_log.lower);
        hi.push(self.epsilon_log.upper);
        (lo, hi)
    }

    pub fn contains(&self, h: &GpHyperparameters) -> bool {
        self.alpha_log.contains(h.alpha_log)
            && h.lambda_log.iter().all(|&l| self.lambda_log.contains(l))
            && self.epsilon_log.contains(h.epsilon_log)
    }

    pub fn log_prior(&self, h: &GpHyperparameters) -> f64 {
        self.alpha_log.log_pdf(h.alpha_log)
            + h.lambda_log.iter().map(|&l| self.lambda_log.log_pdf(l)).sum::<f64>()
            + self.epsilon_log.log_pdf(h.epsilon_log)
    }

    /// Prior means clamped into the truncation supports.
    pub fn clamped_means(&self, dims: usize) -> GpHyperparameters {
        GpHyperparameters {
            alpha_log: self.alpha_log.clamp_mean(),
            lambda_log: vec![self.lambda_log.clamp_mean(); dims],
            epsilon_log: self.epsilon_log.clamp_mean(),
        }
    }

    /// Uniform sample over the truncation box.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, dims: usize, rng: &mut R) -> GpHyperparameters {
        let mut u = |p: &TruncatedNormal| p.lower + (p.upper - p.lower) * rng.random::<f64>();
        GpHyperparameters {
            alpha_log: u(&self.alpha_log),
            lambda_log: (0..dims).map(|_| u(&self.lambda_log)).collect(),
            epsilon_log: u(&self.epsilon_log),
        }
    }
}

/// Preprocessed training data: features plus warped objectives.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WarpedDataset {
    pub features: Vec<FeatureVector>,
    pub targets: Vec<f64>,
}

impl WarpedDataset {
    pub fn new(features: Vec<FeatureVector>, targets: Vec<f64>) -> Result<Self> {
        if features.len() != targets.len() {
            return Err(Error::Validation("feature and target counts differ".into()));
        }
        if let Some(first) = features.first() {
            let shape = (first.continuous.len(), first.categorical.len());
            if features.iter().any(|f| (f.continuous.len(), f.categorical.len()) != shape) {
                return Err(Error::Validation("inconsistent feature dimensions".into()));
            }
        }
        Ok(Self { features, targets })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

/// `5 Σ_d (x_i - x_j)² / λ_d` over continuous dimensions plus
/// `5 Σ_c 1(x_i ≠ x_j) / λ_c` over categorical ones.
pub fn scaled_distance_sq(a: &FeatureVector, b: &FeatureVector, lambda_log: &[f64]) -> f64 {
    let nc = a.continuous.len();
    let cont: f64 = a
        .continuous
        .iter()
        .zip(&b.continuous)
        .zip(lambda_log)
        .map(|((x, y), l)| (x - y).powi(2) / l.exp())
        .sum();
    let cat: f64 = a
        .categorical
        .iter()
        .zip(&b.categorical)
        .zip(&lambda_log[nc..])
        .map(|((x, y), l)| if x != y { 1.0 / l.exp() } else { 0.0 })
        .sum();
    5.0 * (cont + cat)
}

fn matern_shape(delta: f64) -> f64 {
    (1.0 + delta + delta * delta / 3.0) * (-delta).exp()
}

/// `α² (1 + δ + δ²/3) exp(-δ)` with `δ = sqrt(scaled_distance_sq)`.
pub fn matern52(a: &FeatureVector, b: &FeatureVector, hyper: &GpHyperparameters) -> f64 {
    let delta = scaled_distance_sq(a, b, &hyper.lambda_log).sqrt();
    (2.0 * hyper.alpha_log).exp() * matern_shape(delta)
}

/// Kernel with precomputed `5 / λ` weights.
#[derive(Clone, Debug)]
struct Kernel {
    amp_sq: f64,
    weights: Vec<f64>,
    n_cont: usize,
}

impl Kernel {
    fn new(hyper: &GpHyperparameters, n_cont: usize) -> Self {
        Self {
            amp_sq: (2.0 * hyper.alpha_log).exp(),
            weights: hyper.lambda_log.iter().map(|l| 5.0 * (-l).exp()).collect(),
            n_cont,
        }
    }

    #[inline]
    fn dist_sq(&self, a: &FeatureVector, b: &FeatureVector) -> f64 {
        let mut s = 0.0;
        for ((x, y), w) in a.continuous.iter().zip(&b.continuous).zip(&self.weights) {
            let d = x - y;
            s += w * d * d;
        }
        for ((x, y), w) in a.categorical.iter().zip(&b.categorical).zip(&self.weights[self.n_cont..]) {
            if x != y {
                s += w;
            }
        }
        s
    }

    #[inline]
    fn eval(&self, a: &FeatureVector, b: &FeatureVector) -> f64 {
        self.amp_sq * matern_shape(self.dist_sq(a, b).sqrt())
    }
}

/// Lower-triangular Cholesky factor stored row-major.
#[derive(Clone, Debug)]
struct CholFactor {
    n: usize,
    l: Vec<f64>,
    jitter: f64,
}

impl CholFactor {
    /// Factor `K + (noise + jitter α²) I`, escalating jitter as needed.
    fn build(gram: &DMatrix<f64>, noise: f64, amp_sq: f64) -> Result<Self> {
        let n = gram.nrows();
        let mut jitter = BASE_JITTER;
        loop {
            let mut m = gram.clone();
            for i in 0..n {
                m[(i, i)] += noise + jitter * amp_sq;
            }
            if let Some(ch) = m.cholesky() {
                let lm = ch.l();
                let mut l = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..=i {
                        l[i * n + j] = lm[(i, j)];
                    }
                }
                return Ok(Self { n, l, jitter });
            }
            jitter *= 10.0;
            if jitter > MAX_JITTER * (1.0 + 1e-9) {
                return Err(Error::Model("kernel matrix is not positive definite after maximum jitter".into()));
            }
        }
    }

    /// Solve `L v = b`.
    fn forward(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            let s: f64 = row.iter().zip(&b[..i]).map(|(l, v)| l * v).sum();
            b[i] = (b[i] - s) / self.l[i * n + i];
        }
    }

    /// Solve `Lᵀ v = b`.
    fn backward(&self, b: &mut [f64]) {
        let n = self.n;
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..n {
                s -= self.l[k * n + i] * b[k];
            }
            b[i] = s / self.l[i * n + i];
        }
    }

    fn solve(&self, b: &mut [f64]) {
        self.forward(b);
        self.backward(b);
    }

    fn log_det(&self) -> f64 {
        2.0 * (0..self.n).map(|i| self.l[i * self.n + i].ln()).sum::<f64>()
    }
}

fn gram(kernel: &Kernel, xs: &[FeatureVector]) -> DMatrix<f64> {
    let n = xs.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = kernel.eval(&xs[i], &xs[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

fn feature_dims(data: &WarpedDataset) -> Option<(usize, usize)> {
    data.features.first().map(|f| (f.continuous.len(), f.categorical.len()))
}

fn check_dims(data: &WarpedDataset, hyper: &GpHyperparameters) -> Result<usize> {
    match feature_dims(data) {
        Some((nc, nk)) if nc + nk != hyper.lambda_log.len() => Err(Error::Validation(format!(
            "hyperparameters have {} length scales but features have {} dimensions",
            hyper.lambda_log.len(),
            nc + nk
        ))),
        Some((nc, _)) => Ok(nc),
        None => Ok(0),
    }
}

/// Joint log probability: log priors plus GP log marginal likelihood.
/// Returns `-inf` outside the prior supports or on numerical failure.
pub fn log_joint(data: &WarpedDataset, hyper: &GpHyperparameters, priors: &PriorSpec) -> f64 {
    log_joint_and_gradient(data, hyper, priors, false).map(|(v, _)| v).unwrap_or(f64::NEG_INFINITY)
}

/// Value and analytic gradient (w.r.t. the flattened hyperparameter vector)
/// of [`log_joint`].
pub fn log_joint_with_gradient(
    data: &WarpedDataset,
    hyper: &GpHyperparameters,
    priors: &PriorSpec,
) -> Result<(f64, Vec<f64>)> {
    log_joint_and_gradient(data, hyper, priors, true)
}

fn log_joint_and_gradient(
    data: &WarpedDataset,
    hyper: &GpHyperparameters,
    priors: &PriorSpec,
    with_gradient: bool,
) -> Result<(f64, Vec<f64>)> {
    let n_cont = check_dims(data, hyper)?;
    if !priors.contains(hyper) {
        return Ok((f64::NEG_INFINITY, vec![0.0; hyper.lambda_log.len() + 2]));
    }
    let dims = hyper.lambda_log.len();
    let mut value = priors.log_prior(hyper);
    let mut grad = vec![0.0; dims + 2];
    grad[0] = priors.alpha_log.d_log_pdf(hyper.alpha_log);
    for (g, &l) in grad[1..=dims].iter_mut().zip(&hyper.lambda_log) {
        *g = priors.lambda_log.d_log_pdf(l);
    }
    grad[dims + 1] = priors.epsilon_log.d_log_pdf(hyper.epsilon_log);

    let t = data.len();
    if t == 0 {
        return Ok((value, grad));
    }
    let kernel = Kernel::new(hyper, n_cont);
    let k = gram(&kernel, &data.features);
    let noise = noise_variance(hyper.epsilon_log);
    let chol = CholFactor::build(&k, noise, kernel.amp_sq)?;
    let mut a = data.targets.clone();
    chol.solve(&mut a);
    let quad: f64 = a.iter().zip(&data.targets).map(|(x, y)| x * y).sum();
    value += -0.5 * quad - 0.5 * chol.log_det() - 0.5 * t as f64 * (2.0 * std::f64::consts::PI).ln();

    if !with_gradient {
        return Ok((value, grad));
    }

    // W = a aᵀ - K⁻¹; dL/dθ = ½ tr(W dK/dθ).
    let mut w = vec![0.0; t * t];
    let mut col = vec![0.0; t];
    for j in 0..t {
        col.iter_mut().for_each(|c| *c = 0.0);
        col[j] = 1.0;
        chol.solve(&mut col);
        for i in 0..t {
            w[i * t + j] = a[i] * a[j] - col[i];
        }
    }

    let mut g_alpha = 0.0;
    let mut g_lambda = vec![0.0; dims];
    let mut trace_w = 0.0;
    for i in 0..t {
        trace_w += w[i * t + i];
        for j in 0..t {
            let wij = w[i * t + j];
            let xi = &data.features[i];
            let xj = &data.features[j];
            let delta = kernel.dist_sq(xi, xj).sqrt();
            let shape = matern_shape(delta);
            g_alpha += wij * 2.0 * kernel.amp_sq * shape;
            if i == j {
                continue;
            }
            // dK/dλ_log_d = α² (1 + δ) e^{-δ} (5 r_d² / λ_d) / 6
            let common = wij * kernel.amp_sq * (1.0 + delta) * (-delta).exp() / 6.0;
            for d in 0..n_cont {
                let r = xi.continuous[d] - xj.continuous[d];
                g_lambda[d] += common * kernel.weights[d] * r * r;
            }
            for c in 0..xi.categorical.len() {
                if xi.categorical[c] != xj.categorical[c] {
                    g_lambda[n_cont + c] += common * kernel.weights[n_cont + c];
                }
            }
        }
    }
    // Jitter scales with α² as well.
    g_alpha += trace_w * 2.0 * chol.jitter * kernel.amp_sq;
    grad[0] += 0.5 * g_alpha;
    for (g, gl) in grad[1..=dims].iter_mut().zip(&g_lambda) {
        *g += 0.5 * gl;
    }
    grad[dims + 1] += 0.5 * trace_w * noise_variance_derivative(hyper.epsilon_log);
    Ok((value, grad))
}

#[derive(Clone, Debug)]
pub struct FitConfig {
    pub restarts: usize,
    pub optimizer: LbfgsbConfig,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { restarts: 4, optimizer: LbfgsbConfig { max_iterations: 50, max_line_search: 20, ..Default::default() } }
    }
}

#[derive(Clone, Debug)]
pub struct FitResult {
    pub hyper: GpHyperparameters,
    pub log_joint: f64,
    /// Log joint at each random initialization (diagnostics).
    pub initial_log_joints: Vec<f64>,
    /// Set when every restart failed and the prior means were returned.
    pub fallback: bool,
}

/// MAP estimate of the hyperparameters from uniformly sampled restarts.
pub fn fit_map<R: Rng + ?Sized>(
    data: &WarpedDataset,
    priors: &PriorSpec,
    rng: &mut R,
    config: &FitConfig,
) -> Result<FitResult> {
    let dims = feature_dims(data).map(|(a, b)| a + b).ok_or_else(|| {
        Error::Validation("cannot fit hyperparameters without data".into())
    })?;
    let (lower, upper) = priors.bounds(dims);
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut initial = Vec::with_capacity(config.restarts);
    for _ in 0..config.restarts.max(1) {
        let x0 = priors.sample_uniform(dims, rng).to_vec();
        let neg = |x: &[f64]| match log_joint_with_gradient(data, &GpHyperparameters::from_slice(x), priors) {
            Ok((v, g)) if v.is_finite() && g.iter().all(|gi| gi.is_finite()) => {
                (-v, g.into_iter().map(|gi| -gi).collect())
            }
            _ => (f64::INFINITY, vec![0.0; x.len()]),
        };
        let start = -neg(&x0).0;
        initial.push(start);
        let res = lbfgsb::minimize(neg, &x0, &lower, &upper, &config.optimizer);
        let value = -res.f;
        if value.is_finite() && best.as_ref().is_none_or(|(_, b)| value > *b) {
            best = Some((res.x, value));
        }
    }
    Ok(match best {
        Some((x, v)) => FitResult { hyper: GpHyperparameters::from_slice(&x), log_joint: v, initial_log_joints: initial, fallback: false },
        None => {
            log::warn!("all hyperparameter restarts failed; using prior means");
            let hyper = priors.clamped_means(dims);
            let v = log_joint(data, &hyper, priors);
            FitResult { hyper, log_joint: v, initial_log_joints: initial, fallback: true }
        }
    })
}

/// GP conditioned on a dataset under fixed hyperparameters.
#[derive(Clone, Debug)]
pub struct GpPosterior {
    hyper: GpHyperparameters,
    kernel: Kernel,
    features: Vec<FeatureVector>,
    chol: CholFactor,
    /// `(K + σ²I)⁻¹ y`
    weights: Vec<f64>,
    noise: f64,
}

impl GpPosterior {
    pub fn new(data: &WarpedDataset, hyper: &GpHyperparameters) -> Result<Self> {
        let n_cont = check_dims(data, hyper)?;
        let kernel = Kernel::new(hyper, n_cont);
        let noise = hyper.noise_variance();
        let chol = CholFactor::build(&gram(&kernel, &data.features), noise, kernel.amp_sq)?;
        let mut weights = data.targets.clone();
        chol.solve(&mut weights);
        Ok(Self { hyper: hyper.clone(), kernel, features: data.features.clone(), chol, weights, noise })
    }

    /// Prior GP over `n_cont` continuous and `n_cat` categorical dimensions.
    pub fn prior(hyper: &GpHyperparameters, n_cont: usize) -> Self {
        let kernel = Kernel::new(hyper, n_cont);
        let chol = CholFactor { n: 0, l: Vec::new(), jitter: BASE_JITTER };
        Self { hyper: hyper.clone(), kernel, features: Vec::new(), chol, weights: Vec::new(), noise: hyper.noise_variance() }
    }

    pub fn hyperparameters(&self) -> &GpHyperparameters {
        &self.hyper
    }

    pub fn num_observations(&self) -> usize {
        self.features.len()
    }

    pub fn mean(&self, x: &FeatureVector) -> f64 {
        self.features.iter().zip(&self.weights).map(|(f, w)| w * self.kernel.eval(f, x)).sum()
    }

    /// Posterior mean and standard deviation of the latent function.
    pub fn predict(&self, x: &FeatureVector) -> (f64, f64) {
        let mut k: Vec<f64> = self.features.iter().map(|f| self.kernel.eval(f, x)).collect();
        let mean = k.iter().zip(&self.weights).map(|(a, b)| a * b).sum();
        self.chol.forward(&mut k);
        let var = self.kernel.amp_sq - k.iter().map(|v| v * v).sum::<f64>();
        (mean, var.max(0.0).sqrt())
    }

    /// Predictor whose variance additionally conditions on `pending` points
    /// (observed with dummy zero targets); the mean is unchanged.
    pub fn with_pending(&self, pending: &[FeatureVector]) -> Result<Predictor<'_>> {
        if pending.is_empty() {
            return Ok(Predictor { posterior: self, variance: None });
        }
        let mut points = self.features.clone();
        points.extend_from_slice(pending);
        let chol = CholFactor::build(&gram(&self.kernel, &points), self.noise, self.kernel.amp_sq)?;
        Ok(Predictor { posterior: self, variance: Some((points, chol)) })
    }
}

/// Mean from evaluated data, stddev from evaluated plus pending points.
#[derive(Clone, Debug)]
pub struct Predictor<'a> {
    posterior: &'a GpPosterior,
    variance: Option<(Vec<FeatureVector>, CholFactor)>,
}

impl Predictor<'_> {
    pub fn posterior(&self) -> &GpPosterior {
        self.posterior
    }

    pub fn predict(&self, x: &FeatureVector) -> (f64, f64) {
        match &self.variance {
            None => self.posterior.predict(x),
            Some((points, chol)) => {
                let kernel = &self.posterior.kernel;
                let mut k: Vec<f64> = points.iter().map(|f| kernel.eval(f, x)).collect();
                let n = self.posterior.weights.len();
                let mean = k[..n].iter().zip(&self.posterior.weights).map(|(a, b)| a * b).sum();
                chol.forward(&mut k);
                let var = kernel.amp_sq - k.iter().map(|v| v * v).sum::<f64>();
                (mean, var.max(0.0).sqrt())
            }
        }
    }

    pub fn stddev(&self, x: &FeatureVector) -> f64 {
        self.predict(x).1
    }
}

/// Predict means (conditioned on evaluated data only) and standard deviations
/// (conditioned additionally on `extra_variance_points`).
pub fn predict_batch(
    posterior: &GpPosterior,
    queries: &[FeatureVector],
    extra_variance_points: &[FeatureVector],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let predictor = posterior.with_pending(extra_variance_points)?;
    Ok(queries.iter().map(|q| predictor.predict(q)).unzip())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fv(c: &[f64], k: &[usize]) -> FeatureVector {
        FeatureVector::new(c.to_vec(), k.to_vec())
    }

    fn hyper(alpha: f64, lambda: &[f64], eps: f64) -> GpHyperparameters {
        GpHyperparameters { alpha_log: alpha, lambda_log: lambda.to_vec(), epsilon_log: eps }
    }

    #[test]
    fn distance_examples() {
        let a = fv(&[0.3, 0.7], &[]);
        assert_eq!(scaled_distance_sq(&a, &a, &[0.0, 0.0]), 0.0);
        let b = fv(&[0.4, 0.9], &[]);
        assert!((scaled_distance_sq(&a, &b, &[0.0, 0.0]) - 0.25).abs() < 1e-12);
        let c1 = fv(&[], &[0]);
        let c2 = fv(&[], &[2]);
        assert_eq!(scaled_distance_sq(&c1, &c2, &[0.0]), 5.0);
    }

    #[test]
    fn matern_examples() {
        let a = fv(&[0.2], &[]);
        let h = hyper(0.5, &[0.0], -5.0);
        assert!((matern52(&a, &a, &h) - 1.0f64.exp()).abs() < 1e-12);
        // δ = 1 when 5 r² = 1
        let b = fv(&[0.2 + (0.2f64).sqrt()], &[]);
        let unit = hyper(0.0, &[0.0], -5.0);
        assert!((matern52(&a, &b, &unit) - 7.0 / 3.0 * (-1.0f64).exp()).abs() < 1e-12);
        assert!((matern52(&a, &b, &unit) - 0.858_385).abs() < 1e-6);
        let far = fv(&[0.2 + (20.0f64).sqrt()], &[]);
        assert!(matern52(&a, &far, &unit) < matern52(&a, &b, &unit));
    }

    #[test]
    fn log_joint_outside_support_is_neg_inf() {
        let data = WarpedDataset::new(vec![fv(&[0.5], &[])], vec![0.0]).unwrap();
        let p = PriorSpec::default();
        assert!(log_joint(&data, &hyper(1.0, &[0.0], -1.0), &p).is_finite());
        assert_eq!(log_joint(&data, &hyper(1.0 + 1e-9, &[0.0], -1.0), &p), f64::NEG_INFINITY);
        assert_eq!(log_joint(&data, &hyper(0.0, &[-2.1], -1.0), &p), f64::NEG_INFINITY);
        assert_eq!(log_joint(&data, &hyper(0.0, &[0.0], 0.01), &p), f64::NEG_INFINITY);
    }

    #[test]
    fn single_point_marginal_likelihood() {
        let p = PriorSpec::default();
        let h = hyper(-0.5, &[0.3], -2.0);
        let data = WarpedDataset::new(vec![fv(&[0.5], &[])], vec![0.0]).unwrap();
        let var = (-1.0f64).exp() * (1.0 + BASE_JITTER) + (-2.0f64).exp();
        let expected = -0.5 * (2.0 * std::f64::consts::PI * var).ln();
        let got = log_joint(&data, &h, &p) - p.log_prior(&h);
        assert!((got - expected).abs() < 1e-12, "{got} {expected}");
    }

    #[test]
    fn empty_posterior_is_prior() {
        let h = hyper(0.3, &[0.0, 0.0], -3.0);
        let post = GpPosterior::new(&WarpedDataset::default(), &h).unwrap();
        let (m, s) = post.predict(&fv(&[0.1, 0.9], &[]));
        assert_eq!(m, 0.0);
        assert!((s - 0.3f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn near_noiseless_interpolation() {
        let h = hyper(0.0, &[0.0], -10.0);
        let x = fv(&[0.4], &[]);
        let data = WarpedDataset::new(vec![x.clone()], vec![0.7]).unwrap();
        let post = GpPosterior::new(&data, &h).unwrap();
        let expected = 0.7 / (1.0 + (-10.0f64).exp());
        assert!((post.mean(&x) - expected).abs() < 1e-9);
        assert!((post.mean(&x) - 0.7).abs() < 1e-3);
        let (m, s) = post.predict(&fv(&[0.4 + 30.0], &[]));
        assert!(m.abs() < 1e-9 && (s - 1.0).abs() < 1e-9);
    }

    #[test]
    fn pending_points_only_shrink_variance() {
        let h = hyper(0.0, &[-1.0], -6.0);
        let data = WarpedDataset::new(vec![fv(&[0.1], &[]), fv(&[0.9], &[])], vec![0.5, -0.5]).unwrap();
        let post = GpPosterior::new(&data, &h).unwrap();
        let q = fv(&[0.5], &[]);
        let (m0, s0) = post.predict(&q);
        let (ms, ss) = predict_batch(&post, std::slice::from_ref(&q), &[]).unwrap();
        assert_eq!((ms[0], ss[0]), (m0, s0));
        let (ms, ss) = predict_batch(&post, std::slice::from_ref(&q), std::slice::from_ref(&q)).unwrap();
        assert_eq!(ms[0], m0);
        assert!(ss[0] < s0);
    }

    #[test]
    fn fit_map_improves_on_every_start() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let xs: Vec<FeatureVector> =
            (0..12).map(|_| fv(&[rng.random(), rng.random()], &[rng.random_range(0..3)])).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (6.0 * x.continuous[0]).sin() + 0.1 * x.categorical[0] as f64).collect();
        let data = WarpedDataset::new(xs, ys).unwrap();
        let r = fit_map(&data, &PriorSpec::default(), &mut rng, &FitConfig::default()).unwrap();
        assert!(!r.fallback);
        assert!(PriorSpec::default().contains(&r.hyper));
        for v in &r.initial_log_joints {
            assert!(r.log_joint >= *v);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let xs: Vec<FeatureVector> =
            (0..7).map(|_| fv(&[rng.random(), rng.random()], &[rng.random_range(0..2)])).collect();
        let ys: Vec<f64> = (0..7).map(|_| rng.random::<f64>() - 0.5).collect();
        let data = WarpedDataset::new(xs, ys).unwrap();
        let p = PriorSpec::default();
        let h = hyper(-0.4, &[-0.7, 0.2, -1.1], -3.0);
        let (_, g) = log_joint_with_gradient(&data, &h, &p).unwrap();
        let x = h.to_vec();
        for i in 0..x.len() {
            let eps = 1e-6;
            let mut up = x.clone();
            let mut dn = x.clone();
            up[i] += eps;
            dn[i] -= eps;
            let fd = (log_joint(&data, &GpHyperparameters::from_slice(&up), &p)
                - log_joint(&data, &GpHyperparameters::from_slice(&dn), &p))
                / (2.0 * eps);
            assert!((fd - g[i]).abs() < 1e-5 * (1.0 + fd.abs()), "dim {i}: fd {fd} analytic {}", g[i]);
        }
    }

    #[test]
    fn fit_single_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data = WarpedDataset::new(vec![fv(&[0.5], &[])], vec![0.0]).unwrap();
        let r = fit_map(&data, &PriorSpec::default(), &mut rng, &FitConfig::default()).unwrap();
        assert!(PriorSpec::default().contains(&r.hyper));
        assert!(r.log_joint.is_finite());
    }
}
