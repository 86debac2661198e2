//! Acquisition functions over feature vectors: trust-region UCB, the
//! UCB / pure-exploration pair used for batches, and hypervolume-scalarized
//! multi-objective UCB.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{GpPosterior, Predictor};
use crate::search_space::FeatureVector;
use crate::special::gamma_half_plus_one;

/// Score assigned just outside the trust region; the distance to the region
/// is subtracted on top so optimizers still see a direction back in.
pub const TRUST_REGION_PENALTY: f64 = -1e12;

const TR_INITIAL_RADIUS: f64 = 0.2;
const TR_MAX_RADIUS: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AcquisitionConfig {
    pub sqrt_beta: f64,
    /// `sqrt(beta)` of the UCB used to define the promising region in PE.
    pub sqrt_beta_e: f64,
    /// Penalty weight for leaving the promising region in PE.
    pub rho: f64,
    /// Probability of using PE even right after a new completion.
    pub q_override: f64,
    pub num_scalarizations: usize,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self { sqrt_beta: 1.8, sqrt_beta_e: 0.5, rho: 10.0, q_override: 0.1, num_scalarizations: 1000 }
    }
}

impl AcquisitionConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.sqrt_beta, self.sqrt_beta_e, self.rho].iter().all(|v| *v > 0.0 && v.is_finite());
        if !positive || self.num_scalarizations == 0 || !(0.0..1.0).contains(&self.q_override) {
            return Err(Error::Config(format!("invalid acquisition config {self:?}")));
        }
        Ok(())
    }
}

/// Radius schedule: grows linearly with the number of completed trials `t`
/// relative to the feature dimension `d`; disabled once it exceeds 0.5.
pub fn trust_region_radius(t: usize, d: usize) -> (f64, bool) {
    let radius = TR_INITIAL_RADIUS + (TR_MAX_RADIUS - TR_INITIAL_RADIUS) * 0.2 * t as f64 / (d as f64 + 1.0);
    (radius, radius <= TR_MAX_RADIUS + 1e-12)
}

/// Union of ℓ∞ balls around trusted points, measured over continuous
/// dimensions only: changing categorical values never leaves the region.
#[derive(Clone, Debug, PartialEq)]
pub struct TrustRegion {
    pub trusted_points: Vec<Vec<f64>>,
    pub radius: f64,
    pub enabled: bool,
}

impl TrustRegion {
    pub fn new(trusted: &[FeatureVector], t: usize, d: usize) -> Self {
        let (radius, enabled) = trust_region_radius(t, d.max(1));
        Self { trusted_points: trusted.iter().map(|f| f.continuous.clone()).collect(), radius, enabled }
    }

    pub fn disabled() -> Self {
        Self { trusted_points: Vec::new(), radius: f64::INFINITY, enabled: false }
    }

    pub fn distance(&self, x: &FeatureVector) -> f64 {
        self.trusted_points
            .iter()
            .map(|p| p.iter().zip(&x.continuous).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, x: &FeatureVector) -> bool {
        !self.enabled || self.distance(x) <= self.radius
    }

    pub fn apply(&self, score: f64, x: &FeatureVector) -> f64 {
        if !self.enabled {
            return score;
        }
        let dist = self.distance(x);
        if dist <= self.radius {
            score
        } else {
            TRUST_REGION_PENALTY - dist
        }
    }
}

pub fn tr_distance(x: &FeatureVector, tr: &TrustRegion) -> f64 {
    tr.distance(x)
}

pub fn apply_trust_region(score: f64, x: &FeatureVector, tr: &TrustRegion) -> f64 {
    tr.apply(score, x)
}

/// `μ(x | D) + sqrt_beta · σ(x | D ∪ U)`, where the predictor carries the
/// pending set `U`.
pub fn ucb(x: &FeatureVector, predictor: &Predictor<'_>, sqrt_beta: f64) -> f64 {
    let (mu, sigma) = predictor.predict(x);
    mu + sqrt_beta * sigma
}

/// `σ(x | D ∪ U) + ρ · min(UCB(x | D, ∅, β_e) − τ, 0)`.
pub fn pe(x: &FeatureVector, predictor: &Predictor<'_>, tau: f64, config: &AcquisitionConfig) -> f64 {
    let sigma_pending = predictor.stddev(x);
    let (mu, sigma) = predictor.posterior().predict(x);
    sigma_pending + config.rho * (mu + config.sqrt_beta_e * sigma - tau).min(0.0)
}

/// Posterior mean at the evaluated-or-pending point with the highest
/// pending-free UCB.
pub fn pe_threshold(
    posterior: &GpPosterior,
    evaluated: &[FeatureVector],
    pending: &[FeatureVector],
    sqrt_beta: f64,
) -> Result<f64> {
    let mut best: Option<(f64, f64)> = None;
    for x in evaluated.iter().chain(pending) {
        let (mu, sigma) = posterior.predict(x);
        let u = mu + sqrt_beta * sigma;
        if best.is_none_or(|(b, _)| u > b) {
            best = Some((u, mu));
        }
    }
    best.map(|(_, mu)| mu).ok_or_else(|| Error::Validation("threshold needs at least one point".into()))
}

/// Sphere-uniform weights restricted to the positive orthant.
pub fn sample_scalarizations<R: Rng + ?Sized>(m: usize, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| loop {
            let g: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(StandardNormal).abs()).collect();
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if g.iter().all(|v| *v > 0.0) && norm > 0.0 {
                break g.into_iter().map(|v| v / norm).collect();
            }
        })
        .collect()
}

/// `(min_m max(0, (y_m − r_m) / w_m))^M`.
pub fn hv_scalarize(y: &[f64], w: &[f64], y_ref: &[f64]) -> f64 {
    let m = y.len();
    let inner = y
        .iter()
        .zip(w)
        .zip(y_ref)
        .map(|((yi, wi), ri)| ((yi - ri) / wi).max(0.0))
        .fold(f64::INFINITY, f64::min);
    if inner.is_finite() {
        inner.powi(m as i32)
    } else {
        0.0
    }
}

/// `π^{M/2} / (2^M Γ(M/2 + 1))`: the positive-orthant share of the unit ball
/// volume, which turns the scalarization mean into a hypervolume.
pub fn hypervolume_constant(m: usize) -> f64 {
    std::f64::consts::PI.powf(m as f64 / 2.0) / (2f64.powi(m as i32) * gamma_half_plus_one(m))
}

/// Hypervolume of `points` above `y_ref` estimated with the given weights.
pub fn approx_hypervolume(points: &[Vec<f64>], y_ref: &[f64], weights: &[Vec<f64>]) -> f64 {
    if points.is_empty() || weights.is_empty() {
        return 0.0;
    }
    let m = y_ref.len();
    let total: f64 = weights
        .iter()
        .map(|w| points.iter().map(|y| hv_scalarize(y, w, y_ref)).fold(0.0, f64::max))
        .sum();
    hypervolume_constant(m) * total / weights.len() as f64
}

/// [`approx_hypervolume`] with `n_weights` weights drawn from `rng`.
pub fn approx_hypervolume_sampled<R: Rng + ?Sized>(
    points: &[Vec<f64>],
    y_ref: &[f64],
    n_weights: usize,
    rng: &mut R,
) -> f64 {
    let weights = sample_scalarizations(y_ref.len(), n_weights, rng);
    approx_hypervolume(points, y_ref, &weights)
}

/// `y_worst − 0.01 (y_best − y_worst)` per metric.
pub fn mo_reference_point(observed: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = observed.first().ok_or_else(|| Error::Validation("reference point needs observations".into()))?;
    Ok((0..first.len())
        .map(|j| {
            let (lo, hi) = observed.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), y| {
                (lo.min(y[j]), hi.max(y[j]))
            });
            lo - 0.01 * (hi - lo)
        })
        .collect())
}

/// Weights and reference point held fixed for one acquisition pass.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarizationSet {
    pub weights: Vec<Vec<f64>>,
    pub reference_point: Vec<f64>,
}

/// Expected scalarized improvement of a per-metric UCB vector over the
/// observed set.
#[derive(Clone, Debug)]
pub struct MoAcquisition {
    scal: ScalarizationSet,
    /// `max_{y ∈ D} s_w(y − y_ref)` per weight row.
    baseline: Vec<f64>,
}

impl MoAcquisition {
    pub fn new(scal: ScalarizationSet, observed: &[Vec<f64>]) -> Self {
        let baseline = scal
            .weights
            .iter()
            .map(|w| observed.iter().map(|y| hv_scalarize(y, w, &scal.reference_point)).fold(0.0, f64::max))
            .collect();
        Self { scal, baseline }
    }

    pub fn scalarizations(&self) -> &ScalarizationSet {
        &self.scal
    }

    pub fn score(&self, ucb_vector: &[f64]) -> f64 {
        let total: f64 = self
            .scal
            .weights
            .iter()
            .zip(&self.baseline)
            .map(|(w, b)| (hv_scalarize(ucb_vector, w, &self.scal.reference_point) - b).max(0.0))
            .sum();
        total / self.scal.weights.len() as f64
    }
}

/// Multi-objective acquisition at `x` from per-metric predictors.
pub fn mo_acquisition(
    x: &FeatureVector,
    predictors: &[Predictor<'_>],
    acquisition: &MoAcquisition,
    sqrt_beta: f64,
) -> f64 {
    let u: Vec<f64> = predictors.iter().map(|p| ucb(x, p, sqrt_beta)).collect();
    acquisition.score(&u)
}
