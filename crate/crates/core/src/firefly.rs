//! Vectorized firefly optimizer for acquisition maximization over mixed
//! spaces.
//!
//! Fireflies live in a relaxed feature space: continuous coordinates in
//! `[0, 1]` and one-hot blocks for categorical parameters. Each sweep moves
//! the pool batch by batch: every batch member is pulled toward brighter
//! pool members, pushed (weakly) away from dimmer ones, and perturbed with
//! Laplace noise. Positions are rounded to feasible points before scoring.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::search_space::{FeatureVector, SearchSpace};
use crate::special::sample_laplace;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FireflyConfig {
    pub max_evaluations: usize,
    pub batch_size: usize,
    /// Attraction decay; `None` means `4.5 / D` for feature dimension `D`.
    pub gamma: Option<f64>,
    pub eta_attract: f64,
    pub eta_repel: f64,
    pub omega_continuous: f64,
    /// `None` means 1.0, or 30.0 when every parameter is categorical.
    pub omega_categorical: Option<f64>,
    pub unsuccessful_shrink: f64,
    pub keep_probability: f64,
    /// A firefly failing to improve more than this many times in a row is
    /// replaced by a random one.
    pub trapped_after: usize,
}

impl Default for FireflyConfig {
    fn default() -> Self {
        Self {
            max_evaluations: 75_000,
            batch_size: 25,
            gamma: None,
            eta_attract: 1.5,
            eta_repel: 0.008,
            omega_continuous: 0.16,
            omega_categorical: None,
            unsuccessful_shrink: 0.7,
            keep_probability: 0.96,
            trapped_after: 5,
        }
    }
}

impl FireflyConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.batch_size > 0
            && self.gamma.is_none_or(|g| g > 0.0)
            && self.eta_attract >= 0.0
            && self.eta_repel >= 0.0
            && self.omega_continuous >= 0.0
            && self.omega_categorical.is_none_or(|w| w >= 0.0)
            && self.unsuccessful_shrink > 0.0
            && self.keep_probability > 0.0
            && self.keep_probability <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid firefly config {self:?}")))
        }
    }
}

/// `min(10 + D/2 + D^1.2, 100)` rounded up to a multiple of the batch size.
pub fn pool_size(feature_dim: usize, batch_size: usize) -> usize {
    let d = feature_dim as f64;
    let raw = (10.0 + 0.5 * d + d.powf(1.2)).min(100.0);
    let batches = (raw / batch_size as f64).ceil().max(1.0) as usize;
    batches * batch_size
}

/// Layout of the relaxed feature rows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RowLayout {
    pub num_continuous: usize,
    pub category_sizes: Vec<usize>,
}

impl RowLayout {
    pub fn new(space: &SearchSpace) -> Self {
        Self { num_continuous: space.num_continuous(), category_sizes: space.category_sizes() }
    }

    pub fn width(&self) -> usize {
        self.num_continuous + self.category_sizes.iter().sum::<usize>()
    }

    pub fn encode(&self, f: &FeatureVector) -> Vec<f64> {
        let mut row = f.continuous.clone();
        for (&c, &n) in f.categorical.iter().zip(&self.category_sizes) {
            row.extend((0..n).map(|i| if i == c { 1.0 } else { 0.0 }));
        }
        row
    }
}

/// One batch update. Each batch row moves by
/// `(1/P) Σ_j η_j exp(-γ r²) (x_j − x)` over pool rows `j` (attracting when
/// `x_j` scores higher, repelling when lower) plus Laplace noise with
/// per-dimension scale `omegas[d] · scales[i]`.
#[allow(clippy::too_many_arguments)]
pub fn vectorized_update<R: Rng + ?Sized>(
    batch: &[Vec<f64>],
    batch_scores: &[f64],
    scales: &[f64],
    pool: &[Vec<f64>],
    pool_scores: &[f64],
    gamma: f64,
    eta_attract: f64,
    eta_repel: f64,
    omegas: &[f64],
    rng: &mut R,
) -> Vec<Vec<f64>> {
    let p = pool.len() as f64;
    batch
        .iter()
        .zip(batch_scores)
        .zip(scales)
        .map(|((x, &sx), &scale)| {
            let mut force = vec![0.0; x.len()];
            for (y, &sy) in pool.iter().zip(pool_scores) {
                let eta = if sy > sx {
                    eta_attract
                } else if sy < sx {
                    -eta_repel
                } else {
                    continue;
                };
                let r2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                let k = eta * (-gamma * r2).exp() / p;
                for ((f, a), b) in force.iter_mut().zip(x).zip(y) {
                    *f += k * (b - a);
                }
            }
            x.iter()
                .zip(&force)
                .zip(omegas)
                .map(|((a, f), w)| {
                    let noise = if *w > 0.0 { sample_laplace(rng, w * scale) } else { 0.0 };
                    (a + f + noise).clamp(0.0, 1.0)
                })
                .collect()
        })
        .collect()
}

/// Round a relaxed row to a feasible feature vector: snap INTEGER/DISCRETE
/// coordinates and sample each one-hot block as an unnormalized categorical
/// distribution (uniform if the block is all zero).
pub fn round_to_feasible<R: Rng + ?Sized>(row: &[f64], space: &SearchSpace, layout: &RowLayout, rng: &mut R) -> FeatureVector {
    let nc = layout.num_continuous;
    let mut f = FeatureVector {
        continuous: row[..nc].iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        categorical: Vec::with_capacity(layout.category_sizes.len()),
    };
    let mut offset = nc;
    for &n in &layout.category_sizes {
        let block = &row[offset..offset + n];
        offset += n;
        let total: f64 = block.iter().map(|v| v.max(0.0)).sum();
        let idx = if total <= 0.0 {
            rng.random_range(0..n)
        } else {
            let mut u = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, v) in block.iter().enumerate() {
                let w = v.max(0.0);
                if w > 0.0 && u < w {
                    chosen = i;
                    break;
                }
                u -= w;
            }
            // Guard against rounding leaving u just past the last positive weight.
            if block[chosen] <= 0.0 {
                chosen = block.iter().rposition(|v| *v > 0.0).unwrap_or(chosen);
            }
            chosen
        };
        f.categorical.push(idx);
    }
    space.snap_features(&mut f);
    f
}

#[derive(Clone, Debug)]
pub struct FireflyResult {
    pub best: FeatureVector,
    pub best_score: f64,
    pub evaluations: usize,
    pub sweeps: usize,
    /// Best score after the initial pool and after every sweep.
    pub best_history: Vec<f64>,
}

/// Pool seeding: warm-start points are placed first, then `initial_pool`
/// points, then uniformly random feasible points fill the rest.
#[derive(Clone, Debug, Default)]
pub struct PoolInit {
    pub warm_start: Vec<FeatureVector>,
    pub initial_pool: Vec<FeatureVector>,
}

/// Maximize `score_fn` over the feasible points of `space`.
pub fn optimize<F, R>(
    mut score_fn: F,
    space: &SearchSpace,
    config: &FireflyConfig,
    init: &PoolInit,
    rng: &mut R,
) -> Result<FireflyResult>
where
    F: FnMut(&FeatureVector) -> f64,
    R: Rng + ?Sized,
{
    config.validate()?;
    let layout = RowLayout::new(space);
    let width = layout.width();
    if width == 0 {
        return Err(Error::Validation("cannot optimize over an empty search space".into()));
    }
    let pool_n = pool_size(width, config.batch_size);
    let gamma = config.gamma.unwrap_or(4.5 / width as f64);
    let omega_cat = config.omega_categorical.unwrap_or(if layout.num_continuous == 0 { 30.0 } else { 1.0 });
    let mut omegas = vec![config.omega_continuous; layout.num_continuous];
    omegas.resize(width, omega_cat);

    let mut pool: Vec<Vec<f64>> = Vec::with_capacity(pool_n);
    let mut scores: Vec<f64> = Vec::with_capacity(pool_n);
    let mut best: Option<(FeatureVector, f64)> = None;
    let mut evaluations = 0;
    let consider = |f: FeatureVector, s: f64, best: &mut Option<(FeatureVector, f64)>| {
        if best.as_ref().is_none_or(|(_, b)| s > *b || b.is_nan()) {
            *best = Some((f, s));
        }
    };

    let seeds = init.warm_start.iter().chain(&init.initial_pool).take(pool_n).cloned();
    let seeds: Vec<FeatureVector> = seeds.collect();
    for i in 0..pool_n {
        let f = seeds.get(i).cloned().unwrap_or_else(|| space.random_features(rng));
        let s = score_fn(&f);
        evaluations += 1;
        pool.push(layout.encode(&f));
        scores.push(s);
        consider(f, s, &mut best);
    }

    let mut scales = vec![1.0; pool_n];
    let mut failures = vec![0usize; pool_n];
    let max_sweeps = config.max_evaluations / pool_n;
    let mut history = vec![best.as_ref().map_or(f64::NEG_INFINITY, |b| b.1)];

    for _ in 0..max_sweeps {
        for start in (0..pool_n).step_by(config.batch_size) {
            let end = (start + config.batch_size).min(pool_n);
            let moved = vectorized_update(
                &pool[start..end],
                &scores[start..end],
                &scales[start..end],
                &pool,
                &scores,
                gamma,
                config.eta_attract,
                config.eta_repel,
                &omegas,
                rng,
            );
            for (offset, row) in moved.into_iter().enumerate() {
                let i = start + offset;
                let f = round_to_feasible(&row, space, &layout, rng);
                let s = score_fn(&f);
                evaluations += 1;
                if s > scores[i] || (scores[i].is_nan() && !s.is_nan()) {
                    pool[i] = row;
                    scores[i] = s;
                    scales[i] = 1.0;
                    failures[i] = 0;
                } else {
                    scales[i] *= config.unsuccessful_shrink;
                    failures[i] += 1;
                }
                consider(f, s, &mut best);
            }
        }

        // Replace trapped or randomly dropped fireflies, sparing the leader.
        let leader = argmax(&scores);
        for i in 0..pool_n {
            if i == leader {
                continue;
            }
            let trapped = failures[i] > config.trapped_after;
            if trapped || rng.random::<f64>() >= config.keep_probability {
                pool[i] = layout.encode(&space.random_features(rng));
                scores[i] = f64::NEG_INFINITY;
                scales[i] = 1.0;
                failures[i] = 0;
            }
        }
        history.push(best.as_ref().map_or(f64::NEG_INFINITY, |b| b.1));
    }

    let (best, best_score) = best.expect("pool is non-empty");
    Ok(FireflyResult { best, best_score, evaluations, sweeps: max_sweeps, best_history: history })
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}
