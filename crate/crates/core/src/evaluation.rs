//! Convergence curves and the log-efficiency comparison.
//!
//! For two algorithms with mean best-so-far curves, each target value is
//! the average of the two curves at some step. The required budget of an
//! algorithm is the first step its mean curve reaches the target; the
//! per-target score is `ln(budget_ref / budget_alg)`, clipped to `[-2, 2]`,
//! and the reported score is the median over targets.

use serde::{Deserialize, Serialize};

use crate::acquisition::approx_hypervolume;
use crate::error::{Error, Result};
use crate::special::{median, percentile};

pub const LOG_EFFICIENCY_CLIP: f64 = 2.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    /// 1-based.
    pub trial_index: usize,
    pub objectives: Vec<f64>,
    pub noiseless: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: String,
    pub benchmark: String,
    pub repeat: usize,
    pub trajectory: Vec<TrajectoryPoint>,
}

impl RunRecord {
    pub fn validate(&self) -> Result<()> {
        for (i, p) in self.trajectory.iter().enumerate() {
            if p.trial_index != i + 1 {
                return Err(Error::Validation(format!(
                    "run {}/{}/{}: trial indices must be contiguous from 1",
                    self.algorithm, self.benchmark, self.repeat
                )));
            }
        }
        Ok(())
    }

    /// Best-so-far curve of the first noiseless metric.
    pub fn best_so_far(&self) -> Result<Vec<f64>> {
        let v: Vec<f64> = self
            .trajectory
            .iter()
            .map(|p| p.noiseless.first().copied().unwrap_or(f64::NAN))
            .collect();
        best_so_far(&v)
    }

    /// Noiseless metric vectors in trial order.
    pub fn noiseless_points(&self) -> Vec<Vec<f64>> {
        self.trajectory.iter().map(|p| p.noiseless.clone()).collect()
    }
}

/// Running maximum.
pub fn best_so_far(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::Validation("empty trajectory".into()));
    }
    let mut best = f64::NEG_INFINITY;
    Ok(values
        .iter()
        .map(|&v| {
            if v > best {
                best = v;
            }
            best
        })
        .collect())
}

/// Pointwise mean of equal-length curves.
pub fn mean_curve(curves: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = curves.first().ok_or_else(|| Error::Validation("no curves to average".into()))?;
    if curves.iter().any(|c| c.len() != first.len()) {
        return Err(Error::Validation("curves have different lengths".into()));
    }
    Ok((0..first.len()).map(|t| curves.iter().map(|c| c[t]).sum::<f64>() / curves.len() as f64).collect())
}

/// Pointwise `(median, lower percentile, upper percentile)` across curves.
pub fn percentile_band(curves: &[Vec<f64>], lower: f64, upper: f64) -> Result<Vec<(f64, f64, f64)>> {
    let first = curves.first().ok_or_else(|| Error::Validation("no curves".into()))?;
    if curves.iter().any(|c| c.len() != first.len()) {
        return Err(Error::Validation("curves have different lengths".into()));
    }
    Ok((0..first.len())
        .map(|t| {
            let col: Vec<f64> = curves.iter().map(|c| c[t]).collect();
            (median(&col), percentile(&col, lower), percentile(&col, upper))
        })
        .collect())
}

/// First 1-based step at which `curve` reaches `target`.
pub fn required_budget(curve: &[f64], target: f64) -> Option<usize> {
    curve.iter().position(|&v| v >= target).map(|i| i + 1)
}

/// Clipped `ln(ref / alg)`; unreachable targets count as the clip bound in
/// the direction of the algorithm that did reach them, and targets neither
/// reaches are dropped (`None`).
pub fn target_log_efficiency(budget_ref: Option<usize>, budget_alg: Option<usize>) -> Option<f64> {
    match (budget_ref, budget_alg) {
        (Some(r), Some(a)) => {
            Some((r as f64 / a as f64).ln().clamp(-LOG_EFFICIENCY_CLIP, LOG_EFFICIENCY_CLIP))
        }
        (Some(_), None) => Some(-LOG_EFFICIENCY_CLIP),
        (None, Some(_)) => Some(LOG_EFFICIENCY_CLIP),
        (None, None) => None,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogEfficiency {
    /// `None` when every target was unreachable for both algorithms.
    pub median: Option<f64>,
    pub targets: Vec<f64>,
    /// Per-target scores; `None` for dropped targets.
    pub per_target: Vec<Option<f64>>,
}

/// Log-efficiency of `curve_alg` relative to `curve_ref` (both mean
/// best-so-far curves of equal length). Positive means the algorithm needs
/// fewer trials.
pub fn log_efficiency(curve_ref: &[f64], curve_alg: &[f64]) -> Result<LogEfficiency> {
    if curve_ref.len() != curve_alg.len() || curve_ref.is_empty() {
        return Err(Error::Validation("log efficiency needs two non-empty curves of equal length".into()));
    }
    let targets: Vec<f64> = curve_ref.iter().zip(curve_alg).map(|(a, b)| 0.5 * (a + b)).collect();
    let per_target: Vec<Option<f64>> = targets
        .iter()
        .map(|&z| target_log_efficiency(required_budget(curve_ref, z), required_budget(curve_alg, z)))
        .collect();
    let kept: Vec<f64> = per_target.iter().flatten().copied().collect();
    let median = if kept.is_empty() {
        None
    } else {
        Some(median(&kept).clamp(-LOG_EFFICIENCY_CLIP, LOG_EFFICIENCY_CLIP))
    };
    Ok(LogEfficiency { median, targets, per_target })
}

/// Componentwise minimum over all points: the worst observed metrics.
pub fn worst_point(points: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = points.first().ok_or_else(|| Error::Validation("no points".into()))?;
    Ok((0..first.len()).map(|j| points.iter().map(|p| p[j]).fold(f64::INFINITY, f64::min)).collect())
}

/// Hypervolume of every prefix of `points`.
pub fn hypervolume_curve(points: &[Vec<f64>], y_ref: &[f64], weights: &[Vec<f64>]) -> Vec<f64> {
    // Running max of the scalarization per weight gives all prefixes at once.
    let m = y_ref.len();
    let c = crate::acquisition::hypervolume_constant(m);
    let mut best = vec![0.0f64; weights.len()];
    points
        .iter()
        .map(|y| {
            for (b, w) in best.iter_mut().zip(weights) {
                *b = b.max(crate::acquisition::hv_scalarize(y, w, y_ref));
            }
            if weights.is_empty() {
                0.0
            } else {
                c * best.iter().sum::<f64>() / weights.len() as f64
            }
        })
        .collect()
}

/// Single-shot estimate for the final prefix; equals the last element of
/// [`hypervolume_curve`].
pub fn final_hypervolume(points: &[Vec<f64>], y_ref: &[f64], weights: &[Vec<f64>]) -> f64 {
    approx_hypervolume(points, y_ref, weights)
}
