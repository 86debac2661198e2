//! Objective warping applied before GP fitting.
//!
//! Stages run in a fixed order: linear scaling, half-rank warping, log
//! warping, infeasibility warping, mean shifting. The first three stages see
//! feasible values only. All stages assume maximization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{median, normal_quantile};

/// Default free parameter of the log warper.
pub const LOG_WARP_S: f64 = 1.5;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageMetadata {
    /// Divisor used by the linear scaling stage.
    pub scale_divisor: f64,
    /// Median of the raw feasible objectives.
    pub median: f64,
    /// Feasible minimum and maximum entering the infeasibility stage.
    pub y_min: f64,
    pub y_max: f64,
    /// Mean subtracted by the final stage.
    pub mean_shift: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WarpedObjectives {
    pub values: Vec<f64>,
    pub infeasible_mask: Vec<bool>,
    pub metadata: StageMetadata,
}

/// ξ(I) over the indices with `y_i >= m` (or all indices when `good_only`
/// is false), plus the size of the index set.
fn deviation(y: &[f64], m: f64, good_only: bool) -> (f64, usize) {
    let mut sum = 0.0;
    let mut count = 0;
    for &v in y {
        if !good_only || v >= m {
            sum += (v - m) * (v - m);
            count += 1;
        }
    }
    (sum.sqrt(), count)
}

fn check_finite(y: &[f64]) -> Result<()> {
    if y.is_empty() {
        return Err(Error::Validation("no feasible objective values to warp".into()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("feasible objective values must be finite".into()));
    }
    Ok(())
}

fn linear_scale_with_divisor(y: &[f64]) -> Result<(Vec<f64>, f64, f64)> {
    check_finite(y)?;
    let m = median(y);
    let (good, _) = deviation(y, m, true);
    let (all, _) = deviation(y, m, false);
    let divisor = if good > 0.0 {
        good
    } else if all > 0.0 {
        all
    } else {
        1.0
    };
    // Median of y / ξ is m / ξ, so shifting it to zero gives (y - m) / ξ.
    Ok((y.iter().map(|v| (v - m) / divisor).collect(), divisor, m))
}

/// Divide by the deviation of the above-median half (falling back to the
/// whole set, then to 1) and shift the median to zero.
pub fn linear_scale(y: &[f64]) -> Result<Vec<f64>> {
    linear_scale_with_divisor(y).map(|(v, _, _)| v)
}

/// Ascending 1-based ranks; ties share the average rank.
fn midranks(y: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&a, &b| y[a].total_cmp(&y[b]));
    let mut ranks = vec![0.0; y.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && y[order[j + 1]] == y[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Replace below-median values by the lower half of a normal distribution
/// whose deviation matches the above-median half. Median-or-better values
/// are unchanged.
pub fn half_rank_warp(y: &[f64]) -> Vec<f64> {
    if y.is_empty() {
        return Vec::new();
    }
    let t = y.len() as f64;
    let m = median(y);
    let (good, n_good) = deviation(y, m, true);
    let dev = if good > 0.0 {
        good / (n_good as f64).sqrt()
    } else {
        deviation(y, m, false).0 / t.sqrt()
    };
    let ranks = midranks(y);
    y.iter()
        .zip(&ranks)
        .map(|(&v, &r)| if v >= m { v } else { m - dev * normal_quantile(r / t).abs() })
        .collect()
}

/// Normalize to `[0, 1]` (0 = best) and apply `0.5 - log(1 + u (s - 1)) / log(s)`.
/// Outputs lie in `[-0.5, 0.5]`; constant inputs are returned unchanged.
pub fn log_warp(y: &[f64], s: f64) -> Vec<f64> {
    let (lo, hi) = min_max(y);
    if !(hi > lo) {
        return y.to_vec();
    }
    y.iter()
        .map(|&v| {
            let u = (hi - v) / (hi - lo);
            0.5 - (1.0 + u * (s - 1.0)).ln() / s.ln()
        })
        .collect()
}

fn min_max(y: &[f64]) -> (f64, f64) {
    y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Replace infeasible entries with `y_min - 0.5 (y_max - y_min)` computed over
/// the feasible entries.
pub fn infeasible_warp(y: &[f64], infeasible: &[bool]) -> Result<Vec<f64>> {
    if y.len() != infeasible.len() {
        return Err(Error::Validation("objective and infeasibility mask lengths differ".into()));
    }
    let feasible: Vec<f64> =
        y.iter().zip(infeasible).filter(|(_, &bad)| !bad).map(|(&v, _)| v).collect();
    if feasible.is_empty() {
        return Err(Error::Validation("all trials are infeasible".into()));
    }
    let (lo, hi) = min_max(&feasible);
    let fill = lo - 0.5 * (hi - lo);
    Ok(y.iter().zip(infeasible).map(|(&v, &bad)| if bad { fill } else { v }).collect())
}

/// Subtract the mean.
pub fn mean_shift(y: &[f64]) -> Vec<f64> {
    if y.is_empty() {
        return Vec::new();
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    y.iter().map(|v| v - mean).collect()
}

/// Run the full warping pipeline. Infeasible entries may hold any value
/// (including NaN); they are excluded from the statistics of the first three
/// stages.
pub fn warp_pipeline(y: &[f64], infeasible: &[bool]) -> Result<WarpedObjectives> {
    if y.len() != infeasible.len() {
        return Err(Error::Validation("objective and infeasibility mask lengths differ".into()));
    }
    let feasible: Vec<f64> =
        y.iter().zip(infeasible).filter(|(_, &bad)| !bad).map(|(&v, _)| v).collect();
    let (scaled, divisor, med) = linear_scale_with_divisor(&feasible)?;
    let warped = log_warp(&half_rank_warp(&scaled), LOG_WARP_S);
    let (y_min, y_max) = min_max(&warped);

    let mut it = warped.into_iter();
    let merged: Vec<f64> =
        infeasible.iter().map(|&bad| if bad { 0.0 } else { it.next().unwrap() }).collect();
    let filled = infeasible_warp(&merged, infeasible)?;
    let mean = filled.iter().sum::<f64>() / filled.len() as f64;
    // Two passes keep the residual mean at rounding level.
    let mut values = mean_shift(&filled);
    let residual = values.iter().sum::<f64>() / values.len() as f64;
    values.iter_mut().for_each(|v| *v -= residual);

    Ok(WarpedObjectives {
        values,
        infeasible_mask: infeasible.to_vec(),
        metadata: StageMetadata { scale_divisor: divisor, median: med, y_min, y_max, mean_shift: mean + residual },
    })
}
