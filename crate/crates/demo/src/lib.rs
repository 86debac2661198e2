//! Browser bindings for three interactive views: output warping, a 1-D GP
//! posterior with its UCB, and the scalarized hypervolume estimate.
//!
//! Every export takes plain numbers and returns a JSON string, so the page
//! needs no generated TypeScript types.

use gpbo_core::acquisition::{approx_hypervolume, sample_scalarizations};
use gpbo_core::gp::{fit_map, FitConfig, GpPosterior, PriorSpec, WarpedDataset};
use gpbo_core::search_space::FeatureVector;
use gpbo_core::warping::{half_rank_warp, linear_scale, log_warp, warp_pipeline, LOG_WARP_S};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use wasm_bindgen::prelude::*;

fn to_js(r: Result<serde_json::Value, String>) -> Result<String, JsError> {
    r.map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

/// Output of every warping stage for `values`; NaN entries are treated as
/// infeasible.
pub fn warp_stages(values: &[f64]) -> Result<serde_json::Value, String> {
    let infeasible: Vec<bool> = values.iter().map(|v| v.is_nan()).collect();
    let feasible: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
    let scaled = linear_scale(&feasible).map_err(|e| e.to_string())?;
    let half = half_rank_warp(&scaled);
    let logw = log_warp(&half, LOG_WARP_S);
    let out = warp_pipeline(values, &infeasible).map_err(|e| e.to_string())?;
    Ok(json!({
        "feasible": feasible,
        "scaled": scaled,
        "half_rank": half,
        "log": logw,
        "final": out.values,
        "infeasible": infeasible,
    }))
}

/// Fit a GP to `(xs, ys)` on `[0, 1]` (targets warped first) and evaluate
/// mean, stddev and `mean + sqrt_beta * stddev` on an evenly spaced grid.
pub fn gp_posterior_1d(
    xs: &[f64],
    ys: &[f64],
    grid_points: usize,
    sqrt_beta: f64,
    seed: u64,
) -> Result<serde_json::Value, String> {
    if xs.len() != ys.len() || xs.is_empty() {
        return Err("need the same positive number of x and y values".into());
    }
    if xs.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err("x values must lie in [0, 1]".into());
    }
    let warped = warp_pipeline(ys, &vec![false; ys.len()]).map_err(|e| e.to_string())?;
    let features: Vec<FeatureVector> = xs.iter().map(|&x| FeatureVector::new(vec![x], vec![])).collect();
    let data = WarpedDataset::new(features, warped.values.clone()).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fit = fit_map(&data, &PriorSpec::default(), &mut rng, &FitConfig::default()).map_err(|e| e.to_string())?;
    let post = GpPosterior::new(&data, &fit.hyper).map_err(|e| e.to_string())?;
    let n = grid_points.max(2);
    let grid: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    let (mean, std): (Vec<f64>, Vec<f64>) =
        grid.iter().map(|&x| post.predict(&FeatureVector::new(vec![x], vec![]))).unzip();
    let ucb: Vec<f64> = mean.iter().zip(&std).map(|(m, s)| m + sqrt_beta * s).collect();
    let best = ucb.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map_or(0, |(i, _)| i);
    Ok(json!({
        "grid": grid,
        "mean": mean,
        "std": std,
        "ucb": ucb,
        "next": grid[best],
        "warped_y": warped.values,
        "length_scale": (0.5 * fit.hyper.lambda_log[0]).exp(),
        "amplitude": fit.hyper.amplitude(),
        "noise_variance": fit.hyper.noise_variance(),
    }))
}

/// Scalarized hypervolume of 2-D points (flattened `[y0, y1, y0, y1, ..]`)
/// above the origin.
pub fn hypervolume_2d(points: &[f64], weights: usize, seed: u64) -> Result<serde_json::Value, String> {
    if points.len() % 2 != 0 {
        return Err("points must come in (y0, y1) pairs".into());
    }
    let pts: Vec<Vec<f64>> = points.chunks(2).map(|c| c.to_vec()).collect();
    let w = sample_scalarizations(2, weights.max(1), &mut ChaCha8Rng::seed_from_u64(seed));
    Ok(json!({ "estimate": approx_hypervolume(&pts, &[0.0, 0.0], &w), "weights": w.len() }))
}

#[wasm_bindgen]
pub fn warp(values: Vec<f64>) -> Result<String, JsError> {
    to_js(warp_stages(&values))
}

#[wasm_bindgen]
pub fn gp_ucb(xs: Vec<f64>, ys: Vec<f64>, grid_points: usize, sqrt_beta: f64, seed: u32) -> Result<String, JsError> {
    to_js(gp_posterior_1d(&xs, &ys, grid_points, sqrt_beta, seed as u64))
}

#[wasm_bindgen]
pub fn hypervolume(points: Vec<f64>, weights: usize, seed: u32) -> Result<String, JsError> {
    to_js(hypervolume_2d(&points, weights, seed as u64))
}
