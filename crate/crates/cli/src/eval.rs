//! `eval`: compare algorithms against a baseline from one or more results
//! CSV files.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use gpbo_core::acquisition::sample_scalarizations;
use gpbo_core::evaluation::{
    best_so_far, hypervolume_curve, log_efficiency, mean_curve, percentile_band, worst_point, RunRecord,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CliError, CliResult};
use crate::plot;

pub const HV_WEIGHTS: usize = 10_000;

#[derive(Clone, Debug)]
pub struct EvalOptions {
    pub baseline: String,
    pub seed: u64,
    pub hv_weights: usize,
}

impl EvalOptions {
    pub fn new(baseline: impl Into<String>) -> Self {
        Self { baseline: baseline.into(), seed: 0, hv_weights: HV_WEIGHTS }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub benchmark: String,
    /// `best_so_far` or `hypervolume`.
    pub metric: &'static str,
    pub algorithm: String,
    pub baseline: String,
    pub log_efficiency: Option<f64>,
    pub repeats: usize,
    pub final_median: f64,
    pub final_mean: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    pub algorithm: String,
    pub mean: Vec<f64>,
    pub median: Vec<f64>,
    pub p40: Vec<f64>,
    pub p60: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkCurves {
    pub benchmark: String,
    pub metric: &'static str,
    pub curves: Vec<Curve>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<ReportRow>,
    pub curves: Vec<BenchmarkCurves>,
}

impl EvalReport {
    pub fn score(&self, benchmark: &str, algorithm: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.benchmark == benchmark && r.algorithm == algorithm).and_then(|r| r.log_efficiency)
    }

    pub fn row(&self, benchmark: &str, algorithm: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.benchmark == benchmark && r.algorithm == algorithm)
    }
}

fn curve_from(algorithm: &str, runs: &[Vec<f64>]) -> CliResult<Curve> {
    let band = percentile_band(runs, 40.0, 60.0)?;
    Ok(Curve {
        algorithm: algorithm.into(),
        mean: mean_curve(runs)?,
        median: band.iter().map(|b| b.0).collect(),
        p40: band.iter().map(|b| b.1).collect(),
        p60: band.iter().map(|b| b.2).collect(),
    })
}

/// Per-run curves: best-so-far for single-objective benchmarks, prefix
/// hypervolume for multi-objective ones.
fn per_run_curves(
    runs: &BTreeMap<&str, Vec<&RunRecord>>,
    opts: &EvalOptions,
    benchmark: &str,
) -> CliResult<(&'static str, BTreeMap<String, Vec<Vec<f64>>>)> {
    let m = runs.values().flatten().flat_map(|r| r.trajectory.first()).map(|p| p.noiseless.len()).max().unwrap_or(1);
    let mut out = BTreeMap::new();
    if m == 1 {
        for (alg, rs) in runs {
            let curves = rs.iter().map(|r| r.best_so_far()).collect::<Result<Vec<_>, _>>()?;
            out.insert(alg.to_string(), curves);
        }
        return Ok(("best_so_far", out));
    }
    let all: Vec<Vec<f64>> = runs.values().flatten().flat_map(|r| r.noiseless_points()).collect();
    if all.iter().any(|p| p.len() != m) {
        return Err(CliError::Usage(format!("benchmark {benchmark} mixes metric counts")));
    }
    let y_ref = worst_point(&all)?;
    let weights = sample_scalarizations(m, opts.hv_weights, &mut ChaCha8Rng::seed_from_u64(opts.seed));
    for (alg, rs) in runs {
        let curves = rs
            .iter()
            .map(|r| best_so_far(&hypervolume_curve(&r.noiseless_points(), &y_ref, &weights)))
            .collect::<Result<Vec<_>, _>>()?;
        out.insert(alg.to_string(), curves);
    }
    Ok(("hypervolume", out))
}

pub fn evaluate(records: &[RunRecord], opts: &EvalOptions) -> CliResult<EvalReport> {
    if records.is_empty() {
        return Err(CliError::Usage("no results to evaluate".into()));
    }
    let algorithms: BTreeSet<&str> = records.iter().map(|r| r.algorithm.as_str()).collect();
    if algorithms.len() < 2 {
        return Err(CliError::Usage("need results from at least two algorithms".into()));
    }
    if !algorithms.contains(opts.baseline.as_str()) {
        return Err(CliError::Usage(format!("baseline '{}' not present in results", opts.baseline)));
    }
    let mut by_bench: BTreeMap<&str, BTreeMap<&str, Vec<&RunRecord>>> = BTreeMap::new();
    for r in records {
        by_bench.entry(&r.benchmark).or_default().entry(&r.algorithm).or_default().push(r);
    }
    let mut rows = Vec::new();
    let mut all_curves = Vec::new();
    for (bench, runs) in &by_bench {
        if !runs.contains_key(opts.baseline.as_str()) {
            return Err(CliError::Usage(format!("baseline '{}' has no runs on {bench}", opts.baseline)));
        }
        let (metric, mut curves) = per_run_curves(runs, opts, bench)?;
        // Compare on the common horizon.
        let horizon = curves.values().flatten().map(|c| c.len()).min().unwrap_or(0);
        if horizon == 0 {
            return Err(CliError::Usage(format!("empty trajectories on {bench}")));
        }
        for cs in curves.values_mut() {
            for c in cs.iter_mut() {
                c.truncate(horizon);
            }
        }
        let summaries: BTreeMap<&String, Curve> =
            curves.iter().map(|(a, cs)| curve_from(a, cs).map(|c| (a, c))).collect::<CliResult<_>>()?;
        let base = &summaries[&opts.baseline];
        for (alg, curve) in &summaries {
            if **alg == opts.baseline {
                continue;
            }
            let le = log_efficiency(&base.mean, &curve.mean)?;
            rows.push(ReportRow {
                benchmark: bench.to_string(),
                metric,
                algorithm: alg.to_string(),
                baseline: opts.baseline.clone(),
                log_efficiency: le.median,
                repeats: curves[*alg].len(),
                final_median: curve.median[horizon - 1],
                final_mean: curve.mean[horizon - 1],
            });
        }
        all_curves.push(BenchmarkCurves {
            benchmark: bench.to_string(),
            metric,
            curves: summaries.into_values().collect(),
        });
    }
    Ok(EvalReport { rows, curves: all_curves })
}

fn opt_num(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x}"))
}

pub fn write_report(report: &EvalReport, out_dir: &Path) -> CliResult<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();

    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record([
        "benchmark",
        "metric",
        "algorithm",
        "baseline",
        "log_efficiency",
        "repeats",
        "final_median",
        "final_mean",
    ])?;
    for r in &report.rows {
        w.write_record([
            r.benchmark.clone(),
            r.metric.to_string(),
            r.algorithm.clone(),
            r.baseline.clone(),
            opt_num(r.log_efficiency),
            r.repeats.to_string(),
            format!("{}", r.final_median),
            format!("{}", r.final_mean),
        ])?;
    }
    let path = out_dir.join("report.csv");
    crate::study::write_atomic(&path, &w.into_inner().map_err(|e| CliError::Internal(e.to_string()))?)?;
    written.push(path);

    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(["benchmark", "metric", "algorithm", "trial_index", "median", "p40", "p60", "mean"])?;
    for bc in &report.curves {
        for c in &bc.curves {
            for t in 0..c.mean.len() {
                w.write_record([
                    bc.benchmark.clone(),
                    bc.metric.to_string(),
                    c.algorithm.clone(),
                    (t + 1).to_string(),
                    format!("{}", c.median[t]),
                    format!("{}", c.p40[t]),
                    format!("{}", c.p60[t]),
                    format!("{}", c.mean[t]),
                ])?;
            }
        }
    }
    let path = out_dir.join("curves.csv");
    crate::study::write_atomic(&path, &w.into_inner().map_err(|e| CliError::Internal(e.to_string()))?)?;
    written.push(path);

    for bc in &report.curves {
        let path = out_dir.join(format!("{}.svg", plot::file_stem(&bc.benchmark)));
        crate::study::write_atomic(&path, plot::convergence_svg(bc).as_bytes())?;
        written.push(path);
    }
    Ok(written)
}

pub fn run_eval(results: &[PathBuf], opts: &EvalOptions, out_dir: &Path) -> CliResult<EvalReport> {
    let mut records = Vec::new();
    for p in results {
        let f = std::fs::File::open(p)
            .map_err(|e| CliError::Usage(format!("cannot open results {}: {e}", p.display())))?;
        records.extend(crate::bench::read_results(f)?);
    }
    let report = evaluate(&records, opts)?;
    write_report(&report, out_dir)?;
    Ok(report)
}
