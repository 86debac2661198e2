//! `bench`: run algorithms on benchmark instances and write the results CSV.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use gpbo_core::benchmarks::{BenchmarkInstance, BenchmarkSpec};
use gpbo_core::designer::{halton_features, DesignerConfig, Outcome, StudyState};
use gpbo_core::evaluation::{RunRecord, TrajectoryPoint};
use gpbo_core::search_space::ParameterDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Algorithm {
    GpBandit,
    Random,
    QuasiRandom,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::GpBandit => "gp_bandit",
            Algorithm::Random => "random",
            Algorithm::QuasiRandom => "quasi_random",
        }
    }

    fn code(self) -> u64 {
        self as u64
    }
}

fn default_algorithms() -> Vec<Algorithm> {
    vec![Algorithm::GpBandit, Algorithm::Random]
}
fn default_horizon() -> usize {
    100
}
fn default_repeats() -> usize {
    20
}
fn default_batch() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub benchmarks: Vec<BenchmarkSpec>,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<Algorithm>,
    #[serde(default)]
    pub seed: u64,
    /// Output directory for `results.csv`.
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default = "default_batch")]
    pub batch: usize,
    /// Parallel worker threads; output does not depend on it.
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub designer: DesignerConfig,
}

impl RunManifest {
    pub fn from_path(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read manifest {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("malformed manifest {}: {e}", path.display())))
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.horizon == 0 || self.repeats == 0 || self.batch == 0 {
            return Err(CliError::Usage("horizon, repeats and batch must be at least 1".into()));
        }
        if self.benchmarks.is_empty() || self.algorithms.is_empty() {
            return Err(CliError::Usage("manifest needs at least one benchmark and one algorithm".into()));
        }
        if self.workers == Some(0) {
            return Err(CliError::Usage("workers must be at least 1".into()));
        }
        for b in &self.benchmarks {
            b.validate()?;
        }
        self.designer.validate()?;
        Ok(())
    }

    pub fn max_objectives(&self) -> usize {
        self.benchmarks.iter().filter_map(|b| b.base().ok()).map(|b| b.num_objectives()).max().unwrap_or(1)
    }
}

/// SplitMix64 finalizer folded over `tags`: independent seeds per
/// (purpose, benchmark, repeat, algorithm).
fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    let mut z = seed;
    for &t in tags {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(t.wrapping_mul(0xD1B5_4A32_D192_ED03));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

/// One algorithm run on one benchmark repeat.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub record: RunRecord,
    pub params: Vec<ParameterDict>,
}

/// Benchmark instance shared by every algorithm for a given repeat.
pub fn instance_for(manifest: &RunManifest, bench: usize, repeat: usize) -> CliResult<BenchmarkInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(manifest.seed, &[1, bench as u64, repeat as u64]));
    Ok(manifest.benchmarks[bench].instantiate(&mut rng)?)
}

pub fn run_one(manifest: &RunManifest, bench: usize, algorithm: Algorithm, repeat: usize) -> CliResult<RunOutput> {
    let instance = instance_for(manifest, bench, repeat)?;
    let tags = [bench as u64, repeat as u64, algorithm.code()];
    let algo_seed = derive_seed(manifest.seed, &[&[2u64][..], &tags].concat());
    let mut noise_rng = ChaCha8Rng::seed_from_u64(derive_seed(manifest.seed, &[&[3u64][..], &tags].concat()));
    let space = &instance.problem.space;
    let horizon = manifest.horizon;
    let mut params: Vec<ParameterDict> = Vec::with_capacity(horizon);
    let mut trajectory = Vec::with_capacity(horizon);
    let mut record = |p: ParameterDict, rng: &mut ChaCha8Rng| -> CliResult<Vec<f64>> {
        let e = instance.evaluate(&p, rng)?;
        trajectory.push(TrajectoryPoint {
            trial_index: trajectory.len() + 1,
            objectives: e.objectives.clone(),
            noiseless: e.noiseless,
        });
        params.push(p);
        Ok(e.objectives)
    };
    match algorithm {
        Algorithm::GpBandit => {
            let mut study = StudyState::new(instance.problem.clone(), manifest.designer.clone(), algo_seed)?;
            let mut done = 0;
            while done < horizon {
                let k = manifest.batch.min(horizon - done);
                let trials = study.suggest(k)?;
                for t in trials {
                    let y = record(t.parameters.clone(), &mut noise_rng)?;
                    study.complete_trial(t.id, Outcome::Measured(y))?;
                    done += 1;
                }
            }
        }
        Algorithm::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(algo_seed);
            for _ in 0..horizon {
                let f = space.random_features(&mut rng);
                record(space.unfeaturize(&f), &mut noise_rng)?;
            }
        }
        Algorithm::QuasiRandom => {
            let mut rng = ChaCha8Rng::seed_from_u64(algo_seed);
            let center = space.center_features(&mut rng);
            record(space.unfeaturize(&center), &mut noise_rng)?;
            for i in 1..horizon {
                let f = halton_features(space, i as u64);
                record(space.unfeaturize(&f), &mut noise_rng)?;
            }
        }
    }
    Ok(RunOutput {
        record: RunRecord {
            algorithm: algorithm.name().into(),
            benchmark: manifest.benchmarks[bench].id(),
            repeat,
            trajectory,
        },
        params,
    })
}

/// All runs, ordered by benchmark, then algorithm, then repeat.
pub fn run_all(manifest: &RunManifest) -> CliResult<Vec<RunOutput>> {
    manifest.validate()?;
    let mut jobs = Vec::new();
    for b in 0..manifest.benchmarks.len() {
        for &a in &manifest.algorithms {
            for r in 0..manifest.repeats {
                jobs.push((b, a, r));
            }
        }
    }
    let run = || jobs.par_iter().map(|&(b, a, r)| run_one(manifest, b, a, r)).collect::<CliResult<Vec<_>>>();
    match manifest.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Internal(e.to_string()))?
            .install(run),
        None => run(),
    }
}

fn fmt_num(v: f64) -> String {
    format!("{v}")
}

pub fn results_header(m: usize) -> Vec<String> {
    let mut h: Vec<String> =
        ["algorithm", "benchmark", "repeat", "trial_index", "param_json"].iter().map(|s| s.to_string()).collect();
    h.extend((0..m).map(|j| format!("objective_{j}")));
    h.extend((0..m).map(|j| format!("noiseless_{j}")));
    h.push("best_so_far".into());
    h
}

pub fn write_results<W: Write>(writer: W, runs: &[RunOutput], m: usize) -> CliResult<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    w.write_record(results_header(m))?;
    for run in runs {
        let single = run.record.trajectory.first().is_some_and(|p| p.noiseless.len() == 1);
        let mut best = f64::NEG_INFINITY;
        for (p, params) in run.record.trajectory.iter().zip(&run.params) {
            let mut row = vec![
                run.record.algorithm.clone(),
                run.record.benchmark.clone(),
                run.record.repeat.to_string(),
                p.trial_index.to_string(),
                serde_json::to_string(params).map_err(|e| CliError::Internal(e.to_string()))?,
            ];
            let pad = |v: &[f64]| (0..m).map(|j| v.get(j).map_or(String::new(), |x| fmt_num(*x))).collect::<Vec<_>>();
            row.extend(pad(&p.objectives));
            row.extend(pad(&p.noiseless));
            if single {
                best = best.max(p.noiseless[0]);
                row.push(fmt_num(best));
            } else {
                row.push(String::new());
            }
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Parse results CSV data into run records (grouped by benchmark,
/// algorithm and repeat, in first-appearance order).
pub fn read_results<R: Read>(reader: R) -> CliResult<Vec<RunRecord>> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(reader);
    let header = rdr.headers().map_err(|e| CliError::Usage(format!("malformed results CSV: {e}")))?.clone();
    let col = |name: &str| header.iter().position(|h| h == name);
    let need = |name: &str| col(name).ok_or_else(|| CliError::Usage(format!("results CSV lacks column '{name}'")));
    let (ia, ib, ir, it) = (need("algorithm")?, need("benchmark")?, need("repeat")?, need("trial_index")?);
    let objective_cols: Vec<usize> = (0..).map_while(|j| col(&format!("objective_{j}"))).collect();
    let noiseless_cols: Vec<usize> = (0..).map_while(|j| col(&format!("noiseless_{j}"))).collect();
    if noiseless_cols.is_empty() {
        return Err(CliError::Usage("results CSV has no noiseless columns".into()));
    }
    let mut order: Vec<(String, String, usize)> = Vec::new();
    let mut groups: BTreeMap<(String, String, usize), Vec<TrajectoryPoint>> = BTreeMap::new();
    for row in rdr.records() {
        let row = row.map_err(|e| CliError::Usage(format!("malformed results CSV: {e}")))?;
        let parse_usize = |i: usize| {
            row.get(i).and_then(|s| s.parse::<usize>().ok()).ok_or_else(|| CliError::Usage(format!("bad integer in row {row:?}")))
        };
        let floats = |cols: &[usize]| -> CliResult<Vec<f64>> {
            cols.iter()
                .filter_map(|&c| row.get(c).filter(|s| !s.is_empty()))
                .map(|s| s.parse::<f64>().map_err(|_| CliError::Usage(format!("bad number '{s}' in results CSV"))))
                .collect()
        };
        let key = (row[ib].to_string(), row[ia].to_string(), parse_usize(ir)?);
        let point = TrajectoryPoint {
            trial_index: parse_usize(it)?,
            objectives: floats(&objective_cols)?,
            noiseless: floats(&noiseless_cols)?,
        };
        if point.noiseless.is_empty() {
            return Err(CliError::Usage("row without noiseless values".into()));
        }
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(point);
    }
    order
        .into_iter()
        .map(|key| {
            let mut trajectory = groups.remove(&key).unwrap_or_default();
            trajectory.sort_by_key(|p| p.trial_index);
            let record = RunRecord { benchmark: key.0, algorithm: key.1, repeat: key.2, trajectory };
            record.validate()?;
            Ok(record)
        })
        .collect()
}

/// Run the manifest and write `results.csv` into `out_dir`; returns the
/// path written.
pub fn run_bench(manifest: &RunManifest, out_dir: &Path) -> CliResult<PathBuf> {
    let runs = run_all(manifest)?;
    let mut buf = Vec::new();
    write_results(&mut buf, &runs, manifest.max_objectives())?;
    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join("results.csv");
    crate::study::write_atomic(&path, &buf)?;
    Ok(path)
}
