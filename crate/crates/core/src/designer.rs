//! Study state and the suggestion loop.
//!
//! A study starts at the center of the space, optionally continues with
//! Halton points, and then alternates between GP-UCB (right after new
//! results arrive) and pure exploration (while earlier suggestions are still
//! pending). Warping and the hyperparameter fit run once per `suggest` call;
//! suggestions within the call are diversified through the pending-point
//! variance reduction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acquisition::{
    self, mo_reference_point, sample_scalarizations, AcquisitionConfig, MoAcquisition, ScalarizationSet, TrustRegion,
};
use crate::error::{Error, Result};
use crate::firefly::{self, FireflyConfig, PoolInit};
use crate::gp::{fit_map, FitConfig, GpPosterior, PriorSpec, WarpedDataset};
use crate::halton::halton_point;
use crate::lbfgsb::LbfgsbConfig;
use crate::search_space::{FeatureVector, Goal, ProblemStatement, SearchSpace, SuggestionOrigin, Trial, TrialState};
use crate::warping::warp_pipeline;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedingConfig {
    pub use_quasi_random: bool,
    pub num_quasi_random: usize,
}

impl SeedingConfig {
    /// Off for single-objective studies, 10 Halton trials for
    /// multi-objective ones.
    pub fn default_for(problem: &ProblemStatement) -> Self {
        if problem.num_metrics() > 1 {
            Self { use_quasi_random: true, num_quasi_random: 10 }
        } else {
            Self { use_quasi_random: false, num_quasi_random: problem.space.len() }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DesignerConfig {
    pub acquisition: AcquisitionConfig,
    pub firefly: FireflyConfig,
    /// `None` picks [`SeedingConfig::default_for`].
    pub seeding: Option<SeedingConfig>,
    pub use_trust_region: bool,
    pub fit_restarts: usize,
    pub fit_max_iterations: usize,
    pub fit_max_line_search: usize,
    pub priors: PriorSpec,
}

impl Default for DesignerConfig {
    fn default() -> Self {
        Self {
            acquisition: AcquisitionConfig::default(),
            firefly: FireflyConfig::default(),
            seeding: None,
            use_trust_region: true,
            fit_restarts: 4,
            fit_max_iterations: 50,
            fit_max_line_search: 20,
            priors: PriorSpec::default(),
        }
    }
}

impl DesignerConfig {
    pub fn fit_config(&self) -> FitConfig {
        FitConfig {
            restarts: self.fit_restarts,
            optimizer: LbfgsbConfig {
                max_iterations: self.fit_max_iterations,
                max_line_search: self.fit_max_line_search,
                ..Default::default()
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.acquisition.validate()?;
        self.firefly.validate()
    }
}

/// Result reported for a pending trial.
#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    Measured(Vec<f64>),
    Infeasible,
}

/// A study: problem, trials and the deterministic random stream.
///
/// Every `suggest` call draws from its own ChaCha stream indexed by
/// `suggest_calls`, so a serialized state resumes exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyState {
    pub problem: ProblemStatement,
    #[serde(default)]
    pub config: DesignerConfig,
    pub seed: u64,
    #[serde(default)]
    pub suggest_calls: u64,
    /// Logical clock advanced on every trial creation and completion.
    #[serde(default)]
    pub clock: u64,
    #[serde(default)]
    pub trials: Vec<Trial>,
}

/// Halton point `index` mapped to features: continuous coordinates
/// directly, categorical ones by equal-width binning.
pub fn halton_features(space: &SearchSpace, index: u64) -> FeatureVector {
    let nc = space.num_continuous();
    let sizes = space.category_sizes();
    let h = halton_point(index, nc + sizes.len());
    let mut f = FeatureVector {
        continuous: h[..nc].to_vec(),
        categorical: sizes.iter().zip(&h[nc..]).map(|(&n, &u)| ((u * n as f64) as usize).min(n - 1)).collect(),
    };
    space.snap_features(&mut f);
    f
}

/// Per-call model for the single-objective path.
struct SingleModel {
    posterior: GpPosterior,
    evaluated: Vec<FeatureVector>,
    incumbent: Option<FeatureVector>,
}

struct MultiModel {
    posteriors: Vec<GpPosterior>,
    evaluated: Vec<FeatureVector>,
    acquisition: MoAcquisition,
    incumbents: Vec<FeatureVector>,
}

impl StudyState {
    pub fn new(problem: ProblemStatement, config: DesignerConfig, seed: u64) -> Result<Self> {
        problem.validate()?;
        config.validate()?;
        Ok(Self { problem, config, seed, suggest_calls: 0, clock: 0, trials: Vec::new() })
    }

    pub fn trial(&self, id: u64) -> Option<&Trial> {
        self.trials.iter().find(|t| t.id == id)
    }

    pub fn pending(&self) -> impl Iterator<Item = &Trial> {
        self.trials.iter().filter(|t| t.is_pending())
    }

    /// Completed and infeasible trials.
    pub fn finished(&self) -> impl Iterator<Item = &Trial> {
        self.trials.iter().filter(|t| !t.is_pending())
    }

    pub fn seeding(&self) -> SeedingConfig {
        self.config.seeding.clone().unwrap_or_else(|| SeedingConfig::default_for(&self.problem))
    }

    /// Check structural invariants (ids unique and increasing, measurements
    /// consistent with state and metric count).
    pub fn validate(&self) -> Result<()> {
        self.problem.validate()?;
        self.config.validate()?;
        let m = self.problem.num_metrics();
        for w in self.trials.windows(2) {
            if w[1].id <= w[0].id {
                return Err(Error::State("trial ids must be strictly increasing".into()));
            }
        }
        for t in &self.trials {
            if t.state == TrialState::Completed && t.measurement.as_ref().is_none_or(|v| v.len() != m) {
                return Err(Error::State(format!("trial {} is completed without {m} metric values", t.id)));
            }
            self.problem
                .space
                .featurize(&t.parameters)
                .map_err(|e| Error::State(format!("trial {} does not match the search space: {e}", t.id)))?;
        }
        Ok(())
    }

    fn next_id(&self) -> u64 {
        self.trials.last().map_or(1, |t| t.id + 1)
    }

    /// True when a completion arrived after the newest pending suggestion.
    pub fn has_new_completion(&self) -> bool {
        let last_completion = self.trials.iter().filter_map(|t| t.completed_at).max();
        let last_pending = self.pending().map(|t| t.created_at).max();
        match (last_completion, last_pending) {
            (Some(c), Some(p)) => c > p,
            (Some(_), None) => true,
            (None, _) => false,
        }
    }

    fn push_trial(&mut self, features: &FeatureVector, origin: SuggestionOrigin) -> Trial {
        self.clock += 1;
        let trial = Trial {
            id: self.next_id(),
            parameters: self.problem.space.unfeaturize(features),
            measurement: None,
            state: TrialState::Pending,
            origin,
            created_at: self.clock,
            completed_at: None,
        };
        self.trials.push(trial.clone());
        trial
    }

    fn call_rng(&mut self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.suggest_calls);
        self.suggest_calls += 1;
        rng
    }

    pub fn complete_trial(&mut self, id: u64, outcome: Outcome) -> Result<()> {
        let m = self.problem.num_metrics();
        if let Outcome::Measured(v) = &outcome {
            if v.len() != m {
                return Err(Error::Validation(format!("expected {m} metric values, got {}", v.len())));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Validation("metric values must be finite".into()));
            }
        }
        let clock = self.clock + 1;
        let trial = self
            .trials
            .iter_mut()
            .find(|t| t.id == id)
            .ok_or_else(|| Error::State(format!("unknown trial id {id}")))?;
        if !trial.is_pending() {
            return Err(Error::State(format!("trial {id} is already finished")));
        }
        match outcome {
            Outcome::Measured(v) => {
                trial.measurement = Some(v);
                trial.state = TrialState::Completed;
            }
            Outcome::Infeasible => trial.state = TrialState::Infeasible,
        }
        trial.completed_at = Some(clock);
        self.clock = clock;
        Ok(())
    }

    /// Suggest `count` new trials (appended to the study as pending).
    pub fn suggest(&mut self, count: usize) -> Result<Vec<Trial>> {
        if count == 0 {
            return Err(Error::Validation("count must be at least 1".into()));
        }
        let mut rng = self.call_rng();
        let seeding = self.seeding();
        let multi = self.problem.num_metrics() > 1;
        let mut single: Option<Option<SingleModel>> = None;
        let mut mo: Option<Option<MultiModel>> = None;
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let space = &self.problem.space;
            let trial = if self.trials.is_empty() {
                let f = space.center_features(&mut rng);
                self.push_trial(&f, SuggestionOrigin::Center)
            } else if seeding.use_quasi_random && self.quasi_random_count() < seeding.num_quasi_random {
                let f = self.halton_features(self.quasi_random_count() as u64 + 1);
                self.push_trial(&f, SuggestionOrigin::QuasiRandom)
            } else if multi {
                if mo.is_none() {
                    mo = Some(self.build_multi_model(&mut rng));
                }
                match mo.as_ref().unwrap() {
                    Some(model) => self.suggest_multi_one(model, &mut rng)?,
                    None => self.random_fallback(&mut rng),
                }
            } else {
                if single.is_none() {
                    single = Some(self.build_single_model(&mut rng));
                }
                match single.as_ref().unwrap() {
                    Some(model) => self.suggest_single_one(model, &mut rng)?,
                    None => self.random_fallback(&mut rng),
                }
            };
            out.push(trial);
        }
        Ok(out)
    }

    /// Multi-objective suggestions; errors for single-metric studies.
    pub fn suggest_multiobjective(&mut self, count: usize) -> Result<Vec<Trial>> {
        if self.problem.num_metrics() < 2 {
            return Err(Error::Validation("multi-objective suggestions need at least two metrics".into()));
        }
        self.suggest(count)
    }

    fn quasi_random_count(&self) -> usize {
        self.trials.iter().filter(|t| t.origin == SuggestionOrigin::QuasiRandom).count()
    }

    pub fn halton_features(&self, index: u64) -> FeatureVector {
        halton_features(&self.problem.space, index)
    }

    fn random_fallback(&mut self, rng: &mut ChaCha8Rng) -> Trial {
        let f = self.problem.space.random_features(rng);
        self.push_trial(&f, SuggestionOrigin::RandomFallback)
    }

    fn features_of(&self, trials: &[&Trial]) -> Result<Vec<FeatureVector>> {
        trials.iter().map(|t| self.problem.space.featurize(&t.parameters)).collect()
    }

    fn pending_features(&self) -> Result<Vec<FeatureVector>> {
        let pending: Vec<&Trial> = self.pending().collect();
        self.features_of(&pending)
    }

    /// Metric `j` of every finished trial, sign-flipped for minimization,
    /// with the infeasibility mask.
    fn metric_column(&self, finished: &[&Trial], j: usize) -> (Vec<f64>, Vec<bool>) {
        let sign = if self.problem.objectives[j].goal == Goal::Minimize { -1.0 } else { 1.0 };
        finished
            .iter()
            .map(|t| match (&t.state, &t.measurement) {
                (TrialState::Completed, Some(v)) => (sign * v[j], false),
                _ => (f64::NAN, true),
            })
            .unzip()
    }

    fn feature_dim(&self) -> usize {
        self.problem.space.num_continuous() + self.problem.space.num_categorical()
    }

    fn build_single_model(&self, rng: &mut ChaCha8Rng) -> Option<SingleModel> {
        match self.try_single_model(rng) {
            Ok(m) => m,
            Err(e) => {
                log::warn!("GP modeling failed ({e}); falling back to random suggestions");
                None
            }
        }
    }

    fn try_single_model(&self, rng: &mut ChaCha8Rng) -> Result<Option<SingleModel>> {
        let finished: Vec<&Trial> = self.finished().collect();
        let evaluated = self.features_of(&finished)?;
        let (y, mask) = self.metric_column(&finished, 0);
        let priors = &self.config.priors;
        if finished.is_empty() {
            let hyper = priors.clamped_means(self.feature_dim());
            let posterior = GpPosterior::prior(&hyper, self.problem.space.num_continuous());
            return Ok(Some(SingleModel { posterior, evaluated, incumbent: None }));
        }
        if mask.iter().all(|b| *b) {
            log::warn!("all finished trials are infeasible; suggesting at random");
            return Ok(None);
        }
        let warped = warp_pipeline(&y, &mask)?;
        let data = WarpedDataset::new(evaluated.clone(), warped.values.clone())?;
        let fit = fit_map(&data, priors, rng, &self.config.fit_config())?;
        log::debug!("fitted hyperparameters {:?} (log joint {:.4})", fit.hyper, fit.log_joint);
        let posterior = GpPosterior::new(&data, &fit.hyper)?;
        let incumbent = (0..y.len())
            .filter(|&i| !mask[i])
            .max_by(|&a, &b| warped.values[a].total_cmp(&warped.values[b]))
            .map(|i| evaluated[i].clone());
        Ok(Some(SingleModel { posterior, evaluated, incumbent }))
    }

    fn trust_region(&self, evaluated: &[FeatureVector], pending: &[FeatureVector]) -> TrustRegion {
        if !self.config.use_trust_region {
            return TrustRegion::disabled();
        }
        let trusted: Vec<FeatureVector> = evaluated.iter().chain(pending).cloned().collect();
        TrustRegion::new(&trusted, evaluated.len(), self.feature_dim())
    }

    fn suggest_single_one(&mut self, model: &SingleModel, rng: &mut ChaCha8Rng) -> Result<Trial> {
        let cfg = self.config.acquisition.clone();
        let pending = self.pending_features()?;
        let use_ucb = self.has_new_completion() && rng.random::<f64>() >= cfg.q_override;
        let predictor = model.posterior.with_pending(&pending)?;
        let tr = self.trust_region(&model.evaluated, &pending);
        let init = PoolInit { warm_start: model.incumbent.iter().cloned().collect(), initial_pool: Vec::new() };
        let (result, origin) = if use_ucb {
            let score = |x: &FeatureVector| tr.apply(acquisition::ucb(x, &predictor, cfg.sqrt_beta), x);
            (firefly::optimize(score, &self.problem.space, &self.config.firefly, &init, rng)?, SuggestionOrigin::Ucb)
        } else {
            let tau = acquisition::pe_threshold(&model.posterior, &model.evaluated, &pending, cfg.sqrt_beta)?;
            let score = |x: &FeatureVector| tr.apply(acquisition::pe(x, &predictor, tau, &cfg), x);
            (
                firefly::optimize(score, &self.problem.space, &self.config.firefly, &init, rng)?,
                SuggestionOrigin::PureExploration,
            )
        };
        log::debug!("{origin:?} suggestion scored {:.6} after {} evaluations", result.best_score, result.evaluations);
        Ok(self.push_trial(&result.best, origin))
    }

    fn build_multi_model(&self, rng: &mut ChaCha8Rng) -> Option<MultiModel> {
        match self.try_multi_model(rng) {
            Ok(m) => m,
            Err(e) => {
                log::warn!("GP modeling failed ({e}); falling back to random suggestions");
                None
            }
        }
    }

    fn try_multi_model(&self, rng: &mut ChaCha8Rng) -> Result<Option<MultiModel>> {
        let finished: Vec<&Trial> = self.finished().collect();
        let evaluated = self.features_of(&finished)?;
        let m = self.problem.num_metrics();
        let columns: Vec<(Vec<f64>, Vec<bool>)> = (0..m).map(|j| self.metric_column(&finished, j)).collect();
        let mask = &columns[0].1;
        if mask.iter().all(|b| *b) {
            log::warn!("no feasible finished trials; suggesting at random");
            return Ok(None);
        }
        let mut posteriors = Vec::with_capacity(m);
        let mut warped_cols = Vec::with_capacity(m);
        for (y, mask) in &columns {
            let warped = warp_pipeline(y, mask)?;
            let data = WarpedDataset::new(evaluated.clone(), warped.values.clone())?;
            let fit = fit_map(&data, &self.config.priors, rng, &self.config.fit_config())?;
            posteriors.push(GpPosterior::new(&data, &fit.hyper)?);
            warped_cols.push(warped.values);
        }
        let feasible: Vec<usize> = (0..finished.len()).filter(|&i| !mask[i]).collect();
        let observed: Vec<Vec<f64>> = feasible.iter().map(|&i| warped_cols.iter().map(|c| c[i]).collect()).collect();
        let reference_point = mo_reference_point(&observed)?;
        let weights = sample_scalarizations(m, self.config.acquisition.num_scalarizations, rng);
        let acquisition = MoAcquisition::new(ScalarizationSet { weights, reference_point }, &observed);
        // Warm-start from the per-metric best feasible points.
        let mut incumbents: Vec<FeatureVector> = warped_cols
            .iter()
            .filter_map(|c| feasible.iter().max_by(|&&a, &&b| c[a].total_cmp(&c[b])).map(|&i| evaluated[i].clone()))
            .collect();
        incumbents.dedup();
        Ok(Some(MultiModel { posteriors, evaluated, acquisition, incumbents }))
    }

    fn suggest_multi_one(&mut self, model: &MultiModel, rng: &mut ChaCha8Rng) -> Result<Trial> {
        let sqrt_beta = self.config.acquisition.sqrt_beta;
        let pending = self.pending_features()?;
        let predictors = model.posteriors.iter().map(|p| p.with_pending(&pending)).collect::<Result<Vec<_>>>()?;
        let tr = self.trust_region(&model.evaluated, &pending);
        let init = PoolInit { warm_start: model.incumbents.clone(), initial_pool: Vec::new() };
        let score =
            |x: &FeatureVector| tr.apply(acquisition::mo_acquisition(x, &predictors, &model.acquisition, sqrt_beta), x);
        let result = firefly::optimize(score, &self.problem.space, &self.config.firefly, &init, rng)?;
        Ok(self.push_trial(&result.best, SuggestionOrigin::MultiObjective))
    }
}
