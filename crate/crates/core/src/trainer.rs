//! The alternating outer loop.
//!
//! Each round has three barrier-separated phases:
//!
//! 1. every component trains on its own index list, with no access to the
//!    other components;
//! 2. every component draws fake samples and its classifier learns to tell
//!    them from the training data (or, for centroid models, distances to the
//!    centroids are used directly);
//! 3. points are assigned to their most likely component, mixing weights are
//!    recounted, and starved components are topped up for the next round.
//!
//! Phases 1 and 2 run the components concurrently. Each component draws from
//! its own random streams, so serial and parallel schedules agree bit for bit.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::{Array2, ArrayView2, Axis};
use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::Dataset;
use crate::discriminators::{Classifier, DiscriminatorConfig, DiscriminatorEnsemble, LikelihoodTable};
use crate::error::{Error, Result};
use crate::models::{ComponentModel, GenerativeModel, ModelConfig};
use crate::partition::{
    assign, default_min_points, equal_partition_split, load_balance, mixing_weights, nearest_centroid_table,
    random_top_up, uniform_init_split, Assignment, MixingWeights,
};
use crate::rng::{stream, Purpose};

/// Environment variable capping the worker threads.
pub const THREADS_ENV: &str = "GENMIX_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LikelihoodBackend {
    /// Per-component classifiers against the training data.
    Discriminator,
    /// Softmax of negative squared distance to each model's centroid.
    /// Requires degenerate models.
    NearestCentroid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitSplit {
    /// Every point picks a component uniformly at random.
    IidUniform,
    /// Disjoint random parts of equal size.
    EqualPartition,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    Parallel,
    Serial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    /// Number of mixture components.
    pub k: usize,
    /// Competitive rounds after pre-training. Zero keeps the initial split.
    pub rounds: usize,
    #[serde(default)]
    pub pretrain_epochs: usize,
    pub gen_epochs_per_round: usize,
    pub disc_epochs_per_round: usize,
    /// Top-up threshold; `max(1, ⌈N / 4K⌉)` when absent.
    #[serde(default)]
    pub min_points: Option<usize>,
    /// Fake samples per component and round; the training-set size when absent.
    #[serde(default)]
    pub fake_samples: Option<usize>,
    pub seed: u64,
    pub backend: LikelihoodBackend,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub discriminator: DiscriminatorConfig,
    #[serde(default = "default_init_split")]
    pub init_split: InitSplit,
    #[serde(default = "default_schedule")]
    pub schedule: Schedule,
    /// Worker threads; all available cores when absent. `GENMIX_THREADS` caps it.
    #[serde(default)]
    pub threads: Option<usize>,
}

fn default_init_split() -> InitSplit {
    InitSplit::IidUniform
}

fn default_schedule() -> Schedule {
    Schedule::Parallel
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            k: 3,
            rounds: 10,
            pretrain_epochs: 10,
            gen_epochs_per_round: 10,
            disc_epochs_per_round: 5,
            min_points: None,
            fake_samples: None,
            seed: 0,
            backend: LikelihoodBackend::Discriminator,
            model: ModelConfig::default(),
            discriminator: DiscriminatorConfig::default(),
            init_split: InitSplit::IidUniform,
            schedule: Schedule::Parallel,
            threads: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("k", self.k),
            ("gen_epochs_per_round", self.gen_epochs_per_round),
            ("disc_epochs_per_round", self.disc_epochs_per_round),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        for (name, v) in [("min_points", self.min_points), ("fake_samples", self.fake_samples), ("threads", self.threads)] {
            if v == Some(0) {
                return Err(Error::Config(format!("{name} must be at least 1 when given")));
            }
        }
        if self.backend == LikelihoodBackend::NearestCentroid && self.model != ModelConfig::Degenerate {
            return Err(Error::Config(
                "the nearest_centroid backend needs degenerate models".into(),
            ));
        }
        self.model.validate()?;
        self.discriminator.validate()
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex(&Sha256::digest(json))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Worker count: the configured value (or all cores), capped by `GENMIX_THREADS`.
pub fn thread_count(configured: Option<usize>) -> usize {
    let base = configured.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let cap = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok());
    match cap {
        Some(c) if c >= 1 => base.min(c),
        _ => base,
    }
    .max(1)
}

/// Everything that defines the mixture after a round.
#[derive(Debug, Clone)]
pub struct MixtureState {
    pub models: Vec<ComponentModel>,
    pub weights: MixingWeights,
    pub assignment: Assignment,
    /// Absent for the nearest-centroid backend.
    pub ensemble: Option<DiscriminatorEnsemble>,
    /// Index lists each component trains on next.
    pub training_sets: Vec<Vec<usize>>,
    /// Completed rounds.
    pub t: usize,
}

impl MixtureState {
    pub fn k(&self) -> usize {
        self.models.len()
    }

    fn check(&self) -> Result<()> {
        let d = self.models[0].data_dim();
        if self.models.iter().any(|m| m.data_dim() != d) {
            return Err(Error::StateCorruption("components disagree on the data dimension".into()));
        }
        if self.weights != mixing_weights(&self.assignment, self.k()) {
            return Err(Error::StateCorruption("mixing weights do not match the assignment".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    /// Sizes of the lists each component trained on this round.
    pub subset_sizes: Vec<usize>,
    /// Mixing weights after this round's assignment.
    pub alpha: Vec<f64>,
    /// Mean generator loss over the last epoch, per component.
    pub gen_loss: Vec<f64>,
    /// Classifier loss over the last epoch; empty for the centroid backend.
    pub disc_loss: Vec<f64>,
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    /// Generator loss after pre-training, per component.
    pub pretrain_loss: Vec<f64>,
    pub pretrain_secs: f64,
    pub rounds: Vec<RoundRecord>,
}

/// A failed run: the error and everything recorded before it.
#[derive(Debug)]
pub struct RunFailure {
    pub error: Error,
    pub history: History,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (after {} completed rounds)", self.error, self.history.rounds.len())
    }
}

impl std::error::Error for RunFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// Trains `model` for `epochs` passes over `subset`; returns the last epoch's loss.
pub fn inner_train_step(
    model: &mut dyn GenerativeModel,
    subset: ArrayView2<f64>,
    epochs: usize,
    rng: &mut dyn RngCore,
) -> Result<f64> {
    if subset.nrows() == 0 {
        return Err(Error::Balancing("component has no training points".into()));
    }
    let mut loss = f64::NAN;
    for _ in 0..epochs {
        loss = model.train_epoch(subset, rng)?;
    }
    Ok(loss)
}

/// `n` draws from `Σ α_j P_j`, with the component of each row.
pub fn sample_mixture_labeled(
    state: &MixtureState,
    n: usize,
    rng: &mut dyn RngCore,
) -> Result<(Array2<f64>, Vec<usize>)> {
    sample_components(&state.models, &state.weights, n, rng)
}

/// Mixture sampling over explicit models and weights, e.g. from a checkpoint.
pub fn sample_components(
    models: &[ComponentModel],
    weights: &MixingWeights,
    n: usize,
    rng: &mut dyn RngCore,
) -> Result<(Array2<f64>, Vec<usize>)> {
    let alpha = &weights.alpha;
    if alpha.len() != models.len() || models.is_empty() {
        return Err(Error::StateCorruption(format!(
            "{} mixing weights for {} models",
            alpha.len(),
            models.len()
        )));
    }
    let total: f64 = alpha.iter().sum();
    if !(total > 0.0) || alpha.iter().any(|&a| !(a >= 0.0)) {
        return Err(Error::StateCorruption(format!("mixing weights {alpha:?} cannot be sampled")));
    }
    let live: Vec<usize> = (0..alpha.len()).filter(|&j| alpha[j] > 0.0).collect();
    if live.len() == 1 {
        let j = live[0];
        return Ok((models[j].sample(n, rng)?, vec![j; n]));
    }
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let u = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = *live.last().expect("some weight is positive");
        for &j in &live {
            acc += alpha[j];
            if u < acc {
                pick = j;
                break;
            }
        }
        labels.push(pick);
    }
    let d = models[0].data_dim();
    let mut out = Array2::zeros((n, d));
    for &j in &live {
        let rows: Vec<usize> = (0..n).filter(|&i| labels[i] == j).collect();
        if rows.is_empty() {
            continue;
        }
        let draws = models[j].sample(rows.len(), rng)?;
        for (r, &i) in rows.iter().enumerate() {
            out.row_mut(i).assign(&draws.row(r));
        }
    }
    Ok((out, labels))
}

/// `n` draws from the mixture.
pub fn sample_mixture(state: &MixtureState, n: usize, rng: &mut dyn RngCore) -> Result<Array2<f64>> {
    Ok(sample_mixture_labeled(state, n, rng)?.0)
}

/// Drives the rounds of one mixture over a fixed dataset.
pub struct Trainer {
    config: TrainConfig,
    data: Dataset,
    state: MixtureState,
    history: History,
    min_points: usize,
    pool: rayon::ThreadPool,
    order: Option<Vec<usize>>,
    checkpoint_dir: Option<PathBuf>,
    pretrained: bool,
}

impl Trainer {
    /// Builds the components and the generation-0 split.
    pub fn new(config: TrainConfig, data: Dataset) -> Result<Self> {
        config.validate()?;
        let n = data.len();
        let k = config.k;
        let mut split_rng = stream(config.seed, Purpose::Split, 0, 0);
        let assignment = match config.init_split {
            InitSplit::IidUniform => uniform_init_split(n, k, &mut split_rng)?,
            InitSplit::EqualPartition => equal_partition_split(n, k, &mut split_rng)?,
        };
        Self::with_assignment(config, data, assignment)
    }

    /// Like [`Trainer::new`] but starting from a given generation-0 assignment.
    pub fn with_assignment(config: TrainConfig, data: Dataset, assignment: Assignment) -> Result<Self> {
        config.validate()?;
        let (n, d) = (data.len(), data.dim());
        let k = config.k;
        if n < k {
            return Err(Error::Config(format!("cannot split {n} points among {k} components")));
        }
        if assignment.n_points() != n || assignment.owner.iter().any(|&o| o >= k) {
            return Err(Error::Precondition("initial assignment does not fit the data".into()));
        }
        let min_points = config.min_points.unwrap_or_else(|| default_min_points(n, k));
        let models = (0..k)
            .map(|j| ComponentModel::build(&config.model, d, &mut stream(config.seed, Purpose::ModelInit, j, 0)))
            .collect::<Result<Vec<_>>>()?;
        let ensemble = match config.backend {
            LikelihoodBackend::Discriminator => Some(DiscriminatorEnsemble::new(
                k,
                d,
                config.discriminator.clone(),
                |j| Box::new(stream(config.seed, Purpose::DiscriminatorInit, j, 0)),
            )?),
            LikelihoodBackend::NearestCentroid => None,
        };
        let mut top_up_rng = stream(config.seed, Purpose::Split, 1, 0);
        let training_sets = random_top_up(&assignment, k, min_points, &mut top_up_rng);
        let weights = mixing_weights(&assignment, k);
        let threads = match config.schedule {
            Schedule::Serial => 1,
            Schedule::Parallel => thread_count(config.threads),
        };
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
        Ok(Self {
            config,
            data,
            state: MixtureState {
                models,
                weights,
                assignment,
                ensemble,
                training_sets,
                t: 0,
            },
            history: History::default(),
            min_points,
            pool,
            order: None,
            checkpoint_dir: None,
            pretrained: false,
        })
    }

    /// Serial schedule visiting components in `order` (a permutation of `0..K`).
    pub fn with_component_order(mut self, order: Vec<usize>) -> Result<Self> {
        let mut sorted = order.clone();
        sorted.sort_unstable();
        if sorted != (0..self.config.k).collect::<Vec<_>>() {
            return Err(Error::Config(format!("{order:?} is not a permutation of the components")));
        }
        self.order = Some(order);
        Ok(self)
    }

    /// Writes `round_<t>/` after every round.
    pub fn with_checkpoint_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.checkpoint_dir = Some(dir.into());
        self
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn state(&self) -> &MixtureState {
        &self.state
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn min_points(&self) -> usize {
        self.min_points
    }

    /// Pre-training on the generation-0 lists. Runs at most once.
    pub fn pretrain(&mut self) -> Result<()> {
        if self.pretrained {
            return Ok(());
        }
        let start = Instant::now();
        let epochs = self.config.pretrain_epochs;
        let losses = if epochs == 0 {
            vec![f64::NAN; self.config.k]
        } else {
            self.train_generators(0, Purpose::Pretrain, epochs)?
        };
        self.history.pretrain_loss = losses;
        self.history.pretrain_secs = start.elapsed().as_secs_f64();
        self.pretrained = true;
        Ok(())
    }

    /// One full round; pre-trains first if that has not happened yet.
    pub fn step(&mut self) -> Result<&RoundRecord> {
        self.pretrain()?;
        let t = self.state.t + 1;
        let start = Instant::now();
        let subset_sizes: Vec<usize> = self.state.training_sets.iter().map(Vec::len).collect();

        let gen_loss = self.train_generators(t, Purpose::Generator, self.config.gen_epochs_per_round)?;
        let (table, disc_loss) = self.likelihood_table(t)?;

        let k = self.config.k;
        let assignment = assign(&table, t);
        self.state.weights = mixing_weights(&assignment, k);
        self.state.training_sets = load_balance(&assignment, &table, self.min_points);
        self.state.assignment = assignment;
        self.state.t = t;
        self.state.check()?;

        self.history.rounds.push(RoundRecord {
            round: t,
            subset_sizes,
            alpha: self.state.weights.alpha.clone(),
            gen_loss,
            disc_loss,
            wall_time_secs: start.elapsed().as_secs_f64(),
        });
        if let Some(dir) = &self.checkpoint_dir {
            write_checkpoint(dir, &self.state, &self.config)?;
        }
        log::info!("round {t}: alpha {:?}", self.state.weights.alpha);
        Ok(self.history.rounds.last().expect("just pushed"))
    }

    /// Pre-training plus the configured rounds.
    pub fn run(mut self) -> std::result::Result<(MixtureState, History), RunFailure> {
        let outcome = (|| {
            self.pretrain()?;
            while self.state.t < self.config.rounds {
                self.step()?;
            }
            Ok(())
        })();
        match outcome {
            Ok(()) => Ok((self.state, self.history)),
            Err(error) => Err(RunFailure {
                error,
                history: self.history,
            }),
        }
    }

    pub fn into_parts(self) -> (MixtureState, History) {
        (self.state, self.history)
    }

    /// Trains every component on its list. A component that fails is rolled
    /// back to its state before this call.
    fn train_generators(&mut self, round: usize, purpose: Purpose, epochs: usize) -> Result<Vec<f64>> {
        let seed = self.config.seed;
        let data = self.data.view();
        let sets = &self.state.training_sets;
        let tasks: Vec<(usize, &mut ComponentModel)> = self.state.models.iter_mut().enumerate().collect();
        let results = run_tasks(&self.pool, self.order.as_deref(), tasks, |(j, model)| {
            let saved = model.checkpoint();
            let subset = data.select(Axis(0), &sets[*j]);
            let mut rng = stream(seed, purpose, *j, round);
            inner_train_step(&mut **model, subset.view(), epochs, &mut rng).inspect_err(|_| {
                if let Ok(restored) = ComponentModel::from_checkpoint(&saved) {
                    **model = restored;
                }
            })
        });
        collect(results, round)
    }

    fn likelihood_table(&mut self, round: usize) -> Result<(LikelihoodTable, Vec<f64>)> {
        let data = self.data.view();
        match self.config.backend {
            LikelihoodBackend::NearestCentroid => {
                let d = self.data.dim();
                let mut centroids = Array2::zeros((self.config.k, d));
                for (j, m) in self.state.models.iter().enumerate() {
                    let c = m.centroid().ok_or_else(|| {
                        Error::Config("nearest_centroid backend with a non-centroid model".into())
                    })?;
                    centroids.row_mut(j).assign(c);
                }
                Ok((nearest_centroid_table(centroids.view(), data)?, Vec::new()))
            }
            LikelihoodBackend::Discriminator => {
                let seed = self.config.seed;
                let n_fake = self.config.fake_samples.unwrap_or(self.data.len());
                let epochs = self.config.disc_epochs_per_round;
                let ensemble = self.state.ensemble.as_mut().expect("discriminator backend has an ensemble");
                let config = ensemble.config().clone();
                let tasks: Vec<(usize, (&ComponentModel, &mut Classifier))> = self
                    .state
                    .models
                    .iter()
                    .zip(ensemble.classifiers_mut().iter_mut())
                    .enumerate()
                    .collect();
                let results = run_tasks(&self.pool, self.order.as_deref(), tasks, |(j, (model, clf))| {
                    let fake = model.sample(n_fake, &mut stream(seed, Purpose::FakeSamples, *j, round))?;
                    let mut rng = stream(seed, Purpose::Discriminator, *j, round);
                    let loss = clf.fit_round(data, fake.view(), epochs, &config, &mut rng)?;
                    Ok((loss, clf.ratios(data)?))
                });
                let results = collect(results, round)?;
                let mut ratios = Array2::zeros((self.data.len(), self.config.k));
                let mut losses = Vec::with_capacity(self.config.k);
                for (j, (loss, col)) in results.into_iter().enumerate() {
                    ratios.column_mut(j).assign(&col);
                    losses.push(loss);
                }
                Ok((LikelihoodTable::from_ratios(ratios)?, losses))
            }
        }
    }
}

/// Runs one task per component, in parallel or in the given serial order,
/// returning results indexed by component.
fn run_tasks<T, R, F>(pool: &rayon::ThreadPool, order: Option<&[usize]>, tasks: Vec<(usize, T)>, f: F) -> Vec<Result<R>>
where
    T: Send,
    R: Send,
    F: Fn(&mut (usize, T)) -> Result<R> + Sync,
{
    match order {
        None => pool.install(|| tasks.into_par_iter().map(|mut t| f(&mut t)).collect()),
        Some(order) => {
            let mut slots: Vec<Option<(usize, T)>> = tasks.into_iter().map(Some).collect();
            let mut out: Vec<Option<Result<R>>> = (0..slots.len()).map(|_| None).collect();
            for &j in order {
                let mut task = slots[j].take().expect("order is a permutation");
                out[j] = Some(f(&mut task));
            }
            out.into_iter().map(|r| r.expect("every component ran")).collect()
        }
    }
}

/// First failure by component index, tagged with round and component.
fn collect<R>(results: Vec<Result<R>>, round: usize) -> Result<Vec<R>> {
    results
        .into_iter()
        .enumerate()
        .map(|(j, r)| r.map_err(|e| e.in_component(round, j)))
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct StateFile {
    t: usize,
    alpha: Vec<f64>,
    config_hash: String,
}

/// Writes `round_<t>/{model_j.bin, disc_j.bin, assignment.csv, state.json}`.
pub fn write_checkpoint(dir: &Path, state: &MixtureState, config: &TrainConfig) -> Result<PathBuf> {
    let round_dir = dir.join(format!("round_{}", state.t));
    fs::create_dir_all(&round_dir)?;
    for (j, m) in state.models.iter().enumerate() {
        fs::write(round_dir.join(format!("model_{j}.bin")), m.checkpoint())?;
    }
    if let Some(e) = &state.ensemble {
        for j in 0..e.len() {
            fs::write(round_dir.join(format!("disc_{j}.bin")), e.classifier(j).checkpoint())?;
        }
    }
    let mut csv = Vec::new();
    state.assignment.write_csv(&mut csv)?;
    fs::write(round_dir.join("assignment.csv"), csv)?;
    let meta = StateFile {
        t: state.t,
        alpha: state.weights.alpha.clone(),
        config_hash: config.hash(),
    };
    fs::write(round_dir.join("state.json"), serde_json::to_vec_pretty(&meta)?)?;
    Ok(round_dir)
}

/// Models and mixing weights from a `round_<t>/` directory.
pub fn load_checkpoint(round_dir: &Path) -> Result<(Vec<ComponentModel>, MixingWeights)> {
    let meta: StateFile = serde_json::from_slice(&fs::read(round_dir.join("state.json"))?)?;
    let models = (0..meta.alpha.len())
        .map(|j| ComponentModel::from_checkpoint(&fs::read(round_dir.join(format!("model_{j}.bin")))?))
        .collect::<Result<Vec<_>>>()?;
    Ok((models, MixingWeights { alpha: meta.alpha }))
}
