//! Running one experiment end to end and writing its artifacts.
//!
//! A run directory holds:
//!
//! - `config.json`: the configuration as run;
//! - `inputs.sha256`: hash of the configuration and the training data;
//! - `metrics.csv`: `run_id,round,metric,value`, deterministic for a seed;
//! - `history.csv`: per-round, per-component training records;
//! - `timing.csv`: wall-clock times, kept apart so the rest stays reproducible;
//! - `checkpoints/round_<t>/`: models, classifiers, assignment, state;
//! - `samples_round_<t>.svg`: generated samples over the true data.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use genmix::data::{generate_synthetic, Dataset};
use genmix::eval::{cluster_metrics, kde_log_likelihood, scott_bandwidth};
use genmix::rng::{stream, Purpose};
use genmix::trainer::{sample_mixture, sample_mixture_labeled, History, MixtureState, Trainer};
use genmix::{Error, Result};
use ndarray::Axis;
use sha2::{Digest, Sha256};

use crate::config::{DataSource, ExperimentConfig};
use crate::plot::scatter_svg;

/// Truth points drawn in plots.
const PLOT_TRUTH: usize = 3_000;

/// Final numbers of a completed run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub run_id: String,
    pub dir: PathBuf,
    pub kde_loglik: f64,
    pub kde_bandwidth: f64,
    /// Against true labels, when the data has them.
    pub purity: Option<f64>,
    pub ari: Option<f64>,
    pub alpha: Vec<f64>,
    pub rounds: usize,
}

/// A failure after the run directory was created; partial artifacts remain.
#[derive(Debug)]
pub struct ExperimentError {
    pub error: Error,
    pub dir: Option<PathBuf>,
}

impl std::fmt::Display for ExperimentError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.dir {
            Some(d) => write!(f, "{} (partial results in {})", self.error, d.display()),
            None => write!(f, "{}", self.error),
        }
    }
}

impl std::error::Error for ExperimentError {}

impl From<Error> for ExperimentError {
    fn from(error: Error) -> Self {
        Self { error, dir: None }
    }
}

/// Training and held-out data for a configuration.
pub fn load_data(config: &ExperimentConfig) -> Result<(Dataset, Dataset)> {
    let seed = config.train.seed;
    let full = match &config.data {
        DataSource::Synthetic { gmm, n } => generate_synthetic(gmm, *n, &mut stream(seed, Purpose::Data, 0, 0))?,
        DataSource::Csv { path } => Dataset::load_csv(path)?,
    };
    full.split_holdout(config.eval.holdout_fraction, &mut stream(seed, Purpose::Holdout, 0, 0))
}

/// Hash of the effective configuration and the training data bytes.
pub fn input_hash(config: &ExperimentConfig, train: &Dataset) -> Result<String> {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(config)?);
    let mut csv = Vec::new();
    train.write_csv(&mut csv)?;
    h.update(&csv);
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

/// Runs the experiment and writes all artifacts under `config.output_dir()`.
pub fn run_experiment(config: &ExperimentConfig) -> std::result::Result<RunSummary, ExperimentError> {
    config.validate()?;
    let (train, held_out) = load_data(config)?;
    let dir = config.output_dir();
    let in_dir = |error: Error| ExperimentError {
        error,
        dir: Some(dir.clone()),
    };
    fs::create_dir_all(&dir).map_err(|e| in_dir(e.into()))?;
    let mut run = Run::new(config, train, held_out, dir.clone()).map_err(in_dir)?;
    let outcome = run.execute();
    // whatever happened, keep what was recorded
    let flushed = run.flush();
    let summary = outcome.map_err(in_dir)?;
    flushed.map_err(in_dir)?;
    Ok(summary)
}

struct Run<'a> {
    config: &'a ExperimentConfig,
    run_id: String,
    train: Dataset,
    held_out: Dataset,
    dir: PathBuf,
    metrics: String,
    timing: String,
    history: History,
}

impl<'a> Run<'a> {
    fn new(config: &'a ExperimentConfig, train: Dataset, held_out: Dataset, dir: PathBuf) -> Result<Self> {
        fs::write(dir.join("config.json"), serde_json::to_vec_pretty(config)?)?;
        fs::write(dir.join("inputs.sha256"), format!("{}\n", input_hash(config, &train)?))?;
        Ok(Self {
            config,
            run_id: config.run_id(),
            train,
            held_out,
            dir,
            metrics: "run_id,round,metric,value\n".into(),
            timing: "phase,round,wall_time_secs\n".into(),
            history: History::default(),
        })
    }

    fn metric(&mut self, round: usize, name: &str, value: f64) {
        let _ = writeln!(self.metrics, "{},{round},{name},{value:?}", self.run_id);
    }

    fn execute(&mut self) -> Result<RunSummary> {
        let train_config = self.config.effective_train();
        let rounds = train_config.rounds;
        let mut trainer =
            Trainer::new(train_config, self.train.clone())?.with_checkpoint_dir(self.dir.join("checkpoints"));
        let pretrained = trainer.pretrain();
        self.history = trainer.history().clone();
        pretrained?;
        let _ = writeln!(self.timing, "pretrain,0,{:?}", trainer.history().pretrain_secs);
        self.after_round(trainer.state(), 0, rounds)?;
        while trainer.state().t < rounds {
            let stepped = trainer.step().map(|r| r.wall_time_secs);
            self.history = trainer.history().clone();
            let secs = stepped?;
            let t = trainer.state().t;
            let _ = writeln!(self.timing, "round,{t},{secs:?}");
            self.after_round(trainer.state(), t, rounds)?;
        }
        let (state, _) = trainer.into_parts();
        self.finish(&state)
    }

    fn after_round(&mut self, state: &MixtureState, t: usize, rounds: usize) -> Result<()> {
        for (j, a) in state.weights.alpha.clone().into_iter().enumerate() {
            self.metric(t, &format!("alpha_{j}"), a);
        }
        if let Some(labels) = &self.train.labels {
            let m = cluster_metrics(&state.assignment.owner, labels)?;
            self.metric(t, "purity", m.purity);
            self.metric(t, "ari", m.adjusted_rand_index);
        }
        let every = self.config.eval.plot_every;
        if every > 0 && (t == 0 || t == rounds || t.is_multiple_of(every)) {
            self.plot(state, t)?;
        }
        Ok(())
    }

    fn plot(&self, state: &MixtureState, t: usize) -> Result<()> {
        let seed = self.config.train.seed;
        let n = self.config.eval.plot_samples;
        let (samples, comps) = sample_mixture_labeled(state, n, &mut stream(seed, Purpose::Plot, 0, t))?;
        let stride = self.train.len().div_ceil(PLOT_TRUTH).max(1);
        let idx: Vec<usize> = (0..self.train.len()).step_by(stride).collect();
        let truth = self.train.points.select(Axis(0), &idx);
        let title = format!("{} round {t}", self.run_id);
        let svg = scatter_svg(truth.view(), samples.view(), &comps, &title);
        fs::write(self.dir.join(format!("samples_round_{t}.svg")), svg)?;
        Ok(())
    }

    fn finish(&mut self, state: &MixtureState) -> Result<RunSummary> {
        let seed = self.config.train.seed;
        let start = Instant::now();
        let m = self.config.eval.kde_samples;
        let samples = sample_mixture(state, m, &mut stream(seed, Purpose::Evaluation, 0, 0))?;
        let h = scott_bandwidth(samples.view())?;
        let ll = kde_log_likelihood(samples.view(), self.held_out.points.view(), h)?;
        let _ = writeln!(self.timing, "evaluation,{},{:?}", state.t, start.elapsed().as_secs_f64());
        let t = state.t;
        self.metric(t, "kde_loglik", ll);
        self.metric(t, "kde_bandwidth", h);
        self.metric(t, "kde_samples", m as f64);
        let (purity, ari) = match &self.train.labels {
            Some(labels) => {
                let c = cluster_metrics(&state.assignment.owner, labels)?;
                (Some(c.purity), Some(c.adjusted_rand_index))
            }
            None => (None, None),
        };
        log::info!("{}: kde log-likelihood {ll:.4} (h = {h:.4})", self.run_id);
        Ok(RunSummary {
            run_id: self.run_id.clone(),
            dir: self.dir.clone(),
            kde_loglik: ll,
            kde_bandwidth: h,
            purity,
            ari,
            alpha: state.weights.alpha.clone(),
            rounds: t,
        })
    }

    fn flush(&self) -> Result<()> {
        fs::write(self.dir.join("metrics.csv"), &self.metrics)?;
        fs::write(self.dir.join("timing.csv"), &self.timing)?;
        write_history(&self.dir.join("history.csv"), &self.history)
    }
}

/// `round,component,subset_size,alpha,gen_loss,disc_loss`; round 0 is pre-training.
pub fn write_history(path: &Path, history: &History) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(out, "round,component,subset_size,alpha,gen_loss,disc_loss")?;
    for (j, loss) in history.pretrain_loss.iter().enumerate() {
        writeln!(out, "0,{j},,,{loss:?},")?;
    }
    for r in &history.rounds {
        for j in 0..r.alpha.len() {
            let disc = r.disc_loss.get(j).map(|v| format!("{v:?}")).unwrap_or_default();
            writeln!(
                out,
                "{},{j},{},{:?},{:?},{disc}",
                r.round, r.subset_sizes[j], r.alpha[j], r.gen_loss[j]
            )?;
        }
    }
    out.flush()?;
    Ok(())
}
