//! Experiment configuration files.

use std::fs;
use std::path::{Path, PathBuf};

use genmix::data::GmmSpec;
use genmix::models::ModelConfig;
use genmix::trainer::{InitSplit, TrainConfig};
use genmix::{Error, Result};
use serde::{Deserialize, Serialize};

/// Which training procedure to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    /// Competitive mixture training.
    Kvae,
    /// K models, each on a fixed disjoint random N/K split.
    Bag,
    /// One wider model on all the data.
    SingleLarge,
}

impl Baseline {
    pub fn as_str(self) -> &'static str {
        match self {
            Baseline::Kvae => "kvae",
            Baseline::Bag => "bag",
            Baseline::SingleLarge => "single_large",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Synthetic { gmm: GmmSpec, n: usize },
    Csv { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    #[serde(default = "default_holdout")]
    pub holdout_fraction: f64,
    /// Total mixture samples the KDE is fit on.
    #[serde(default = "default_kde_samples")]
    pub kde_samples: usize,
    /// Generated points drawn per plot.
    #[serde(default = "default_plot_samples")]
    pub plot_samples: usize,
    /// Plot every this many rounds (the first and last are always plotted); 0 disables plots.
    #[serde(default = "default_plot_every")]
    pub plot_every: usize,
}

fn default_holdout() -> f64 {
    0.2
}

fn default_kde_samples() -> usize {
    200_000
}

fn default_plot_samples() -> usize {
    2_000
}

fn default_plot_every() -> usize {
    10
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            holdout_fraction: default_holdout(),
            kde_samples: default_kde_samples(),
            plot_samples: default_plot_samples(),
            plot_every: default_plot_every(),
        }
    }
}

/// Hidden width of the single-model baseline.
pub const SINGLE_LARGE_WIDTH: usize = 150;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub baseline: Baseline,
    pub data: DataSource,
    pub train: TrainConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    /// Where run artifacts go; `runs/<name>_seed<seed>` when absent.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        let mut config: Self = serde_json::from_str(&text)?;
        // relative data paths are relative to the config file
        if let DataSource::Csv { path: data } = &mut config.data {
            if data.is_relative() {
                if let Some(dir) = path.parent() {
                    *data = dir.join(&*data);
                }
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::Config("name: must not be empty".into()));
        }
        match &self.data {
            DataSource::Synthetic { gmm, n } => {
                gmm.validate().map_err(|e| field("data.gmm", e))?;
                if *n == 0 {
                    return Err(Error::Config("data.n: must be at least 1".into()));
                }
            }
            DataSource::Csv { .. } => {}
        }
        let e = &self.eval;
        if !(e.holdout_fraction > 0.0 && e.holdout_fraction < 1.0) {
            return Err(Error::Config(format!(
                "eval.holdout_fraction: {} is not in (0, 1)",
                e.holdout_fraction
            )));
        }
        if e.kde_samples < 2 {
            return Err(Error::Config("eval.kde_samples: need at least 2".into()));
        }
        self.effective_train().validate().map_err(|e| field("train", e))
    }

    /// The training configuration after the baseline's constraints.
    pub fn effective_train(&self) -> TrainConfig {
        let mut t = self.train.clone();
        match self.baseline {
            Baseline::Kvae => {}
            Baseline::Bag => {
                t.rounds = 0;
                t.init_split = InitSplit::EqualPartition;
            }
            Baseline::SingleLarge => {
                t.k = 1;
                t.rounds = 0;
                if let ModelConfig::GaussianVae(v) = &mut t.model {
                    v.hidden = vec![SINGLE_LARGE_WIDTH; v.hidden.len().max(1)];
                }
            }
        }
        t
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.train.seed = seed;
        self
    }

    pub fn run_id(&self) -> String {
        format!("{}_seed{}", self.name, self.train.seed)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("runs").join(self.run_id()))
    }

    pub fn n_modes(&self) -> Option<usize> {
        match &self.data {
            DataSource::Synthetic { gmm, .. } => Some(gmm.n_modes()),
            DataSource::Csv { .. } => None,
        }
    }
}

fn field(name: &str, e: Error) -> Error {
    match e {
        Error::Config(msg) => Error::Config(format!("{name}: {msg}")),
        other => Error::Config(format!("{name}: {other}")),
    }
}

/// Mode counts with shipped presets.
pub const PRESET_MODES: [usize; 3] = [3, 5, 9];

/// Built-in presets, named `<modes>modes_<baseline>`.
pub fn preset(name: &str) -> Option<ExperimentConfig> {
    let (modes, baseline) = name.split_once("modes_")?;
    let modes: usize = modes.parse().ok()?;
    let baseline = match baseline {
        "kvae" => Baseline::Kvae,
        "bag" => Baseline::Bag,
        "single_large" => Baseline::SingleLarge,
        _ => return None,
    };
    build_preset(modes, baseline)
}

pub fn preset_names() -> Vec<String> {
    let mut names = Vec::new();
    for m in PRESET_MODES {
        for b in [Baseline::Kvae, Baseline::Bag, Baseline::SingleLarge] {
            names.push(format!("{m}modes_{}", b.as_str()));
        }
    }
    names
}

fn build_preset(modes: usize, baseline: Baseline) -> Option<ExperimentConfig> {
    let gmm = GmmSpec::preset(modes).ok()?;
    // (pre-training epochs, rounds, kde samples)
    let (pretrain, rounds, kde_samples) = match modes {
        3 => (10, 60, 200_000),
        5 => (100, 80, 500_000),
        9 => (300, 100, 2_000_000),
        _ => return None,
    };
    let vae = genmix::models::VaeConfig {
        obs_variance: 0.02,
        ..Default::default()
    };
    let pretrain_epochs = match baseline {
        Baseline::Kvae => pretrain,
        Baseline::Bag | Baseline::SingleLarge => 100,
    };
    let train = TrainConfig {
        k: modes,
        rounds,
        pretrain_epochs,
        gen_epochs_per_round: 10,
        disc_epochs_per_round: 2,
        model: ModelConfig::GaussianVae(vae),
        ..TrainConfig::default()
    };
    Some(ExperimentConfig {
        name: format!("{modes}modes_{}", baseline.as_str()),
        baseline,
        data: DataSource::Synthetic { gmm, n: 8_000 },
        train,
        eval: EvalConfig {
            kde_samples,
            ..EvalConfig::default()
        },
        output_dir: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_round_trip() {
        for name in preset_names() {
            let c = preset(&name).unwrap();
            c.validate().unwrap();
            assert_eq!(c.name, name);
            let json = serde_json::to_string(&c).unwrap();
            let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
            assert_eq!(back, c);
        }
        assert!(preset("4modes_kvae").is_none());
        assert!(preset("3modes_other").is_none());
    }

    #[test]
    fn baseline_constraints() {
        let bag = preset("3modes_bag").unwrap().effective_train();
        assert_eq!(bag.rounds, 0);
        assert_eq!(bag.init_split, InitSplit::EqualPartition);
        let single = preset("5modes_single_large").unwrap().effective_train();
        assert_eq!(single.k, 1);
        match single.model {
            ModelConfig::GaussianVae(v) => assert_eq!(v.hidden, vec![150, 150]),
            other => panic!("unexpected model {other:?}"),
        }
    }

    #[test]
    fn field_level_messages() {
        let mut c = preset("3modes_kvae").unwrap();
        c.eval.holdout_fraction = 1.5;
        let msg = c.validate().unwrap_err().to_string();
        assert!(msg.contains("eval.holdout_fraction"), "{msg}");
        let mut c = preset("3modes_kvae").unwrap();
        c.train.gen_epochs_per_round = 0;
        let msg = c.validate().unwrap_err().to_string();
        assert!(msg.contains("train") && msg.contains("gen_epochs_per_round"), "{msg}");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let mut v = serde_json::to_value(preset("3modes_kvae").unwrap()).unwrap();
        v["train"]["lerning_rate"] = serde_json::json!(0.1);
        assert!(serde_json::from_value::<ExperimentConfig>(v).is_err());
    }
}
