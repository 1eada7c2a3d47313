//! Per-component binary classifiers and the likelihood estimates built from them.
//!
//! Classifier `j` separates real training data (label 1) from samples of
//! model `j` (label 0). With balanced classes its output approximates
//! `p_X / (p_X + p_j)`, so `(1 − D) / D` estimates the density ratio
//! `p_j / p_X`. Normalizing those ratios over the training set gives the
//! per-point likelihood table used for assignment.
//!
//! Classifiers never send gradients to the generators; they only decide
//! which points each generator trains on.

mod table;

use ndarray::{concatenate, Array1, Array2, ArrayView2, Axis};
use rand::seq::{index, SliceRandom};
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

pub use table::{LikelihoodTable, Normalization};

use crate::error::{Error, Result};
use crate::models::{Container, ModelKind};
use crate::nn::{adam_step, codec, sigmoid, Activation, AdamConfig, AdamState, Gradients, Mlp, MlpSpec, OutputActivation};

/// Classifier outputs are clamped to `[CLAMP, 1 − CLAMP]` before forming ratios.
pub const CLAMP: f64 = 1e-6;

/// `(1 − D) / D` with `D` clamped away from 0 and 1.
pub fn density_ratio(d: f64) -> f64 {
    let d = d.clamp(CLAMP, 1.0 - CLAMP);
    (1.0 - d) / d
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReinitPolicy {
    /// Re-initialize every round and train from scratch.
    FreshEachRound,
    /// Warm-start from the previous round's parameters and optimizer state.
    Persistent,
}

fn default_hidden() -> Vec<usize> {
    vec![50, 50]
}

fn default_batch_size() -> usize {
    32
}

fn default_policy() -> ReinitPolicy {
    ReinitPolicy::FreshEachRound
}

fn default_activation() -> Activation {
    Activation::Relu
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorConfig {
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    #[serde(default = "default_activation")]
    pub activation: Activation,
    #[serde(default)]
    pub adam: AdamConfig,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_policy")]
    pub policy: ReinitPolicy,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        Self {
            hidden: default_hidden(),
            activation: default_activation(),
            adam: AdamConfig::default(),
            batch_size: default_batch_size(),
            policy: default_policy(),
        }
    }
}

impl DiscriminatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("discriminator batch_size must be at least 1".into()));
        }
        self.adam.validate()
    }

    pub fn spec(&self, data_dim: usize) -> Result<MlpSpec> {
        let mut widths = vec![data_dim];
        widths.extend(&self.hidden);
        widths.push(1);
        MlpSpec::new(widths, self.activation, OutputActivation::Sigmoid)
    }
}

/// Mean binary cross-entropy of `mlp` on `x` with 0/1 `labels`, computed from
/// logits, and its parameter gradients.
pub fn bce_loss(mlp: &Mlp, x: ArrayView2<f64>, labels: &[f64]) -> Result<(f64, Gradients)> {
    if labels.len() != x.nrows() {
        return Err(Error::Dimension {
            context: "classifier labels",
            expected: x.nrows(),
            actual: labels.len(),
        });
    }
    let b = x.nrows() as f64;
    let (_, tape) = mlp.forward(x)?;
    let logits = tape.logits();
    let mut loss = 0.0;
    let mut grad = Array2::zeros(logits.dim());
    for (i, &y) in labels.iter().enumerate() {
        let z = logits[[i, 0]];
        // softplus(z) − y·z
        loss += z.max(0.0) + (-z.abs()).exp().ln_1p() - y * z;
        grad[[i, 0]] = (sigmoid(z) - y) / b;
    }
    let (grads, _) = mlp.backward_from_logits(&tape, grad.view())?;
    Ok((loss / b, grads))
}

/// One density-ratio classifier with its optimizer state.
#[derive(Debug, Clone)]
pub struct Classifier {
    mlp: Mlp,
    opt: AdamState,
}

impl Classifier {
    pub fn new(spec: MlpSpec, adam: AdamConfig, rng: &mut dyn RngCore) -> Result<Self> {
        let mlp = Mlp::new(spec, rng)?;
        let opt = AdamState::new(adam, &mlp.params)?;
        Ok(Self { mlp, opt })
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    pub fn mlp_mut(&mut self) -> &mut Mlp {
        &mut self.mlp
    }

    pub fn reinitialize(&mut self, rng: &mut dyn RngCore) {
        self.mlp.params = crate::nn::MlpParams::glorot(&self.mlp.spec, rng);
        self.opt.reset();
    }

    /// Raw outputs `D(x) ∈ (0, 1)`, one per row.
    pub fn output(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        Ok(self.mlp.predict(x)?.column(0).to_owned())
    }

    /// Clamped density ratios `(1 − D(x)) / D(x)`, one per row.
    pub fn ratios(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        Ok(self.output(x)?.mapv(density_ratio))
    }

    /// One round of training under `config.policy`: real rows are labelled 1,
    /// fake rows 0, and `fake.nrows()` real rows are drawn so the classes
    /// balance. Returns the mean loss of the last epoch.
    pub fn fit_round(
        &mut self,
        real: ArrayView2<f64>,
        fake: ArrayView2<f64>,
        epochs: usize,
        config: &DiscriminatorConfig,
        rng: &mut dyn RngCore,
    ) -> Result<f64> {
        if real.nrows() == 0 || fake.nrows() == 0 {
            return Err(Error::Precondition(
                "discriminator needs non-empty real and fake sets".into(),
            ));
        }
        if config.policy == ReinitPolicy::FreshEachRound {
            self.reinitialize(rng);
        }
        let n_fake = fake.nrows();
        let real_idx: Vec<usize> = if real.nrows() >= n_fake {
            index::sample(rng, real.nrows(), n_fake).into_vec()
        } else {
            (0..n_fake).map(|_| rng.random_range(0..real.nrows())).collect()
        };
        let real_part = real.select(Axis(0), &real_idx);
        let x = concatenate![Axis(0), real_part, fake];
        let labels: Vec<f64> = (0..x.nrows()).map(|i| if i < n_fake { 1.0 } else { 0.0 }).collect();
        if x.rows().into_iter().all(|r| r == x.row(0)) {
            log::warn!("real and fake inputs are all identical; the density ratio will be uninformative");
        }

        let mut order: Vec<usize> = (0..x.nrows()).collect();
        let mut last = f64::NAN;
        for _ in 0..epochs {
            order.shuffle(rng);
            let mut total = 0.0;
            for idx in order.chunks(config.batch_size) {
                let batch = x.select(Axis(0), idx);
                let batch_labels: Vec<f64> = idx.iter().map(|&i| labels[i]).collect();
                let (loss, grads) = bce_loss(&self.mlp, batch.view(), &batch_labels)?;
                adam_step(&mut self.mlp.params, &grads, &mut self.opt)?;
                total += loss * idx.len() as f64;
            }
            last = total / x.nrows() as f64;
        }
        Ok(last)
    }

    pub fn checkpoint(&self) -> Vec<u8> {
        Container {
            kind: ModelKind::Classifier,
            entries: vec![codec::encode(&self.mlp.spec, &self.mlp.params)],
        }
        .to_bytes()
    }
}

/// `K` independent classifiers, one per mixture component.
#[derive(Debug, Clone)]
pub struct DiscriminatorEnsemble {
    config: DiscriminatorConfig,
    classifiers: Vec<Classifier>,
}

impl DiscriminatorEnsemble {
    /// `init_rng(j)` supplies the initialization stream of classifier `j`.
    pub fn new<F>(k: usize, data_dim: usize, config: DiscriminatorConfig, mut init_rng: F) -> Result<Self>
    where
        F: FnMut(usize) -> Box<dyn RngCore>,
    {
        if k == 0 {
            return Err(Error::Config("ensemble needs at least one classifier".into()));
        }
        config.validate()?;
        let spec = config.spec(data_dim)?;
        let classifiers = (0..k)
            .map(|j| Classifier::new(spec.clone(), config.adam, &mut *init_rng(j)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { config, classifiers })
    }

    pub fn config(&self) -> &DiscriminatorConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.classifiers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classifiers.is_empty()
    }

    pub fn classifier(&self, j: usize) -> &Classifier {
        &self.classifiers[j]
    }

    pub fn classifiers_mut(&mut self) -> &mut [Classifier] {
        &mut self.classifiers
    }

    pub fn train_discriminator(
        &mut self,
        j: usize,
        real: ArrayView2<f64>,
        fake: ArrayView2<f64>,
        epochs: usize,
        rng: &mut dyn RngCore,
    ) -> Result<f64> {
        let config = self.config.clone();
        self.classifiers[j].fit_round(real, fake, epochs, &config, rng)
    }

    pub fn density_ratio(&self, j: usize, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        self.classifiers[j].ratios(x)
    }

    /// Column-normalized ratio table over `data`.
    pub fn likelihood_table(&self, data: ArrayView2<f64>) -> Result<LikelihoodTable> {
        let mut ratios = Array2::zeros((data.nrows(), self.len()));
        for (j, c) in self.classifiers.iter().enumerate() {
            ratios.column_mut(j).assign(&c.ratios(data)?);
        }
        LikelihoodTable::from_ratios(ratios)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::relative_error;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn ratio_formula_and_clamp() {
        assert_eq!(density_ratio(0.5), 1.0);
        assert!((density_ratio(0.75) - 1.0 / 3.0).abs() < 1e-15);
        let saturated = density_ratio(1.0);
        assert!(saturated.is_finite());
        // 1 − (1 − CLAMP) is not exactly CLAMP in floating point
        assert!((saturated / (CLAMP / (1.0 - CLAMP)) - 1.0).abs() < 1e-9);
        assert!((density_ratio(0.0) - (1.0 - CLAMP) / CLAMP).abs() < 1e-6);
    }

    #[test]
    fn ratio_strictly_decreasing_on_clamped_range() {
        let mut prev = f64::INFINITY;
        for i in 0..=1000 {
            let d = CLAMP + (1.0 - 2.0 * CLAMP) * i as f64 / 1000.0;
            let r = density_ratio(d);
            assert!(r < prev);
            prev = r;
        }
    }

    #[test]
    fn bce_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let spec = DiscriminatorConfig {
            hidden: vec![5, 4],
            activation: Activation::Tanh,
            ..DiscriminatorConfig::default()
        }
        .spec(2)
        .unwrap();
        let mlp = Mlp::new(spec, &mut rng).unwrap();
        let x = Array2::from_shape_fn((6, 2), |_| rng.random_range(-2.0..2.0));
        let labels = [1.0, 0.0, 1.0, 1.0, 0.0, 0.0];
        let (_, grads) = bce_loss(&mlp, x.view(), &labels).unwrap();
        let analytic = grads.to_flat();
        let base = mlp.params.to_flat();
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for i in 0..base.len() {
            let eval = |delta: f64| {
                let mut probe = mlp.clone();
                let mut flat = base.clone();
                flat[i] += delta;
                probe.params.set_flat(&flat).unwrap();
                bce_loss(&probe, x.view(), &labels).unwrap().0
            };
            let numeric = (eval(h) - eval(-h)) / (2.0 * h);
            worst = worst.max(relative_error(analytic[i], numeric));
        }
        assert!(worst < 1e-4, "{worst}");
    }

    fn gaussian(n: usize, mean: f64, dim: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
        let normal = Normal::new(mean, 1.0).unwrap();
        Array2::from_shape_simple_fn((n, dim), || normal.sample(rng))
    }

    #[test]
    fn separable_classes_are_learned() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let config = DiscriminatorConfig::default();
        let mut ens = DiscriminatorEnsemble::new(1, 2, config, |j| {
            Box::new(ChaCha8Rng::seed_from_u64(100 + j as u64))
        })
        .unwrap();
        let real = gaussian(500, 5.0, 2, &mut rng);
        let fake = gaussian(500, -5.0, 2, &mut rng);
        ens.train_discriminator(0, real.view(), fake.view(), 2, &mut rng).unwrap();
        let test_real = gaussian(500, 5.0, 2, &mut rng);
        let test_fake = gaussian(500, -5.0, 2, &mut rng);
        let c = ens.classifier(0);
        let correct = c.output(test_real.view()).unwrap().iter().filter(|&&d| d > 0.5).count()
            + c.output(test_fake.view()).unwrap().iter().filter(|&&d| d < 0.5).count();
        assert!(correct as f64 / 1000.0 > 0.99, "accuracy {}", correct as f64 / 1000.0);
    }

    #[test]
    fn persistent_policy_warm_starts_and_fresh_policy_reinitializes() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let real = gaussian(64, 1.0, 2, &mut rng);
        let fake = gaussian(64, -1.0, 2, &mut rng);
        for policy in [ReinitPolicy::Persistent, ReinitPolicy::FreshEachRound] {
            let config = DiscriminatorConfig {
                policy,
                ..DiscriminatorConfig::default()
            };
            let mut ens = DiscriminatorEnsemble::new(1, 2, config, |_| {
                Box::new(ChaCha8Rng::seed_from_u64(9))
            })
            .unwrap();
            ens.train_discriminator(0, real.view(), fake.view(), 1, &mut ChaCha8Rng::seed_from_u64(1))
                .unwrap();
            let after_first = ens.classifier(0).mlp().params.clone();
            // zero epochs: only the policy acts
            ens.train_discriminator(0, real.view(), fake.view(), 0, &mut ChaCha8Rng::seed_from_u64(2))
                .unwrap();
            let after_second = &ens.classifier(0).mlp().params;
            match policy {
                ReinitPolicy::Persistent => assert_eq!(&after_first, after_second),
                ReinitPolicy::FreshEachRound => assert_ne!(&after_first, after_second),
            }
        }
    }

    #[test]
    fn empty_inputs_are_rejected() {
        let mut ens = DiscriminatorEnsemble::new(1, 2, DiscriminatorConfig::default(), |_| {
            Box::new(ChaCha8Rng::seed_from_u64(0))
        })
        .unwrap();
        let empty = Array2::<f64>::zeros((0, 2));
        let some = array![[1.0, 2.0]];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(ens.train_discriminator(0, empty.view(), some.view(), 1, &mut rng).is_err());
        assert!(ens.train_discriminator(0, some.view(), empty.view(), 1, &mut rng).is_err());
    }

    #[test]
    fn table_columns_are_stochastic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ens = DiscriminatorEnsemble::new(3, 2, DiscriminatorConfig::default(), |j| {
            Box::new(ChaCha8Rng::seed_from_u64(j as u64))
        })
        .unwrap();
        let data = gaussian(40, 0.0, 2, &mut rng);
        let t = ens.likelihood_table(data.view()).unwrap();
        t.check(1e-9).unwrap();
        assert_eq!(t.normalizers().unwrap().len(), 3);
    }
}
