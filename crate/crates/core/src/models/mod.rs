//! Generative components of the mixture.

pub(crate) mod container;
mod degenerate;
mod vae;

use ndarray::{Array1, Array2, ArrayView2};
use rand::RngCore;
use serde::{Deserialize, Serialize};

pub use container::{Container, ModelKind};
pub use degenerate::DegenerateVae;
pub use vae::{ElboTerms, GaussianVae, VaeConfig};

use crate::error::{Error, Result};

/// A trainable model one can sample from.
pub trait GenerativeModel: Send + Sync {
    fn data_dim(&self) -> usize;

    /// One pass over `subset`; returns the mean training loss.
    fn train_epoch(&mut self, subset: ArrayView2<f64>, rng: &mut dyn RngCore) -> Result<f64>;

    /// `n × data_dim` draws. Depends only on the model and the rng state.
    fn sample(&self, n: usize, rng: &mut dyn RngCore) -> Result<Array2<f64>>;

    fn checkpoint(&self) -> Vec<u8>;

    fn restore(&mut self, bytes: &[u8]) -> Result<()>;
}

/// Which generative model each mixture component uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    GaussianVae(VaeConfig),
    Degenerate,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::GaussianVae(VaeConfig::default())
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        match self {
            ModelConfig::GaussianVae(c) => c.validate(),
            ModelConfig::Degenerate => Ok(()),
        }
    }
}

/// A mixture component: one of the concrete models.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum ComponentModel {
    Vae(GaussianVae),
    Degenerate(DegenerateVae),
}

impl ComponentModel {
    /// Fresh model; degenerate centroids start at the origin.
    pub fn build(config: &ModelConfig, data_dim: usize, rng: &mut dyn RngCore) -> Result<Self> {
        Ok(match config {
            ModelConfig::GaussianVae(c) => ComponentModel::Vae(GaussianVae::new(data_dim, c, rng)?),
            ModelConfig::Degenerate => {
                ComponentModel::Degenerate(DegenerateVae::new(Array1::zeros(data_dim))?)
            }
        })
    }

    pub fn from_checkpoint(bytes: &[u8]) -> Result<Self> {
        let c = Container::from_bytes(bytes)?;
        match c.kind {
            ModelKind::GaussianVae => Ok(ComponentModel::Vae(GaussianVae::from_container(&c)?)),
            ModelKind::Degenerate => Ok(ComponentModel::Degenerate(DegenerateVae::from_container(&c)?)),
            ModelKind::Classifier => Err(Error::Format(
                "classifier checkpoint where a generative model was expected".into(),
            )),
        }
    }

    /// The centroid of a degenerate model.
    pub fn centroid(&self) -> Option<&Array1<f64>> {
        match self {
            ComponentModel::Degenerate(m) => Some(m.centroid()),
            ComponentModel::Vae(_) => None,
        }
    }
}

impl GenerativeModel for ComponentModel {
    fn data_dim(&self) -> usize {
        match self {
            ComponentModel::Vae(m) => m.data_dim(),
            ComponentModel::Degenerate(m) => m.data_dim(),
        }
    }

    fn train_epoch(&mut self, subset: ArrayView2<f64>, rng: &mut dyn RngCore) -> Result<f64> {
        match self {
            ComponentModel::Vae(m) => m.train_epoch(subset, rng),
            ComponentModel::Degenerate(m) => m.train_epoch(subset),
        }
    }

    fn sample(&self, n: usize, rng: &mut dyn RngCore) -> Result<Array2<f64>> {
        match self {
            ComponentModel::Vae(m) => m.sample(n, rng),
            ComponentModel::Degenerate(m) => Ok(m.sample(n)),
        }
    }

    fn checkpoint(&self) -> Vec<u8> {
        match self {
            ComponentModel::Vae(m) => m.to_container().to_bytes(),
            ComponentModel::Degenerate(m) => m.to_container().to_bytes(),
        }
    }

    fn restore(&mut self, bytes: &[u8]) -> Result<()> {
        *self = Self::from_checkpoint(bytes)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn checkpoint_restore_gives_identical_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data = crate::test_util::gaussian_blob(200, &mut rng);
        let mut model = ComponentModel::build(&ModelConfig::default(), 2, &mut rng).unwrap();
        model.train_epoch(data.view(), &mut rng).unwrap();
        let bytes = model.checkpoint();

        let mut restored = ComponentModel::build(&ModelConfig::default(), 2, &mut rng).unwrap();
        restored.restore(&bytes).unwrap();
        let a = model.sample(50, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = restored.sample(50, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);

        // optimizer state travels too: continued training stays in lockstep
        model.train_epoch(data.view(), &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
        restored.train_epoch(data.view(), &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
        assert_eq!(model.checkpoint(), restored.checkpoint());
    }

    #[test]
    fn degenerate_checkpoint_round_trip() {
        let m = ComponentModel::Degenerate(DegenerateVae::new(ndarray::array![0.1, -3.0]).unwrap());
        let back = ComponentModel::from_checkpoint(&m.checkpoint()).unwrap();
        assert_eq!(back.centroid(), m.centroid());
    }
}
