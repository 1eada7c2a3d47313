use ndarray::{Array1, Array2, ArrayView2};

use super::container::{Container, ModelKind};
use crate::error::{Error, Result};
use crate::nn::codec::Reader;

/// Constant-encoder, identity-decoder VAE: `x = μ + ε`.
///
/// Its training objective `E ½‖x − μ‖²` is minimized exactly by the subset
/// mean, so an epoch sets `μ` in closed form.
#[derive(Debug, Clone, PartialEq)]
pub struct DegenerateVae {
    centroid: Array1<f64>,
}

impl DegenerateVae {
    pub fn new(centroid: Array1<f64>) -> Result<Self> {
        if !centroid.iter().all(|v| v.is_finite()) {
            return Err(Error::Numeric("degenerate VAE centroid".into()));
        }
        Ok(Self { centroid })
    }

    pub fn centroid(&self) -> &Array1<f64> {
        &self.centroid
    }

    pub fn data_dim(&self) -> usize {
        self.centroid.len()
    }

    /// Sets the centroid to the mean of `subset`; returns the mean of `½‖x − μ‖²`.
    pub fn train_epoch(&mut self, subset: ArrayView2<f64>) -> Result<f64> {
        if subset.nrows() == 0 {
            return Err(Error::Balancing(
                "degenerate VAE asked to train on an empty subset".into(),
            ));
        }
        if subset.ncols() != self.data_dim() {
            return Err(Error::Dimension {
                context: "degenerate VAE training data",
                expected: self.data_dim(),
                actual: subset.ncols(),
            });
        }
        let mut sum = Array1::<f64>::zeros(subset.ncols());
        for row in subset.rows() {
            sum += &row;
        }
        self.centroid = sum / subset.nrows() as f64;
        let loss: f64 = subset
            .rows()
            .into_iter()
            .map(|row| 0.5 * (&row - &self.centroid).mapv(|v| v * v).sum())
            .sum();
        Ok(loss / subset.nrows() as f64)
    }

    pub fn sample(&self, n: usize) -> Array2<f64> {
        let mut out = Array2::zeros((n, self.data_dim()));
        out.rows_mut().into_iter().for_each(|mut r| r.assign(&self.centroid));
        out
    }

    pub(crate) fn to_container(&self) -> Container {
        let mut mu = Vec::with_capacity(8 * self.centroid.len());
        for v in &self.centroid {
            mu.extend_from_slice(&v.to_le_bytes());
        }
        Container {
            kind: ModelKind::Degenerate,
            entries: vec![(self.centroid.len() as u32).to_le_bytes().to_vec(), mu],
        }
    }

    pub(crate) fn from_container(c: &Container) -> Result<Self> {
        if c.kind != ModelKind::Degenerate || c.entries.len() != 2 {
            return Err(Error::Format("not a degenerate VAE checkpoint".into()));
        }
        let d = Reader::new(&c.entries[0]).u32()? as usize;
        let mut r = Reader::new(&c.entries[1]);
        let mu = r.f64s(d)?;
        if !r.is_empty() {
            return Err(Error::Format("centroid length mismatch".into()));
        }
        Self::new(Array1::from(mu))
    }
}
