use ndarray::{Array2, ArrayView1, Axis};

use crate::error::{Error, Result};

/// How the rows or columns of a [`LikelihoodTable`] are normalized.
#[derive(Debug, Clone, PartialEq)]
pub enum Normalization {
    /// Each column is a distribution over the training set; `normalizers[j]`
    /// is the raw ratio total `Z_j` that was divided out.
    Columns { normalizers: Vec<f64> },
    /// Each row is a softmax over components (nearest-centroid backend).
    Rows,
}

/// `N × K` per-point likelihood estimates, one column per component.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodTable {
    values: Array2<f64>,
    normalization: Normalization,
}

impl LikelihoodTable {
    /// Normalizes raw density ratios column by column: `values[i][j] = r_ij / Z_j`
    /// with `Z_j = Σ_i r_ij`.
    pub fn from_ratios(ratios: Array2<f64>) -> Result<Self> {
        if ratios.nrows() == 0 || ratios.ncols() == 0 {
            return Err(Error::Precondition("likelihood table needs N ≥ 1 and K ≥ 1".into()));
        }
        if ratios.iter().any(|&r| !(r >= 0.0 && r.is_finite())) {
            return Err(Error::Domain("density ratios must be finite and non-negative".into()));
        }
        let normalizers: Vec<f64> = ratios.sum_axis(Axis(0)).to_vec();
        if let Some(j) = normalizers.iter().position(|&z| !(z > 0.0)) {
            return Err(Error::Domain(format!("column {j} has zero total ratio")));
        }
        let mut values = ratios;
        for (mut col, &z) in values.axis_iter_mut(Axis(1)).zip(&normalizers) {
            col /= z;
        }
        Ok(Self {
            values,
            normalization: Normalization::Columns { normalizers },
        })
    }

    /// Row-wise softmax of log-likelihood scores.
    pub fn from_log_scores(scores: Array2<f64>) -> Result<Self> {
        if scores.nrows() == 0 || scores.ncols() == 0 {
            return Err(Error::Precondition("likelihood table needs N ≥ 1 and K ≥ 1".into()));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::Numeric("log-likelihood score".into()));
        }
        let mut values = scores;
        for mut row in values.rows_mut() {
            let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            row.mapv_inplace(|v| (v - max).exp());
            let total = row.sum();
            row /= total;
        }
        Ok(Self {
            values,
            normalization: Normalization::Rows,
        })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn column(&self, j: usize) -> ArrayView1<'_, f64> {
        self.values.column(j)
    }

    pub fn normalization(&self) -> &Normalization {
        &self.normalization
    }

    /// `Z_j` for ratio-based tables.
    pub fn normalizers(&self) -> Option<&[f64]> {
        match &self.normalization {
            Normalization::Columns { normalizers } => Some(normalizers),
            Normalization::Rows => None,
        }
    }

    pub fn n_points(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_components(&self) -> usize {
        self.values.ncols()
    }

    /// Non-negativity and unit sums along the normalized axis, to `tol`.
    pub fn check(&self, tol: f64) -> Result<()> {
        if self.values.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::StateCorruption("negative likelihood entry".into()));
        }
        let axis = match self.normalization {
            Normalization::Columns { .. } => Axis(0),
            Normalization::Rows => Axis(1),
        };
        for (i, s) in self.values.sum_axis(axis).iter().enumerate() {
            if (s - 1.0).abs() > tol {
                return Err(Error::StateCorruption(format!(
                    "likelihood table lane {i} sums to {s}"
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn two_point_column() {
        let t = LikelihoodTable::from_ratios(array![[3.0], [1.0]]).unwrap();
        assert_eq!(t.values(), &array![[0.75], [0.25]]);
        assert_eq!(t.normalizers().unwrap(), &[4.0]);
    }

    #[test]
    fn equal_ratios_give_uniform_column() {
        let t = LikelihoodTable::from_ratios(Array2::from_elem((5, 2), 0.3)).unwrap();
        assert!(t.values().iter().all(|&v| (v - 0.2).abs() < 1e-15));
    }

    #[test]
    fn zero_column_is_rejected() {
        assert!(LikelihoodTable::from_ratios(array![[0.0, 1.0], [0.0, 2.0]]).is_err());
    }

    #[test]
    fn row_softmax_sums_to_one() {
        let t = LikelihoodTable::from_log_scores(array![[-1.0, -3.0, -1000.0], [0.0, 0.0, 0.0]]).unwrap();
        t.check(1e-12).unwrap();
        assert!((t.values()[[1, 2]] - 1.0 / 3.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn columns_sum_to_one(
            raw in prop::collection::vec(1e-6f64..1e6, 12),
        ) {
            let ratios = Array2::from_shape_vec((4, 3), raw.clone()).unwrap();
            let t = LikelihoodTable::from_ratios(ratios).unwrap();
            // independent recomputation of the column sums
            for j in 0..3 {
                let s: f64 = (0..4).map(|i| t.values()[[i, j]]).sum();
                prop_assert!((s - 1.0).abs() < 1e-12);
            }
            prop_assert!(t.check(1e-9).is_ok());
        }

        #[test]
        fn rescaling_a_column_changes_nothing(
            raw in prop::collection::vec(1e-3f64..1e3, 12),
            scale in 1e-3f64..1e3,
            col in 0usize..3,
        ) {
            let ratios = Array2::from_shape_vec((4, 3), raw).unwrap();
            let mut scaled = ratios.clone();
            scaled.column_mut(col).mapv_inplace(|v| v * scale);
            let a = LikelihoodTable::from_ratios(ratios).unwrap();
            let b = LikelihoodTable::from_ratios(scaled).unwrap();
            for (x, y) in a.values().iter().zip(b.values().iter()) {
                prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1e-300));
            }
        }
    }
}
