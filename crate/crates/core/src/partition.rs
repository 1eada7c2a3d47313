//! Hard assignment of training points to components.

use std::io::Write;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::discriminators::LikelihoodTable;
use crate::error::{Error, Result};

/// Owner of every training point at one generation; `c_j(x_i) = 1` iff
/// `owner[i] == j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub owner: Vec<usize>,
    pub generation: usize,
}

impl Assignment {
    pub fn n_points(&self) -> usize {
        self.owner.len()
    }

    /// Point indices owned by each of `k` components.
    pub fn members(&self, k: usize) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); k];
        for (i, &o) in self.owner.iter().enumerate() {
            out[o].push(i);
        }
        out
    }

    /// `N × k` indicator matrix of the partition functions.
    pub fn one_hot(&self, k: usize) -> Array2<u8> {
        let mut m = Array2::zeros((self.owner.len(), k));
        for (i, &o) in self.owner.iter().enumerate() {
            m[[i, o]] = 1;
        }
        m
    }

    pub fn win_counts(&self, k: usize) -> Vec<usize> {
        let mut counts = vec![0; k];
        for &o in &self.owner {
            counts[o] += 1;
        }
        counts
    }

    /// CSV rows `point_index,owner,generation`, with header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "point_index,owner,generation")?;
        for (i, o) in self.owner.iter().enumerate() {
            writeln!(w, "{i},{o},{}", self.generation)?;
        }
        Ok(())
    }
}

/// Mixture coefficients: fraction of points each component won.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingWeights {
    pub alpha: Vec<f64>,
}

impl MixingWeights {
    pub fn uniform(k: usize) -> Self {
        Self {
            alpha: vec![1.0 / k as f64; k],
        }
    }
}

/// Each row goes to its highest-likelihood column; ties go to the lowest index.
pub fn assign(table: &LikelihoodTable, generation: usize) -> Assignment {
    Assignment {
        owner: table.values().rows().into_iter().map(argmax).collect(),
        generation,
    }
}

fn argmax(row: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = j;
        }
    }
    best
}

pub fn mixing_weights(a: &Assignment, k: usize) -> MixingWeights {
    let n = a.n_points() as f64;
    MixingWeights {
        alpha: a.win_counts(k).into_iter().map(|c| c as f64 / n).collect(),
    }
}

/// Generation-0 assignment, i.i.d. uniform over components.
pub fn uniform_init_split(n: usize, k: usize, rng: &mut dyn RngCore) -> Result<Assignment> {
    check_split(n, k)?;
    Ok(Assignment {
        owner: (0..n).map(|_| rng.random_range(0..k)).collect(),
        generation: 0,
    })
}

/// Generation-0 assignment into `k` disjoint random parts of (almost) equal size.
pub fn equal_partition_split(n: usize, k: usize, rng: &mut dyn RngCore) -> Result<Assignment> {
    check_split(n, k)?;
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let mut owner = vec![0; n];
    for (pos, &i) in perm.iter().enumerate() {
        owner[i] = pos * k / n;
    }
    Ok(Assignment { owner, generation: 0 })
}

fn check_split(n: usize, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Config("K must be at least 1".into()));
    }
    if n < k {
        return Err(Error::Config(format!("cannot split {n} points among {k} components")));
    }
    Ok(())
}

/// Default threshold below which a component is topped up: `max(1, ⌈N / 4K⌉)`.
pub fn default_min_points(n: usize, k: usize) -> usize {
    n.div_ceil(4 * k).max(1)
}

/// Per-component training index lists.
///
/// A component keeps exactly the points it won. One that won fewer than
/// `min_points` is topped up with its highest-likelihood points among those
/// it did not win. Mixing weights are unaffected.
pub fn load_balance(a: &Assignment, table: &LikelihoodTable, min_points: usize) -> Vec<Vec<usize>> {
    let k = table.n_components();
    let mut lists = a.members(k);
    for (j, list) in lists.iter_mut().enumerate() {
        if list.len() >= min_points {
            continue;
        }
        let col = table.column(j);
        let mut others: Vec<usize> = (0..a.n_points()).filter(|&i| a.owner[i] != j).collect();
        // highest likelihood first; index breaks ties
        others.sort_by(|&x, &y| col[y].total_cmp(&col[x]).then(x.cmp(&y)));
        let need = (min_points - list.len()).min(others.len());
        list.extend_from_slice(&others[..need]);
    }
    lists
}

/// Same rule as [`load_balance`] for generation 0, where no likelihoods
/// exist yet: the top-up points are drawn uniformly at random.
pub fn random_top_up(a: &Assignment, k: usize, min_points: usize, rng: &mut dyn RngCore) -> Vec<Vec<usize>> {
    let mut lists = a.members(k);
    for (j, list) in lists.iter_mut().enumerate() {
        if list.len() >= min_points {
            continue;
        }
        let mut others: Vec<usize> = (0..a.n_points()).filter(|&i| a.owner[i] != j).collect();
        others.shuffle(rng);
        let need = (min_points - list.len()).min(others.len());
        list.extend_from_slice(&others[..need]);
    }
    lists
}

/// Row-softmax of `−½‖x_i − μ_j‖²`: the per-row argmax is the nearest centroid.
pub fn nearest_centroid_table(centroids: ArrayView2<f64>, data: ArrayView2<f64>) -> Result<LikelihoodTable> {
    if centroids.ncols() != data.ncols() {
        return Err(Error::Dimension {
            context: "centroid dimension",
            expected: data.ncols(),
            actual: centroids.ncols(),
        });
    }
    if centroids.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("centroid".into()));
    }
    let mut scores = Array2::zeros((data.nrows(), centroids.nrows()));
    for (i, x) in data.rows().into_iter().enumerate() {
        for (j, mu) in centroids.rows().into_iter().enumerate() {
            let sq: f64 = x.iter().zip(mu.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            scores[[i, j]] = -0.5 * sq;
        }
    }
    LikelihoodTable::from_log_scores(scores)
}
