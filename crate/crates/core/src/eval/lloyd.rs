use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// One Lloyd iteration: the centroids used for assignment, the resulting
/// assignment, and the objective before and after the centroid update.
#[derive(Debug, Clone, PartialEq)]
pub struct LloydStep {
    pub centroids: Array2<f64>,
    pub assignment: Vec<usize>,
    pub objective_before: f64,
    pub objective_after: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LloydResult {
    pub centroids: Array2<f64>,
    pub assignment: Vec<usize>,
    pub iters: usize,
}

/// Reference k-means. Ties go to the lowest centroid index; a centroid that
/// loses all its points stays where it is.
pub fn lloyd(data: ArrayView2<f64>, k: usize, init: ArrayView2<f64>, max_iters: usize) -> Result<LloydResult> {
    if init.nrows() != k {
        return Err(Error::Dimension {
            context: "initial centroids",
            expected: k,
            actual: init.nrows(),
        });
    }
    let steps = lloyd_trajectory(data, init, max_iters)?;
    match steps.last() {
        None => Ok(LloydResult {
            centroids: init.to_owned(),
            assignment: Vec::new(),
            iters: 0,
        }),
        Some(last) => Ok(LloydResult {
            centroids: update(data, &last.assignment, &last.centroids),
            assignment: last.assignment.clone(),
            iters: steps.len(),
        }),
    }
}

/// Every iteration until the assignment stops changing or `max_iters`.
pub fn lloyd_trajectory(data: ArrayView2<f64>, init: ArrayView2<f64>, max_iters: usize) -> Result<Vec<LloydStep>> {
    if data.ncols() != init.ncols() {
        return Err(Error::Dimension {
            context: "centroid dimension",
            expected: data.ncols(),
            actual: init.ncols(),
        });
    }
    for a in 0..init.nrows() {
        for b in a + 1..init.nrows() {
            if init.row(a) == init.row(b) {
                return Err(Error::Precondition(format!("initial centroids {a} and {b} coincide")));
            }
        }
    }
    let mut centroids = init.to_owned();
    let mut steps: Vec<LloydStep> = Vec::new();
    for _ in 0..max_iters {
        let assignment: Vec<usize> = data.rows().into_iter().map(|x| nearest(x, &centroids)).collect();
        if steps.last().is_some_and(|s| s.assignment == assignment) {
            break;
        }
        let before = objective(data, &assignment, &centroids);
        let next = update(data, &assignment, &centroids);
        let after = objective(data, &assignment, &next);
        if after > before * (1.0 + 1e-12) + 1e-12 {
            return Err(Error::StateCorruption(format!(
                "k-means objective rose from {before} to {after}"
            )));
        }
        if let Some(prev) = steps.last() {
            if before > prev.objective_after * (1.0 + 1e-12) + 1e-12 {
                return Err(Error::StateCorruption(format!(
                    "k-means objective rose from {} to {before}",
                    prev.objective_after
                )));
            }
        }
        steps.push(LloydStep {
            centroids,
            assignment,
            objective_before: before,
            objective_after: after,
        });
        centroids = next;
    }
    Ok(steps)
}

fn nearest(x: ArrayView1<f64>, centroids: &Array2<f64>) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, c) in centroids.rows().into_iter().enumerate() {
        let mut d = 0.0;
        for (a, b) in x.iter().zip(c.iter()) {
            d += (a - b) * (a - b);
        }
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    best
}

fn update(data: ArrayView2<f64>, assignment: &[usize], centroids: &Array2<f64>) -> Array2<f64> {
    let (k, d) = centroids.dim();
    let mut sums = Array2::<f64>::zeros((k, d));
    let mut counts = vec![0usize; k];
    for (x, &j) in data.rows().into_iter().zip(assignment) {
        counts[j] += 1;
        for c in 0..d {
            sums[[j, c]] += x[c];
        }
    }
    let mut out = centroids.clone();
    for j in 0..k {
        if counts[j] > 0 {
            for c in 0..d {
                out[[j, c]] = sums[[j, c]] / counts[j] as f64;
            }
        }
    }
    out
}

fn objective(data: ArrayView2<f64>, assignment: &[usize], centroids: &Array2<f64>) -> f64 {
    data.rows()
        .into_iter()
        .zip(assignment)
        .map(|(x, &j)| {
            x.iter()
                .zip(centroids.row(j).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn two_points_are_a_fixed_point() {
        let data = array![[0.0, 1.0], [5.0, 5.0]];
        let r = lloyd(data.view(), 2, data.view(), 10).unwrap();
        assert_eq!(r.centroids, data);
        assert_eq!(r.assignment, vec![0, 1]);
        assert_eq!(r.iters, 1);
    }

    #[test]
    fn one_dimensional_hand_run() {
        let data = array![[0.0], [1.0], [10.0], [11.0]];
        let init = array![[0.0], [10.0]];
        let r = lloyd(data.view(), 2, init.view(), 10).unwrap();
        assert_eq!(r.centroids, array![[0.5], [10.5]]);
        assert_eq!(r.assignment, vec![0, 0, 1, 1]);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let data = array![[0.0], [2.0], [4.0]];
        let init = array![[1.0], [3.0]];
        let steps = lloyd_trajectory(data.view(), init.view(), 1).unwrap();
        assert_eq!(steps[0].assignment, vec![0, 0, 1]);
    }

    #[test]
    fn empty_cluster_keeps_its_centroid() {
        let data = array![[0.0], [1.0]];
        let init = array![[0.5], [100.0]];
        let r = lloyd(data.view(), 2, init.view(), 5).unwrap();
        assert_eq!(r.centroids, array![[0.5], [100.0]]);
        assert_eq!(r.assignment, vec![0, 0]);
    }

    #[test]
    fn coinciding_init_is_rejected() {
        let data = array![[0.0], [1.0]];
        let init = array![[0.5], [0.5]];
        assert!(matches!(lloyd(data.view(), 2, init.view(), 5), Err(Error::Precondition(_))));
    }

    proptest! {
        #[test]
        fn objective_never_increases(
            pts in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 6..60),
            k in 1usize..5,
        ) {
            let data = Array2::from_shape_fn((pts.len(), 2), |(i, c)| if c == 0 { pts[i].0 } else { pts[i].1 });
            let init = data.slice(ndarray::s![..k, ..]).to_owned();
            prop_assume!((0..k).all(|a| (a + 1..k).all(|b| init.row(a) != init.row(b))));
            let steps = lloyd_trajectory(data.view(), init.view(), 50).unwrap();
            for w in steps.windows(2) {
                prop_assert!(w[0].objective_after <= w[0].objective_before + 1e-9);
                prop_assert!(w[1].objective_before <= w[0].objective_after + 1e-9);
            }
        }
    }
}
