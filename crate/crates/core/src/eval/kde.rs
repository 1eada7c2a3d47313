use std::f64::consts::PI;

use ndarray::{Array1, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Kernel terms this many nats below the largest one are skipped by the
/// grid search; the relative error is at most `m · e^-CUTOFF`.
const CUTOFF: f64 = 60.0;

/// Upper bound on grid cells, relative to the sample count.
const MAX_CELLS_PER_SAMPLE: usize = 4;

/// Scott's rule `m^(-1/(d+4)) · σ̂`, with σ̂ the per-dimension standard
/// deviation of the samples averaged over dimensions.
pub fn scott_bandwidth(samples: ArrayView2<f64>) -> Result<f64> {
    let (m, d) = samples.dim();
    if m < 2 || d == 0 {
        return Err(Error::Precondition("bandwidth needs at least two samples".into()));
    }
    let sigma = samples
        .std_axis(Axis(0), 1.0)
        .mean()
        .expect("d ≥ 1");
    let h = (m as f64).powf(-1.0 / (d as f64 + 4.0)) * sigma;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Numeric(format!("bandwidth {h} from degenerate samples")));
    }
    Ok(h)
}

/// Mean over `points` of `log[(1/m) Σ_k N(x; s_k, h² I)]`.
pub fn kde_log_likelihood(samples: ArrayView2<f64>, points: ArrayView2<f64>, h: f64) -> Result<f64> {
    let dens = kde_log_densities(samples, points, h)?;
    let mean = dens.mean().ok_or_else(|| Error::Precondition("no evaluation points".into()))?;
    finite(mean)
}

/// Per-point KDE log density using a uniform grid over the first (up to two)
/// coordinates, so only samples near each point are visited.
pub fn kde_log_densities(samples: ArrayView2<f64>, points: ArrayView2<f64>, h: f64) -> Result<Array1<f64>> {
    check_inputs(samples, points, h)?;
    let grid = Grid::build(samples, h);
    let norm = log_norm(samples.dim(), h);
    let out: Vec<f64> = (0..points.nrows())
        .into_par_iter()
        .map(|i| grid.log_sum(points.row(i), h) + norm)
        .collect();
    out.into_iter().map(finite).collect()
}

/// Same quantity by direct summation over every sample.
pub fn kde_log_densities_brute(samples: ArrayView2<f64>, points: ArrayView2<f64>, h: f64) -> Result<Array1<f64>> {
    check_inputs(samples, points, h)?;
    let norm = log_norm(samples.dim(), h);
    let inv = 1.0 / (2.0 * h * h);
    let out: Vec<f64> = (0..points.nrows())
        .into_par_iter()
        .map(|i| {
            let x = points.row(i);
            let d2: Vec<f64> = samples.rows().into_iter().map(|s| sq_dist(x, s)).collect();
            let min = d2.iter().cloned().fold(f64::INFINITY, f64::min);
            let sum: f64 = d2.iter().map(|&v| (-(v - min) * inv).exp()).sum();
            -min * inv + sum.ln() + norm
        })
        .collect();
    out.into_iter().map(finite).collect()
}

fn check_inputs(samples: ArrayView2<f64>, points: ArrayView2<f64>, h: f64) -> Result<()> {
    if samples.nrows() == 0 {
        return Err(Error::Precondition("KDE needs at least one sample".into()));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Precondition(format!("bandwidth must be positive, got {h}")));
    }
    if samples.ncols() != points.ncols() {
        return Err(Error::Dimension {
            context: "KDE evaluation points",
            expected: samples.ncols(),
            actual: points.ncols(),
        });
    }
    if samples.iter().chain(points.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite KDE input".into()));
    }
    Ok(())
}

/// `-ln m - (d/2) ln(2π h²)`.
fn log_norm((m, d): (usize, usize), h: f64) -> f64 {
    -(m as f64).ln() - 0.5 * d as f64 * (2.0 * PI * h * h).ln()
}

fn finite(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numeric(format!("KDE log-likelihood is {v}")))
    }
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Samples bucketed by the cell of their first one or two coordinates.
struct Grid {
    d: usize,
    /// Coordinates actually gridded: 1 or 2.
    g: usize,
    origin: [f64; 2],
    cell: f64,
    shape: [i64; 2],
    /// CSR offsets into `sorted`, one entry per cell plus one.
    starts: Vec<usize>,
    /// Samples reordered by cell, row-major `m × d`.
    sorted: Vec<f64>,
}

impl Grid {
    fn build(samples: ArrayView2<f64>, h: f64) -> Self {
        let (m, d) = samples.dim();
        let g = d.min(2);
        let mut lo = [0.0; 2];
        let mut hi = [0.0; 2];
        for c in 0..g {
            let col = samples.column(c);
            lo[c] = col.iter().cloned().fold(f64::INFINITY, f64::min);
            hi[c] = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        }
        // cells of a few bandwidths, coarsened when the bounding box is huge
        let mut cell = 2.0 * h;
        let max_cells = (MAX_CELLS_PER_SAMPLE * m).max(16) as f64;
        loop {
            let cells: f64 = (0..g).map(|c| ((hi[c] - lo[c]) / cell).floor() + 1.0).product();
            if cells <= max_cells {
                break;
            }
            cell *= 2.0;
        }
        let mut shape = [1i64; 2];
        for c in 0..g {
            shape[c] = ((hi[c] - lo[c]) / cell).floor() as i64 + 1;
        }
        let mut grid = Grid {
            d,
            g,
            origin: lo,
            cell,
            shape,
            starts: Vec::new(),
            sorted: Vec::with_capacity(m * d),
        };
        let ids: Vec<usize> = samples
            .rows()
            .into_iter()
            .map(|r| {
                let (i, j) = grid.cell_of(r);
                grid.flat(i.clamp(0, shape[0] - 1), j.clamp(0, shape[1] - 1))
            })
            .collect();
        let n_cells = (shape[0] * shape[1]) as usize;
        let mut counts = vec![0usize; n_cells + 1];
        for &id in &ids {
            counts[id + 1] += 1;
        }
        for c in 0..n_cells {
            counts[c + 1] += counts[c];
        }
        let mut order = vec![0usize; m];
        let mut fill = counts.clone();
        for (k, &id) in ids.iter().enumerate() {
            order[fill[id]] = k;
            fill[id] += 1;
        }
        for k in order {
            grid.sorted.extend(samples.row(k).iter());
        }
        grid.starts = counts;
        grid
    }

    fn cell_of(&self, x: ArrayView1<f64>) -> (i64, i64) {
        let idx = |c: usize| {
            if c < self.g {
                ((x[c] - self.origin[c]) / self.cell).floor() as i64
            } else {
                0
            }
        };
        (idx(0), idx(1))
    }

    fn flat(&self, i: i64, j: i64) -> usize {
        (i * self.shape[1] + j) as usize
    }

    fn in_grid(&self, i: i64, j: i64) -> bool {
        (0..self.shape[0]).contains(&i) && (0..self.shape[1]).contains(&j)
    }

    fn cell_samples(&self, i: i64, j: i64) -> std::slice::ChunksExact<'_, f64> {
        let id = self.flat(i, j);
        self.sorted[self.starts[id] * self.d..self.starts[id + 1] * self.d].chunks_exact(self.d)
    }

    fn dist(&self, x: &[f64], s: &[f64]) -> f64 {
        x.iter().zip(s).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    /// Squared distance to the nearest sample, by rings of cells around `x`.
    fn nearest(&self, x: &[f64], (ci, cj): (i64, i64)) -> f64 {
        let mut best = f64::INFINITY;
        // rings closer than this hold no grid cells
        let first = [ci - (self.shape[0] - 1), -ci, cj - (self.shape[1] - 1), -cj]
            .into_iter()
            .max()
            .unwrap()
            .max(0);
        let last = first + self.shape[0].max(self.shape[1]);
        for k in first..=last {
            let mut visit = |i: i64, j: i64| {
                if self.in_grid(i, j) {
                    for s in self.cell_samples(i, j) {
                        best = best.min(self.dist(x, s));
                    }
                }
            };
            if self.g == 1 {
                visit(ci - k, 0);
                if k > 0 {
                    visit(ci + k, 0);
                }
            } else {
                for i in ci - k..=ci + k {
                    if (i - ci).abs() == k {
                        for j in cj - k..=cj + k {
                            visit(i, j);
                        }
                    } else {
                        visit(i, cj - k);
                        visit(i, cj + k);
                    }
                }
            }
            // every cell in ring k+1 is at least k cells away
            let reach = k as f64 * self.cell;
            if best.is_finite() && best <= reach * reach {
                break;
            }
        }
        best
    }

    /// `ln Σ_k exp(-‖x - s_k‖² / 2h²)` over samples within reach.
    fn log_sum(&self, x: ArrayView1<f64>, h: f64) -> f64 {
        let xs: Vec<f64> = x.to_vec();
        let inv = 1.0 / (2.0 * h * h);
        let (ci, cj) = self.cell_of(x);
        let min = self.nearest(&xs, (ci, cj));
        let radius = (min + CUTOFF / inv).sqrt();
        let span = |c: usize, centre: i64| -> (i64, i64) {
            if c >= self.g {
                return (0, 0);
            }
            let lo = ((xs[c] - radius - self.origin[c]) / self.cell).floor() as i64;
            let hi = ((xs[c] + radius - self.origin[c]) / self.cell).floor() as i64;
            debug_assert!(lo <= centre && centre <= hi);
            (lo.max(0), hi.min(self.shape[c] - 1))
        };
        let (i0, i1) = span(0, ci);
        let (j0, j1) = span(1, cj);
        let mut sum = 0.0;
        for i in i0..=i1 {
            for j in j0..=j1 {
                for s in self.cell_samples(i, j) {
                    sum += (-(self.dist(&xs, s) - min) * inv).exp();
                }
            }
        }
        -min * inv + sum.ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normal(n: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_simple_fn((n, d), || StandardNormal.sample(&mut rng))
    }

    #[test]
    fn kernel_at_its_centre() {
        let s = array![[1.5, -2.0]];
        let h = 0.7;
        let v = kde_log_likelihood(s.view(), s.view(), h).unwrap();
        assert_abs_diff_eq!(v, -(2.0 * PI * h * h).ln(), epsilon = 1e-12);
    }

    #[test]
    fn two_symmetric_samples() {
        let a = 0.8;
        let h = 0.5;
        let s = array![[a, 0.0], [-a, 0.0]];
        let x = array![[0.0, 0.0]];
        // both kernels equal: ln(½ · 2 · exp(-a²/2h²) / (2πh²))
        let expected = -a * a / (2.0 * h * h) - (2.0 * PI * h * h).ln();
        let v = kde_log_likelihood(s.view(), x.view(), h).unwrap();
        assert_abs_diff_eq!(v, expected, epsilon = 1e-12);
        let asym = array![[a, 0.0], [0.0, 3.0 * a]];
        let t1 = (-a * a / (2.0 * h * h)).exp();
        let t2 = (-9.0 * a * a / (2.0 * h * h)).exp();
        let expected = (0.5 * (t1 + t2)).ln() - (2.0 * PI * h * h).ln();
        let v = kde_log_likelihood(asym.view(), x.view(), h).unwrap();
        assert_abs_diff_eq!(v, expected, epsilon = 1e-12);
    }

    #[test]
    fn gaussian_entropy() {
        let s = normal(5000, 2, 11);
        let h = scott_bandwidth(s.view()).unwrap();
        let v = kde_log_likelihood(s.view(), s.view(), h).unwrap();
        let entropy = -(2.0 * PI * std::f64::consts::E).ln();
        assert!((v - entropy).abs() < 0.1, "{v} vs {entropy}");
    }

    #[test]
    fn grid_matches_direct_sum() {
        for (d, h) in [(1, 0.05), (2, 0.1), (2, 3.0), (3, 0.2), (5, 0.6)] {
            let s = normal(700, d, d as u64);
            let mut x = normal(150, d, 100 + d as u64) * 1.5;
            // some points far outside the sample cloud
            x.row_mut(0).fill(40.0);
            x.row_mut(1).fill(-25.0);
            let a = kde_log_densities(s.view(), x.view(), h).unwrap();
            let b = kde_log_densities_brute(s.view(), x.view(), h).unwrap();
            for (u, v) in a.iter().zip(&b) {
                assert!((u - v).abs() <= 1e-12 * v.abs().max(1.0), "d={d} h={h}: {u} vs {v}");
            }
        }
    }

    #[test]
    fn far_points_stay_finite() {
        let s = array![[0.0, 0.0], [1.0, 1.0]];
        let x = array![[1e3, -1e3]];
        let v = kde_log_likelihood(s.view(), x.view(), 0.1).unwrap();
        assert!(v.is_finite() && v < -1e7);
    }

    #[test]
    fn invalid_inputs() {
        let s = array![[0.0, 0.0]];
        assert!(matches!(
            kde_log_likelihood(s.view(), s.view(), 0.0),
            Err(Error::Precondition(_))
        ));
        let empty = Array2::<f64>::zeros((0, 2));
        assert!(kde_log_likelihood(empty.view(), s.view(), 1.0).is_err());
        let bad = array![[f64::NAN, 0.0]];
        assert!(matches!(
            kde_log_likelihood(s.view(), bad.view(), 1.0),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn scott_rule() {
        // column stds √2 and 3√2, averaged
        let s = array![[-1.0, -3.0], [1.0, 3.0]];
        let sd0 = 2f64.sqrt();
        let expected = 2f64.powf(-1.0 / 6.0) * (sd0 + 3.0 * sd0) / 2.0;
        assert_abs_diff_eq!(scott_bandwidth(s.view()).unwrap(), expected, epsilon = 1e-12);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]
        #[test]
        fn permutation_invariant(seed in 0u64..1000, h in 0.05f64..2.0) {
            let s = normal(60, 2, seed);
            let x = normal(30, 2, seed + 7);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut ps: Vec<usize> = (0..60).collect();
            let mut px: Vec<usize> = (0..30).collect();
            ps.shuffle(&mut rng);
            px.shuffle(&mut rng);
            let a = kde_log_likelihood(s.view(), x.view(), h).unwrap();
            let b = kde_log_likelihood(
                s.select(Axis(0), &ps).view(),
                x.select(Axis(0), &px).view(),
                h,
            )
            .unwrap();
            proptest::prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }
}
