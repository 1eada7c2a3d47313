//! Datasets: synthetic Gaussian mixtures and CSV IO.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, RngCore};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `N × d` training points with optional ground-truth component labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub points: Array2<f64>,
    pub labels: Option<Vec<usize>>,
    pub name: String,
}

impl Dataset {
    pub fn new(points: Array2<f64>, labels: Option<Vec<usize>>, name: impl Into<String>) -> Result<Self> {
        if points.nrows() == 0 || points.ncols() == 0 {
            return Err(Error::Precondition("a dataset needs N ≥ 1 points of dimension ≥ 1".into()));
        }
        if let Some(l) = &labels {
            if l.len() != points.nrows() {
                return Err(Error::Dimension {
                    context: "dataset labels",
                    expected: points.nrows(),
                    actual: l.len(),
                });
            }
        }
        Ok(Self {
            points,
            labels,
            name: name.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.points.view()
    }

    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        Self::new(
            self.points.select(Axis(0), indices),
            self.labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i]).collect()),
            self.name.clone(),
        )
    }

    /// Random `(train, held_out)` split with `round(N · fraction)` held out.
    pub fn split_holdout(&self, fraction: f64, rng: &mut dyn RngCore) -> Result<(Self, Self)> {
        if !(0.0..1.0).contains(&fraction) {
            return Err(Error::Config(format!("held-out fraction {fraction} not in [0, 1)")));
        }
        let n_hold = (self.len() as f64 * fraction).round() as usize;
        if n_hold == 0 || n_hold >= self.len() {
            return Err(Error::Config(format!(
                "held-out fraction {fraction} leaves an empty split of {} points",
                self.len()
            )));
        }
        let mut perm: Vec<usize> = (0..self.len()).collect();
        perm.shuffle(rng);
        let (hold, train) = perm.split_at(n_hold);
        let mut train = train.to_vec();
        let mut hold = hold.to_vec();
        train.sort_unstable();
        hold.sort_unstable();
        Ok((self.select(&train)?, self.select(&hold)?))
    }

    /// Writes `x0,...,x{d-1}[,label]` with shortest round-trip float formatting.
    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let w = BufWriter::new(File::create(path)?);
        self.write_csv(w)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<String> = (0..self.dim()).map(|c| format!("x{c}")).collect();
        if self.labels.is_some() {
            header.push("label".into());
        }
        out.write_record(&header).map_err(csv_error)?;
        for (i, row) in self.points.rows().into_iter().enumerate() {
            let mut rec: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            if let Some(l) = &self.labels {
                rec.push(l[i].to_string());
            }
            out.write_record(&rec).map_err(csv_error)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::read_csv(File::open(path)?, name)
    }

    pub fn read_csv<R: std::io::Read>(r: R, name: impl Into<String>) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let header = reader.headers().map_err(csv_error)?.clone();
        let has_label = header.iter().next_back() == Some("label");
        let d = header.len() - usize::from(has_label);
        for (c, h) in header.iter().take(d).enumerate() {
            if h != format!("x{c}") {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("expected column x{c}, found {h:?}"),
                });
            }
        }
        if d == 0 {
            return Err(Error::Parse {
                line: 1,
                message: "no coordinate columns".into(),
            });
        }
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(csv_error)?;
            let line = rec.position().map_or(0, |p| p.line());
            for field in rec.iter().take(d) {
                let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("invalid number {field:?}"),
                })?;
                values.push(v);
            }
            if has_label {
                let field = &rec[d];
                labels.push(field.trim().parse::<usize>().map_err(|_| Error::Parse {
                    line,
                    message: format!("invalid label {field:?}"),
                })?);
            }
        }
        let n = values.len() / d;
        let points = Array2::from_shape_vec((n, d), values).expect("rows have d fields");
        Self::new(points, has_label.then_some(labels), name)
    }
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.kind() {
        csv::ErrorKind::Io(_) => Error::Io(std::io::Error::other(e.to_string())),
        _ => Error::Parse {
            line,
            message: e.to_string(),
        },
    }
}

/// Isotropic 2-D Gaussian mixture, optionally skewed by
/// `x₂ ← x₂ + 0.04·x₁² − 4`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmSpec {
    pub means: Vec<[f64; 2]>,
    pub variance: f64,
    /// Component probabilities; uniform when absent.
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    #[serde(default = "default_skew")]
    pub skew: bool,
}

fn default_skew() -> bool {
    true
}

/// Per-mode variance used by the presets.
pub const PRESET_VARIANCE: f64 = 0.25;

impl GmmSpec {
    /// `m` modes evenly spaced on a circle of radius 10, first mode at angle 0.
    pub fn circle(m: usize) -> Self {
        let means = (0..m)
            .map(|i| {
                let angle = 2.0 * std::f64::consts::PI * i as f64 / m as f64;
                [10.0 * angle.cos(), 10.0 * angle.sin()]
            })
            .collect();
        Self {
            means,
            variance: PRESET_VARIANCE,
            weights: None,
            skew: true,
        }
    }

    /// 3 × 3 grid with spacing 8 centred on the origin.
    pub fn grid9() -> Self {
        let mut means = Vec::with_capacity(9);
        for row in [-8.0, 0.0, 8.0] {
            for col in [-8.0, 0.0, 8.0] {
                means.push([col, row]);
            }
        }
        Self {
            means,
            variance: PRESET_VARIANCE,
            weights: None,
            skew: true,
        }
    }

    /// Preset by mode count: circles for 3 and 5, the grid for 9.
    pub fn preset(modes: usize) -> Result<Self> {
        match modes {
            3 | 5 => Ok(Self::circle(modes)),
            9 => Ok(Self::grid9()),
            m => Err(Error::Config(format!("no preset with {m} modes (3, 5 or 9)"))),
        }
    }

    pub fn n_modes(&self) -> usize {
        self.means.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.means.is_empty() {
            return Err(Error::Config("GMM needs at least one mode".into()));
        }
        if !(self.variance > 0.0 && self.variance.is_finite()) {
            return Err(Error::Config(format!("GMM variance must be positive, got {}", self.variance)));
        }
        if let Some(w) = &self.weights {
            if w.len() != self.means.len() || w.iter().any(|&x| !(x >= 0.0)) || w.iter().sum::<f64>() <= 0.0 {
                return Err(Error::Config("GMM weights must be non-negative, one per mode".into()));
            }
        }
        Ok(())
    }
}

pub fn skew(p: [f64; 2]) -> [f64; 2] {
    [p[0], p[1] + 0.04 * p[0] * p[0] - 100.0 * 0.04]
}

pub fn unskew(p: [f64; 2]) -> [f64; 2] {
    [p[0], p[1] - 0.04 * p[0] * p[0] + 100.0 * 0.04]
}

/// Draws `n` labelled points: mode, then Gaussian noise, then the optional skew.
pub fn generate_synthetic(spec: &GmmSpec, n: usize, rng: &mut dyn RngCore) -> Result<Dataset> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::Precondition("n must be at least 1".into()));
    }
    let noise = Normal::new(0.0, spec.variance.sqrt()).expect("validated variance");
    let cumulative: Option<Vec<f64>> = spec.weights.as_ref().map(|w| {
        let total: f64 = w.iter().sum();
        w.iter()
            .scan(0.0, |acc, &x| {
                *acc += x / total;
                Some(*acc)
            })
            .collect()
    });
    let mut points = Array2::zeros((n, 2));
    let mut labels = Vec::with_capacity(n);
    for mut row in points.rows_mut() {
        let m = match &cumulative {
            None => rng.random_range(0..spec.n_modes()),
            Some(cdf) => {
                let u: f64 = rng.random();
                cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1)
            }
        };
        let mean = spec.means[m];
        let mut p = [mean[0] + noise.sample(rng), mean[1] + noise.sample(rng)];
        if spec.skew {
            p = skew(p);
        }
        row[0] = p[0];
        row[1] = p[1];
        labels.push(m);
    }
    Dataset::new(points, Some(labels), format!("gmm{}", spec.n_modes()))
}
