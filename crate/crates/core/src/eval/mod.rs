//! Evaluation: KDE log-likelihood, exact categorical f-divergences,
//! a reference Lloyd's k-means, and clustering metrics.

mod fdiv;
mod kde;
mod lloyd;
mod metrics;

pub use fdiv::{f_divergence_categorical, lemma1_gap, Categorical, FGenerator};
pub use kde::{kde_log_densities, kde_log_densities_brute, kde_log_likelihood, scott_bandwidth};
pub use lloyd::{lloyd, lloyd_trajectory, LloydResult, LloydStep};
pub use metrics::{cluster_metrics, ClusterMetrics};
