use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probability vector over a finite support.
#[derive(Debug, Clone, PartialEq)]
pub struct Categorical {
    probs: Vec<f64>,
}

impl Categorical {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Precondition("categorical with empty support".into()));
        }
        if probs.iter().any(|&p| !(p >= 0.0 && p.is_finite())) {
            return Err(Error::Precondition("categorical probabilities must be finite and ≥ 0".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Precondition(format!("categorical sums to {total}, not 1")));
        }
        Ok(Self { probs })
    }

    /// Normalizes non-negative weights.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::Precondition("weights must have a positive finite sum".into()));
        }
        Self::new(weights.iter().map(|w| w / total).collect())
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.probs.iter().enumerate().filter(|(_, &p)| p > 0.0).map(|(s, _)| s)
    }
}

/// Convex `f` with `f(1) = 0`.
///
/// Zero conventions for a term `p · f(q / p)`:
/// `p = q = 0` contributes 0; `p = 0 < q` contributes `q · lim f(u)/u`
/// (infinite for `Kl`, hence a domain error; 0 for `ReverseKl`; ½ for
/// `TotalVariation`; ½ ln 2 for `JensenShannon`); `q = 0 < p` contributes
/// `p · f(0)`, a domain error for `ReverseKl`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FGenerator {
    /// `u ln u`
    Kl,
    /// `-ln u`
    ReverseKl,
    /// `½ |u - 1|`
    TotalVariation,
    /// `½ (u ln u - (u + 1) ln((u + 1) / 2))`
    JensenShannon,
}

impl FGenerator {
    pub const ALL: [FGenerator; 4] = [
        FGenerator::Kl,
        FGenerator::ReverseKl,
        FGenerator::TotalVariation,
        FGenerator::JensenShannon,
    ];

    /// `f(u)` for `u > 0`.
    pub fn eval(self, u: f64) -> f64 {
        match self {
            FGenerator::Kl => u * u.ln(),
            FGenerator::ReverseKl => -u.ln(),
            FGenerator::TotalVariation => 0.5 * (u - 1.0).abs(),
            FGenerator::JensenShannon => 0.5 * (u * u.ln() - (u + 1.0) * ((u + 1.0) / 2.0).ln()),
        }
    }

    fn term(self, q: f64, p: f64) -> Result<f64> {
        match (q > 0.0, p > 0.0) {
            (true, true) => Ok(p * self.eval(q / p)),
            (false, false) => Ok(0.0),
            (true, false) => match self {
                FGenerator::Kl => Err(Error::Domain("KL with q > 0 where p = 0 is infinite".into())),
                FGenerator::ReverseKl => Ok(0.0),
                FGenerator::TotalVariation => Ok(0.5 * q),
                FGenerator::JensenShannon => Ok(0.5 * LN_2 * q),
            },
            (false, true) => match self {
                FGenerator::Kl => Ok(0.0),
                FGenerator::ReverseKl => {
                    Err(Error::Domain("reverse KL with p > 0 where q = 0 is infinite".into()))
                }
                FGenerator::TotalVariation => Ok(0.5 * p),
                FGenerator::JensenShannon => Ok(0.5 * LN_2 * p),
            },
        }
    }
}

/// `D_f(q ‖ p) = Σ_s p_s f(q_s / p_s)`.
pub fn f_divergence_categorical(q: &Categorical, p: &Categorical, f: FGenerator) -> Result<f64> {
    if q.len() != p.len() {
        return Err(Error::Dimension {
            context: "categorical support",
            expected: p.len(),
            actual: q.len(),
        });
    }
    q.probs
        .iter()
        .zip(&p.probs)
        .map(|(&qs, &ps)| f.term(qs, ps))
        .sum()
}

/// Both sides of the mixture bound
/// `D_f(Σ α_j Q_j ‖ Σ α_j P_j) ≤ Σ α_j D_f(Q_j ‖ P_j)`; returns `(lhs, rhs)`.
/// The targets `P_j` must have pairwise disjoint supports.
pub fn lemma1_gap(
    components: &[Categorical],
    targets: &[Categorical],
    alphas: &[f64],
    f: FGenerator,
) -> Result<(f64, f64)> {
    let k = components.len();
    if k == 0 || targets.len() != k || alphas.len() != k {
        return Err(Error::Precondition(format!(
            "need matching non-empty lists, got {k} components, {} targets, {} weights",
            targets.len(),
            alphas.len()
        )));
    }
    if alphas.iter().any(|&a| !(a >= 0.0)) || (alphas.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        return Err(Error::Precondition("mixing weights must be ≥ 0 and sum to 1".into()));
    }
    let s = targets[0].len();
    if components.iter().chain(targets).any(|c| c.len() != s) {
        return Err(Error::Precondition("all categoricals must share one support".into()));
    }
    let mut owner = vec![None; s];
    for (j, t) in targets.iter().enumerate() {
        for x in t.support() {
            if let Some(other) = owner[x].replace(j) {
                return Err(Error::Precondition(format!(
                    "targets {other} and {j} overlap at support point {x}"
                )));
            }
        }
    }
    let mix = |list: &[Categorical]| -> Vec<f64> {
        (0..s)
            .map(|x| list.iter().zip(alphas).map(|(c, a)| a * c.probs[x]).sum())
            .collect()
    };
    // mixtures are renormalized only to absorb rounding in Σα
    let q = Categorical::from_weights(&mix(components))?;
    let p = Categorical::from_weights(&mix(targets))?;
    let lhs = f_divergence_categorical(&q, &p, f)?;
    let mut rhs = 0.0;
    for j in 0..k {
        rhs += alphas[j] * f_divergence_categorical(&components[j], &targets[j], f)?;
    }
    Ok((lhs, rhs))
}
