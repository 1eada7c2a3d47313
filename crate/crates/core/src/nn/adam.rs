use serde::{Deserialize, Serialize};

use super::mlp::{Gradients, MlpParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
}

fn default_beta2() -> f64 {
    0.999
}

fn default_eps() -> f64 {
    1e-8
}

impl Default for AdamConfig {
    /// Step size 0.005 and β₁ = 0.5, the synthetic-data settings.
    fn default() -> Self {
        Self {
            lr: 0.005,
            beta1: 0.5,
            beta2: default_beta2(),
            eps: default_eps(),
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && self.lr.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid Adam hyperparameters {self:?}")))
        }
    }
}

/// Moment accumulators and step count for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub m: Gradients,
    pub v: Gradients,
    /// Number of completed steps.
    pub t: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig, params: &MlpParams) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            m: Gradients::zeros_like(params),
            v: Gradients::zeros_like(params),
            t: 0,
        })
    }

    pub fn reset(&mut self) {
        for d in self.m.layers.iter_mut().chain(self.v.layers.iter_mut()) {
            d.weight.fill(0.0);
            d.bias.fill(0.0);
        }
        self.t = 0;
    }
}

/// One bias-corrected Adam update, in place.
///
/// Gradients are validated before anything is touched, so a rejected step
/// leaves both `params` and `state` unchanged.
pub fn adam_step(params: &mut MlpParams, grads: &Gradients, state: &mut AdamState) -> Result<()> {
    if grads.layers.len() != params.layers().len() {
        return Err(Error::Dimension {
            context: "adam_step layer count",
            expected: params.layers().len(),
            actual: grads.layers.len(),
        });
    }
    for (g, p) in grads.layers.iter().zip(params.layers()) {
        if g.weight.dim() != p.weight.dim() || g.bias.len() != p.bias.len() {
            return Err(Error::Dimension {
                context: "adam_step layer shape",
                expected: p.weight.len() + p.bias.len(),
                actual: g.weight.len() + g.bias.len(),
            });
        }
    }
    if let Some(layer) = grads.first_non_finite_layer() {
        return Err(Error::Numeric(format!("gradient of layer {layer}")));
    }

    let AdamConfig { lr, beta1, beta2, eps } = state.config;
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);

    let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    };

    let layers = params.layers_mut();
    for (l, dense) in layers.iter_mut().enumerate() {
        let (g, m, v) = (&grads.layers[l], &mut state.m.layers[l], &mut state.v.layers[l]);
        ndarray::Zip::from(&mut dense.weight)
            .and(&g.weight)
            .and(&mut m.weight)
            .and(&mut v.weight)
            .for_each(|p, &g, m, v| update(p, g, m, v));
        ndarray::Zip::from(&mut dense.bias)
            .and(&g.bias)
            .and(&mut m.bias)
            .and(&mut v.bias)
            .for_each(|p, &g, m, v| update(p, g, m, v));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::mlp::{Activation, Dense, MlpSpec, OutputActivation};
    use ndarray::array;

    fn scalar_params(w: f64) -> (MlpSpec, MlpParams) {
        let spec = MlpSpec::new(vec![1, 1], Activation::Identity, OutputActivation::Identity).unwrap();
        let params = MlpParams::from_layers(
            &spec,
            vec![Dense {
                weight: array![[w]],
                bias: array![0.0],
            }],
        )
        .unwrap();
        (spec, params)
    }

    fn scalar_grads(g: f64) -> Gradients {
        Gradients {
            layers: vec![Dense {
                weight: array![[g]],
                bias: array![0.0],
            }],
        }
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let (_, mut params) = scalar_params(1.25);
        let before = params.clone();
        let mut state = AdamState::new(AdamConfig::default(), &params).unwrap();
        for _ in 0..3 {
            adam_step(&mut params, &scalar_grads(0.0), &mut state).unwrap();
        }
        assert_eq!(params, before);
        assert_eq!(state.t, 3);
    }

    #[test]
    fn zero_gradient_decays_moments() {
        let (_, mut params) = scalar_params(0.0);
        let mut state = AdamState::new(AdamConfig::default(), &params).unwrap();
        adam_step(&mut params, &scalar_grads(2.0), &mut state).unwrap();
        let (m0, v0) = (state.m.layers[0].weight[[0, 0]], state.v.layers[0].weight[[0, 0]]);
        adam_step(&mut params, &scalar_grads(0.0), &mut state).unwrap();
        assert_eq!(state.m.layers[0].weight[[0, 0]], 0.5 * m0);
        assert_eq!(state.v.layers[0].weight[[0, 0]], 0.999 * v0);
    }

    #[test]
    fn first_step_has_magnitude_lr() {
        for g in [3.0, -0.02, 1e-3] {
            let (_, mut params) = scalar_params(0.0);
            let cfg = AdamConfig::default();
            let mut state = AdamState::new(cfg, &params).unwrap();
            adam_step(&mut params, &scalar_grads(g), &mut state).unwrap();
            let moved = params.layers()[0].weight[[0, 0]].abs();
            let expected = cfg.lr * g.abs() / (g.abs() + cfg.eps);
            assert!((moved - expected).abs() < 1e-15);
            assert!((moved - cfg.lr).abs() < 1e-6 * cfg.lr / g.abs().min(1.0));
        }
    }

    #[test]
    fn matches_hand_stepped_scalar_adam() {
        let cfg = AdamConfig {
            lr: 0.1,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        };
        let g = 0.5;
        // independent scalar oracle
        let (mut w, mut m, mut v) = (1.0f64, 0.0f64, 0.0f64);
        let mut oracle = Vec::new();
        for t in 1..=3 {
            m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
            v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
            let m_hat = m / (1.0 - cfg.beta1.powi(t));
            let v_hat = v / (1.0 - cfg.beta2.powi(t));
            w -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
            oracle.push(w);
        }
        // constant gradient makes every bias-corrected ratio ≈ 1, so each step moves ≈ lr
        assert!((oracle[2] - 0.7).abs() < 1e-6);

        let (_, mut params) = scalar_params(1.0);
        let mut state = AdamState::new(cfg, &params).unwrap();
        for expected in oracle {
            adam_step(&mut params, &scalar_grads(g), &mut state).unwrap();
            assert!((params.layers()[0].weight[[0, 0]] - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn non_finite_gradient_names_layer_and_changes_nothing() {
        let spec = MlpSpec::new(vec![2, 3, 1], Activation::Relu, OutputActivation::Identity).unwrap();
        let mut params = MlpParams::zeros(&spec);
        let before = params.clone();
        let mut state = AdamState::new(AdamConfig::default(), &params).unwrap();
        let mut grads = Gradients::zeros_like(&params);
        grads.layers[1].bias[0] = f64::NAN;
        let err = adam_step(&mut params, &grads, &mut state).unwrap_err();
        assert!(err.to_string().contains("layer 1"), "{err}");
        assert_eq!(params, before);
        assert_eq!(state.t, 0);
    }

    #[test]
    fn rejects_bad_hyperparameters() {
        let (_, params) = scalar_params(0.0);
        let bad = AdamConfig {
            lr: 0.0,
            ..AdamConfig::default()
        };
        assert!(AdamState::new(bad, &params).is_err());
        let bad = AdamConfig {
            beta1: 1.0,
            ..AdamConfig::default()
        };
        assert!(AdamState::new(bad, &params).is_err());
    }
}
