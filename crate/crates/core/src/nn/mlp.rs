use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hidden-layer nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

/// Nonlinearity applied to the final layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    Identity,
    Sigmoid,
}

/// Shape and nonlinearities of a dense feed-forward network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    /// Input width first, output width last.
    pub layer_widths: Vec<usize>,
    /// One entry per hidden layer (`layer_widths.len() - 2`).
    pub activations: Vec<Activation>,
    pub output_activation: OutputActivation,
}

impl MlpSpec {
    /// Network whose hidden layers all use `hidden`.
    pub fn new(
        layer_widths: Vec<usize>,
        hidden: Activation,
        output_activation: OutputActivation,
    ) -> Result<Self> {
        let n_hidden = layer_widths.len().saturating_sub(2);
        let spec = Self {
            layer_widths,
            activations: vec![hidden; n_hidden],
            output_activation,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_widths.len() < 2 {
            return Err(Error::Config(format!(
                "an MLP needs at least 2 layer widths, got {}",
                self.layer_widths.len()
            )));
        }
        if let Some(pos) = self.layer_widths.iter().position(|&w| w == 0) {
            return Err(Error::Config(format!("layer width {pos} is zero")));
        }
        if self.activations.len() != self.layer_widths.len() - 2 {
            return Err(Error::Config(format!(
                "expected {} hidden activations, got {}",
                self.layer_widths.len() - 2,
                self.activations.len()
            )));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_widths.last().expect("validated spec")
    }

    pub fn num_layers(&self) -> usize {
        self.layer_widths.len() - 1
    }

    fn layer_activation(&self, layer: usize) -> LayerActivation {
        if layer + 1 == self.num_layers() {
            match self.output_activation {
                OutputActivation::Identity => LayerActivation::Identity,
                OutputActivation::Sigmoid => LayerActivation::Sigmoid,
            }
        } else {
            match self.activations[layer] {
                Activation::Relu => LayerActivation::Relu,
                Activation::Tanh => LayerActivation::Tanh,
                Activation::Identity => LayerActivation::Identity,
            }
        }
    }
}

#[derive(Clone, Copy)]
enum LayerActivation {
    Relu,
    Tanh,
    Identity,
    Sigmoid,
}

impl LayerActivation {
    fn apply(self, z: &mut Array2<f64>) {
        match self {
            LayerActivation::Relu => z.mapv_inplace(|v| if v > 0.0 { v } else { 0.0 }),
            LayerActivation::Tanh => z.mapv_inplace(f64::tanh),
            LayerActivation::Identity => {}
            LayerActivation::Sigmoid => z.mapv_inplace(sigmoid),
        }
    }

    /// Multiplies `grad` by the derivative, expressed through the activation output.
    fn chain(self, grad: &mut Array2<f64>, post: &Array2<f64>) {
        match self {
            // subgradient at 0 is 0
            LayerActivation::Relu => Zip::from(grad).and(post).for_each(|g, &a| {
                if a <= 0.0 {
                    *g = 0.0;
                }
            }),
            LayerActivation::Tanh => {
                Zip::from(grad).and(post).for_each(|g, &a| *g *= 1.0 - a * a)
            }
            LayerActivation::Identity => {}
            LayerActivation::Sigmoid => {
                Zip::from(grad).and(post).for_each(|g, &a| *g *= a * (1.0 - a))
            }
        }
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// One affine layer. `weight` is `in × out`, so a batch maps as `x · W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: Array2::zeros((fan_in, fan_out)),
            bias: Array1::zeros(fan_out),
        }
    }

    fn is_finite(&self) -> bool {
        self.weight.iter().chain(self.bias.iter()).all(|v| v.is_finite())
    }
}

static NEXT_VERSION: AtomicU64 = AtomicU64::new(1);

fn fresh_version() -> u64 {
    NEXT_VERSION.fetch_add(1, Ordering::Relaxed)
}

/// Weights and biases of a network. Every mutable access stamps a new
/// version so tapes recorded against older values are rejected.
#[derive(Debug, Clone)]
pub struct MlpParams {
    layers: Vec<Dense>,
    version: u64,
}

impl PartialEq for MlpParams {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

impl MlpParams {
    /// Glorot-uniform weights, zero biases.
    pub fn glorot<R: RngCore + ?Sized>(spec: &MlpSpec, rng: &mut R) -> Self {
        let layers = spec
            .layer_widths
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let mut dense = Dense::zeros(fan_in, fan_out);
                dense
                    .weight
                    .mapv_inplace(|_| rng.random_range(-limit..=limit));
                dense
            })
            .collect();
        Self {
            layers,
            version: fresh_version(),
        }
    }

    pub fn zeros(spec: &MlpSpec) -> Self {
        Self {
            layers: spec
                .layer_widths
                .windows(2)
                .map(|w| Dense::zeros(w[0], w[1]))
                .collect(),
            version: fresh_version(),
        }
    }

    /// Wraps explicit layers after checking them against `spec`.
    pub fn from_layers(spec: &MlpSpec, layers: Vec<Dense>) -> Result<Self> {
        check_shapes(spec, &layers, "MlpParams::from_layers")?;
        if let Some(l) = layers.iter().position(|d| !d.is_finite()) {
            return Err(Error::Numeric(format!("parameters of layer {l}")));
        }
        Ok(Self {
            layers,
            version: fresh_version(),
        })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        self.version = fresh_version();
        &mut self.layers
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|d| d.weight.len() + d.bias.len())
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(Dense::is_finite)
    }

    /// All parameters in layer order (weights row-major, then bias).
    pub fn to_flat(&self) -> Vec<f64> {
        flatten(&self.layers)
    }

    pub fn set_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.num_params() {
            return Err(Error::Dimension {
                context: "MlpParams::set_flat",
                expected: self.num_params(),
                actual: values.len(),
            });
        }
        let mut it = values.iter().copied();
        for dense in self.layers_mut() {
            dense.weight.iter_mut().for_each(|w| *w = it.next().unwrap());
            dense.bias.iter_mut().for_each(|b| *b = it.next().unwrap());
        }
        Ok(())
    }
}

fn flatten(layers: &[Dense]) -> Vec<f64> {
    layers
        .iter()
        .flat_map(|d| d.weight.iter().chain(d.bias.iter()).copied())
        .collect()
}

fn check_shapes(spec: &MlpSpec, layers: &[Dense], context: &'static str) -> Result<()> {
    spec.validate()?;
    if layers.len() != spec.num_layers() {
        return Err(Error::Dimension {
            context,
            expected: spec.num_layers(),
            actual: layers.len(),
        });
    }
    for (dense, w) in layers.iter().zip(spec.layer_widths.windows(2)) {
        if dense.weight.dim() != (w[0], w[1]) {
            return Err(Error::Dimension {
                context,
                expected: w[0] * w[1],
                actual: dense.weight.len(),
            });
        }
        if dense.bias.len() != w[1] {
            return Err(Error::Dimension {
                context,
                expected: w[1],
                actual: dense.bias.len(),
            });
        }
    }
    Ok(())
}

/// Parameter gradients, laid out exactly like [`MlpParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn zeros_like(params: &MlpParams) -> Self {
        Self {
            layers: params
                .layers
                .iter()
                .map(|d| Dense::zeros(d.weight.nrows(), d.weight.ncols()))
                .collect(),
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        flatten(&self.layers)
    }

    /// Index of the first layer holding a non-finite entry.
    pub fn first_non_finite_layer(&self) -> Option<usize> {
        self.layers.iter().position(|d| !d.is_finite())
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight += &b.weight;
            a.bias += &b.bias;
        }
    }
}

/// Cached activations from a forward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    /// `activations[0]` is the input; `activations[l + 1]` is the output of layer `l`.
    activations: Vec<Array2<f64>>,
    /// Final-layer pre-activation, kept for numerically stable logit losses.
    logits: Array2<f64>,
    version: u64,
}

impl Tape {
    pub fn output(&self) -> &Array2<f64> {
        self.activations.last().expect("tape has at least one layer")
    }

    pub fn logits(&self) -> &Array2<f64> {
        &self.logits
    }

    pub fn input(&self) -> &Array2<f64> {
        &self.activations[0]
    }
}

fn check_input(spec: &MlpSpec, batch: &ArrayView2<f64>) -> Result<()> {
    if batch.ncols() != spec.input_dim() {
        return Err(Error::Dimension {
            context: "MLP input width",
            expected: spec.input_dim(),
            actual: batch.ncols(),
        });
    }
    Ok(())
}

fn affine(x: &ArrayView2<f64>, dense: &Dense) -> Array2<f64> {
    let mut z = x.dot(&dense.weight);
    z += &dense.bias;
    z
}

/// Forward pass that records a tape for [`backward`].
pub fn forward(
    spec: &MlpSpec,
    params: &MlpParams,
    batch: ArrayView2<f64>,
) -> Result<(Array2<f64>, Tape)> {
    check_input(spec, &batch)?;
    let n_layers = spec.num_layers();
    let mut activations = Vec::with_capacity(n_layers + 1);
    activations.push(batch.to_owned());
    let mut logits = None;
    for (l, dense) in params.layers.iter().enumerate() {
        let mut z = affine(&activations[l].view(), dense);
        if l + 1 == n_layers {
            logits = Some(z.clone());
        }
        spec.layer_activation(l).apply(&mut z);
        activations.push(z);
    }
    let out = activations.last().unwrap();
    if !out.iter().all(|v| v.is_finite()) {
        return Err(Error::NumericOverflow("MLP forward pass".into()));
    }
    let tape = Tape {
        logits: logits.unwrap(),
        activations,
        version: params.version,
    };
    Ok((tape.output().clone(), tape))
}

/// Forward pass without a tape, for inference.
pub fn predict(spec: &MlpSpec, params: &MlpParams, batch: ArrayView2<f64>) -> Result<Array2<f64>> {
    check_input(spec, &batch)?;
    let mut x = batch.to_owned();
    for (l, dense) in params.layers.iter().enumerate() {
        let mut z = affine(&x.view(), dense);
        spec.layer_activation(l).apply(&mut z);
        x = z;
    }
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::NumericOverflow("MLP forward pass".into()));
    }
    Ok(x)
}

/// Reverse-mode pass given the gradient of a loss with respect to the outputs.
///
/// Returns the parameter gradients and the gradient with respect to the input batch.
pub fn backward(
    spec: &MlpSpec,
    params: &MlpParams,
    tape: &Tape,
    output_grad: ArrayView2<f64>,
) -> Result<(Gradients, Array2<f64>)> {
    check_tape(params, tape, &output_grad)?;
    let last = spec.num_layers() - 1;
    let mut delta = output_grad.to_owned();
    spec.layer_activation(last).chain(&mut delta, &tape.activations[last + 1]);
    Ok(propagate(spec, params, tape, delta))
}

/// Like [`backward`], but `logit_grad` is taken with respect to the final
/// pre-activation, skipping the output nonlinearity.
pub fn backward_from_logits(
    spec: &MlpSpec,
    params: &MlpParams,
    tape: &Tape,
    logit_grad: ArrayView2<f64>,
) -> Result<(Gradients, Array2<f64>)> {
    check_tape(params, tape, &logit_grad)?;
    Ok(propagate(spec, params, tape, logit_grad.to_owned()))
}

fn check_tape(params: &MlpParams, tape: &Tape, grad: &ArrayView2<f64>) -> Result<()> {
    if tape.version != params.version {
        return Err(Error::StaleTape);
    }
    let out = tape.output();
    if grad.dim() != out.dim() {
        return Err(Error::Dimension {
            context: "output gradient",
            expected: out.len(),
            actual: grad.len(),
        });
    }
    Ok(())
}

fn propagate(
    spec: &MlpSpec,
    params: &MlpParams,
    tape: &Tape,
    mut delta: Array2<f64>,
) -> (Gradients, Array2<f64>) {
    let n_layers = spec.num_layers();
    let mut grads = Vec::with_capacity(n_layers);
    for l in (0..n_layers).rev() {
        let a_in = &tape.activations[l];
        let weight = a_in.t().dot(&delta);
        let bias = delta.sum_axis(Axis(0));
        grads.push(Dense { weight, bias });
        let mut upstream = delta.dot(&params.layers[l].weight.t());
        if l > 0 {
            spec.layer_activation(l - 1).chain(&mut upstream, a_in);
        }
        delta = upstream;
    }
    grads.reverse();
    (Gradients { layers: grads }, delta)
}

/// A network specification bundled with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub spec: MlpSpec,
    pub params: MlpParams,
}

impl Mlp {
    pub fn new<R: RngCore + ?Sized>(spec: MlpSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let params = MlpParams::glorot(&spec, rng);
        Ok(Self { spec, params })
    }

    pub fn forward(&self, batch: ArrayView2<f64>) -> Result<(Array2<f64>, Tape)> {
        forward(&self.spec, &self.params, batch)
    }

    pub fn predict(&self, batch: ArrayView2<f64>) -> Result<Array2<f64>> {
        predict(&self.spec, &self.params, batch)
    }

    pub fn backward(&self, tape: &Tape, output_grad: ArrayView2<f64>) -> Result<(Gradients, Array2<f64>)> {
        backward(&self.spec, &self.params, tape, output_grad)
    }

    pub fn backward_from_logits(
        &self,
        tape: &Tape,
        logit_grad: ArrayView2<f64>,
    ) -> Result<(Gradients, Array2<f64>)> {
        backward_from_logits(&self.spec, &self.params, tape, logit_grad)
    }
}

/// Largest relative disagreement between analytic and central-difference
/// gradients of `loss_fn(outputs)` over every parameter.
///
/// `loss_fn` returns the scalar loss and its gradient with respect to the
/// network outputs.
pub fn grad_check<F>(spec: &MlpSpec, params: &MlpParams, loss_fn: F, probe_batch: ArrayView2<f64>) -> Result<f64>
where
    F: Fn(&Array2<f64>) -> (f64, Array2<f64>),
{
    const H: f64 = 1e-5;
    let (out, tape) = forward(spec, params, probe_batch)?;
    let (_, out_grad) = loss_fn(&out);
    let (grads, _) = backward(spec, params, &tape, out_grad.view())?;
    let analytic = grads.to_flat();

    let mut probe = params.clone();
    let base = params.to_flat();
    let mut flat = base.clone();
    let mut worst: f64 = 0.0;
    for (i, &a) in analytic.iter().enumerate() {
        flat[i] = base[i] + H;
        probe.set_flat(&flat)?;
        let plus = loss_fn(&predict(spec, &probe, probe_batch)?).0;
        flat[i] = base[i] - H;
        probe.set_flat(&flat)?;
        let minus = loss_fn(&predict(spec, &probe, probe_batch)?).0;
        flat[i] = base[i];
        let numeric = (plus - minus) / (2.0 * H);
        worst = worst.max(relative_error(a, numeric));
    }
    Ok(worst)
}

/// `|a - b| / max(|a|, |b|, 1e-8)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dense(weight: Array2<f64>, bias: Array1<f64>) -> Dense {
        Dense { weight, bias }
    }

    #[test]
    fn spec_rejects_degenerate_shapes() {
        assert!(MlpSpec::new(vec![3], Activation::Relu, OutputActivation::Identity).is_err());
        assert!(MlpSpec::new(vec![3, 0, 1], Activation::Relu, OutputActivation::Identity).is_err());
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let spec = MlpSpec::new(vec![3, 4, 2], Activation::Identity, OutputActivation::Identity).unwrap();
        let params = MlpParams::zeros(&spec);
        let out = predict(&spec, &params, array![[1.0, -2.0, 3.0], [0.5, 0.5, 9.0]].view()).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_layer_is_identity_map() {
        let spec = MlpSpec::new(vec![3, 3], Activation::Identity, OutputActivation::Identity).unwrap();
        let params = MlpParams::from_layers(&spec, vec![dense(Array2::eye(3), Array1::zeros(3))]).unwrap();
        let v = array![[0.25, -7.0, 3.5]];
        assert_eq!(predict(&spec, &params, v.view()).unwrap(), v);
    }

    #[test]
    fn two_layer_relu_matches_scalar_evaluation() {
        let spec = MlpSpec::new(vec![2, 2, 1], Activation::Relu, OutputActivation::Identity).unwrap();
        let w1 = array![[0.5, -0.3], [0.2, 0.4]];
        let b1 = array![0.1, 0.05];
        let w2 = array![[0.7], [-1.1]];
        let b2 = array![0.2];
        let params = MlpParams::from_layers(
            &spec,
            vec![dense(w1.clone(), b1.clone()), dense(w2.clone(), b2.clone())],
        )
        .unwrap();

        // scalar-by-scalar evaluation at x = [1, -1]
        let x = [1.0, -1.0];
        let mut hidden = [0.0; 2];
        for o in 0..2 {
            let mut s = b1[o];
            for i in 0..2 {
                s += x[i] * w1[[i, o]];
            }
            hidden[o] = if s > 0.0 { s } else { 0.0 };
        }
        let expected = b2[0] + hidden[0] * w2[[0, 0]] + hidden[1] * w2[[1, 0]];

        let out = predict(&spec, &params, array![[1.0, -1.0]].view()).unwrap();
        assert!((out[[0, 0]] - expected).abs() < 1e-15);
        // hand value: hidden = [0.4, 0], out = 0.2 + 0.28
        assert!((expected - 0.48).abs() < 1e-15);
    }

    #[test]
    fn input_width_mismatch_is_config_error() {
        let spec = MlpSpec::new(vec![2, 1], Activation::Identity, OutputActivation::Identity).unwrap();
        let params = MlpParams::zeros(&spec);
        let err = forward(&spec, &params, array![[1.0, 2.0, 3.0]].view()).unwrap_err();
        assert!(matches!(err, Error::Dimension { .. }));
    }

    #[test]
    fn non_finite_output_is_overflow() {
        let spec = MlpSpec::new(vec![1, 1], Activation::Identity, OutputActivation::Identity).unwrap();
        let params = MlpParams::from_layers(&spec, vec![dense(array![[1e300]], array![0.0])]).unwrap();
        let err = forward(&spec, &params, array![[1e300]].view()).unwrap_err();
        assert!(matches!(err, Error::NumericOverflow(_)));
    }

    #[test]
    fn zero_output_grad_gives_zero_gradients() {
        let spec = MlpSpec::new(vec![3, 5, 2], Activation::Tanh, OutputActivation::Sigmoid).unwrap();
        let params = MlpParams::glorot(&spec, &mut ChaCha8Rng::seed_from_u64(1));
        let x = array![[0.1, 0.2, 0.3], [-1.0, 0.0, 2.0]];
        let (out, tape) = forward(&spec, &params, x.view()).unwrap();
        let (g, dx) = backward(&spec, &params, &tape, Array2::zeros(out.dim()).view()).unwrap();
        assert!(g.to_flat().iter().all(|&v| v == 0.0));
        assert!(dx.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn scalar_linear_gradient_is_input() {
        let spec = MlpSpec::new(vec![1, 1], Activation::Identity, OutputActivation::Identity).unwrap();
        let params = MlpParams::from_layers(&spec, vec![dense(array![[0.7]], array![0.0])]).unwrap();
        let (_, tape) = forward(&spec, &params, array![[2.5]].view()).unwrap();
        let (g, dx) = backward(&spec, &params, &tape, array![[1.0]].view()).unwrap();
        assert_eq!(g.layers[0].weight[[0, 0]], 2.5);
        assert_eq!(g.layers[0].bias[0], 1.0);
        assert_eq!(dx[[0, 0]], 0.7);
    }

    #[test]
    fn stale_tape_is_rejected() {
        let spec = MlpSpec::new(vec![2, 1], Activation::Identity, OutputActivation::Identity).unwrap();
        let mut params = MlpParams::zeros(&spec);
        let (out, tape) = forward(&spec, &params, array![[1.0, 2.0]].view()).unwrap();
        params.layers_mut()[0].bias[0] = 1.0;
        let err = backward(&spec, &params, &tape, Array2::ones(out.dim()).view()).unwrap_err();
        assert!(matches!(err, Error::StaleTape));
    }

    fn half_sum_of_squares(out: &Array2<f64>) -> (f64, Array2<f64>) {
        (0.5 * out.iter().map(|v| v * v).sum::<f64>(), out.clone())
    }

    #[test]
    fn least_squares_gradient_is_exact() {
        // loss = ½‖xW + b - y‖², gradient in closed form: dW = xᵀ r, db = Σ r
        let spec = MlpSpec::new(vec![3, 2], Activation::Identity, OutputActivation::Identity).unwrap();
        let params = MlpParams::glorot(&spec, &mut ChaCha8Rng::seed_from_u64(3));
        let x = array![[0.3, -0.2, 1.0], [1.5, 0.4, -0.7], [0.0, 0.9, 0.2]];
        let y = array![[1.0, 0.0], [0.5, -0.5], [-1.0, 2.0]];
        let loss = |out: &Array2<f64>| {
            let r = out - &y;
            (0.5 * r.iter().map(|v| v * v).sum::<f64>(), r)
        };
        let err = grad_check(&spec, &params, loss, x.view()).unwrap();
        assert!(err < 1e-7, "relative error {err}");

        let residual = predict(&spec, &params, x.view()).unwrap() - &y;
        let (_, tape) = forward(&spec, &params, x.view()).unwrap();
        let (g, _) = backward(&spec, &params, &tape, residual.view()).unwrap();
        let closed = x.t().dot(&residual);
        for (a, b) in g.layers[0].weight.iter().zip(closed.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_loss_has_zero_check_error() {
        let spec = MlpSpec::new(vec![2, 3, 1], Activation::Relu, OutputActivation::Identity).unwrap();
        let params = MlpParams::glorot(&spec, &mut ChaCha8Rng::seed_from_u64(4));
        let constant = |out: &Array2<f64>| (1.0, Array2::zeros(out.dim()));
        let err = grad_check(&spec, &params, constant, array![[0.5, 0.5]].view()).unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn relu_net_passes_finite_difference_check() {
        let spec = MlpSpec::new(vec![3, 6, 6, 2], Activation::Relu, OutputActivation::Identity).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params = MlpParams::glorot(&spec, &mut rng);
        let x = Array2::from_shape_fn((4, 3), |_| rng.random_range(-1.0..1.0));
        let err = grad_check(&spec, &params, half_sum_of_squares, x.view()).unwrap();
        assert!(err < 1e-4, "relative error {err}");
    }

    #[test]
    fn glorot_respects_limits_and_seed() {
        let spec = MlpSpec::new(vec![4, 6], Activation::Relu, OutputActivation::Identity).unwrap();
        let a = MlpParams::glorot(&spec, &mut ChaCha8Rng::seed_from_u64(9));
        let b = MlpParams::glorot(&spec, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
        let limit = (6.0f64 / 10.0).sqrt();
        assert!(a.layers()[0].weight.iter().all(|w| w.abs() <= limit));
        assert!(a.layers()[0].bias.iter().all(|&b| b == 0.0));
    }
}
