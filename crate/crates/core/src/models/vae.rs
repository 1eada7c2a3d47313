use std::f64::consts::PI;

use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::container::{Container, ModelKind};
use crate::error::{Error, Result};
use crate::nn::{
    adam_step, codec, Activation, AdamConfig, AdamState, Gradients, Mlp, MlpSpec, OutputActivation,
};

const LOGVAR_MIN: f64 = -10.0;
const LOGVAR_MAX: f64 = 10.0;
const SAMPLE_CHUNK: usize = 8192;

fn default_latent_dim() -> usize {
    5
}

fn default_obs_variance() -> f64 {
    1.0
}

fn default_hidden() -> Vec<usize> {
    vec![50, 50]
}

fn default_batch_size() -> usize {
    32
}

/// Architecture and optimizer settings for a [`GaussianVae`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaeConfig {
    /// Hidden widths shared by encoder and decoder.
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    #[serde(default = "default_activation")]
    pub activation: Activation,
    #[serde(default = "default_latent_dim")]
    pub latent_dim: usize,
    /// Decoder observation variance σ².
    #[serde(default = "default_obs_variance")]
    pub obs_variance: f64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default)]
    pub adam: AdamConfig,
}

fn default_activation() -> Activation {
    Activation::Relu
}

impl Default for VaeConfig {
    fn default() -> Self {
        Self {
            hidden: default_hidden(),
            activation: default_activation(),
            latent_dim: default_latent_dim(),
            obs_variance: default_obs_variance(),
            batch_size: default_batch_size(),
            adam: AdamConfig::default(),
        }
    }
}

impl VaeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 {
            return Err(Error::Config("latent_dim must be at least 1".into()));
        }
        if !(self.obs_variance > 0.0 && self.obs_variance.is_finite()) {
            return Err(Error::Config(format!(
                "obs_variance must be positive, got {}",
                self.obs_variance
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config("hidden widths must be positive".into()));
        }
        self.adam.validate()
    }

    fn encoder_spec(&self, data_dim: usize) -> Result<MlpSpec> {
        let mut widths = vec![data_dim];
        widths.extend(&self.hidden);
        widths.push(2 * self.latent_dim);
        MlpSpec::new(widths, self.activation, OutputActivation::Identity)
    }

    fn decoder_spec(&self, data_dim: usize) -> Result<MlpSpec> {
        let mut widths = vec![self.latent_dim];
        widths.extend(&self.hidden);
        widths.push(data_dim);
        MlpSpec::new(widths, self.activation, OutputActivation::Identity)
    }
}

/// Loss value, its two terms, and parameter gradients for one batch.
#[derive(Debug, Clone)]
pub struct ElboTerms {
    /// Mean negative ELBO: `recon + kl`.
    pub loss: f64,
    /// Mean Gaussian reconstruction negative log-likelihood.
    pub recon: f64,
    /// Mean KL(q(z|x) ‖ N(0, I)).
    pub kl: f64,
    pub encoder: Gradients,
    pub decoder: Gradients,
}

/// VAE with a diagonal Gaussian encoder, standard normal prior and a
/// Gaussian decoder of fixed isotropic variance.
#[derive(Debug, Clone)]
pub struct GaussianVae {
    encoder: Mlp,
    decoder: Mlp,
    latent_dim: usize,
    obs_variance: f64,
    batch_size: usize,
    encoder_opt: AdamState,
    decoder_opt: AdamState,
}

impl GaussianVae {
    pub fn new(data_dim: usize, config: &VaeConfig, rng: &mut dyn RngCore) -> Result<Self> {
        config.validate()?;
        let encoder = Mlp::new(config.encoder_spec(data_dim)?, rng)?;
        let decoder = Mlp::new(config.decoder_spec(data_dim)?, rng)?;
        Self::from_parts(encoder, decoder, config)
    }

    /// Builds a VAE around existing networks; optimizer state starts fresh.
    pub fn from_parts(encoder: Mlp, decoder: Mlp, config: &VaeConfig) -> Result<Self> {
        config.validate()?;
        let z = decoder.spec.input_dim();
        if encoder.spec.output_dim() != 2 * z {
            return Err(Error::Dimension {
                context: "encoder output (mean and log-variance)",
                expected: 2 * z,
                actual: encoder.spec.output_dim(),
            });
        }
        if encoder.spec.input_dim() != decoder.spec.output_dim() {
            return Err(Error::Dimension {
                context: "decoder output vs data dimension",
                expected: encoder.spec.input_dim(),
                actual: decoder.spec.output_dim(),
            });
        }
        let encoder_opt = AdamState::new(config.adam, &encoder.params)?;
        let decoder_opt = AdamState::new(config.adam, &decoder.params)?;
        Ok(Self {
            encoder,
            decoder,
            latent_dim: z,
            obs_variance: config.obs_variance,
            batch_size: config.batch_size,
            encoder_opt,
            decoder_opt,
        })
    }

    pub fn encoder(&self) -> &Mlp {
        &self.encoder
    }

    pub fn decoder(&self) -> &Mlp {
        &self.decoder
    }

    pub fn encoder_mut(&mut self) -> &mut Mlp {
        &mut self.encoder
    }

    pub fn decoder_mut(&mut self) -> &mut Mlp {
        &mut self.decoder
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn data_dim(&self) -> usize {
        self.decoder.spec.output_dim()
    }

    pub fn obs_variance(&self) -> f64 {
        self.obs_variance
    }

    /// ELBO on `batch` with one reparameterization draw per row from `rng`.
    pub fn elbo_loss(&self, batch: ArrayView2<f64>, rng: &mut dyn RngCore) -> Result<ElboTerms> {
        let noise = standard_normal(batch.nrows(), self.latent_dim, rng);
        self.elbo_loss_with_noise(batch, noise.view())
    }

    /// ELBO with the reparameterization noise supplied explicitly.
    pub fn elbo_loss_with_noise(
        &self,
        batch: ArrayView2<f64>,
        noise: ArrayView2<f64>,
    ) -> Result<ElboTerms> {
        let b = batch.nrows();
        let z = self.latent_dim;
        let d = self.data_dim();
        if b == 0 {
            return Err(Error::Precondition("ELBO on an empty batch".into()));
        }
        if noise.dim() != (b, z) {
            return Err(Error::Dimension {
                context: "reparameterization noise",
                expected: b * z,
                actual: noise.len(),
            });
        }
        let bf = b as f64;
        let var = self.obs_variance;

        let (enc_out, enc_tape) = self.encoder.forward(batch)?;
        let mu = enc_out.slice(s![.., ..z]);
        let raw_logvar = enc_out.slice(s![.., z..]);
        let logvar = raw_logvar.mapv(|v| v.clamp(LOGVAR_MIN, LOGVAR_MAX));
        let std = logvar.mapv(|v| (0.5 * v).exp());
        let latent = &mu + &(&std * &noise);

        let (mean, dec_tape) = self.decoder.forward(latent.view())?;
        let diff = &mean - &batch;

        let sq: f64 = diff.iter().map(|v| v * v).sum();
        let recon = 0.5 * sq / var / bf + 0.5 * d as f64 * (2.0 * PI * var).ln();
        let kl_sum: f64 = ndarray::Zip::from(&mu)
            .and(&logvar)
            .fold(0.0, |acc, &m, &lv| acc + 0.5 * (m * m + lv.exp() - lv - 1.0));
        let kl = kl_sum / bf;
        if !recon.is_finite() {
            return Err(Error::Numeric("ELBO reconstruction term".into()));
        }
        if !kl.is_finite() {
            return Err(Error::Numeric("ELBO KL term".into()));
        }

        let d_mean = diff / (var * bf);
        let (decoder_grads, d_latent) = self.decoder.backward(&dec_tape, d_mean.view())?;

        let d_mu = &d_latent + &(&mu / bf);
        let mut d_logvar = &d_latent * &noise * &std * 0.5;
        ndarray::Zip::from(&mut d_logvar)
            .and(&logvar)
            .and(&raw_logvar)
            .for_each(|g, &lv, &raw| {
                if !(LOGVAR_MIN..=LOGVAR_MAX).contains(&raw) {
                    *g = 0.0;
                } else {
                    *g += 0.5 * (lv.exp() - 1.0) / bf;
                }
            });
        let enc_grad = concatenate![Axis(1), d_mu, d_logvar];
        let (encoder_grads, _) = self.encoder.backward(&enc_tape, enc_grad.view())?;

        Ok(ElboTerms {
            loss: recon + kl,
            recon,
            kl,
            encoder: encoder_grads,
            decoder: decoder_grads,
        })
    }

    /// One shuffled pass of minibatch Adam over `subset`; returns the mean loss.
    pub fn train_epoch(&mut self, subset: ArrayView2<f64>, rng: &mut dyn RngCore) -> Result<f64> {
        if subset.nrows() == 0 {
            return Err(Error::Balancing("VAE asked to train on an empty subset".into()));
        }
        if subset.ncols() != self.data_dim() {
            return Err(Error::Dimension {
                context: "VAE training data",
                expected: self.data_dim(),
                actual: subset.ncols(),
            });
        }
        let mut order: Vec<usize> = (0..subset.nrows()).collect();
        order.shuffle(rng);
        let mut total = 0.0;
        for idx in order.chunks(self.batch_size) {
            let batch = subset.select(Axis(0), idx);
            let terms = self.elbo_loss(batch.view(), rng)?;
            adam_step(&mut self.encoder.params, &terms.encoder, &mut self.encoder_opt)?;
            adam_step(&mut self.decoder.params, &terms.decoder, &mut self.decoder_opt)?;
            total += terms.loss * idx.len() as f64;
        }
        Ok(total / subset.nrows() as f64)
    }

    /// Decodes `n` prior draws; emits decoder means (no observation noise).
    pub fn sample(&self, n: usize, rng: &mut dyn RngCore) -> Result<Array2<f64>> {
        let mut out = Array2::zeros((n, self.data_dim()));
        let mut start = 0;
        while start < n {
            let len = SAMPLE_CHUNK.min(n - start);
            let z = standard_normal(len, self.latent_dim, rng);
            let x = self.decoder.predict(z.view())?;
            out.slice_mut(s![start..start + len, ..]).assign(&x);
            start += len;
        }
        Ok(out)
    }

    pub(crate) fn to_container(&self) -> Container {
        let mut meta = Vec::new();
        meta.extend_from_slice(&(self.latent_dim as u32).to_le_bytes());
        meta.extend_from_slice(&self.obs_variance.to_le_bytes());
        meta.extend_from_slice(&(self.batch_size as u32).to_le_bytes());
        for opt in [&self.encoder_opt, &self.decoder_opt] {
            let c = opt.config;
            for v in [c.lr, c.beta1, c.beta2, c.eps] {
                meta.extend_from_slice(&v.to_le_bytes());
            }
            meta.extend_from_slice(&opt.t.to_le_bytes());
        }
        Container {
            kind: ModelKind::GaussianVae,
            entries: vec![
                meta,
                codec::encode(&self.encoder.spec, &self.encoder.params),
                codec::encode(&self.decoder.spec, &self.decoder.params),
                codec::encode_gradients(&self.encoder.spec, &self.encoder_opt.m),
                codec::encode_gradients(&self.encoder.spec, &self.encoder_opt.v),
                codec::encode_gradients(&self.decoder.spec, &self.decoder_opt.m),
                codec::encode_gradients(&self.decoder.spec, &self.decoder_opt.v),
            ],
        }
    }

    pub(crate) fn from_container(c: &Container) -> Result<Self> {
        if c.kind != ModelKind::GaussianVae || c.entries.len() != 7 {
            return Err(Error::Format("not a Gaussian VAE checkpoint".into()));
        }
        let mut r = crate::nn::codec::Reader::new(&c.entries[0]);
        let latent_dim = r.u32()? as usize;
        let obs_variance = r.f64()?;
        let batch_size = r.u32()? as usize;
        let mut opts = Vec::new();
        for _ in 0..2 {
            let config = AdamConfig {
                lr: r.f64()?,
                beta1: r.f64()?,
                beta2: r.f64()?,
                eps: r.f64()?,
            };
            opts.push((config, r.u64()?));
        }
        let (enc_spec, enc_params) = codec::decode(&c.entries[1])?;
        let (dec_spec, dec_params) = codec::decode(&c.entries[2])?;
        let (_, enc_m) = codec::decode_gradients(&c.entries[3])?;
        let (_, enc_v) = codec::decode_gradients(&c.entries[4])?;
        let (_, dec_m) = codec::decode_gradients(&c.entries[5])?;
        let (_, dec_v) = codec::decode_gradients(&c.entries[6])?;
        let config = VaeConfig {
            hidden: Vec::new(),
            activation: Activation::Relu,
            latent_dim,
            obs_variance,
            batch_size,
            adam: opts[0].0,
        };
        let mut vae = Self::from_parts(
            Mlp {
                spec: enc_spec,
                params: enc_params,
            },
            Mlp {
                spec: dec_spec,
                params: dec_params,
            },
            &config,
        )?;
        vae.encoder_opt = AdamState {
            config: opts[0].0,
            m: enc_m,
            v: enc_v,
            t: opts[0].1,
        };
        vae.decoder_opt = AdamState {
            config: opts[1].0,
            m: dec_m,
            v: dec_v,
            t: opts[1].1,
        };
        Ok(vae)
    }
}

pub(crate) fn standard_normal(rows: usize, cols: usize, rng: &mut dyn RngCore) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || StandardNormal.sample(rng))
}
