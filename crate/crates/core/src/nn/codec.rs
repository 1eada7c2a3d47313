//! Binary parameter blobs.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! "GMX1"
//! u32             number of layer widths (L + 1)
//! u32 × (L + 1)   layer widths
//! u8  × (L - 1)   hidden activations (0 relu, 1 tanh, 2 identity)
//! u8              output activation (0 identity, 1 sigmoid)
//! per layer:      f64 × (in · out) weights (row-major, in × out), f64 × out biases
//! ```

use ndarray::{Array1, Array2};

use super::mlp::{Activation, Dense, Gradients, MlpParams, MlpSpec, OutputActivation};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"GMX1";

pub fn encode(spec: &MlpSpec, params: &MlpParams) -> Vec<u8> {
    encode_layers(spec, params.layers())
}

/// Same layout as [`encode`], used for optimizer moments.
pub fn encode_gradients(spec: &MlpSpec, grads: &Gradients) -> Vec<u8> {
    encode_layers(spec, &grads.layers)
}

fn encode_layers(spec: &MlpSpec, layers: &[Dense]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(spec.layer_widths.len() as u32).to_le_bytes());
    for &w in &spec.layer_widths {
        out.extend_from_slice(&(w as u32).to_le_bytes());
    }
    for a in &spec.activations {
        out.push(match a {
            Activation::Relu => 0,
            Activation::Tanh => 1,
            Activation::Identity => 2,
        });
    }
    out.push(match spec.output_activation {
        OutputActivation::Identity => 0,
        OutputActivation::Sigmoid => 1,
    });
    for d in layers {
        for v in d.weight.iter().chain(d.bias.iter()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<(MlpSpec, MlpParams)> {
    let (spec, layers) = decode_layers(bytes)?;
    let params = MlpParams::from_layers(&spec, layers)?;
    Ok((spec, params))
}

pub fn decode_gradients(bytes: &[u8]) -> Result<(MlpSpec, Gradients)> {
    let (spec, layers) = decode_layers(bytes)?;
    Ok((spec, Gradients { layers }))
}

fn decode_layers(bytes: &[u8]) -> Result<(MlpSpec, Vec<Dense>)> {
    let mut r = Reader::new(bytes);
    if r.take(4)? != MAGIC {
        return Err(Error::Format("missing GMX1 magic".into()));
    }
    let n = r.u32()? as usize;
    if !(2..=1024).contains(&n) {
        return Err(Error::Format(format!("implausible layer count {n}")));
    }
    let widths = (0..n).map(|_| r.u32().map(|w| w as usize)).collect::<Result<Vec<_>>>()?;
    let activations = (0..n - 2)
        .map(|_| match r.u8()? {
            0 => Ok(Activation::Relu),
            1 => Ok(Activation::Tanh),
            2 => Ok(Activation::Identity),
            t => Err(Error::Format(format!("unknown activation tag {t}"))),
        })
        .collect::<Result<Vec<_>>>()?;
    let output_activation = match r.u8()? {
        0 => OutputActivation::Identity,
        1 => OutputActivation::Sigmoid,
        t => return Err(Error::Format(format!("unknown output activation tag {t}"))),
    };
    let spec = MlpSpec {
        layer_widths: widths,
        activations,
        output_activation,
    };
    spec.validate()
        .map_err(|e| Error::Format(format!("invalid spec header: {e}")))?;
    let mut layers = Vec::with_capacity(spec.num_layers());
    for w in spec.layer_widths.windows(2) {
        let weight = Array2::from_shape_vec((w[0], w[1]), r.f64s(w[0] * w[1])?)
            .map_err(|e| Error::Format(e.to_string()))?;
        let bias = Array1::from(r.f64s(w[1])?);
        layers.push(Dense { weight, bias });
    }
    if !r.is_empty() {
        return Err(Error::Format(format!("{} trailing bytes", r.remaining())));
    }
    Ok((spec, layers))
}

/// Cursor over a byte slice with little-endian readers.
pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format(format!("truncated: wanted {n} bytes at offset {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::Format("length overflow".into()))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub(crate) fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.remaining() == 0
    }
}
