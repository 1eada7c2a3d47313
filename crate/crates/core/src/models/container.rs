//! Indexed checkpoint container: a kind tag followed by length-prefixed
//! entries, each usually a `GMX1` parameter blob.
//!
//! ```text
//! "GMXC" | u8 kind | u32 entry count | (u64 length, bytes) × count
//! ```

use crate::error::{Error, Result};
use crate::nn::codec::Reader;

pub const MAGIC: &[u8; 4] = b"GMXC";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    GaussianVae = 0,
    Degenerate = 1,
    Classifier = 2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub kind: ModelKind,
    pub entries: Vec<Vec<u8>>,
}

impl Container {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.push(self.kind as u8);
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for e in &self.entries {
            out.extend_from_slice(&(e.len() as u64).to_le_bytes());
            out.extend_from_slice(e);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        if r.take(4)? != MAGIC {
            return Err(Error::Format("missing GMXC magic".into()));
        }
        let kind = match r.u8()? {
            0 => ModelKind::GaussianVae,
            1 => ModelKind::Degenerate,
            2 => ModelKind::Classifier,
            t => return Err(Error::Format(format!("unknown model kind {t}"))),
        };
        let count = r.u32()? as usize;
        let mut entries = Vec::with_capacity(count.min(64));
        for _ in 0..count {
            let len = usize::try_from(r.u64()?)
                .map_err(|_| Error::Format("entry length overflow".into()))?;
            entries.push(r.take(len)?.to_vec());
        }
        if !r.is_empty() {
            return Err(Error::Format(format!("{} trailing bytes", r.remaining())));
        }
        Ok(Self { kind, entries })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_truncation() {
        let c = Container {
            kind: ModelKind::Degenerate,
            entries: vec![vec![1, 2, 3], vec![], vec![9; 17]],
        };
        let bytes = c.to_bytes();
        assert_eq!(Container::from_bytes(&bytes).unwrap(), c);
        assert!(Container::from_bytes(&bytes[..bytes.len() - 2]).is_err());
    }
}
