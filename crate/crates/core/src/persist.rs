//! `PVDW1` weight bundles: method key, layer shapes and raw little-endian
//! parameters. Operator networks are stored as branch then trunk.

use std::path::Path;

use thiserror::Error;

use crate::nn::{param_count, DeepOnet, Mlp, NnError, Surrogate};

pub const MAGIC: &[u8; 5] = b"PVDW1";

const MAX_WIDTH: usize = 1 << 20;

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("not a weight bundle or unsupported version (expected PVDW1)")]
    Version,
    #[error("corrupt weight bundle: {0}")]
    Corrupt(String),
    #[error("shape list needs {expected} parameter bytes, file has {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightBundle {
    pub method: String,
    pub mlps: Vec<Mlp>,
}

impl WeightBundle {
    pub fn from_surrogates(method: &str, nets: &[Surrogate]) -> Self {
        let mut mlps = Vec::new();
        for n in nets {
            match n {
                Surrogate::Point(m) => mlps.push(m.clone()),
                Surrogate::Operator(d) => {
                    mlps.push(d.branch().clone());
                    mlps.push(d.trunk().clone());
                }
            }
        }
        Self { method: method.into(), mlps }
    }

    /// Rebuilds the networks; `operator` pairs consecutive entries.
    pub fn to_surrogates(&self, operator: bool) -> Result<Vec<Surrogate>, PersistError> {
        if !operator {
            return Ok(self.mlps.iter().cloned().map(Surrogate::Point).collect());
        }
        if self.mlps.len() % 2 != 0 {
            return Err(PersistError::Corrupt("operator bundle with an odd number of networks".into()));
        }
        self.mlps
            .chunks(2)
            .map(|c| Ok(Surrogate::Operator(DeepOnet::new(c[0].clone(), c[1].clone())?)))
            .collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = MAGIC.to_vec();
        let put = |out: &mut Vec<u8>, v: usize| out.extend((v as u32).to_le_bytes());
        put(&mut out, self.method.len());
        out.extend(self.method.as_bytes());
        put(&mut out, self.mlps.len());
        for m in &self.mlps {
            put(&mut out, m.widths().len());
            for &w in m.widths() {
                put(&mut out, w);
            }
        }
        for m in &self.mlps {
            for p in m.params() {
                out.extend(p.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PersistError> {
        if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
            return Err(PersistError::Version);
        }
        let mut r = Reader { bytes, pos: MAGIC.len() };
        let key_len = r.u32()?;
        let method = String::from_utf8(r.take(key_len)?.to_vec())
            .map_err(|_| PersistError::Corrupt("method key is not utf-8".into()))?;
        let count = r.u32()?;
        let mut shapes = Vec::new();
        for _ in 0..count {
            let n = r.u32()?;
            if n < 2 {
                return Err(PersistError::Corrupt("network with fewer than two layers".into()));
            }
            let widths = (0..n).map(|_| r.u32()).collect::<Result<Vec<_>, _>>()?;
            if widths.iter().any(|&w| w == 0 || w > MAX_WIDTH) {
                return Err(PersistError::Corrupt(format!("implausible layer widths {widths:?}")));
            }
            shapes.push(widths);
        }
        let expected = shapes.iter().map(|w| param_count(w) * 8).sum::<usize>();
        let found = bytes.len() - r.pos;
        if expected != found {
            return Err(PersistError::LengthMismatch { expected, found });
        }
        let mut mlps = Vec::with_capacity(shapes.len());
        for widths in shapes {
            let raw = r.take(param_count(&widths) * 8)?;
            let params = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
            mlps.push(Mlp::from_params(&widths, params)?);
        }
        Ok(Self { method, mlps })
    }

    pub fn save(&self, path: &Path) -> Result<(), PersistError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, PersistError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], PersistError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| PersistError::Corrupt(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize, PersistError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
    }
}
