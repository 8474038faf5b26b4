//! Binary checkpoints.
//!
//! Layout: the 8 magic bytes `PODPOCK1`, the format version as `u32` LE, then
//! one record per array: rank (`u32` LE), each dimension (`u32` LE), and the
//! values as `f64` LE in row-major order.
//!
//! Arrays appear in a fixed order: generative actor (if any), critic,
//! baseline actor (if any), then one Adam state per network in the same
//! order. An Adam state is its first-moment arrays, its second-moment arrays
//! and a rank-1 array `[step, lr, beta1, beta2, eps]`.

use std::fs;
use std::path::Path;

use podpo_core::nn::{AdamConfig, AdamState, ParamArrays};
use podpo_core::trainer::{PolicyState, Trainer};

pub const MAGIC: &[u8; 8] = b"PODPOCK1";
pub const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("not a checkpoint: expected magic {expected:?}, found {found:?}")]
    Magic { expected: String, found: String },
    #[error("incompatible checkpoint version: expected {expected}, found {found}")]
    Version { expected: u32, found: u32 },
    #[error("checkpoint truncated at byte {offset}: needed {needed} more bytes")]
    Truncated { offset: usize, needed: usize },
    #[error("{0} trailing bytes after the last array")]
    Trailing(usize),
    #[error("checkpoint holds {found} arrays, this configuration needs {expected}")]
    Count { expected: usize, found: usize },
    #[error("array {index} ({name}): expected shape {expected:?}, found {found:?}")]
    Shape {
        index: usize,
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("array {index} ({name}) contains non-finite values")]
    NonFinite { index: usize, name: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrayRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

pub fn encode(arrays: &[ArrayRecord]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for a in arrays {
        debug_assert_eq!(a.shape.iter().product::<usize>(), a.data.len());
        out.extend_from_slice(&(a.shape.len() as u32).to_le_bytes());
        for &d in &a.shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in &a.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let left = self.bytes.len() - self.pos;
        if left < n {
            return Err(CheckpointError::Truncated {
                offset: self.pos,
                needed: n - left,
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// Parses every array record. Names are positional (`array 0`, `array 1`, ...).
pub fn decode(bytes: &[u8]) -> Result<Vec<ArrayRecord>, CheckpointError> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(MAGIC.len()).map_err(|_| CheckpointError::Magic {
        expected: String::from_utf8_lossy(MAGIC).into_owned(),
        found: String::from_utf8_lossy(bytes).into_owned(),
    })?;
    if magic != MAGIC {
        return Err(CheckpointError::Magic {
            expected: String::from_utf8_lossy(MAGIC).into_owned(),
            found: String::from_utf8_lossy(magic).into_owned(),
        });
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(CheckpointError::Version {
            expected: VERSION,
            found: version,
        });
    }
    let mut arrays = Vec::new();
    while r.pos < bytes.len() {
        let rank = r.u32()? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32()? as usize);
        }
        let len: usize = shape.iter().product();
        let raw = r.take(len.checked_mul(8).ok_or(CheckpointError::Truncated {
            offset: r.pos,
            needed: usize::MAX,
        })?)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        arrays.push(ArrayRecord {
            name: format!("array {}", arrays.len()),
            shape,
            data,
        });
    }
    Ok(arrays)
}

fn param_records<P: ParamArrays + ?Sized>(p: &P, out: &mut Vec<ArrayRecord>) {
    for (i, a) in p.arrays().into_iter().enumerate() {
        out.push(ArrayRecord {
            name: p.array_name(i),
            shape: p.array_shape(i),
            data: a.to_vec(),
        });
    }
}

fn adam_records<P: ParamArrays + ?Sized>(
    p: &P,
    opt: &AdamState,
    label: &str,
    out: &mut Vec<ArrayRecord>,
) {
    for (moment, arrays) in [("m", &opt.m), ("v", &opt.v)] {
        for (i, a) in arrays.iter().enumerate() {
            out.push(ArrayRecord {
                name: format!("adam {moment} of {}", p.array_name(i)),
                shape: p.array_shape(i),
                data: a.clone(),
            });
        }
    }
    let c = opt.config;
    out.push(ArrayRecord {
        name: format!("adam state of {label}"),
        shape: vec![5],
        data: vec![opt.step as f64, c.lr, c.beta1, c.beta2, c.eps],
    });
}

/// Every array of the trainer's networks and optimizers, in file order.
pub fn trainer_records(t: &Trainer) -> Vec<ArrayRecord> {
    let mut out = Vec::new();
    match &t.policy {
        PolicyState::Podpo { actor, opt } => {
            param_records(actor, &mut out);
            param_records(&t.critic, &mut out);
            adam_records(actor, opt, "actor", &mut out);
            adam_records(&t.critic, &t.critic_opt, "critic", &mut out);
        }
        PolicyState::Baseline { actor, opt } => {
            param_records(&t.critic, &mut out);
            param_records(actor, &mut out);
            adam_records(&t.critic, &t.critic_opt, "critic", &mut out);
            adam_records(actor, opt, "baseline actor", &mut out);
        }
    }
    out
}

fn write_params<P: ParamArrays + ?Sized>(p: &mut P, src: &mut impl Iterator<Item = ArrayRecord>) {
    for dst in p.arrays_mut() {
        dst.copy_from_slice(&src.next().expect("count checked").data);
    }
}

fn write_adam(opt: &mut AdamState, src: &mut impl Iterator<Item = ArrayRecord>) {
    for dst in opt.m.iter_mut().chain(opt.v.iter_mut()) {
        dst.copy_from_slice(&src.next().expect("count checked").data);
    }
    let meta = src.next().expect("count checked").data;
    opt.step = meta[0] as u64;
    opt.config = AdamConfig {
        lr: meta[1],
        beta1: meta[2],
        beta2: meta[3],
        eps: meta[4],
    };
}

/// Loads decoded arrays into a trainer built from the same configuration.
/// Every shape is checked before anything is written, so a mismatch leaves
/// the trainer untouched.
pub fn restore(t: &mut Trainer, arrays: Vec<ArrayRecord>) -> Result<(), CheckpointError> {
    let expected = trainer_records(t);
    if expected.len() != arrays.len() {
        return Err(CheckpointError::Count {
            expected: expected.len(),
            found: arrays.len(),
        });
    }
    for (i, (e, a)) in expected.iter().zip(&arrays).enumerate() {
        if e.shape != a.shape {
            return Err(CheckpointError::Shape {
                index: i,
                name: e.name.clone(),
                expected: e.shape.clone(),
                found: a.shape.clone(),
            });
        }
        if a.data.iter().any(|v| !v.is_finite()) {
            return Err(CheckpointError::NonFinite {
                index: i,
                name: e.name.clone(),
            });
        }
    }
    let mut src = arrays.into_iter();
    match &mut t.policy {
        PolicyState::Podpo { actor, opt } => {
            write_params(actor, &mut src);
            write_params(&mut t.critic, &mut src);
            write_adam(opt, &mut src);
            write_adam(&mut t.critic_opt, &mut src);
        }
        PolicyState::Baseline { actor, opt } => {
            write_params(&mut t.critic, &mut src);
            write_params(actor, &mut src);
            write_adam(&mut t.critic_opt, &mut src);
            write_adam(opt, &mut src);
        }
    }
    Ok(())
}

pub fn save(t: &Trainer, path: &Path) -> Result<(), CheckpointError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, encode(&trainer_records(t)))?;
    fs::rename(tmp, path)?;
    Ok(())
}

pub fn load_into(t: &mut Trainer, path: &Path) -> Result<(), CheckpointError> {
    let bytes = fs::read(path)?;
    restore(t, decode(&bytes)?)
}
