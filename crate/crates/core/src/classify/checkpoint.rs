//! Model checkpoint file.
//!
//! Little-endian throughout:
//!
//! ```text
//! "AYNET1"            6 bytes
//! version             u16 (= 1)
//! input_h, input_w    u32, u32
//! n_blocks            u32, then one u32 filter count per block
//! dense, n_classes    u32, u32
//! dropout_blocks      f64
//! dropout_dense       f64
//! n_labels            u32, then per label: u32 byte length + UTF-8
//! n_params            u64
//! parameters          f64 × n_params, declaration order
//! running statistics  f64, per batch-norm layer: means then variances
//! ```

use std::io::{Read, Write};

use super::network::{Network, NetworkSpec};
use super::real::Real;
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 6] = b"AYNET1";
const VERSION: u16 = 1;
const MAX_LABEL_BYTES: u32 = 4096;

pub fn write_checkpoint<T: Real, W: Write>(
    net: &Network<T>,
    labels: &[String],
    mut w: W,
) -> Result<()> {
    let spec = net.spec();
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    for v in [spec.input_h, spec.input_w, spec.filters.len()] {
        w.write_all(&(v as u32).to_le_bytes())?;
    }
    for &f in &spec.filters {
        w.write_all(&(f as u32).to_le_bytes())?;
    }
    w.write_all(&(spec.dense as u32).to_le_bytes())?;
    w.write_all(&(spec.n_classes as u32).to_le_bytes())?;
    w.write_all(&spec.dropout_blocks.to_le_bytes())?;
    w.write_all(&spec.dropout_dense.to_le_bytes())?;
    w.write_all(&(labels.len() as u32).to_le_bytes())?;
    for l in labels {
        w.write_all(&(l.len() as u32).to_le_bytes())?;
        w.write_all(l.as_bytes())?;
    }
    w.write_all(&(net.param_count() as u64).to_le_bytes())?;
    for v in net.params().iter().flatten() {
        w.write_all(&v.as_f64().to_le_bytes())?;
    }
    for (m, v) in net.running_stats() {
        for x in m.iter().chain(v) {
            w.write_all(&x.as_f64().to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_exact<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::format("checkpoint is truncated")
        } else {
            Error::Io(e)
        }
    })?;
    Ok(b)
}

fn u32_of<R: Read>(r: &mut R) -> Result<u32> {
    Ok(u32::from_le_bytes(read_exact(r)?))
}

fn f64_of<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_le_bytes(read_exact(r)?))
}

/// Network and label names stored in a checkpoint.
pub fn read_checkpoint<T: Real, R: Read>(mut r: R) -> Result<(Network<T>, Vec<String>)> {
    let magic: [u8; 6] = read_exact(&mut r)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::format("not a network checkpoint (bad magic)"));
    }
    let version = u16::from_le_bytes(read_exact(&mut r)?);
    if version != VERSION {
        return Err(Error::format(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let input_h = u32_of(&mut r)? as usize;
    let input_w = u32_of(&mut r)? as usize;
    let n_blocks = u32_of(&mut r)?;
    if n_blocks > 64 {
        return Err(Error::format("implausible block count"));
    }
    let filters = (0..n_blocks)
        .map(|_| u32_of(&mut r).map(|v| v as usize))
        .collect::<Result<Vec<_>>>()?;
    let dense = u32_of(&mut r)? as usize;
    let n_classes = u32_of(&mut r)? as usize;
    let dropout_blocks = f64_of(&mut r)?;
    let dropout_dense = f64_of(&mut r)?;
    let n_labels = u32_of(&mut r)?;
    if n_labels as usize > n_classes.max(1) * 4 + 64 {
        return Err(Error::format("implausible label count"));
    }
    let mut labels = Vec::with_capacity(n_labels as usize);
    for _ in 0..n_labels {
        let len = u32_of(&mut r)?;
        if len > MAX_LABEL_BYTES {
            return Err(Error::format("label too long"));
        }
        let mut b = vec![0u8; len as usize];
        r.read_exact(&mut b)
            .map_err(|_| Error::format("checkpoint is truncated"))?;
        labels.push(String::from_utf8(b).map_err(|_| Error::format("label is not UTF-8"))?);
    }
    let spec = NetworkSpec {
        input_h,
        input_w,
        filters,
        dense,
        n_classes,
        dropout_blocks,
        dropout_dense,
    };
    spec.validate()
        .map_err(|e| Error::format(format!("bad network descriptor: {e}")))?;
    let mut net = Network::<T>::new(spec, 0)?;
    let n_params = u64::from_le_bytes(read_exact(&mut r)?);
    if n_params != net.param_count() as u64 {
        return Err(Error::format(format!(
            "checkpoint holds {n_params} parameters, descriptor implies {}",
            net.param_count()
        )));
    }
    for p in net.params_mut() {
        for v in p.iter_mut() {
            *v = T::from_f64(f64_of(&mut r)?);
        }
    }
    for (m, v) in net.running_stats_mut() {
        for x in m.iter_mut().chain(v.iter_mut()) {
            *x = T::from_f64(f64_of(&mut r)?);
        }
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::format("trailing bytes after checkpoint"));
    }
    Ok((net, labels))
}
