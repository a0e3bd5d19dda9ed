//! Flat little-endian parameter files.
//!
//! Layout: `b"SAPN"`, format version (`u32`), layer count (`u32`), then for
//! each layer its input dim, output dim and activation code (three `u32`s),
//! followed by every layer's weights (row-major `inputs x outputs`) and bias
//! as raw `f64`.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::matrix::DenseMatrix;
use super::mlp::{Activation, Layer, Mlp};
use super::NumError;

pub const MAGIC: &[u8; 4] = b"SAPN";
pub const VERSION: u32 = 1;

pub fn write_mlp<W: Write>(net: &Mlp, mut w: W) -> Result<(), NumError> {
    let mut buf = Vec::with_capacity(12 + net.layers().len() * 12 + net.param_count() * 8);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(net.layers().len() as u32).to_le_bytes());
    for l in net.layers() {
        buf.extend_from_slice(&(l.input_dim() as u32).to_le_bytes());
        buf.extend_from_slice(&(l.output_dim() as u32).to_le_bytes());
        buf.extend_from_slice(&l.activation.code().to_le_bytes());
    }
    for l in net.layers() {
        for v in l.weights.as_slice().iter().chain(&l.bias) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_mlp<R: Read>(mut r: R) -> Result<Mlp, NumError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut cur = Cursor { bytes: &bytes, pos: 0 };
    if cur.take(4)? != MAGIC {
        return Err(NumError::Checkpoint("bad magic".into()));
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(NumError::Checkpoint(format!("unsupported version {version}")));
    }
    let count = cur.u32()? as usize;
    let mut dims = Vec::with_capacity(count);
    for _ in 0..count {
        let i = cur.u32()? as usize;
        let o = cur.u32()? as usize;
        let code = cur.u32()?;
        let act = Activation::from_code(code)
            .ok_or_else(|| NumError::Checkpoint(format!("unknown activation code {code}")))?;
        dims.push((i, o, act));
    }
    let mut layers = Vec::with_capacity(count);
    for (i, o, act) in dims {
        let weights = cur.f64s(i * o)?;
        let bias = cur.f64s(o)?;
        layers.push(Layer {
            weights: DenseMatrix::from_vec(i, o, weights)?,
            bias,
            activation: act,
        });
    }
    if cur.pos != bytes.len() {
        return Err(NumError::Checkpoint("trailing bytes after parameters".into()));
    }
    Mlp::from_layers(layers).map_err(|e| NumError::Checkpoint(e.to_string()))
}

pub fn save_mlp(net: &Mlp, path: &Path) -> Result<(), NumError> {
    let f = fs::File::create(path)?;
    write_mlp(net, std::io::BufWriter::new(f))
}

pub fn load_mlp(path: &Path) -> Result<Mlp, NumError> {
    read_mlp(fs::File::open(path)?)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NumError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| NumError::Checkpoint("truncated file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, NumError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, NumError> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| NumError::Checkpoint("size overflow".into()))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}
