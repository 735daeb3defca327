//! Binary model checkpoints.
//!
//! Layout, all integers little-endian `u32`, all reals little-endian `f64`:
//!
//! ```text
//! magic "BCANET\0\0" | version | layer count
//! per layer: kind tag (u8)
//!   kernel kinds add: out, in, height, width, stride, bias length,
//!   then the weights (row-major out, in, h, w) and the biases
//! ```

use crate::linops::KernelSpec;
use crate::nn::network::{LayerKind, LayerSpec, NetworkSpec};
use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"BCANET\0\0";
pub const VERSION: u32 = 1;

fn tag(kind: LayerKind) -> u8 {
    LayerKind::ALL.iter().position(|&k| k == kind).unwrap() as u8
}

pub fn encode(net: &NetworkSpec) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(net.layers().len() as u32).to_le_bytes());
    for layer in net.layers() {
        out.push(tag(layer.kind()));
        if let Some(k) = layer.kernel() {
            for v in [k.out_channels, k.in_channels, k.height, k.width, k.stride, k.bias.len()] {
                out.extend_from_slice(&(v as u32).to_le_bytes());
            }
            for v in k.weights.iter().chain(&k.bias) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Parse(format!("checkpoint truncated at byte {}", self.pos)))?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn f64s(&mut self, count: usize) -> Result<Vec<f64>> {
        let bytes = self.take(count.checked_mul(8).ok_or_else(|| Error::Parse("array too large".into()))?)?;
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

pub fn decode(bytes: &[u8]) -> Result<NetworkSpec> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(Error::Parse("not a network checkpoint".into()));
    }
    let version = r.u32()?;
    if version != VERSION as usize {
        return Err(Error::Parse(format!("unsupported checkpoint version {version}")));
    }
    let count = r.u32()?;
    let mut layers = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let t = r.take(1)?[0] as usize;
        let kind = *LayerKind::ALL.get(t).ok_or_else(|| Error::Parse(format!("unknown layer tag {t}")))?;
        let kernel = if kind.has_kernel() {
            let (o, i, h, w, s, b) = (r.u32()?, r.u32()?, r.u32()?, r.u32()?, r.u32()?, r.u32()?);
            let weights = r.f64s(o * i * h * w)?;
            let bias = r.f64s(b)?;
            Some(KernelSpec::new(o, i, h, w, s, weights, bias).map_err(|e| Error::Parse(e.to_string()))?)
        } else {
            None
        };
        layers.push(LayerSpec::from_parts(kind, kernel).map_err(|e| Error::Parse(e.to_string()))?);
    }
    if r.pos != bytes.len() {
        return Err(Error::Parse("trailing bytes after checkpoint".into()));
    }
    NetworkSpec::new(layers)
}

pub fn save(net: &NetworkSpec, path: &std::path::Path) -> Result<()> {
    std::fs::write(path, encode(net))?;
    Ok(())
}

pub fn load(path: &std::path::Path) -> Result<NetworkSpec> {
    decode(&std::fs::read(path)?)
}
