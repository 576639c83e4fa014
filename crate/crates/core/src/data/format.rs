//! Binary feature container.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! magic        8 bytes  "SINNFEAT"
//! version      u32      1
//! dim          u32
//! layer count  u32
//! per layer:   name length u32, UTF-8 name, label count u32
//! flags        u32      bit 0: samples carry a sequence tag
//! samples      u64
//! per sample:  id u64, dim x f64, per layer ceil(n/8) bitmap bytes
//!              (label k is bit k%8 of byte k/8), then if flagged
//!              sequence id u64 and frame u32
//! ```

use std::io::{Read, Write};
use std::path::Path;

use super::{FeatureSet, FrameTag, LayerSpec, Sample};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"SINNFEAT";
pub const FORMAT_VERSION: u32 = 1;
const FLAG_SEQUENCE: u32 = 1;

fn u32_of(n: usize, what: &str) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::validation(format!("{what} {n} does not fit the container")))
}

pub fn write_features_to<W: Write>(set: &FeatureSet, mut out: W) -> Result<()> {
    set.validate()?;
    let mut buf = Vec::with_capacity(64 + set.samples.len() * (16 + 8 * set.dim));
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&u32_of(set.dim, "dimension")?.to_le_bytes());
    buf.extend_from_slice(&u32_of(set.layers.len(), "layer count")?.to_le_bytes());
    for l in &set.layers {
        buf.extend_from_slice(&u32_of(l.name.len(), "layer name length")?.to_le_bytes());
        buf.extend_from_slice(l.name.as_bytes());
        buf.extend_from_slice(&u32_of(l.size, "layer size")?.to_le_bytes());
    }
    let sequential = set.is_sequential();
    buf.extend_from_slice(&(if sequential { FLAG_SEQUENCE } else { 0 }).to_le_bytes());
    buf.extend_from_slice(&(set.samples.len() as u64).to_le_bytes());
    for s in &set.samples {
        buf.extend_from_slice(&s.id.to_le_bytes());
        for v in &s.features {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for t in &s.targets {
            let mut bytes = vec![0u8; t.len().div_ceil(8)];
            for (k, _) in t.iter().enumerate().filter(|(_, b)| **b) {
                bytes[k / 8] |= 1 << (k % 8);
            }
            buf.extend_from_slice(&bytes);
        }
        if let Some(tag) = s.frame {
            buf.extend_from_slice(&tag.sequence.to_le_bytes());
            buf.extend_from_slice(&tag.frame.to_le_bytes());
        }
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn write_features(set: &FeatureSet, path: impl AsRef<Path>) -> Result<()> {
    let mut bytes = Vec::new();
    write_features_to(set, &mut bytes)?;
    std::fs::write(path, bytes)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn fail(&self, message: impl Into<String>) -> Error {
        Error::Parse { offset: self.pos as u64, message: message.into() }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.fail(format!("truncated while reading {what}")));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }
}

pub fn read_features_from<R: Read>(mut input: R) -> Result<FeatureSet> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    parse(&bytes)
}

pub fn read_features(path: impl AsRef<Path>) -> Result<FeatureSet> {
    parse(&std::fs::read(path)?)
}

fn parse(bytes: &[u8]) -> Result<FeatureSet> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(8, "magic")? != MAGIC {
        c.pos = 0;
        return Err(c.fail("bad magic number"));
    }
    let version = c.u32("version")?;
    if version != FORMAT_VERSION {
        c.pos -= 4;
        return Err(c.fail(format!("unsupported version {version}")));
    }
    let dim = c.u32("dimension")? as usize;
    let n_layers = c.u32("layer count")? as usize;
    let mut layers = Vec::new();
    for k in 0..n_layers {
        let len = c.u32("layer name length")? as usize;
        let at = c.pos;
        let name = std::str::from_utf8(c.take(len, "layer name")?)
            .map_err(|_| Error::Parse { offset: at as u64, message: format!("layer {k} name is not UTF-8") })?
            .to_string();
        let size = c.u32("layer size")? as usize;
        layers.push(LayerSpec { name, size });
    }
    let flags = c.u32("flags")?;
    if flags & !FLAG_SEQUENCE != 0 {
        c.pos -= 4;
        return Err(c.fail(format!("unknown flags {flags:#x}")));
    }
    let count = c.u64("sample count")?;
    let record = 8 + 8 * dim + layers.iter().map(|l| l.size.div_ceil(8)).sum::<usize>() + if flags != 0 { 12 } else { 0 };
    let remaining = (bytes.len() - c.pos) as u64;
    if count.saturating_mul(record as u64) != remaining {
        return Err(c.fail(format!(
            "{count} records of {record} bytes need {} bytes but {remaining} remain",
            count.saturating_mul(record as u64)
        )));
    }
    let mut set = FeatureSet::new(dim, layers);
    for _ in 0..count {
        let id = c.u64("sample id")?;
        let features = (0..dim).map(|_| c.f64("feature")).collect::<Result<Vec<_>>>()?;
        let mut targets = Vec::with_capacity(set.layers.len());
        for l in &set.layers {
            let at = c.pos;
            let raw = c.take(l.size.div_ceil(8), "label bitmap")?;
            let t: Vec<bool> = (0..l.size).map(|k| raw[k / 8] >> (k % 8) & 1 == 1).collect();
            if l.size % 8 != 0 && raw[raw.len() - 1] >> (l.size % 8) != 0 {
                return Err(Error::Parse { offset: at as u64, message: format!("padding bits set in layer `{}` bitmap", l.name) });
            }
            targets.push(t);
        }
        let frame = if flags != 0 {
            Some(FrameTag { sequence: c.u64("sequence id")?, frame: c.u32("frame index")? })
        } else {
            None
        };
        set.samples.push(Sample { id, features, targets, frame });
    }
    set.validate()?;
    Ok(set)
}
