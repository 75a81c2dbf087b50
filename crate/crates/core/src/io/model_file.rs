//! Binary model files. All integers and floats are little-endian.
//!
//! ```text
//! magic        8 bytes  "MICROGRD"
//! version      u32      1
//! vocab_hash   u64      first 8 bytes of SHA-256 over the vocabulary
//! vocab_len    u32
//! vocab        vocab_len x (u32 byte length, UTF-8 bytes)
//! has_image    u8       then width, height, channels as u32 when 1
//! n_layers     u32      bottom layer first
//! per layer:
//!   kind       u8       0 = CCG, 1 = CG
//!   extents    u32 u32
//!   window     u32 u32
//!   vocab_size u32
//!   smoothing  u8       then kernel size u32 and sigma f64 when 1
//!   pi         cells x vocab_size f64, word-major: pi[z * cells + i]
//! ```

use std::io::{Read, Write};
use std::path::Path;

use crate::corpus::{vocab_hash, Corpus};
use crate::error::{Error, Result};
use crate::grid::{CountingGrid, GridGeometry};
use crate::hierarchy::{Layer, LayerKind, LayerStack};

pub const MAGIC: &[u8; 8] = b"MICROGRD";
pub const VERSION: u32 = 1;

/// A single grid or a stack, together with the vocabulary it was trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub vocab: Vec<String>,
    pub image_shape: Option<(usize, usize, usize)>,
    pub stack: LayerStack,
}

impl ModelFile {
    pub fn new(corpus: &Corpus, stack: LayerStack) -> Result<Self> {
        if stack.vocab_size() != corpus.vocab_size() {
            return Err(Error::DimensionMismatch {
                expected: corpus.vocab_size(),
                actual: stack.vocab_size(),
            });
        }
        Ok(ModelFile {
            vocab: corpus.vocab.clone(),
            image_shape: corpus.image_shape,
            stack,
        })
    }

    pub fn single(corpus: &Corpus, layer: Layer) -> Result<Self> {
        Self::new(corpus, LayerStack::new(vec![layer])?)
    }

    pub fn vocab_hash(&self) -> u64 {
        vocab_hash(&self.vocab)
    }

    /// Fails unless `corpus` has exactly this model's vocabulary.
    pub fn check_corpus(&self, corpus: &Corpus) -> Result<()> {
        let (model, data) = (self.vocab_hash(), corpus.vocab_hash());
        if model != data {
            return Err(Error::VocabMismatch { model, corpus: data });
        }
        Ok(())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&self.vocab_hash().to_le_bytes())?;
        put_u32(&mut w, self.vocab.len())?;
        for word in &self.vocab {
            put_u32(&mut w, word.len())?;
            w.write_all(word.as_bytes())?;
        }
        match self.image_shape {
            Some((iw, ih, ic)) => {
                w.write_all(&[1])?;
                put_u32(&mut w, iw)?;
                put_u32(&mut w, ih)?;
                put_u32(&mut w, ic)?;
            }
            None => w.write_all(&[0])?,
        }
        put_u32(&mut w, self.stack.len())?;
        for (layer, spec) in self.stack.layers().iter().zip(self.stack.specs()) {
            w.write_all(&[match layer.kind() {
                LayerKind::Ccg => 0,
                LayerKind::Cg => 1,
            }])?;
            let g = layer.geometry();
            put_u32(&mut w, g.extents().0)?;
            put_u32(&mut w, g.extents().1)?;
            put_u32(&mut w, g.window().0)?;
            put_u32(&mut w, g.window().1)?;
            put_u32(&mut w, layer.vocab_size())?;
            match spec.smoothing {
                Some((k, s)) => {
                    w.write_all(&[1])?;
                    put_u32(&mut w, k)?;
                    w.write_all(&s.to_le_bytes())?;
                }
                None => w.write_all(&[0])?,
            }
            for v in layer.grid().pi_table() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|_| Error::Format("file too short".into()))?;
        if &magic != MAGIC {
            return Err(Error::Format("not a model file (bad magic)".into()));
        }
        let version = get_u32(&mut r)?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let stored_hash = get_u64(&mut r)?;
        let n_vocab = get_len(&mut r)?;
        let mut vocab = Vec::with_capacity(n_vocab.min(1 << 20));
        for _ in 0..n_vocab {
            let len = get_len(&mut r)?;
            let mut buf = vec![0u8; len];
            r.read_exact(&mut buf)?;
            vocab.push(String::from_utf8(buf).map_err(|_| Error::Format("vocabulary is not UTF-8".into()))?);
        }
        if vocab_hash(&vocab) != stored_hash {
            return Err(Error::Format("vocabulary hash does not match stored vocabulary".into()));
        }
        let image_shape = if get_u8(&mut r)? == 1 {
            Some((get_len(&mut r)?, get_len(&mut r)?, get_len(&mut r)?))
        } else {
            None
        };
        let n_layers = get_len(&mut r)?;
        let mut layers = Vec::with_capacity(n_layers.min(64));
        let mut smoothing = Vec::with_capacity(n_layers.min(64));
        for _ in 0..n_layers {
            let kind = match get_u8(&mut r)? {
                0 => LayerKind::Ccg,
                1 => LayerKind::Cg,
                k => return Err(Error::Format(format!("unknown layer kind {k}"))),
            };
            let extents = (get_len(&mut r)?, get_len(&mut r)?);
            let window = (get_len(&mut r)?, get_len(&mut r)?);
            let geometry = GridGeometry::new(extents, window)?;
            let z = get_len(&mut r)?;
            smoothing.push(if get_u8(&mut r)? == 1 {
                let k = get_len(&mut r)?;
                Some((k, get_f64(&mut r)?))
            } else {
                None
            });
            let n = geometry
                .cells()
                .checked_mul(z)
                .ok_or_else(|| Error::Format("layer size overflows".into()))?;
            let mut pi = Vec::with_capacity(n.min(1 << 26));
            for _ in 0..n {
                pi.push(get_f64(&mut r)?);
            }
            let grid = CountingGrid::from_pi(geometry, z, pi)?;
            layers.push(match kind {
                LayerKind::Ccg => Layer::Ccg(crate::ccg::CcgModel::new(grid)),
                LayerKind::Cg => Layer::Cg(crate::cg::CgModel::new(grid)),
            });
        }
        let stack = LayerStack::with_smoothing(layers, smoothing)?;
        if stack.vocab_size() != vocab.len() {
            return Err(Error::Format(format!(
                "bottom layer has {} words but the vocabulary has {}",
                stack.vocab_size(),
                vocab.len()
            )));
        }
        Ok(ModelFile {
            vocab,
            image_shape,
            stack,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

fn put_u32<W: Write>(w: &mut W, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Format(format!("{v} does not fit in u32")))?;
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn get_u8<R: Read>(r: &mut R) -> Result<u8> {
    let mut b = [0u8; 1];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(b[0])
}

fn get_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u32::from_le_bytes(b))
}

fn get_len<R: Read>(r: &mut R) -> Result<usize> {
    Ok(get_u32(r)? as usize)
}

fn get_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u64::from_le_bytes(b))
}

fn get_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(f64::from_le_bytes(b))
}

fn truncated(_: std::io::Error) -> Error {
    Error::Format("unexpected end of file".into())
}
