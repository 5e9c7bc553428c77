//! Flat binary checkpoints.
//!
//! Layout: the 7 magic bytes `FBRLNN1`, then `input_dim`, `hidden_dim`,
//! `output_dim` as little-endian `u64`, then the `input_dim` input scales and
//! every parameter in `[W1, b1, W2, b2]` order (weights row-major), all as
//! little-endian `f64`. Optimizer state is not stored.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::Mlp;
use crate::{Error, Result};

pub const MAGIC: &[u8; 7] = b"FBRLNN1";

impl Mlp {
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        for dim in [self.input_dim(), self.hidden_dim(), self.output_dim()] {
            w.write_all(&(dim as u64).to_le_bytes())?;
        }
        for p in self.input_scale().iter().chain(self.params()) {
            w.write_all(&p.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 7];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint("bad magic bytes".into()));
        }
        let mut word = [0u8; 8];
        let mut dims = [0usize; 3];
        for d in dims.iter_mut() {
            r.read_exact(&mut word)?;
            let v = u64::from_le_bytes(word);
            if v == 0 || v > 1 << 24 {
                return Err(Error::Checkpoint(format!("implausible dimension {v}")));
            }
            *d = v as usize;
        }
        let [i, h, o] = dims;
        let n = h * i + h + o * h + o;
        let mut values = Vec::with_capacity(i + n);
        for _ in 0..i + n {
            r.read_exact(&mut word)?;
            values.push(f64::from_le_bytes(word));
        }
        let params = values.split_off(i);
        if r.read(&mut word)? != 0 {
            return Err(Error::Checkpoint("trailing bytes after parameters".into()));
        }
        Mlp::from_params(i, h, o, params)
            .and_then(|net| net.with_input_scale(values))
            .map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}
