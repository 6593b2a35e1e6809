//! Little-endian framed container shared by sketches, baselines and dataset
//! caches. Every artifact starts with a 4-byte magic tag and a `u16` version.

use crate::core::{LshSharing, SketchConfig, StorageMode};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u16 = 1;

/// Encoded size of a [`SketchConfig`] block.
pub const CONFIG_BLOCK_LEN: usize = 5 * 4 + 1 + 8 + 1 + 1;

#[derive(Debug, Default)]
pub struct ByteWriter {
    buf: Vec<u8>,
}

impl ByteWriter {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            buf: Vec::with_capacity(n),
        }
    }

    pub fn header(&mut self, magic: &[u8; 4]) {
        self.buf.extend_from_slice(magic);
        self.u16(FORMAT_VERSION);
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f32(&mut self, v: f32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn config(&mut self, cfg: &SketchConfig) {
        self.u32(cfg.k);
        self.u32(cfg.rows);
        self.u32(cfg.cols);
        self.u32(cfg.reps);
        self.u32(cfg.range);
        self.u8(cfg.counter_bits);
        self.u64(cfg.master_seed);
        self.u8(storage_tag(cfg.storage_mode));
        self.u8(match cfg.lsh_sharing {
            LshSharing::PerRowRep => 0,
            LshSharing::PerCell => 1,
        });
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub(crate) fn storage_tag(mode: StorageMode) -> u8 {
    match mode {
        StorageMode::Array => 0,
        StorageMode::Map => 1,
    }
}

pub struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    /// Checks the magic tag and format version.
    pub fn header(&mut self, magic: &[u8; 4]) -> Result<()> {
        let got = self.take(4)?;
        if got != magic {
            return Err(Error::corrupt(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(got),
                String::from_utf8_lossy(magic)
            )));
        }
        let version = self.u16()?;
        if version != FORMAT_VERSION {
            return Err(Error::corrupt(format!("unsupported version {version}")));
        }
        Ok(())
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|e| *e <= self.buf.len())
            .ok_or_else(|| Error::corrupt(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn config(&mut self) -> Result<SketchConfig> {
        let k = self.u32()?;
        let rows = self.u32()?;
        let cols = self.u32()?;
        let reps = self.u32()?;
        let range = self.u32()?;
        let counter_bits = self.u8()?;
        let master_seed = self.u64()?;
        let storage_mode = match self.u8()? {
            0 => StorageMode::Array,
            1 => StorageMode::Map,
            t => return Err(Error::corrupt(format!("unknown storage mode {t}"))),
        };
        let lsh_sharing = match self.u8()? {
            0 => LshSharing::PerRowRep,
            1 => LshSharing::PerCell,
            t => return Err(Error::corrupt(format!("unknown lsh sharing {t}"))),
        };
        Ok(SketchConfig {
            k,
            rows,
            cols,
            reps,
            range,
            counter_bits,
            master_seed,
            storage_mode,
            lsh_sharing,
        })
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    /// Errors unless every byte was consumed.
    pub fn finish(self) -> Result<()> {
        if self.remaining() != 0 {
            return Err(Error::corrupt(format!(
                "{} trailing bytes",
                self.remaining()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_config() -> impl Strategy<Value = SketchConfig> {
        (
            (1u32..=u32::MAX, 1u32..=u32::MAX, 1u32..=u32::MAX, 1u32..=u32::MAX, 2u32..=u32::MAX),
            prop::sample::select(vec![8u8, 16, 32]),
            any::<u64>(),
            any::<bool>(),
            any::<bool>(),
        )
            .prop_map(|((k, rows, cols, reps, range), bits, seed, map, per_cell)| SketchConfig {
                k,
                rows,
                cols,
                reps,
                range,
                counter_bits: bits,
                master_seed: seed,
                storage_mode: if map { StorageMode::Map } else { StorageMode::Array },
                lsh_sharing: if per_cell { LshSharing::PerCell } else { LshSharing::PerRowRep },
            })
    }

    proptest! {
        #[test]
        fn config_round_trip(cfg in arb_config()) {
            let mut w = ByteWriter::default();
            w.config(&cfg);
            let bytes = w.finish();
            prop_assert_eq!(bytes.len(), CONFIG_BLOCK_LEN);
            let mut r = ByteReader::new(&bytes);
            prop_assert_eq!(r.config().unwrap(), cfg);
            r.finish().unwrap();
        }
    }

    #[test]
    fn truncation_and_magic_are_detected() {
        let mut w = ByteWriter::default();
        w.header(b"RACE");
        let bytes = w.finish();
        assert!(ByteReader::new(&bytes).header(b"RPRJ").is_err());
        assert!(ByteReader::new(&bytes[..5]).header(b"RACE").is_err());
        let mut r = ByteReader::new(&bytes);
        r.header(b"RACE").unwrap();
        assert!(matches!(r.u8(), Err(Error::CorruptSketch(_))));
    }
}
