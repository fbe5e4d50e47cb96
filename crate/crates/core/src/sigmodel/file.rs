//! Dataset container file.
//!
//! Self-describing little-endian binary layout:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "SICD"
//! 4       2     version (u16, currently 1)
//! 6       2     flags (bit 0: noiseless block present)
//! 8       8     sample count n (u64)
//! 16      8     sample rate in Hz (f64)
//! 24      8     split index (u64)
//! 32      48    normalization stats (6 f64: x mean re/im, x var,
//!               residual mean re/im, residual var)
//! 80      16n   x samples, interleaved re/im f64
//! ...     16n   y samples, interleaved re/im f64
//! ...     16n   noiseless y samples (only when flag bit 0 is set)
//! ```
//!
//! A `.json` sidecar next to the file mirrors the header for quick
//! inspection without a binary reader.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::ComplexSeq;
use crate::Complex64;

use super::{Dataset, NormStats};

pub const MAGIC: &[u8; 4] = b"SICD";
pub const VERSION: u16 = 1;

const FLAG_CLEAN: u16 = 1;

#[derive(Debug, Error)]
pub enum FileError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed dataset file at byte {offset}: {what}")]
    Malformed { offset: u64, what: String },
    #[error("unsupported dataset version {found} (this build reads version {VERSION})")]
    Version { found: u16 },
    #[error("dataset contents invalid: {0}")]
    Contents(String),
}

/// Header mirror written to the JSON sidecar.
#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct SidecarHeader {
    pub magic: String,
    pub version: u16,
    pub n_samples: u64,
    pub sample_rate_hz: f64,
    pub split_index: u64,
    pub has_noiseless: bool,
    pub norm: NormStats,
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".json");
    os.into()
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], FileError> {
        if self.pos + n > self.buf.len() {
            return Err(FileError::Malformed {
                offset: self.pos as u64,
                what: format!("truncated while reading {what} ({n} bytes needed)"),
            });
        }
        let slice = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u16(&mut self, what: &str) -> Result<u16, FileError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64, FileError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64, FileError> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn complex_block(&mut self, n: usize, what: &str) -> Result<Vec<Complex64>, FileError> {
        let bytes = self.take(16 * n, what)?;
        let mut out = Vec::with_capacity(n);
        for chunk in bytes.chunks_exact(16) {
            let re = f64::from_le_bytes(chunk[..8].try_into().unwrap());
            let im = f64::from_le_bytes(chunk[8..].try_into().unwrap());
            out.push(Complex64::new(re, im));
        }
        Ok(out)
    }
}

fn push_complex_block(out: &mut Vec<u8>, samples: &[Complex64]) {
    for s in samples {
        out.extend_from_slice(&s.re.to_le_bytes());
        out.extend_from_slice(&s.im.to_le_bytes());
    }
}

/// Serialize a dataset to its binary representation.
pub fn encode_dataset(ds: &Dataset) -> Vec<u8> {
    let n = ds.len();
    let mut out = Vec::with_capacity(80 + 16 * n * if ds.y_clean.is_some() { 3 } else { 2 });
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let flags = if ds.y_clean.is_some() { FLAG_CLEAN } else { 0 };
    out.extend_from_slice(&flags.to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&ds.x.sample_rate_hz().to_le_bytes());
    out.extend_from_slice(&(ds.split_index as u64).to_le_bytes());
    for v in [
        ds.norm.x_mean[0],
        ds.norm.x_mean[1],
        ds.norm.x_var,
        ds.norm.nl_mean[0],
        ds.norm.nl_mean[1],
        ds.norm.nl_var,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    push_complex_block(&mut out, ds.x.samples());
    push_complex_block(&mut out, ds.y.samples());
    if let Some(clean) = &ds.y_clean {
        push_complex_block(&mut out, clean.samples());
    }
    out
}

/// Parse a dataset from its binary representation, with byte-offset
/// diagnostics on malformed input.
pub fn decode_dataset(buf: &[u8]) -> Result<Dataset, FileError> {
    let mut cur = Cursor { buf, pos: 0 };
    let magic = cur.take(4, "magic")?;
    if magic != MAGIC {
        return Err(FileError::Malformed {
            offset: 0,
            what: format!("bad magic {magic:02x?}, expected {MAGIC:02x?}"),
        });
    }
    let version = cur.u16("version")?;
    if version != VERSION {
        return Err(FileError::Version { found: version });
    }
    let flags = cur.u16("flags")?;
    let n = cur.u64("sample count")? as usize;
    if n == 0 {
        return Err(FileError::Malformed { offset: 8, what: "sample count is zero".into() });
    }
    let sample_rate = cur.f64("sample rate")?;
    let split_index = cur.u64("split index")? as usize;
    if split_index > n {
        return Err(FileError::Malformed {
            offset: 24,
            what: format!("split index {split_index} exceeds sample count {n}"),
        });
    }
    let norm = NormStats {
        x_mean: [cur.f64("x mean re")?, cur.f64("x mean im")?],
        x_var: cur.f64("x variance")?,
        nl_mean: [cur.f64("residual mean re")?, cur.f64("residual mean im")?],
        nl_var: cur.f64("residual variance")?,
    };
    let x = cur.complex_block(n, "x payload")?;
    let y = cur.complex_block(n, "y payload")?;
    let y_clean = if flags & FLAG_CLEAN != 0 {
        Some(cur.complex_block(n, "noiseless payload")?)
    } else {
        None
    };
    if cur.pos != buf.len() {
        return Err(FileError::Malformed {
            offset: cur.pos as u64,
            what: format!("{} trailing bytes", buf.len() - cur.pos),
        });
    }

    let mk = |v: Vec<Complex64>| {
        ComplexSeq::new(v, sample_rate).map_err(|e| FileError::Contents(e.to_string()))
    };
    Ok(Dataset {
        x: mk(x)?,
        y: mk(y)?,
        y_clean: y_clean.map(mk).transpose()?,
        split_index,
        norm,
    })
}

/// Write the dataset and its JSON sidecar.
pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<(), FileError> {
    let bytes = encode_dataset(ds);
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    let header = SidecarHeader {
        magic: "SICD".into(),
        version: VERSION,
        n_samples: ds.len() as u64,
        sample_rate_hz: ds.x.sample_rate_hz(),
        split_index: ds.split_index as u64,
        has_noiseless: ds.y_clean.is_some(),
        norm: ds.norm,
    };
    let json = serde_json::to_string_pretty(&header).expect("header serialization cannot fail");
    std::fs::write(sidecar_path(path), json)?;
    Ok(())
}

/// Read a dataset written by [`save_dataset`].
pub fn load_dataset(path: &Path) -> Result<Dataset, FileError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_dataset(&bytes)
}

#[cfg(test)]
mod tests {
    use super::super::{make_dataset, OfdmParams, PaTerm, TxChainConfig};
    use super::*;

    fn small_dataset() -> Dataset {
        let cfg = TxChainConfig {
            iq_gain_mismatch: 0.02,
            iq_phase_mismatch: 0.01,
            pa_terms: vec![
                PaTerm { p: 1, l: 0, re: 1.0, im: 0.0 },
                PaTerm { p: 3, l: 0, re: 0.05, im: -0.02 },
            ],
            si_channel: vec![[1.0, 0.0]],
            snr_db: 30.0,
            seed: 17,
            ofdm: OfdmParams { n_carriers: 64, oversample: 2, sample_rate_hz: 2e6 },
        };
        make_dataset(&cfg, 640).unwrap()
    }

    #[test]
    fn binary_round_trip_is_bitwise_exact() {
        let ds = small_dataset();
        let bytes = encode_dataset(&ds);
        let back = decode_dataset(&bytes).unwrap();
        assert_eq!(ds, back);
        // Bitwise: re-encoding yields identical bytes.
        assert_eq!(bytes, encode_dataset(&back));
    }

    #[test]
    fn file_round_trip_and_sidecar() {
        let ds = small_dataset();
        let dir = std::env::temp_dir().join(format!("sicd-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("ds.sicd");
        save_dataset(&ds, &path).unwrap();
        let back = load_dataset(&path).unwrap();
        assert_eq!(ds, back);
        let sidecar: SidecarHeader =
            serde_json::from_str(&std::fs::read_to_string(sidecar_path(&path)).unwrap()).unwrap();
        assert_eq!(sidecar.n_samples, 640);
        assert_eq!(sidecar.split_index, 576);
        assert!(sidecar.has_noiseless);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn truncated_file_reports_offset() {
        let ds = small_dataset();
        let mut bytes = encode_dataset(&ds);
        bytes.truncate(bytes.len() - 7);
        match decode_dataset(&bytes) {
            Err(FileError::Malformed { offset, what }) => {
                assert!(offset > 0);
                assert!(what.contains("truncated"), "unexpected message: {what}");
            }
            other => panic!("expected malformed error, got {other:?}"),
        }
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let ds = small_dataset();
        let mut bytes = encode_dataset(&ds);
        bytes[4] = 0x63; // version 99
        bytes[5] = 0x00;
        match decode_dataset(&bytes) {
            Err(FileError::Version { found: 99 }) => {}
            other => panic!("expected version error, got {other:?}"),
        }
    }

    #[test]
    fn bad_magic_is_rejected() {
        let mut bytes = encode_dataset(&small_dataset());
        bytes[0] = b'X';
        assert!(matches!(decode_dataset(&bytes), Err(FileError::Malformed { offset: 0, .. })));
    }
}
