//! Artifact formats: MBF1 field dumps, `;`-separated CSV, 16-bit PGM and
//! the run manifest.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::hex;
use crate::error::{Error, Result};
use crate::synth::FieldSample;

pub const MAGIC: &[u8; 4] = b"MBF1";

/// Header of an MBF1 file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MbfHeader {
    pub resolution: Vec<usize>,
    pub replicates: usize,
    pub seed: u64,
}

impl MbfHeader {
    pub fn lattice_len(&self) -> usize {
        self.resolution.iter().product()
    }
}

fn u32_of(x: usize, what: &str) -> Result<u32> {
    u32::try_from(x).map_err(|_| Error::Format(format!("{what} {x} does not fit in u32")))
}

/// Write replicates in order; all must share one lattice and seed.
pub fn write_mbf<W: Write>(mut w: W, samples: &[FieldSample]) -> Result<()> {
    let first = samples.first().ok_or_else(|| Error::Format("no samples to write".into()))?;
    let grid = &first.grid;
    if samples.iter().any(|s| s.grid != *grid || s.seed != first.seed) {
        return Err(Error::Format("samples differ in lattice or seed".into()));
    }
    w.write_all(MAGIC)?;
    w.write_all(&u32_of(grid.dim(), "dimension")?.to_le_bytes())?;
    for &r in &grid.resolution {
        w.write_all(&u32_of(r, "resolution")?.to_le_bytes())?;
    }
    w.write_all(&u32_of(samples.len(), "replicate count")?.to_le_bytes())?;
    w.write_all(&first.seed.to_le_bytes())?;
    let mut buf = Vec::with_capacity(grid.len() * 8);
    for s in samples {
        buf.clear();
        for v in &s.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

/// Read a whole MBF1 stream: header and one value vector per replicate.
pub fn read_mbf<R: Read>(mut r: R) -> Result<(MbfHeader, Vec<Vec<f64>>)> {
    let mut word = [0u8; 4];
    r.read_exact(&mut word)?;
    if &word != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let mut u32_next = |r: &mut R| -> Result<usize> {
        r.read_exact(&mut word)?;
        Ok(u32::from_le_bytes(word) as usize)
    };
    let n = u32_next(&mut r)?;
    if !(1..=3).contains(&n) {
        return Err(Error::Format(format!("dimension {n}")));
    }
    let resolution = (0..n).map(|_| u32_next(&mut r)).collect::<Result<Vec<_>>>()?;
    let replicates = u32_next(&mut r)?;
    let mut long = [0u8; 8];
    r.read_exact(&mut long)?;
    let header = MbfHeader { resolution, replicates, seed: u64::from_le_bytes(long) };
    let len = header.lattice_len();
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != replicates * len * 8 {
        return Err(Error::Format(format!(
            "payload has {} bytes, header announces {}",
            bytes.len(),
            replicates * len * 8
        )));
    }
    let values = bytes
        .chunks_exact(len * 8)
        .map(|rep| rep.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
        .collect();
    Ok((header, values))
}

pub fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().delimiter(b';').from_writer(w)
}

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// Binary 16-bit greyscale PGM of `values` (row-major, `width` per row),
/// mapping `[lo, hi]` linearly onto `0..=65535`. NaN maps to 0.
pub fn write_pgm<W: Write>(mut w: W, width: usize, height: usize, values: &[f64], lo: f64, hi: f64) -> Result<()> {
    if values.len() != width * height || width == 0 || height == 0 {
        return Err(Error::Format(format!("{} values for a {width}x{height} image", values.len())));
    }
    if !(lo < hi) {
        return Err(Error::Format(format!("empty intensity range [{lo}, {hi}]")));
    }
    write!(w, "P5\n{width} {height}\n65535\n")?;
    let mut buf = Vec::with_capacity(values.len() * 2);
    for &v in values {
        let level = if v.is_nan() { 0.0 } else { ((v - lo) / (hi - lo)).clamp(0.0, 1.0) * 65535.0 };
        buf.extend_from_slice(&(level.round() as u16).to_be_bytes());
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFile {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub code_version: String,
    pub config_hash: String,
    pub table_checksums: Vec<String>,
    pub seed: u64,
    pub replicates: usize,
    pub model_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jitter: Option<f64>,
    pub files: Vec<ManifestFile>,
    /// Command-specific summary.
    #[serde(default)]
    pub summary: serde_json::Value,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(hex(&Sha256::digest(std::fs::read(path)?)))
}
