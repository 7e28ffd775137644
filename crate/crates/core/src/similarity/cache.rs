//! On-disk similarity matrix cache.
//!
//! Layout: `ZSIM`, version byte `0x01`, `n` as u64 LE, then the upper
//! triangle including the diagonal as f64 LE, row-major over `i ≤ j`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::diversity::SimilarityMatrix;
use crate::error::{Error, Result};

pub const ZSIM_MAGIC: &[u8; 4] = b"ZSIM";
pub const ZSIM_VERSION: u8 = 0x01;
const HEADER_LEN: usize = 4 + 1 + 8;

pub fn write_zsim(path: &Path, z: &SimilarityMatrix) -> Result<()> {
    let n = z.n();
    let mut out = BufWriter::new(fs::File::create(path)?);
    out.write_all(ZSIM_MAGIC)?;
    out.write_all(&[ZSIM_VERSION])?;
    out.write_all(&(n as u64).to_le_bytes())?;
    for i in 0..n {
        for &v in &z.row(i)[i..] {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_zsim(path: &Path) -> Result<SimilarityMatrix> {
    let bytes = fs::read(path)?;
    let bad = |msg: &str| Error::Integrity(format!("{}: {msg}", path.display()));
    if bytes.len() < HEADER_LEN {
        return Err(bad("file too short for ZSIM header"));
    }
    if &bytes[..4] != ZSIM_MAGIC {
        return Err(bad("bad magic bytes"));
    }
    if bytes[4] != ZSIM_VERSION {
        return Err(bad(&format!("unsupported version {}", bytes[4])));
    }
    let n = u64::from_le_bytes(bytes[5..13].try_into().expect("8 bytes"));
    let n = usize::try_from(n).map_err(|_| bad("matrix size overflows usize"))?;
    let count = n.checked_mul(n + 1).map(|v| v / 2).ok_or_else(|| bad("matrix size overflows usize"))?;
    if bytes.len() - HEADER_LEN != count * 8 {
        return Err(bad(&format!(
            "expected {} payload bytes for n={n}, found {}",
            count * 8,
            bytes.len() - HEADER_LEN
        )));
    }
    let mut entries = vec![0.0; n * n];
    let mut vals = bytes[HEADER_LEN..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    for i in 0..n {
        for j in i..n {
            let v = vals.next().expect("length checked");
            entries[i * n + j] = v;
            entries[j * n + i] = v;
        }
    }
    SimilarityMatrix::from_dense(n, entries).map_err(|e| bad(&e.to_string()))
}
