//! Binary container for value fields.
//!
//! Layout: the 8-byte magic `AGNOFLD1`, a little-endian `u64` header length,
//! a JSON header, then the `S` and `U` arrays as little-endian `f64` in
//! `(t, ζ₂, ζ₁, q)` row-major order. The header carries a SHA-256 of the
//! payload.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{SolveReport, SolverGrid, ValueField};
use crate::bayes::DiscretePrior;
use crate::error::{ControlError, Result};

const MAGIC: &[u8; 8] = b"AGNOFLD1";
pub const SCHEME_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    scheme_version: u32,
    axis_order: [String; 4],
    grid: SolverGrid,
    prior: DiscretePrior,
    report: SolveReport,
    values_per_array: usize,
    checksum: String,
}

fn payload(field: &ValueField) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(16 * field.values().len());
    for x in field.values().iter().chain(field.controls()) {
        bytes.extend_from_slice(&x.to_le_bytes());
    }
    bytes
}

pub fn write_field<W: Write>(field: &ValueField, mut w: W) -> Result<()> {
    let body = payload(field);
    let header = Header {
        scheme_version: SCHEME_VERSION,
        axis_order: ["t", "zeta2", "zeta1", "q"].map(String::from),
        grid: *field.grid(),
        prior: field.prior().clone(),
        report: field.report().clone(),
        values_per_array: field.values().len(),
        checksum: hex::encode(Sha256::digest(&body)),
    };
    let text = serde_json::to_vec(&header).map_err(|e| ControlError::Internal(e.to_string()))?;
    w.write_all(MAGIC)?;
    w.write_all(&(text.len() as u64).to_le_bytes())?;
    w.write_all(&text)?;
    w.write_all(&body)?;
    w.flush()?;
    Ok(())
}

pub fn read_field<R: Read>(mut r: R) -> Result<ValueField> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(ControlError::Corrupt("bad magic".into()));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len) as usize;
    if len > 1 << 24 {
        return Err(ControlError::Corrupt(format!("implausible header length {len}")));
    }
    let mut text = vec![0u8; len];
    r.read_exact(&mut text)?;
    let header: Header =
        serde_json::from_slice(&text).map_err(|e| ControlError::Corrupt(format!("header: {e}")))?;
    if header.scheme_version != SCHEME_VERSION {
        return Err(ControlError::Corrupt(format!(
            "scheme version {} not supported",
            header.scheme_version
        )));
    }
    let n = header.values_per_array;
    if n != header.grid.nodes_per_slice() * header.grid.t.len {
        return Err(ControlError::Corrupt("array length does not match grid".into()));
    }
    let mut body = vec![0u8; 16 * n];
    r.read_exact(&mut body)?;
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(ControlError::Corrupt("trailing bytes after payload".into()));
    }
    if hex::encode(Sha256::digest(&body)) != header.checksum {
        return Err(ControlError::Corrupt("checksum mismatch".into()));
    }
    let mut values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
    let s: Vec<f64> = values.by_ref().take(n).collect();
    let u: Vec<f64> = values.collect();
    ValueField::from_parts(header.grid, header.prior, s, u, header.report)
}

pub fn save_field(field: &ValueField, path: &Path) -> Result<()> {
    write_field(field, BufWriter::new(File::create(path)?))
}

pub fn load_field(path: &Path) -> Result<ValueField> {
    read_field(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayes::Atom;
    use crate::bellman::{solve_bellman, SolverGrid};

    fn field() -> ValueField {
        let prior = DiscretePrior::new(vec![Atom { a: -0.5, p: 0.25 }, Atom { a: 1.0, p: 0.75 }], 1.0).unwrap();
        let g = SolverGrid::with_cfl(3.0, 31, 4.0, 11, 4.0, 6, 0.3, 4, 1.0, 3.0).unwrap();
        solve_bellman(&prior, &g).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let f = field();
        let mut buf = Vec::new();
        write_field(&f, &mut buf).unwrap();
        let back = read_field(buf.as_slice()).unwrap();
        assert_eq!(back.grid(), f.grid());
        assert_eq!(back.prior(), f.prior());
        assert_eq!(back.report(), f.report());
        let bits = |xs: &[f64]| xs.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(back.values()), bits(f.values()));
        assert_eq!(bits(back.controls()), bits(f.controls()));
        let mut again = Vec::new();
        write_field(&back, &mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn corruption_is_detected() {
        let f = field();
        let mut buf = Vec::new();
        write_field(&f, &mut buf).unwrap();
        let last = buf.len() - 3;
        buf[last] ^= 0x40;
        assert!(matches!(read_field(buf.as_slice()), Err(ControlError::Corrupt(_))));
        let mut short = Vec::new();
        write_field(&f, &mut short).unwrap();
        short.truncate(short.len() - 8);
        assert!(read_field(short.as_slice()).is_err());
        assert!(matches!(read_field(&b"NOTAFILE........"[..]), Err(ControlError::Corrupt(_))));
    }
}
