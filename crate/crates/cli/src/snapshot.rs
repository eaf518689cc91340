//! Bit-exact binary snapshots of scalar grid fields.
//!
//! Layout, all little-endian: magic "SQG1" (4 bytes), u32 version = 1,
//! u32 d, u32 N, f64 alpha, f64 time, then N^d f64 grid values in
//! row-major order with x1 fastest. A d = 2, N = 8 file is exactly
//! 4 + 4 + 4 + 4 + 8 + 8 + 64 * 8 = 544 bytes.

use std::io::Cursor;
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use sqg_core::grid::GridField;
use sqg_core::TorusGrid;

use crate::{write_atomic, CliError, Result};

pub const MAGIC: [u8; 4] = *b"SQG1";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotMeta {
    pub d: usize,
    pub n: usize,
    pub alpha: f64,
    pub time: f64,
}

pub fn encode_snapshot(field: &GridField, alpha: f64, time: f64) -> Vec<u8> {
    let g = field.grid();
    let mut out = Vec::with_capacity(32 + field.values().len() * 8);
    out.extend_from_slice(&MAGIC);
    out.write_u32::<LittleEndian>(VERSION).unwrap();
    out.write_u32::<LittleEndian>(g.dim() as u32).unwrap();
    out.write_u32::<LittleEndian>(g.n() as u32).unwrap();
    out.write_f64::<LittleEndian>(alpha).unwrap();
    out.write_f64::<LittleEndian>(time).unwrap();
    for &v in field.values() {
        out.write_f64::<LittleEndian>(v).unwrap();
    }
    out
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<(GridField, SnapshotMeta)> {
    if bytes.len() < 4 || bytes[..4] != MAGIC {
        return Err(CliError::Format("bad magic".into()));
    }
    let mut cur = Cursor::new(&bytes[4..]);
    let trunc = |_| CliError::Format("truncated header".into());
    let version = cur.read_u32::<LittleEndian>().map_err(trunc)?;
    if version != VERSION {
        return Err(CliError::Format(format!(
            "unsupported version {version}, expected {VERSION}"
        )));
    }
    let d = cur.read_u32::<LittleEndian>().map_err(trunc)? as usize;
    let n = cur.read_u32::<LittleEndian>().map_err(trunc)? as usize;
    let alpha = cur.read_f64::<LittleEndian>().map_err(trunc)?;
    let time = cur.read_f64::<LittleEndian>().map_err(trunc)?;
    let grid = TorusGrid::new(d, n)
        .map_err(|e| CliError::Format(format!("invalid snapshot geometry: {e}")))?;
    let count = grid.len();
    let expect = 32 + count * 8;
    if bytes.len() < expect {
        return Err(CliError::Format(format!(
            "truncated: {} bytes, need {expect} for d={d}, N={n}",
            bytes.len()
        )));
    }
    if bytes.len() > expect {
        return Err(CliError::Format(format!(
            "trailing garbage: {} bytes, expected {expect}",
            bytes.len()
        )));
    }
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        values.push(cur.read_f64::<LittleEndian>().map_err(trunc)?);
    }
    let field = GridField::from_values(grid, values)
        .map_err(|e| CliError::Format(format!("invalid snapshot values: {e}")))?;
    Ok((field, SnapshotMeta { d, n, alpha, time }))
}

pub fn write_snapshot(path: &Path, field: &GridField, alpha: f64, time: f64) -> Result<()> {
    write_atomic(path, &encode_snapshot(field, alpha, time))
}

pub fn read_snapshot(path: &Path) -> Result<(GridField, SnapshotMeta)> {
    let bytes = std::fs::read(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode_snapshot(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize) -> GridField {
        let g = TorusGrid::new(2, n).unwrap();
        GridField::from_fn(g, |x| (x[0].cos() + 0.3 * (2.0 * x[1]).sin()) * 1.7)
    }

    #[test]
    fn round_trip_is_bitwise_identical() {
        let f = sample(16);
        let bytes = encode_snapshot(&f, 0.9, 2.5);
        let (g, meta) = decode_snapshot(&bytes).unwrap();
        assert_eq!(meta, SnapshotMeta { d: 2, n: 16, alpha: 0.9, time: 2.5 });
        for (a, b) in f.values().iter().zip(g.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn header_arithmetic_fixes_the_file_size() {
        let f = sample(8);
        assert_eq!(encode_snapshot(&f, 0.9, 0.0).len(), 544);
    }

    #[test]
    fn corrupt_magic_is_rejected() {
        let mut bytes = encode_snapshot(&sample(8), 0.9, 0.0);
        bytes[0] = b'X';
        let err = decode_snapshot(&bytes).unwrap_err();
        assert!(err.to_string().contains("bad magic"), "{err}");
    }

    #[test]
    fn version_and_length_mismatches_are_rejected() {
        let good = encode_snapshot(&sample(8), 0.9, 0.0);

        let mut v2 = good.clone();
        v2[4] = 2;
        assert!(decode_snapshot(&v2).unwrap_err().to_string().contains("version"));

        let short = &good[..good.len() - 8];
        assert!(decode_snapshot(short).unwrap_err().to_string().contains("truncated"));

        let mut long = good.clone();
        long.push(0);
        assert!(decode_snapshot(&long).unwrap_err().to_string().contains("trailing"));
    }

    #[test]
    fn file_round_trip_through_atomic_writes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("state.sqg");
        let f = sample(16);
        write_snapshot(&p, &f, 1.1, 0.25).unwrap();
        let (g, meta) = read_snapshot(&p).unwrap();
        assert_eq!(meta.alpha, 1.1);
        assert_eq!(meta.time, 0.25);
        assert_eq!(f.values(), g.values());
    }
}
