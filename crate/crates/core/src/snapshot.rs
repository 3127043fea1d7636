//! Flat little-endian binary record of a [`VectorField`].
//!
//! | offset | size | content                                   |
//! |--------|------|-------------------------------------------|
//! | 0      | 8    | magic `b"DMSFLD01"`                       |
//! | 8      | 8    | `n_samples`, u64                          |
//! | 16     | 8    | window in ps, f64                         |
//! | 24     | 8    | component count, u64, always 2            |
//! | 32     | 16 n | `u` as interleaved (re, im) f64 pairs     |
//! | 32+16n | 16 n | `v` as interleaved (re, im) f64 pairs     |
//!
//! All integers and floats are little-endian.

use std::path::Path;

use num_complex::Complex64;

use crate::error::SnapshotError;
use crate::grid::{TimeGrid, VectorField};

pub const MAGIC: [u8; 8] = *b"DMSFLD01";
pub const HEADER_LEN: usize = 32;

pub fn encode(f: &VectorField) -> Vec<u8> {
    let n = f.grid().n_samples();
    let mut out = Vec::with_capacity(HEADER_LEN + 32 * n);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&f.grid().window().to_le_bytes());
    out.extend_from_slice(&2u64.to_le_bytes());
    for z in f.u().iter().chain(f.v()) {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    out
}

fn word(bytes: &[u8], at: usize) -> [u8; 8] {
    bytes[at..at + 8].try_into().expect("8-byte slice")
}

pub fn decode(bytes: &[u8]) -> Result<VectorField, SnapshotError> {
    if bytes.len() < HEADER_LEN {
        return Err(SnapshotError::Truncated {
            got: bytes.len(),
            need: HEADER_LEN,
        });
    }
    let magic = word(bytes, 0);
    if magic != MAGIC {
        return Err(SnapshotError::BadMagic(magic));
    }
    let n = u64::from_le_bytes(word(bytes, 8));
    let window = f64::from_le_bytes(word(bytes, 16));
    let comps = u64::from_le_bytes(word(bytes, 24));
    if comps != 2 {
        return Err(SnapshotError::Components(comps));
    }
    let grid = TimeGrid::new(n as usize, window)?;
    let expected = HEADER_LEN + 32 * grid.n_samples();
    if bytes.len() != expected {
        return Err(SnapshotError::SizeMismatch {
            got: bytes.len(),
            expected,
        });
    }
    let samples: Vec<Complex64> = bytes[HEADER_LEN..]
        .chunks_exact(16)
        .map(|c| Complex64::new(f64::from_le_bytes(word(c, 0)), f64::from_le_bytes(word(c, 8))))
        .collect();
    let (u, v) = samples.split_at(grid.n_samples());
    Ok(VectorField::new(grid, u.to_vec(), v.to_vec())?)
}

pub fn write_snapshot(path: &Path, f: &VectorField) -> Result<(), SnapshotError> {
    std::fs::write(path, encode(f)).map_err(|source| SnapshotError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_snapshot(path: &Path) -> Result<VectorField, SnapshotError> {
    let bytes = std::fs::read(path).map_err(|source| SnapshotError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let g = make_grid(4, 2.5).unwrap();
        let f = VectorField::from_fn(g, |t| Complex64::new(t, 1.0), |_| Complex64::new(0.0, -2.0));
        let b = encode(&f);
        assert_eq!(b.len(), 32 + 4 * 32);
        assert_eq!(&b[..8], b"DMSFLD01");
        assert_eq!(u64::from_le_bytes(word(&b, 8)), 4);
        assert_eq!(f64::from_le_bytes(word(&b, 16)), 2.5);
        assert_eq!(u64::from_le_bytes(word(&b, 24)), 2);
        // first u sample: t = -1.25, im = 1
        assert_eq!(f64::from_le_bytes(word(&b, 32)), -1.25);
        assert_eq!(f64::from_le_bytes(word(&b, 40)), 1.0);
        // first v sample
        assert_eq!(f64::from_le_bytes(word(&b, 32 + 64 + 8)), -2.0);
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        let g = make_grid(8, 1.0).unwrap();
        let b = encode(&VectorField::zeros(g));
        assert!(matches!(decode(&b[..10]), Err(SnapshotError::Truncated { .. })));
        assert!(matches!(decode(&b[..b.len() - 1]), Err(SnapshotError::SizeMismatch { .. })));
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(matches!(decode(&bad), Err(SnapshotError::BadMagic(_))));
        let mut bad = b.clone();
        bad[24] = 3;
        assert!(matches!(decode(&bad), Err(SnapshotError::Components(3))));
        let mut bad = b;
        bad[8] = 6;
        assert!(matches!(decode(&bad), Err(SnapshotError::Header(_))));
    }

    proptest! {
        #[test]
        fn round_trip(log_n in 1u32..8, window in 0.1f64..1e3, vals in proptest::collection::vec(-1e3f64..1e3, 512)) {
            let n = 1usize << log_n;
            let g = make_grid(n, window).unwrap();
            let u = (0..n).map(|i| Complex64::new(vals[4 * i], vals[4 * i + 1])).collect();
            let v = (0..n).map(|i| Complex64::new(vals[4 * i + 2], vals[4 * i + 3])).collect();
            let f = VectorField::new(g, u, v).unwrap();
            prop_assert_eq!(decode(&encode(&f)).unwrap(), f);
        }
    }
}
