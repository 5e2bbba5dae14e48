//! The `RZF1` binary field format.
//!
//! Layout, all little-endian: the 4 magic bytes `RZF1`, `u32` dimension,
//! `u32` samples per axis, `f64` half-width, then `n^d` `f64` values in the
//! grid's row-major order.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec};

pub const MAGIC: &[u8; 4] = b"RZF1";

pub fn write_field<W: Write>(mut w: W, f: &Field) -> Result<()> {
    let spec = f.spec();
    w.write_all(MAGIC)?;
    w.write_all(&(spec.d as u32).to_le_bytes())?;
    w.write_all(&(spec.n as u32).to_le_bytes())?;
    w.write_all(&spec.r.to_le_bytes())?;
    for v in f.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_field<R: Read>(mut r: R) -> Result<Field> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| Error::Format("truncated header".into()))?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b4).map_err(|_| Error::Format("truncated header".into()))?;
    let d = u32::from_le_bytes(b4) as usize;
    r.read_exact(&mut b4).map_err(|_| Error::Format("truncated header".into()))?;
    let n = u32::from_le_bytes(b4) as usize;
    r.read_exact(&mut b8).map_err(|_| Error::Format("truncated header".into()))?;
    let half_width = f64::from_le_bytes(b8);
    let spec = GridSpec::new(d, n, half_width)?;
    let mut values = Vec::with_capacity(spec.len());
    for k in 0..spec.len() {
        r.read_exact(&mut b8)
            .map_err(|_| Error::Format(format!("truncated payload at value {k} of {}", spec.len())))?;
        values.push(f64::from_le_bytes(b8));
    }
    if r.read(&mut b8)? != 0 {
        return Err(Error::Format("trailing bytes after payload".into()));
    }
    Field::new(spec, values)
}

pub fn to_bytes(f: &Field) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + 8 * f.values().len());
    write_field(&mut out, f).expect("writing to a Vec cannot fail");
    out
}

pub fn from_bytes(bytes: &[u8]) -> Result<Field> {
    read_field(bytes)
}

pub fn save(path: impl AsRef<Path>, f: &Field) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_bytes(f))
        .map_err(|source| Error::Path { path: path.display().to_string(), source })
}

pub fn load(path: impl AsRef<Path>) -> Result<Field> {
    let path = path.as_ref();
    let bytes =
        fs::read(path).map_err(|source| Error::Path { path: path.display().to_string(), source })?;
    from_bytes(&bytes)
}

/// CSV rendering: one row per grid point with columns `i0..,x0..,value`.
pub fn write_csv<W: Write>(w: W, f: &Field) -> Result<()> {
    let spec = f.spec();
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<String> = (0..spec.d).map(|a| format!("i{a}")).collect();
    header.extend((0..spec.d).map(|a| format!("x{a}")));
    header.push("value".into());
    out.write_record(&header)?;
    let mut idx = vec![0; spec.d];
    for (k, v) in f.values().iter().enumerate() {
        spec.multi_index(k, &mut idx);
        let mut row: Vec<String> = idx.iter().map(|i| i.to_string()).collect();
        row.extend(idx.iter().map(|&i| spec.coord(i).to_string()));
        row.push(v.to_string());
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Inverse of [`write_csv`]. The grid is recovered from the index columns and
/// the coordinate of index 0, which is `-R`.
pub fn read_csv<R: Read>(r: R) -> Result<Field> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    if headers.len() < 3 || headers.len() % 2 == 0 {
        return Err(Error::Format(format!("unexpected CSV header {headers:?}")));
    }
    let d = (headers.len() - 1) / 2;
    let mut rows: Vec<(Vec<usize>, f64)> = Vec::new();
    let mut half_width = None;
    let parse_err = |e: &dyn std::fmt::Display| Error::Format(format!("bad CSV value: {e}"));
    for rec in rdr.records() {
        let rec = rec?;
        let idx = (0..d)
            .map(|a| rec[a].parse::<usize>().map_err(|e| parse_err(&e)))
            .collect::<Result<Vec<_>>>()?;
        if idx.iter().all(|&i| i == 0) {
            let x0: f64 = rec[d].parse().map_err(|e| parse_err(&e))?;
            half_width = Some(-x0);
        }
        let v: f64 = rec[2 * d].parse().map_err(|e| parse_err(&e))?;
        rows.push((idx, v));
    }
    let n = rows.iter().flat_map(|(i, _)| i.iter().copied()).max().map_or(0, |m| m + 1);
    let half_width = half_width.ok_or_else(|| Error::Format("missing the row for index 0".into()))?;
    let spec = GridSpec::new(d, n, half_width)?;
    if rows.len() != spec.len() {
        return Err(Error::LengthMismatch { expected: spec.len(), got: rows.len() });
    }
    let mut values = vec![0.0; spec.len()];
    for (idx, v) in rows {
        values[spec.flat_index(&idx)] = v;
    }
    Field::new(spec, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::sample;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let g = GridSpec::new(2, 4, 1.25).unwrap();
        let bytes = to_bytes(&Field::constant(g, 0.5));
        assert_eq!(&bytes[..4], b"RZF1");
        assert_eq!(&bytes[4..8], &2u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &4u32.to_le_bytes());
        assert_eq!(&bytes[12..20], &1.25f64.to_le_bytes());
        assert_eq!(bytes.len(), 20 + 16 * 8);
    }

    #[test]
    fn rejects_corrupt_input() {
        let g = GridSpec::new(1, 4, 1.0).unwrap();
        let bytes = to_bytes(&Field::constant(g, 1.0));
        assert!(from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(from_bytes(&bad).is_err());
        let mut long = bytes.clone();
        long.push(0);
        assert!(from_bytes(&long).is_err());
    }

    #[test]
    fn save_then_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.rzf");
        let g = GridSpec::new(3, 4, 2.0).unwrap();
        let f = sample(g, |x| x[0] - 2.0 * x[2]).unwrap();
        save(&path, &f).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), to_bytes(&f));
        assert_eq!(load(&path).unwrap().values(), f.values());
    }

    #[test]
    fn missing_file_names_path() {
        let err = load("/nonexistent/missing.rzf").unwrap_err();
        assert!(err.to_string().contains("missing.rzf"));
    }

    proptest! {
        #[test]
        fn binary_and_csv_roundtrip_bit_exact(
            d in 1usize..=2,
            half_n in 2usize..=5,
            r in 0.1f64..10.0,
            a in -1e3f64..1e3,
            b in -5.0f64..5.0,
        ) {
            let g = GridSpec::new(d, 2 * half_n, r).unwrap();
            let f = sample(g, |x| a * (b * x[0]).sin() + x.iter().sum::<f64>() / 3.0).unwrap();
            let back = from_bytes(&to_bytes(&f)).unwrap();
            prop_assert_eq!(to_bytes(&back), to_bytes(&f));
            let mut buf = Vec::new();
            write_csv(&mut buf, &f).unwrap();
            let back = read_csv(buf.as_slice()).unwrap();
            prop_assert_eq!(to_bytes(&back), to_bytes(&f));
        }
    }
}
