//! Field ensemble persistence: a small binary container and a CSV view.
//!
//! Binary layout (little endian): `b"CVFE"`, version `u32`, `n_nodes u64`,
//! `n_s u64`, `mean f64`, `sigma2 f64`, `nu f64`, `corr_len f64`, `seed u64`,
//! then `n_s` realization indices (`u64`) and the realization-major payload.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::matern::MaternParams;
use super::sampling::FieldEnsemble;
use crate::error::{Error, Result};
use crate::textfmt::float;

const MAGIC: &[u8; 4] = b"CVFE";
const VERSION: u32 = 1;

pub fn write_field_binary(ens: &FieldEnsemble, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    let mut buf = Vec::with_capacity(64 + 8 * ens.nodal_values.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(ens.n_nodes as u64).to_le_bytes());
    buf.extend_from_slice(&(ens.n_s() as u64).to_le_bytes());
    for v in [ens.mean, ens.params.sigma2, ens.params.nu, ens.params.corr_len] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf.extend_from_slice(&ens.seed.to_le_bytes());
    for &r in &ens.realizations {
        buf.extend_from_slice(&(r as u64).to_le_bytes());
    }
    for v in &ens.nodal_values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf).map_err(io)?;
    w.flush().map_err(io)
}

pub fn read_field_binary(path: impl AsRef<Path>) -> Result<FieldEnsemble> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?)
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    let bad = |m: &str| Error::format(path, 0, m);
    if bytes.len() < 64 || &bytes[..4] != MAGIC {
        return Err(bad("not a field ensemble file"));
    }
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(bad(&format!("unsupported field file version {version}")));
    }
    let n = u64_at(8) as usize;
    let n_s = u64_at(16) as usize;
    let params = MaternParams {
        sigma2: f64_at(32),
        nu: f64_at(40),
        corr_len: f64_at(48),
    };
    let header = 64;
    let expected = header + 8 * n_s + 8 * n * n_s;
    if bytes.len() != expected {
        return Err(bad(&format!("expected {expected} bytes, found {}", bytes.len())));
    }
    let realizations = (0..n_s).map(|r| u64_at(header + 8 * r) as usize).collect();
    let start = header + 8 * n_s;
    let nodal_values = (0..n * n_s).map(|k| f64_at(start + 8 * k)).collect();
    Ok(FieldEnsemble {
        n_nodes: n,
        mean: f64_at(24),
        params,
        seed: u64_at(56),
        realizations,
        nodal_values,
    })
}

/// One row per node, one column per realization.
pub fn write_field_csv(ens: &FieldEnsemble, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    let mut line = String::from("node");
    for r in &ens.realizations {
        line.push_str(&format!(",r{r}"));
    }
    writeln!(w, "{line}").map_err(io)?;
    for i in 0..ens.n_nodes {
        line.clear();
        line.push_str(&i.to_string());
        for r in 0..ens.n_s() {
            line.push(',');
            line.push_str(&float(ens.nodal_values[r * ens.n_nodes + i]));
        }
        writeln!(w, "{line}").map_err(io)?;
    }
    w.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> FieldEnsemble {
        FieldEnsemble {
            n_nodes: 3,
            mean: 7.0e6,
            params: MaternParams::new(4.9e11, 1.0, 3.7).unwrap(),
            seed: 11,
            realizations: vec![2, 3],
            nodal_values: vec![1.0, 0.1 + 0.2, -3.5e6, 2.5e-300, 7.0e6, 1.0 / 3.0],
        }
    }

    #[test]
    fn binary_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.bin");
        write_field_binary(&sample(), &p).unwrap();
        assert_eq!(read_field_binary(&p).unwrap(), sample());
    }

    #[test]
    fn truncated_file_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.bin");
        write_field_binary(&sample(), &p).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        std::fs::write(&p, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(read_field_binary(&p), Err(Error::Format { .. })));
        std::fs::write(&p, b"nope").unwrap();
        assert!(read_field_binary(&p).is_err());
    }

    #[test]
    fn csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        write_field_csv(&sample(), &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "node,r2,r3");
        assert_eq!(lines[1], "0,1,2.5e-300");
        assert_eq!(lines.len(), 4);
    }
}
