//! Diagnostics records as NDJSON and field snapshots as raw little-endian
//! floats with a text sidecar.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::diagnostics::DiagnosticsRecord;
use crate::error::{Result, ScnsError};
use crate::grid::{Bc, BoundarySpec, Grid, ScalarField, VectorField};

fn check_finite(rec: &DiagnosticsRecord) -> Result<()> {
    let v = serde_json::to_value(rec).map_err(|e| ScnsError::Io(e.to_string()))?;
    if let serde_json::Value::Object(map) = v {
        for (k, x) in map {
            if x.is_null() {
                return Err(ScnsError::NonFinite(format!("record field {k} at t={}", rec.t)));
            }
        }
    }
    Ok(())
}

/// One JSON object per line. Non-finite values are rejected.
pub fn write_records<W: Write>(mut sink: W, records: &[DiagnosticsRecord]) -> Result<()> {
    for r in records {
        check_finite(r)?;
        let line = serde_json::to_string(r).map_err(|e| ScnsError::Io(e.to_string()))?;
        sink.write_all(line.as_bytes())?;
        sink.write_all(b"\n")?;
    }
    sink.flush()?;
    Ok(())
}

pub fn read_records<R: BufRead>(source: R) -> Result<Vec<DiagnosticsRecord>> {
    let mut out = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r = serde_json::from_str(&line).map_err(|e| ScnsError::SchemaMismatch(format!("record line {}: {e}", i + 1)))?;
        out.push(r);
    }
    Ok(out)
}

pub fn write_records_file(path: &Path, records: &[DiagnosticsRecord]) -> Result<()> {
    let f = fs::File::create(path)?;
    write_records(std::io::BufWriter::new(f), records)
}

pub fn read_records_file(path: &Path) -> Result<Vec<DiagnosticsRecord>> {
    let f = fs::File::open(path)?;
    read_records(std::io::BufReader::new(f))
}

/// A field read back from disk.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub variable: String,
    pub t: f64,
    pub grid: Grid,
    /// One entry per component; scalars have exactly one.
    pub components: Vec<ScalarField>,
}

impl Snapshot {
    pub fn scalar(&self) -> Result<ScalarField> {
        match self.components.as_slice() {
            [f] => Ok(f.clone()),
            _ => Err(ScnsError::SchemaMismatch(format!(
                "{} has {} components, expected a scalar",
                self.variable,
                self.components.len()
            ))),
        }
    }

    pub fn vector(&self) -> Result<VectorField> {
        VectorField::from_components(self.components.clone())
    }
}

fn sidecar(path: &Path) -> PathBuf {
    path.with_extension("meta")
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Writes `path` (raw `f64` LE, axis-0-major, components back to back) and
/// `path.meta`.
pub fn write_snapshot(path: &Path, variable: &str, t: f64, components: &[&ScalarField]) -> Result<()> {
    let first = components.first().ok_or_else(|| ScnsError::SchemaMismatch("snapshot without components".into()))?;
    let grid = *first.grid();
    let mut bytes = Vec::with_capacity(8 * grid.len() * components.len());
    for c in components {
        first.same_grid(c)?;
        if !c.is_finite() {
            return Err(ScnsError::NonFinite(format!("snapshot {variable}")));
        }
        for v in c.values() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&bytes);
    let mut hex = String::with_capacity(64);
    for b in digest {
        let _ = write!(hex, "{b:02x}");
    }
    let bc = grid.bc();
    let meta = format!(
        "variable = {variable}\nt = {t:?}\ndim = {}\nextents = {}\nresolution = {}\nbc.n = {}\nbc.c = {}\nbc.u = {}\ncomponents = {}\nsha256 = {hex}\n",
        grid.dim(),
        join(grid.extents()),
        join(grid.resolution()),
        bc.n.name(),
        bc.c.name(),
        bc.u.name(),
        components.len(),
    );
    fs::write(path, &bytes)?;
    fs::write(sidecar(path), meta)?;
    Ok(())
}

pub fn write_state(dir: &Path, stem: &str, state: &crate::stepper::State) -> Result<()> {
    write_snapshot(&dir.join(format!("{stem}_n.bin")), "n", state.t, &[&state.n])?;
    write_snapshot(&dir.join(format!("{stem}_c.bin")), "c", state.t, &[&state.c])?;
    let u: Vec<&ScalarField> = state.u.components().iter().collect();
    write_snapshot(&dir.join(format!("{stem}_u.bin")), "u", state.t, &u)
}

fn meta_get<'a>(meta: &'a [(String, String)], key: &str) -> Result<&'a str> {
    meta.iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
        .ok_or_else(|| ScnsError::SchemaMismatch(format!("sidecar lacks {key}")))
}

fn parse_list<T: std::str::FromStr>(s: &str, key: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|x| x.trim().parse().map_err(|_| ScnsError::SchemaMismatch(format!("bad {key} entry {x:?}"))))
        .collect()
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let text = fs::read_to_string(sidecar(path))?;
    let meta: Vec<(String, String)> = text
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect();
    let bytes = fs::read(path)?;
    let digest = Sha256::digest(&bytes);
    let mut hex = String::with_capacity(64);
    for b in digest {
        let _ = write!(hex, "{b:02x}");
    }
    if hex != meta_get(&meta, "sha256")? {
        return Err(ScnsError::ChecksumMismatch(path.display().to_string()));
    }
    let dim: usize = parse_list(meta_get(&meta, "dim")?, "dim")?[0];
    let extents: Vec<f64> = parse_list(meta_get(&meta, "extents")?, "extents")?;
    let resolution: Vec<usize> = parse_list(meta_get(&meta, "resolution")?, "resolution")?;
    let bc_of = |k: &str| -> Result<Bc> {
        let v = meta_get(&meta, k)?;
        Bc::parse(v).ok_or_else(|| ScnsError::SchemaMismatch(format!("bad {k} {v:?}")))
    };
    let bc = BoundarySpec {
        n: bc_of("bc.n")?,
        c: bc_of("bc.c")?,
        u: bc_of("bc.u")?,
    };
    let grid = Grid::build(dim, &extents, &resolution, bc)?;
    let count: usize = parse_list(meta_get(&meta, "components")?, "components")?[0];
    if bytes.len() != 8 * grid.len() * count {
        return Err(ScnsError::ChecksumMismatch(format!("{}: length {}", path.display(), bytes.len())));
    }
    let t: f64 = parse_list(meta_get(&meta, "t")?, "t")?[0];
    let mut components = Vec::with_capacity(count);
    for chunk in bytes.chunks_exact(8 * grid.len()) {
        let vals = chunk.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes"))).collect();
        components.push(ScalarField::from_values(&grid, vals)?);
    }
    Ok(Snapshot {
        variable: meta_get(&meta, "variable")?.to_string(),
        t,
        grid,
        components,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_roundtrip_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::build(2, &[1.0, 1.0], &[8, 8], BoundarySpec::walled()).unwrap();
        let f = ScalarField::from_fn(&g, |x| (x[0] * 7.1).sin() / 3.0 + x[1]);
        let p = dir.path().join("f.bin");
        write_snapshot(&p, "c", 0.25, &[&f]).unwrap();
        let s = read_snapshot(&p).unwrap();
        assert_eq!(s.scalar().unwrap().values(), f.values());
        assert_eq!(s.grid, g);
        let bytes = fs::read(&p).unwrap();
        fs::write(&p, &bytes[..bytes.len() - 8]).unwrap();
        assert!(matches!(read_snapshot(&p), Err(ScnsError::ChecksumMismatch(_))));
    }
}
