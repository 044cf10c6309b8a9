//! The portable field format PWF v1 and a CSV import for one spatial
//! dimension.
//!
//! A PWF field is two files:
//!
//! * a UTF-8 JSON manifest with the keys
//!   `{version: 1, n, p, shape, spacing, origin, data_file}`, where `shape`,
//!   `spacing` and `origin` list the `n + 1` axes in the order
//!   `x_1, .., x_n, t`;
//! * a raw binary data file (named by `data_file`, relative to the manifest)
//!   holding one IEEE-754 binary64 little-endian value per cell, row-major
//!   with the time axis last (time index varies fastest).
//!
//! Writing is deterministic: identical fields produce identical bytes.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Grid, ScalarField};

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    version: u32,
    n: usize,
    p: f64,
    shape: Vec<usize>,
    spacing: Vec<f64>,
    origin: Vec<f64>,
    data_file: String,
}

/// Writes `field` as a PWF v1 manifest at `path` plus a sibling data file
/// (same stem, `.bin` extension).
pub fn write_pwf(path: &Path, field: &ScalarField) -> Result<()> {
    write_pwf_raw(path, field.grid(), field.values())
}

/// Raw variant accepting any cell values, including the NaN markers that
/// flag uncovered cells of a maximal-operator output.  Such files only load
/// back as weights through the clamp option.
pub fn write_pwf_raw(path: &Path, grid: &Grid, values: &[f64]) -> Result<()> {
    if values.len() != grid.cell_count() {
        return Err(Error::bad_param("value count does not match the grid"));
    }
    let data_name = data_file_name(path)?;
    let manifest = Manifest {
        version: 1,
        n: grid.n(),
        p: grid.p,
        shape: grid.shape().to_vec(),
        spacing: grid.spacing().to_vec(),
        origin: grid.origin().to_vec(),
        data_file: data_name.clone(),
    };
    let mut json = serde_json::to_vec_pretty(&manifest)?;
    json.push(b'\n');
    fs::write(path, json)?;

    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let mut data_path = path.to_path_buf();
    data_path.set_file_name(&data_name);
    let mut f = fs::File::create(data_path)?;
    f.write_all(&bytes)?;
    Ok(())
}

/// Reads a PWF v1 field.  `clamp_eps`, when given, lifts nonpositive values
/// to `eps` for weight use; without it values are loaded as stored.
pub fn read_pwf(path: &Path, clamp_eps: Option<f64>) -> Result<ScalarField> {
    let manifest: Manifest = serde_json::from_slice(&fs::read(path)?)?;
    if manifest.version != 1 {
        return Err(Error::bad_param(format!(
            "unsupported PWF version {}",
            manifest.version
        )));
    }
    if manifest.shape.len() != manifest.n + 1 {
        return Err(Error::bad_param("PWF shape must list n + 1 axes"));
    }
    let grid = Grid::new(manifest.shape, manifest.spacing, manifest.origin, manifest.p)?;
    let mut data_path = path.to_path_buf();
    data_path.set_file_name(&manifest.data_file);
    let mut bytes = Vec::new();
    fs::File::open(&data_path)?.read_to_end(&mut bytes)?;
    let expect = grid.cell_count() * 8;
    if bytes.len() != expect {
        return Err(Error::bad_param(format!(
            "data file holds {} bytes, expected {expect}",
            bytes.len()
        )));
    }
    let mut values = Vec::with_capacity(grid.cell_count());
    for chunk in bytes.chunks_exact(8) {
        values.push(f64::from_le_bytes(chunk.try_into().expect("chunk of 8")));
    }
    if let Some(eps) = clamp_eps {
        if !(eps > 0.0) {
            return Err(Error::bad_param("clamp epsilon must be positive"));
        }
        values = values.into_iter().map(|v| v.max(eps)).collect();
    }
    ScalarField::new(grid, values)
}

fn data_file_name(path: &Path) -> Result<String> {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::bad_param("manifest path needs a file name"))?;
    Ok(format!("{stem}.bin"))
}

/// CSV import for `n = 1`: rows `x_index,t_index,value` (with that header),
/// one row per cell of the supplied grid.
pub fn read_csv_1d(path: &Path, grid: Grid) -> Result<ScalarField> {
    if grid.n() != 1 {
        return Err(Error::bad_param("CSV import supports one spatial dimension"));
    }
    #[derive(Deserialize)]
    struct Row {
        x_index: usize,
        t_index: usize,
        value: f64,
    }
    let mut rdr = csv::Reader::from_path(path)?;
    let mut values = vec![f64::NAN; grid.cell_count()];
    let mut seen = vec![false; grid.cell_count()];
    for row in rdr.deserialize() {
        let row: Row = row?;
        if row.x_index >= grid.shape()[0] || row.t_index >= grid.shape()[1] {
            return Err(Error::bad_param(format!(
                "cell index ({}, {}) outside the grid",
                row.x_index, row.t_index
            )));
        }
        let flat = grid.flat_index(&[row.x_index, row.t_index]);
        if seen[flat] {
            return Err(Error::bad_param(format!(
                "duplicate cell ({}, {})",
                row.x_index, row.t_index
            )));
        }
        seen[flat] = true;
        values[flat] = row.value;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        let idx = grid.multi_index(missing);
        return Err(Error::bad_param(format!(
            "missing cell ({}, {})",
            idx[0], idx[1]
        )));
    }
    ScalarField::new(grid, values)
}

/// Writes the 1-d CSV layout accepted by [`read_csv_1d`].
pub fn write_csv_1d(path: &Path, field: &ScalarField) -> Result<()> {
    if field.grid().n() != 1 {
        return Err(Error::bad_param("CSV export supports one spatial dimension"));
    }
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(["x_index", "t_index", "value"])?;
    let (nx, nt) = (field.grid().shape()[0], field.grid().shape()[1]);
    for x in 0..nx {
        for t in 0..nt {
            let v = field.value(field.grid().flat_index(&[x, t]));
            wtr.write_record([x.to_string(), t.to_string(), format!("{v:?}")])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// File stem helper for derived outputs (`foo.pwf` -> `foo_u.pwf` etc).
pub fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("field");
    let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("pwf");
    path.with_file_name(format!("{stem}{suffix}.{ext}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn field() -> ScalarField {
        let g = Grid::new(vec![3, 4], vec![0.5, 0.25], vec![-1.0, 2.0], 2.0).unwrap();
        let values: Vec<f64> = (0..12).map(|i| (i as f64) * 0.125 + 0.25).collect();
        ScalarField::new(g, values).unwrap()
    }

    #[test]
    fn pwf_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("w.pwf");
        let f = field();
        write_pwf(&path, &f).unwrap();
        let back = read_pwf(&path, None).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn pwf_round_trip_two_spatial_dims() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("w2.pwf");
        let g = Grid::new(
            vec![3, 2, 5],
            vec![0.5, 0.75, 0.25],
            vec![-1.0, 0.0, 2.0],
            2.0,
        )
        .unwrap();
        let f = ScalarField::from_fn(g, |z| 1.0 + z[0] * z[0] + 0.5 * z[1] - z[2]).unwrap();
        write_pwf(&path, &f).unwrap();
        assert_eq!(read_pwf(&path, None).unwrap(), f);
    }

    #[test]
    fn pwf_writes_identical_bytes() {
        let dir = tempdir().unwrap();
        let a = dir.path().join("a.pwf");
        let b = dir.path().join("b.pwf");
        write_pwf(&a, &field()).unwrap();
        write_pwf(&b, &field()).unwrap();
        let bytes_a = std::fs::read(dir.path().join("a.bin")).unwrap();
        let bytes_b = std::fs::read(dir.path().join("b.bin")).unwrap();
        assert_eq!(bytes_a, bytes_b);
    }

    #[test]
    fn corrupt_manifest_is_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.pwf");
        std::fs::write(&path, b"{not json").unwrap();
        assert!(read_pwf(&path, None).is_err());
    }

    #[test]
    fn truncated_data_is_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("w.pwf");
        write_pwf(&path, &field()).unwrap();
        std::fs::write(dir.path().join("w.bin"), [0u8; 24]).unwrap();
        assert!(read_pwf(&path, None).is_err());
    }

    #[test]
    fn clamp_lifts_nonpositive_values() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("w.pwf");
        let g = Grid::new(vec![2, 2], vec![1.0, 1.0], vec![0.0, 0.0], 2.0).unwrap();
        let f = ScalarField::new(g, vec![0.0, -1.0, 2.0, 3.0]).unwrap();
        write_pwf(&path, &f).unwrap();
        let clamped = read_pwf(&path, Some(1e-6)).unwrap();
        clamped.ensure_positive().unwrap();
        assert_eq!(clamped.value(2), 2.0);
    }

    #[test]
    fn csv_round_trip_and_validation() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("w.csv");
        let f = field();
        write_csv_1d(&path, &f).unwrap();
        let back = read_csv_1d(&path, f.grid().clone()).unwrap();
        assert_eq!(back, f);

        std::fs::write(&path, "x_index,t_index,value\n0,0,1.0\n").unwrap();
        assert!(read_csv_1d(&path, f.grid().clone()).is_err());
    }
}
