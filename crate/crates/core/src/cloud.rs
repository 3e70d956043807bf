//! Point sets and the standard point distributions used by the benchmarks.

use std::f64::consts::PI;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{NncaError, Result};

/// Target points `P` (rows, indexed by `I`) and source points `Q` (columns,
/// indexed by `J`) in `R^d`, stored as flat coordinate arrays.
///
/// When the cloud is shared, `P` and `Q` are the same set and only one copy
/// of the coordinates is kept.
#[derive(Debug, Clone)]
pub struct PointCloud {
    dim: usize,
    targets: Vec<f64>,
    sources: Option<Vec<f64>>,
}

impl PointCloud {
    /// A cloud where targets and sources are the same points.
    pub fn shared(dim: usize, points: Vec<f64>) -> Result<Self> {
        check_coords(dim, &points)?;
        Ok(Self {
            dim,
            targets: points,
            sources: None,
        })
    }

    /// A cloud with distinct target and source sets.
    pub fn new(dim: usize, targets: Vec<f64>, sources: Vec<f64>) -> Result<Self> {
        check_coords(dim, &targets)?;
        check_coords(dim, &sources)?;
        Ok(Self {
            dim,
            targets,
            sources: Some(sources),
        })
    }

    /// Builds a shared cloud from a list of rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(Vec::len).ok_or(NncaError::EmptyPointSet)?;
        let mut flat = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(NncaError::DimensionMismatch {
                    expected: dim,
                    actual: row.len(),
                });
            }
            flat.extend_from_slice(row);
        }
        Self::shared(dim, flat)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_shared(&self) -> bool {
        self.sources.is_none()
    }

    pub fn num_targets(&self) -> usize {
        self.targets.len() / self.dim
    }

    pub fn num_sources(&self) -> usize {
        self.source_coords().len() / self.dim
    }

    #[inline]
    pub fn target(&self, i: usize) -> &[f64] {
        &self.targets[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn source(&self, j: usize) -> &[f64] {
        let d = self.dim;
        &self.source_coords()[j * d..(j + 1) * d]
    }

    pub fn target_coords(&self) -> &[f64] {
        &self.targets
    }

    pub fn source_coords(&self) -> &[f64] {
        self.sources.as_deref().unwrap_or(&self.targets)
    }

    /// Smallest axis-aligned bounding box of `P ∪ Q` as per-axis `(min, max)`.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        let mut b = vec![(f64::INFINITY, f64::NEG_INFINITY); self.dim];
        for coords in [self.target_coords(), self.source_coords()] {
            for p in coords.chunks_exact(self.dim) {
                for (axis, &x) in p.iter().enumerate() {
                    b[axis].0 = b[axis].0.min(x);
                    b[axis].1 = b[axis].1.max(x);
                }
            }
        }
        b
    }
}

fn check_coords(dim: usize, coords: &[f64]) -> Result<()> {
    if dim == 0 {
        return Err(NncaError::InvalidParameter("dimension must be positive".into()));
    }
    if coords.is_empty() {
        return Err(NncaError::EmptyPointSet);
    }
    if coords.len() % dim != 0 {
        return Err(NncaError::DimensionMismatch {
            expected: dim,
            actual: coords.len() % dim,
        });
    }
    if let Some(x) = coords.iter().find(|x| !x.is_finite()) {
        return Err(NncaError::NonFinite(format!("point coordinate {x}")));
    }
    Ok(())
}

/// `n` points drawn uniformly at random from `[-1, 1]^dim`.
pub fn uniform_random(n: usize, dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n * dim).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Cell-centred uniform grid with `per_axis` points per axis in `[-1, 1]^dim`,
/// ordered lexicographically with the last axis fastest.
pub fn uniform_grid(per_axis: usize, dim: usize) -> Vec<f64> {
    let h = 2.0 / per_axis as f64;
    let axis: Vec<f64> = (0..per_axis).map(|k| -1.0 + (k as f64 + 0.5) * h).collect();
    tensor_grid(&axis, dim)
}

/// Chebyshev nodes of the first kind on `[-1, 1]`.
pub fn chebyshev_nodes(n: usize) -> Vec<f64> {
    (1..=n)
        .map(|k| ((2 * k - 1) as f64 * PI / (2 * n) as f64).cos())
        .collect()
}

/// `n` points of the tensor-product Chebyshev grid of `[-1, 1]^dim`.
///
/// The grid uses the smallest per-axis count whose tensor product holds at
/// least `n` nodes; when that product exceeds `n` a seeded random subset of
/// exactly `n` nodes is kept.
pub fn chebyshev_grid(n: usize, dim: usize, seed: u64) -> Vec<f64> {
    if n == 0 {
        return Vec::new();
    }
    let mut per_axis = (n as f64).powf(1.0 / dim as f64).round().max(1.0) as usize;
    while per_axis.pow(dim as u32) < n {
        per_axis += 1;
    }
    while per_axis > 1 && (per_axis - 1).pow(dim as u32) >= n {
        per_axis -= 1;
    }
    let full = tensor_grid(&chebyshev_nodes(per_axis), dim);
    let total = full.len() / dim;
    if total == n {
        return full;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep: Vec<usize> = (0..total).collect();
    keep.shuffle(&mut rng);
    keep.truncate(n);
    keep.sort_unstable();
    keep.iter()
        .flat_map(|&i| full[i * dim..(i + 1) * dim].iter().copied())
        .collect()
}

fn tensor_grid(axis: &[f64], dim: usize) -> Vec<f64> {
    let m = axis.len();
    let total = m.pow(dim as u32);
    let mut out = Vec::with_capacity(total * dim);
    for mut flat in 0..total {
        let start = out.len();
        out.resize(start + dim, 0.0);
        for a in (0..dim).rev() {
            out[start + a] = axis[flat % m];
            flat /= m;
        }
    }
    out
}

/// Rows read from a point CSV file.
#[derive(Debug, Clone)]
pub struct CsvPoints {
    pub dim: usize,
    pub coords: Vec<f64>,
    /// Trailing label column, present when `with_label` was requested.
    pub labels: Option<Vec<f64>>,
}

/// Reads one point per row. With `with_label`, the last column is returned
/// separately as a label and the remaining columns are coordinates. A
/// non-numeric first row is treated as a header and skipped.
pub fn read_points_csv(path: impl AsRef<Path>, with_label: bool) -> Result<CsvPoints> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)?;
    let mut dim = None;
    let mut coords = Vec::new();
    let mut labels = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let values: std::result::Result<Vec<f64>, _> =
            record.iter().map(str::parse::<f64>).collect();
        let mut values = match values {
            Ok(v) => v,
            Err(_) if line == 0 => continue,
            Err(e) => return Err(NncaError::Parse(format!("row {}: {e}", line + 1))),
        };
        if with_label {
            let label = values
                .pop()
                .ok_or_else(|| NncaError::Parse(format!("row {} is empty", line + 1)))?;
            labels.push(label);
        }
        match dim {
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(NncaError::DimensionMismatch {
                    expected: d,
                    actual: values.len(),
                })
            }
            _ => {}
        }
        coords.extend(values);
    }
    let dim = dim.filter(|&d| d > 0).ok_or(NncaError::EmptyPointSet)?;
    Ok(CsvPoints {
        dim,
        coords,
        labels: with_label.then_some(labels),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shared_cloud_reports_same_sets() {
        let c = PointCloud::shared(2, vec![0.0, 0.0, 1.0, 2.0]).unwrap();
        assert!(c.is_shared());
        assert_eq!(c.num_targets(), 2);
        assert_eq!(c.num_sources(), 2);
        assert_eq!(c.source(1), &[1.0, 2.0]);
    }

    #[test]
    fn rejects_empty_and_ragged_input() {
        assert!(matches!(
            PointCloud::shared(2, vec![]),
            Err(NncaError::EmptyPointSet)
        ));
        assert!(PointCloud::shared(2, vec![1.0, 2.0, 3.0]).is_err());
        assert!(PointCloud::from_rows(&[vec![0.0, 1.0], vec![2.0]]).is_err());
    }

    #[test]
    fn chebyshev_grid_has_requested_size_and_stays_in_box() {
        for (n, d) in [(1024, 2), (1000, 3), (1500, 2)] {
            let pts = chebyshev_grid(n, d, 3);
            assert_eq!(pts.len(), n * d);
            assert!(pts.iter().all(|x| x.abs() < 1.0));
        }
    }

    #[test]
    fn uniform_grid_is_cell_centred() {
        let g = uniform_grid(2, 2);
        assert_eq!(g, vec![-0.5, -0.5, -0.5, 0.5, 0.5, -0.5, 0.5, 0.5]);
    }

    #[test]
    fn csv_with_header_and_labels() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pts.csv");
        std::fs::write(&path, "x,y,label\n0.5,1.0,1\n-0.25,0.0,-1\n").unwrap();
        let pts = read_points_csv(&path, true).unwrap();
        assert_eq!(pts.dim, 2);
        assert_eq!(pts.coords, vec![0.5, 1.0, -0.25, 0.0]);
        assert_eq!(pts.labels.unwrap(), vec![1.0, -1.0]);
        let unlabeled = read_points_csv(&path, false).unwrap();
        assert_eq!(unlabeled.dim, 3);
    }
}
