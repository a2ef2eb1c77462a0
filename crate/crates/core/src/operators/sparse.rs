use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{check_len, Result};
use crate::pointcloud::NeighborList;

/// Compressed sparse row storage. The sparsity pattern is shared between
/// matrices built on the same neighbor graph.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    offsets: Arc<Vec<usize>>,
    indices: Arc<Vec<u32>>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Square matrix on the neighbor graph with `value(i, j, d2)` at every
    /// stored pair.
    pub fn from_neighbors(
        neighbors: &NeighborList,
        value: impl Fn(usize, usize, f64) -> f64 + Sync,
    ) -> Self {
        let offsets = neighbors.offsets().to_vec();
        let indices = neighbors.indices().to_vec();
        let dist2 = neighbors.dist2();
        let values = (0..neighbors.len())
            .into_par_iter()
            .flat_map_iter(|i| {
                (offsets[i]..offsets[i + 1]).map(move |k| (i, k))
            })
            .map(|(i, k)| value(i, indices[k] as usize, dist2[k]))
            .collect();
        let n = neighbors.len();
        Self {
            nrows: n,
            ncols: n,
            offsets: Arc::new(offsets),
            indices: Arc::new(indices),
            values,
        }
    }

    /// Builds from per-row `(column, value)` lists; columns must be sorted
    /// within each row.
    pub fn from_rows(ncols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut offsets = Vec::with_capacity(rows.len() + 1);
        offsets.push(0);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for row in &rows {
            for &(j, v) in row {
                debug_assert!(j < ncols);
                indices.push(j as u32);
                values.push(v);
            }
            offsets.push(indices.len());
        }
        Self {
            nrows: rows.len(),
            ncols,
            offsets: Arc::new(offsets),
            indices: Arc::new(indices),
            values,
        }
    }

    /// Same pattern, new values computed from `(row, col, old value)`.
    pub fn map_entries(&self, f: impl Fn(usize, usize, f64) -> f64 + Sync) -> Self {
        let values = (0..self.nrows)
            .into_par_iter()
            .flat_map_iter(|i| (self.offsets[i]..self.offsets[i + 1]).map(move |k| (i, k)))
            .map(|(i, k)| f(i, self.indices[k] as usize, self.values[k]))
            .collect();
        Self {
            values,
            ..self.shallow_pattern()
        }
    }

    fn shallow_pattern(&self) -> Self {
        Self {
            nrows: self.nrows,
            ncols: self.ncols,
            offsets: Arc::clone(&self.offsets),
            indices: Arc::clone(&self.indices),
            values: Vec::new(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.offsets[i]..self.offsets[i + 1];
        self.indices[span.clone()]
            .iter()
            .zip(&self.values[span])
            .map(|(&j, &v)| (j as usize, v))
    }

    /// All stored entries as `(row, col, value)`.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    /// Stored value at `(i, j)`, zero if absent.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let span = self.offsets[i]..self.offsets[i + 1];
        match self.indices[span.clone()].binary_search(&(j as u32)) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.nrows)
            .into_par_iter()
            .map(|i| self.row(i).map(|(_, v)| v).sum())
            .collect()
    }

    /// `y = A x`.
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols, "matvec input length");
        assert_eq!(y.len(), self.nrows, "matvec output length");
        y.par_iter_mut().enumerate().with_min_len(256).for_each(|(i, yi)| {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        });
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `v^T A u`.
    pub fn bilinear(&self, v: &[f64], u: &[f64]) -> Result<f64> {
        check_len("bilinear left vector", self.nrows, v.len())?;
        check_len("bilinear right vector", self.ncols, u.len())?;
        Ok(self.mul_vec(u).iter().zip(v).map(|(a, b)| a * b).sum())
    }

    /// Block with the given rows and columns, in the given orders.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut position = vec![u32::MAX; self.ncols];
        for (k, &c) in cols.iter().enumerate() {
            position[c] = k as u32;
        }
        let sorted_cols = cols.windows(2).all(|w| w[0] < w[1]);
        let out: Vec<Vec<(usize, f64)>> = rows
            .par_iter()
            .map(|&i| {
                let mut row: Vec<(usize, f64)> = self
                    .row(i)
                    .filter_map(|(j, v)| {
                        let p = position[j];
                        (p != u32::MAX).then_some((p as usize, v))
                    })
                    .collect();
                if !sorted_cols {
                    row.sort_unstable_by_key(|&(j, _)| j);
                }
                row
            })
            .collect();
        Self::from_rows(cols.len(), out)
    }

    /// `A + diag(d)` on a square matrix whose pattern contains the diagonal.
    pub fn add_diagonal(&self, d: &[f64]) -> Self {
        assert_eq!(d.len(), self.nrows);
        self.map_entries(|i, j, v| if i == j { v + d[i] } else { v })
    }

    /// `a A + b B` for two matrices on the same pattern.
    pub fn linear_combination(&self, a: f64, other: &CsrMatrix, b: f64) -> Self {
        assert!(Arc::ptr_eq(&self.offsets, &other.offsets) || self.offsets == other.offsets);
        assert!(Arc::ptr_eq(&self.indices, &other.indices) || self.indices == other.indices);
        let values = self
            .values
            .par_iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Self {
            values,
            ..self.shallow_pattern()
        }
    }

    /// Largest `|A_ij - A_ji|` over stored entries.
    pub fn max_asymmetry(&self) -> f64 {
        (0..self.nrows)
            .into_par_iter()
            .map(|i| {
                self.row(i)
                    .map(|(j, v)| if j < self.nrows { (v - self.get(j, i)).abs() } else { v.abs() })
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Dense row-major copy, for small oracle tests.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, j, v) in self.triplets() {
            d[i][j] = v;
        }
        d
    }

    /// Coordinate text format: a `rows cols nnz` header line, then one
    /// `row col value` line per stored entry, zero-based.
    pub fn write_coo<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for (i, j, v) in self.triplets() {
            writeln!(out, "{i} {j} {v:e}")?;
        }
        Ok(())
    }
}

/// Parses the coordinate format written by [`CsrMatrix::write_coo`].
pub fn read_coo<R: std::io::BufRead>(input: R) -> Result<CsrMatrix> {
    use crate::error::Error;
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty matrix file".into()))??;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad header {header:?}"))))
        .collect::<Result<_>>()?;
    let [nrows, ncols, nnz] = dims[..] else {
        return Err(Error::Parse(format!("bad header {header:?}")));
    };
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nrows];
    let mut count = 0;
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let mut field = || parts.next().ok_or_else(|| Error::Parse(format!("short line {line:?}")));
        let i: usize = field()?.parse().map_err(|_| Error::Parse(format!("bad row in {line:?}")))?;
        let j: usize = field()?.parse().map_err(|_| Error::Parse(format!("bad column in {line:?}")))?;
        let v: f64 = field()?.parse().map_err(|_| Error::Parse(format!("bad value in {line:?}")))?;
        if i >= nrows || j >= ncols {
            return Err(Error::Parse(format!("entry ({i}, {j}) outside {nrows}x{ncols}")));
        }
        rows[i].push((j, v));
        count += 1;
    }
    if count != nnz {
        return Err(Error::Parse(format!("header promises {nnz} entries, found {count}")));
    }
    for row in &mut rows {
        row.sort_unstable_by_key(|&(j, _)| j);
    }
    Ok(CsrMatrix::from_rows(ncols, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> CsrMatrix {
        CsrMatrix::from_rows(
            3,
            vec![vec![(0, 2.0), (1, -1.0)], vec![(0, -1.0), (1, 2.0), (2, -1.0)], vec![(1, -1.0), (2, 2.0)]],
        )
    }

    #[test]
    fn matvec_and_sums() {
        let a = small();
        assert_eq!(a.mul_vec(&[1.0, 1.0, 1.0]), vec![1.0, 0.0, 1.0]);
        assert_eq!(a.row_sums(), vec![1.0, 0.0, 1.0]);
        assert_eq!(a.diagonal(), vec![2.0, 2.0, 2.0]);
        assert_eq!(a.get(0, 2), 0.0);
        assert_eq!(a.max_asymmetry(), 0.0);
        assert_eq!(a.bilinear(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]).unwrap(), -1.0);
    }

    #[test]
    fn submatrix_blocks() {
        let a = small();
        let b = a.submatrix(&[2, 0], &[0, 2]);
        assert_eq!(b.to_dense(), vec![vec![0.0, 2.0], vec![2.0, 0.0]]);
        let c = a.submatrix(&[1], &[2, 0]);
        assert_eq!(c.to_dense(), vec![vec![-1.0, -1.0]]);
    }

    #[test]
    fn coo_round_trip() {
        let a = small();
        let mut buf = Vec::new();
        a.write_coo(&mut buf).unwrap();
        let b = read_coo(&buf[..]).unwrap();
        assert_eq!(a.to_dense(), b.to_dense());
        assert!(read_coo(&b"2 2 1\n0 5 1.0\n"[..]).is_err());
    }

    #[test]
    fn combinations() {
        let a = small();
        let d = a.add_diagonal(&[1.0, 1.0, 1.0]);
        assert_eq!(d.diagonal(), vec![3.0; 3]);
        let e = a.linear_combination(2.0, &d, -1.0);
        assert_eq!(e.diagonal(), vec![1.0; 3]);
        assert_eq!(e.get(0, 1), -1.0);
    }
}
