use std::collections::HashMap;

use rayon::prelude::*;

use super::{squared_distance, PointCloud};
use crate::error::{Error, Result};

/// Kernel weights below this value are dropped from every sparse operator.
pub const KERNEL_TRUNCATION: f64 = 1e-10;

/// Cutoff radius at which `exp(-r^2 / eps^2)` falls to [`KERNEL_TRUNCATION`].
pub fn default_cutoff(eps: f64) -> f64 {
    eps * (1.0 / KERNEL_TRUNCATION).ln().sqrt()
}

/// Exact fixed-radius neighbor lists in compressed-row form.
///
/// Row `i` holds every `j` with `|x_i - x_j|^2 <= r_cut^2`, sorted by index,
/// including `i` itself.
#[derive(Debug, Clone)]
pub struct NeighborList {
    offsets: Vec<usize>,
    indices: Vec<u32>,
    dist2: Vec<f64>,
    cutoff: f64,
}

impl NeighborList {
    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    /// Total number of stored pairs (self pairs included).
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    #[inline]
    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.indices[self.offsets[i]..self.offsets[i + 1]]
    }

    #[inline]
    pub fn distances_squared(&self, i: usize) -> &[f64] {
        &self.dist2[self.offsets[i]..self.offsets[i + 1]]
    }

    /// `(j, d^2)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.neighbors(i)
            .iter()
            .zip(self.distances_squared(i))
            .map(|(&j, &d2)| (j as usize, d2))
    }

    pub(crate) fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub(crate) fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub(crate) fn dist2(&self) -> &[f64] {
        &self.dist2
    }
}

/// Uniform hash grid over the ambient space.
pub(crate) struct CellGrid<'a> {
    cloud: &'a PointCloud,
    cell: f64,
    cells: HashMap<Vec<i64>, Vec<u32>>,
}

impl<'a> CellGrid<'a> {
    pub(crate) fn new(cloud: &'a PointCloud, cell: f64) -> Self {
        let mut cells: HashMap<Vec<i64>, Vec<u32>> = HashMap::new();
        for (i, p) in cloud.points().enumerate() {
            cells.entry(cell_key(p, cell)).or_default().push(i as u32);
        }
        Self { cloud, cell, cells }
    }

    /// Grid over the points listed in `subset` only; visits still report
    /// indices into the full cloud.
    pub(crate) fn over_subset(cloud: &'a PointCloud, subset: &[usize], cell: f64) -> Self {
        let mut cells: HashMap<Vec<i64>, Vec<u32>> = HashMap::new();
        for &i in subset {
            cells.entry(cell_key(cloud.point(i), cell)).or_default().push(i as u32);
        }
        Self { cloud, cell, cells }
    }

    /// Nearest indexed point to `query`, or `None` if the grid is empty.
    /// Ties go to the smaller index.
    pub(crate) fn nearest(&self, query: &[f64]) -> Option<(usize, f64)> {
        if self.cells.is_empty() {
            return None;
        }
        let mut radius = self.cell;
        loop {
            let mut best: Option<(usize, f64)> = None;
            self.for_each_within(query, radius, |j, d2| match best {
                Some((k, b)) if d2 > b || (d2 == b && j > k) => {}
                _ => best = Some((j, d2)),
            });
            if best.is_some() {
                return best;
            }
            radius *= 2.0;
        }
    }

    /// Calls `visit(j, d^2)` for every point within `radius` of `query`.
    pub(crate) fn for_each_within(&self, query: &[f64], radius: f64, mut visit: impl FnMut(usize, f64)) {
        let r2 = radius * radius;
        let lo: Vec<i64> = query.iter().map(|&q| ((q - radius) / self.cell).floor() as i64).collect();
        let hi: Vec<i64> = query.iter().map(|&q| ((q + radius) / self.cell).floor() as i64).collect();
        let span: f64 = lo.iter().zip(&hi).map(|(l, h)| (h - l + 1) as f64).product();

        let mut scan = |members: &Vec<u32>| {
            for &j in members {
                let d2 = squared_distance(query, self.cloud.point(j as usize));
                if d2 <= r2 {
                    visit(j as usize, d2);
                }
            }
        };

        if span > self.cells.len() as f64 {
            for (key, members) in &self.cells {
                if key.iter().zip(lo.iter().zip(&hi)).all(|(k, (l, h))| k >= l && k <= h) {
                    scan(members);
                }
            }
            return;
        }

        let mut key = lo.clone();
        loop {
            if let Some(members) = self.cells.get(&key) {
                scan(members);
            }
            // odometer increment over the box of cells
            let mut d = 0;
            loop {
                if d == key.len() {
                    return;
                }
                key[d] += 1;
                if key[d] <= hi[d] {
                    break;
                }
                key[d] = lo[d];
                d += 1;
            }
        }
    }
}

fn cell_key(p: &[f64], cell: f64) -> Vec<i64> {
    p.iter().map(|&c| (c / cell).floor() as i64).collect()
}

/// Exact fixed-radius neighbor search, accelerated by a cell grid with cell
/// width `r_cut`.
pub fn build_neighbors(cloud: &PointCloud, r_cut: f64) -> Result<NeighborList> {
    if !(r_cut > 0.0 && r_cut.is_finite()) {
        return Err(Error::config(format!("neighbor cutoff must be positive, got {r_cut}")));
    }
    let grid = CellGrid::new(cloud, r_cut);
    let rows: Vec<Vec<(u32, f64)>> = (0..cloud.len())
        .into_par_iter()
        .map(|i| {
            let mut row = Vec::new();
            grid.for_each_within(cloud.point(i), r_cut, |j, d2| row.push((j as u32, d2)));
            row.sort_unstable_by_key(|&(j, _)| j);
            row
        })
        .collect();

    let mut offsets = Vec::with_capacity(rows.len() + 1);
    offsets.push(0);
    let total: usize = rows.iter().map(Vec::len).sum();
    let mut indices = Vec::with_capacity(total);
    let mut dist2 = Vec::with_capacity(total);
    for row in rows {
        for (j, d2) in row {
            indices.push(j);
            dist2.push(d2);
        }
        offsets.push(indices.len());
    }
    Ok(NeighborList {
        offsets,
        indices,
        dist2,
        cutoff: r_cut,
    })
}

/// Mean over points of the distance to the nearest distinct point.
///
/// Coincident points are skipped when looking for the nearest neighbor. A
/// point whose only partners are duplicates does not contribute.
pub fn mean_spacing(cloud: &PointCloud) -> Result<f64> {
    let n = cloud.len();
    let extent = cloud.extent();
    if extent == 0.0 {
        return Err(Error::Degenerate("all points coincide".into()));
    }
    let dim = cloud.intrinsic_dim() as f64;
    // Initial guess: spacing of a uniform grid over the bounding box.
    let cell = (extent / (n as f64).powf(1.0 / dim)).max(extent * 1e-9);
    let grid = CellGrid::new(cloud, cell);

    let nearest: Vec<Option<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let p = cloud.point(i);
            let mut radius = cell;
            loop {
                let mut best = f64::INFINITY;
                grid.for_each_within(p, radius, |_, d2| {
                    if d2 > 0.0 && d2 < best {
                        best = d2;
                    }
                });
                if best.is_finite() {
                    return Some(best.sqrt());
                }
                if radius > 2.0 * extent {
                    return None;
                }
                radius *= 2.0;
            }
        })
        .collect();

    let found: Vec<f64> = nearest.into_iter().flatten().collect();
    if found.is_empty() {
        return Err(Error::Degenerate("no point has a distinct neighbor".into()));
    }
    Ok(found.iter().sum::<f64>() / found.len() as f64)
}
