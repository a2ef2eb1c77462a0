//! Sample sets: storage, synthetic generators, CSV ingest and fixed-radius
//! neighbor search.
//!
//! A [`PointCloud`] is the only input the solver needs. Coordinates live in
//! a flat row-major buffer; the intrinsic dimension is carried alongside
//! because it cannot be recovered from the samples here.

mod generators;
mod io;
mod neighbors;

pub use generators::{
    EllipseSampler, HemisphereSampler, PointSampler,
    generate_interval_grid, generate_square_grid, sample_ellipse, sample_hemisphere,
    warp_interval_grid,
};
pub use io::{read_csv, write_csv};
pub(crate) use neighbors::CellGrid;
pub use neighbors::{build_neighbors, default_cutoff, mean_spacing, NeighborList, KERNEL_TRUNCATION};

use crate::error::{Error, Result};

/// Points sampled from an `m`-dimensional manifold embedded in `R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    coords: Vec<f64>,
    ambient_dim: usize,
    intrinsic_dim: usize,
}

impl PointCloud {
    /// Builds a cloud from a flat row-major coordinate buffer.
    pub fn new(coords: Vec<f64>, ambient_dim: usize, intrinsic_dim: usize) -> Result<Self> {
        if ambient_dim == 0 {
            return Err(Error::config("ambient dimension must be positive"));
        }
        if intrinsic_dim == 0 || intrinsic_dim > ambient_dim {
            return Err(Error::config(format!(
                "intrinsic dimension {intrinsic_dim} must lie in 1..={ambient_dim}"
            )));
        }
        if coords.len() % ambient_dim != 0 {
            return Err(Error::config(format!(
                "{} coordinates do not split into rows of length {ambient_dim}",
                coords.len()
            )));
        }
        let count = coords.len() / ambient_dim;
        if count < 2 {
            return Err(Error::config(format!("need at least 2 points, got {count}")));
        }
        if let Some(pos) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::config(format!(
                "non-finite coordinate in point {}",
                pos / ambient_dim
            )));
        }
        Ok(Self {
            coords,
            ambient_dim,
            intrinsic_dim,
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R], intrinsic_dim: usize) -> Result<Self> {
        let ambient_dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut coords = Vec::with_capacity(rows.len() * ambient_dim);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != ambient_dim {
                return Err(Error::config(format!(
                    "point {i} has dimension {}, expected {ambient_dim}",
                    row.len()
                )));
            }
            coords.extend_from_slice(row);
        }
        Self::new(coords, ambient_dim, intrinsic_dim)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.coords.len() / self.ambient_dim
    }

    /// Always `false`; a valid cloud holds at least two points.
    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    #[inline]
    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    #[inline]
    pub fn intrinsic_dim(&self) -> usize {
        self.intrinsic_dim
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.ambient_dim..(i + 1) * self.ambient_dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.ambient_dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    #[inline]
    pub fn distance_squared(&self, i: usize, j: usize) -> f64 {
        squared_distance(self.point(i), self.point(j))
    }

    /// Axis-aligned bounding box as `(min, max)` per coordinate.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.ambient_dim];
        let mut hi = vec![f64::NEG_INFINITY; self.ambient_dim];
        for p in self.points() {
            for (d, &c) in p.iter().enumerate() {
                lo[d] = lo[d].min(c);
                hi[d] = hi[d].max(c);
            }
        }
        (lo, hi)
    }

    /// Length of the bounding-box diagonal, an upper bound on the diameter.
    pub fn extent(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        squared_distance(&lo, &hi).sqrt()
    }

    pub fn with_intrinsic_dim(mut self, intrinsic_dim: usize) -> Result<Self> {
        if intrinsic_dim == 0 || intrinsic_dim > self.ambient_dim {
            return Err(Error::config(format!(
                "intrinsic dimension {intrinsic_dim} must lie in 1..={}",
                self.ambient_dim
            )));
        }
        self.intrinsic_dim = intrinsic_dim;
        Ok(self)
    }
}

#[inline]
pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
