use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::kernels::Bandwidth;
use crate::pointcloud::{default_cutoff, CellGrid, PointCloud, PointSampler};

/// Running mean of fixed-length vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamingMean {
    mean: Vec<f64>,
    count: u64,
}

impl StreamingMean {
    pub fn new(len: usize) -> Self {
        Self {
            mean: vec![0.0; len],
            count: 0,
        }
    }

    /// Adds one observation.
    pub fn push(&mut self, x: &[f64]) {
        assert_eq!(x.len(), self.mean.len(), "observation length mismatch");
        self.count += 1;
        let w = 1.0 / self.count as f64;
        for (m, &v) in self.mean.iter_mut().zip(x) {
            *m += (v - *m) * w;
        }
    }

    /// Adds `count` observations whose componentwise sum is `sum`.
    pub fn push_sum(&mut self, sum: &[f64], count: u64) {
        self.merge(&Self {
            mean: sum.iter().map(|s| s / count.max(1) as f64).collect(),
            count,
        });
    }

    /// Count-weighted combination with another running mean.
    pub fn merge(&mut self, other: &Self) {
        assert_eq!(other.mean.len(), self.mean.len(), "observation length mismatch");
        if other.count == 0 {
            return;
        }
        let total = self.count + other.count;
        let w = other.count as f64 / total as f64;
        for (m, &o) in self.mean.iter_mut().zip(&other.mean) {
            *m += (o - *m) * w;
        }
        self.count = total;
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn into_mean(self) -> Vec<f64> {
        self.mean
    }
}

/// A weight function evaluated at sample points.
pub type SampleFn<'a> = &'a (dyn Fn(&[f64]) -> f64 + Sync);

/// Monte Carlo estimate of `E[k(|x - y|^2 / eps^2) f(y)]` at each target
/// `x`, with `y` drawn from `sampler`.
///
/// Batch `i` uses its own generator seeded from `(seed, i)`, so the result
/// does not depend on how batches are scheduled across threads.
pub fn streaming_kernel_expectation<S>(
    targets: &PointCloud,
    sampler: &S,
    f: SampleFn<'_>,
    eps: Bandwidth,
    batches: usize,
    batch_size: usize,
    seed: u64,
) -> Vec<f64>
where
    S: PointSampler + Clone + Sync,
{
    streaming_kernel_expectations(targets, sampler, &[f], eps, batches, batch_size, seed)
        .pop()
        .unwrap_or_default()
}

/// Like [`streaming_kernel_expectation`] for several weight functions at
/// once, all evaluated on the same samples.
pub fn streaming_kernel_expectations<S>(
    targets: &PointCloud,
    sampler: &S,
    fs: &[SampleFn<'_>],
    eps: Bandwidth,
    batches: usize,
    batch_size: usize,
    seed: u64,
) -> Vec<Vec<f64>>
where
    S: PointSampler + Clone + Sync,
{
    let nt = targets.len();
    let nf = fs.len();
    let radius = default_cutoff(eps.get());
    let grid = CellGrid::new(targets, radius);
    let inv_eps2 = 1.0 / (eps.get() * eps.get());
    let dim = sampler.ambient_dim();

    let partials: Vec<Vec<f64>> = (0..batches)
        .into_par_iter()
        .map(|batch| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(batch as u64 + 1);
            let mut sampler = sampler.clone();
            let mut y = vec![0.0; dim];
            let mut fy = vec![0.0; nf];
            let mut sums = vec![0.0; nt * nf];
            for _ in 0..batch_size {
                sampler.draw(&mut rng, &mut y);
                for (v, f) in fy.iter_mut().zip(fs) {
                    *v = f(&y);
                }
                grid.for_each_within(&y, radius, |t, d2| {
                    let k = (-d2 * inv_eps2).exp();
                    for (s, v) in sums[t * nf..(t + 1) * nf].iter_mut().zip(&fy) {
                        *s += k * v;
                    }
                });
            }
            sums
        })
        .collect();

    let mut acc = StreamingMean::new(nt * nf);
    for sums in &partials {
        acc.push_sum(sums, batch_size as u64);
    }
    let flat = acc.into_mean();
    (0..nf)
        .map(|k| (0..nt).map(|t| flat[t * nf + k]).collect())
        .collect()
}
