use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::PointCloud;
use crate::error::{Error, Result};

/// `count` equally spaced points on `[a, b]`, both endpoints included.
pub fn generate_interval_grid(count: usize, a: f64, b: f64) -> Result<PointCloud> {
    if count < 2 {
        return Err(Error::config(format!("interval grid needs at least 2 points, got {count}")));
    }
    if !(a.is_finite() && b.is_finite()) || a >= b {
        return Err(Error::config(format!("invalid interval bounds [{a}, {b}]")));
    }
    let last = (count - 1) as f64;
    let coords = (0..count)
        .map(|i| {
            if i + 1 == count {
                b
            } else {
                a + (b - a) * (i as f64 / last)
            }
        })
        .collect();
    PointCloud::new(coords, 1, 1)
}

/// Applies `t -> (t + shift)^power` to a 1-D cloud after mapping it onto
/// `[0, 1]`, then maps the result back onto the original interval.
///
/// The affine pre-map keeps every base non-negative, so fractional powers are
/// well defined. The endpoints of the interval are reproduced exactly.
pub fn warp_interval_grid(cloud: &PointCloud, shift: f64, power: f64) -> Result<PointCloud> {
    if cloud.ambient_dim() != 1 {
        return Err(Error::config("warp_interval_grid expects a 1-D cloud"));
    }
    if !(power > 0.0 && power.is_finite()) {
        return Err(Error::Domain(format!("warp power must be positive, got {power}")));
    }
    if shift < 0.0 || !shift.is_finite() {
        return Err(Error::Domain(format!(
            "warp shift {shift} makes the base (t + shift) negative near t = 0"
        )));
    }
    let (lo, hi) = cloud.bounding_box();
    let (a, b) = (lo[0], hi[0]);
    if a >= b {
        return Err(Error::Degenerate("interval cloud has zero width".into()));
    }
    let y_min = shift.powf(power);
    let y_max = (1.0 + shift).powf(power);
    let coords = cloud
        .coords()
        .iter()
        .map(|&x| {
            let t = (x - a) / (b - a);
            let s = ((t + shift).powf(power) - y_min) / (y_max - y_min);
            if s <= 0.0 {
                a
            } else if s >= 1.0 {
                b
            } else {
                a + s * (b - a)
            }
        })
        .collect();
    PointCloud::new(coords, 1, cloud.intrinsic_dim())
}

/// Vertices of a uniform `cells x cells` tensor grid on the unit square.
pub fn generate_square_grid(cells_per_side: usize) -> Result<PointCloud> {
    if cells_per_side < 2 {
        return Err(Error::config(format!(
            "square grid needs at least 2 cells per side, got {cells_per_side}"
        )));
    }
    let n = cells_per_side;
    let step = |i: usize| if i == n { 1.0 } else { i as f64 / n as f64 };
    let mut coords = Vec::with_capacity(2 * (n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            coords.push(step(i));
            coords.push(step(j));
        }
    }
    PointCloud::new(coords, 2, 2)
}

/// A source of independent samples from some distribution in `R^n`.
pub trait PointSampler {
    fn ambient_dim(&self) -> usize;
    fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R, out: &mut [f64]);
}

/// Uniform samples on the filled ellipse `x^2/a^2 + y^2/b^2 <= 1`, by
/// rejection from the bounding box.
#[derive(Debug, Clone)]
pub struct EllipseSampler {
    pub a: f64,
    pub b: f64,
    attempts: u64,
    accepted: u64,
}

impl EllipseSampler {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::config(format!("ellipse semi-axes must be positive, got ({a}, {b})")));
        }
        Ok(Self {
            a,
            b,
            attempts: 0,
            accepted: 0,
        })
    }

    /// `(box draws, accepted draws)` so far.
    pub fn counts(&self) -> (u64, u64) {
        (self.attempts, self.accepted)
    }

    pub fn area(&self) -> f64 {
        std::f64::consts::PI * self.a * self.b
    }
}

impl PointSampler for EllipseSampler {
    fn ambient_dim(&self) -> usize {
        2
    }

    fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R, out: &mut [f64]) {
        loop {
            self.attempts += 1;
            let x = self.a * (2.0 * rng.random::<f64>() - 1.0);
            let y = self.b * (2.0 * rng.random::<f64>() - 1.0);
            if (x / self.a).powi(2) + (y / self.b).powi(2) <= 1.0 {
                self.accepted += 1;
                out[0] = x;
                out[1] = y;
                return;
            }
        }
    }
}

/// Uniform samples on the closed upper unit hemisphere in `R^3`.
#[derive(Debug, Clone, Copy, Default)]
pub struct HemisphereSampler;

impl PointSampler for HemisphereSampler {
    fn ambient_dim(&self) -> usize {
        3
    }

    fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R, out: &mut [f64]) {
        loop {
            let v: [f64; 3] = [
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
            ];
            let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if r > 1e-12 {
                out[0] = v[0] / r;
                out[1] = v[1] / r;
                out[2] = v[2].abs() / r;
                return;
            }
        }
    }
}

fn sample_cloud<S: PointSampler>(
    sampler: &mut S,
    count: usize,
    seed: u64,
    intrinsic_dim: usize,
) -> Result<PointCloud> {
    let n = sampler.ambient_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coords = vec![0.0; count * n];
    for row in coords.chunks_exact_mut(n) {
        sampler.draw(&mut rng, row);
    }
    PointCloud::new(coords, n, intrinsic_dim)
}

pub fn sample_ellipse(count: usize, a: f64, b: f64, seed: u64) -> Result<PointCloud> {
    let mut sampler = EllipseSampler::new(a, b)?;
    sample_cloud(&mut sampler, count, seed, 2)
}

pub fn sample_hemisphere(count: usize, seed: u64) -> Result<PointCloud> {
    sample_cloud(&mut HemisphereSampler, count, seed, 2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_grid_examples() {
        let c = generate_interval_grid(3, -1.0, 1.0).unwrap();
        assert_eq!(c.coords(), &[-1.0, 0.0, 1.0]);
        let c = generate_interval_grid(2, 0.0, 1.0).unwrap();
        assert_eq!(c.coords(), &[0.0, 1.0]);
        let c = generate_interval_grid(5000, -1.0, 1.0).unwrap();
        let h = c.coords()[1] - c.coords()[0];
        assert!((h - 2.0 / 4999.0).abs() < 1e-15);
        assert_eq!(c.coords()[4999], 1.0);
        assert!(generate_interval_grid(1, 0.0, 1.0).is_err());
        assert!(generate_interval_grid(4, 1.0, 1.0).is_err());
    }

    #[test]
    fn warp_identity_and_domain() {
        let c = generate_interval_grid(101, -1.0, 1.0).unwrap();
        let w = warp_interval_grid(&c, 0.0, 1.0).unwrap();
        for (x, y) in c.coords().iter().zip(w.coords()) {
            assert!((x - y).abs() < 1e-15);
        }
        assert!(warp_interval_grid(&c, -0.1, 1.2).is_err());
        assert!(warp_interval_grid(&c, 0.05, 0.0).is_err());
    }

    #[test]
    fn warp_is_denser_near_left_end() {
        let c = generate_interval_grid(1001, -1.0, 1.0).unwrap();
        let w = warp_interval_grid(&c, 0.05, 1.2).unwrap();
        let x = w.coords();
        assert_eq!(x[0], -1.0);
        assert_eq!(x[1000], 1.0);
        assert!(x.windows(2).all(|p| p[1] > p[0]));
        let left = x[1] - x[0];
        let right = x[1000] - x[999];
        assert!(left < 0.8 * right, "left spacing {left}, right spacing {right}");
    }

    #[test]
    fn square_grid_small() {
        let c = generate_square_grid(2).unwrap();
        assert_eq!(c.len(), 9);
        assert!(c.points().any(|p| p == [0.0, 0.0]));
        assert!(c.points().any(|p| p == [1.0, 1.0]));
        assert!(c.points().all(|p| p.iter().all(|&v| (0.0..=1.0).contains(&v))));
        assert_eq!(generate_square_grid(100).unwrap().len(), 101 * 101);
    }

    #[test]
    fn ellipse_points_inside_and_area_fraction() {
        let c = sample_ellipse(2000, 1.0, 2.0 / 3.0, 7).unwrap();
        for p in c.points() {
            assert!(p[0] * p[0] + (p[1] * 1.5).powi(2) <= 1.0);
        }
        let mut s = EllipseSampler::new(1.0, 2.0 / 3.0).unwrap();
        sample_cloud(&mut s, 20_000, 3, 2).unwrap();
        let (tries, ok) = s.counts();
        let p = std::f64::consts::FRAC_PI_4;
        let frac = ok as f64 / tries as f64;
        let sigma = (p * (1.0 - p) / tries as f64).sqrt();
        assert!((frac - p).abs() <= 3.0 * sigma, "fraction {frac}");
    }

    #[test]
    fn hemisphere_on_sphere_and_deterministic() {
        let c = sample_hemisphere(4000, 11).unwrap();
        let mut zsum = 0.0;
        for p in c.points() {
            let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            assert!((r - 1.0).abs() < 1e-14);
            assert!(p[2] >= 0.0);
            zsum += p[2];
        }
        // z is uniform on [0, 1] on the hemisphere: mean 1/2, variance 1/12.
        let mean = zsum / 4000.0;
        let sigma = (1.0f64 / 12.0 / 4000.0).sqrt();
        assert!((mean - 0.5).abs() <= 3.0 * sigma, "mean z = {mean}");
        assert_eq!(c, sample_hemisphere(4000, 11).unwrap());
        assert_ne!(c, sample_hemisphere(4000, 12).unwrap());
    }
}
