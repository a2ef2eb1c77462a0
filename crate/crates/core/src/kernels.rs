//! The exponential kernel `k(z) = exp(-z)` and its moment constants.
//!
//! With `K(x, y) = k(|x - y|^2 / eps^2)` every constant in the interior and
//! boundary expansions has a closed form in terms of `erf`. Interior moments
//! are integrals over the tangent space `R^m`; boundary moments restrict the
//! normal coordinate to the half-line `(-inf, b/eps]`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kernel bandwidth, in the units of the ambient coordinates.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Bandwidth(f64);

impl Bandwidth {
    pub fn new(epsilon: f64) -> Result<Self> {
        if epsilon > 0.0 && epsilon.is_finite() {
            Ok(Self(epsilon))
        } else {
            Err(Error::config(format!("bandwidth must be positive and finite, got {epsilon}")))
        }
    }

    /// Like [`Bandwidth::new`] but also requires `epsilon` to be smaller than
    /// the extent of the cloud it will be used on.
    pub fn for_extent(epsilon: f64, extent: f64) -> Result<Self> {
        let eps = Self::new(epsilon)?;
        if epsilon >= extent {
            return Err(Error::config(format!(
                "bandwidth {epsilon} is not smaller than the cloud extent {extent}"
            )));
        }
        Ok(eps)
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

/// `exp(-d^2 / eps^2)`.
#[inline]
pub fn kernel_eval(d_squared: f64, eps: Bandwidth) -> f64 {
    (-d_squared / (eps.0 * eps.0)).exp()
}

#[inline]
pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

/// `(m0, m2)`: zeroth and second interior moments over `R^m`.
pub fn interior_moments(m: usize) -> (f64, f64) {
    let m0 = PI.powf(m as f64 / 2.0);
    (m0, m0 / 2.0)
}

/// `(m0_bar, m1_bar)`: moments of `exp(-u^2)` over the half-line `[0, inf)`.
pub fn half_moments() -> (f64, f64) {
    (PI.sqrt() / 2.0, 0.5)
}

/// Boundary moments `(m0, m1, m2)` at distance `b` from the boundary.
///
/// `m1` is the normal first moment and is never positive; all three tend to
/// their interior values as `b / eps` grows.
pub fn boundary_moments(b: f64, eps: Bandwidth, m: usize) -> (f64, f64, f64) {
    let t = b / eps.0;
    let transverse = PI.powf((m as f64 - 1.0) / 2.0);
    let g = (-t * t).exp();
    let half = 1.0 + erf(t);
    let m0 = 0.5 * transverse * PI.sqrt() * half;
    let m1 = -0.5 * transverse * g;
    let m2 = 0.5 * transverse * (-t * g + 0.5 * PI.sqrt() * half);
    (m0, m1, m2)
}

/// Boundary moment of order `ell` from the integration-by-parts recursion
/// `m_l = (b/eps)^(l-1) m_1 + (l-1)/2 m_(l-2)`, grounded at `l = 0, 1`.
pub fn boundary_moment_recursive(ell: usize, b: f64, eps: Bandwidth, m: usize) -> f64 {
    let t = b / eps.0;
    let (m0, m1, _) = boundary_moments(b, eps, m);
    // carry (m_{l-2}, m_{l-1}) upward
    let (mut prev2, mut prev1) = (m0, m1);
    if ell == 0 {
        return m0;
    }
    for l in 2..=ell {
        let next = t.powi(l as i32 - 1) * m1 + (l as f64 - 1.0) / 2.0 * prev2;
        prev2 = prev1;
        prev1 = next;
    }
    prev1
}

/// Interior constants plus per-point boundary moments for a cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSet {
    pub m0: f64,
    pub m2: f64,
    pub m0_boundary: Vec<f64>,
    pub m1_boundary: Vec<f64>,
    pub m2_boundary: Vec<f64>,
    pub m0_bar: f64,
    pub m1_bar: f64,
}

impl MomentSet {
    /// Evaluates the boundary moments at every distance in `b`.
    pub fn new(b: &[f64], eps: Bandwidth, m: usize) -> Self {
        let (m0, m2) = interior_moments(m);
        let (m0_bar, m1_bar) = half_moments();
        let mut m0_boundary = Vec::with_capacity(b.len());
        let mut m1_boundary = Vec::with_capacity(b.len());
        let mut m2_boundary = Vec::with_capacity(b.len());
        for &bi in b {
            let (a, c, d) = boundary_moments(bi, eps, m);
            m0_boundary.push(a);
            m1_boundary.push(c);
            m2_boundary.push(d);
        }
        Self {
            m0,
            m2,
            m0_boundary,
            m1_boundary,
            m2_boundary,
            m0_bar,
            m1_bar,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eps(e: f64) -> Bandwidth {
        Bandwidth::new(e).unwrap()
    }

    #[test]
    fn kernel_values() {
        let e = eps(0.3);
        assert_eq!(kernel_eval(0.0, e), 1.0);
        assert!((kernel_eval(0.09, e) - (-1.0f64).exp()).abs() < 1e-16);
        assert!(kernel_eval(36.0 * 0.09, e) < 1e-15);
    }

    #[test]
    fn interior_closed_forms() {
        let (m0, m2) = interior_moments(1);
        assert!((m0 - PI.sqrt()).abs() < 1e-15);
        assert!((m2 - PI.sqrt() / 2.0).abs() < 1e-15);
        let (m0, m2) = interior_moments(2);
        assert!((m0 - PI).abs() < 1e-15);
        assert!((m2 - PI / 2.0).abs() < 1e-15);
        for m in 1..8 {
            let (m0, m2) = interior_moments(m);
            assert_eq!(m2 / m0, 0.5);
        }
    }

    #[test]
    fn boundary_moments_at_the_boundary() {
        let (m0, m1, m2) = boundary_moments(0.0, eps(0.1), 1);
        assert!((m0 - PI.sqrt() / 2.0).abs() < 1e-15);
        assert!((m1 + 0.5).abs() < 1e-15);
        assert!((m2 - PI.sqrt() / 4.0).abs() < 1e-15);
        for m in 1..5 {
            let (_, i2) = interior_moments(m);
            let (_, _, b2) = boundary_moments(0.0, eps(0.7), m);
            assert!((b2 - i2 / 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn boundary_moments_saturate() {
        for m in 1..5 {
            let (i0, i2) = interior_moments(m);
            for t in [6.0, 7.5, 10.0] {
                let (m0, m1, m2) = boundary_moments(t * 0.2, eps(0.2), m);
                assert!((m0 - i0).abs() < 1e-12 * i0);
                assert!((m2 - i2).abs() < 1e-12 * i0);
                assert!(m1.abs() < 1e-12 * i0);
            }
        }
    }

    #[test]
    fn recursion_reproduces_closed_form_m2() {
        for &t in &[0.0, 0.3, 1.0, 2.5] {
            let e = eps(0.5);
            let (m0, m1, m2) = boundary_moments(t * 0.5, e, 3);
            assert_eq!(boundary_moment_recursive(0, t * 0.5, e, 3), m0);
            assert_eq!(boundary_moment_recursive(1, t * 0.5, e, 3), m1);
            assert!((boundary_moment_recursive(2, t * 0.5, e, 3) - m2).abs() < 1e-15);
        }
    }

    #[test]
    fn half_moment_values() {
        let (a, b) = half_moments();
        assert!((a - 0.886_226_925_452_758).abs() < 1e-15);
        assert_eq!(b, 0.5);
        assert!((2.0 * a / PI.sqrt() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bandwidth_validation() {
        assert!(Bandwidth::new(0.0).is_err());
        assert!(Bandwidth::new(f64::NAN).is_err());
        assert!(Bandwidth::for_extent(2.0, 1.0).is_err());
        assert!(Bandwidth::for_extent(0.1, 1.0).is_ok());
    }

    #[test]
    fn moment_set_tracks_distances() {
        let s = MomentSet::new(&[0.0, 10.0], eps(0.1), 2);
        assert!((s.m0_boundary[0] - s.m0 / 2.0).abs() < 1e-14);
        assert!((s.m0_boundary[1] - s.m0).abs() < 1e-14);
        assert!(s.m1_boundary.iter().all(|&v| v <= 0.0));
    }
}
