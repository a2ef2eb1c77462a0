//! Mesh-free PDE solvers on sampled manifolds with boundary.
//!
//! Given only sample points and an intrinsic dimension, the crate estimates
//! the distance to the boundary and the outward normal at every point,
//! corrects the kernel density estimate for the missing half-kernel near the
//! boundary, assembles mass, stiffness and boundary-integral operators from
//! the exponential diffusion-maps kernel, and solves Dirichlet, Neumann and
//! heat-equation problems with them.
//!
//! ```
//! use diffusion_pde::prelude::*;
//!
//! let cloud = generate_interval_grid(2001, -1.0, 1.0).unwrap();
//! let eps = Bandwidth::new(0.1).unwrap();
//! let neighbors = build_neighbors(&cloud, default_cutoff(eps.get())).unwrap();
//! let est = estimate_boundary(&cloud, &neighbors, eps, 1).unwrap();
//! assert!(est.b[0] < 0.01);
//! assert!(est.eta(0)[0] < 0.0);
//! ```

pub mod boundary;
pub mod error;
pub mod kernels;
pub mod operators;
pub mod pde;
pub mod pointcloud;
pub mod problems;
pub mod verify;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::boundary::{
        analyze, classify_dofs, corrected_density, estimate_boundary, BoundaryEstimate, DensityEstimate,
        DofPartition,
    };
    pub use crate::error::{Error, Result};
    pub use crate::kernels::{Bandwidth, MomentSet};
    pub use crate::pointcloud::{
        build_neighbors, default_cutoff, generate_interval_grid, generate_square_grid, mean_spacing,
        NeighborList, PointCloud,
    };
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/point-clouds.md")]
    mod point_clouds {}
    #[doc = include_str!("../../../book/src/boundary.md")]
    mod boundary {}
    #[doc = include_str!("../../../book/src/operators.md")]
    mod operators {}
    #[doc = include_str!("../../../book/src/solving.md")]
    mod solving {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
