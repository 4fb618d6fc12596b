//! Spherical and circular means, their inversion from centers on `Γ`, the
//! rotational ellipsoidal mean and the planar two-center kernel integral.

mod ellipsoidal;
mod invert2d;
mod invert3d;
mod spherical;
mod twocenter;

pub use ellipsoidal::{ellipsoidal_mean, ellipsoidal_mean_with};
pub use invert2d::{invert_mean_2d, Fhr};
pub use invert3d::{invert_mean_3d, FinchRakesh};
pub use spherical::{mean_at, sphere_mean_of, spherical_mean, spherical_mean_with, MeanData, QuadRule};
pub use twocenter::{kernel_k, pair_kernel, pair_kernel_sine_quadrature, twocenter_kernel_2d, twocenter_kernel_2d_with};
