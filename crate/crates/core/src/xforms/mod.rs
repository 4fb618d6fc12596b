//! Fourier transform in the `e^{+ikt}` convention, planar Radon transform and
//! its inversion, and repeated time antiderivatives.

mod antiderivative;
mod fourier;
mod radon;

pub use antiderivative::{time_antiderivative, time_derivative};
pub use fourier::{fourier, sqrt_pulse_transform, fourier_inverse_complex, fourier_forward, fourier_inverse, Direction, Spectrum, TimeSeries, Transformed};
pub use radon::{radon_forward, radon_invert, radon_backproject_complex, RadonInversion, RadonInverter, Sinogram};
