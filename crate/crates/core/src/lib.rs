//! Simulation and reconstruction for sectional photoacoustic imaging with a
//! weakly varying sound speed.
//!
//! The forward models produce Born-approximation data for an absorption
//! density `f = f0 + f1` and a sound-speed contrast `q = 1/c² − 1`; the
//! reconstruction pipelines recover `q` and `f1` from it in two and three
//! dimensions.

pub mod error;
pub mod fields;
pub mod forward;
pub mod geom;
pub mod meanops;
pub mod persist;
pub mod quad;
pub mod recon;
pub mod specfun;
pub mod volterra;
pub mod xforms;

pub use error::{Error, Result};
pub use fields::{
    make_phantom, BumpSpec, BumpSum, DetectorSet, Field, GridSpec, IlluminationSet, Phantom,
    PhantomSpec, ScalarField,
};
pub use geom::{Ball, Point};
