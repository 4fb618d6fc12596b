mod fixed_point;
mod limit;
mod metrics;
mod pipeline;

pub use fixed_point::{fixed_point_q3d, FixedPointResult, PsiCell, PsiSamples};
pub use limit::{boundary_limits, limit_to_gamma, richardson, LimitTable};
pub use metrics::{metrics, Metrics};
pub use pipeline::{
    phi_from_limits, q_from_m1, recon2d, recon2d_q, recon3d, recon3d_q, reconstruct, volterra_stage, Diagnostics,
    ReconOptions, ReconResult,
};
