//! Born-model data synthesis: separated `M(x, z, t)` directly, or the full
//! Fourier-domain sinogram followed by separation.

mod full;
mod plan;
mod separated;

pub use full::{
    predicted_cost, separate_data, simulate_fourier_full, FullOptions, KGrid, SinogramData, SinogramMetadata,
};
pub use plan::{Cell, CellRole, PlanOptions, SamplingPlan, TimeGrid};
pub use separated::{
    free_term_2d, free_term_3d, separated_kernel, simulate_separated, simulate_separated_2d, simulate_separated_3d,
    Metadata, SeparatedData, SkippedCell,
};
