//! The unit circle `M = S¹ ⊂ R²`: grids, drift paths, drifted Gaussian
//! kernels, the spectral reference solver and short-time asymptotics.

mod asymptotics;
mod geometry;
mod grid;
mod kernel;
mod path;
mod reference;

pub use asymptotics::{asymptotics_probe, AsymptoticsReport};
pub use geometry::{embed, normal_decompose, project, tangent, Point2, TUBE_RADIUS};
pub use grid::{
    ck_norm, spectral_derivative, CircleGrid, DerivativeOrder, FunctionSamples, TrigInterpolant,
    MAX_CK_ORDER,
};
pub use kernel::{
    apply_generator, apply_q, build_q_kernel, chernoff_transport, min_resolved_step,
    CircleGenerator, CircleKernelFamily, KernelMatrix, NODES_PER_WIDTH,
};
pub use path::{AngleProfile, DriftPath};
pub use reference::{spectral_reference, SpectralEvolution};
