//! Voronoi integral transforms and the summation formulas they enter.

pub mod bessel;
pub mod gamma;
pub mod mellin;
pub mod quadrature;
pub mod voronoi;
pub mod windows;

pub use bessel::bessel_j;
pub use mellin::{g_transform, mellin, ContourSpec, LanglandsParams, MellinBarnesKernel};
pub use voronoi::{
    gl2_voronoi_residual, gl3_voronoi_residual, h_transform_holomorphic, normalized_difference, write_trace_csv,
    Gl2Dual, Gl3Residual, GL2_DUAL_CUTOFF,
};
pub use windows::{WeightFunctionSpec, WindowKind};
