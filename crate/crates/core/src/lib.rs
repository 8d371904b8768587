pub mod arith;
pub mod charsums;
pub mod coeffs;
pub mod error;
pub mod jutila;
pub mod pipeline;
pub mod report;
pub mod scalar;
pub mod transforms;

pub use error::{Error, Result};

/// Weight-12 GL(2) table in double precision.
pub type Gl2Table = coeffs::GL2CoefficientTable<f64>;
/// Symmetric-square GL(3) table in double precision.
pub type Gl3Table = coeffs::GL3CoefficientTable<f64>;
pub type Approximant64 = jutila::Approximant<f64>;
pub type SEvaluator64 = charsums::SEvaluator<f64>;
pub type TEvaluator64 = charsums::TEvaluator<f64>;
