//! Statistical-CSI-aware rate-splitting precoding for cooperative multi-satellite
//! MIMO downlinks, with the Monte Carlo harness used to evaluate it.

pub mod channel;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod linalg;
pub mod rates;
pub mod scalar;
pub mod socp;
pub mod wmmse;

#[cfg(test)]
mod test_support;

pub use error::{Error, Result};
pub use scalar::Real;

/// Concrete double-precision types.
pub type ChannelStatisticsF64 = channel::ChannelStatistics<f64>;
pub type EffectiveChannelF64 = channel::EffectiveChannel<f64>;
pub type PrecodingMatrixF64 = rates::PrecodingMatrix<f64>;
pub type RateReportF64 = rates::RateReport<f64>;
pub type ConicProgramF64 = socp::ConicProgram<f64>;
pub type DesignProblemF64 = wmmse::DesignProblem<f64>;

/// Concrete single-precision types.
pub type ChannelStatisticsF32 = channel::ChannelStatistics<f32>;
pub type EffectiveChannelF32 = channel::EffectiveChannel<f32>;
pub type PrecodingMatrixF32 = rates::PrecodingMatrix<f32>;
pub type RateReportF32 = rates::RateReport<f32>;
pub type ConicProgramF32 = socp::ConicProgram<f32>;
pub type DesignProblemF32 = wmmse::DesignProblem<f32>;
