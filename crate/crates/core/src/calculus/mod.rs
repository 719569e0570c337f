//! Pathwise calculus: threshold-crossing partitions, discrete iterated
//! integrals, the pathwise quadratic variation, and integrals of simple
//! trading strategies.

mod qv;
mod strategy;

pub use qv::{
    iterated_integral, karandikar_times, pathwise_qv, IteratedIntegralCurve, KarandikarPartition,
    QvConfig, QvDiagnostics, QvResult,
};
pub use strategy::{
    generalized_integral, integral_s, integral_ss, transfer_strategy_up, AdaptedFunctional,
    GeneralizedIntegral, Leg, LiftedStrategy, SimpleStrategy, StoppingRule,
};
