//! Data augmentation for linear models as implicit spectral regularization.
//!
//! The crate is organized around the closed-form solution of the augmented
//! empirical risk `E_G ||G(X)θ - y||²`, which for row-wise stochastic
//! augmentations reduces to a Tikhonov problem with the augmentation
//! covariance operator as the regularizer matrix. On top of that sit
//! estimators ([`estimate`]), generalization metrics and decompositions
//! ([`metrics`]), evaluators for the theoretical bound expressions
//! ([`bounds`]), and a reproducible experiment engine ([`exp`]).
//!
//! All randomness flows through counter-based seed streams ([`rng`]), so
//! every result is a pure function of its inputs and a root seed.

pub mod augment;
pub mod bounds;
pub mod estimate;
pub mod exp;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod rng;

pub use augment::{Augmentation, AugmentationStats};
pub use bounds::{BoundReport, ClassBoundReport};
pub use estimate::{AsgdConfig, Estimator, TrainingTrajectory};
pub use metrics::{
    AugTransformed, BiasShift, ClassificationMetrics, EffectiveRanks, MseDecomposition,
};
pub use model::{Dataset, LatentDistribution, SignalModel, Spectrum};
pub use numerics::{DenseMatrix, SymmetricSpectrum};
