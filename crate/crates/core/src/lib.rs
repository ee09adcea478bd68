//! Correlated-entry random matrices.
//!
//! `X = (X_jk)` has i.i.d. pairs `(X_jk, X_kj)`, `j < k`, with zero mean,
//! unit variance and correlation `ρ`, plus an independent diagonal. The
//! crate samples such matrices, computes their spectra, and checks the
//! elliptic law, the log-potential identity, least-singular-value tails
//! and the small-ball estimates behind them.
//!
//! Numerical code is generic over [`Real`] (`f32` or `f64`). The aliases
//! below fix the scalar to `f64`, which is what the experiments use.

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod concentration;
pub mod elliptic;
pub mod ensemble;
pub mod error;
pub mod geometry;
pub mod potential;
pub mod scalar;
pub mod seeding;
pub mod spectra;

pub use nalgebra::{Complex, DMatrix, DVector};

pub use concentration::{
    decoupling_check, estimate_concentration, petrov_bound, small_ball_bound, tensorization_bound,
    tensorization_experiment, ConcentrationEstimate, WeightedSumSpec, ZetaLaw,
};
pub use elliptic::{fraction_inside, marginal_ks_distance, EllipticLaw, EllipticReport};
pub use ensemble::{
    build_shift, sample_matrix, CorrelatedPairDistribution, DiagFamily, EnsembleConfig, EnsembleSpec,
    MatrixSample, PairFamily, ShiftKind, ShiftSpec,
};
pub use error::{Error, Result};
pub use geometry::{classify, distance_formula, distance_to_span, spread_set, ClassParams, Sparsity, SpreadSet};
pub use potential::{
    large_sv_profile_check, log_potential, log_potential_eigs, log_potential_svals, min_sv_tail_experiment,
    moment_diagnostics, norm_tail_experiment, LogPotentialResult, TailExperimentReport,
};
pub use scalar::Real;
pub use spectra::{eigenvalues, least_singular_value, operator_norm, shifted_singular_esd, singular_values};

/// Seed used when none is supplied.
pub const DEFAULT_SEED: u64 = 0xE111_971C;

pub type EigenSpectrum64 = spectra::EigenSpectrum<f64>;
pub type SingularSpectrum64 = spectra::SingularSpectrum<f64>;
pub type EllipticLaw64 = elliptic::EllipticLaw<f64>;
pub type MatrixSample64 = ensemble::MatrixSample<f64>;
pub type ClassParams64 = geometry::ClassParams<f64>;
pub type SpreadSet64 = geometry::SpreadSet<f64>;
pub type ConcentrationEstimate64 = concentration::ConcentrationEstimate<f64>;
pub type LogPotentialResult64 = potential::LogPotentialResult<f64>;

pub type EigenSpectrum32 = spectra::EigenSpectrum<f32>;
pub type SingularSpectrum32 = spectra::SingularSpectrum<f32>;
pub type EllipticLaw32 = elliptic::EllipticLaw<f32>;
