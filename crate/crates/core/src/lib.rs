//! Approximate matrix multiplication with the fast Walsh-Hadamard sketch.
//!
//! Both inputs are preconditioned by a two-sided, sign-randomized Hadamard
//! rotation `W(X) = H D_a X D_b H`. The rotated product has its Frobenius
//! mass spread evenly over all entries, so computing any `r * n` of its
//! entries and rotating back gives an estimate of `AB` whose error scales
//! with `||AB||_F` rather than with the input norms.
//!
//! Modules, bottom up:
//!
//! - [`matrix`]: dense square matrices, sign vectors, seeded streams, generators
//! - [`fwht`]: the in-place butterfly transform and its two-sided form
//! - [`rotation`]: the rotation operator, its inverse and the product law
//! - [`sampling`]: choice of the output positions that get computed
//! - [`sketch`]: the estimator itself, the naive baseline, the exact oracle
//! - [`amplify`]: repeated residual sketching down to a target error
//! - [`evaluator`]: Monte Carlo measurement against the closed forms

pub mod amplify;
pub mod error;
pub mod evaluator;
pub mod fwht;
pub mod matrix;
pub mod rotation;
pub mod sampling;
pub mod sketch;
pub mod stats;

pub use amplify::{amplify_multiply, AmplifyConfig, AmplifyTrace};
pub use error::{AmmError, Result};
pub use evaluator::{
    flatness_probe, run_experiment, run_experiment_detailed, Algorithm, ErrorReport, ExperimentOutcome, ExperimentPlan,
    FlatnessReport, REPORT_SCHEMA_VERSION,
};
pub use fwht::{fwht_two_sided, fwht_vector, hadamard_entry};
pub use matrix::{
    diag_scale, frobenius_norm_sq, generate, generate_padded, random_signs, GeneratorKind, Matrix, Seed, SeedStream,
    SignVector,
};
pub use rotation::{check_multiplicativity, rotate, rotate_inverse, RotationKeys};
pub use sampling::{sample_indices, IndexSet, SamplerMode};
pub use sketch::{
    exact_multiply, naive_sample_multiply, naive_sample_multiply_from, partial_product, sketch_multiply,
    sketch_multiply_from, Estimator, PhaseTimings, SketchConfig, SketchResult,
};
