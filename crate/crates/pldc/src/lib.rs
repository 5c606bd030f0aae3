//! Piecewise-linear regression and classification with difference-of-convex
//! models.
//!
//! A model is the difference of two max-affine functions. Fitting picks the
//! values the model takes at the training sites through a convex program
//! whose constraints force those values to be attainable by such a
//! difference, with the l1 norms of the two slope families budgeted by a
//! regularized bound. The crate provides:
//!
//! - [`model`]: max-affine parts, model algebra, exact interpolation
//!   constructions, and the representation-level seminorm bound;
//! - [`admm`]: the closed-form parallel ADMM fitter (squared, absolute and
//!   binary-hinge losses);
//! - [`oracle`]: a dense log-barrier interior-point LP/QP solver used as the
//!   reference for every fit, plus the builder for the fitting program;
//! - [`discrepancy`]: the empirical-maximum-discrepancy LP and the derived
//!   regularization grid;
//! - [`select`]: cross-validation, one-vs-rest multiclass, synthetic data and
//!   normalized-MSE evaluation;
//! - [`relu`]: conversions between small ReLU networks and models, with a
//!   seminorm certificate.

pub mod admm;
pub mod dataset;
pub mod discrepancy;
pub mod error;
pub mod model;
pub mod oracle;
pub mod relu;
pub mod select;
pub mod srm;

pub use admm::{fit, fit_absolute, fit_hinge_binary, FitConfig, FitReport, LossKind};
pub use dataset::{Dataset, Standardizer};
pub use discrepancy::{
    discrepancy, discrepancy_with, lambda_grid, lambda_grid_with, seeded_split,
    theoretical_lambda, DiscrepancyResult,
};
pub use error::{Error, Result};
pub use model::{build_from_witness, interpolate_quadratic_shift, MaxAffine, Plane, PldcModel};
pub use oracle::{solve, ConvexProgram, Sense, Solution, SolveOptions};
pub use relu::{pldc_to_relu, relu_to_pldc, seminorm_certificate, ReluNet};
pub use select::{
    cross_validate, evaluate_nmse, fit_multiclass, generate_synthetic, CvPlan, CvRow, Metric,
    MulticlassModel,
};
pub use srm::{build_srm_program, LMode, SrmProgram};
