//! Relative-entropy model selection.
//!
//! For every candidate support `(d, m)` the observed output error bounds the
//! unmodeled energy, which in turn bounds the (unobservable) reconstruction
//! error and the relative entropy between the true and fitted output
//! distributions. The candidate with the smallest worst-case relative
//! entropy wins.

pub mod bounds;
pub mod selection;

pub use bounds::{
    alpha_feasible, delta_bounds, delta_true, gaussian_coverage, output_error, re_upper,
    recon_bounds, reconstruction_error_true, ReBoundSet, Rejection, ValidationParams,
};
pub use selection::{
    bound_grid, fit_candidate, optimize, select_model, GridCell, GridOptimum, ModelCandidate,
    NoiseGrid, OutputErrorTable, SearchSpace, Selection, SigmaOutcome, SigmaStatus,
    DEFAULT_POINTS_PER_DECADE,
};
