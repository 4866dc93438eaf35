//! Comparison functions and gain matrices for the small-gain argument.

mod gains;
mod kfn;

pub use gains::{
    check_small_gain, find_phi, gamma_matrix_from, max_form_conversion, GainMatrix, CYCLE_LIMIT, DEFAULT_PSI,
};
pub use kfn::{IdentityComparison, KFn};
