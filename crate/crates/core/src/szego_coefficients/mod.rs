//! Model operators, combinatorial constants, finite-volume coefficients and
//! the exact corner-decomposition identities.

mod constants;
mod masks;
mod model;

pub use constants::{comb_constants, invert, to_f64, CombConstants, PermutationBlock, PermutationPartition};
pub use masks::{
    axis_order, chi_hat_mask, chi_hat_region, chi_hat_weight, chi_hat_weights, inclusion_exclusion_check, subsets,
    telescoping_check,
};
pub use model::{
    decomposition_identity_probe, error_term, finite_volume_coefficients, finite_volume_sweep, half_orthant_box,
    map_samples, model_diagonals, model_operators, partition_free_coefficients, restricted_box_diagonal, sample_g,
    sample_terms, tabulate, Adjudication, CoefficientPlan, CoefficientTable, IdentityProbe, ModelOperatorFamily,
    PartitionFree, SampleTerms,
};
