//! Lattice regions, projection masks, restrictions, traces and Schatten norms.

mod region;
mod traces;

pub use region::{parse_region, Constraint, Region, SlotOrder};
pub use traces::{
    boundary_distance, boundary_distance_masks, boundary_sites, kernel_block_norm, operator_norm, region_mask,
    restrict, schatten_norm, schatten_power, singular_values, trace, trace_matrix, weighted_trace, BlockNorm,
    ProjectionMask,
};
