//! Finite Hermitian realizations of lattice operator ensembles and their
//! symmetry actions.

mod ensemble;
mod lattice_box;
mod operator;
mod symbol;
mod symmetry;

pub use ensemble::{
    build_operator, build_operator_capped, site_uniform, toeplitz_matrix, EnsembleKind, EnsembleSpec,
    DEFAULT_MAX_SITES,
};
pub use lattice_box::{sup_distance, LatticeBox};
pub use operator::HermitianOperator;
pub use symbol::{symbol_fourier_coefficients, Symbol1D};
pub use symmetry::{apply_symmetry, SymmetryAction};
