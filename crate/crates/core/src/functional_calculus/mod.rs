//! Functions of Hermitian operators: spectral calculus, resolvents and the
//! Helffer–Sjöstrand representation.

mod hs;
mod scalar;
mod spectral;

pub use hs::{hs_apply, hs_apply_decomposed, hs_extension, HsGrid, HsOutcome, QuasiAnalyticExtension};
pub use scalar::{EntireKind, Envelope, FunctionKind, ScalarFunction, Smoothness, Support};
pub use spectral::{
    apply_scalar_function, eigenvalues, function_diagonal, resolvent, restricted_function_diagonal,
    spectral_decompose, EigenBasis, SpectralDecomposition, NEAR_SPECTRUM,
};
