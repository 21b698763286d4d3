//! Empirical decay certificates and probes of kernel and trace bounds.

mod probes;
mod report;

pub use probes::{
    certify_a1, combes_thomas_probe, combes_thomas_restricted_probe, fit_kernel_decay, fit_pairs, holo_constant,
    holo_constant_of, kernel_decay_pairs, KernelShells, trace_difference_pairs, trace_difference_probe, A1Estimate, Aggregate,
    CombesThomasReport, FitMode, HoloConstant, SpectralWindow, NEAR_FIELD, VALUE_FLOOR,
};
pub use report::{DecayFitReport, DecayMode, Estimate};
