//! Experiment configuration, sweeps, fits and artifact writing behind the
//! `szegolab` command line.

mod config;
mod fit;
mod identities;
mod run;
mod szego1d;

pub use config::{DecayConfig, ExperimentConfig, ExperimentKind, Overrides, Szego1dConfig};
pub use fit::{
    fit_expansion, fit_log_enhancement, fit_samples, CrossCheck, FitReport, LinearFit, LogClass, LogEnhancementReport,
    CONDITION_FLAG,
};
pub use identities::{
    identity_suite, IdentityInputs, IdentityReport, InclusionExclusionCheck, NullityCheck, PartitionCheck,
    TelescopingCheck, FLOAT_TOL,
};
pub use run::{
    box_traces, exit_code, kernel_report, log_enhancement_probe, run_experiment, run_sweep, sweep_and_fit, verify_decay,
    with_workers, DecayReport, KernelReport, Outcome, RunSummary, SweepOutcome, CROSS_CHECK_K, EXIT_ACCEPTANCE,
    EXIT_CONFIG, EXIT_IDENTITY, EXIT_NUMERIC, EXIT_OK,
};
pub use szego1d::{
    szego_1d_suite, toeplitz_log_det, toeplitz_trace, DeterminantRow, SymbolPair, Szego1dReport, TraceBranch, TraceRow,
};
