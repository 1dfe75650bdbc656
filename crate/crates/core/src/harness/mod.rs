//! Error metrics, rate fits, timing protocol and convergence sweeps.

mod config;
mod metrics;
mod sweep;

pub use self::config::{
    random_polynomial, BasisSection, Config, DiscretizationSection, DomainSection, ProblemSection,
    RefinementSection, SolverSection, SweepSection, DEFAULT_LADDER, DEFAULT_PRESETS,
};
pub use self::metrics::{error_norms, fit_loglog, ErrorNorms, LogLogFit};
pub use self::sweep::{
    estimate_rate, fit_rates, format_rates, read_records, run_cell, run_convergence, write_figures,
    write_records, CellDetails, CellOutcome, ConvergenceReport, RateEstimate, RunRecord,
    RECORDS_HEADER,
};
