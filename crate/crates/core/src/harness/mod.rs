//! Experiment orchestration: configs, dispatch and persisted reports.

mod config;
mod experiments;
mod report;

pub use config::{
    parse_strict, AreaShiftParams, ExpMomentParams, ExperimentConfig, ExperimentKind, FieldParams,
    HyperviscosityParams, InitialCondition, LinearCovarianceParams, MollifierParams, Nonlinearity, Params,
    Potential, ProblemParams, ReversibilityParams, SolveMethod, SolveParams, StencilParams, SCHEMA_VERSION,
};
pub use experiments::{
    build_problem, build_setup, initial_condition, nonlinearity_maps, run, run_to_dir, solver_options,
    verify_rerun, FrameSet, RunOutput,
};
pub use report::{
    emit, read_report, write_timing, Artifact, Check, FitSummary, Format, Provenance, Relation, RunReport,
    Table, Timing, CONFIG_FILE, REPORT_FILE, TIMING_FILE,
};
