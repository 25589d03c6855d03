//! Numerical laboratory for ℓ1-loss Burer–Monteiro matrix recovery.
//!
//! Builds sensing and completion instances with sparse outlier noise,
//! runs the sub-gradient method, and probes true solutions for first- and
//! second-order descent directions to classify them as non-critical,
//! strict-saddle candidates, or points where no descent was found.

pub mod classify;
pub mod io;
pub mod linalg;
pub mod loss;
pub mod optimizer;
pub mod presets;
pub mod probes;
pub mod problem;

pub use classify::{
    classify, job_seed, phase_sweep, probe_scaling, rng_for, Classification, PerturbationReport, ProbeOptions,
    SolutionKind, SweepConfig,
};
pub use linalg::Mat;
pub use optimizer::{run_subgradient, Init, SolveConfig, Trajectory};
pub use problem::{FactorPair, Formulation, Instance, InstanceSpec, NoiseDist};
