//! Feasibility laboratory: projection-type algorithms for finding a common
//! point of finitely many finite point sets in the plane, together with the
//! experiment protocols used to study them (lambda sweeps, orbit traces and
//! iteration-count maps).

// NaN must fail validation, so the negated comparisons are deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algorithms;
pub mod error;
pub mod experiments;
pub mod generate;
pub mod geometry;
pub mod io;
pub mod sampling;

pub use algorithms::{
    init_state, monitored_point, orbit_outcome, run_orbit, step, step_cycdr, step_cycp, step_dr, step_exparp,
    AlgorithmConfig, AlgorithmKind, OrbitState, OrbitTrace, Outcome,
};
pub use error::{Error, Result};
pub use experiments::{
    cartographer, lambda_grid, lambda_sweep, pick_best_lambda, progressive_cartographer, success_rate, IterationMap,
    MapBatch, SuccessSummary, SweepParams, SweepResult,
};
pub use generate::{
    circles_constellation, preset_spec, random_constellation, CircleSpec, ConstellationPreset, Provenance, RandomSpec,
    Ring,
};
pub use geometry::{make_gauge, project, reflect, Constellation, FeasibilityGauge, FinitePointSet, Point, Region};
pub use sampling::{radical_inverse, sample_region, QmcStream};
