//! Error-state estimation of navigation errors, sensor biases and odometer
//! installation parameters.

pub mod align;
pub mod filter;
pub mod model;
pub mod observability;
pub mod run;

pub use align::{average_stationary, static_coarse_align, MotionThresholds};
pub use filter::{
    kalman_update, scalar_update, ErrorStateFilter, FilterConfig, InitialSigma, ProcessNoise, ScalarOutcome,
    SpeedObservation, UpdateStats,
};
pub use model::{Calibration, StateMatrix, StateVector, ATT, BA, BG, FAC, LEV, POS, PSI, STATE_DIM, THETA, VEL};
pub use run::{run_filter, run_from_standstill, run_problem_one, EpochRecord, FilterRun, ProblemOneConfig, ProblemOneResult};
pub use observability::{observability, sample_trajectory, LinearizationPoint, ObservabilityReport};
