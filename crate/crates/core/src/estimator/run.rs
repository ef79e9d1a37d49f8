//! Drives the filter over recorded IMU and odometer-speed streams.

use nalgebra::SMatrix;
use serde::{Deserialize, Serialize};

use super::align::{average_stationary, static_coarse_align, MotionThresholds};
use super::filter::{ErrorStateFilter, FilterConfig, SpeedObservation, UpdateStats};
use super::model::{Calibration, StateMatrix, StateVector};
use crate::earth::{Dcm, EarthModel, GeodeticPosition, Vec3};
use crate::error::{Error, Result};
use crate::odometer::SpeedEstimate;
use crate::strapdown::{ImuIncrement, NavState};

impl From<&SpeedEstimate> for SpeedObservation {
    fn from(e: &SpeedEstimate) -> Self {
        Self { t: e.t, speed: e.speed, stationary: e.stationary }
    }
}

/// Filter output at one measurement epoch.
#[derive(Debug, Clone, Copy)]
pub struct EpochRecord {
    pub t: f64,
    pub nav: NavState,
    pub gyro_bias: Vec3,
    pub accel_bias: Vec3,
    pub calibration: Calibration,
    pub sigma: StateVector,
    /// attitude and velocity block of the covariance
    pub nav_covariance: SMatrix<f64, 6, 6>,
}

#[derive(Debug, Clone)]
pub struct FilterRun {
    pub epochs: Vec<EpochRecord>,
    pub stats: UpdateStats,
    pub final_covariance: StateMatrix,
}

impl FilterRun {
    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }
}

fn record(filter: &ErrorStateFilter) -> EpochRecord {
    let (gyro_bias, accel_bias) = filter.biases();
    EpochRecord {
        t: filter.nav().t,
        nav: *filter.nav(),
        gyro_bias,
        accel_bias,
        calibration: *filter.calibration(),
        sigma: filter.sigma(),
        nav_covariance: filter.covariance().fixed_view::<6, 6>(0, 0).into_owned(),
    }
}

/// Runs `filter` over increment pairs, applying each speed observation at
/// the update whose end time matches it to within half an interval.
pub fn run_filter(
    filter: &mut ErrorStateFilter,
    imu: &[ImuIncrement],
    speeds: &[SpeedObservation],
    nominal_factor: f64,
) -> Result<FilterRun> {
    let mut epochs = Vec::with_capacity(speeds.len());
    let mut j = 0;
    for w in speeds.windows(2) {
        if !(w[1].t > w[0].t) {
            return Err(Error::NonMonotonicTime { previous: w[0].t, current: w[1].t });
        }
    }
    for pair in imu.chunks_exact(2) {
        let t_prev = filter.nav().t;
        filter.step(&pair[0], &pair[1])?;
        let t = filter.nav().t;
        let half = 0.5 * (t - t_prev);
        while j < speeds.len() && speeds[j].t < t - half {
            j += 1;
        }
        if j < speeds.len() && (speeds[j].t - t).abs() <= half {
            filter.update_speed(&speeds[j], nominal_factor)?;
            epochs.push(record(filter));
            j += 1;
        }
    }
    Ok(FilterRun { epochs, stats: filter.stats(), final_covariance: *filter.covariance() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemOneConfig {
    pub filter: FilterConfig,
    /// prior odometer factor, pulses/m; also the factor used to form speeds
    pub nominal_factor: f64,
    /// longest stationary window used for alignment, s
    pub alignment_window: f64,
    /// shortest acceptable stationary window, s
    pub min_alignment: f64,
    pub motion: MotionThresholds,
}

impl Default for ProblemOneConfig {
    fn default() -> Self {
        Self {
            filter: FilterConfig::default(),
            nominal_factor: 8.6,
            alignment_window: 300.0,
            min_alignment: 30.0,
            motion: MotionThresholds::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProblemOneResult {
    pub coarse_attitude: Dcm,
    pub run: FilterRun,
}

/// Length of the leading stationary stretch of the speed stream, s.
fn leading_stationary(speeds: &[SpeedObservation], t0: f64) -> f64 {
    let end = speeds.iter().take_while(|s| s.stationary).last().map_or(t0, |s| s.t);
    end - t0
}

/// Time of the first sample, i.e. the start of the first increment.
pub fn data_start(imu: &[ImuIncrement]) -> Result<f64> {
    match imu {
        [a, b, ..] if b.t > a.t => Ok(a.t - (b.t - a.t)),
        [a, b, ..] => Err(Error::NonMonotonicTime { previous: a.t, current: b.t }),
        _ => Err(Error::InvalidInput("IMU record has fewer than two samples".to_string())),
    }
}

/// Self-calibration from a standing start: stationary alignment on the first
/// still window, then the error-state filter over the whole record.
pub fn run_problem_one(
    earth: &EarthModel,
    imu: &[ImuIncrement],
    speeds: &[SpeedObservation],
    position: &GeodeticPosition,
    config: &ProblemOneConfig,
) -> Result<ProblemOneResult> {
    run_from_standstill(earth, imu, speeds, position, &Calibration::nominal(config.nominal_factor), config)
}

/// As [`run_problem_one`] but starting from a given calibration, which is
/// held fixed when `config.filter.estimate_calibration` is off.
pub fn run_from_standstill(
    earth: &EarthModel,
    imu: &[ImuIncrement],
    speeds: &[SpeedObservation],
    position: &GeodeticPosition,
    calibration: &Calibration,
    config: &ProblemOneConfig,
) -> Result<ProblemOneResult> {
    let t0 = data_start(imu)?;
    // keep clear of the first pulse, which lags the start of motion
    let still = leading_stationary(speeds, t0) - 2.0;
    if still < config.min_alignment {
        return Err(Error::MissingStationaryWindow { found_s: still.max(0.0), required_s: config.min_alignment });
    }
    let window_end = t0 + still.min(config.alignment_window);
    let n = imu.partition_point(|i| i.t <= window_end + 1e-9);
    let avg = average_stationary(&imu[..n], t0, &config.motion)?;
    let attitude = static_coarse_align(earth, &avg.omega, &avg.force, position)?;

    let nav = NavState { attitude, velocity: Vec3::zeros(), position: *position, t: t0 };
    let mut filter = ErrorStateFilter::new(*earth, config.filter, nav, *calibration)?;
    let run = run_filter(&mut filter, imu, speeds, config.nominal_factor)?;
    Ok(ProblemOneResult { coarse_attitude: attitude, run })
}
