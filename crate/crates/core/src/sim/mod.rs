//! Ground-truth trajectories and synthetic IMU/odometer data.

pub mod motions;
pub mod profile;
mod quadrature;
pub mod sensors;
pub mod trajectory;

use std::f64::consts::PI;

pub use profile::{RouteBuilder, SegmentKind, TrajectorySegment};
pub use sensors::{
    ideal_increments, synthesize_imu, synthesize_odometer, ImuErrorModel, ImuGrade, OdometerModel, SlipEvent,
};
pub use trajectory::{Kinematics, Mounting, Sway, Trajectory, TrajectorySpec};

use crate::earth::{EarthModel, GeodeticPosition, MisalignmentAngles, Vec3};
use crate::error::Result;
use crate::odometer::OdometerReading;
use crate::strapdown::ImuIncrement;

/// Default IMU sub-interval, s (200 Hz).
pub const IMU_SUB_INTERVAL: f64 = 0.005;
/// Default odometer sampling rate, Hz.
pub const ODOMETER_RATE_HZ: f64 = 100.0;
/// Default odometer scale factor, pulses/m.
pub const DEFAULT_ODOMETER_FACTOR: f64 = 8.6;

/// Installation used by the reference scenarios.
pub fn reference_mounting() -> Mounting {
    Mounting {
        misalignment: MisalignmentAngles::new(0.5f64.to_radians(), 0.3f64.to_radians()),
        lever_arm: Vec3::new(1.0, 0.5, 0.3),
    }
}

pub fn reference_origin() -> GeodeticPosition {
    GeodeticPosition {
        longitude: 114.0f64.to_radians(),
        latitude: 28.2f64.to_radians(),
        height: 60.0,
    }
}

/// Five-minute standstill followed by about 30 min and 20 km of mixed driving
/// with turns, hills and one stop.
pub fn calibration_route() -> Vec<TrajectorySegment> {
    let mut b = RouteBuilder::new().pause(300.0).ramp_to(15.0, 12.0);
    for i in 0..6 {
        let dir = if i % 2 == 0 { 1.0 } else { -1.0 };
        b = b
            .grade(20.0, 0.03)
            .grade(20.0, -0.03)
            .straight(30.0)
            .turn(dir * PI / 2.0, 0.12)
            .ramp_to(10.0, 15.0)
            .straight(30.0)
            .turn(-dir * PI / 2.0, 0.08)
            .grade(20.0, -0.03)
            .grade(20.0, 0.03)
            .ramp_to(10.0, 8.0)
            .turn(dir * PI, 0.15)
            .ramp_to(10.0, 12.0)
            .straight(30.0);
        if i == 2 {
            b = b.ramp_to(12.0, 0.0).pause(30.0).ramp_to(15.0, 12.0);
        }
    }
    b.ramp_to(15.0, 0.0).pause(10.0).build()
}

/// Short standstill then a little over five minutes of driving, for
/// in-motion alignment.
pub fn alignment_route() -> Vec<TrajectorySegment> {
    let mut b = RouteBuilder::new().pause(2.0).ramp_to(12.0, 10.0);
    for i in 0..4 {
        let dir = if i % 2 == 0 { 1.0 } else { -1.0 };
        b = b
            .straight(15.0)
            .turn(dir * PI / 2.0, 0.1)
            .ramp_to(8.0, 14.0)
            .grade(15.0, 0.02)
            .grade(15.0, -0.02)
            .turn(-dir * PI / 3.0, 0.1)
            .ramp_to(8.0, 10.0);
    }
    b.straight(10.0).build()
}

/// Standstill then a straight drive with speed changes and no turns or hills.
pub fn straight_route(drive_seconds: f64) -> Vec<TrajectorySegment> {
    RouteBuilder::new()
        .pause(300.0)
        .ramp_to(15.0, 12.0)
        .straight(drive_seconds / 2.0)
        .ramp_to(10.0, 16.0)
        .straight(drive_seconds / 2.0)
        .ramp_to(15.0, 0.0)
        .build()
}

pub fn reference_spec(segments: Vec<TrajectorySegment>) -> TrajectorySpec {
    TrajectorySpec {
        origin: reference_origin(),
        initial_heading: 30f64.to_radians(),
        segments,
        sway: Some(Sway::default()),
        mounting: reference_mounting(),
    }
}

/// Sampling of the synthetic sensors.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SamplingConfig {
    pub imu_sub_interval: f64,
    pub odometer_rate_hz: f64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self { imu_sub_interval: IMU_SUB_INTERVAL, odometer_rate_hz: ODOMETER_RATE_HZ }
    }
}

/// A synthetic data set together with its truth.
#[derive(Debug, Clone)]
pub struct SimulatedRun {
    pub trajectory: Trajectory,
    pub imu: Vec<ImuIncrement>,
    pub odometer: Vec<OdometerReading>,
    pub imu_model: ImuErrorModel,
    pub odometer_model: OdometerModel,
}

/// Noise-free increments of a trajectory, reusable across error realisations.
#[derive(Debug, Clone)]
pub struct CleanData {
    pub trajectory: Trajectory,
    pub imu: Vec<ImuIncrement>,
    pub sampling: SamplingConfig,
}

impl CleanData {
    pub fn new(earth: EarthModel, spec: TrajectorySpec, sampling: SamplingConfig) -> Result<Self> {
        let trajectory = Trajectory::new(earth, spec)?;
        let imu = ideal_increments(&trajectory, sampling.imu_sub_interval)?;
        Ok(Self { trajectory, imu, sampling })
    }

    /// Applies an IMU error realisation and an odometer model.
    pub fn realise(&self, imu_model: &ImuErrorModel, odometer_model: &OdometerModel) -> Result<SimulatedRun> {
        Ok(SimulatedRun {
            trajectory: self.trajectory.clone(),
            imu: imu_model.corrupt(&self.imu)?,
            odometer: synthesize_odometer(&self.trajectory, odometer_model, self.sampling.odometer_rate_hz)?,
            imu_model: *imu_model,
            odometer_model: odometer_model.clone(),
        })
    }
}
