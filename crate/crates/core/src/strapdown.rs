//! Two-sample strapdown mechanization in the NUE frame.
//!
//! One update interval `T` consumes two IMU sub-interval increments. Attitude
//! uses the coning-compensated rotation vector, velocity the rotation plus
//! sculling compensated specific-force increment, and Coriolis, gravity and
//! frame rates are evaluated at the interval midpoint.

use serde::{Deserialize, Serialize};

use crate::earth::{skew, Dcm, EarthModel, GeodeticPosition, Vec3};
use crate::error::{Error, Result};

/// Sanity bound on a single gyro increment, rad.
pub const MAX_INCREMENT_ANGLE: f64 = 0.5;
/// Land-vehicle speed sanity bound, m/s.
pub const MAX_SPEED: f64 = 150.0;

/// Gyro and accelerometer output over one IMU sub-interval ending at `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImuIncrement {
    /// end of the sub-interval, s
    pub t: f64,
    /// incremental angle, rad
    pub dtheta: Vec3,
    /// incremental velocity, m/s
    pub dv: Vec3,
}

/// Attitude `C_b^n`, NUE velocity and geodetic position at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NavState {
    pub attitude: Dcm,
    pub velocity: Vec3,
    pub position: GeodeticPosition,
    pub t: f64,
}

impl NavState {
    pub fn validate(&self) -> Result<()> {
        if self.attitude.orthonormality_error() > 1e-6 {
            return Err(Error::Numerical("attitude lost orthonormality".to_string()));
        }
        if !(self.velocity.norm() < MAX_SPEED) {
            return Err(Error::Numerical(format!(
                "velocity {:.1} m/s exceeds the land-vehicle bound",
                self.velocity.norm()
            )));
        }
        Ok(())
    }
}

/// Coning-compensated body rotation vector over the update interval.
pub fn coning_rotation_vector(dtheta1: &Vec3, dtheta2: &Vec3) -> Vec3 {
    dtheta1 + dtheta2 + dtheta1.cross(dtheta2) * (2.0 / 3.0)
}

/// Specific-force velocity increment in the body frame at the start of the
/// interval, with rotation and two-sample sculling compensation.
pub fn sculling_velocity(dtheta1: &Vec3, dtheta2: &Vec3, dv1: &Vec3, dv2: &Vec3) -> Vec3 {
    let dth = dtheta1 + dtheta2;
    let dv = dv1 + dv2;
    dv + dth.cross(&dv) * 0.5 + (dtheta1.cross(dv2) + dv1.cross(dtheta2)) * (2.0 / 3.0)
}

/// Frame rates and gravity evaluated for one update interval.
#[derive(Debug, Clone, Copy)]
pub struct FrameRates {
    pub earth_rate: Vec3,
    pub transport_rate: Vec3,
    pub gravity: Vec3,
}

impl FrameRates {
    pub fn at(earth: &EarthModel, p: &GeodeticPosition, v: &Vec3) -> Result<Self> {
        Ok(Self {
            earth_rate: earth.earth_rate_n(p),
            transport_rate: earth.transport_rate(p, v)?,
            gravity: earth.normal_gravity(p),
        })
    }

    pub fn omega_in(&self) -> Vec3 {
        self.earth_rate + self.transport_rate
    }
}

/// Propagates `C_b^n` over one interval given the body rotation vector and the
/// navigation-frame rotation rate.
pub fn attitude_update(attitude: &Dcm, body_rotation: &Vec3, omega_in: &Vec3, dt: f64) -> Dcm {
    let nav_rotation = Dcm::from_rotation_vector(&(-omega_in * dt));
    (nav_rotation * *attitude * Dcm::from_rotation_vector(body_rotation)).orthonormalized()
}

/// Advances velocity given the body specific-force increment (see
/// [`sculling_velocity`]) with midpoint Coriolis and gravity.
pub fn velocity_update(
    attitude: &Dcm,
    velocity: &Vec3,
    specific_force_increment: &Vec3,
    rates: &FrameRates,
    velocity_mid: &Vec3,
    dt: f64,
) -> Vec3 {
    let zeta = rates.omega_in() * dt;
    let dv_sf = (nalgebra::Matrix3::identity() - skew(&zeta) * 0.5) * (attitude * specific_force_increment);
    let coriolis = (rates.earth_rate * 2.0 + rates.transport_rate).cross(velocity_mid);
    velocity + dv_sf + (rates.gravity - coriolis) * dt
}

/// Trapezoidal position update: `R_c` is evaluated half way along the step.
pub fn position_update(
    earth: &EarthModel,
    position: &GeodeticPosition,
    v_old: &Vec3,
    v_new: &Vec3,
    dt: f64,
) -> Result<GeodeticPosition> {
    let v_mean = (v_old + v_new) * 0.5;
    let half = earth.displace(position, &(v_mean * (0.5 * dt)))?;
    let rc = earth.curvature_matrix(&half)?;
    let dp = rc * v_mean * dt;
    GeodeticPosition::new(
        position.longitude + dp[0],
        position.latitude + dp[1],
        position.height + dp[2],
    )
}

/// Per-interval quantities needed by the error-state filter.
#[derive(Debug, Clone, Copy)]
pub struct StepOutput {
    pub dt: f64,
    /// bias-compensated body angular rate over the interval, rad/s
    pub omega_ib_b: Vec3,
    /// mean specific force in the navigation frame, m/s^2
    pub specific_force_n: Vec3,
}

/// Strapdown integrator that owns its navigation state.
#[derive(Debug, Clone)]
pub struct Mechanizer {
    earth: EarthModel,
    state: NavState,
    gyro_bias: Vec3,
    accel_bias: Vec3,
    last: Option<StepOutput>,
}

impl Mechanizer {
    pub fn new(earth: EarthModel, state: NavState) -> Self {
        Self {
            earth,
            state,
            gyro_bias: Vec3::zeros(),
            accel_bias: Vec3::zeros(),
            last: None,
        }
    }

    pub fn earth(&self) -> &EarthModel {
        &self.earth
    }

    pub fn state(&self) -> &NavState {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut NavState {
        &mut self.state
    }

    pub fn biases(&self) -> (Vec3, Vec3) {
        (self.gyro_bias, self.accel_bias)
    }

    /// Sets the sensor biases removed from every increment.
    pub fn set_biases(&mut self, gyro_bias: Vec3, accel_bias: Vec3) {
        self.gyro_bias = gyro_bias;
        self.accel_bias = accel_bias;
    }

    pub fn last_step(&self) -> Option<&StepOutput> {
        self.last.as_ref()
    }

    /// One update interval from two consecutive increments.
    pub fn step(&mut self, first: &ImuIncrement, second: &ImuIncrement) -> Result<StepOutput> {
        let t0 = self.state.t;
        if !(first.t > t0 && second.t > first.t) {
            return Err(Error::NonMonotonicTime {
                previous: t0,
                current: if first.t > t0 { second.t } else { first.t },
            });
        }
        for inc in [first, second] {
            if inc.dtheta.norm() >= MAX_INCREMENT_ANGLE {
                return Err(Error::InvalidInput(format!(
                    "gyro increment of {:.3} rad at t = {}",
                    inc.dtheta.norm(),
                    inc.t
                )));
            }
        }
        let dt = second.t - t0;
        let dt1 = first.t - t0;
        let dt2 = second.t - first.t;
        let dth1 = first.dtheta - self.gyro_bias * dt1;
        let dth2 = second.dtheta - self.gyro_bias * dt2;
        let dv1 = first.dv - self.accel_bias * dt1;
        let dv2 = second.dv - self.accel_bias * dt2;

        let body_rotation = coning_rotation_vector(&dth1, &dth2);
        let sf_body = sculling_velocity(&dth1, &dth2, &dv1, &dv2);

        let s = self.state;
        // Predictor: rates at the start give a midpoint state for the corrector.
        let rates0 = FrameRates::at(&self.earth, &s.position, &s.velocity)?;
        let v_pred = velocity_update(&s.attitude, &s.velocity, &sf_body, &rates0, &s.velocity, dt);
        let v_mid = (s.velocity + v_pred) * 0.5;
        let p_mid = self.earth.displace(&s.position, &(v_mid * (0.5 * dt)))?;
        let rates = FrameRates::at(&self.earth, &p_mid, &v_mid)?;
        let v_corr = velocity_update(&s.attitude, &s.velocity, &sf_body, &rates, &v_mid, dt);
        // second pass: Coriolis at the refined midpoint velocity
        let v_mid = (s.velocity + v_corr) * 0.5;
        let v_new = velocity_update(&s.attitude, &s.velocity, &sf_body, &rates, &v_mid, dt);

        let c_new = attitude_update(&s.attitude, &body_rotation, &rates.omega_in(), dt);
        let p_new = position_update(&self.earth, &s.position, &s.velocity, &v_new, dt)?;

        let specific_force_n = (s.attitude * sf_body) / dt;
        self.state = NavState { attitude: c_new, velocity: v_new, position: p_new, t: second.t };
        let out = StepOutput {
            dt,
            omega_ib_b: (dth1 + dth2) / dt,
            specific_force_n,
        };
        self.last = Some(out);
        Ok(out)
    }

    /// Mechanizes a whole increment stream (pairs), returning the state after
    /// every update interval.
    pub fn run(&mut self, increments: &[ImuIncrement]) -> Result<Vec<NavState>> {
        let mut out = Vec::with_capacity(increments.len() / 2);
        for pair in increments.chunks_exact(2) {
            self.step(&pair[0], &pair[1])?;
            out.push(self.state);
        }
        Ok(out)
    }
}
