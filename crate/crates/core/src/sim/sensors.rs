//! IMU and odometer synthesis from an exact trajectory.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::quadrature::{gauss_legendre, GL4};
use super::trajectory::{Kinematics, Trajectory};
use crate::earth::{forward_axis, MisalignmentAngles, Vec3, STANDARD_GRAVITY};
use crate::error::{Error, Result};
use crate::odometer::OdometerReading;
use crate::strapdown::ImuIncrement;

const DEG_PER_HOUR: f64 = std::f64::consts::PI / 180.0 / 3600.0;

/// Error magnitudes of an IMU class; per-run biases are drawn from these.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImuGrade {
    /// 1-sigma gyro bias, rad/s
    pub gyro_bias: f64,
    /// 1-sigma accelerometer bias, m/s^2
    pub accel_bias: f64,
    /// angle random walk, rad/sqrt(s)
    pub angle_random_walk: f64,
    /// velocity random walk, m/s/sqrt(s)
    pub velocity_random_walk: f64,
}

impl ImuGrade {
    /// Ring-laser-gyro navigation grade.
    pub fn navigation() -> Self {
        Self {
            gyro_bias: 0.01 * DEG_PER_HOUR,
            accel_bias: 50e-6 * STANDARD_GRAVITY,
            angle_random_walk: 0.002f64.to_radians() / 60.0,
            velocity_random_walk: 5e-6 * STANDARD_GRAVITY,
        }
    }

    pub fn perfect() -> Self {
        Self { gyro_bias: 0.0, accel_bias: 0.0, angle_random_walk: 0.0, velocity_random_walk: 0.0 }
    }

    /// Draws constant biases for one run.
    pub fn sample(&self, seed: u64) -> ImuErrorModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_b1a5);
        let mut draw = |sigma: f64| {
            Vec3::from_fn(|_, _| sigma * rng.sample::<f64, _>(StandardNormal))
        };
        let gyro_bias = draw(self.gyro_bias);
        let accel_bias = draw(self.accel_bias);
        ImuErrorModel {
            gyro_bias,
            accel_bias,
            angle_random_walk: self.angle_random_walk,
            velocity_random_walk: self.velocity_random_walk,
            seed,
        }
    }
}

/// Constant biases plus white rate noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImuErrorModel {
    /// rad/s
    pub gyro_bias: Vec3,
    /// m/s^2
    pub accel_bias: Vec3,
    /// rad/sqrt(s)
    pub angle_random_walk: f64,
    /// m/s/sqrt(s)
    pub velocity_random_walk: f64,
    pub seed: u64,
}

impl ImuErrorModel {
    pub fn perfect() -> Self {
        ImuGrade::perfect().sample(0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.angle_random_walk >= 0.0 && self.velocity_random_walk >= 0.0) {
            return Err(Error::InvalidInput("random walk coefficients must be nonnegative".to_string()));
        }
        if !(self.gyro_bias.iter().chain(self.accel_bias.iter()).all(|x| x.is_finite())) {
            return Err(Error::InvalidInput("non-finite IMU bias".to_string()));
        }
        Ok(())
    }

    /// Adds biases and noise to error-free increments.
    pub fn corrupt(&self, ideal: &[ImuIncrement]) -> Result<Vec<ImuIncrement>> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut t_prev = 0.0;
        let mut out = Vec::with_capacity(ideal.len());
        for inc in ideal {
            let dt = inc.t - t_prev;
            t_prev = inc.t;
            let mut noise = || Vec3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
            let n_g = noise();
            let n_a = noise();
            out.push(ImuIncrement {
                t: inc.t,
                dtheta: inc.dtheta + self.gyro_bias * dt + n_g * (self.angle_random_walk * dt.sqrt()),
                dv: inc.dv + self.accel_bias * dt + n_a * (self.velocity_random_walk * dt.sqrt()),
            });
        }
        Ok(out)
    }
}

/// Number of whole `step` intervals in `duration`.
fn interval_count(duration: f64, step: f64) -> Result<usize> {
    if !(step > 0.0) {
        return Err(Error::InvalidInput("sampling interval must be positive".to_string()));
    }
    let n = duration / step;
    if (n - n.round()).abs() > 1e-6 {
        return Err(Error::InvalidInput(format!(
            "route duration {duration} s is not a multiple of the {step} s interval"
        )));
    }
    Ok(n.round() as usize)
}

/// Error-free gyro and accelerometer increments over consecutive sub-intervals.
pub fn ideal_increments(traj: &Trajectory, sub_interval: f64) -> Result<Vec<ImuIncrement>> {
    let n = interval_count(traj.duration(), sub_interval)?;
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let a = k as f64 * sub_interval;
        let b = (k + 1) as f64 * sub_interval;
        let mut err = None;
        let (dtheta, dv) = gauss_legendre(&GL4, a, b, |t| match traj.kinematics(t) {
            Ok(kin) => (kin.omega_ib_b, kin.specific_force_b),
            Err(e) => {
                err = Some(e);
                (Vec3::zeros(), Vec3::zeros())
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        out.push(ImuIncrement { t: b, dtheta, dv });
    }
    Ok(out)
}

/// IMU output stream for one error realisation.
pub fn synthesize_imu(traj: &Trajectory, model: &ImuErrorModel, sub_interval: f64) -> Result<Vec<ImuIncrement>> {
    model.corrupt(&ideal_increments(traj, sub_interval)?)
}

/// Multiplicative speed error over a time window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlipEvent {
    pub start: f64,
    pub end: f64,
    /// fractional speed error, e.g. 0.05 for 5 % over-count
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdometerModel {
    /// pulses/m at t = 0 (signed to allow the sign-flipped parameterisations)
    pub factor: f64,
    /// fractional change per hour
    #[serde(default)]
    pub scale_drift_per_hour: f64,
    #[serde(default)]
    pub quantize: bool,
    /// fractional pulse already accumulated at t = 0, in [0, 1)
    #[serde(default)]
    pub initial_phase: f64,
    /// m, body axes
    pub lever_arm: Vec3,
    pub misalignment: MisalignmentAngles,
    #[serde(default)]
    pub slips: Vec<SlipEvent>,
}

impl OdometerModel {
    /// A model consistent with the physical mounting of `traj`.
    pub fn matching(traj: &Trajectory, factor: f64) -> Self {
        let m = traj.mounting();
        Self {
            factor,
            scale_drift_per_hour: 0.0,
            quantize: false,
            initial_phase: 0.0,
            lever_arm: m.lever_arm,
            misalignment: m.misalignment,
            slips: Vec::new(),
        }
    }

    pub fn factor_at(&self, t: f64) -> f64 {
        self.factor * (1.0 + self.scale_drift_per_hour * t / 3600.0)
    }

    fn slip_gain(&self, t: f64) -> f64 {
        self.slips
            .iter()
            .filter(|s| t >= s.start && t < s.end)
            .fold(1.0, |g, s| g * (1.0 + s.ratio))
    }

    /// Instantaneous pulse rate for a truth state.
    pub fn pulse_rate(&self, t: f64, kin: &Kinematics) -> f64 {
        let u = kin.nav.attitude.transpose() * kin.nav.velocity + kin.omega_eb_b.cross(&self.lever_arm);
        let axis = forward_axis(self.misalignment.yaw, self.misalignment.pitch);
        self.factor_at(t) * self.slip_gain(t) * axis.dot(&u)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.factor.is_finite() && self.factor != 0.0) {
            return Err(Error::InvalidInput("odometer factor must be finite and nonzero".to_string()));
        }
        if !(0.0..1.0).contains(&self.initial_phase) {
            return Err(Error::InvalidInput("initial pulse phase must lie in [0, 1)".to_string()));
        }
        if self.slips.iter().any(|s| !(s.end > s.start) || !(s.ratio > -1.0)) {
            return Err(Error::InvalidInput("slip windows need end > start and ratio > -1".to_string()));
        }
        Ok(())
    }
}

/// Cumulative odometer pulse counts sampled at `rate_hz`, starting from zero at t = 0.
pub fn synthesize_odometer(traj: &Trajectory, model: &OdometerModel, rate_hz: f64) -> Result<Vec<OdometerReading>> {
    model.validate()?;
    let step = 1.0 / rate_hz;
    let n = interval_count(traj.duration(), step)?;
    let mut out = Vec::with_capacity(n + 1);
    out.push(OdometerReading { t: 0.0, pulses: 0.0 });
    let mut total = 0.0;
    for k in 0..n {
        let a = k as f64 * step;
        let b = (k + 1) as f64 * step;
        let mut err = None;
        let (dp, _) = gauss_legendre(&GL4, a, b, |t| match traj.kinematics(t) {
            Ok(kin) => (model.pulse_rate(t, &kin), 0.0),
            Err(e) => {
                err = Some(e);
                (0.0, 0.0)
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        total += dp;
        let pulses = if model.quantize { (total + model.initial_phase).floor() } else { total };
        out.push(OdometerReading { t: b, pulses });
    }
    Ok(out)
}
