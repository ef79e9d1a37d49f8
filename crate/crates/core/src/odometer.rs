//! Odometer pulse pre-filter: a constant-acceleration Kalman filter turning
//! cumulative pulse counts into 1 Hz forward-speed estimates.

use nalgebra::{Matrix2, RowVector2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cumulative pulse count at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdometerReading {
    pub t: f64,
    pub pulses: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrefilterConfig {
    /// white acceleration-noise PSD, (m/s^2)^2/Hz
    pub accel_psd: f64,
    /// measurement noise, pulses
    pub measurement_sigma_pulses: f64,
    pub output_rate_hz: f64,
    pub initial_speed_sigma: f64,
    pub initial_accel_sigma: f64,
}

impl Default for PrefilterConfig {
    fn default() -> Self {
        Self {
            accel_psd: 5.0,
            measurement_sigma_pulses: 0.5,
            output_rate_hz: 1.0,
            initial_speed_sigma: 1.0,
            initial_accel_sigma: 1.0,
        }
    }
}

impl PrefilterConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = [
            self.accel_psd,
            self.measurement_sigma_pulses,
            self.output_rate_hz,
            self.initial_speed_sigma,
            self.initial_accel_sigma,
        ]
        .iter()
        .all(|v| *v > 0.0 && v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput("prefilter tuning values must be positive".to_string()))
        }
    }
}

/// Forward speed and acceleration with their covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedEstimate {
    pub t: f64,
    /// m/s
    pub speed: f64,
    /// m/s^2
    pub acceleration: f64,
    pub covariance: Matrix2<f64>,
    /// no pulses over the preceding output interval
    pub stationary: bool,
}

impl SpeedEstimate {
    pub fn at_rest(t: f64, config: &PrefilterConfig) -> Self {
        Self {
            t,
            speed: 0.0,
            acceleration: 0.0,
            covariance: Matrix2::from_diagonal(&Vector2::new(
                config.initial_speed_sigma.powi(2),
                config.initial_accel_sigma.powi(2),
            )),
            stationary: true,
        }
    }

    fn state(&self) -> Vector2<f64> {
        Vector2::new(self.speed, self.acceleration)
    }
}

fn predict(est: &SpeedEstimate, dt: f64, config: &PrefilterConfig) -> SpeedEstimate {
    let f = Matrix2::new(1.0, dt, 0.0, 1.0);
    let q = config.accel_psd * Matrix2::new(dt.powi(3) / 3.0, dt * dt / 2.0, dt * dt / 2.0, dt);
    let x = f * est.state();
    let p = f * est.covariance * f.transpose() + q;
    SpeedEstimate {
        t: est.t + dt,
        speed: x[0],
        acceleration: x[1],
        covariance: (p + p.transpose()) * 0.5,
        stationary: est.stationary,
    }
}

/// One propagate-and-update cycle for a pulse increment over `dt`.
pub fn prefilter_step(
    est: &SpeedEstimate,
    increment: f64,
    dt: f64,
    f_nominal: f64,
    config: &PrefilterConfig,
) -> Result<SpeedEstimate> {
    if !(dt > 0.0) {
        return Err(Error::NonMonotonicTime { previous: est.t, current: est.t + dt });
    }
    if !(f_nominal > 0.0) {
        return Err(Error::InvalidInput("nominal odometer factor must be positive".to_string()));
    }
    if increment < 0.0 {
        return Err(Error::NegativePulseIncrement { t: est.t + dt, increment });
    }
    let pred = predict(est, dt, config);
    // distance over the interval seen from the state at its end
    let h = RowVector2::new(dt, -dt * dt / 2.0);
    let r = (config.measurement_sigma_pulses / f_nominal).powi(2);
    let p = pred.covariance;
    let s = (h * p * h.transpose())[0] + r;
    let k = p * h.transpose() / s;
    let innovation = increment / f_nominal - (h * pred.state())[0];
    let x = pred.state() + k * innovation;
    let a = Matrix2::identity() - k * h;
    let p = a * p * a.transpose() + k * k.transpose() * r;
    Ok(SpeedEstimate {
        t: pred.t,
        speed: x[0],
        acceleration: x[1],
        covariance: (p + p.transpose()) * 0.5,
        stationary: pred.stationary,
    })
}

/// Streaming pre-filter emitting estimates on a fixed output grid.
#[derive(Debug, Clone)]
pub struct OdometerPrefilter {
    config: PrefilterConfig,
    f_nominal: f64,
    est: SpeedEstimate,
    last: OdometerReading,
    next_output: u64,
    pulses_since_output: f64,
}

impl OdometerPrefilter {
    pub fn new(config: PrefilterConfig, f_nominal: f64, first: OdometerReading) -> Result<Self> {
        config.validate()?;
        if !(f_nominal > 0.0 && f_nominal.is_finite()) {
            return Err(Error::InvalidInput("nominal odometer factor must be positive".to_string()));
        }
        let next_output = (first.t * config.output_rate_hz + 1e-9).floor() as u64 + 1;
        Ok(Self {
            config,
            f_nominal,
            est: SpeedEstimate::at_rest(first.t, &config),
            last: first,
            next_output,
            pulses_since_output: 0.0,
        })
    }

    fn epoch(&self) -> f64 {
        self.next_output as f64 / self.config.output_rate_hz
    }

    /// Consumes one reading; returns any output epochs passed.
    pub fn push(&mut self, reading: OdometerReading) -> Result<Vec<SpeedEstimate>> {
        if !(reading.t > self.last.t) {
            return Err(Error::NonMonotonicTime { previous: self.last.t, current: reading.t });
        }
        let increment = reading.pulses - self.last.pulses;
        if increment < 0.0 {
            return Err(Error::NegativePulseIncrement { t: reading.t, increment });
        }
        let mut out = Vec::new();
        // epochs strictly inside the interval get a prediction only
        while self.epoch() < reading.t - 1e-9 {
            let mut e = predict(&self.est, self.epoch() - self.est.t, &self.config);
            e.t = self.epoch();
            e.stationary = self.pulses_since_output == 0.0;
            out.push(e);
            self.pulses_since_output = 0.0;
            self.next_output += 1;
        }
        self.est = prefilter_step(&self.est, increment, reading.t - self.last.t, self.f_nominal, &self.config)?;
        self.est.t = reading.t;
        self.pulses_since_output += increment;
        self.last = reading;
        if (self.epoch() - reading.t).abs() <= 1e-9 {
            let mut e = self.est;
            e.t = self.epoch();
            e.stationary = self.pulses_since_output == 0.0;
            out.push(e);
            self.pulses_since_output = 0.0;
            self.next_output += 1;
        }
        Ok(out)
    }

    pub fn current(&self) -> &SpeedEstimate {
        &self.est
    }
}

/// Filters a whole pulse record.
pub fn prefilter(readings: &[OdometerReading], f_nominal: f64, config: &PrefilterConfig) -> Result<Vec<SpeedEstimate>> {
    let Some(first) = readings.first() else {
        return Err(Error::InvalidInput("empty odometer record".to_string()));
    };
    let mut filter = OdometerPrefilter::new(*config, f_nominal, *first)?;
    let mut out = Vec::with_capacity((readings.len() as f64 / 100.0) as usize + 1);
    for r in &readings[1..] {
        out.extend(filter.push(*r)?);
    }
    Ok(out)
}
