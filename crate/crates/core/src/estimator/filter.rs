//! Closed-loop error-state Kalman filter around the strapdown mechanization.

use log::{debug, warn};
use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use super::model::*;
use crate::earth::{Dcm, EarthModel, Vec3};
use crate::error::{Error, Result};
use crate::strapdown::{ImuIncrement, Mechanizer, NavState};

const DEG: f64 = std::f64::consts::PI / 180.0;
const DEG_PER_HOUR: f64 = DEG / 3600.0;
const MICRO_G: f64 = 9.80665e-6;

/// One-sigma initial uncertainties.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialSigma {
    /// rad, NUE (north/east are level, up is heading)
    pub attitude: Vec3,
    /// m/s
    pub velocity: f64,
    /// m
    pub position: f64,
    /// rad/s
    pub gyro_bias: f64,
    /// m/s^2
    pub accel_bias: f64,
    /// rad
    pub misalignment: f64,
    /// m
    pub lever_arm: f64,
    /// fraction of the factor
    pub factor: f64,
}

/// Continuous process-noise densities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessNoise {
    /// rad/sqrt(s)
    pub angle_random_walk: f64,
    /// m/s/sqrt(s)
    pub velocity_random_walk: f64,
    /// rad/s/sqrt(s)
    pub gyro_bias_walk: f64,
    /// m/s^2/sqrt(s)
    pub accel_bias_walk: f64,
    /// rad/sqrt(s)
    pub misalignment_walk: f64,
    /// m/sqrt(s)
    pub lever_arm_walk: f64,
    /// fraction/sqrt(s)
    pub factor_walk: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub initial: InitialSigma,
    pub process: ProcessNoise,
    /// forward-speed noise, m/s
    pub odometer_sigma: f64,
    /// lateral and vertical virtual-measurement noise, m/s
    pub nhc_sigma: f64,
    /// zero-velocity noise, m/s
    pub zupt_sigma: f64,
    /// Mahalanobis gate
    pub gate: f64,
    pub estimate_biases: bool,
    pub estimate_calibration: bool,
    pub use_nhc: bool,
    pub use_zupt: bool,
    /// covariance propagation interval, s
    pub propagation_interval: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            initial: InitialSigma {
                attitude: Vec3::new(0.02 * DEG, 0.2 * DEG, 0.02 * DEG),
                velocity: 0.05,
                position: 1.0,
                gyro_bias: 0.02 * DEG_PER_HOUR,
                accel_bias: 100.0 * MICRO_G,
                misalignment: 1.0 * DEG,
                lever_arm: 1.0,
                factor: 0.02,
            },
            process: ProcessNoise {
                angle_random_walk: 0.002 * DEG / 60.0,
                velocity_random_walk: 5.0 * MICRO_G,
                gyro_bias_walk: 0.001 * DEG_PER_HOUR / 60.0,
                accel_bias_walk: 1.0 * MICRO_G / 60.0,
                misalignment_walk: 0.0,
                lever_arm_walk: 0.0,
                factor_walk: 1e-3 / 60.0,
            },
            odometer_sigma: 0.05,
            nhc_sigma: 0.05,
            zupt_sigma: 0.01,
            gate: 3.5,
            estimate_biases: true,
            estimate_calibration: true,
            use_nhc: true,
            use_zupt: true,
            propagation_interval: 0.1,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        let i = &self.initial;
        let p = &self.process;
        let positive = [
            i.attitude.min(),
            i.velocity,
            i.position,
            i.gyro_bias,
            i.accel_bias,
            i.misalignment,
            i.lever_arm,
            i.factor,
            self.odometer_sigma,
            self.nhc_sigma,
            self.zupt_sigma,
            self.gate,
            self.propagation_interval,
        ];
        let nonneg = [
            p.angle_random_walk,
            p.velocity_random_walk,
            p.gyro_bias_walk,
            p.accel_bias_walk,
            p.misalignment_walk,
            p.lever_arm_walk,
            p.factor_walk,
        ];
        if positive.iter().all(|v| *v > 0.0 && v.is_finite()) && nonneg.iter().all(|v| *v >= 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidInput("filter variances must be positive".to_string()))
        }
    }

    /// Initial covariance for the given nominal factor.
    pub fn initial_covariance(&self, factor: f64) -> StateMatrix {
        let i = &self.initial;
        let mut d = StateVector::zeros();
        for k in 0..3 {
            d[ATT + k] = i.attitude[k].powi(2);
            d[VEL + k] = i.velocity.powi(2);
            d[POS + k] = i.position.powi(2);
            d[BG + k] = i.gyro_bias.powi(2);
            d[BA + k] = i.accel_bias.powi(2);
            d[LEV + k] = i.lever_arm.powi(2);
        }
        d[PSI] = i.misalignment.powi(2);
        d[THETA] = i.misalignment.powi(2);
        d[FAC] = (i.factor * factor).powi(2);
        let mut p = StateMatrix::from_diagonal(&d);
        self.mask(&mut p);
        p
    }

    /// Continuous process-noise spectral density.
    pub fn process_density(&self, factor: f64) -> StateMatrix {
        let q = &self.process;
        let mut d = StateVector::zeros();
        for k in 0..3 {
            d[ATT + k] = q.angle_random_walk.powi(2);
            d[VEL + k] = q.velocity_random_walk.powi(2);
            d[BG + k] = q.gyro_bias_walk.powi(2);
            d[BA + k] = q.accel_bias_walk.powi(2);
            d[LEV + k] = q.lever_arm_walk.powi(2);
        }
        d[PSI] = q.misalignment_walk.powi(2);
        d[THETA] = q.misalignment_walk.powi(2);
        d[FAC] = (q.factor_walk * factor).powi(2);
        let mut m = StateMatrix::from_diagonal(&d);
        self.mask(&mut m);
        m
    }

    /// Zeroes rows and columns of states held fixed.
    fn mask(&self, m: &mut StateMatrix) {
        let mut fixed = Vec::new();
        if !self.estimate_biases {
            fixed.extend(BG..BA + 3);
        }
        if !self.estimate_calibration {
            fixed.extend(PSI..=FAC);
        }
        for k in fixed {
            m.row_mut(k).fill(0.0);
            m.column_mut(k).fill(0.0);
        }
    }
}

/// Joseph-form Kalman update; returns the correction and the new covariance.
pub fn kalman_update<const N: usize, const M: usize>(
    p: &SMatrix<f64, N, N>,
    innovation: &SVector<f64, M>,
    h: &SMatrix<f64, M, N>,
    r: &SMatrix<f64, M, M>,
) -> Result<(SVector<f64, N>, SMatrix<f64, N, N>)> {
    let s = h * p * h.transpose() + r;
    let s_inv = s
        .try_inverse()
        .ok_or_else(|| Error::Numerical("singular innovation covariance".to_string()))?;
    let k = p * h.transpose() * s_inv;
    let dx = k * innovation;
    let a = SMatrix::<f64, N, N>::identity() - k * h;
    let p_new = a * p * a.transpose() + k * r * k.transpose();
    Ok((dx, (p_new + p_new.transpose()) * 0.5))
}

/// Result of one gated scalar update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarOutcome {
    Accepted { innovation: f64, variance: f64 },
    Rejected { innovation: f64, variance: f64 },
}

/// Gated scalar update, applied in place to `p` and `dx`.
pub fn scalar_update(
    p: &mut StateMatrix,
    dx: &mut StateVector,
    h: &SMatrix<f64, 1, STATE_DIM>,
    innovation: f64,
    r: f64,
    gate: f64,
) -> ScalarOutcome {
    // innovation is relative to the current (not yet fed back) correction
    let nu = innovation - (h * *dx)[0];
    let ph = *p * h.transpose();
    let s = (h * ph)[0] + r;
    if !(s > 0.0) || nu * nu > gate * gate * s {
        return ScalarOutcome::Rejected { innovation: nu, variance: s };
    }
    let k = ph / s;
    *dx += k * nu;
    let a = StateMatrix::identity() - k * h;
    let p_new = a * *p * a.transpose() + k * k.transpose() * r;
    *p = (p_new + p_new.transpose()) * 0.5;
    ScalarOutcome::Accepted { innovation: nu, variance: s }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub accepted: u64,
    pub rejected: u64,
    pub zupts: u64,
}

/// A 1 Hz forward-speed observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedObservation {
    pub t: f64,
    /// m/s measured with the nominal factor
    pub speed: f64,
    pub stationary: bool,
}

/// Strapdown mechanization plus error-state covariance and feedback.
#[derive(Debug, Clone)]
pub struct ErrorStateFilter {
    config: FilterConfig,
    mech: Mechanizer,
    calib: Calibration,
    p: StateMatrix,
    q: StateMatrix,
    acc_dt: f64,
    acc_force: Vec3,
    omega_ib: Vec3,
    stats: UpdateStats,
}

impl ErrorStateFilter {
    pub fn new(earth: EarthModel, config: FilterConfig, nav: NavState, calib: Calibration) -> Result<Self> {
        config.validate()?;
        nav.validate()?;
        let p = config.initial_covariance(calib.factor);
        Self::with_covariance(earth, config, nav, calib, p)
    }

    pub fn with_covariance(
        earth: EarthModel,
        config: FilterConfig,
        nav: NavState,
        calib: Calibration,
        mut p: StateMatrix,
    ) -> Result<Self> {
        config.validate()?;
        config.mask(&mut p);
        let q = config.process_density(calib.factor);
        Ok(Self {
            config,
            mech: Mechanizer::new(earth, nav),
            calib,
            p,
            q,
            acc_dt: 0.0,
            acc_force: Vec3::zeros(),
            omega_ib: Vec3::zeros(),
            stats: UpdateStats::default(),
        })
    }

    pub fn config(&self) -> &FilterConfig {
        &self.config
    }

    pub fn nav(&self) -> &NavState {
        self.mech.state()
    }

    pub fn calibration(&self) -> &Calibration {
        &self.calib
    }

    pub fn biases(&self) -> (Vec3, Vec3) {
        self.mech.biases()
    }

    pub fn set_biases(&mut self, gyro: Vec3, accel: Vec3) {
        self.mech.set_biases(gyro, accel);
    }

    pub fn covariance(&self) -> &StateMatrix {
        &self.p
    }

    pub fn sigma(&self) -> StateVector {
        self.p.diagonal().map(|v| v.max(0.0).sqrt())
    }

    pub fn stats(&self) -> UpdateStats {
        self.stats
    }

    pub fn earth(&self) -> &EarthModel {
        self.mech.earth()
    }

    /// Raw (uncompensated) body rate over the last update interval.
    pub fn omega_ib_raw(&self) -> Vec3 {
        self.omega_ib + self.mech.biases().0
    }

    /// Mechanizes two increments and propagates the covariance when due.
    pub fn step(&mut self, first: &ImuIncrement, second: &ImuIncrement) -> Result<()> {
        let out = self.mech.step(first, second)?;
        self.mech.state().validate()?;
        self.omega_ib = out.omega_ib_b;
        self.acc_dt += out.dt;
        self.acc_force += out.specific_force_n * out.dt;
        if self.acc_dt >= self.config.propagation_interval - 1e-9 {
            self.propagate()?;
        }
        Ok(())
    }

    /// Propagates the covariance over the accumulated interval.
    pub fn propagate(&mut self) -> Result<()> {
        if self.acc_dt <= 0.0 {
            return Ok(());
        }
        let dt = self.acc_dt;
        let input = DynamicsInput { nav: *self.mech.state(), specific_force_n: self.acc_force / dt };
        let f = error_dynamics(self.mech.earth(), &input)?;
        let phi = transition_matrix(&f, dt);
        let qd = (phi * self.q * phi.transpose() + self.q) * (0.5 * dt);
        let p = phi * self.p * phi.transpose() + qd;
        self.p = (p + p.transpose()) * 0.5;
        self.acc_dt = 0.0;
        self.acc_force = Vec3::zeros();
        self.guard_covariance();
        Ok(())
    }

    fn guard_covariance(&mut self) {
        if self.p.diagonal().iter().all(|d| *d >= 0.0 && d.is_finite()) {
            return;
        }
        warn!("covariance lost positive definiteness; flooring eigenvalues");
        let eig = self.p.symmetric_eigen();
        let vals = eig.eigenvalues.map(|v| if v.is_finite() { v.max(1e-18) } else { 1e-18 });
        self.p = eig.eigenvectors * StateMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
    }

    /// Applies a correction to the navigation state, biases and calibration.
    pub fn feedback(&mut self, dx: &StateVector) -> Result<()> {
        let phi = Vec3::new(dx[ATT], dx[ATT + 1], dx[ATT + 2]);
        let dv = Vec3::new(dx[VEL], dx[VEL + 1], dx[VEL + 2]);
        let dp = Vec3::new(dx[POS], dx[POS + 1], dx[POS + 2]);
        let earth = *self.mech.earth();
        let s = self.mech.state_mut();
        s.attitude = (Dcm::from_rotation_vector(&phi) * s.attitude).orthonormalized();
        s.velocity += dv;
        s.position = earth.displace(&s.position, &dp)?;
        let (bg, ba) = self.mech.biases();
        self.mech.set_biases(
            bg + Vec3::new(dx[BG], dx[BG + 1], dx[BG + 2]),
            ba + Vec3::new(dx[BA], dx[BA + 1], dx[BA + 2]),
        );
        self.calib = self.calib.corrected(
            dx[PSI],
            dx[THETA],
            &Vec3::new(dx[LEV], dx[LEV + 1], dx[LEV + 2]),
            dx[FAC],
        );
        Ok(())
    }

    /// Odometer and nonholonomic update, or a zero-velocity update at rest.
    pub fn update_speed(&mut self, obs: &SpeedObservation, f_nominal: f64) -> Result<()> {
        self.propagate()?;
        let mut dx = StateVector::zeros();
        if obs.stationary && self.config.use_zupt {
            let r = self.config.zupt_sigma.powi(2);
            let v = self.mech.state().velocity;
            for k in 0..3 {
                let mut h = SMatrix::<f64, 1, STATE_DIM>::zeros();
                h[(0, VEL + k)] = 1.0;
                let outcome = scalar_update(&mut self.p, &mut dx, &h, -v[k], r, f64::INFINITY);
                self.record(outcome, "zupt");
            }
            self.stats.zupts += 1;
        } else {
            let earth = *self.mech.earth();
            let nav = *self.mech.state();
            let w = self.omega_ib_raw();
            let bg = self.mech.biases().0;
            let y_hat = measurement_predict(&earth, &nav, &self.calib, &w, &bg);
            let h = measurement_jacobian(&earth, &nav, &self.calib, &w, &bg);
            let y = Vec3::new(obs.speed * f_nominal, 0.0, 0.0);
            let rows = if self.config.use_nhc { 3 } else { 1 };
            for k in 0..rows {
                let sigma = if k == 0 {
                    self.config.odometer_sigma * self.calib.factor.abs()
                } else {
                    self.config.nhc_sigma
                };
                let outcome = scalar_update(
                    &mut self.p,
                    &mut dx,
                    &h.fixed_rows::<1>(k).into_owned(),
                    y[k] - y_hat[k],
                    sigma * sigma,
                    self.config.gate,
                );
                self.record(outcome, if k == 0 { "odometer" } else { "nhc" });
            }
        }
        self.feedback(&dx)
    }

    fn record(&mut self, outcome: ScalarOutcome, what: &str) {
        match outcome {
            ScalarOutcome::Accepted { .. } => self.stats.accepted += 1,
            ScalarOutcome::Rejected { innovation, variance } => {
                self.stats.rejected += 1;
                debug!(
                    "{what} update gated at t = {:.2}: innovation {innovation:.4}, sigma {:.4}",
                    self.mech.state().t,
                    variance.sqrt()
                );
            }
        }
    }
}
