//! Stationary analytic (triad) alignment.

use nalgebra::Matrix3;

use crate::earth::{Dcm, EarthModel, GeodeticPosition, Vec3};
use crate::error::{Error, Result};
use crate::strapdown::ImuIncrement;

/// Latitude above which the gravity/earth-rate triad is treated as degenerate.
pub const MAX_ALIGNMENT_LATITUDE: f64 = 89.0 * std::f64::consts::PI / 180.0;

/// Thresholds on the spread of 1 s averages used to reject motion.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MotionThresholds {
    /// rad/s
    pub gyro: f64,
    /// m/s^2
    pub accel: f64,
}

impl Default for MotionThresholds {
    fn default() -> Self {
        Self { gyro: 2e-5, accel: 5e-3 }
    }
}

/// Mean body rate and specific force over a window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowAverage {
    pub omega: Vec3,
    pub force: Vec3,
    pub duration: f64,
}

/// Averages a window of increments, rejecting it if the vehicle moved.
pub fn average_stationary(
    increments: &[ImuIncrement],
    start: f64,
    thresholds: &MotionThresholds,
) -> Result<WindowAverage> {
    let Some(last) = increments.last() else {
        return Err(Error::InvalidInput("empty alignment window".to_string()));
    };
    let duration = last.t - start;
    if !(duration > 0.0) {
        return Err(Error::InvalidInput("alignment window has no length".to_string()));
    }
    let mut blocks: Vec<(Vec3, Vec3, f64)> = Vec::new();
    let mut prev = start;
    let mut block_end = start + 1.0;
    let mut cur = (Vec3::zeros(), Vec3::zeros(), 0.0);
    let mut total = (Vec3::zeros(), Vec3::zeros());
    for inc in increments {
        if inc.t <= prev {
            return Err(Error::NonMonotonicTime { previous: prev, current: inc.t });
        }
        cur.0 += inc.dtheta;
        cur.1 += inc.dv;
        cur.2 += inc.t - prev;
        total.0 += inc.dtheta;
        total.1 += inc.dv;
        prev = inc.t;
        if inc.t >= block_end - 1e-9 {
            blocks.push(cur);
            cur = (Vec3::zeros(), Vec3::zeros(), 0.0);
            block_end += 1.0;
        }
    }
    let spread = |f: &dyn Fn(&(Vec3, Vec3, f64)) -> Vec3| -> f64 {
        let means: Vec<Vec3> = blocks.iter().map(f).collect();
        let n = means.len() as f64;
        let mean = means.iter().sum::<Vec3>() / n;
        (means.iter().map(|m| (m - mean).norm_squared()).sum::<f64>() / n).sqrt()
    };
    if blocks.len() >= 2 {
        let g = spread(&|b| b.0 / b.2);
        let a = spread(&|b| b.1 / b.2);
        if g > thresholds.gyro || a > thresholds.accel {
            return Err(Error::MotionDetected(format!(
                "1 s rate spread {g:.2e} rad/s, force spread {a:.2e} m/s^2"
            )));
        }
    }
    Ok(WindowAverage { omega: total.0 / duration, force: total.1 / duration, duration })
}

fn triad(a: &Vec3, b: &Vec3) -> Option<Matrix3<f64>> {
    let r1 = a.try_normalize(0.0)?;
    let r2 = a.cross(b).try_normalize(0.0)?;
    let r3 = r1.cross(&r2);
    Some(Matrix3::from_columns(&[r1, r2, r3]))
}

/// `C_b^n` from averaged body rate and specific force at a known position.
pub fn static_coarse_align(
    earth: &EarthModel,
    omega_ib_b: &Vec3,
    force_b: &Vec3,
    position: &GeodeticPosition,
) -> Result<Dcm> {
    if position.latitude.abs() >= MAX_ALIGNMENT_LATITUDE {
        return Err(Error::Degenerate(format!(
            "latitude {:.2} deg too high for stationary alignment",
            position.latitude.to_degrees()
        )));
    }
    let g_n = earth.normal_gravity(position);
    let w_n = earth.earth_rate_n(position);
    let body = triad(&-force_b, omega_ib_b);
    let nav = triad(&g_n, &w_n);
    match (body, nav) {
        (Some(b), Some(n)) => Ok(Dcm::project(&(n * b.transpose()))),
        _ => Err(Error::Degenerate("gravity and earth rate are parallel".to_string())),
    }
}
