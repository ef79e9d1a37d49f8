//! Numerical observability of the error state along a trajectory.

use nalgebra::DMatrix;

use super::filter::FilterConfig;
use super::model::*;
use crate::earth::{EarthModel, Vec3};
use crate::error::{Error, Result};
use crate::sim::Trajectory;
use crate::strapdown::NavState;

/// Linearization point at the end of one propagation interval.
#[derive(Debug, Clone, Copy)]
pub struct LinearizationPoint {
    pub nav: NavState,
    pub specific_force_n: Vec3,
    pub omega_ib_b: Vec3,
    /// length of the interval ending here, s
    pub dt: f64,
    /// a measurement is taken at this point
    pub measured: bool,
}

#[derive(Debug, Clone)]
pub struct ObservabilityReport {
    /// descending
    pub singular_values: Vec<f64>,
    pub rank: usize,
    /// right singular vectors of the unobservable directions, as columns
    pub null_space: DMatrix<f64>,
}

/// Samples a trajectory every `dt` over `[start, end]` with a measurement
/// every `measure_every` samples.
pub fn sample_trajectory(
    traj: &Trajectory,
    start: f64,
    end: f64,
    dt: f64,
    measure_every: usize,
) -> Result<Vec<LinearizationPoint>> {
    let n = ((end - start) / dt).round() as usize;
    (1..=n)
        .map(|k| {
            let kin = traj.kinematics(start + k as f64 * dt)?;
            Ok(LinearizationPoint {
                nav: kin.nav,
                specific_force_n: kin.nav.attitude * kin.specific_force_b,
                omega_ib_b: kin.omega_ib_b,
                dt,
                measured: k % measure_every == 0,
            })
        })
        .collect()
}

/// Stacks `H_k Phi(t_k, t_0)` with columns scaled by the initial standard
/// deviations and rows by the inverse measurement noise, and counts singular
/// values above `tolerance` times the largest.
pub fn observability(
    earth: &EarthModel,
    points: &[LinearizationPoint],
    calib: &Calibration,
    config: &FilterConfig,
    tolerance: f64,
) -> Result<ObservabilityReport> {
    let scale = config.initial_covariance(calib.factor).diagonal().map(f64::sqrt);
    let noise = [config.odometer_sigma * calib.factor.abs(), config.nhc_sigma, config.nhc_sigma];
    let mut phi = StateMatrix::identity();
    let mut rows: Vec<[f64; STATE_DIM]> = Vec::new();
    for p in points {
        let f = error_dynamics(earth, &DynamicsInput { nav: p.nav, specific_force_n: p.specific_force_n })?;
        phi = transition_matrix(&f, p.dt) * phi;
        if p.measured {
            let h = measurement_jacobian(earth, &p.nav, calib, &p.omega_ib_b, &Vec3::zeros()) * phi;
            for (r, sigma) in noise.iter().enumerate() {
                let mut row = [0.0; STATE_DIM];
                for (c, v) in row.iter_mut().enumerate() {
                    *v = h[(r, c)] * scale[c] / sigma;
                }
                rows.push(row);
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::InvalidInput("no measurement epochs".to_string()));
    }
    let o = DMatrix::from_fn(rows.len(), STATE_DIM, |r, c| rows[r][c]);
    let svd = o.svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::Numerical("SVD failed".to_string()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|a, b| svd.singular_values[*b].total_cmp(&svd.singular_values[*a]));
    let singular_values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let cutoff = tolerance * singular_values[0];
    let rank = singular_values.iter().filter(|s| **s > cutoff).count();
    let null: Vec<_> = order[rank..]
        .iter()
        .map(|&i| v_t.row(i).transpose())
        .collect();
    let null_space = if null.is_empty() { DMatrix::zeros(STATE_DIM, 0) } else { DMatrix::from_columns(&null) };
    Ok(ObservabilityReport { singular_values, rank, null_space })
}
