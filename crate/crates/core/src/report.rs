//! Drift-versus-distance reporting.

use std::fmt::Write as _;

use crate::earth::{attitude_error, EarthModel, Vec3};
use crate::error::{Error, Result};
use crate::estimator::{Calibration, FilterRun, FAC, LEV, PSI, THETA};
use crate::io::{CalibrationRecord, PlotRow};
use crate::strapdown::NavState;

/// Distance below which errors are not expressed as %D, m.
pub const MIN_PERCENT_DISTANCE: f64 = 100.0;

/// Timestamps closer than this are the same epoch, s.
const TIME_MATCH: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftEpoch {
    pub t: f64,
    /// distance travelled along the truth track, m
    pub distance: f64,
    pub horizontal_error: f64,
    /// estimate minus truth, m
    pub height_error: f64,
    /// `None` until `distance` exceeds [`MIN_PERCENT_DISTANCE`]
    pub horizontal_pct: Option<f64>,
    pub height_pct: Option<f64>,
    /// north, up (heading) and east components, deg
    pub attitude_error_deg: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationSample {
    pub t: f64,
    pub calibration: Calibration,
    /// 1-sigma of `[psi, theta, lx, ly, lz, f]`
    pub sigma: [f64; 6],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftSummary {
    pub distance: f64,
    pub final_horizontal_error: f64,
    pub final_height_error: f64,
    pub final_horizontal_pct: Option<f64>,
    pub final_height_pct: Option<f64>,
    /// worst %D once `distance` passes the summary threshold
    pub max_horizontal_pct: Option<f64>,
    pub max_height_pct: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DriftReport {
    pub epochs: Vec<DriftEpoch>,
    pub calibration: Vec<CalibrationSample>,
}

fn percent(error: f64, distance: f64) -> Option<f64> {
    (distance > MIN_PERCENT_DISTANCE).then(|| 100.0 * error / distance)
}

impl DriftReport {
    /// Compares an estimated track with the truth track at the epochs both
    /// contain. The distance is the summed chord length of the truth
    /// positions, so the report depends on nothing but the two tracks.
    pub fn from_tracks(earth: &EarthModel, truth: &[NavState], estimate: &[NavState]) -> Result<Self> {
        let first = truth.first().ok_or_else(|| Error::InvalidInput("empty truth track".to_string()))?;
        let mut distance = 0.0;
        let mut prev = first.position;
        let mut j = 0;
        let mut epochs = Vec::new();
        for tr in truth {
            distance += earth.local_offset(&prev, &tr.position).norm();
            prev = tr.position;
            while j < estimate.len() && estimate[j].t < tr.t - TIME_MATCH {
                j += 1;
            }
            let Some(est) = estimate.get(j).filter(|e| (e.t - tr.t).abs() <= TIME_MATCH) else { continue };
            let d = earth.local_offset(&tr.position, &est.position);
            let horizontal_error = d.x.hypot(d.z);
            let height_error = est.position.height - tr.position.height;
            epochs.push(DriftEpoch {
                t: tr.t,
                distance,
                horizontal_error,
                height_error,
                horizontal_pct: percent(horizontal_error, distance),
                height_pct: percent(height_error.abs(), distance),
                attitude_error_deg: attitude_error(&tr.attitude, &est.attitude).map(f64::to_degrees),
            });
        }
        if epochs.is_empty() {
            return Err(Error::InvalidInput("estimate and truth tracks share no epochs".to_string()));
        }
        Ok(Self { epochs, calibration: Vec::new() })
    }

    /// Report for a filter run, including its calibration history.
    pub fn from_run(earth: &EarthModel, truth: &[NavState], run: &FilterRun) -> Result<Self> {
        let estimate: Vec<NavState> = run.epochs.iter().map(|e| e.nav).collect();
        let mut report = Self::from_tracks(earth, truth, &estimate)?;
        report.calibration = run
            .epochs
            .iter()
            .map(|e| CalibrationSample {
                t: e.t,
                calibration: e.calibration,
                sigma: [e.sigma[PSI], e.sigma[THETA], e.sigma[LEV], e.sigma[LEV + 1], e.sigma[LEV + 2], e.sigma[FAC]],
            })
            .collect();
        Ok(report)
    }

    pub fn last(&self) -> &DriftEpoch {
        self.epochs.last().expect("report has epochs")
    }

    /// Final values and the worst %D after `after_distance` metres.
    pub fn summary(&self, after_distance: f64) -> DriftSummary {
        let last = self.last();
        let late = self.epochs.iter().filter(|e| e.distance >= after_distance);
        let max = |f: fn(&DriftEpoch) -> Option<f64>| late.clone().filter_map(f).reduce(f64::max);
        DriftSummary {
            distance: last.distance,
            final_horizontal_error: last.horizontal_error,
            final_height_error: last.height_error,
            final_horizontal_pct: last.horizontal_pct,
            final_height_pct: last.height_pct,
            max_horizontal_pct: max(|e| e.horizontal_pct),
            max_height_pct: max(|e| e.height_pct),
        }
    }

    pub fn calibration_history(&self) -> Vec<CalibrationRecord> {
        self.calibration.iter().map(|c| CalibrationRecord { t: c.t, calibration: c.calibration }).collect()
    }

    /// Least-squares slope of the estimated factor over the second half of
    /// the run, relative to its mean, per hour.
    pub fn factor_trend_per_hour(&self) -> Option<f64> {
        let half = &self.calibration[self.calibration.len() / 2..];
        if half.len() < 10 {
            return None;
        }
        let n = half.len() as f64;
        let tm = half.iter().map(|c| c.t).sum::<f64>() / n;
        let fm = half.iter().map(|c| c.calibration.factor).sum::<f64>() / n;
        let sxy: f64 = half.iter().map(|c| (c.t - tm) * (c.calibration.factor - fm)).sum();
        let sxx: f64 = half.iter().map(|c| (c.t - tm).powi(2)).sum();
        Some(sxy / sxx / fm * 3600.0)
    }

    /// Long-format rows for external plotting.
    pub fn plot_rows(&self) -> Vec<PlotRow> {
        let mut rows = Vec::new();
        let mut push = |metric: &str, t: f64, value: f64| rows.push(PlotRow { metric: metric.to_string(), t, value });
        for e in &self.epochs {
            push("distance_m", e.t, e.distance);
            push("horizontal_error_m", e.t, e.horizontal_error);
            push("height_error_m", e.t, e.height_error);
            if let Some(p) = e.horizontal_pct {
                push("horizontal_pct_d", e.t, p);
            }
            if let Some(p) = e.height_pct {
                push("height_pct_d", e.t, p);
            }
            push("attitude_error_n_deg", e.t, e.attitude_error_deg.x);
            push("heading_error_deg", e.t, e.attitude_error_deg.y);
            push("attitude_error_e_deg", e.t, e.attitude_error_deg.z);
        }
        for c in &self.calibration {
            push("psi_deg", c.t, c.calibration.misalignment.yaw.to_degrees());
            push("theta_deg", c.t, c.calibration.misalignment.pitch.to_degrees());
            push("lever_x_m", c.t, c.calibration.lever_arm.x);
            push("lever_y_m", c.t, c.calibration.lever_arm.y);
            push("lever_z_m", c.t, c.calibration.lever_arm.z);
            push("factor_pulses_per_m", c.t, c.calibration.factor);
        }
        rows
    }

    /// Human-readable summary: drift and final calibration with 1-sigma.
    pub fn summary_table(&self, after_distance: f64) -> String {
        let s = self.summary(after_distance);
        let pct = |p: Option<f64>| p.map_or("-".to_string(), |p| format!("{p:.4}"));
        let mut out = String::new();
        let _ = writeln!(out, "distance travelled        {:>12.1} m", s.distance);
        let _ = writeln!(out, "final horizontal error    {:>12.3} m   {:>8} %D", s.final_horizontal_error, pct(s.final_horizontal_pct));
        let _ = writeln!(out, "final height error        {:>12.3} m   {:>8} %D", s.final_height_error, pct(s.final_height_pct));
        let _ = writeln!(out, "max horizontal after {after_distance:.0} m {:>10} %D", pct(s.max_horizontal_pct));
        let _ = writeln!(out, "max height after {after_distance:.0} m     {:>10} %D", pct(s.max_height_pct));
        if let Some(c) = self.calibration.last() {
            let k = &c.calibration;
            let _ = writeln!(out, "psi      {:>12.5} deg  +/- {:.5}", k.misalignment.yaw.to_degrees(), c.sigma[0].to_degrees());
            let _ = writeln!(out, "theta    {:>12.5} deg  +/- {:.5}", k.misalignment.pitch.to_degrees(), c.sigma[1].to_degrees());
            for (i, axis) in ["x", "y", "z"].iter().enumerate() {
                let _ = writeln!(out, "lever {axis}  {:>12.4} m    +/- {:.4}", k.lever_arm[i], c.sigma[2 + i]);
            }
            let _ = writeln!(out, "factor   {:>12.5} p/m  +/- {:.5}", k.factor, c.sigma[5]);
        }
        if let Some(trend) = self.factor_trend_per_hour() {
            let _ = writeln!(out, "factor trend {:>+10.1} ppm/h", trend * 1e6);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::earth::{Dcm, GeodeticPosition};

    fn track(earth: &EarthModel, offsets: &[(f64, Vec3)]) -> Vec<NavState> {
        let p0 = GeodeticPosition::from_degrees(116.0, 40.0, 50.0).unwrap();
        offsets
            .iter()
            .map(|(t, d)| NavState {
                attitude: Dcm::identity(),
                velocity: Vec3::zeros(),
                position: earth.displace(&p0, d).unwrap(),
                t: *t,
            })
            .collect()
    }

    #[test]
    fn distance_is_monotone_and_percent_waits_for_100_m() {
        let earth = EarthModel::wgs84();
        let truth = track(&earth, &(0..30).map(|k| (k as f64, Vec3::new(10.0 * k as f64, 0.0, 0.0))).collect::<Vec<_>>());
        let est = track(
            &earth,
            &(0..30).map(|k| (k as f64, Vec3::new(10.0 * k as f64, 0.1, 0.5))).collect::<Vec<_>>(),
        );
        let r = DriftReport::from_tracks(&earth, &truth, &est).unwrap();
        assert_eq!(r.epochs.len(), 30);
        for w in r.epochs.windows(2) {
            assert!(w[1].distance >= w[0].distance);
        }
        for e in &r.epochs {
            assert_eq!(e.horizontal_pct.is_some(), e.distance > MIN_PERCENT_DISTANCE);
            assert!((e.horizontal_error - 0.5).abs() < 1e-3);
            assert!((e.height_error - 0.1).abs() < 1e-3);
        }
        let last = r.last();
        assert!((last.distance - 290.0).abs() < 1e-3);
        assert!((last.horizontal_pct.unwrap() - 50.0 / 290.0).abs() < 1e-5);
    }

    #[test]
    fn unmatched_epochs_are_skipped() {
        let earth = EarthModel::wgs84();
        let truth = track(&earth, &[(0.0, Vec3::zeros()), (1.0, Vec3::x()), (2.0, Vec3::x() * 2.0)]);
        let est = track(&earth, &[(1.0, Vec3::x()), (1.5, Vec3::x())]);
        let r = DriftReport::from_tracks(&earth, &truth, &est).unwrap();
        assert_eq!(r.epochs.len(), 1);
        assert_eq!(r.epochs[0].t, 1.0);
        assert!(DriftReport::from_tracks(&earth, &truth, &est[1..]).is_err());
    }
}
