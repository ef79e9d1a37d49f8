//! Pass/fail comparisons for `--check`.

use std::fmt;

use landnav::estimator::Calibration;
use landnav::pipeline::CrossCheck;
use landnav::report::DriftReport;
use landnav::scenario::CheckThresholds;
use landnav::Vec3;

pub struct Gate {
    pub name: &'static str,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

impl Gate {
    fn at_most(name: &'static str, value: f64, limit: f64) -> Self {
        Self { name, value, limit, pass: value <= limit }
    }

    fn at_least(name: &'static str, value: f64, limit: f64) -> Self {
        Self { name, value, limit, pass: value >= limit }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {:<28} {:>12.6} (limit {})", self.name, self.value, self.limit)
    }
}

/// Worst %D once the threshold distance is covered. A drive that never gets
/// there fails.
pub fn drift(report: &DriftReport, th: &CheckThresholds) -> Vec<Gate> {
    let s = report.summary(th.after_distance);
    vec![
        Gate::at_most("max horizontal %D", s.max_horizontal_pct.unwrap_or(f64::INFINITY), th.horizontal_pct),
        Gate::at_most("max height %D", s.max_height_pct.unwrap_or(f64::INFINITY), th.height_pct),
    ]
}

pub fn calibration(estimate: &Calibration, truth: &Calibration, th: &CheckThresholds) -> Vec<Gate> {
    let d_yaw = (estimate.misalignment.yaw - truth.misalignment.yaw).abs().to_degrees();
    let d_pitch = (estimate.misalignment.pitch - truth.misalignment.pitch).abs().to_degrees();
    let d_lever = (estimate.lever_arm - truth.lever_arm).abs().max();
    let d_factor = (estimate.factor / truth.factor - 1.0).abs();
    vec![
        Gate::at_most("psi error deg", d_yaw, th.angle_deg),
        Gate::at_most("theta error deg", d_pitch, th.angle_deg),
        Gate::at_most("lever arm error m", d_lever, th.lever_arm_m),
        Gate::at_most("factor relative error", d_factor, th.factor),
    ]
}

/// `error_deg` holds the north, heading and east attitude errors.
pub fn alignment(error_deg: &Vec3, th: &CheckThresholds) -> Vec<Gate> {
    vec![
        Gate::at_most("heading error deg", error_deg.y.abs(), th.heading_deg),
        Gate::at_most("level error deg", error_deg.x.abs().max(error_deg.z.abs()), th.level_deg),
    ]
}

pub fn crosscheck(cc: &CrossCheck, th: &CheckThresholds) -> Gate {
    Gate::at_least("crosscheck degradation ratio", cc.degradation_ratio(), th.crosscheck_ratio)
}
