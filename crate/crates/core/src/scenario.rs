//! Self-contained scenario files: trajectory, error models, mode, seeds and
//! every tuning knob, as `key = value` lines under `[section]` headers.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::earth::EarthModel;
use crate::error::{Error, Result};
use crate::estimator::{Calibration, ProblemOneConfig};
use crate::inmotion::ProblemTwoConfig;
use crate::odometer::PrefilterConfig;
use crate::pipeline::Dataset;
use crate::sim::{
    alignment_route, calibration_route, reference_spec, CleanData, ImuGrade, OdometerModel, SamplingConfig,
    SlipEvent, Trajectory, TrajectorySpec, DEFAULT_ODOMETER_FACTOR,
};
use crate::strapdown::NavState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// self-calibration from a standing start
    Problem1,
    /// in-motion alignment with known calibration, then refinement
    Problem2,
    /// two data sets with different odometer factors, calibrations swapped
    Crosscheck,
}

/// Odometer error model; the installation comes from the trajectory mounting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdometerSettings {
    /// true pulses/m
    pub factor: f64,
    #[serde(default)]
    pub scale_drift_per_hour: f64,
    #[serde(default)]
    pub quantize: bool,
    #[serde(default)]
    pub initial_phase: f64,
    #[serde(default)]
    pub slips: Vec<SlipEvent>,
}

impl Default for OdometerSettings {
    fn default() -> Self {
        Self {
            factor: DEFAULT_ODOMETER_FACTOR,
            scale_drift_per_hour: 0.0,
            quantize: false,
            initial_phase: 0.0,
            slips: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrosscheckSettings {
    /// true factor of data set B relative to A
    pub factor_ratio: f64,
    /// added to each seed for the IMU noise of data set B
    pub seed_offset: u64,
}

impl Default for CrosscheckSettings {
    fn default() -> Self {
        Self { factor_ratio: 0.994, seed_offset: 1000 }
    }
}

/// Pass/fail gates for `--check`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckThresholds {
    /// %D gates apply once this distance is covered, m
    pub after_distance: f64,
    pub horizontal_pct: f64,
    pub height_pct: f64,
    /// relative
    pub factor: f64,
    pub angle_deg: f64,
    pub lever_arm_m: f64,
    /// alignment
    pub heading_deg: f64,
    pub level_deg: f64,
    /// minimum off-diagonal to diagonal %D ratio
    pub crosscheck_ratio: f64,
}

impl Default for CheckThresholds {
    fn default() -> Self {
        Self {
            after_distance: 2000.0,
            horizontal_pct: 0.3,
            height_pct: 0.2,
            factor: 5e-4,
            angle_deg: 0.05,
            lever_arm_m: 0.05,
            heading_deg: 1.0,
            level_deg: 0.02,
            crosscheck_ratio: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub mode: Mode,
    pub seeds: Vec<u64>,
    pub output: PathBuf,
    /// sampling rate of the truth track, Hz
    #[serde(default = "default_truth_rate")]
    pub truth_rate_hz: f64,
    pub trajectory: TrajectorySpec,
    #[serde(default)]
    pub sampling: SamplingConfig,
    #[serde(default = "ImuGrade::navigation")]
    pub imu: ImuGrade,
    #[serde(default)]
    pub odometer: OdometerSettings,
    #[serde(default)]
    pub prefilter: PrefilterConfig,
    #[serde(default)]
    pub problem1: ProblemOneConfig,
    #[serde(default)]
    pub problem2: ProblemTwoConfig,
    /// calibration held during in-motion alignment; defaults to the true
    /// installation and odometer factor
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub known_calibration: Option<Calibration>,
    #[serde(default)]
    pub crosscheck: CrosscheckSettings,
    #[serde(default)]
    pub check: CheckThresholds,
}

fn default_truth_rate() -> f64 {
    10.0
}

impl Scenario {
    /// The reference scenario of each mode.
    pub fn reference(mode: Mode) -> Self {
        let route = match mode {
            Mode::Problem2 => alignment_route(),
            Mode::Problem1 | Mode::Crosscheck => calibration_route(),
        };
        Self {
            mode,
            seeds: vec![1],
            output: PathBuf::from("out"),
            truth_rate_hz: default_truth_rate(),
            trajectory: reference_spec(route),
            sampling: SamplingConfig::default(),
            imu: ImuGrade::navigation(),
            odometer: OdometerSettings::default(),
            prefilter: PrefilterConfig::default(),
            problem1: ProblemOneConfig::default(),
            problem2: ProblemTwoConfig::default(),
            known_calibration: None,
            crosscheck: CrosscheckSettings::default(),
            check: CheckThresholds::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Self = toml::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidInput(format!("scenario serialization: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.trajectory.segments.is_empty() {
            return Err(Error::InvalidInput("scenario has no trajectory segments".to_string()));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidInput("scenario lists no seeds".to_string()));
        }
        if !(self.truth_rate_hz > 0.0) {
            return Err(Error::InvalidInput("truth_rate_hz must be positive".to_string()));
        }
        if !(self.odometer.factor.is_finite() && self.odometer.factor != 0.0) {
            return Err(Error::InvalidInput("odometer factor must be finite and nonzero".to_string()));
        }
        if !(self.crosscheck.factor_ratio > 0.0) {
            return Err(Error::InvalidInput("crosscheck factor_ratio must be positive".to_string()));
        }
        self.problem1.filter.validate()?;
        self.problem2.filter.validate()?;
        self.prefilter.validate()
    }

    /// Error-free sensor data, shared by every seed.
    pub fn clean_data(&self) -> Result<CleanData> {
        self.validate()?;
        CleanData::new(EarthModel::wgs84(), self.trajectory.clone(), self.sampling)
    }

    fn odometer_model(&self, traj: &Trajectory, factor: f64) -> OdometerModel {
        let o = &self.odometer;
        OdometerModel {
            scale_drift_per_hour: o.scale_drift_per_hour,
            quantize: o.quantize,
            initial_phase: o.initial_phase,
            slips: o.slips.clone(),
            ..OdometerModel::matching(traj, factor)
        }
    }

    /// Sensor records and truth for one seed. `factor_ratio` scales the
    /// true odometer factor (1 for data set A).
    pub fn dataset(&self, clean: &CleanData, seed: u64, factor_ratio: f64) -> Result<Dataset> {
        let traj = &clean.trajectory;
        let odo = self.odometer_model(traj, self.odometer.factor * factor_ratio);
        let run = clean.realise(&self.imu.sample(seed), &odo)?;
        Ok(Dataset { imu: run.imu, odometer: run.odometer, truth: truth_track(traj, self.truth_rate_hz)? })
    }

    /// Data sets for one seed: one for the single-run modes, A and B for
    /// the cross-check.
    pub fn datasets(&self, clean: &CleanData, seed: u64) -> Result<Vec<Dataset>> {
        let a = self.dataset(clean, seed, 1.0)?;
        Ok(match self.mode {
            Mode::Crosscheck => {
                let b = self.dataset(clean, seed + self.crosscheck.seed_offset, self.crosscheck.factor_ratio)?;
                vec![a, b]
            }
            _ => vec![a],
        })
    }

    /// The calibration held during in-motion alignment.
    pub fn alignment_calibration(&self) -> Calibration {
        self.known_calibration.unwrap_or(Calibration {
            misalignment: self.trajectory.mounting.misalignment,
            lever_arm: self.trajectory.mounting.lever_arm,
            factor: self.odometer.factor,
        })
    }
}

/// Truth states at `rate_hz` over the whole trajectory.
pub fn truth_track(traj: &Trajectory, rate_hz: f64) -> Result<Vec<NavState>> {
    let n = (traj.duration() * rate_hz + 1e-9).floor() as usize;
    (0..=n).map(|k| Ok(traj.kinematics(k as f64 / rate_hz)?.nav)).collect()
}
