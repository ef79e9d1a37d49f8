//! End-to-end runs on recorded data: calibration from a standstill,
//! navigation with a fixed calibration, in-motion alignment and the
//! calibration cross-check.

use crate::earth::{EarthModel, GeodeticPosition};
use crate::error::{Error, Result};
use crate::estimator::{
    run_from_standstill, run_problem_one, Calibration, ProblemOneConfig, ProblemOneResult, SpeedObservation,
};
use crate::inmotion::{run_problem_two, ProblemTwoConfig, ProblemTwoResult};
use crate::odometer::{prefilter, OdometerReading, PrefilterConfig};
use crate::report::DriftReport;
use crate::strapdown::{ImuIncrement, NavState};

/// Sensor records with an optional truth track.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub imu: Vec<ImuIncrement>,
    pub odometer: Vec<OdometerReading>,
    pub truth: Vec<NavState>,
}

impl Dataset {
    /// Truth state at `t`, which must be a truth epoch.
    pub fn truth_at(&self, t: f64) -> Result<&NavState> {
        let k = self.truth.partition_point(|s| s.t < t - 1e-6);
        self.truth
            .get(k)
            .filter(|s| (s.t - t).abs() <= 1e-6)
            .ok_or_else(|| Error::InvalidInput(format!("no truth epoch at t = {t} s")))
    }

    /// Position at the start of the records, from the truth track.
    pub fn start_position(&self) -> Result<GeodeticPosition> {
        self.truth
            .first()
            .map(|s| s.position)
            .ok_or_else(|| Error::InvalidInput("no truth track to take the start position from".to_string()))
    }
}

pub fn speeds(odometer: &[OdometerReading], nominal_factor: f64, config: &PrefilterConfig) -> Result<Vec<SpeedObservation>> {
    Ok(prefilter(odometer, nominal_factor, config)?.iter().map(Into::into).collect())
}

/// Problem I: self-calibration starting from rest at `origin`.
pub fn calibrate(
    earth: &EarthModel,
    data: &Dataset,
    origin: &GeodeticPosition,
    config: &ProblemOneConfig,
    prefilter_config: &PrefilterConfig,
) -> Result<ProblemOneResult> {
    let s = speeds(&data.odometer, config.nominal_factor, prefilter_config)?;
    run_problem_one(earth, &data.imu, &s, origin, config)
}

/// Navigation from rest with `calibration` held fixed.
pub fn navigate(
    earth: &EarthModel,
    data: &Dataset,
    origin: &GeodeticPosition,
    calibration: &Calibration,
    config: &ProblemOneConfig,
    prefilter_config: &PrefilterConfig,
) -> Result<ProblemOneResult> {
    let s = speeds(&data.odometer, config.nominal_factor, prefilter_config)?;
    let mut config = *config;
    config.filter.estimate_calibration = false;
    run_from_standstill(earth, &data.imu, &s, origin, calibration, &config)
}

/// Problem II: in-motion alignment with a known calibration, then
/// refinement. `origin` is the position at the alignment start.
pub fn align(
    earth: &EarthModel,
    data: &Dataset,
    calibration: &Calibration,
    origin: &GeodeticPosition,
    config: &ProblemTwoConfig,
    prefilter_config: &PrefilterConfig,
) -> Result<ProblemTwoResult> {
    let s = speeds(&data.odometer, config.nominal_factor, prefilter_config)?;
    run_problem_two(earth, &data.imu, &s, calibration, origin, config)
}

/// Alignment start used by [`align`]: the configured one or the first speed
/// epoch.
pub fn alignment_start(data: &Dataset, config: &ProblemTwoConfig, prefilter_config: &PrefilterConfig) -> Result<f64> {
    match config.start {
        Some(t) => Ok(t),
        None => speeds(&data.odometer, config.nominal_factor, prefilter_config)?
            .first()
            .map(|s| s.t)
            .ok_or_else(|| Error::InvalidInput("empty odometer record".to_string())),
    }
}

/// Final %D with every calibration applied to every data set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossCheck {
    /// `[calibration][data set]`: A2A, A2B in the first row, B2A, B2B in the second
    pub horizontal_pct: [[f64; 2]; 2],
    pub height_pct: [[f64; 2]; 2],
}

impl CrossCheck {
    /// Smallest off-diagonal horizontal %D over the largest diagonal one.
    pub fn degradation_ratio(&self) -> f64 {
        let h = &self.horizontal_pct;
        h[0][1].min(h[1][0]) / h[0][0].max(h[1][1])
    }

    pub fn table(&self) -> String {
        let h = &self.horizontal_pct;
        let v = &self.height_pct;
        format!(
            "horizontal %D    data A     data B\ncalib A      {:>9.4}  {:>9.4}\ncalib B      {:>9.4}  {:>9.4}\n\
             height %D        data A     data B\ncalib A      {:>9.4}  {:>9.4}\ncalib B      {:>9.4}  {:>9.4}\n\
             degradation ratio {:.2}\n",
            h[0][0],
            h[0][1],
            h[1][0],
            h[1][1],
            v[0][0],
            v[0][1],
            v[1][0],
            v[1][1],
            self.degradation_ratio()
        )
    }
}

/// Navigates each data set with each calibration held fixed. Both data
/// sets need truth tracks.
pub fn crosscheck(
    earth: &EarthModel,
    datasets: [&Dataset; 2],
    calibrations: [Calibration; 2],
    config: &ProblemOneConfig,
    prefilter_config: &PrefilterConfig,
) -> Result<CrossCheck> {
    let mut out = CrossCheck { horizontal_pct: [[0.0; 2]; 2], height_pct: [[0.0; 2]; 2] };
    for (i, calib) in calibrations.iter().enumerate() {
        for (j, data) in datasets.iter().enumerate() {
            let run = navigate(earth, data, &data.start_position()?, calib, config, prefilter_config)?;
            let report = DriftReport::from_run(earth, &data.truth, &run.run)?;
            let last = report.last();
            let missing = || Error::InvalidInput("cross-check drive shorter than 100 m".to_string());
            out.horizontal_pct[i][j] = last.horizontal_pct.ok_or_else(missing)?;
            out.height_pct[i][j] = last.height_pct.ok_or_else(missing)?;
        }
    }
    Ok(out)
}
