//! Canonical CSV formats for sensor records, trajectories, calibration
//! histories and long-format plot data.
//!
//! Every file has a header row. Floats are written in shortest round-trip
//! form, so writing what was read reproduces the file byte for byte.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::earth::{Dcm, GeodeticPosition, MisalignmentAngles, Vec3};
use crate::error::{Error, Result};
use crate::estimator::Calibration;
use crate::odometer::OdometerReading;
use crate::strapdown::{ImuIncrement, NavState};

#[derive(Debug, Serialize, Deserialize)]
struct ImuRow {
    t: f64,
    dthx: f64,
    dthy: f64,
    dthz: f64,
    dvx: f64,
    dvy: f64,
    dvz: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct OdometerRow {
    t: f64,
    pulses_cumulative: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct TrajectoryRow {
    t: f64,
    lon_rad: f64,
    lat_rad: f64,
    h_m: f64,
    vn: f64,
    vu: f64,
    ve: f64,
    q0: f64,
    q1: f64,
    q2: f64,
    q3: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct CalibrationRow {
    t: f64,
    psi_rad: f64,
    theta_rad: f64,
    lx: f64,
    ly: f64,
    lz: f64,
    f_ppm_dev: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct AttitudeRow {
    t: f64,
    q0: f64,
    q1: f64,
    q2: f64,
    q3: f64,
}

/// One row of the long-format plot file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub metric: String,
    pub t: f64,
    pub value: f64,
}

/// A calibration estimate at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationRecord {
    pub t: f64,
    pub calibration: Calibration,
}

fn write_rows<W: Write, T: Serialize>(w: W, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for row in rows {
        wtr.serialize(row)?;
    }
    wtr.flush()?;
    Ok(())
}

fn read_rows<R: Read, T: for<'de> Deserialize<'de>>(r: R, what: &str) -> Result<Vec<T>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let rows = rdr
        .deserialize()
        .enumerate()
        .map(|(k, row)| row.map_err(|e| Error::InvalidInput(format!("{what} row {}: {e}", k + 2))))
        .collect::<Result<Vec<T>>>()?;
    Ok(rows)
}

fn check_times(times: impl Iterator<Item = f64>, values_finite: bool, what: &str) -> Result<()> {
    if !values_finite {
        return Err(Error::InvalidInput(format!("{what}: non-finite value")));
    }
    let mut prev = f64::NEG_INFINITY;
    for t in times {
        if !(t > prev) {
            return Err(Error::NonMonotonicTime { previous: prev, current: t });
        }
        prev = t;
    }
    Ok(())
}

pub fn write_imu<W: Write>(w: W, imu: &[ImuIncrement]) -> Result<()> {
    write_rows(
        w,
        imu.iter().map(|i| ImuRow {
            t: i.t,
            dthx: i.dtheta.x,
            dthy: i.dtheta.y,
            dthz: i.dtheta.z,
            dvx: i.dv.x,
            dvy: i.dv.y,
            dvz: i.dv.z,
        }),
    )
}

pub fn read_imu<R: Read>(r: R) -> Result<Vec<ImuIncrement>> {
    let rows: Vec<ImuRow> = read_rows(r, "IMU")?;
    let imu: Vec<ImuIncrement> = rows
        .iter()
        .map(|r| ImuIncrement {
            t: r.t,
            dtheta: Vec3::new(r.dthx, r.dthy, r.dthz),
            dv: Vec3::new(r.dvx, r.dvy, r.dvz),
        })
        .collect();
    let finite = imu.iter().all(|i| i.t.is_finite() && i.dtheta.iter().chain(i.dv.iter()).all(|x| x.is_finite()));
    check_times(imu.iter().map(|i| i.t), finite, "IMU")?;
    Ok(imu)
}

pub fn write_odometer<W: Write>(w: W, readings: &[OdometerReading]) -> Result<()> {
    write_rows(w, readings.iter().map(|r| OdometerRow { t: r.t, pulses_cumulative: r.pulses }))
}

pub fn read_odometer<R: Read>(r: R) -> Result<Vec<OdometerReading>> {
    let rows: Vec<OdometerRow> = read_rows(r, "odometer")?;
    let out: Vec<OdometerReading> =
        rows.iter().map(|r| OdometerReading { t: r.t, pulses: r.pulses_cumulative }).collect();
    let finite = out.iter().all(|r| r.t.is_finite() && r.pulses.is_finite());
    check_times(out.iter().map(|r| r.t), finite, "odometer")?;
    Ok(out)
}

pub fn write_trajectory<W: Write>(w: W, states: &[NavState]) -> Result<()> {
    write_rows(
        w,
        states.iter().map(|s| {
            let q = s.attitude.to_quaternion();
            TrajectoryRow {
                t: s.t,
                lon_rad: s.position.longitude,
                lat_rad: s.position.latitude,
                h_m: s.position.height,
                vn: s.velocity.x,
                vu: s.velocity.y,
                ve: s.velocity.z,
                q0: q[0],
                q1: q[1],
                q2: q[2],
                q3: q[3],
            }
        }),
    )
}

pub fn read_trajectory<R: Read>(r: R) -> Result<Vec<NavState>> {
    let rows: Vec<TrajectoryRow> = read_rows(r, "trajectory")?;
    let finite = rows.iter().all(|r| {
        [r.t, r.lon_rad, r.lat_rad, r.h_m, r.vn, r.vu, r.ve, r.q0, r.q1, r.q2, r.q3].iter().all(|x| x.is_finite())
    });
    check_times(rows.iter().map(|r| r.t), finite, "trajectory")?;
    rows.iter()
        .map(|r| {
            Ok(NavState {
                attitude: Dcm::from_quaternion([r.q0, r.q1, r.q2, r.q3]),
                velocity: Vec3::new(r.vn, r.vu, r.ve),
                position: GeodeticPosition::new(r.lon_rad, r.lat_rad, r.h_m)?,
                t: r.t,
            })
        })
        .collect()
}

/// `f_ppm_dev` is the factor's deviation from `nominal_factor` in parts per
/// million.
pub fn write_calibration<W: Write>(w: W, history: &[CalibrationRecord], nominal_factor: f64) -> Result<()> {
    write_rows(
        w,
        history.iter().map(|r| {
            let c = &r.calibration;
            CalibrationRow {
                t: r.t,
                psi_rad: c.misalignment.yaw,
                theta_rad: c.misalignment.pitch,
                lx: c.lever_arm.x,
                ly: c.lever_arm.y,
                lz: c.lever_arm.z,
                f_ppm_dev: (c.factor / nominal_factor - 1.0) * 1e6,
            }
        }),
    )
}

pub fn read_calibration<R: Read>(r: R, nominal_factor: f64) -> Result<Vec<CalibrationRecord>> {
    let rows: Vec<CalibrationRow> = read_rows(r, "calibration")?;
    let finite = rows
        .iter()
        .all(|r| [r.t, r.psi_rad, r.theta_rad, r.lx, r.ly, r.lz, r.f_ppm_dev].iter().all(|x| x.is_finite()));
    check_times(rows.iter().map(|r| r.t), finite, "calibration")?;
    Ok(rows
        .iter()
        .map(|r| CalibrationRecord {
            t: r.t,
            calibration: Calibration {
                misalignment: MisalignmentAngles::new(r.psi_rad, r.theta_rad),
                lever_arm: Vec3::new(r.lx, r.ly, r.lz),
                factor: nominal_factor * (1.0 + r.f_ppm_dev * 1e-6),
            },
        })
        .collect())
}

/// Attitude history as scalar-first quaternions: `t,q0,q1,q2,q3`.
pub fn write_attitudes<W: Write>(w: W, history: &[(f64, Dcm)]) -> Result<()> {
    write_rows(
        w,
        history.iter().map(|(t, c)| {
            let q = c.to_quaternion();
            AttitudeRow { t: *t, q0: q[0], q1: q[1], q2: q[2], q3: q[3] }
        }),
    )
}

pub fn write_plot<W: Write>(w: W, rows: &[PlotRow]) -> Result<()> {
    write_rows(w, rows)
}

pub fn read_plot<R: Read>(r: R) -> Result<Vec<PlotRow>> {
    read_rows(r, "plot")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(t: f64) -> NavState {
        NavState {
            attitude: Dcm::from_rotation_vector(&Vec3::new(0.1, -0.2, 0.3 * t)),
            velocity: Vec3::new(1.0 / 3.0, -2.5e-7, t),
            position: GeodeticPosition::new(2.0, 0.7, 51.3).unwrap(),
            t,
        }
    }

    #[test]
    fn imu_round_trip_is_byte_identical() {
        let imu: Vec<ImuIncrement> = (1..=5)
            .map(|k| ImuIncrement {
                t: k as f64 * 0.005,
                dtheta: Vec3::new(1e-7 / 3.0, -2.0e-6, k as f64 * 1.1e-5),
                dv: Vec3::new(0.049, 1.0 / 7.0, -9.8e-3),
            })
            .collect();
        let mut a = Vec::new();
        write_imu(&mut a, &imu).unwrap();
        let back = read_imu(a.as_slice()).unwrap();
        assert_eq!(back, imu);
        let mut b = Vec::new();
        write_imu(&mut b, &back).unwrap();
        assert_eq!(a, b);
        assert!(String::from_utf8(a).unwrap().starts_with("t,dthx,dthy,dthz,dvx,dvy,dvz\n"));
    }

    #[test]
    fn trajectory_round_trip() {
        let states: Vec<NavState> = (0..3).map(|k| state(k as f64)).collect();
        let mut a = Vec::new();
        write_trajectory(&mut a, &states).unwrap();
        let text = String::from_utf8(a.clone()).unwrap();
        assert!(text.starts_with("t,lon_rad,lat_rad,h_m,vn,vu,ve,q0,q1,q2,q3\n"));
        let back = read_trajectory(a.as_slice()).unwrap();
        for (x, y) in back.iter().zip(&states) {
            assert_eq!(x.position, y.position);
            assert_eq!(x.velocity, y.velocity);
            assert!((x.attitude.matrix() - y.attitude.matrix()).norm() < 1e-15);
        }
    }

    #[test]
    fn calibration_round_trip() {
        let c = Calibration {
            misalignment: MisalignmentAngles::new(0.5f64.to_radians(), -0.3f64.to_radians()),
            lever_arm: Vec3::new(1.0, 0.5, 0.3),
            factor: 8.6 * (1.0 - 0.006),
        };
        let hist = vec![CalibrationRecord { t: 1.0, calibration: c }];
        let mut a = Vec::new();
        write_calibration(&mut a, &hist, 8.6).unwrap();
        let text = String::from_utf8(a.clone()).unwrap();
        assert!(text.starts_with("t,psi_rad,theta_rad,lx,ly,lz,f_ppm_dev\n"));
        let back = read_calibration(a.as_slice(), 8.6).unwrap();
        assert!((back[0].calibration.factor - c.factor).abs() < 1e-12);
        assert_eq!(back[0].calibration.lever_arm, c.lever_arm);
    }

    #[test]
    fn odometer_rejects_time_reversal_and_garbage() {
        let text = "t,pulses_cumulative\n0,0\n0.01,1.5\n0.005,2\n";
        assert!(matches!(read_odometer(text.as_bytes()), Err(Error::NonMonotonicTime { .. })));
        let text = "t,pulses_cumulative\n0,zero\n";
        assert!(matches!(read_odometer(text.as_bytes()), Err(Error::InvalidInput(_))));
        let text = "t,pulses_cumulative\n0,NaN\n";
        assert!(matches!(read_odometer(text.as_bytes()), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn plot_rows_round_trip() {
        let rows = vec![PlotRow { metric: "horizontal_error_m".into(), t: 1.0, value: 0.25 }];
        let mut a = Vec::new();
        write_plot(&mut a, &rows).unwrap();
        assert_eq!(String::from_utf8(a.clone()).unwrap(), "metric,t,value\nhorizontal_error_m,1.0,0.25\n");
        assert_eq!(read_plot(a.as_slice()).unwrap(), rows);
    }
}
