//! Exact rigid-body kinematics of a nonholonomic vehicle carrying an IMU.
//!
//! The route is laid out in an Earth-fixed map frame (the NUE frame of the
//! origin, frozen to the Earth). The rear-axle point moves along the vehicle
//! forward axis only; the IMU sits at a lever arm from it. Geodetic position,
//! navigation-frame attitude, body rates and specific force all follow in
//! closed form from the profile, with the rear-axle position obtained by
//! high-order quadrature.

use std::f64::consts::PI;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use super::profile::{build_pieces, Jet, Piece, SegmentKind, TrajectorySegment};
use super::quadrature::{gauss_legendre, GL8};
use crate::earth::{
    ecef_to_nue, misalignment_dcm, Dcm, EarthModel, GeodeticPosition, Mat3, MisalignmentAngles, Vec3,
};
use crate::error::{Error, Result};
use crate::strapdown::NavState;

/// Periodic roll and pitch proportional to speed (suspension sway).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sway {
    /// roll amplitude at the reference speed, rad
    pub roll_amplitude: f64,
    /// s
    pub roll_period: f64,
    /// pitch amplitude at the reference speed, rad
    pub pitch_amplitude: f64,
    /// s
    pub pitch_period: f64,
    /// m/s
    pub reference_speed: f64,
}

impl Default for Sway {
    fn default() -> Self {
        Self {
            roll_amplitude: 1.0f64.to_radians(),
            roll_period: 2.3,
            pitch_amplitude: 0.5f64.to_radians(),
            pitch_period: 1.7,
            reference_speed: 10.0,
        }
    }
}

impl Sway {
    fn validate(&self) -> bool {
        self.roll_period > 0.0
            && self.pitch_period > 0.0
            && self.reference_speed > 0.0
            && self.roll_amplitude.abs() < 0.3
            && self.pitch_amplitude.abs() < 0.3
    }
}

/// `amplitude * speed * sin(2 pi t / period)` and its derivatives.
fn oscillation(amplitude: f64, period: f64, t: f64, speed: &Jet) -> Jet {
    let w = 2.0 * PI / period;
    let (s, c) = (w * t).sin_cos();
    Jet {
        value: amplitude * speed.value * s,
        rate: amplitude * (speed.rate * s + speed.value * w * c),
        accel: amplitude * (speed.accel * s + 2.0 * speed.rate * w * c - speed.value * w * w * s),
    }
}

/// Physical installation of the IMU on the vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Mounting {
    pub misalignment: MisalignmentAngles,
    /// odometer reference point relative to the IMU, body axes, m
    pub lever_arm: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub origin: GeodeticPosition,
    /// rad from North towards East
    pub initial_heading: f64,
    pub segments: Vec<TrajectorySegment>,
    #[serde(default)]
    pub sway: Option<Sway>,
    #[serde(default)]
    pub mounting: Mounting,
}

/// Everything the sensors see at one instant.
#[derive(Debug, Clone, Copy)]
pub struct Kinematics {
    /// IMU navigation state (attitude `C_b^n`)
    pub nav: NavState,
    pub omega_ib_b: Vec3,
    /// body rate relative to the Earth
    pub omega_eb_b: Vec3,
    pub specific_force_b: Vec3,
    /// rear-axle speed, m/s
    pub speed: f64,
    /// rear-axle path length since start, m
    pub distance: f64,
}

#[derive(Debug, Clone, Copy)]
struct Knot {
    t: f64,
    piece: usize,
    position: Vec3,
    distance: f64,
}

/// NED to NUE axis permutation.
const NED_TO_NUE: Matrix3<f64> = Matrix3::new(1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0);

#[derive(Debug, Clone)]
pub struct Trajectory {
    earth: EarthModel,
    spec: TrajectorySpec,
    pieces: Vec<Piece>,
    knots: Vec<Knot>,
    c_me: Mat3,
    origin_e: Vec3,
    c_ba: Mat3,
    omega_ie_m: Vec3,
}

struct Attitude {
    c_am: Mat3,
    omega: Vec3,
    omega_dot: Vec3,
}

impl Trajectory {
    pub fn new(earth: EarthModel, spec: TrajectorySpec) -> Result<Self> {
        if spec.origin.latitude.cos() < 1e-3 {
            return Err(Error::NearPole { latitude_rad: spec.origin.latitude });
        }
        if let Some(s) = &spec.sway {
            if !s.validate() {
                return Err(Error::InvalidInput("sway needs positive periods and small amplitudes".to_string()));
            }
        }
        if !spec.mounting.lever_arm.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidInput("non-finite lever arm".to_string()));
        }
        let pieces = build_pieces(&spec.segments, spec.initial_heading)?;
        let c_me = *ecef_to_nue(&spec.origin).matrix();
        let origin_e = earth.to_ecef(&spec.origin);
        let c_ba = *misalignment_dcm(&spec.mounting.misalignment).matrix();
        let omega_ie_m = c_me.transpose() * earth.earth_rate_e();
        let mut traj = Self { earth, spec, pieces, knots: Vec::new(), c_me, origin_e, c_ba, omega_ie_m };
        traj.build_knots();
        Ok(traj)
    }

    fn build_knots(&mut self) {
        let mut position = Vec3::zeros();
        let mut distance = 0.0;
        let mut knots = Vec::new();
        for (index, piece) in self.pieces.iter().enumerate() {
            let n = piece.duration.ceil().max(1.0) as usize;
            let h = piece.duration / n as f64;
            for k in 0..n {
                let a = k as f64 * h;
                knots.push(Knot { t: piece.t0 + a, piece: index, position, distance });
                let (dp, dd) = self.integrate_path(piece, a, a + h);
                position += dp;
                distance += dd;
            }
        }
        let last = self.pieces.len() - 1;
        knots.push(Knot { t: self.pieces[last].end(), piece: last, position, distance });
        self.knots = knots;
    }

    /// Rear-axle displacement (map frame) and path length over local times `[a, b]`.
    fn integrate_path(&self, piece: &Piece, a: f64, b: f64) -> (Vec3, f64) {
        if piece.kind == SegmentKind::Pause || b <= a {
            return (Vec3::zeros(), 0.0);
        }
        gauss_legendre(&GL8, a, b, |tau| {
            let p = piece.eval(tau);
            let (_, pitch) = self.sway(piece.t0 + tau, &p.speed);
            let pitch = p.pitch.value + pitch.value;
            (forward_map(p.heading.value, pitch) * p.speed.value, p.speed.value)
        })
    }

    pub fn earth(&self) -> &EarthModel {
        &self.earth
    }

    pub fn spec(&self) -> &TrajectorySpec {
        &self.spec
    }

    pub fn mounting(&self) -> &Mounting {
        &self.spec.mounting
    }

    pub fn duration(&self) -> f64 {
        self.pieces.last().map_or(0.0, |p| p.end())
    }

    /// Total rear-axle path length, m.
    pub fn total_distance(&self) -> f64 {
        self.knots.last().map_or(0.0, |k| k.distance)
    }

    fn piece_index(&self, t: f64) -> usize {
        let i = self.pieces.partition_point(|p| p.t0 <= t);
        i.saturating_sub(1)
    }

    /// Rear-axle speed at `t`, m/s.
    pub fn speed(&self, t: f64) -> f64 {
        let piece = &self.pieces[self.piece_index(t)];
        piece.eval(t - piece.t0).speed.value
    }

    /// Rear-axle position in the map frame and path length at `t`.
    fn path_at(&self, t: f64) -> (Vec3, f64) {
        let t = t.clamp(0.0, self.duration());
        let i = self.knots.partition_point(|k| k.t <= t).saturating_sub(1);
        let knot = &self.knots[i];
        let piece = &self.pieces[knot.piece];
        let (dp, dd) = self.integrate_path(piece, knot.t - piece.t0, t - piece.t0);
        (knot.position + dp, knot.distance + dd)
    }

    /// Sway roll and pitch at `t`.
    fn sway(&self, t: f64, speed: &Jet) -> (Jet, Jet) {
        match &self.spec.sway {
            None => (Jet::default(), Jet::default()),
            Some(sw) => {
                let k = 1.0 / sw.reference_speed;
                (
                    oscillation(sw.roll_amplitude * k, sw.roll_period, t, speed),
                    oscillation(sw.pitch_amplitude * k, sw.pitch_period, t, speed),
                )
            }
        }
    }

    /// Vehicle attitude `C_a^m` with its angular rate and acceleration in the vehicle frame.
    fn vehicle_attitude(heading: &Jet, pitch: &Jet, roll: &Jet) -> Attitude {
        let (sh, ch) = heading.value.sin_cos();
        let (sp, cp) = pitch.value.sin_cos();
        let (sr, cr) = roll.value.sin_cos();
        let rz = Matrix3::new(ch, -sh, 0.0, sh, ch, 0.0, 0.0, 0.0, 1.0);
        let ry = Matrix3::new(cp, 0.0, sp, 0.0, 1.0, 0.0, -sp, 0.0, cp);
        let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, cr, -sr, 0.0, sr, cr);
        let c_am = NED_TO_NUE * rz * ry * rx;

        let (hd, pd, rd) = (heading.rate, pitch.rate, roll.rate);
        let (hdd, pdd, rdd) = (heading.accel, pitch.accel, roll.accel);
        let omega = Vec3::new(rd - hd * sp, pd * cr + hd * sr * cp, -pd * sr + hd * cr * cp);
        let omega_dot = Vec3::new(
            rdd - hdd * sp - hd * pd * cp,
            pdd * cr - pd * rd * sr + hdd * sr * cp + hd * rd * cr * cp - hd * pd * sr * sp,
            -pdd * sr - pd * rd * cr + hdd * cr * cp - hd * rd * sr * cp - hd * pd * cr * sp,
        );
        Attitude { c_am, omega, omega_dot }
    }

    /// Full sensor-level kinematics at time `t`.
    pub fn kinematics(&self, t: f64) -> Result<Kinematics> {
        let t = t.clamp(0.0, self.duration());
        let piece = &self.pieces[self.piece_index(t)];
        let prof = piece.eval(t - piece.t0);
        let (roll, sway_pitch) = self.sway(t, &prof.speed);
        let pitch = Jet {
            value: prof.pitch.value + sway_pitch.value,
            rate: prof.pitch.rate + sway_pitch.rate,
            accel: prof.pitch.accel + sway_pitch.accel,
        };
        let att = Self::vehicle_attitude(&prof.heading, &pitch, &roll);

        let s = prof.speed.value;
        let fwd = att.c_am.column(0).into_owned();
        let v_o = fwd * s;
        let a_o = fwd * prof.speed.rate + att.c_am * att.omega.cross(&Vec3::x()) * s;

        let c_ab = self.c_ba.transpose();
        let c_bm = att.c_am * self.c_ba;
        let w_b = c_ab * att.omega;
        let wdot_b = c_ab * att.omega_dot;
        let l = self.spec.mounting.lever_arm;

        let (r_o, distance) = self.path_at(t);
        let r_imu = r_o - c_bm * l;
        let v_imu = v_o - c_bm * w_b.cross(&l);
        let a_imu = a_o - c_bm * (wdot_b.cross(&l) + w_b.cross(&w_b.cross(&l)));

        let position = self.earth.from_ecef(&(self.origin_e + self.c_me * r_imu));
        let c_ne = ecef_to_nue(&position);
        let c_mn = c_ne.matrix().transpose() * self.c_me;
        let g_m = c_mn.transpose() * self.earth.normal_gravity(&position);
        let f_m = a_imu + 2.0 * self.omega_ie_m.cross(&v_imu) - g_m;
        let c_mb = c_bm.transpose();

        Ok(Kinematics {
            nav: NavState {
                attitude: Dcm::from_matrix_unchecked(c_mn * c_bm),
                velocity: c_mn * v_imu,
                position,
                t,
            },
            omega_ib_b: w_b + c_mb * self.omega_ie_m,
            omega_eb_b: w_b,
            specific_force_b: c_mb * f_m,
            speed: s,
            distance,
        })
    }

    /// Truth samples every `step` seconds from 0 to the end of the route.
    pub fn sample(&self, step: f64) -> Result<Vec<Kinematics>> {
        if !(step > 0.0) {
            return Err(Error::InvalidInput("sample step must be positive".to_string()));
        }
        let n = (self.duration() / step + 1e-9).floor() as usize;
        (0..=n).map(|k| self.kinematics(k as f64 * step)).collect()
    }
}

/// Vehicle forward axis in the map frame.
fn forward_map(heading: f64, pitch: f64) -> Vec3 {
    let (sh, ch) = heading.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    Vec3::new(cp * ch, sp, cp * sh)
}
