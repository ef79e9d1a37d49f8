//! Odometer/NHC measurement model and the linearized error dynamics.

use std::f64::consts::PI;

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::earth::{skew, wrap_pi, EarthModel, Mat3, MisalignmentAngles, Vec3};
use crate::error::Result;
use crate::strapdown::NavState;

pub const STATE_DIM: usize = 21;
pub const ATT: usize = 0;
pub const VEL: usize = 3;
pub const POS: usize = 6;
pub const BG: usize = 9;
pub const BA: usize = 12;
pub const PSI: usize = 15;
pub const THETA: usize = 16;
pub const LEV: usize = 17;
pub const FAC: usize = 20;

pub type StateVector = SVector<f64, STATE_DIM>;
pub type StateMatrix = SMatrix<f64, STATE_DIM, STATE_DIM>;
pub type MeasurementJacobian = SMatrix<f64, 3, STATE_DIM>;

/// Odometer installation parameters: misalignment, lever arm and scale factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub misalignment: MisalignmentAngles,
    /// m, body axes
    pub lever_arm: Vec3,
    /// pulses/m
    pub factor: f64,
}

impl Calibration {
    pub fn nominal(factor: f64) -> Self {
        Self { misalignment: MisalignmentAngles::default(), lever_arm: Vec3::zeros(), factor }
    }

    /// Applies an additive correction `[dpsi, dtheta, dl, df]`.
    pub fn corrected(&self, d_psi: f64, d_theta: f64, d_lever: &Vec3, d_factor: f64) -> Self {
        Self {
            misalignment: MisalignmentAngles {
                yaw: wrap_pi(self.misalignment.yaw + d_psi),
                pitch: wrap_pi(self.misalignment.pitch + d_theta),
                roll: self.misalignment.roll,
            },
            lever_arm: self.lever_arm + d_lever,
            factor: self.factor + d_factor,
        }
    }
}

/// Rotation matrix body to vehicle and its partials w.r.t. yaw and pitch.
fn misalignment_with_partials(m: &MisalignmentAngles) -> (Mat3, Mat3, Mat3) {
    let (sp, cp) = m.yaw.sin_cos();
    let (st, ct) = m.pitch.sin_cos();
    let (sr, cr) = m.roll.sin_cos();
    let c = Mat3::new(
        ct * cp,
        st,
        -ct * sp,
        sr * sp - cr * cp * st,
        cr * ct,
        cp * sr + cr * st * sp,
        cr * sp + cp * sr * st,
        -ct * sr,
        cr * cp - sr * st * sp,
    );
    let d_yaw = Mat3::new(
        -ct * sp,
        0.0,
        -ct * cp,
        sr * cp + cr * sp * st,
        0.0,
        -sp * sr + cr * st * cp,
        cr * cp - sp * sr * st,
        0.0,
        -cr * sp - sr * st * cp,
    );
    let d_pitch = Mat3::new(
        -st * cp,
        ct,
        st * sp,
        -cr * cp * ct,
        -cr * st,
        cr * ct * sp,
        cp * sr * ct,
        st * sr,
        -sr * ct * sp,
    );
    (c, d_yaw, d_pitch)
}

/// Body rate relative to the Earth.
fn omega_eb(earth: &EarthModel, nav: &NavState, omega_ib_b: &Vec3, gyro_bias: &Vec3) -> Vec3 {
    omega_ib_b - gyro_bias - nav.attitude.transpose() * earth.earth_rate_n(&nav.position)
}

/// Velocity of the odometer reference point in body axes.
fn reference_point_velocity(nav: &NavState, calib: &Calibration, w_eb: &Vec3) -> Vec3 {
    nav.attitude.transpose() * nav.velocity + w_eb.cross(&calib.lever_arm)
}

/// Predicted `[pulse rate, lateral, vertical]` measurement.
pub fn measurement_predict(
    earth: &EarthModel,
    nav: &NavState,
    calib: &Calibration,
    omega_ib_b: &Vec3,
    gyro_bias: &Vec3,
) -> Vec3 {
    let w = omega_eb(earth, nav, omega_ib_b, gyro_bias);
    let u = reference_point_velocity(nav, calib, &w);
    let (c, _, _) = misalignment_with_partials(&calib.misalignment);
    let mut y = c * u;
    y.x *= calib.factor;
    y
}

/// Partials of [`measurement_predict`] w.r.t. the error state (true minus estimate).
pub fn measurement_jacobian(
    earth: &EarthModel,
    nav: &NavState,
    calib: &Calibration,
    omega_ib_b: &Vec3,
    gyro_bias: &Vec3,
) -> MeasurementJacobian {
    let w = omega_eb(earth, nav, omega_ib_b, gyro_bias);
    let u = reference_point_velocity(nav, calib, &w);
    let (c, c_yaw, c_pitch) = misalignment_with_partials(&calib.misalignment);
    let c_nb = nav.attitude.transpose();
    let c_nb = c_nb.matrix();
    let l = skew(&calib.lever_arm);
    let w_ie = earth.earth_rate_n(&nav.position);

    let du_att = c_nb * skew(&nav.velocity) + l * c_nb * skew(&w_ie);
    let du_vel = *c_nb;
    let du_bg = l;
    let du_lev = skew(&w);

    let mut d = Mat3::identity();
    d[(0, 0)] = calib.factor;
    let dc = d * c;
    let mut h = MeasurementJacobian::zeros();
    h.fixed_view_mut::<3, 3>(0, ATT).copy_from(&(dc * du_att));
    h.fixed_view_mut::<3, 3>(0, VEL).copy_from(&(dc * du_vel));
    h.fixed_view_mut::<3, 3>(0, BG).copy_from(&(dc * du_bg));
    h.fixed_view_mut::<3, 1>(0, PSI).copy_from(&(d * c_yaw * u));
    h.fixed_view_mut::<3, 1>(0, THETA).copy_from(&(d * c_pitch * u));
    h.fixed_view_mut::<3, 3>(0, LEV).copy_from(&(dc * du_lev));
    h[(0, FAC)] = (c * u).x;
    h
}

/// The four `(yaw, pitch, factor)` triples producing identical measurements.
pub fn indiscriminable_variants(yaw: f64, pitch: f64, factor: f64) -> [(f64, f64, f64); 4] {
    [
        (wrap_pi(yaw), wrap_pi(pitch), factor),
        (wrap_pi(PI + yaw), wrap_pi(PI - pitch), factor),
        (wrap_pi(PI + yaw), wrap_pi(-pitch), -factor),
        (wrap_pi(yaw), wrap_pi(PI + pitch), -factor),
    ]
}

/// Inputs for linearizing the error dynamics over one propagation interval.
#[derive(Debug, Clone, Copy)]
pub struct DynamicsInput {
    pub nav: NavState,
    /// mean specific force, navigation frame
    pub specific_force_n: Vec3,
}

/// Continuous-time error dynamics matrix.
pub fn error_dynamics(earth: &EarthModel, input: &DynamicsInput) -> Result<StateMatrix> {
    let nav = &input.nav;
    let p = &nav.position;
    let v = &nav.velocity;
    let w_ie = earth.earth_rate_n(p);
    let w_en = earth.transport_rate(p, v)?;
    let j = earth.transport_rate_jacobian(p)?;
    let c_bn = *nav.attitude.matrix();

    let mut f = StateMatrix::zeros();
    f.fixed_view_mut::<3, 3>(ATT, ATT).copy_from(&-skew(&(w_ie + w_en)));
    f.fixed_view_mut::<3, 3>(ATT, VEL).copy_from(&-j);
    f.fixed_view_mut::<3, 3>(ATT, BG).copy_from(&-c_bn);
    f.fixed_view_mut::<3, 3>(VEL, ATT).copy_from(&-skew(&input.specific_force_n));
    f.fixed_view_mut::<3, 3>(VEL, VEL)
        .copy_from(&(-skew(&(2.0 * w_ie + w_en)) + skew(v) * j));
    f.fixed_view_mut::<3, 3>(VEL, BA).copy_from(&-c_bn);
    f.fixed_view_mut::<3, 3>(POS, VEL).copy_from(&Mat3::identity());
    Ok(f)
}

/// Discrete transition matrix for a constant `F` over `dt`.
pub fn transition_matrix(f: &StateMatrix, dt: f64) -> StateMatrix {
    (f * dt).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::earth::{Dcm, GeodeticPosition};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_case(rng: &mut ChaCha8Rng) -> (NavState, Calibration, Vec3, Vec3) {
        let mut v3 = |s: f64| Vec3::new(rng.random_range(-s..s), rng.random_range(-s..s), rng.random_range(-s..s));
        let att = Dcm::from_rotation_vector(&v3(3.0));
        let vel = v3(20.0);
        let w = v3(0.3);
        let bg = v3(1e-4);
        let lever = v3(2.0);
        let mut rng2 = ChaCha8Rng::seed_from_u64(rng.random());
        let nav = NavState {
            attitude: att,
            velocity: vel,
            position: GeodeticPosition::new(rng2.random_range(-3.0..3.0), rng2.random_range(-1.3..1.3), 100.0)
                .unwrap(),
            t: 0.0,
        };
        let calib = Calibration {
            misalignment: MisalignmentAngles::new(rng2.random_range(-PI..PI), rng2.random_range(-PI..PI)),
            lever_arm: lever,
            factor: rng2.random_range(-10.0..10.0),
        };
        (nav, calib, w, bg)
    }

    #[test]
    fn zero_motion_gives_zero_measurement() {
        let earth = EarthModel::wgs84().with_rotation_rate(0.0);
        let nav = NavState {
            attitude: Dcm::identity(),
            velocity: Vec3::zeros(),
            position: GeodeticPosition::from_degrees(0.0, 30.0, 0.0).unwrap(),
            t: 0.0,
        };
        let y = measurement_predict(&earth, &nav, &Calibration::nominal(8.6), &Vec3::zeros(), &Vec3::zeros());
        assert_eq!(y, Vec3::zeros());
    }

    #[test]
    fn forward_motion_with_identity_calibration() {
        let earth = EarthModel::wgs84();
        // body x along North: C_b^n maps x to N
        let nav = NavState {
            attitude: Dcm::identity(),
            velocity: Vec3::new(12.0, 0.0, 0.0),
            position: GeodeticPosition::from_degrees(0.0, 30.0, 0.0).unwrap(),
            t: 0.0,
        };
        let w_ie_b = earth.earth_rate_n(&nav.position);
        let y = measurement_predict(&earth, &nav, &Calibration::nominal(8.6), &w_ie_b, &Vec3::zeros());
        assert!((y - Vec3::new(8.6 * 12.0, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn factor_partial_is_linear_structure() {
        let earth = EarthModel::wgs84();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let (nav, calib, w, bg) = random_case(&mut rng);
            let y = measurement_predict(&earth, &nav, &calib, &w, &bg);
            let h = measurement_jacobian(&earth, &nav, &calib, &w, &bg);
            assert!((h[(0, FAC)] - y.x / calib.factor).abs() < 1e-12 * y.x.abs().max(1.0));
            assert!(h.fixed_view::<3, 3>(0, POS).iter().all(|x| *x == 0.0));
        }
    }

    #[test]
    fn variants_close_under_reapplication() {
        for (y, p, f) in [(0.0, 0.0, 8.6), (0.3, -1.2, 8.6), (-2.9, 3.0, -4.0)] {
            let set = indiscriminable_variants(y, p, f);
            for v in set {
                let again = indiscriminable_variants(v.0, v.1, v.2);
                for w in again {
                    assert!(set.iter().any(|s| {
                        wrap_pi(s.0 - w.0).abs() < 1e-12 && wrap_pi(s.1 - w.1).abs() < 1e-12 && s.2 == w.2
                    }));
                }
            }
        }
        let zero = indiscriminable_variants(0.0, 0.0, 8.6);
        assert_eq!(zero[0], (0.0, 0.0, 8.6));
        assert_eq!(zero[1], (PI, PI, 8.6));
        assert_eq!(zero[2], (PI, 0.0, -8.6));
        assert_eq!(zero[3], (0.0, PI, -8.6));
    }

    #[test]
    fn variants_give_identical_pulse_rate() {
        let earth = EarthModel::wgs84();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..1000 {
            let (nav, calib, w, bg) = random_case(&mut rng);
            let m = calib.misalignment;
            let y0 = measurement_predict(&earth, &nav, &calib, &w, &bg);
            for (yaw, pitch, factor) in indiscriminable_variants(m.yaw, m.pitch, calib.factor) {
                let c = Calibration { misalignment: MisalignmentAngles::new(yaw, pitch), factor, ..calib };
                let y = measurement_predict(&earth, &nav, &c, &w, &bg);
                let scale = y0.norm().max(1e-300);
                assert!((y.x - y0.x).abs() < 1e-12 * scale);
                // lateral and vertical residuals agree up to sign
                assert!((y.y.abs() - y0.y.abs()).abs() < 1e-12 * scale);
                assert!((y.z.abs() - y0.z.abs()).abs() < 1e-12 * scale);
            }
        }
    }

    #[test]
    fn transition_matrix_of_zero_step_is_identity() {
        let f = StateMatrix::from_fn(|i, j| (i as f64 - j as f64) * 0.01);
        assert_eq!(transition_matrix(&f, 0.0), StateMatrix::identity());
    }
}
