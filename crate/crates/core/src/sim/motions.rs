//! Classical coning and sculling motions with closed-form sensor increments,
//! used to measure attitude and velocity integration error.

use super::quadrature::{gauss_legendre, GL8};
use crate::earth::{Dcm, Vec3};
use crate::strapdown::{coning_rotation_vector, sculling_velocity, ImuIncrement};

/// Body x axis sweeping a cone of half-angle `half_angle` at `frequency`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConingMotion {
    /// rad
    pub half_angle: f64,
    /// rad/s
    pub frequency: f64,
}

impl ConingMotion {
    /// `C_b^i(t)`, identity at `t = 0`.
    pub fn attitude(&self, t: f64) -> Dcm {
        let a = Dcm::from_rotation_vector(&(Vec3::x() * (self.frequency * t)));
        let b = Dcm::from_rotation_vector(&(Vec3::y() * self.half_angle));
        b.transpose() * a * b * a.transpose()
    }

    pub fn rate(&self, t: f64) -> Vec3 {
        let (s, c) = self.half_angle.sin_cos();
        let (sw, cw) = (self.frequency * t).sin_cos();
        Vec3::new(c - 1.0, -s * sw, s * cw) * self.frequency
    }

    pub fn increment(&self, t0: f64, t1: f64) -> ImuIncrement {
        let (s, c) = self.half_angle.sin_cos();
        let w = self.frequency;
        let dtheta = Vec3::new(
            w * (c - 1.0) * (t1 - t0),
            s * ((w * t1).cos() - (w * t0).cos()),
            s * ((w * t1).sin() - (w * t0).sin()),
        );
        ImuIncrement { t: t1, dtheta, dv: Vec3::zeros() }
    }

    pub fn increments(&self, sub_interval: f64, count: usize) -> Vec<ImuIncrement> {
        (0..count).map(|k| self.increment(k as f64 * sub_interval, (k + 1) as f64 * sub_interval)).collect()
    }
}

/// In-phase angular oscillation about x and specific-force oscillation along
/// y, which rectifies into a steady velocity drift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScullingMotion {
    /// rad
    pub angle: f64,
    /// m/s^2
    pub force: f64,
    /// rad/s
    pub frequency: f64,
}

impl ScullingMotion {
    pub fn attitude(&self, t: f64) -> Dcm {
        Dcm::from_rotation_vector(&(Vec3::x() * (self.angle * (self.frequency * t).sin())))
    }

    fn force_b(&self, t: f64) -> Vec3 {
        Vec3::new(0.0, self.force * (self.frequency * t).sin(), 0.0)
    }

    pub fn increment(&self, t0: f64, t1: f64) -> ImuIncrement {
        let w = self.frequency;
        let dtheta = Vec3::new(self.angle * ((w * t1).sin() - (w * t0).sin()), 0.0, 0.0);
        let dv = Vec3::new(0.0, self.force * ((w * t0).cos() - (w * t1).cos()) / w, 0.0);
        ImuIncrement { t: t1, dtheta, dv }
    }

    pub fn increments(&self, sub_interval: f64, count: usize) -> Vec<ImuIncrement> {
        (0..count).map(|k| self.increment(k as f64 * sub_interval, (k + 1) as f64 * sub_interval)).collect()
    }

    /// `int_0^t C_b^i f^b dt` by composite Gauss-Legendre quadrature.
    pub fn velocity(&self, t: f64, panels: usize) -> Vec3 {
        let h = t / panels as f64;
        (0..panels)
            .map(|k| {
                gauss_legendre(&GL8, k as f64 * h, (k + 1) as f64 * h, |s| {
                    (self.attitude(s) * self.force_b(s), 0.0)
                })
                .0
            })
            .sum()
    }
}

/// Attitude/velocity integration scheme in a non-rotating frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// one increment per update, rotation compensation only
    SingleSample,
    /// two increments per update with coning and sculling corrections
    TwoSample,
}

/// Integrates increments from identity attitude and zero velocity in the
/// frame fixed to the initial body axes.
pub fn integrate_inertial(increments: &[ImuIncrement], scheme: Scheme) -> (Dcm, Vec3) {
    let mut c = Dcm::identity();
    let mut v = Vec3::zeros();
    match scheme {
        Scheme::SingleSample => {
            for inc in increments {
                v += c * (inc.dv + inc.dtheta.cross(&inc.dv) * 0.5);
                c = (c * Dcm::from_rotation_vector(&inc.dtheta)).orthonormalized();
            }
        }
        Scheme::TwoSample => {
            for p in increments.chunks_exact(2) {
                v += c * sculling_velocity(&p[0].dtheta, &p[1].dtheta, &p[0].dv, &p[1].dv);
                c = (c * Dcm::from_rotation_vector(&coning_rotation_vector(&p[0].dtheta, &p[1].dtheta)))
                    .orthonormalized();
            }
        }
    }
    (c, v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coning_increments_integrate_the_rate() {
        let m = ConingMotion { half_angle: 0.1, frequency: 3.0 };
        let inc = m.increment(0.2, 0.7);
        let (q, _) = gauss_legendre(&GL8, 0.2, 0.7, |t| (m.rate(t), 0.0));
        assert!((inc.dtheta - q).norm() < 1e-12);
    }

    #[test]
    fn coning_rate_matches_attitude_derivative() {
        let m = ConingMotion { half_angle: 0.2, frequency: 2.0 };
        let (t, h) = (0.37, 1e-4);
        let d = (m.attitude(t).transpose() * m.attitude(t + h)).rotation_vector()
            - (m.attitude(t).transpose() * m.attitude(t - h)).rotation_vector();
        assert!((d / (2.0 * h) - m.rate(t)).norm() < 1e-6);
    }

    #[test]
    fn fine_two_sample_matches_closed_form_attitude() {
        let m = ConingMotion { half_angle: 0.05, frequency: 2.0 * std::f64::consts::PI };
        let (c, _) = integrate_inertial(&m.increments(1e-4, 20_000), Scheme::TwoSample);
        let e = (m.attitude(2.0).matrix() - c.matrix()).norm();
        assert!(e < 1e-10, "{e:e}");
    }

    #[test]
    fn sculling_velocity_matches_quadrature() {
        let m = ScullingMotion { angle: 0.02, force: 1.0, frequency: 2.0 * std::f64::consts::PI };
        let (_, v) = integrate_inertial(&m.increments(1e-4, 20_000), Scheme::TwoSample);
        let e = (v - m.velocity(2.0, 200)).norm();
        assert!(e < 1e-10, "{e:e}");
    }

    #[test]
    fn two_sample_beats_single_sample_by_two_orders() {
        let (h, n) = (0.005, 2000);
        let w = 2.0 * std::f64::consts::PI;
        let m = ConingMotion { half_angle: 0.05, frequency: w };
        let r = integrate_inertial(&m.increments(h / 100.0, n * 100), Scheme::TwoSample).0;
        let two = integrate_inertial(&m.increments(h, n), Scheme::TwoSample).0;
        let one = integrate_inertial(&m.increments(h, n), Scheme::SingleSample).0;
        let ratio = (one.matrix() - r.matrix()).norm() / (two.matrix() - r.matrix()).norm();
        assert!(ratio >= 100.0, "coning {ratio}");

        let s = ScullingMotion { angle: 0.02, force: 1.0, frequency: w };
        let r = integrate_inertial(&s.increments(h / 100.0, n * 100), Scheme::TwoSample).1;
        let two = integrate_inertial(&s.increments(h, n), Scheme::TwoSample).1;
        let one = integrate_inertial(&s.increments(h, n), Scheme::SingleSample).1;
        let ratio = (one - r).norm() / (two - r).norm();
        assert!(ratio >= 100.0, "sculling {ratio}");
    }
}
