//! Earth model, geodetic positions and attitude helpers.
//!
//! The local-level navigation frame is North-Up-East throughout the crate, so a
//! velocity is `[v_N, v_U, v_E]` and a position is `[longitude, latitude, height]`.
//! Body and vehicle frames are right-handed; the vehicle frame has x forward,
//! y right along the rear axle and z down.

use std::f64::consts::PI;
use std::ops::Mul;

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// WGS-84 semi-major axis, m.
pub const WGS84_SEMI_MAJOR: f64 = 6_378_137.0;
/// WGS-84 flattening.
pub const WGS84_FLATTENING: f64 = 1.0 / 298.257_223_563;
/// WGS-84 Earth rotation rate, rad/s.
pub const WGS84_ROTATION_RATE: f64 = 7.292_115e-5;
/// WGS-84 gravitational constant GM, m^3/s^2.
pub const WGS84_GM: f64 = 3.986_004_418e14;
/// Normal gravity at the equator, m/s^2.
pub const GRAVITY_EQUATOR: f64 = 9.780_325_335_9;
/// Normal gravity at the poles, m/s^2.
pub const GRAVITY_POLE: f64 = 9.832_184_937_8;
/// Standard gravity, m/s^2.
pub const STANDARD_GRAVITY: f64 = 9.806_65;
/// Mean Earth radius used by the spherical model, m.
pub const MEAN_RADIUS: f64 = 6_371_000.0;

/// cos(latitude) below which the local-level frame is considered singular.
pub const POLE_GUARD: f64 = 1e-6;

/// Cross-product matrix: `skew(a) * b == a.cross(&b)`.
pub fn skew(v: &Vec3) -> Mat3 {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_pi(angle: f64) -> f64 {
    let mut a = angle.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Direction cosine matrix. The frame pair is documented at each use site,
/// e.g. `C_b^n` maps body-frame components into the navigation frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dcm(Mat3);

impl Dcm {
    pub fn identity() -> Self {
        Dcm(Mat3::identity())
    }

    /// Wraps a matrix without checking orthonormality.
    pub fn from_matrix_unchecked(m: Mat3) -> Self {
        Dcm(m)
    }

    /// Wraps a matrix, rejecting anything that is not a proper rotation.
    pub fn from_matrix(m: Mat3) -> Result<Self> {
        let dcm = Dcm(m);
        if dcm.orthonormality_error() > 1e-9 || m.determinant() <= 0.0 {
            return Err(Error::InvalidInput(
                "matrix is not a proper rotation".to_string(),
            ));
        }
        Ok(dcm)
    }

    /// exp([v x]) via Rodrigues' formula.
    pub fn from_rotation_vector(v: &Vec3) -> Self {
        let angle2 = v.norm_squared();
        let k = skew(v);
        let (a, b) = if angle2 < 1e-12 {
            // Taylor series keeps full precision for tiny rotations.
            (1.0 - angle2 / 6.0 + angle2 * angle2 / 120.0, 0.5 - angle2 / 24.0 + angle2 * angle2 / 720.0)
        } else {
            let angle = angle2.sqrt();
            (angle.sin() / angle, (1.0 - angle.cos()) / angle2)
        };
        Dcm(Mat3::identity() + k * a + k * k * b)
    }

    /// Rotation vector of this DCM (inverse of [`Dcm::from_rotation_vector`]).
    pub fn rotation_vector(&self) -> Vec3 {
        // via the quaternion: keeps full precision at small angles
        let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(self.0));
        let (w, v) = if q.w < 0.0 { (-q.w, -q.imag()) } else { (q.w, q.imag()) };
        let n = v.norm();
        if n == 0.0 {
            return Vec3::zeros();
        }
        v * (2.0 * n.atan2(w) / n)
    }

    /// Scalar-first unit quaternion `[q0, q1, q2, q3]` with `q0 >= 0`.
    pub fn to_quaternion(&self) -> [f64; 4] {
        let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(self.0));
        let s = if q.w < 0.0 { -1.0 } else { 1.0 };
        [s * q.w, s * q.i, s * q.j, s * q.k]
    }

    pub fn from_quaternion(q: [f64; 4]) -> Self {
        let uq = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(q[0], q[1], q[2], q[3]));
        Dcm(*uq.to_rotation_matrix().matrix())
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Dcm(self.0.transpose())
    }

    /// max |C^T C - I|.
    pub fn orthonormality_error(&self) -> f64 {
        (self.0.transpose() * self.0 - Mat3::identity()).abs().max()
    }

    /// One symmetric (Newton-Schulz) correction step: C (3I - C^T C) / 2.
    /// Quadratically convergent, so one step per update keeps C at machine
    /// precision.
    pub fn orthonormalized(&self) -> Self {
        let ctc = self.0.transpose() * self.0;
        Dcm(self.0 * (Mat3::identity() * 3.0 - ctc) * 0.5)
    }

    /// Full re-projection onto SO(3) for matrices far from orthonormal.
    pub fn project(m: &Mat3) -> Self {
        let svd = m.svd(true, true);
        let u = svd.u.expect("svd u");
        let vt = svd.v_t.expect("svd v");
        let mut d = Mat3::identity();
        if (u * vt).determinant() < 0.0 {
            d[(2, 2)] = -1.0;
        }
        Dcm(u * d * vt)
    }
}

impl Mul for Dcm {
    type Output = Dcm;
    fn mul(self, rhs: Dcm) -> Dcm {
        Dcm(self.0 * rhs.0)
    }
}

impl Mul<Vec3> for Dcm {
    type Output = Vec3;
    fn mul(self, rhs: Vec3) -> Vec3 {
        self.0 * rhs
    }
}

impl Mul<&Vec3> for &Dcm {
    type Output = Vec3;
    fn mul(self, rhs: &Vec3) -> Vec3 {
        self.0 * rhs
    }
}

/// Longitude, latitude and height above the ellipsoid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeodeticPosition {
    /// rad, wrapped to (-pi, pi]
    pub longitude: f64,
    /// rad, |L| <= pi/2
    pub latitude: f64,
    /// m
    pub height: f64,
}

impl GeodeticPosition {
    pub fn new(longitude: f64, latitude: f64, height: f64) -> Result<Self> {
        if !(longitude.is_finite() && latitude.is_finite() && height.is_finite()) {
            return Err(Error::InvalidInput("non-finite position".to_string()));
        }
        if latitude.abs() > PI / 2.0 + 1e-12 {
            return Err(Error::InvalidInput(format!("latitude {latitude} out of range")));
        }
        Ok(Self {
            longitude: wrap_pi(longitude),
            latitude: latitude.clamp(-PI / 2.0, PI / 2.0),
            height,
        })
    }

    pub fn from_degrees(longitude_deg: f64, latitude_deg: f64, height: f64) -> Result<Self> {
        Self::new(longitude_deg.to_radians(), latitude_deg.to_radians(), height)
    }

    /// `[lambda, L, h]`
    pub fn as_vector(&self) -> Vec3 {
        Vec3::new(self.longitude, self.latitude, self.height)
    }
}

/// IMU-to-vehicle mounting angles. The rotation from body to vehicle is a yaw
/// about y, then a pitch about z, then a roll about x. Roll cannot be seen by
/// the odometer and is held at zero everywhere except in tests of that fact.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MisalignmentAngles {
    /// rotation about y, rad
    pub yaw: f64,
    /// rotation about z, rad
    pub pitch: f64,
    /// rotation about x, rad
    #[serde(default)]
    pub roll: f64,
}

impl MisalignmentAngles {
    pub fn new(yaw: f64, pitch: f64) -> Self {
        Self { yaw: wrap_pi(yaw), pitch: wrap_pi(pitch), roll: 0.0 }
    }

    pub fn with_roll(self, roll: f64) -> Self {
        Self { roll: wrap_pi(roll), ..self }
    }
}

/// Body-to-vehicle DCM `C_b^a` for the y-z-x rotation sequence.
pub fn misalignment_dcm(angles: &MisalignmentAngles) -> Dcm {
    let (sp, cp) = angles.yaw.sin_cos();
    let (st, ct) = angles.pitch.sin_cos();
    let (sr, cr) = angles.roll.sin_cos();
    Dcm(Matrix3::new(
        ct * cp,
        st,
        -ct * sp,
        sr * sp - cr * cp * st,
        cr * ct,
        cp * sr + cr * st * sp,
        cr * sp + cp * sr * st,
        -ct * sr,
        cr * cp - sr * st * sp,
    ))
}

/// First row of `C_b^a`: the vehicle forward axis in body coordinates. It
/// depends on yaw and pitch only.
pub fn forward_axis(yaw: f64, pitch: f64) -> Vec3 {
    let (sp, cp) = yaw.sin_cos();
    let (st, ct) = pitch.sin_cos();
    Vec3::new(ct * cp, st, -ct * sp)
}

/// How gravity is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GravityModel {
    /// Somigliana normal gravity with the free-air height correction.
    Normal,
    /// Constant magnitude, pointing down.
    Constant(f64),
    /// No gravity (debug runs).
    Zero,
}

/// Reference ellipsoid and rotation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarthModel {
    pub semi_major_axis: f64,
    pub flattening: f64,
    pub rotation_rate: f64,
    pub gravity: GravityModel,
}

impl Default for EarthModel {
    fn default() -> Self {
        Self::wgs84()
    }
}

impl EarthModel {
    pub fn wgs84() -> Self {
        Self {
            semi_major_axis: WGS84_SEMI_MAJOR,
            flattening: WGS84_FLATTENING,
            rotation_rate: WGS84_ROTATION_RATE,
            gravity: GravityModel::Normal,
        }
    }

    /// Sphere of the given radius with constant standard gravity, for analytic
    /// test cases (`R_E == R_N == radius`).
    pub fn spherical(radius: f64) -> Self {
        Self {
            semi_major_axis: radius,
            flattening: 0.0,
            rotation_rate: WGS84_ROTATION_RATE,
            gravity: GravityModel::Constant(STANDARD_GRAVITY),
        }
    }

    pub fn with_rotation_rate(self, rotation_rate: f64) -> Self {
        Self { rotation_rate, ..self }
    }

    pub fn with_gravity(self, gravity: GravityModel) -> Self {
        Self { gravity, ..self }
    }

    pub fn eccentricity_squared(&self) -> f64 {
        self.flattening * (2.0 - self.flattening)
    }

    pub fn semi_minor_axis(&self) -> f64 {
        self.semi_major_axis * (1.0 - self.flattening)
    }

    /// Transverse (prime vertical) radius of curvature `R_E`.
    pub fn transverse_radius(&self, latitude: f64) -> f64 {
        let e2 = self.eccentricity_squared();
        let s = latitude.sin();
        self.semi_major_axis / (1.0 - e2 * s * s).sqrt()
    }

    /// Meridian radius of curvature `R_N`.
    pub fn meridian_radius(&self, latitude: f64) -> f64 {
        let e2 = self.eccentricity_squared();
        let s = latitude.sin();
        self.semi_major_axis * (1.0 - e2) / (1.0 - e2 * s * s).powf(1.5)
    }

    fn check_pole(&self, p: &GeodeticPosition) -> Result<f64> {
        let c = p.latitude.cos();
        if c <= POLE_GUARD {
            return Err(Error::NearPole { latitude_rad: p.latitude });
        }
        Ok(c)
    }

    /// `R_c` such that `d[lambda, L, h]/dt = R_c * v^n` for NUE velocity.
    pub fn curvature_matrix(&self, p: &GeodeticPosition) -> Result<Mat3> {
        let cos_lat = self.check_pole(p)?;
        let re = self.transverse_radius(p.latitude) + p.height;
        let rn = self.meridian_radius(p.latitude) + p.height;
        Ok(Matrix3::new(
            0.0, 0.0, 1.0 / (re * cos_lat),
            1.0 / rn, 0.0, 0.0,
            0.0, 1.0, 0.0,
        ))
    }

    /// Earth rotation rate in the NUE frame.
    pub fn earth_rate_n(&self, p: &GeodeticPosition) -> Vec3 {
        let (s, c) = p.latitude.sin_cos();
        Vec3::new(self.rotation_rate * c, self.rotation_rate * s, 0.0)
    }

    /// Rotation rate of the NUE frame relative to the Earth.
    pub fn transport_rate(&self, p: &GeodeticPosition, v: &Vec3) -> Result<Vec3> {
        let cos_lat = self.check_pole(p)?;
        let re = self.transverse_radius(p.latitude) + p.height;
        let rn = self.meridian_radius(p.latitude) + p.height;
        let tan_lat = p.latitude.sin() / cos_lat;
        Ok(Vec3::new(v[2] / re, v[2] * tan_lat / re, -v[0] / rn))
    }

    /// d(transport_rate)/dv, a constant matrix at fixed position.
    pub fn transport_rate_jacobian(&self, p: &GeodeticPosition) -> Result<Mat3> {
        let cos_lat = self.check_pole(p)?;
        let re = self.transverse_radius(p.latitude) + p.height;
        let rn = self.meridian_radius(p.latitude) + p.height;
        let tan_lat = p.latitude.sin() / cos_lat;
        Ok(Matrix3::new(
            0.0, 0.0, 1.0 / re,
            0.0, 0.0, tan_lat / re,
            -1.0 / rn, 0.0, 0.0,
        ))
    }

    /// Gravity magnitude at the position (positive number).
    pub fn gravity_magnitude(&self, p: &GeodeticPosition) -> f64 {
        match self.gravity {
            GravityModel::Zero => 0.0,
            GravityModel::Constant(g) => g,
            GravityModel::Normal => {
                let a = self.semi_major_axis;
                let b = self.semi_minor_axis();
                let f = self.flattening;
                let e2 = self.eccentricity_squared();
                let s2 = p.latitude.sin().powi(2);
                let k = (b * GRAVITY_POLE - a * GRAVITY_EQUATOR) / (a * GRAVITY_EQUATOR);
                let g0 = GRAVITY_EQUATOR * (1.0 + k * s2) / (1.0 - e2 * s2).sqrt();
                let m = self.rotation_rate.powi(2) * a * a * b / WGS84_GM;
                let h = p.height;
                g0 * (1.0 - 2.0 / a * (1.0 + f + m - 2.0 * f * s2) * h + 3.0 * h * h / (a * a))
            }
        }
    }

    /// Gravity vector in NUE (pointing down the Up axis).
    pub fn normal_gravity(&self, p: &GeodeticPosition) -> Vec3 {
        Vec3::new(0.0, -self.gravity_magnitude(p), 0.0)
    }

    /// Earth-centred Earth-fixed coordinates.
    pub fn to_ecef(&self, p: &GeodeticPosition) -> Vec3 {
        let e2 = self.eccentricity_squared();
        let (sl, cl) = p.latitude.sin_cos();
        let (so, co) = p.longitude.sin_cos();
        let n = self.transverse_radius(p.latitude);
        Vec3::new(
            (n + p.height) * cl * co,
            (n + p.height) * cl * so,
            (n * (1.0 - e2) + p.height) * sl,
        )
    }

    /// Inverse of [`EarthModel::to_ecef`] by fixed-point iteration on latitude.
    pub fn from_ecef(&self, r: &Vec3) -> GeodeticPosition {
        let e2 = self.eccentricity_squared();
        let rho = (r.x * r.x + r.y * r.y).sqrt();
        let longitude = r.y.atan2(r.x);
        let mut lat = r.z.atan2(rho * (1.0 - e2));
        for _ in 0..10 {
            let n = self.transverse_radius(lat);
            let (sl, cl) = lat.sin_cos();
            let h = if cl.abs() > 1e-3 { rho / cl - n } else { r.z / sl - n * (1.0 - e2) };
            let next = r.z.atan2(rho * (1.0 - e2 * n / (n + h)));
            let done = (next - lat).abs() < 1e-15;
            lat = next;
            if done {
                break;
            }
        }
        let n = self.transverse_radius(lat);
        let (sl, cl) = lat.sin_cos();
        let h = if cl.abs() > 1e-3 { rho / cl - n } else { r.z / sl - n * (1.0 - e2) };
        GeodeticPosition { longitude, latitude: lat, height: h }
    }

    /// Earth rotation vector in ECEF.
    pub fn earth_rate_e(&self) -> Vec3 {
        Vec3::new(0.0, 0.0, self.rotation_rate)
    }

    /// Moves a position by a local NUE displacement in metres, through `R_c`.
    pub fn displace(&self, p: &GeodeticPosition, d_nue: &Vec3) -> Result<GeodeticPosition> {
        let rc = self.curvature_matrix(p)?;
        let dp = rc * d_nue;
        Ok(GeodeticPosition {
            longitude: wrap_pi(p.longitude + dp[0]),
            latitude: p.latitude + dp[1],
            height: p.height + dp[2],
        })
    }

    /// Exact NUE offset (metres, in the frame at `from`) of `to` relative to `from`.
    pub fn local_offset(&self, from: &GeodeticPosition, to: &GeodeticPosition) -> Vec3 {
        let d = self.to_ecef(to) - self.to_ecef(from);
        ecef_to_nue(from).transpose() * d
    }
}

/// `C_n^e` for the NUE frame: its columns are the North, Up and East unit
/// vectors in ECEF.
pub fn ecef_to_nue(p: &GeodeticPosition) -> Dcm {
    let (sl, cl) = p.latitude.sin_cos();
    let (so, co) = p.longitude.sin_cos();
    Dcm(Matrix3::new(
        -sl * co, cl * co, -so,
        -sl * so, cl * so, co,
        cl, sl, 0.0,
    ))
}

/// Attitude error of `estimate` relative to `truth` as an NUE rotation vector
/// (N and E components are level errors, U is heading error), rad.
pub fn attitude_error(truth: &Dcm, estimate: &Dcm) -> Vec3 {
    (*truth * estimate.transpose()).rotation_vector()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn skew_basis_identity() {
        assert_eq!(skew(&Vec3::zeros()), Mat3::zeros());
        let e3 = skew(&Vec3::x()) * Vec3::y();
        assert_eq!(e3, Vec3::z());
    }

    #[test]
    fn skew_matches_componentwise_cross_product() {
        let mut rng = 12345u64;
        let mut next = || {
            rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (rng >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for _ in 0..100 {
            let a = Vec3::new(next(), next(), next());
            let b = Vec3::new(next(), next(), next());
            let cross = Vec3::new(
                a[1] * b[2] - a[2] * b[1],
                a[2] * b[0] - a[0] * b[2],
                a[0] * b[1] - a[1] * b[0],
            );
            assert_eq!(skew(&a) * b, cross);
            let s = skew(&a);
            assert_eq!(s, -s.transpose());
        }
    }

    #[test]
    fn curvature_matrix_spherical_equator() {
        let r = 6_400_000.0;
        let earth = EarthModel::spherical(r);
        let p = GeodeticPosition::new(0.3, 0.0, 0.0).unwrap();
        let rc = earth.curvature_matrix(&p).unwrap();
        assert_relative_eq!(rc[(0, 2)], 1.0 / r, max_relative = 1e-15);
        assert_relative_eq!(rc[(1, 0)], 1.0 / r, max_relative = 1e-15);
        assert_eq!(rc[(2, 1)], 1.0);
    }

    #[test]
    fn curvature_matrix_zero_pattern() {
        let earth = EarthModel::wgs84();
        let p = GeodeticPosition::from_degrees(112.0, 28.0, 50.0).unwrap();
        let rc = earth.curvature_matrix(&p).unwrap();
        for (i, j) in [(0, 0), (0, 1), (1, 1), (1, 2), (2, 0), (2, 2)] {
            assert_eq!(rc[(i, j)], 0.0, "entry ({i},{j})");
        }
    }

    #[test]
    fn curvature_matrix_wgs84_45deg_1000m() {
        // Frozen from an independent 50-digit evaluation of
        // R_E = a / sqrt(1 - e^2 sin^2 L), R_N = a (1 - e^2) / (1 - e^2 sin^2 L)^1.5.
        let earth = EarthModel::wgs84();
        let p = GeodeticPosition::from_degrees(0.0, 45.0, 1000.0).unwrap();
        let rc = earth.curvature_matrix(&p).unwrap();
        assert_relative_eq!(rc[(0, 2)], 2.2132227736647187e-7, max_relative = 1e-13);
        assert_relative_eq!(rc[(1, 0)], 1.5702576085298913e-7, max_relative = 1e-13);
    }

    #[test]
    fn curvature_matrix_rejects_pole() {
        let earth = EarthModel::wgs84();
        let p = GeodeticPosition::new(0.0, PI / 2.0, 0.0).unwrap();
        assert!(matches!(earth.curvature_matrix(&p), Err(Error::NearPole { .. })));
        assert!(earth.transport_rate(&p, &Vec3::x()).is_err());
    }

    #[test]
    fn curvature_matrix_is_smooth() {
        let earth = EarthModel::wgs84();
        let lat0 = 0.7;
        let h0 = 300.0;
        let eval = |lat: f64, h: f64| {
            earth.curvature_matrix(&GeodeticPosition::new(0.0, lat, h).unwrap()).unwrap()
        };
        // second differences vanish at the rate of a smooth function
        for step in [1e-3, 5e-4] {
            let d2 = eval(lat0 + step, h0) - eval(lat0, h0) * 2.0 + eval(lat0 - step, h0);
            assert!(d2.abs().max() < 1e-12 * step * 1e3);
            let d2h = eval(lat0, h0 + 10.0) - eval(lat0, h0) * 2.0 + eval(lat0, h0 - 10.0);
            // 1/(R+h) has relative second difference ~ 2 (dh/R)^2
            let scale = eval(lat0, h0).abs().max();
            assert!(d2h.abs().max() < 2.5 * (10.0f64 / 6.3e6).powi(2) * scale);
        }
    }

    #[test]
    fn earth_rate_and_transport_rate() {
        let earth = EarthModel::wgs84();
        let eq = GeodeticPosition::new(0.0, 0.0, 0.0).unwrap();
        assert_eq!(earth.transport_rate(&eq, &Vec3::zeros()).unwrap(), Vec3::zeros());
        let pole = GeodeticPosition::new(0.0, PI / 2.0, 0.0).unwrap();
        let w = earth.earth_rate_n(&pole);
        assert_relative_eq!(w.norm(), WGS84_ROTATION_RATE, max_relative = 1e-15);
        assert!(w[0].abs() < 1e-20 && w[2] == 0.0);
        let p30 = GeodeticPosition::from_degrees(0.0, 30.0, 0.0).unwrap();
        let w30 = earth.earth_rate_n(&p30);
        let expected = Vec3::new(
            WGS84_ROTATION_RATE * 3f64.sqrt() / 2.0,
            WGS84_ROTATION_RATE * 0.5,
            0.0,
        );
        assert_relative_eq!(w30, expected, max_relative = 1e-14);
    }

    #[test]
    fn transport_rate_matches_ecef_frame_rotation() {
        // Rotation rate of the NUE frame from finite differences of C_n^e
        // along the path p(t) = p0 + R_c v t.
        let earth = EarthModel::wgs84();
        let p = GeodeticPosition::from_degrees(112.0, 40.0, 200.0).unwrap();
        let v = Vec3::new(12.0, 0.5, -7.0);
        let dt = 1e-2;
        let rc = earth.curvature_matrix(&p).unwrap();
        let p_plus = {
            let d = rc * v * dt;
            GeodeticPosition::new(p.longitude + d[0], p.latitude + d[1], p.height + d[2]).unwrap()
        };
        let p_minus = {
            let d = rc * v * -dt;
            GeodeticPosition::new(p.longitude + d[0], p.latitude + d[1], p.height + d[2]).unwrap()
        };
        let c = ecef_to_nue(&p);
        let cdot = (ecef_to_nue(&p_plus).matrix() - ecef_to_nue(&p_minus).matrix()) / (2.0 * dt);
        let omega = c.matrix().transpose() * cdot;
        let w = Vec3::new(omega[(2, 1)], omega[(0, 2)], omega[(1, 0)]);
        let expected = earth.transport_rate(&p, &v).unwrap();
        assert_relative_eq!(w, expected, max_relative = 1e-6);
    }

    #[test]
    fn normal_gravity_reference_values() {
        let earth = EarthModel::wgs84();
        let eq = GeodeticPosition::new(0.0, 0.0, 0.0).unwrap();
        assert_relative_eq!(earth.gravity_magnitude(&eq), GRAVITY_EQUATOR, max_relative = 1e-12);
        let pole = GeodeticPosition::new(0.0, PI / 2.0, 0.0).unwrap();
        assert_relative_eq!(earth.gravity_magnitude(&pole), GRAVITY_POLE, max_relative = 1e-9);
        // free-air gradient of about 3.086e-6 s^-2
        let hi = GeodeticPosition::new(0.0, 0.5, 1000.0).unwrap();
        let lo = GeodeticPosition::new(0.0, 0.5, 0.0).unwrap();
        let grad = (earth.gravity_magnitude(&lo) - earth.gravity_magnitude(&hi)) / 1000.0;
        assert!((grad - 3.086e-6).abs() < 1e-8, "{grad}");
    }

    #[test]
    fn misalignment_dcm_examples() {
        let id = misalignment_dcm(&MisalignmentAngles::new(0.0, 0.0));
        assert_eq!(*id.matrix(), Mat3::identity());
        let q = misalignment_dcm(&MisalignmentAngles::new(PI / 2.0, 0.0));
        let expected = Matrix3::new(0.0, 0.0, -1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0);
        assert!((q.matrix() - expected).abs().max() < 1e-15);
        let a = MisalignmentAngles::new(0.4, -0.2).with_roll(0.7);
        let c = misalignment_dcm(&a);
        assert_eq!(c.matrix()[(0, 1)], a.pitch.sin());
        assert_eq!(c.matrix()[(0, 0)], a.pitch.cos() * a.yaw.cos());
    }

    #[test]
    fn misalignment_dcm_is_y_then_z_then_x() {
        let a = MisalignmentAngles::new(0.3, -0.5).with_roll(1.1);
        // frame rotations: C_b^a = R_x(roll) R_z(pitch) R_y(yaw) as passive rotations
        let rx = |r: f64| Matrix3::new(1.0, 0.0, 0.0, 0.0, r.cos(), r.sin(), 0.0, -r.sin(), r.cos());
        let ry = |r: f64| Matrix3::new(r.cos(), 0.0, -r.sin(), 0.0, 1.0, 0.0, r.sin(), 0.0, r.cos());
        let rz = |r: f64| Matrix3::new(r.cos(), r.sin(), 0.0, -r.sin(), r.cos(), 0.0, 0.0, 0.0, 1.0);
        let expected = rx(a.roll) * rz(a.pitch) * ry(a.yaw);
        assert!((misalignment_dcm(&a).matrix() - expected).abs().max() < 1e-15);
    }

    #[test]
    fn ecef_round_trip() {
        let earth = EarthModel::wgs84();
        for &(lon, lat, h) in &[(0.1, 0.2, 10.0), (-2.0, -1.2, 4000.0), (3.0, 1.5, -50.0)] {
            let p = GeodeticPosition::new(lon, lat, h).unwrap();
            let q = earth.from_ecef(&earth.to_ecef(&p));
            assert!((q.latitude - lat).abs() < 1e-14);
            assert!((q.longitude - lon).abs() < 1e-14);
            assert!((q.height - h).abs() < 1e-8);
        }
    }

    #[test]
    fn quaternion_round_trip() {
        let c = Dcm::from_rotation_vector(&Vec3::new(0.3, -1.0, 2.0));
        let back = Dcm::from_quaternion(c.to_quaternion());
        assert!((back.matrix() - c.matrix()).abs().max() < 1e-14);
        let v = c.rotation_vector();
        assert_relative_eq!(v, Vec3::new(0.3, -1.0, 2.0), max_relative = 1e-12);
    }

    proptest! {
        #[test]
        fn misalignment_dcm_transpose_is_inverse(yaw in -PI..PI, pitch in -PI..PI) {
            let c = misalignment_dcm(&MisalignmentAngles::new(yaw, pitch));
            prop_assert!(c.orthonormality_error() < 1e-10);
            prop_assert!(c.matrix().determinant() > 0.0);
            let prod = c.transpose() * c;
            prop_assert!((prod.matrix() - Mat3::identity()).abs().max() < 1e-12);
            prop_assert!((forward_axis(yaw, pitch) - c.matrix().row(0).transpose()).abs().max() < 1e-15);
        }

        #[test]
        fn rotation_vector_dcm_is_proper(x in -3.0..3.0f64, y in -3.0..3.0f64, z in -3.0..3.0f64) {
            let c = Dcm::from_rotation_vector(&Vec3::new(x, y, z));
            prop_assert!(c.orthonormality_error() < 1e-10);
            prop_assert!(c.matrix().determinant() > 0.0);
        }
    }
}
