//! Odometer-aided in-motion coarse alignment.
//!
//! The body frame at the start `b(0)` and the navigation frame at the start
//! `n(0)` are both inertially fixed. Integrating the velocity equation with
//! the odometer velocity substituted gives, at every odometer epoch `t_k`,
//! a vector pair `a_k = C_n^b(0) b_k` with `a_k` built from gyro/accelerometer
//! integrals and odometer speeds and `b_k` the gravity integral seen from
//! `n(0)`. The pairs are solved for `C_n^b(0)` as a minimum-eigenvector
//! problem in quaternion form.

use log::warn;
use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::earth::{forward_axis, skew, Dcm, EarthModel, GeodeticPosition, Mat3, Vec3};
use crate::error::{Error, Result};
use crate::estimator::{run_filter, Calibration, ErrorStateFilter, FilterConfig, FilterRun, SpeedObservation};
use crate::strapdown::{coning_rotation_vector, sculling_velocity, ImuIncrement, NavState};

/// `C_{b(t)}^{b(0)}` advanced by one two-sample update.
pub fn accumulate_body_attitude(body: &Dcm, dtheta1: &Vec3, dtheta2: &Vec3) -> Dcm {
    (*body * Dcm::from_rotation_vector(&coning_rotation_vector(dtheta1, dtheta2))).orthonormalized()
}

/// `C_{n(t)}^{n(0)}` advanced by `omega_in * dt`.
pub fn accumulate_nav_attitude(nav: &Dcm, omega_in: &Vec3, dt: f64) -> Dcm {
    (*nav * Dcm::from_rotation_vector(&(omega_in * dt))).orthonormalized()
}

/// One step of the gravity integral `C_{n(t_k)}^{n(0)} (T I + T^2/2 [omega_in x]) g^n`.
pub fn gravity_integral_step(nav: &Dcm, omega_in: &Vec3, gravity: &Vec3, dt: f64) -> Vec3 {
    *nav * ((Mat3::identity() * dt + skew(omega_in) * (0.5 * dt * dt)) * gravity)
}

/// One step of the specific-force integral, resolved in `b(0)`.
pub fn force_integral_step(body: &Dcm, dtheta1: &Vec3, dtheta2: &Vec3, dv1: &Vec3, dv2: &Vec3) -> Vec3 {
    *body * sculling_velocity(dtheta1, dtheta2, dv1, dv2)
}

/// Body-referenced velocity of the odometer reference point from a speed
/// measured with the nominal factor.
pub fn body_velocity(speed: f64, nominal_factor: f64, calib: &Calibration) -> Vec3 {
    forward_axis(calib.misalignment.yaw, calib.misalignment.pitch) * (speed * nominal_factor / calib.factor)
}

/// IMU velocity from attitude and odometer velocity, `C_b^n (y - omega x l)`.
pub fn initial_velocity(attitude: &Dcm, y: &Vec3, omega_ib_b: &Vec3, lever_arm: &Vec3) -> Vec3 {
    *attitude * (y - omega_ib_b.cross(lever_arm))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentConfig {
    /// alignment duration, s
    pub window: f64,
    /// re-solves with the Earth-rate, transport-rate and gravity-variation
    /// terms evaluated at the previous solution
    pub refine_iterations: usize,
    /// smallest angle between gravity-side directions accepted, rad
    pub min_span_angle: f64,
    /// sub-step of the gravity integral, s
    pub gravity_step: f64,
    /// re-solve every this many odometer epochs
    pub resolve_every: usize,
}

impl Default for AlignmentConfig {
    fn default() -> Self {
        Self { window: 300.0, refine_iterations: 3, min_span_angle: 1e-4, gravity_step: 0.01, resolve_every: 1 }
    }
}

/// Stored quantities at one odometer epoch.
#[derive(Debug, Clone, Copy)]
pub struct AlignmentEpoch {
    pub t: f64,
    /// `C_{b(t)}^{b(0)}`
    pub body: Dcm,
    /// `int_0^t C_{b}^{b(0)} f^b dt`
    pub force: Vec3,
    /// body-referenced odometer velocity
    pub y: Vec3,
    /// body rate at the epoch
    pub omega: Vec3,
    /// `int C_b^{b(0)} (t - t_prev)^j dt`, j = 0..3, over the interval
    /// ending at this epoch
    moments: [Mat3; 4],
}

/// Gravity-side quantities along the alignment path.
#[derive(Debug, Clone, Copy)]
pub struct NavFrameEpoch {
    /// `C_{n(t)}^{n(0)}`
    pub nav: Dcm,
    /// `int_0^t C_{n}^{n(0)} g^n dt`
    pub beta: Vec3,
    pub position: GeodeticPosition,
    pub velocity: Vec3,
    /// `C_b^n(t)`
    pub attitude: Dcm,
}

#[derive(Debug, Clone, Copy)]
pub struct AttitudeSolution {
    /// `C_b^n(0)`
    pub attitude: Dcm,
    pub min_eigenvalue: f64,
    /// gap to the next eigenvalue, relative to the largest
    pub eigen_gap: f64,
    /// largest angle between gravity-side directions, rad
    pub span_angle: f64,
    pub pairs: usize,
}

/// Streaming accumulator of the alignment integrals.
#[derive(Debug, Clone)]
pub struct AlignmentAccumulator {
    earth: EarthModel,
    origin: GeodeticPosition,
    lever_arm: Vec3,
    config: AlignmentConfig,
    t: f64,
    body: Dcm,
    force: Vec3,
    omega: Option<Vec3>,
    moments: [Mat3; 4],
    epochs: Vec<AlignmentEpoch>,
    pending_first: bool,
}

/// Rate at the end of the second sub-interval by linear extrapolation.
fn end_rate(first: &ImuIncrement, second: &ImuIncrement, t0: f64) -> (Vec3, Vec3) {
    let h1 = first.t - t0;
    let h2 = second.t - first.t;
    let r1 = first.dtheta / h1;
    let r2 = second.dtheta / h2;
    let slope = (r2 - r1) / (0.5 * (h1 + h2));
    (r1 - slope * (0.5 * h1), r2 + slope * (0.5 * h2))
}

impl AlignmentAccumulator {
    /// Starts at `t0` with the odometer velocity `y0` measured there.
    pub fn new(
        earth: EarthModel,
        origin: GeodeticPosition,
        lever_arm: Vec3,
        config: AlignmentConfig,
        t0: f64,
        y0: Vec3,
    ) -> Self {
        let first = AlignmentEpoch {
            t: t0,
            body: Dcm::identity(),
            force: Vec3::zeros(),
            y: y0,
            omega: Vec3::zeros(),
            moments: [Mat3::zeros(); 4],
        };
        Self {
            earth,
            origin,
            lever_arm,
            config,
            t: t0,
            body: Dcm::identity(),
            force: Vec3::zeros(),
            omega: None,
            moments: [Mat3::zeros(); 4],
            epochs: vec![first],
            pending_first: true,
        }
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn start(&self) -> f64 {
        self.epochs[0].t
    }

    pub fn epochs(&self) -> &[AlignmentEpoch] {
        &self.epochs
    }

    pub fn body_attitude(&self) -> &Dcm {
        &self.body
    }

    pub fn force_integral(&self) -> &Vec3 {
        &self.force
    }

    /// Consumes one pair of increments.
    pub fn push(&mut self, first: &ImuIncrement, second: &ImuIncrement) -> Result<()> {
        if !(first.t > self.t && second.t > first.t) {
            return Err(Error::NonMonotonicTime { previous: self.t, current: first.t.min(second.t) });
        }
        let (w_start, w_end) = end_rate(first, second, self.t);
        if self.pending_first {
            self.epochs[0].omega = w_start;
            self.pending_first = false;
        }
        let dt = second.t - self.t;
        let prev = self.body;
        self.force += force_integral_step(&prev, &first.dtheta, &second.dtheta, &first.dv, &second.dv);
        self.body = accumulate_body_attitude(&prev, &first.dtheta, &second.dtheta);
        let t_ep = self.epochs.last().map_or(self.t, |e| e.t);
        let mid = Dcm::from_rotation_vector(&(coning_rotation_vector(&first.dtheta, &second.dtheta) * 0.5));
        let c_mid = *(prev * mid).matrix();
        // Simpson over the step
        let (s0, s1) = (self.t - t_ep, second.t - t_ep);
        let sm = 0.5 * (s0 + s1);
        let (c0, c1) = (*prev.matrix(), *self.body.matrix());
        for (j, m) in self.moments.iter_mut().enumerate() {
            let j = j as i32;
            *m += (c0 * s0.powi(j) + c_mid * (4.0 * sm.powi(j)) + c1 * s1.powi(j)) * (dt / 6.0);
        }
        self.t = second.t;
        self.omega = Some(w_end);
        Ok(())
    }

    /// Records an odometer epoch if it coincides with the current time.
    /// Returns false (and records nothing) otherwise.
    pub fn record(&mut self, t: f64, y: Vec3) -> bool {
        let Some(omega) = self.omega else { return false };
        if (t - self.t).abs() > 1e-6 || self.t <= self.epochs.last().map_or(f64::MIN, |e| e.t) {
            return false;
        }
        self.epochs.push(AlignmentEpoch {
            t: self.t,
            body: self.body,
            force: self.force,
            y,
            omega,
            moments: self.moments,
        });
        self.moments = [Mat3::zeros(); 4];
        true
    }

    fn w(&self, e: &AlignmentEpoch) -> Vec3 {
        e.y - e.omega.cross(&self.lever_arm)
    }

    /// Gravity integrals, path and attitude along the epochs. Without a
    /// guess the navigation frame turns with the Earth at the start point.
    pub fn nav_frame_history(&self, guess: Option<&Dcm>) -> Result<Vec<NavFrameEpoch>> {
        let earth = &self.earth;
        let mut out = Vec::with_capacity(self.epochs.len());
        let first = &self.epochs[0];
        let attitude0 = guess.map_or(Dcm::identity(), |g| *g * first.body);
        let v0 = guess.map_or(Vec3::zeros(), |_| {
            let w_eb = first.omega - attitude0.transpose() * earth.earth_rate_n(&self.origin);
            initial_velocity(&attitude0, &first.y, &w_eb, &self.lever_arm)
        });
        out.push(NavFrameEpoch {
            nav: Dcm::identity(),
            beta: Vec3::zeros(),
            position: self.origin,
            velocity: v0,
            attitude: attitude0,
        });
        let mut along = vec![(
            earth.earth_rate_n(&self.origin) + earth.transport_rate(&self.origin, &v0)?,
            earth.normal_gravity(&self.origin),
        )];
        // rear-axle point
        let mut reference = earth.displace(&self.origin, &(attitude0 * self.lever_arm))?;
        for k in 1..self.epochs.len() {
            let prev = out[k - 1];
            let dt = self.epochs[k].t - self.epochs[k - 1].t;
            let e1 = &self.epochs[k];
            let n_sub = ((dt / self.config.gravity_step).round() as usize).max(1);
            let h = dt / n_sub as f64;
            let state_at = |nav: &Dcm, e: &AlignmentEpoch| -> (Dcm, Vec3) {
                match guess {
                    Some(g) => {
                        let att = Dcm::project(&(nav.transpose() * *g * e.body).matrix());
                        // rate relative to the Earth; the transport rate is sensitive to it
                        let w_eb = e.omega - att.transpose() * earth.earth_rate_n(&prev.position);
                        (att, initial_velocity(&att, &e.y, &w_eb, &self.lever_arm))
                    }
                    None => (Dcm::identity(), Vec3::zeros()),
                }
            };
            let rates = |p: &GeodeticPosition, v: &Vec3| -> Result<(Vec3, Vec3)> {
                Ok((earth.earth_rate_n(p) + earth.transport_rate(p, v)?, earth.normal_gravity(p)))
            };
            let r0 = rates(&prev.position, &prev.velocity)?;
            let before = (k >= 2).then(|| (self.epochs[k - 2].t, along[k - 2]));
            let (ta, tb) = (self.epochs[k - 1].t, self.epochs[k].t);
            // predictor with rates frozen at the start, corrector with both ends
            let mut end = prev;
            let mut r1 = r0;
            for pass in 0..2 {
                if pass == 1 {
                    r1 = rates(&end.position, &end.velocity)?;
                }
                let mut samples: Vec<(Vec3, Vec3)> = (0..n_sub)
                    .map(|j| {
                        let t = ta + (j as f64 + 0.5) * h;
                        // quadratic through the previous epoch when there is one
                        match (pass, before) {
                            (1, Some((tm, rm))) => {
                                let lm = (t - ta) * (t - tb) / ((tm - ta) * (tm - tb));
                                let la = (t - tm) * (t - tb) / ((ta - tm) * (ta - tb));
                                let lb = (t - tm) * (t - ta) / ((tb - tm) * (tb - ta));
                                (rm.0 * lm + r0.0 * la + r1.0 * lb, rm.1 * lm + r0.1 * la + r1.1 * lb)
                            }
                            _ => {
                                let u = (t - ta) / dt;
                                (r0.0 * (1.0 - u) + r1.0 * u, r0.1 * (1.0 - u) + r1.1 * u)
                            }
                        }
                    })
                    .collect();
                if pass == 1 && guess.is_some() {
                    // the transport rate is linear in velocity, so its mean over the
                    // interval follows from the displacement
                    let d = earth.local_offset(&prev.position, &end.position);
                    let mid = earth.displace(&prev.position, &(d * 0.5))?;
                    let target = (earth.earth_rate_n(&prev.position) + earth.earth_rate_n(&end.position)) * 0.5
                        + earth.transport_rate(&mid, &(d / dt))?;
                    let mean = samples.iter().map(|s| s.0).sum::<Vec3>() / n_sub as f64;
                    let shift = target - mean;
                    samples.iter_mut().for_each(|s| s.0 += shift);
                }
                let mut nav = prev.nav;
                let mut beta = prev.beta;
                for (w, g) in &samples {
                    beta += gravity_integral_step(&nav, w, g, h);
                    nav = accumulate_nav_attitude(&nav, w, h);
                }
                let (attitude, velocity) = state_at(&nav, e1);
                let position = match guess {
                    Some(g) => {
                        let d = self.path_increment(g, &prev.nav, &nav, k);
                        let r = earth.displace(&reference, &d)?;
                        earth.displace(&r, &-(attitude * self.lever_arm))?
                    }
                    None => self.origin,
                };
                end = NavFrameEpoch { nav, beta, position, velocity, attitude };
            }
            if let Some(g) = guess {
                let d = self.path_increment(g, &prev.nav, &end.nav, k);
                reference = earth.displace(&reference, &d)?;
            }
            along.push(r1);
            out.push(end);
        }
        Ok(out)
    }

    /// Slope of `y` at epoch `k` from the quadratic through it and its
    /// neighbours (one-sided at the ends).
    fn slope(&self, k: usize) -> Vec3 {
        let n = self.epochs.len();
        if n < 3 {
            let (a, b) = (&self.epochs[0], &self.epochs[n - 1]);
            return if n < 2 { Vec3::zeros() } else { (b.y - a.y) / (b.t - a.t) };
        }
        let c = k.clamp(1, n - 2);
        let (e0, e1, e2) = (&self.epochs[c - 1], &self.epochs[c], &self.epochs[c + 1]);
        let x = self.epochs[k].t;
        // derivative of the Lagrange basis at x
        let d0 = ((x - e1.t) + (x - e2.t)) / ((e0.t - e1.t) * (e0.t - e2.t));
        let d1 = ((x - e0.t) + (x - e2.t)) / ((e1.t - e0.t) * (e1.t - e2.t));
        let d2 = ((x - e0.t) + (x - e1.t)) / ((e2.t - e0.t) * (e2.t - e1.t));
        e0.y * d0 + e1.y * d1 + e2.y * d2
    }

    /// `int C_b^{b(0)} y dt` over the interval ending at epoch `k`, with `y`
    /// cubic Hermite between epochs.
    fn displacement_increment(&self, k: usize) -> Vec3 {
        let (e0, e1) = (&self.epochs[k - 1], &self.epochs[k]);
        let t = e1.t - e0.t;
        let m = &e1.moments;
        let i: [Mat3; 4] = std::array::from_fn(|j| m[j] / t.powi(j as i32));
        (i[0] - i[2] * 3.0 + i[3] * 2.0) * e0.y
            + (i[1] - i[2] * 2.0 + i[3]) * (self.slope(k - 1) * t)
            + (i[2] * 3.0 - i[3] * 2.0) * e1.y
            + (i[3] - i[2]) * (self.slope(k) * t)
    }

    /// Rear-axle displacement over the interval ending at epoch `k` in the
    /// local level frame at its midpoint.
    fn path_increment(&self, guess: &Dcm, nav0: &Dcm, nav1: &Dcm, k: usize) -> Vec3 {
        let mid = Dcm::project(&((nav0.matrix() + nav1.matrix()) * 0.5));
        mid.transpose() * (*guess * self.displacement_increment(k))
    }

    /// Vector pairs `(a_k, b_k)` for every epoch after the first.
    pub fn pairs(&self, guess: Option<&Dcm>) -> Result<Vec<(Vec3, Vec3)>> {
        let nav = self.nav_frame_history(guess)?;
        let first = &self.epochs[0];
        let w0 = self.w(first);
        let omega0 = self.earth.earth_rate_n(&self.origin);
        // int C_b^{b(0)} y dt, the rear-axle displacement in b(0)
        let mut displacement = Vec3::zeros();
        // int C_b^{b(0)} l dt, from the Earth rate seen in the lever-arm term
        let mut lever_integral = Vec3::zeros();
        let mut out = Vec::with_capacity(self.epochs.len() - 1);
        for k in 1..self.epochs.len() {
            let e1 = &self.epochs[k];
            displacement += self.displacement_increment(k);
            lever_integral += e1.moments[0] * self.lever_arm;
            let a = e1.body * self.w(e1) - w0 - e1.force;
            let mut b = nav[k].beta;
            if let Some(g) = guess {
                // Earth-rate terms dropped from the first-pass pairs
                b -= omega0.cross(&(*g * displacement + omega0.cross(&(*g * lever_integral))));
            }
            out.push((a, b));
        }
        Ok(out)
    }

    /// Least-squares `C_b^n(0)` from the current pairs.
    pub fn solve(&self, guess: Option<&Dcm>) -> Result<AttitudeSolution> {
        solve_initial_attitude(&self.pairs(guess)?, self.config.min_span_angle)
    }

    /// First-pass solve followed by the configured refinement iterations.
    pub fn solve_refined(&self) -> Result<AttitudeSolution> {
        let mut sol = self.solve(None)?;
        for _ in 0..self.config.refine_iterations {
            sol = self.solve(Some(&sol.attitude))?;
        }
        Ok(sol)
    }

    /// Position at the last epoch from the odometer path.
    pub fn restore_position(&self, attitude0: &Dcm) -> Result<GeodeticPosition> {
        for w in self.epochs.windows(2) {
            if w[1].t - w[0].t > 1.5 {
                return Err(Error::MissingHistory(format!("odometer gap between {} and {} s", w[0].t, w[1].t)));
            }
        }
        Ok(self.nav_frame_history(Some(attitude0))?.last().expect("first epoch").position)
    }
}

/// Quaternion form of `a = q b q*` as `M q = 0`.
fn pair_matrix(a: &Vec3, b: &Vec3) -> Matrix4<f64> {
    let d = a - b;
    let s = skew(&(a + b));
    let mut m = Matrix4::zeros();
    for i in 0..3 {
        m[(0, i + 1)] = -d[i];
        m[(i + 1, 0)] = d[i];
        for j in 0..3 {
            m[(i + 1, j + 1)] = s[(i, j)];
        }
    }
    m
}

/// `C_b^n(0)` minimising `sum |a_k - C_n^b(0) b_k|^2` from the eigenvector of
/// the smallest eigenvalue of the accumulated 4x4 matrix.
pub fn solve_initial_attitude(pairs: &[(Vec3, Vec3)], min_span_angle: f64) -> Result<AttitudeSolution> {
    if pairs.len() < 2 {
        return Err(Error::Degenerate(format!("{} vector pairs, need at least 2", pairs.len())));
    }
    let reference = pairs
        .iter()
        .rev()
        .find_map(|(_, b)| b.try_normalize(0.0))
        .ok_or_else(|| Error::Degenerate("all gravity-side vectors vanish".to_string()))?;
    let span = pairs
        .iter()
        .filter_map(|(_, b)| b.try_normalize(0.0))
        .map(|u| u.cross(&reference).norm().asin())
        .fold(0.0, f64::max);
    if span < min_span_angle {
        return Err(Error::Degenerate(format!(
            "gravity-side directions span {span:.2e} rad (need {min_span_angle:.1e})"
        )));
    }
    let k: Matrix4<f64> = pairs.iter().map(|(a, b)| {
        let m = pair_matrix(a, b);
        m.transpose() * m
    }).sum();
    let eig = k.symmetric_eigen();
    let mut order = [0usize, 1, 2, 3];
    order.sort_by(|i, j| eig.eigenvalues[*i].total_cmp(&eig.eigenvalues[*j]));
    let largest = eig.eigenvalues[order[3]].max(f64::MIN_POSITIVE);
    let gap = (eig.eigenvalues[order[1]] - eig.eigenvalues[order[0]]) / largest;
    if gap < 1e-14 {
        warn!("alignment eigenvalue gap {gap:.1e} is near zero; attitude poorly determined");
    }
    let q: Vector4<f64> = eig.eigenvectors.column(order[0]).into_owned();
    let c_nb = Dcm::from_quaternion([q[0], q[1], q[2], q[3]]);
    Ok(AttitudeSolution {
        attitude: c_nb.transpose(),
        min_eigenvalue: eig.eigenvalues[order[0]],
        eigen_gap: gap,
        span_angle: span,
        pairs: pairs.len(),
    })
}

/// Outcome of an in-motion alignment.
#[derive(Debug, Clone)]
pub struct AlignmentResult {
    pub solution: AttitudeSolution,
    /// navigation state at the end of the window
    pub handoff: NavState,
    /// `(t, C_b^n(0))` from each periodic re-solve
    pub history: Vec<(f64, Dcm)>,
    pub accumulator: AlignmentAccumulator,
}

/// Runs the alignment over `[start, start + window]`.
pub fn align_in_motion(
    earth: &EarthModel,
    imu: &[ImuIncrement],
    speeds: &[SpeedObservation],
    calib: &Calibration,
    nominal_factor: f64,
    origin: &GeodeticPosition,
    start: f64,
    config: &AlignmentConfig,
) -> Result<AlignmentResult> {
    let i0 = imu.partition_point(|i| i.t <= start + 1e-9);
    if i0 == 0 || (imu[i0 - 1].t - start).abs() > 1e-6 {
        return Err(Error::InvalidInput(format!("alignment start {start} s is not an IMU sample time")));
    }
    let s0 = speeds
        .iter()
        .position(|s| (s.t - start).abs() < 1e-6)
        .ok_or_else(|| Error::InvalidInput(format!("no odometer epoch at the alignment start {start} s")))?;
    let y0 = body_velocity(speeds[s0].speed, nominal_factor, calib);
    let mut acc = AlignmentAccumulator::new(*earth, *origin, calib.lever_arm, *config, start, y0);
    let end = start + config.window;
    let mut j = s0 + 1;
    let mut history = Vec::new();
    let mut last: Option<Dcm> = None;
    let mut since_solve = 0;
    for pair in imu[i0..].chunks_exact(2) {
        if pair[1].t > end + 1e-9 {
            break;
        }
        acc.push(&pair[0], &pair[1])?;
        while j < speeds.len() && speeds[j].t < acc.time() - 1e-6 {
            j += 1;
        }
        if j < speeds.len() && acc.record(speeds[j].t, body_velocity(speeds[j].speed, nominal_factor, calib)) {
            j += 1;
            since_solve += 1;
            if since_solve >= config.resolve_every {
                since_solve = 0;
                match acc.solve(last.as_ref()) {
                    Ok(sol) => {
                        history.push((acc.time(), sol.attitude));
                        last = Some(sol.attitude);
                    }
                    Err(Error::Degenerate(_)) => {}
                    Err(e) => return Err(e),
                }
            }
        }
    }
    if (acc.time() - end).abs() > 1e-6 {
        return Err(Error::InvalidInput(format!(
            "data end at {:.2} s before the alignment window closes at {end:.2} s",
            acc.time()
        )));
    }
    let solution = acc.solve_refined()?;
    let path = acc.nav_frame_history(Some(&solution.attitude))?;
    let last_epoch = acc.epochs().last().expect("first epoch");
    let state = path.last().expect("first epoch");
    let handoff = NavState {
        attitude: state.attitude,
        velocity: state.velocity,
        position: acc.restore_position(&solution.attitude)?,
        t: last_epoch.t,
    };
    Ok(AlignmentResult { solution, handoff, history, accumulator: acc })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemTwoConfig {
    pub alignment: AlignmentConfig,
    /// filter tuning after the hand-off; its attitude and position
    /// uncertainties should reflect the coarse alignment
    pub filter: FilterConfig,
    pub nominal_factor: f64,
    /// alignment start; defaults to the first odometer epoch
    pub start: Option<f64>,
}

impl Default for ProblemTwoConfig {
    fn default() -> Self {
        let mut filter = FilterConfig::default();
        filter.initial.attitude = Vec3::new(0.02f64.to_radians(), 1.0f64.to_radians(), 0.02f64.to_radians());
        filter.initial.velocity = 0.1;
        filter.initial.position = 20.0;
        filter.initial.misalignment = 0.05f64.to_radians();
        filter.initial.lever_arm = 0.05;
        filter.initial.factor = 5e-4;
        Self { alignment: AlignmentConfig::default(), filter, nominal_factor: 8.6, start: None }
    }
}

#[derive(Debug, Clone)]
pub struct ProblemTwoResult {
    pub alignment: AlignmentResult,
    pub run: FilterRun,
}

/// In-motion alignment with known calibration, then the error-state filter
/// from the hand-off state refining navigation, biases and calibration.
pub fn run_problem_two(
    earth: &EarthModel,
    imu: &[ImuIncrement],
    speeds: &[SpeedObservation],
    calib: &Calibration,
    origin: &GeodeticPosition,
    config: &ProblemTwoConfig,
) -> Result<ProblemTwoResult> {
    let start = match config.start {
        Some(t) => t,
        None => speeds.first().ok_or_else(|| Error::InvalidInput("empty odometer record".to_string()))?.t,
    };
    let alignment = align_in_motion(earth, imu, speeds, calib, config.nominal_factor, origin, start, &config.alignment)?;
    let t = alignment.handoff.t;
    let mut filter = ErrorStateFilter::new(*earth, config.filter, alignment.handoff, *calib)?;
    let i = imu.partition_point(|s| s.t <= t + 1e-9);
    let s = speeds.partition_point(|s| s.t <= t + 1e-6);
    let run = run_filter(&mut filter, &imu[i..], &speeds[s..], config.nominal_factor)?;
    Ok(ProblemTwoResult { alignment, run })
}
