//! Random linearization points shared by the integration tests.

use std::f64::consts::PI;

use landnav::earth::{Dcm, GeodeticPosition, MisalignmentAngles, Vec3};
use landnav::estimator::model::*;
use landnav::strapdown::NavState;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_case(rng: &mut ChaCha8Rng) -> (NavState, Calibration, Vec3, Vec3) {
    let mut v3 = |s: f64| Vec3::new(rng.random_range(-s..s), rng.random_range(-s..s), rng.random_range(-s..s));
    let attitude = Dcm::from_rotation_vector(&v3(3.0));
    let velocity = v3(20.0);
    let w = v3(0.3);
    let bg = v3(1e-4);
    let lever = v3(2.0);
    let nav = NavState {
        attitude,
        velocity,
        position: GeodeticPosition::new(rng.random_range(-3.0..3.0), rng.random_range(-1.3..1.3), 100.0).unwrap(),
        t: 0.0,
    };
    let calib = Calibration {
        misalignment: MisalignmentAngles::new(rng.random_range(-PI..PI), rng.random_range(-1.5..1.5)),
        lever_arm: lever,
        factor: rng.random_range(2.0..10.0) * if rng.random::<bool>() { 1.0 } else { -1.0 },
    };
    (nav, calib, w, bg)
}

/// Applies a single error-state component (truth = estimate + delta).
pub fn perturbed(
    nav: &NavState,
    calib: &Calibration,
    bg: &Vec3,
    index: usize,
    delta: f64,
) -> (NavState, Calibration, Vec3) {
    let mut n = *nav;
    let mut c = *calib;
    let mut b = *bg;
    let mut e = Vec3::zeros();
    match index {
        ATT..=2 => e[index - ATT] = delta,
        BG..=11 => e[index - BG] = delta,
        LEV..=19 => e[index - LEV] = delta,
        _ => {}
    }
    match index {
        ATT..=2 => n.attitude = Dcm::from_rotation_vector(&e) * n.attitude,
        VEL..=5 => n.velocity[index - VEL] += delta,
        BG..=11 => b += e,
        PSI => c = c.corrected(delta, 0.0, &Vec3::zeros(), 0.0),
        THETA => c = c.corrected(0.0, delta, &Vec3::zeros(), 0.0),
        LEV..=19 => c = c.corrected(0.0, 0.0, &e, 0.0),
        FAC => c = c.corrected(0.0, 0.0, &Vec3::zeros(), delta),
        _ => unreachable!(),
    }
    (n, c, b)
}
