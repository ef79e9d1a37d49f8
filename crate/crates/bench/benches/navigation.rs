use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use landnav::earth::{Dcm, EarthModel, GeodeticPosition, Vec3};
use landnav::estimator::{Calibration, ErrorStateFilter, FilterConfig, SpeedObservation};
use landnav::inmotion::{align_in_motion, AlignmentConfig};
use landnav::pipeline;
use landnav::scenario::{Mode, Scenario};
use landnav::strapdown::{ImuIncrement, Mechanizer, NavState};

fn start_state() -> NavState {
    NavState {
        attitude: Dcm::identity(),
        velocity: Vec3::new(10.0, 0.0, 0.0),
        position: GeodeticPosition::from_degrees(116.0, 40.0, 50.0).unwrap(),
        t: 0.0,
    }
}

fn increments(n: usize) -> Vec<ImuIncrement> {
    let h = 0.005;
    (1..=n)
        .map(|k| ImuIncrement {
            t: k as f64 * h,
            dtheta: Vec3::new(1e-5, -2e-5, 3e-4) * h,
            dv: Vec3::new(0.1, 9.8, 0.05) * h,
        })
        .collect()
}

fn mechanization(c: &mut Criterion) {
    let imu = increments(2000);
    c.bench_function("mechanization 1000 steps", |b| {
        b.iter(|| {
            let mut m = Mechanizer::new(EarthModel::wgs84(), start_state());
            for pair in imu.chunks_exact(2) {
                m.step(&pair[0], &pair[1]).unwrap();
            }
            black_box(*m.state())
        })
    });
}

fn filter_update(c: &mut Criterion) {
    let calib = Calibration::nominal(8.6);
    let filter = ErrorStateFilter::new(EarthModel::wgs84(), FilterConfig::default(), start_state(), calib).unwrap();
    let imu = increments(200);
    c.bench_function("filter propagate", |b| {
        b.iter_batched(
            || {
                let mut f = filter.clone();
                for pair in imu.chunks_exact(2) {
                    f.step(&pair[0], &pair[1]).unwrap();
                }
                f
            },
            |mut f| {
                f.propagate().unwrap();
                f
            },
            criterion::BatchSize::SmallInput,
        )
    });
    let obs = SpeedObservation { t: 1.0, speed: 10.01, stationary: false };
    c.bench_function("filter speed update", |b| {
        b.iter_batched(
            || filter.clone(),
            |mut f| {
                f.update_speed(black_box(&obs), 8.6).unwrap();
                f
            },
            criterion::BatchSize::SmallInput,
        )
    });
}

fn alignment(c: &mut Criterion) {
    let sc = Scenario::reference(Mode::Problem2);
    let clean = sc.clean_data().unwrap();
    let data = sc.dataset(&clean, 1, 1.0).unwrap();
    let speeds = pipeline::speeds(&data.odometer, sc.problem2.nominal_factor, &sc.prefilter).unwrap();
    let start = speeds[0].t;
    let origin = data.truth_at(start).unwrap().position;
    let calib = sc.alignment_calibration();
    let config = AlignmentConfig { window: 120.0, ..sc.problem2.alignment };
    let earth = EarthModel::wgs84();
    let result =
        align_in_motion(&earth, &data.imu, &speeds, &calib, sc.problem2.nominal_factor, &origin, start, &config).unwrap();
    c.bench_function("alignment refined solve, 120 s", |b| {
        b.iter(|| black_box(result.accumulator.solve_refined().unwrap()))
    });
}

criterion_group!(benches, mechanization, filter_update, alignment);
criterion_main!(benches);
