use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use landnav::earth::attitude_error;
use landnav::estimator::{Calibration, FilterRun};
use landnav::io::{self, CalibrationRecord};
use landnav::pipeline::{self, CrossCheck, Dataset};
use landnav::report::DriftReport;
use landnav::scenario::{CheckThresholds, Mode, Scenario};
use landnav::{EarthModel, Error, GeodeticPosition, NavState};
use rayon::prelude::*;

mod gates;

use gates::Gate;

#[derive(Parser)]
#[command(name = "landnav", version, about = "Strapdown inertial navigation aided by a wheel odometer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the reference scenario of a mode
    Template {
        #[arg(value_enum)]
        mode: ModeArg,
    },
    /// Generate sensor records and truth for every seed of a scenario
    Simulate {
        scenario: PathBuf,
        /// output directory; defaults to the scenario's `output`
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Self-calibrate the odometer installation from a standing start
    Calibrate(RunArgs),
    /// Navigate from a standing start with a fixed calibration
    Navigate {
        #[command(flatten)]
        run: RunArgs,
        /// calibration CSV; the last row is used
        #[arg(long)]
        calibration: PathBuf,
    },
    /// In-motion alignment with a known calibration, then refinement
    Align {
        #[command(flatten)]
        run: RunArgs,
        /// calibration CSV; the last row is used
        #[arg(long)]
        calibration: PathBuf,
        /// alignment start, s; defaults to the configured one or the first odometer epoch
        #[arg(long)]
        start: Option<f64>,
    },
    /// Apply each of two calibrations to each of two data sets
    Crosscheck {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// calibration of data set A; estimated from A when absent
        #[arg(long)]
        calib_a: Option<PathBuf>,
        #[arg(long)]
        calib_b: Option<PathBuf>,
        /// scenario file supplying the tuning and thresholds
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long)]
        check: bool,
    },
    /// Simulate and process every seed of a scenario
    Run {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// also write the sensor records and truth of each seed
        #[arg(long)]
        save_data: bool,
        #[arg(long)]
        check: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Problem1,
    Problem2,
    Crosscheck,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Problem1 => Mode::Problem1,
            ModeArg::Problem2 => Mode::Problem2,
            ModeArg::Crosscheck => Mode::Crosscheck,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// directory holding imu.csv, odometer.csv and optionally truth.csv
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    imu: Option<PathBuf>,
    #[arg(long)]
    odometer: Option<PathBuf>,
    #[arg(long)]
    truth: Option<PathBuf>,
    /// scenario file supplying the tuning and thresholds
    #[arg(long)]
    config: Option<PathBuf>,
    /// start position as `lon_deg,lat_deg,height_m`; defaults to the truth track
    #[arg(long, value_parser = parse_origin)]
    origin: Option<GeodeticPosition>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// compare against the truth and exit with status 4 on a breach
    #[arg(long)]
    check: bool,
}

enum Failure {
    Input(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Input(e.to_string())
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn parse_origin(s: &str) -> std::result::Result<GeodeticPosition, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    let [lon, lat, h] = parts[..] else {
        return Err("expected lon_deg,lat_deg,height_m".to_string());
    };
    GeodeticPosition::from_degrees(lon, lat, h).map_err(|e| e.to_string())
}

fn open(path: &Path) -> Outcome<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Outcome<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Failure::Input(format!("{}: {e}", dir.display())))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Outcome<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes()).and_then(|_| w.flush()).map_err(|e| Failure::Input(e.to_string()))
}

fn load_scenario(path: &Path) -> Outcome<Scenario> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    Scenario::from_toml(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

/// Scenario from `--config`, or the reference one of `mode`.
fn config_or_reference(config: Option<&Path>, mode: Mode) -> Outcome<Scenario> {
    config.map_or_else(|| Ok(Scenario::reference(mode)), load_scenario)
}

fn load_dataset(args: &RunArgs) -> Outcome<Dataset> {
    let pick = |explicit: &Option<PathBuf>, name: &str| {
        explicit.clone().or_else(|| args.data.as_ref().map(|d| d.join(name)))
    };
    let imu = pick(&args.imu, "imu.csv").ok_or_else(|| Failure::Input("need --data or --imu".to_string()))?;
    let odo = pick(&args.odometer, "odometer.csv")
        .ok_or_else(|| Failure::Input("need --data or --odometer".to_string()))?;
    let truth = match (&args.truth, &args.data) {
        (Some(p), _) => Some(p.clone()),
        (None, Some(d)) => Some(d.join("truth.csv")).filter(|p| p.exists()),
        (None, None) => None,
    };
    Ok(Dataset {
        imu: io::read_imu(open(&imu)?)?,
        odometer: io::read_odometer(open(&odo)?)?,
        truth: match truth {
            Some(p) => io::read_trajectory(open(&p)?)?,
            None => Vec::new(),
        },
    })
}

fn read_dir_dataset(dir: &Path) -> Outcome<Dataset> {
    load_dataset(&RunArgs {
        data: Some(dir.to_path_buf()),
        imu: None,
        odometer: None,
        truth: None,
        config: None,
        origin: None,
        out: PathBuf::new(),
        check: false,
    })
}

fn write_dataset(dir: &Path, data: &Dataset) -> Outcome<()> {
    io::write_imu(create(&dir.join("imu.csv"))?, &data.imu)?;
    io::write_odometer(create(&dir.join("odometer.csv"))?, &data.odometer)?;
    io::write_trajectory(create(&dir.join("truth.csv"))?, &data.truth)?;
    Ok(())
}

fn read_last_calibration(path: &Path, nominal_factor: f64) -> Outcome<Calibration> {
    io::read_calibration(open(path)?, nominal_factor)?
        .last()
        .map(|r| r.calibration)
        .ok_or_else(|| Failure::Input(format!("{}: no calibration rows", path.display())))
}

fn origin_of(explicit: Option<GeodeticPosition>, data: &Dataset) -> Outcome<GeodeticPosition> {
    match explicit {
        Some(p) => Ok(p),
        None => Ok(data.start_position()?),
    }
}

fn require_truth(data: &Dataset) -> Outcome<()> {
    if data.truth.is_empty() {
        return Err(Failure::Input("--check needs a truth track".to_string()));
    }
    Ok(())
}

/// Writes trajectory.csv and calibration.csv, and with a truth track also
/// plot.csv and report.txt.
fn emit_run(
    out: &Path,
    earth: &EarthModel,
    run: &FilterRun,
    truth: &[NavState],
    nominal_factor: f64,
    after_distance: f64,
) -> Outcome<Option<DriftReport>> {
    let states: Vec<NavState> = run.epochs.iter().map(|e| e.nav).collect();
    io::write_trajectory(create(&out.join("trajectory.csv"))?, &states)?;
    let history: Vec<CalibrationRecord> =
        run.epochs.iter().map(|e| CalibrationRecord { t: e.t, calibration: e.calibration }).collect();
    io::write_calibration(create(&out.join("calibration.csv"))?, &history, nominal_factor)?;
    if truth.is_empty() {
        return Ok(None);
    }
    let report = DriftReport::from_run(earth, truth, run)?;
    io::write_plot(create(&out.join("plot.csv"))?, &report.plot_rows())?;
    write_text(&out.join("report.txt"), &report.summary_table(after_distance))?;
    Ok(Some(report))
}

/// The installation and odometer factor the scenario simulates.
fn true_calibration(sc: &Scenario) -> Calibration {
    Calibration {
        misalignment: sc.trajectory.mounting.misalignment,
        lever_arm: sc.trajectory.mounting.lever_arm,
        factor: sc.odometer.factor,
    }
}

fn finish(label: &str, gates: &[Gate]) -> usize {
    let mut failed = 0;
    for g in gates {
        println!("{label}{g}");
        failed += usize::from(!g.pass);
    }
    failed
}

fn simulate(path: &Path, out: Option<PathBuf>) -> Outcome<()> {
    let sc = load_scenario(path)?;
    let out = out.unwrap_or_else(|| sc.output.clone());
    let clean = sc.clean_data()?;
    sc.seeds.par_iter().map(|&seed| simulate_seed(&sc, &clean, seed, &out)).collect::<Outcome<Vec<_>>>()?;
    for seed in &sc.seeds {
        println!("seed {seed}: {}", seed_dir(&out, *seed).display());
    }
    Ok(())
}

fn seed_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed-{seed}"))
}

fn simulate_seed(sc: &Scenario, clean: &landnav::sim::CleanData, seed: u64, out: &Path) -> Outcome<Vec<Dataset>> {
    let sets = sc.datasets(clean, seed)?;
    let dir = seed_dir(out, seed);
    match sets.as_slice() {
        [single] => write_dataset(&dir, single)?,
        [a, b] => {
            write_dataset(&dir.join("a"), a)?;
            write_dataset(&dir.join("b"), b)?;
        }
        _ => unreachable!("one or two data sets per seed"),
    }
    Ok(sets)
}

fn calibrate(args: &RunArgs) -> Outcome<usize> {
    let sc = config_or_reference(args.config.as_deref(), Mode::Problem1)?;
    let data = load_dataset(args)?;
    if args.check {
        require_truth(&data)?;
    }
    let earth = EarthModel::wgs84();
    let origin = origin_of(args.origin, &data)?;
    let result = pipeline::calibrate(&earth, &data, &origin, &sc.problem1, &sc.prefilter)?;
    let report = emit_run(&args.out, &earth, &result.run, &data.truth, sc.problem1.nominal_factor, sc.check.after_distance)?;
    print_summary(&result.run, report.as_ref(), &sc.check);
    if !args.check {
        return Ok(0);
    }
    let mut g = gates::drift(report.as_ref().expect("truth present"), &sc.check);
    if args.config.is_some() {
        g.extend(gates::calibration(&final_calibration(&result.run)?, &true_calibration(&sc), &sc.check));
    }
    Ok(finish("", &g))
}

fn final_calibration(run: &FilterRun) -> Outcome<Calibration> {
    run.last()
        .map(|e| e.calibration)
        .ok_or_else(|| Failure::Numerical("filter produced no epochs".to_string()))
}

fn print_summary(run: &FilterRun, report: Option<&DriftReport>, check: &CheckThresholds) {
    match report {
        Some(r) => print!("{}", r.summary_table(check.after_distance)),
        None => {
            if let Some(e) = run.last() {
                let c = &e.calibration;
                println!("psi    {:>12.5} deg", c.misalignment.yaw.to_degrees());
                println!("theta  {:>12.5} deg", c.misalignment.pitch.to_degrees());
                println!("lever  {:>9.4} {:>9.4} {:>9.4} m", c.lever_arm.x, c.lever_arm.y, c.lever_arm.z);
                println!("factor {:>12.5} p/m", c.factor);
            }
        }
    }
}

fn navigate(args: &RunArgs, calibration: &Path) -> Outcome<usize> {
    let sc = config_or_reference(args.config.as_deref(), Mode::Problem1)?;
    let calib = read_last_calibration(calibration, sc.problem1.nominal_factor)?;
    let data = load_dataset(args)?;
    if args.check {
        require_truth(&data)?;
    }
    let earth = EarthModel::wgs84();
    let origin = origin_of(args.origin, &data)?;
    let result = pipeline::navigate(&earth, &data, &origin, &calib, &sc.problem1, &sc.prefilter)?;
    let report = emit_run(&args.out, &earth, &result.run, &data.truth, sc.problem1.nominal_factor, sc.check.after_distance)?;
    print_summary(&result.run, report.as_ref(), &sc.check);
    if !args.check {
        return Ok(0);
    }
    Ok(finish("", &gates::drift(report.as_ref().expect("truth present"), &sc.check)))
}

fn align(args: &RunArgs, calibration: &Path, start: Option<f64>) -> Outcome<usize> {
    let mut sc = config_or_reference(args.config.as_deref(), Mode::Problem2)?;
    if start.is_some() {
        sc.problem2.start = start;
    }
    let calib = read_last_calibration(calibration, sc.problem1.nominal_factor)?;
    let data = load_dataset(args)?;
    if args.check {
        require_truth(&data)?;
    }
    let earth = EarthModel::wgs84();
    let t0 = pipeline::alignment_start(&data, &sc.problem2, &sc.prefilter)?;
    let origin = match args.origin {
        Some(p) => p,
        None => data.truth_at(t0)?.position,
    };
    let (g, _) = align_core(&earth, &sc, &data, &calib, &origin, t0, &args.out, args.check)?;
    Ok(finish("", &g))
}

/// Runs the alignment, writes its outputs and returns the gates when
/// checking.
#[allow(clippy::too_many_arguments)]
fn align_core(
    earth: &EarthModel,
    sc: &Scenario,
    data: &Dataset,
    calib: &Calibration,
    origin: &GeodeticPosition,
    t0: f64,
    out: &Path,
    check: bool,
) -> Outcome<(Vec<Gate>, String)> {
    let mut cfg = sc.problem2;
    cfg.start = Some(t0);
    let result = pipeline::align(earth, data, calib, origin, &cfg, &sc.prefilter)?;
    io::write_attitudes(create(&out.join("alignment.csv"))?, &result.alignment.history)?;
    let report = emit_run(out, earth, &result.run, &data.truth, sc.problem1.nominal_factor, sc.check.after_distance)?;
    let mut text = String::new();
    let mut g = Vec::new();
    if let Ok(truth) = data.truth_at(t0) {
        let err = attitude_error(&truth.attitude, &result.alignment.solution.attitude).map(f64::to_degrees);
        text = format!(
            "alignment at t = {t0:.2} s: heading error {:+.4} deg, level errors {:+.5} {:+.5} deg\n",
            err.y, err.x, err.z
        );
        if check {
            g = gates::alignment(&err, &sc.check);
        }
    }
    if let Some(r) = &report {
        text.push_str(&r.summary_table(sc.check.after_distance));
    }
    print!("{text}");
    if check && g.is_empty() {
        return Err(Failure::Input(format!("--check needs a truth epoch at t = {t0} s")));
    }
    Ok((g, text))
}

#[allow(clippy::too_many_arguments)]
fn crosscheck(
    a: &Path,
    b: &Path,
    calib_a: Option<&Path>,
    calib_b: Option<&Path>,
    config: Option<&Path>,
    out: &Path,
    check: bool,
) -> Outcome<usize> {
    let sc = config_or_reference(config, Mode::Crosscheck)?;
    let earth = EarthModel::wgs84();
    let sets = [read_dir_dataset(a)?, read_dir_dataset(b)?];
    for d in &sets {
        require_truth(d)?;
    }
    let nominal = sc.problem1.nominal_factor;
    let mut calibs = [None, None];
    for (k, (given, label)) in [(calib_a, "a"), (calib_b, "b")].into_iter().enumerate() {
        calibs[k] = Some(match given {
            Some(p) => read_last_calibration(p, nominal)?,
            None => {
                let data = &sets[k];
                let run = pipeline::calibrate(&earth, data, &data.start_position()?, &sc.problem1, &sc.prefilter)?.run;
                let history: Vec<CalibrationRecord> =
                    run.epochs.iter().map(|e| CalibrationRecord { t: e.t, calibration: e.calibration }).collect();
                io::write_calibration(create(&out.join(format!("calibration_{label}.csv")))?, &history, nominal)?;
                final_calibration(&run)?
            }
        });
    }
    let calibs = calibs.map(|c| c.expect("filled above"));
    let cc = pipeline::crosscheck(&earth, [&sets[0], &sets[1]], calibs, &sc.problem1, &sc.prefilter)?;
    write_text(&out.join("crosscheck.txt"), &cc.table())?;
    print!("{}", cc.table());
    Ok(if check { finish("", &[gates::crosscheck(&cc, &sc.check)]) } else { 0 })
}

struct SeedOutcome {
    text: String,
    gates: Vec<Gate>,
}

fn run_scenario(path: &Path, out: Option<PathBuf>, save_data: bool, check: bool) -> Outcome<usize> {
    let sc = load_scenario(path)?;
    let out = out.unwrap_or_else(|| sc.output.clone());
    let clean = sc.clean_data()?;
    let outcomes = sc
        .seeds
        .par_iter()
        .map(|&seed| run_seed(&sc, &clean, seed, &out, save_data, check))
        .collect::<Outcome<Vec<_>>>()?;
    let mut failed = 0;
    for (seed, o) in sc.seeds.iter().zip(&outcomes) {
        println!("== seed {seed}");
        print!("{}", o.text);
        failed += finish(&format!("seed {seed}: "), &o.gates);
    }
    Ok(failed)
}

fn run_seed(
    sc: &Scenario,
    clean: &landnav::sim::CleanData,
    seed: u64,
    out: &Path,
    save_data: bool,
    check: bool,
) -> Outcome<SeedOutcome> {
    let dir = seed_dir(out, seed);
    let sets = if save_data { simulate_seed(sc, clean, seed, out)? } else { sc.datasets(clean, seed)? };
    let earth = EarthModel::wgs84();
    let after = sc.check.after_distance;
    let nominal = sc.problem1.nominal_factor;
    match sc.mode {
        Mode::Problem1 => {
            let data = &sets[0];
            let result = pipeline::calibrate(&earth, data, &data.start_position()?, &sc.problem1, &sc.prefilter)?;
            let report = emit_run(&dir, &earth, &result.run, &data.truth, nominal, after)?.expect("simulated truth");
            let mut gates = Vec::new();
            if check {
                gates = gates::drift(&report, &sc.check);
                gates.extend(gates::calibration(&final_calibration(&result.run)?, &true_calibration(sc), &sc.check));
            }
            Ok(SeedOutcome { text: report.summary_table(after), gates })
        }
        Mode::Problem2 => {
            let data = &sets[0];
            let t0 = pipeline::alignment_start(data, &sc.problem2, &sc.prefilter)?;
            let origin = data.truth_at(t0)?.position;
            let (gates, text) = align_core(&earth, sc, data, &sc.alignment_calibration(), &origin, t0, &dir, check)?;
            Ok(SeedOutcome { text, gates })
        }
        Mode::Crosscheck => {
            let mut calibs = Vec::new();
            for (data, label) in sets.iter().zip(["a", "b"]) {
                let run = pipeline::calibrate(&earth, data, &data.start_position()?, &sc.problem1, &sc.prefilter)?.run;
                emit_run(&dir.join(label), &earth, &run, &data.truth, nominal, after)?;
                calibs.push(final_calibration(&run)?);
            }
            let cc: CrossCheck =
                pipeline::crosscheck(&earth, [&sets[0], &sets[1]], [calibs[0], calibs[1]], &sc.problem1, &sc.prefilter)?;
            write_text(&dir.join("crosscheck.txt"), &cc.table())?;
            let gates = if check { vec![gates::crosscheck(&cc, &sc.check)] } else { Vec::new() };
            Ok(SeedOutcome { text: cc.table(), gates })
        }
    }
}

fn dispatch(cli: Cli) -> Outcome<usize> {
    match cli.command {
        Command::Template { mode } => {
            print!("{}", Scenario::reference(mode.into()).to_toml()?);
            Ok(0)
        }
        Command::Simulate { scenario, out } => simulate(&scenario, out).map(|_| 0),
        Command::Calibrate(args) => calibrate(&args),
        Command::Navigate { run, calibration } => navigate(&run, &calibration),
        Command::Align { run, calibration, start } => align(&run, &calibration, start),
        Command::Crosscheck { a, b, calib_a, calib_b, config, out, check } => crosscheck(
            &a,
            &b,
            calib_a.as_deref(),
            calib_b.as_deref(),
            config.as_deref(),
            &out,
            check,
        ),
        Command::Run { scenario, out, save_data, check } => run_scenario(&scenario, out, save_data, check),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(n) => {
            eprintln!("{n} check(s) failed");
            ExitCode::from(4)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical error: {msg}");
            ExitCode::from(3)
        }
    }
}
