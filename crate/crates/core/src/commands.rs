//! The work behind each CLI verb. Everything here takes already-parsed
//! arguments and writes into an output directory, so tests can drive it
//! without spawning the binary.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bayes_filter::{self, FilterHistory, FilterState};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::formats::{self, FileCounts, GridMeta, Manifest, Summary, SCHEMA_VERSION};
use crate::matrix_fisher::MatrixFisher;
use crate::normalizer;
use crate::pendulum;
use crate::quadrature::gauss_legendre;
use crate::so3::{attitude_error_deg, random_rotation_uniform, row_major};
use crate::unscented;

/// Error threshold used for the reported convergence time.
pub const CONVERGENCE_THRESHOLD_DEG: f64 = 10.0;
/// Averaging window of the steady-state error.
pub const STEADY_STATE_WINDOW: [f64; 2] = [2.0, 10.0];

/// Stream index of the filter's generator; the measurements use stream 0.
const FILTER_STREAM: u64 = 1;

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Simulates the pendulum and its sensors; writes truth, gyro and attitude
/// CSVs plus the manifest.
pub fn simulate(cfg: &RunConfig, out: &Path) -> Result<Manifest> {
    cfg.validate()?;
    let params = cfg.pendulum.params();
    let traj = pendulum::simulate(&cfg.pendulum.initial_state()?, &params, cfg.pendulum.step, cfg.duration)?;
    let mut rng = rng_for(cfg.seed, 0);
    let meas = pendulum::synthesize_measurements(&traj, &cfg.gyro_model()?, &cfg.attitude_model()?, cfg.seed, &mut rng)?;
    let truth = pendulum::sample_at_rate(&traj, cfg.gyro.rate)?;

    create_dir(out)?;
    formats::write_truth(&out.join(formats::TRUTH_FILE), &truth)?;
    formats::write_gyro(&out.join(formats::GYRO_FILE), &meas.gyro)?;
    formats::write_attitude(&out.join(formats::ATTITUDE_FILE), &meas.attitude)?;
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        generator: formats::generator(),
        seed: cfg.seed,
        truth_file: formats::TRUTH_FILE.into(),
        gyro_file: formats::GYRO_FILE.into(),
        attitude_file: formats::ATTITUDE_FILE.into(),
        rows: FileCounts {
            truth: truth.len(),
            gyro: meas.gyro.len(),
            attitude: meas.attitude.len(),
        },
        config: cfg.clone(),
    };
    formats::write_json(&out.join(formats::MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

/// Runs the filter on the measurement set in `measurements` (a directory
/// written by [`simulate`]); writes the history CSV and summary JSON to `out`.
pub fn filter(cfg: &RunConfig, measurements: &Path, out: &Path) -> Result<(FilterHistory, Summary)> {
    cfg.validate()?;
    let manifest: Manifest = formats::read_json(&measurements.join(formats::MANIFEST_FILE))?;
    let gyro = formats::read_gyro(&measurements.join(&manifest.gyro_file))?;
    let attitude = formats::read_attitude(&measurements.join(&manifest.attitude_file))?;
    let truth_path = measurements.join(&manifest.truth_file);
    let truth = if truth_path.exists() {
        let truth = formats::read_truth(&truth_path)?;
        if truth.len() != gyro.len() || truth.iter().zip(&gyro).any(|((t, _), g)| (t - g.t).abs() > 1e-9) {
            return Err(Error::Stream("truth and gyro files are not sampled at the same instants".into()));
        }
        Some(truth.into_iter().map(|(_, s)| s.r).collect::<Vec<_>>())
    } else {
        None
    };
    let Some(first) = gyro.first() else {
        return Err(Error::Stream("gyro file has no samples".into()));
    };

    let initial = FilterState::new(MatrixFisher::new(cfg.initial_f())?, first.t);
    let mut rng = rng_for(cfg.seed, FILTER_STREAM);
    let history = bayes_filter::run(&initial, &gyro, &attitude, &cfg.filter_config()?, truth.as_deref(), &mut rng)?;

    let last = history.records.last();
    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        generator: formats::generator(),
        case: cfg.case_name.clone(),
        seed: cfg.seed,
        measurement_seed: manifest.seed,
        sigma: cfg.sigma,
        records: history.records.len(),
        updates: history.records.iter().filter(|r| r.updated).count(),
        convergence_threshold_deg: CONVERGENCE_THRESHOLD_DEG,
        convergence_time: history.convergence_time(CONVERGENCE_THRESHOLD_DEG),
        steady_state_window: STEADY_STATE_WINDOW,
        steady_state_error_deg: history.mean_error(STEADY_STATE_WINDOW[0], STEADY_STATE_WINDOW[1]),
        final_error_deg: last.and_then(|r| r.error_deg),
        final_singular_values: last.map(|r| [r.s[0], r.s[1], r.s[2]]).unwrap_or_default(),
    };
    create_dir(out)?;
    formats::write_history(&out.join(formats::HISTORY_FILE), &history)?;
    formats::write_json(&out.join(formats::SUMMARY_FILE), &summary)?;
    Ok((history, summary))
}

/// Writes the three body-axis marginal grids of `d`, its sigma points (when
/// they exist for `sigma`) and a metadata file, all prefixed with `tag`.
pub fn export_grid(
    d: &MatrixFisher,
    t: Option<f64>,
    resolution: [usize; 2],
    sigma: f64,
    out: &Path,
    tag: &str,
) -> Result<GridMeta> {
    create_dir(out)?;
    let [n_lat, n_lon] = resolution;
    let mut files: [String; 3] = Default::default();
    let mut peaks = [0.0; 3];
    let mut sums = [0.0; 3];
    for axis in 0..3 {
        let grid = d.density_grid(axis, n_lat, n_lon)?;
        files[axis] = format!("{tag}_axis{}.csv", axis + 1);
        formats::write_grid(&out.join(&files[axis]), &grid)?;
        peaks[axis] = grid.max();
        sums[axis] = grid.weighted_sum();
    }
    let sigma_points_file = match unscented::sigma_points(d, sigma) {
        Ok(set) => {
            let name = format!("{tag}_sigma.csv");
            formats::write_sigma_points(&out.join(&name), &set)?;
            Some(name)
        }
        Err(_) => None,
    };
    let s = d.singular_values();
    let meta = GridMeta {
        schema_version: SCHEMA_VERSION,
        generator: formats::generator(),
        t,
        f: row_major(d.f()),
        log_c: d.log_c(),
        singular_values: [s[0], s[1], s[2]],
        resolution,
        files,
        peaks,
        weighted_sums: sums,
        sigma,
        sigma_points_file,
    };
    formats::write_json(&out.join(format!("{tag}.json")), &meta)?;
    Ok(meta)
}

/// Grid export for an explicit `F` (which must have positive determinant).
pub fn gridexport_f(f: &Matrix3<f64>, resolution: [usize; 2], sigma: f64, out: &Path) -> Result<GridMeta> {
    export_grid(&MatrixFisher::new(*f)?, None, resolution, sigma, out, "grid")
}

/// Grid export of the estimates in a filter history at the given times.
pub fn gridexport_history(
    history: &FilterHistory,
    times: &[f64],
    resolution: [usize; 2],
    sigma: f64,
    out: &Path,
) -> Result<Vec<GridMeta>> {
    times
        .iter()
        .map(|&t| {
            let rec = history
                .at(t)
                .ok_or_else(|| Error::Stream(format!("history has no estimate at t = {t}")))?;
            let d = MatrixFisher::new_signed(rec.f)?;
            export_grid(&d, Some(rec.t), resolution, sigma, out, &format!("grid_t{t:.3}"))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub schema_version: u32,
    pub generator: String,
    pub seed: u64,
    pub n: usize,
    pub f: [f64; 9],
    pub acceptance_rate: f64,
    /// Mean angle between the draws and the mode.
    pub mean_error_deg: f64,
}

/// Draws `n` rotations from `M(F)` into `samples.csv` with a metadata file.
pub fn sample(f: &Matrix3<f64>, n: usize, seed: u64, out: &Path) -> Result<SampleMeta> {
    let d = MatrixFisher::new(*f)?;
    let mut rng = rng_for(seed, 0);
    let (draws, stats) = d.sample_with_stats(n, &mut rng);
    let mode = d.mode();
    let mean_error_deg = if n == 0 {
        0.0
    } else {
        draws.iter().map(|r| attitude_error_deg(r, &mode)).sum::<f64>() / n as f64
    };
    create_dir(out)?;
    formats::write_samples(&out.join(formats::SAMPLES_FILE), &draws)?;
    let meta = SampleMeta {
        schema_version: SCHEMA_VERSION,
        generator: formats::generator(),
        seed,
        n,
        f: row_major(f),
        acceptance_rate: stats.acceptance_rate(),
        mean_error_deg,
    };
    formats::write_json(&out.join("samples.json"), &meta)?;
    Ok(meta)
}

/// Source of `log c(S)` for the self test, so a fault can be injected.
pub type LogC = dyn Fn(&Vector3<f64>) -> f64;

/// Environment variable that selects an injected fault.
pub const FAULT_ENV: &str = "MFA_FAULT";

/// The library normalizer, or a perturbed one when `MFA_FAULT=logc`.
pub fn log_c_provider(fault: Option<&str>) -> Result<Box<LogC>> {
    let exact = |s: &Vector3<f64>| normalizer::log_c(s).unwrap_or(f64::NAN);
    match fault {
        None | Some("") => Ok(Box::new(exact)),
        Some("logc") => Ok(Box::new(move |s: &Vector3<f64>| exact(s) + 1e-3 * (1.0 + s[0]))),
        Some(other) => Err(Error::Config(format!("unknown {FAULT_ENV} value '{other}' (known: logc)"))),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SelftestReport {
    pub suites: Vec<SuiteResult>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(|s| s.passed)
    }

    pub fn render(&self) -> String {
        let width = self.suites.iter().map(|s| s.name.len()).max().unwrap_or(5).max(5);
        let mut out = format!("{:<width$}  result  detail\n", "suite");
        for s in &self.suites {
            let tag = if s.passed { "PASS" } else { "FAIL" };
            let _ = writeln!(out, "{:<width$}  {tag:<6}  {}", s.name, s.detail);
        }
        let n_ok = self.suites.iter().filter(|s| s.passed).count();
        let _ = writeln!(out, "{n_ok}/{} suites passed", self.suites.len());
        out
    }
}

fn check(name: &'static str, worst: f64, tol: f64, what: &str) -> SuiteResult {
    SuiteResult {
        name,
        passed: worst <= tol,
        detail: format!("{what} {worst:.3e} (tol {tol:.0e})"),
    }
}

fn random_s(rng: &mut ChaCha8Rng, hi: f64) -> Vector3<f64> {
    Vector3::from_fn(|_, _| rng.gen_range(0.0..hi))
}

/// `c(S)` by tensor cubature over ZYZ Euler angles, where the Haar measure
/// is `sin β dα dβ dγ / 8π²`. Independent of the normalizer's 1D integral.
pub fn haar_cubature_c(s: &Vector3<f64>, n_periodic: usize, n_gl: usize) -> f64 {
    let (x, w) = gauss_legendre(n_gl);
    let step = 2.0 * PI / n_periodic as f64;
    let mut total = 0.0;
    for (xb, wb) in x.iter().zip(&w) {
        // cos β = xb; the sin β factor is absorbed by integrating in cos β.
        let cb = *xb;
        let mut inner = 0.0;
        for ia in 0..n_periodic {
            let (sa, ca) = (ia as f64 * step).sin_cos();
            for ig in 0..n_periodic {
                let (sg, cg) = (ig as f64 * step).sin_cos();
                let r11 = ca * cb * cg - sa * sg;
                let r22 = -sa * cb * sg + ca * cg;
                let r33 = cb;
                inner += (s[0] * r11 + s[1] * r22 + s[2] * r33).exp();
            }
        }
        total += wb * inner;
    }
    total * step * step / (8.0 * PI * PI)
}

/// Runs the invariant suites against `log_c`.
pub fn selftest_with(log_c: &LogC) -> SelftestReport {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    let mut suites = Vec::new();

    suites.push(check("uniform normalizer", log_c(&Vector3::zeros()).abs(), 1e-12, "|log c(0)|"));

    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let s = random_s(&mut rng, 100.0);
        let shifted = Vector3::new(s[1], s[2], s[0]);
        worst = worst.max((log_c(&shifted) - log_c(&s)).abs());
    }
    suites.push(check("shift invariance", worst, 1e-10, "max |Δ log c|"));

    let mut worst: f64 = 0.0;
    for s in [Vector3::new(0.5, 0.2, 0.1), Vector3::new(2.0, 1.0, 0.5), Vector3::new(4.0, 2.0, 1.0)] {
        let c = haar_cubature_c(&s, 64, 48);
        worst = worst.max((log_c(&s) - c.ln()).abs());
    }
    suites.push(check("haar cubature", worst, 1e-9, "max |log c − log c_cub|"));

    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let s = random_s(&mut rng, 50.0) + Vector3::repeat(1e-3);
        let g = normalizer::grad_log_c(&s).unwrap_or(Vector3::repeat(f64::NAN));
        for i in 0..3 {
            let h = 1e-4;
            let mut a = s;
            let mut b = s;
            a[i] += h;
            b[i] -= h;
            let fd = (log_c(&a) - log_c(&b)) / (2.0 * h);
            worst = worst.max((fd - g[i]).abs());
        }
    }
    suites.push(check("gradient", worst, 1e-6, "max |fd − grad|"));

    let mut worst: f64 = 0.0;
    let (z, wz) = gauss_legendre(160);
    let n_lon = 320;
    for f in [
        Matrix3::identity() * 5.0,
        Matrix3::identity() * 20.0,
        Matrix3::from_diagonal(&Vector3::new(25.0, 5.0, 1.0)),
    ] {
        let d = MatrixFisher::new(f).expect("valid F");
        let shift = d.log_c() - log_c(&d.singular_values());
        for axis in 0..3 {
            let mut total = 0.0;
            for (zi, wi) in z.iter().zip(&wz) {
                let rho = (1.0 - zi * zi).sqrt();
                for j in 0..n_lon {
                    let lon = 2.0 * PI * j as f64 / n_lon as f64;
                    let r = Vector3::new(rho * lon.cos(), rho * lon.sin(), *zi);
                    let lp = d.log_marginal_axis_density(axis, &r).unwrap_or(f64::NAN) + shift;
                    total += wi * lp.exp();
                }
            }
            // Area element dz dλ over the sphere's 4π.
            let mass = total * (2.0 * PI / n_lon as f64) / (4.0 * PI);
            worst = worst.max((mass - 1.0).abs());
        }
    }
    suites.push(check("marginal normalization", worst, 1e-6, "max |mass − 1|"));

    let mut worst: f64 = 0.0;
    let mut used = 0;
    while used < 30 {
        let s = Vector3::new(rng.gen_range(5.0..40.0), rng.gen_range(3.0..30.0), rng.gen_range(1.0..20.0));
        let sigma = rng.gen_range(0.5..0.99);
        let u = random_rotation_uniform(&mut rng);
        let v = random_rotation_uniform(&mut rng);
        let Ok(d) = MatrixFisher::from_parts(u, s, v) else { continue };
        let Ok(set) = unscented::sigma_points(&d, sigma) else { continue };
        used += 1;
        let lc = log_c(&d.singular_values());
        let target = sigma * (d.singular_values().sum() - lc);
        for r in &set.points[1..] {
            let lp = (d.f().transpose() * r.matrix()).trace() - lc;
            worst = worst.max((lp - target).abs() / target.abs().max(1.0));
        }
    }
    suites.push(check("sigma-point density", worst, 1e-9, "max rel. residual"));

    let mut worst: f64 = 0.0;
    let mut used = 0;
    while used < 30 {
        let s = Vector3::new(rng.gen_range(5.0..60.0), rng.gen_range(3.0..40.0), rng.gen_range(1.0..30.0));
        let sigma = rng.gen_range(0.5..0.99);
        let u = random_rotation_uniform(&mut rng);
        let v = random_rotation_uniform(&mut rng);
        let Ok(d) = MatrixFisher::from_parts(u, s, v) else { continue };
        let Ok(set) = unscented::sigma_points(&d, sigma) else { continue };
        used += 1;
        match unscented::reconstruct(&set.mean(), sigma) {
            Ok(back) => worst = worst.max((back.f() - d.f()).amax() / d.f().amax()),
            Err(_) => worst = f64::INFINITY,
        }
    }
    suites.push(check("unscented round trip", worst, 1e-6, "max rel. error"));

    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let s = random_s(&mut rng, 30.0);
        let prior = MatrixFisher::from_parts(random_rotation_uniform(&mut rng), s, random_rotation_uniform(&mut rng))
            .expect("non-negative S");
        let fz = Matrix3::from_diagonal(&random_s(&mut rng, 50.0)) * random_rotation_uniform(&mut rng).matrix();
        let rz = random_rotation_uniform(&mut rng);
        let post = MatrixFisher::new_signed(prior.f() + rz.matrix() * fz.transpose()).expect("finite F");
        let lc_prior = log_c(&prior.singular_values());
        // The posterior may have a negative singular value, outside the provider's domain.
        let lc_post = post.log_c();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for _ in 0..30 {
            let r = random_rotation_uniform(&mut rng);
            let log_prior = (prior.f().transpose() * r.matrix()).trace() - lc_prior;
            let log_lik = (fz.transpose() * r.matrix().transpose() * rz.matrix()).trace();
            let log_post = (post.f().transpose() * r.matrix()).trace() - lc_post;
            let diff = log_prior + log_lik - log_post;
            lo = lo.min(diff);
            hi = hi.max(diff);
        }
        worst = worst.max(hi - lo);
    }
    suites.push(check("conjugate update", worst, 1e-10, "max spread of log ratio"));

    let d = MatrixFisher::new(Matrix3::from_diagonal(&Vector3::new(10.0, 5.0, 2.0))).expect("valid F");
    let n = 20_000;
    let draws = d.sample(n, &mut rng);
    let mut mean = Matrix3::zeros();
    let mut sq = Matrix3::zeros();
    for r in &draws {
        mean += r.matrix();
        sq += r.matrix().component_mul(r.matrix());
    }
    mean /= n as f64;
    sq /= n as f64;
    let expected = Matrix3::from_diagonal(&d.grad_log_c());
    let mut worst: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let se = ((sq[(i, j)] - mean[(i, j)].powi(2)).max(1e-12) / n as f64).sqrt();
            worst = worst.max((mean[(i, j)] - expected[(i, j)]).abs() / se);
        }
    }
    suites.push(check("sampler moments", worst, 4.0, "max |z|"));

    SelftestReport { suites }
}

/// Runs the suites with the fault selected by `MFA_FAULT`, if any.
pub fn selftest() -> Result<SelftestReport> {
    let fault = std::env::var(FAULT_ENV).ok();
    let provider = log_c_provider(fault.as_deref())?;
    Ok(selftest_with(provider.as_ref()))
}
