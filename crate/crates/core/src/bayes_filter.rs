//! Assumed-density attitude filter with matrix Fisher beliefs.
//!
//! Propagation pushes the seven sigma points through the trapezoidal
//! kinematics `R ← R exp((h/2)(Ω_k + w_k + Ω_{k+1} + w_{k+1}))` and projects
//! back onto the matrix Fisher family through the inverse transform. The
//! attitude update is conjugate: `F ← F + R_z F_zᵀ`.
//!
//! Gyro noise enters in one of two ways. [`ProcessNoise::Sampled`] draws
//! `w` independently for every sigma point. [`ProcessNoise::Expected`] uses
//! the expectation of the sigma-point mean over those same draws, which is
//! `R̄ exp(â) E[exp(ξ̂)]` with `a = (h/2)(Ω_k + Ω_{k+1})`. Seven draws per
//! step leave a random first-order term in the mean that the inverse
//! transform amplifies, so the expectation is the default.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix_fisher::MatrixFisher;
use crate::so3::{attitude_error_deg, exp_so3, Rotation};
use crate::unscented::{arithmetic_mean, reconstruct, sigma_points};

/// Relative slack allowed on sample spacing before a gap is reported.
pub const GAP_TOLERANCE: f64 = 0.01;

/// Additive zero-mean Gaussian gyro noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GyroModel {
    pub covariance: Matrix3<f64>,
    pub rate: f64,
}

impl GyroModel {
    pub fn new(covariance: Matrix3<f64>, rate: f64) -> Result<Self> {
        let m = GyroModel { covariance, rate };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return Err(Error::InvalidModel(format!("gyro rate must be positive, got {}", self.rate)));
        }
        let c = &self.covariance;
        if (c - c.transpose()).amax() > 1e-12 * c.amax().max(1.0) {
            return Err(Error::InvalidModel("gyro covariance is not symmetric".into()));
        }
        let min = SymmetricEigen::new(*c).eigenvalues.min();
        if min < -1e-12 * c.amax().max(1.0) {
            return Err(Error::InvalidModel(format!(
                "gyro covariance is not positive semidefinite (eigenvalue {min})"
            )));
        }
        Ok(())
    }

    /// A symmetric square root `L` with `L Lᵀ = covariance`.
    pub fn sqrt_covariance(&self) -> Matrix3<f64> {
        let eig = SymmetricEigen::new(self.covariance);
        let d = eig.eigenvalues.map(|x| x.max(0.0).sqrt());
        eig.eigenvectors * Matrix3::from_diagonal(&d) * eig.eigenvectors.transpose()
    }

    pub fn period(&self) -> f64 {
        1.0 / self.rate
    }
}

/// Attitude sensor `R_z = R W_R` with `W_R ~ M(F_z)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttitudeModel {
    pub fz: Matrix3<f64>,
    pub rate: f64,
}

impl AttitudeModel {
    pub fn new(fz: Matrix3<f64>, rate: f64) -> Result<Self> {
        let m = AttitudeModel { fz, rate };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "attitude rate must be positive, got {}",
                self.rate
            )));
        }
        let det = self.fz.determinant();
        if !(det > 0.0) {
            return Err(Error::NonPositiveDeterminant { det });
        }
        Ok(())
    }

    pub fn noise(&self) -> Result<MatrixFisher> {
        MatrixFisher::new(self.fz)
    }
}

/// Draws `w ~ N(0, L Lᵀ)`.
pub fn draw_gaussian<R: Rng + ?Sized>(sqrt_cov: &Matrix3<f64>, rng: &mut R) -> Vector3<f64> {
    let z = Vector3::new(
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
    );
    sqrt_cov * z
}

/// How gyro noise enters the propagated sigma points.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessNoise {
    /// Closed-form expectation over the noise; no random draws.
    #[default]
    Expected,
    /// Independent draws per sigma point, with the end-of-interval draw of
    /// each point reused at the start of the next interval.
    Sampled,
}

/// `E[exp(ξ̂)]` for `ξ ~ N(0, P)`, through fourth order in `P`.
pub fn expected_exp(p: &Matrix3<f64>) -> Matrix3<f64> {
    let i = Matrix3::identity();
    let tr = p.trace();
    let p2 = p * p;
    // (1 − cos θ)/θ² = ½ − θ²/24 + …, with ξ̂² = ξξᵀ − θ² I.
    i + (p - i * tr) * 0.5 - (p * tr + p2 * 2.0 - i * (tr * tr + 2.0 * p2.trace())) / 24.0
}

/// Right Jacobian: `exp(a + δ) ≈ exp(a) exp(J_r(a) δ)`.
pub fn right_jacobian(a: &Vector3<f64>) -> Matrix3<f64> {
    let t = a.norm();
    let h = crate::so3::hat(a);
    let (c1, c2) = if t < 1e-4 {
        (0.5 - t * t / 24.0, 1.0 / 6.0 - t * t / 120.0)
    } else {
        ((1.0 - t.cos()) / (t * t), (t - t.sin()) / (t * t * t))
    };
    Matrix3::identity() - h * c1 + h * h * c2
}

#[derive(Clone, Debug, PartialEq)]
pub struct FilterState {
    pub estimate: MatrixFisher,
    pub t: f64,
    /// Per-point gyro noise drawn for the end of the last interval; reused as
    /// the start-of-interval noise of the next one.
    carried_noise: Option<[Vector3<f64>; 7]>,
}

impl FilterState {
    pub fn new(estimate: MatrixFisher, t: f64) -> Self {
        FilterState {
            estimate,
            t,
            carried_noise: None,
        }
    }

    pub fn carried_noise(&self) -> Option<&[Vector3<f64>; 7]> {
        self.carried_noise.as_ref()
    }
}

/// One propagation interval.
#[allow(clippy::too_many_arguments)]
pub fn propagate<R: Rng + ?Sized>(
    state: &FilterState,
    omega_k: &Vector3<f64>,
    omega_k1: &Vector3<f64>,
    h: f64,
    sigma: f64,
    gyro: &GyroModel,
    noise: ProcessNoise,
    rng: &mut R,
) -> Result<FilterState> {
    if !(h > 0.0) {
        return Err(Error::Stream(format!("non-positive time step {h}")));
    }
    let sp = sigma_points(&state.estimate, sigma)?;
    let a = (omega_k + omega_k1) * (0.5 * h);
    match noise {
        ProcessNoise::Expected => {
            // ξ = (h/2)(w_k + w_{k+1}) has covariance (h²/2) Σ.
            let jr = right_jacobian(&a);
            let p = jr * gyro.covariance * jr.transpose() * (0.5 * h * h);
            let rbar = sp.mean() * exp_so3(&a).matrix() * expected_exp(&p);
            Ok(FilterState {
                estimate: reconstruct(&rbar, sigma)?,
                t: state.t + h,
                carried_noise: None,
            })
        }
        ProcessNoise::Sampled => {
            let l = gyro.sqrt_covariance();
            let start = match state.carried_noise {
                Some(w) => w,
                None => std::array::from_fn(|_| draw_gaussian(&l, rng)),
            };
            let end: [Vector3<f64>; 7] = std::array::from_fn(|_| draw_gaussian(&l, rng));
            let moved: Vec<Rotation> = sp
                .points
                .iter()
                .enumerate()
                .map(|(i, r)| r * &exp_so3(&(a + (start[i] + end[i]) * (0.5 * h))))
                .collect();
            Ok(FilterState {
                estimate: reconstruct(&arithmetic_mean(&moved), sigma)?,
                t: state.t + h,
                carried_noise: Some(end),
            })
        }
    }
}

/// Conjugate attitude update `F ← F + R_z F_zᵀ`. Fails only on non-finite input.
pub fn update(state: &FilterState, rz: &Rotation, att: &AttitudeModel) -> Result<FilterState> {
    // A measurement that contradicts a confident prior can leave det F at or
    // below zero; the signed decomposition keeps that a valid belief.
    let f = state.estimate.f() + rz.matrix() * att.fz.transpose();
    Ok(FilterState {
        estimate: MatrixFisher::new_signed(f)?,
        t: state.t,
        carried_noise: state.carried_noise,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GyroSample {
    pub t: f64,
    pub omega: Vector3<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttitudeSample {
    pub t: f64,
    pub r: Rotation,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterRecord {
    pub t: f64,
    /// Angle between the mode and the true attitude, when truth is known.
    pub error_deg: Option<f64>,
    pub f: Matrix3<f64>,
    pub s: Vector3<f64>,
    pub mode: Rotation,
    /// True when an attitude measurement was fused at this time.
    pub updated: bool,
}

impl FilterRecord {
    fn new(state: &FilterState, truth: Option<&Rotation>, updated: bool) -> Self {
        let mode = state.estimate.mode();
        FilterRecord {
            t: state.t,
            error_deg: truth.map(|r| attitude_error_deg(&mode, r)),
            f: *state.estimate.f(),
            s: state.estimate.singular_values(),
            mode,
            updated,
        }
    }

    /// `1/s_i`, the per-axis uncertainty.
    pub fn inverse_s(&self) -> Vector3<f64> {
        self.s.map(|x| 1.0 / x)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FilterHistory {
    pub records: Vec<FilterRecord>,
}

impl FilterHistory {
    /// The last record with `t ≤ time` (to within half a microsecond).
    pub fn at(&self, time: f64) -> Option<&FilterRecord> {
        self.records.iter().rev().find(|r| r.t <= time + 5e-7)
    }

    /// Mean error over records with `t ∈ [from, to]`.
    pub fn mean_error(&self, from: f64, to: f64) -> Option<f64> {
        let errs: Vec<f64> = self
            .records
            .iter()
            .filter(|r| r.t >= from - 5e-7 && r.t <= to + 5e-7)
            .filter_map(|r| r.error_deg)
            .collect();
        (!errs.is_empty()).then(|| errs.iter().sum::<f64>() / errs.len() as f64)
    }

    /// First time after which the error stays at or below `threshold`.
    pub fn convergence_time(&self, threshold: f64) -> Option<f64> {
        let mut candidate = None;
        for r in &self.records {
            match r.error_deg {
                Some(e) if e <= threshold => {
                    candidate.get_or_insert(r.t);
                }
                Some(_) => candidate = None,
                None => {}
            }
        }
        candidate
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub sigma: f64,
    pub gyro: GyroModel,
    pub attitude: AttitudeModel,
    #[serde(default)]
    pub process_noise: ProcessNoise,
}

/// Runs the filter over a gyro stream, fusing each attitude sample at the
/// gyro instant it coincides with. `truth`, when given, must hold one
/// rotation per gyro sample.
pub fn run<R: Rng + ?Sized>(
    initial: &FilterState,
    gyro: &[GyroSample],
    attitude: &[AttitudeSample],
    config: &FilterConfig,
    truth: Option<&[Rotation]>,
    rng: &mut R,
) -> Result<FilterHistory> {
    config.gyro.validate()?;
    config.attitude.validate()?;
    if config.gyro.rate < config.attitude.rate {
        return Err(Error::Stream("gyro rate must not be below the attitude rate".into()));
    }
    if let Some(tr) = truth {
        if tr.len() != gyro.len() {
            return Err(Error::Stream(format!(
                "truth has {} samples for {} gyro samples",
                tr.len(),
                gyro.len()
            )));
        }
    }
    let Some(first) = gyro.first() else {
        return Ok(FilterHistory::default());
    };
    let period = config.gyro.period();
    let align = 0.5 * period;
    if (first.t - initial.t).abs() > align {
        return Err(Error::Stream(format!(
            "first gyro sample at {} does not match the initial time {}",
            first.t, initial.t
        )));
    }
    for w in attitude.windows(2) {
        if !(w[1].t > w[0].t) {
            return Err(Error::Stream(format!("attitude stream not increasing at t = {}", w[1].t)));
        }
    }
    let att_gap = (1.0 + GAP_TOLERANCE) / config.attitude.rate;
    if let Some(a) = attitude.first() {
        if a.t < first.t - align {
            return Err(Error::Stream(format!("attitude sample at {} precedes the gyro stream", a.t)));
        }
    }
    for w in attitude.windows(2) {
        if w[1].t - w[0].t > att_gap {
            return Err(Error::Stream(format!(
                "attitude gap of {} s after t = {}",
                w[1].t - w[0].t,
                w[0].t
            )));
        }
    }
    if let Some(a) = attitude.last() {
        if a.t > gyro[gyro.len() - 1].t + align {
            return Err(Error::Stream(format!("attitude sample at {} follows the gyro stream", a.t)));
        }
    }

    let mut next_att = 0;
    let mut state = initial.clone();
    state.t = first.t;
    let mut history = FilterHistory::default();

    let fuse = |state: &mut FilterState, next_att: &mut usize, t: f64| -> Result<bool> {
        let mut fused = false;
        while *next_att < attitude.len() && attitude[*next_att].t <= t + align {
            *state = update(state, &attitude[*next_att].r, &config.attitude)?;
            *next_att += 1;
            fused = true;
        }
        Ok(fused)
    };

    let updated = fuse(&mut state, &mut next_att, first.t)?;
    history
        .records
        .push(FilterRecord::new(&state, truth.map(|t| &t[0]), updated));

    for k in 1..gyro.len() {
        let (a, b) = (&gyro[k - 1], &gyro[k]);
        let h = b.t - a.t;
        if !(h > 0.0) {
            return Err(Error::Stream(format!("gyro stream not increasing at t = {}", b.t)));
        }
        if h > period * (1.0 + GAP_TOLERANCE) {
            return Err(Error::Stream(format!("gyro gap of {h} s after t = {}", a.t)));
        }
        state = propagate(
            &state,
            &a.omega,
            &b.omega,
            h,
            config.sigma,
            &config.gyro,
            config.process_noise,
            rng,
        )?;
        state.t = b.t;
        let updated = fuse(&mut state, &mut next_att, b.t)?;
        history
            .records
            .push(FilterRecord::new(&state, truth.map(|t| &t[k]), updated));
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::so3::random_rotation_uniform;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn diag(a: f64, b: f64, c: f64) -> Matrix3<f64> {
        Matrix3::from_diagonal(&Vector3::new(a, b, c))
    }

    fn quiet_gyro() -> GyroModel {
        GyroModel::new(Matrix3::zeros(), 50.0).unwrap()
    }

    #[test]
    fn still_body_keeps_estimate() {
        let f = diag(8.0, 4.0, 2.0);
        let st = FilterState::new(MatrixFisher::new(f).unwrap(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let z = Vector3::zeros();
        for noise in [ProcessNoise::Expected, ProcessNoise::Sampled] {
            let out = propagate(&st, &z, &z, 0.02, 0.9, &quiet_gyro(), noise, &mut rng).unwrap();
            assert!((out.estimate.f() - f).norm() / f.norm() < 1e-9);
        }
        let out = propagate(&st, &z, &z, 0.02, 0.9, &quiet_gyro(), ProcessNoise::Expected, &mut rng).unwrap();
        assert!((out.t - 0.02).abs() < 1e-15);
    }

    #[test]
    fn constant_spin_rotates_mode() {
        let f = diag(8.0, 4.0, 2.0);
        let st = FilterState::new(MatrixFisher::new(f).unwrap(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = Vector3::new(1.0, 0.0, 0.0);
        let out = propagate(&st, &w, &w, 0.02, 0.9, &quiet_gyro(), ProcessNoise::Sampled, &mut rng).unwrap();
        let want = st.estimate.mode() * exp_so3(&(w * 0.02));
        assert!(attitude_error_deg(&out.estimate.mode(), &want) < 1e-6);
        assert!((out.estimate.singular_values() - Vector3::new(8.0, 4.0, 2.0)).amax() < 1e-6);
    }

    #[test]
    fn gyro_noise_spreads_the_estimate() {
        let gyro = GyroModel::new(diag(0.25, 0.64, 1.0), 50.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut st = FilterState::new(MatrixFisher::new(diag(50.0, 50.0, 50.0)).unwrap(), 0.0);
        let z = Vector3::zeros();
        for _ in 0..50 {
            let next = propagate(&st, &z, &z, 0.02, 0.9, &gyro, ProcessNoise::Expected, &mut rng).unwrap();
            let (a, b) = (next.estimate.singular_values(), st.estimate.singular_values());
            assert!(a.iter().zip(b.iter()).all(|(x, y)| x < y));
            st = next;
        }
        // The least noisy axis keeps the largest spread about the others.
        let s = st.estimate.singular_values();
        assert!(s[0] > s[2]);
    }

    #[test]
    fn sampled_noise_is_carried_per_point() {
        let gyro = GyroModel::new(diag(0.25, 0.64, 1.0), 50.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let st = FilterState::new(MatrixFisher::new(diag(5.0, 4.0, 3.0)).unwrap(), 0.0);
        let z = Vector3::zeros();
        let a = propagate(&st, &z, &z, 0.02, 0.9, &gyro, ProcessNoise::Sampled, &mut rng).unwrap();
        let carried = *a.carried_noise().unwrap();
        // A fresh state would draw the start noise; a carried one must not.
        let mut r1 = ChaCha8Rng::seed_from_u64(77);
        let mut r2 = ChaCha8Rng::seed_from_u64(77);
        let b = propagate(&a, &z, &z, 0.02, 0.9, &gyro, ProcessNoise::Sampled, &mut r1).unwrap();
        let l = gyro.sqrt_covariance();
        let end: Vec<Vector3<f64>> = (0..7).map(|_| draw_gaussian(&l, &mut r2)).collect();
        assert_eq!(b.carried_noise().unwrap().to_vec(), end);
        assert_ne!(carried.to_vec(), end);
    }

    #[test]
    fn expected_exp_matches_monte_carlo() {
        let p = Matrix3::new(0.02, 0.004, 0.0, 0.004, 0.01, -0.002, 0.0, -0.002, 0.03);
        let l = GyroModel::new(p, 1.0).unwrap().sqrt_covariance();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let n = 400_000;
        let mut acc = Matrix3::zeros();
        let mut acc2 = Matrix3::zeros();
        for _ in 0..n {
            let xi = draw_gaussian(&l, &mut rng);
            // antithetic pair cancels the odd (skew) term exactly
            let e = (exp_so3(&xi).into_inner() + exp_so3(&-xi).into_inner()) * 0.5;
            acc += e;
            acc2 += e.component_mul(&e);
        }
        let mean = acc / n as f64;
        let var = acc2 / n as f64 - mean.component_mul(&mean);
        let want = expected_exp(&p);
        for k in 0..9 {
            let se = (var[k].max(0.0) / n as f64).sqrt().max(1e-12);
            assert!((mean[k] - want[k]).abs() < 4.0 * se + 1e-7, "{k}: {} vs {}", mean[k], want[k]);
        }
    }

    #[test]
    fn right_jacobian_matches_finite_differences() {
        let a = Vector3::new(0.3, -0.7, 0.4);
        let jr = right_jacobian(&a);
        let base = exp_so3(&a);
        let h = 1e-6;
        for k in 0..3 {
            let mut d = Vector3::zeros();
            d[k] = h;
            let plus = base.transpose() * exp_so3(&(a + d));
            let minus = base.transpose() * exp_so3(&(a - d));
            let col = (plus.into_inner() - minus.into_inner()) / (2.0 * h);
            let v = Vector3::new(col[(2, 1)], col[(0, 2)], col[(1, 0)]);
            assert!((v - jr.column(k)).amax() < 1e-8);
        }
        let tiny = Vector3::new(1e-6, 2e-6, -1e-6);
        assert!((right_jacobian(&tiny) - Matrix3::identity()).amax() < 1e-5);
    }

    #[test]
    fn update_is_conjugate() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let prior = MatrixFisher::new(diag(10.0, 6.0, 3.0) * random_rotation_uniform(&mut rng).matrix()).unwrap();
        let rz = random_rotation_uniform(&mut rng);
        let att = AttitudeModel::new(diag(40.0, 50.0, 35.0), 10.0).unwrap();
        let noise = att.noise().unwrap();
        let post = update(&FilterState::new(prior.clone(), 0.0), &rz, &att).unwrap();
        let mut offsets = Vec::new();
        for _ in 0..100 {
            let r = random_rotation_uniform(&mut rng);
            // likelihood p(R_z | R) = p_W(Rᵀ R_z)
            let lik = noise.log_density(&(r.transpose() * rz));
            offsets.push(prior.log_density(&r) + lik - post.estimate.log_density(&r));
        }
        let spread = offsets.iter().cloned().fold(f64::MIN, f64::max)
            - offsets.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread < 1e-12, "{spread}");
    }

    #[test]
    fn near_uniform_prior_takes_measurement() {
        let rz = exp_so3(&Vector3::new(0.3, -0.2, 1.1));
        let att = AttitudeModel::new(diag(40.0, 50.0, 35.0), 10.0).unwrap();
        let prior = FilterState::new(MatrixFisher::new(Matrix3::identity() * 1e-9).unwrap(), 0.0);
        let post = update(&prior, &rz, &att).unwrap();
        assert!(attitude_error_deg(&post.estimate.mode(), &rz) < 1e-6);
    }

    #[test]
    fn repeated_updates_concentrate() {
        let att = AttitudeModel::new(diag(40.0, 50.0, 35.0), 10.0).unwrap();
        let mut st = FilterState::new(MatrixFisher::new(diag(5.0, 4.0, 3.0)).unwrap(), 0.0);
        let mut prev = st.estimate.singular_values();
        for _ in 0..5 {
            let m = st.estimate.mode();
            st = update(&st, &m, &att).unwrap();
            let s = st.estimate.singular_values();
            assert!(s.iter().zip(prev.iter()).all(|(a, b)| a > b));
            prev = s;
        }
    }

    #[test]
    fn invalid_models() {
        assert!(GyroModel::new(diag(1.0, -1.0, 1.0), 50.0).is_err());
        assert!(GyroModel::new(Matrix3::zeros(), 0.0).is_err());
        assert!(AttitudeModel::new(diag(1.0, 1.0, -1.0), 10.0).is_err());
    }

    #[test]
    fn sqrt_covariance_squares_back() {
        let c = Matrix3::new(2.0, 0.3, 0.1, 0.3, 1.0, 0.2, 0.1, 0.2, 0.5);
        let l = GyroModel::new(c, 50.0).unwrap().sqrt_covariance();
        assert!((l * l.transpose() - c).amax() < 1e-12);
    }

    fn streams(n: usize) -> (Vec<GyroSample>, Vec<AttitudeSample>) {
        let gyro = (0..n)
            .map(|k| GyroSample {
                t: k as f64 * 0.02,
                omega: Vector3::zeros(),
            })
            .collect();
        let att = (1..)
            .map(|k| k as f64 * 0.1)
            .take_while(|t| *t <= (n - 1) as f64 * 0.02 + 1e-9)
            .map(|t| AttitudeSample {
                t,
                r: Rotation::identity(),
            })
            .collect();
        (gyro, att)
    }

    fn config() -> FilterConfig {
        FilterConfig {
            sigma: 0.9,
            gyro: GyroModel::new(diag(0.25, 0.64, 1.0), 50.0).unwrap(),
            attitude: AttitudeModel::new(diag(40.0, 50.0, 35.0), 10.0).unwrap(),
            process_noise: ProcessNoise::Expected,
        }
    }

    #[test]
    fn run_is_deterministic() {
        let (g, a) = streams(51);
        let init = FilterState::new(MatrixFisher::new(diag(10.0, 8.0, 6.0)).unwrap(), 0.0);
        let h1 = run(&init, &g, &a, &config(), None, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let h2 = run(&init, &g, &a, &config(), None, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(h1, h2);
        assert_eq!(h1.records.len(), 51);
        assert_eq!(h1.records.iter().filter(|r| r.updated).count(), 10);
    }

    #[test]
    fn dead_reckoning_diffuses() {
        let (g, _) = streams(51);
        let init = FilterState::new(MatrixFisher::new(diag(30.0, 30.0, 30.0)).unwrap(), 0.0);
        let h = run(&init, &g, &[], &config(), None, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let first = h.records[0].s;
        let last = h.records[50].s;
        assert!(last.iter().zip(first.iter()).all(|(a, b)| a < b));
    }

    #[test]
    fn gaps_are_rejected() {
        let (mut g, a) = streams(20);
        g.remove(7);
        let init = FilterState::new(MatrixFisher::new(diag(10.0, 8.0, 6.0)).unwrap(), 0.0);
        let err = run(&init, &g, &a, &config(), None, &mut ChaCha8Rng::seed_from_u64(3));
        assert!(matches!(err, Err(Error::Stream(_))));
    }

    #[test]
    fn convergence_time_needs_staying_below() {
        let mk = |t, e| FilterRecord {
            t,
            error_deg: Some(e),
            f: Matrix3::identity(),
            s: Vector3::repeat(1.0),
            mode: Rotation::identity(),
            updated: false,
        };
        let h = FilterHistory {
            records: vec![mk(0.0, 90.0), mk(0.1, 5.0), mk(0.2, 20.0), mk(0.3, 4.0), mk(0.4, 3.0)],
        };
        assert_eq!(h.convergence_time(10.0), Some(0.3));
        assert_eq!(h.mean_error(0.3, 0.4), Some(3.5));
    }
}
