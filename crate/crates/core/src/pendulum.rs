//! Rigid pendulum about a fixed pivot under uniform gravity, and synthetic
//! gyro/attitude sensors sampled from its trajectory.
//!
//! `Ṙ = R Ω̂`, `J Ω̇ = J Ω × Ω + m g ρ × Rᵀ e3`, with `e3` pointing along
//! gravity. Steps use a fourth-order Runge–Kutta–Munthe-Kaas scheme: RK4 on
//! `(θ, Ω)` where `R = R_0 exp(θ̂)`, so the attitude never leaves the group.

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bayes_filter::{draw_gaussian, AttitudeModel, AttitudeSample, GyroModel, GyroSample};
use crate::error::{Error, Result};
use crate::so3::{exp_so3, hat, Rotation};

/// Largest inner step accepted by [`step_dynamics`].
pub const MAX_STEP: f64 = 0.002;
pub const DEFAULT_STEP: f64 = 0.001;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidBodyParams {
    pub j: Matrix3<f64>,
    pub m: f64,
    pub g: f64,
    pub rho: Vector3<f64>,
}

impl Default for RigidBodyParams {
    fn default() -> Self {
        RigidBodyParams {
            j: Matrix3::from_diagonal(&Vector3::new(0.0294, 0.0327, 0.0067)),
            m: 1.0,
            g: 9.81,
            rho: Vector3::new(0.0, 0.0, 0.03),
        }
    }
}

impl RigidBodyParams {
    pub fn validate(&self) -> Result<()> {
        if (self.j - self.j.transpose()).amax() > 1e-12 * self.j.amax() {
            return Err(Error::InvalidModel("inertia matrix is not symmetric".into()));
        }
        if self.j.cholesky().is_none() {
            return Err(Error::InvalidModel("inertia matrix is not positive definite".into()));
        }
        if !(self.m > 0.0 && self.g > 0.0) {
            return Err(Error::InvalidModel("mass and gravity must be positive".into()));
        }
        if !self.rho.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidModel("non-finite centre of mass offset".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrueState {
    pub r: Rotation,
    pub omega: Vector3<f64>,
}

/// Total energy, kinetic plus gravitational potential.
pub fn energy(s: &TrueState, p: &RigidBodyParams) -> f64 {
    let e3 = Vector3::z();
    0.5 * s.omega.dot(&(p.j * s.omega)) - p.m * p.g * p.rho.dot(&(s.r.matrix().transpose() * e3))
}

fn angular_acceleration(
    r: &Matrix3<f64>,
    omega: &Vector3<f64>,
    p: &RigidBodyParams,
    j_inv: &Matrix3<f64>,
) -> Vector3<f64> {
    let down = r.transpose() * Vector3::z();
    let torque = (p.j * omega).cross(omega) + p.rho.cross(&down) * (p.m * p.g);
    j_inv * torque
}

/// Inverse right Jacobian of the exponential map.
fn dexp_inv(theta: &Vector3<f64>) -> Matrix3<f64> {
    let a = theta.norm();
    let th = hat(theta);
    let coef = if a < 1e-4 {
        1.0 / 12.0 + a * a / 720.0
    } else {
        1.0 / (a * a) - (1.0 + a.cos()) / (2.0 * a * a.sin())
    };
    Matrix3::identity() + th * 0.5 + th * th * coef
}

/// One RKMK4 step of length `h ≤ 2 ms`.
pub fn step_dynamics(s: &TrueState, p: &RigidBodyParams, h: f64) -> Result<TrueState> {
    if !(h > 0.0 && h <= MAX_STEP) {
        return Err(Error::InvalidModel(format!("inner step {h} outside (0, {MAX_STEP}]")));
    }
    let j_inv = p
        .j
        .try_inverse()
        .ok_or_else(|| Error::InvalidModel("singular inertia".into()))?;
    let r0 = *s.r.matrix();
    let field = |theta: &Vector3<f64>, omega: &Vector3<f64>| {
        let r = r0 * exp_so3(theta).matrix();
        (dexp_inv(theta) * omega, angular_acceleration(&r, omega, p, &j_inv))
    };
    let z = Vector3::zeros();
    let (k1t, k1w) = field(&z, &s.omega);
    let (k2t, k2w) = field(&(k1t * (0.5 * h)), &(s.omega + k1w * (0.5 * h)));
    let (k3t, k3w) = field(&(k2t * (0.5 * h)), &(s.omega + k2w * (0.5 * h)));
    let (k4t, k4w) = field(&(k3t * h), &(s.omega + k3w * h));
    let theta = (k1t + k2t * 2.0 + k3t * 2.0 + k4t) * (h / 6.0);
    let omega = s.omega + (k1w + k2w * 2.0 + k3w * 2.0 + k4w) * (h / 6.0);
    Ok(TrueState {
        r: s.r * exp_so3(&theta),
        omega,
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub states: Vec<TrueState>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// Integrates from `initial` at `h` for `duration` seconds, keeping every
/// step (index `k` holds time `k·h`).
pub fn simulate(
    initial: &TrueState,
    p: &RigidBodyParams,
    h: f64,
    duration: f64,
) -> Result<Trajectory> {
    p.validate()?;
    let steps = (duration / h).round() as usize;
    let mut traj = Trajectory {
        t: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
    };
    let mut s = *initial;
    traj.t.push(0.0);
    traj.states.push(s);
    for k in 1..=steps {
        s = step_dynamics(&s, p, h)?;
        traj.t.push(k as f64 * h);
        traj.states.push(s);
    }
    Ok(traj)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementStream {
    pub gyro: Vec<GyroSample>,
    pub attitude: Vec<AttitudeSample>,
    pub seed: u64,
}

/// Integer decimation factor of `rate` with respect to the step `h`.
fn stride(h: f64, rate: f64) -> Result<usize> {
    let n = 1.0 / (rate * h);
    let k = n.round();
    if k < 1.0 || (n - k).abs() > 1e-6 {
        return Err(Error::InvalidModel(format!(
            "sensor rate {rate} Hz does not divide the trajectory step {h} s"
        )));
    }
    Ok(k as usize)
}

/// Gyro samples `Ω + w` at every gyro period from `t = 0`; attitude samples
/// `R W` with `W ~ M(F_z)` at every attitude period from `t = 1/rate`.
///
/// Gyro noise is drawn from `rng` first, then all attitude noise, so the
/// gyro stream does not depend on the attitude model.
pub fn synthesize_measurements<R: Rng + ?Sized>(
    traj: &Trajectory,
    gyro: &GyroModel,
    att: &AttitudeModel,
    seed: u64,
    rng: &mut R,
) -> Result<MeasurementStream> {
    gyro.validate()?;
    att.validate()?;
    if traj.len() < 2 {
        return Err(Error::InvalidModel("trajectory has fewer than two samples".into()));
    }
    let h = traj.t[1] - traj.t[0];
    let gs = stride(h, gyro.rate)?;
    let as_ = stride(h, att.rate)?;
    let l = gyro.sqrt_covariance();
    let gyro_out = (0..traj.len())
        .step_by(gs)
        .map(|k| GyroSample {
            t: traj.t[k],
            omega: traj.states[k].omega + draw_gaussian(&l, rng),
        })
        .collect();
    let idx: Vec<usize> = (as_..traj.len()).step_by(as_).collect();
    let noise = att.noise()?.sample(idx.len(), rng);
    let att_out = idx
        .iter()
        .zip(noise)
        .map(|(&k, w)| AttitudeSample {
            t: traj.t[k],
            r: traj.states[k].r * w,
        })
        .collect();
    Ok(MeasurementStream {
        gyro: gyro_out,
        attitude: att_out,
        seed,
    })
}

/// Every state at multiples of `1/rate` from `t = 0`.
pub fn sample_at_rate(traj: &Trajectory, rate: f64) -> Result<Vec<(f64, TrueState)>> {
    if traj.len() < 2 {
        return Err(Error::InvalidModel("trajectory has fewer than two samples".into()));
    }
    let gs = stride(traj.t[1] - traj.t[0], rate)?;
    Ok((0..traj.len())
        .step_by(gs)
        .map(|k| (traj.t[k], traj.states[k]))
        .collect())
}

/// Truth rotations at the gyro instants.
pub fn truth_at_gyro(traj: &Trajectory, gyro_rate: f64) -> Result<Vec<Rotation>> {
    Ok(sample_at_rate(traj, gyro_rate)?
        .into_iter()
        .map(|(_, s)| s.r)
        .collect())
}
