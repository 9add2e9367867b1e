//! Unscented transform for the matrix Fisher distribution and its inverse.
//!
//! Seven sigma points: the mode `M = U Vᵀ`, and for each principal axis `i`
//! the rotations `U exp(±θ_i ê_i) Vᵀ`, with angles chosen so that all six
//! off-mode points share the log density `σ (s_T − log c(S))`.
//!
//! The inverse goes through the arithmetic mean of the points, whose proper
//! SVD shares `U` and `V` with the generator and has singular values
//! `d_i = (3 + 2 cos θ_j + 2 cos θ_k) / 7`.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix_fisher::MatrixFisher;
use crate::normalizer::{log_c_and_grad_signed, log_c_signed};
use crate::so3::{axis_rotation, proper_svd, Rotation};

/// Default spread parameter.
pub const DEFAULT_SIGMA: f64 = 0.9;

const COS_CLAMP: f64 = 1e-9;
const MAX_NEWTON_ITER: usize = 100;
const RESIDUAL_TOL: f64 = 1e-9;

/// Seven sigma points: index 0 is the mode, then `+θ1, −θ1, +θ2, −θ2, +θ3, −θ3`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaSet {
    pub points: [Rotation; 7],
    pub sigma: f64,
}

impl SigmaSet {
    pub fn mean(&self) -> Matrix3<f64> {
        mean_of_points(self)
    }
}

fn validate_sigma(sigma: f64) -> Result<()> {
    if sigma.is_finite() && sigma <= 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("spread parameter must satisfy sigma < 1, got {sigma}")))
    }
}

/// `cos θ_i = ((1−σ) log c(S) + σ s_T − s_i) / (s_j + s_k)` for cyclic `(i, j, k)`.
pub fn cos_theta(s: &Vector3<f64>, sigma: f64) -> Result<Vector3<f64>> {
    if !s.iter().all(|x| x.is_finite() && *x >= 0.0) {
        return Err(Error::InvalidSingularValues([s[0], s[1], s[2]]));
    }
    cos_theta_with(s, log_c_signed(s), sigma)
}

fn cos_theta_with(s: &Vector3<f64>, log_c: f64, sigma: f64) -> Result<Vector3<f64>> {
    validate_sigma(sigma)?;
    let total = s.sum();
    let mut out = Vector3::zeros();
    for i in 0..3 {
        let spread = s[(i + 1) % 3] + s[(i + 2) % 3];
        if !(spread > 0.0) {
            return Err(Error::DegenerateDistribution(format!(
                "s_j + s_k = 0 for axis {}",
                i + 1
            )));
        }
        let c = ((1.0 - sigma) * log_c + sigma * total - s[i]) / spread;
        out[i] = if c > 1.0 && c <= 1.0 + COS_CLAMP {
            1.0
        } else if (-1.0..=1.0).contains(&c) {
            c
        } else {
            return Err(Error::InfeasibleSpread {
                axis: i + 1,
                sigma,
                cos_theta: c,
            });
        };
    }
    Ok(out)
}

/// The seven sigma points of `d` for spread `sigma`.
pub fn sigma_points(d: &MatrixFisher, sigma: f64) -> Result<SigmaSet> {
    let cos = cos_theta_with(&d.singular_values(), d.log_c(), sigma)?;
    let svd = d.svd();
    let vt = svd.v.transpose();
    let mut points = [svd.polar(); 7];
    for i in 0..3 {
        let theta = cos[i].clamp(-1.0, 1.0).acos();
        points[1 + 2 * i] = (svd.u * axis_rotation(i, theta)) * vt;
        points[2 + 2 * i] = (svd.u * axis_rotation(i, -theta)) * vt;
    }
    Ok(SigmaSet { points, sigma })
}

/// Arithmetic mean of the seven points.
pub fn mean_of_points(sp: &SigmaSet) -> Matrix3<f64> {
    arithmetic_mean(&sp.points)
}

pub fn arithmetic_mean(points: &[Rotation]) -> Matrix3<f64> {
    let sum = points
        .iter()
        .fold(Matrix3::zeros(), |acc, r| acc + r.matrix());
    sum / points.len() as f64
}

/// Singular values of the sigma-point mean predicted from the angles.
pub fn mean_singular_values(cos: &Vector3<f64>) -> Vector3<f64> {
    Vector3::from_fn(|i, _| (3.0 + 2.0 * (cos[(i + 1) % 3] + cos[(i + 2) % 3])) / 7.0)
}

/// Recovers the matrix Fisher parameter from the mean of its sigma points.
///
/// With `t_i = s_j + s_k` the defining relation for the angles reads
/// `t_i (1 − cos θ_i) = (1 − σ)(s_T − log c(S))` for every axis, so `t` is
/// proportional to `w_i = 1/(1 − cos θ_i)` and only the common scale `κ` is
/// unknown. `κ ↦ κ − (1−σ)(s_T − log c(S(κ)))` is convex (the log normalizer
/// is convex and vanishes at zero), so its positive root is unique and is
/// found by safeguarded Newton iteration.
pub fn reconstruct(rbar: &Matrix3<f64>, sigma: f64) -> Result<MatrixFisher> {
    validate_sigma(sigma)?;
    if !(sigma < 1.0) {
        return Err(Error::DegenerateDistribution(
            "sigma = 1 collapses every sigma point onto the mode".into(),
        ));
    }
    let svd = proper_svd(rbar)?;
    let d = svd.s;

    // d_i = (3 + 2 y_i)/7 with y_i = cos θ_j + cos θ_k.
    let y = d.map(|di| (7.0 * di - 3.0) / 2.0);
    let cos = Vector3::from_fn(|i, _| 0.5 * (y[(i + 1) % 3] + y[(i + 2) % 3] - y[i]));
    for i in 0..3 {
        if !(cos[i] > -1.0 && cos[i] < 1.0) {
            return Err(Error::InfeasibleSpread {
                axis: i + 1,
                sigma,
                cos_theta: cos[i],
            });
        }
    }
    let w = cos.map(|c| 1.0 / (1.0 - c));
    // s(κ) = κ·dir
    let dir = Vector3::from_fn(|i, _| 0.5 * (w[(i + 1) % 3] + w[(i + 2) % 3] - w[i]));
    // dir_j + dir_k = w_i > 0, so at most one entry is negative. That happens
    // when a perturbed mean sits just past det F = 0; the result is still a
    // valid matrix Fisher law, with the third singular value negative.

    let kappa = solve_scale(&dir, sigma)?;
    MatrixFisher::from_parts(svd.u, dir * kappa, svd.v)
}

/// Positive root of `φ(κ) = κ − (1−σ)(s_T − log c(κ·dir))`.
fn solve_scale(dir: &Vector3<f64>, sigma: f64) -> Result<f64> {
    let gap = 1.0 - sigma;
    let phi = |k: f64| -> (f64, f64) {
        let s = dir * k;
        let (log_c, grad) = log_c_and_grad_signed(&s);
        let deficit = s.sum() - log_c;
        let slope = 1.0 - gap * dir.iter().zip(grad.iter()).map(|(a, g)| a * (1.0 - g)).sum::<f64>();
        (k - gap * deficit, slope)
    };

    // φ(0) = 0 and φ'(0) = 1 − (1−σ)·Σ dir; a positive root needs φ'(0) < 0.
    let slope0 = 1.0 - gap * dir.sum();
    if slope0 >= 0.0 {
        return Err(Error::DegenerateDistribution(
            "sigma-point mean is consistent only with the uniform distribution".into(),
        ));
    }

    // Bracket: φ < 0 just right of zero, φ grows like κ eventually.
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut iterations = 0;
    loop {
        let (v, _) = phi(hi);
        iterations += 1;
        if v > 0.0 {
            break;
        }
        lo = hi;
        hi *= 2.0;
        if iterations > 200 || !hi.is_finite() {
            return Err(Error::NoConvergence {
                solver: "sigma-point scale bracket",
                iterations,
                residual: v.abs(),
            });
        }
    }

    let mut k = hi;
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_NEWTON_ITER {
        let (v, dv) = phi(k);
        residual = v.abs();
        if residual <= RESIDUAL_TOL {
            return Ok(k);
        }
        if v > 0.0 {
            hi = k;
        } else {
            lo = k;
        }
        let newton = k - v / dv;
        k = if dv > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Err(Error::NoConvergence {
        solver: "sigma-point scale",
        iterations: MAX_NEWTON_ITER,
        residual,
    })
}

/// Residual of the angle equations for a candidate `S`, used by tests and
/// diagnostics.
pub fn angle_equation_residual(s: &Vector3<f64>, cos: &Vector3<f64>, sigma: f64) -> f64 {
    let log_c = log_c_signed(s);
    let total = s.sum();
    (0..3)
        .map(|i| {
            let t = s[(i + 1) % 3] + s[(i + 2) % 3];
            (t * cos[i] + s[i] - sigma * total - (1.0 - sigma) * log_c).abs()
        })
        .fold(0.0, f64::max)
}
