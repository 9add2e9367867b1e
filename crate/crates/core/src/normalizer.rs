//! Normalizing constant `c(S)` of the matrix Fisher distribution and its
//! derivatives with respect to the singular values.
//!
//! `c(S) = ∫_{-1}^{1} ½ I_0(a(1−u)) I_0(b(1+u)) e^{s3·u} du` with
//! `a = (s1 − s2)/2` and `b = (s1 + s2)/2`. Every Bessel factor is replaced by
//! its scaled version and the exponent `|a|(1−u) + |b|(1+u) + s3·u`, which is
//! linear in `u`, is shifted by its maximum over `[-1, 1]` before integrating.
//! The shift is added back after taking the logarithm, so nothing overflows
//! even for singular values in the thousands.
//!
//! The integrand is evaluated with the singular values in the order given:
//! no reordering happens here, so the circular-shift symmetry of `c` is a
//! genuine property of the quadrature and not of the bookkeeping.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::quadrature::integrate_adaptive;
use crate::special::scaled_i012;

/// Relative tolerance of the adaptive quadrature.
pub const QUADRATURE_TOLERANCE: f64 = 1e-13;

/// `log c(S)` together with its gradient and Hessian.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogNormalizer {
    pub log_c: f64,
    pub grad: Vector3<f64>,
    pub hessian: Matrix3<f64>,
}

fn validate(s: &Vector3<f64>) -> Result<()> {
    if s.iter().all(|v| v.is_finite() && *v >= 0.0) {
        Ok(())
    } else {
        Err(Error::InvalidSingularValues([s[0], s[1], s[2]]))
    }
}

/// `log c(S)` for non-negative singular values.
pub fn log_c(s: &Vector3<f64>) -> Result<f64> {
    validate(s)?;
    Ok(log_c_signed(s))
}

/// `∂ log c / ∂ s_i`; each component is `E[Q_ii]` under `M(diag S)`.
pub fn grad_log_c(s: &Vector3<f64>) -> Result<Vector3<f64>> {
    validate(s)?;
    Ok(log_c_and_grad_signed(s).1)
}

/// Log normalizer, gradient and Hessian in one quadrature pass.
pub fn log_c_derivatives(s: &Vector3<f64>) -> Result<LogNormalizer> {
    validate(s)?;
    Ok(derivatives_signed(s))
}

/// Parameters shared by every integrand variant.
struct Setup {
    a: f64,
    b: f64,
    s3: f64,
    shift: f64,
}

impl Setup {
    fn new(s: &Vector3<f64>) -> Self {
        let a = 0.5 * (s[0] - s[1]);
        let b = 0.5 * (s[0] + s[1]);
        let s3 = s[2];
        let shift = (2.0 * b.abs() + s3).max(2.0 * a.abs() - s3);
        Setup { a, b, s3, shift }
    }

    /// Returns `(x, y, weight)` with the shifted exponential already folded
    /// into `weight`.
    #[inline]
    fn base(&self, u: f64) -> (f64, f64, f64) {
        let x = self.a * (1.0 - u);
        let y = self.b * (1.0 + u);
        let w = (x.abs() + y.abs() + self.s3 * u - self.shift).exp();
        (x, y, w)
    }
}

/// Scaled `[I_0, I_1, I_0'']` at a signed argument.
#[inline]
fn bessel_triplet(x: f64) -> [f64; 3] {
    let [i0, i1, i2] = scaled_i012(x.abs());
    [i0, i1.copysign(x), 0.5 * (i0 + i2)]
}

pub(crate) fn log_c_signed(s: &Vector3<f64>) -> f64 {
    let st = Setup::new(s);
    let [c] = integrate_adaptive(
        |u| {
            let (x, y, w) = st.base(u);
            let [ix, ..] = scaled_i012(x.abs());
            let [iy, ..] = scaled_i012(y.abs());
            [0.5 * ix * iy * w]
        },
        -1.0,
        1.0,
        QUADRATURE_TOLERANCE,
    );
    st.shift + c.ln()
}

pub(crate) fn log_c_and_grad_signed(s: &Vector3<f64>) -> (f64, Vector3<f64>) {
    let st = Setup::new(s);
    let v = integrate_adaptive(
        |u| {
            let (x, y, w) = st.base(u);
            let [i0x, i1x, _] = bessel_triplet(x);
            let [i0y, i1y, _] = bessel_triplet(y);
            let p = 0.5 * (1.0 - u);
            let m = 0.5 * (1.0 + u);
            let g = 0.5 * i0x * i0y * w;
            let px = 0.5 * p * i1x * i0y * w;
            let my = 0.5 * m * i0x * i1y * w;
            [g, px + my, my - px, u * g]
        },
        -1.0,
        1.0,
        QUADRATURE_TOLERANCE,
    );
    let c = v[0];
    (
        st.shift + c.ln(),
        Vector3::new(v[1] / c, v[2] / c, v[3] / c),
    )
}

pub(crate) fn derivatives_signed(s: &Vector3<f64>) -> LogNormalizer {
    let st = Setup::new(s);
    let v = integrate_adaptive(
        |u| {
            let (x, y, w) = st.base(u);
            let [i0x, i1x, jx] = bessel_triplet(x);
            let [i0y, i1y, jy] = bessel_triplet(y);
            let p = 0.5 * (1.0 - u);
            let m = 0.5 * (1.0 + u);
            let h = 0.5 * w;
            let g = h * i0x * i0y;
            let px = h * p * i1x * i0y;
            let my = h * m * i0x * i1y;
            let d1 = px + my;
            let d2 = my - px;
            let xx = h * p * p * jx * i0y;
            let yy = h * m * m * i0x * jy;
            let xy = h * 2.0 * p * m * i1x * i1y;
            [
                g,
                d1,
                d2,
                u * g,
                xx + xy + yy,
                xx - xy + yy,
                u * u * g,
                yy - xx,
                u * d1,
                u * d2,
            ]
        },
        -1.0,
        1.0,
        QUADRATURE_TOLERANCE,
    );
    let c = v[0];
    let grad = Vector3::new(v[1] / c, v[2] / c, v[3] / c);
    let second = Matrix3::new(
        v[4], v[7], v[8], //
        v[7], v[5], v[9], //
        v[8], v[9], v[6],
    ) / c;
    LogNormalizer {
        log_c: st.shift + c.ln(),
        grad,
        hessian: second - grad * grad.transpose(),
    }
}
