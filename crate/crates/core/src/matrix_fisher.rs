//! The matrix Fisher distribution `M(F)` on SO(3), with density
//! `exp(tr(Fᵀ R)) / c(F)` relative to the normalized Haar measure.

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};
use rand::Rng;
use rand_distr::{StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normalizer::{self, derivatives_signed, log_c_and_grad_signed};
use crate::so3::{proper_svd, signed_svd, ProperSvd, Rotation, UnitQuaternion};
use crate::special;

/// Default latitude × longitude resolution of exported density grids.
pub const DEFAULT_GRID_RESOLUTION: (usize, usize) = (100, 200);

/// Matrix Fisher distribution with cached proper SVD and log normalizer.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixFisher {
    f: Matrix3<f64>,
    svd: ProperSvd,
    log_c: f64,
    grad_log_c: Vector3<f64>,
}

impl MatrixFisher {
    /// Builds `M(F)`; `det F` must be positive.
    pub fn new(f: Matrix3<f64>) -> Result<Self> {
        let svd = proper_svd(&f)?;
        Self::from_parts(svd.u, svd.s, svd.v)
    }

    /// Builds `M(F)` for any finite `F`, including `det F ≤ 0`, through the
    /// signed decomposition.
    pub fn new_signed(f: Matrix3<f64>) -> Result<Self> {
        let svd = signed_svd(&f)?;
        Self::from_parts(svd.u, svd.s, svd.v)
    }

    /// Builds `M(U·diag(S)·Vᵀ)` from its factors. `S = 0` gives the uniform
    /// distribution. One entry of `S` may be negative (then `det F < 0`) as
    /// long as every pairwise sum `s_j + s_k` stays non-negative; the inverse
    /// unscented transform can land there. The stored decomposition is
    /// reordered to descending singular values.
    pub fn from_parts(u: Rotation, s: Vector3<f64>, v: Rotation) -> Result<Self> {
        let pairs_ok = (0..3).all(|i| s[(i + 1) % 3] + s[(i + 2) % 3] >= 0.0);
        if !s.iter().all(|x| x.is_finite()) || !pairs_ok {
            return Err(Error::InvalidSingularValues([s[0], s[1], s[2]]));
        }
        let svd = canonical_order(u, s, v);
        let (log_c, grad_log_c) = log_c_and_grad_signed(&svd.s);
        Ok(MatrixFisher {
            f: svd.reconstruct(),
            svd,
            log_c,
            grad_log_c,
        })
    }

    /// The uniform distribution (`F = 0`).
    pub fn uniform() -> Self {
        MatrixFisher {
            f: Matrix3::zeros(),
            svd: ProperSvd {
                u: Rotation::identity(),
                s: Vector3::zeros(),
                v: Rotation::identity(),
            },
            log_c: 0.0,
            grad_log_c: Vector3::zeros(),
        }
    }

    pub fn f(&self) -> &Matrix3<f64> {
        &self.f
    }

    pub fn svd(&self) -> &ProperSvd {
        &self.svd
    }

    pub fn singular_values(&self) -> Vector3<f64> {
        self.svd.s
    }

    pub fn log_c(&self) -> f64 {
        self.log_c
    }

    /// `E[Uᵀ R V]` has this diagonal.
    pub fn grad_log_c(&self) -> Vector3<f64> {
        self.grad_log_c
    }

    /// The mean attitude `M = U·Vᵀ`, where the density peaks.
    pub fn mode(&self) -> Rotation {
        self.svd.polar()
    }

    pub fn log_density(&self, r: &Rotation) -> f64 {
        (self.f.transpose() * r.matrix()).trace() - self.log_c
    }

    pub fn density(&self, r: &Rotation) -> f64 {
        self.log_density(r).exp()
    }

    /// Log of the marginal density of the body axis `R e_axis` at the unit
    /// vector `r`, relative to the uniform distribution on the sphere.
    ///
    /// Integrating out the rotation about `r` leaves an SO(2) normalizer
    /// `I_0(ρ)` where `ρ` is the sum of the *signed* singular values of the
    /// 2×2 block `f_jkᵀ r_c`; its determinant equals `(f_j × f_k)·r`, so
    /// `ρ² = tr(f_jkᵀ (I − r rᵀ) f_jk) + 2 (f_j × f_k)·r`.
    pub fn log_marginal_axis_density(&self, axis: usize, r: &Vector3<f64>) -> Result<f64> {
        if axis > 2 {
            return Err(Error::InvalidAxis(axis));
        }
        let norm = r.norm();
        if !((norm - 1.0).abs() <= 1e-9) {
            return Err(Error::NonUnitVector { norm });
        }
        let fi = self.f.column(axis);
        let fj = self.f.column((axis + 1) % 3);
        let fk = self.f.column((axis + 2) % 3);
        let pj = fj.dot(r);
        let pk = fk.dot(r);
        let frob = fj.norm_squared() + fk.norm_squared() - pj * pj - pk * pk;
        let det = fj.cross(&fk).dot(r);
        let rho = (frob + 2.0 * det).max(0.0).sqrt();
        Ok(special::log_i0(rho) - self.log_c + fi.dot(r))
    }

    pub fn marginal_axis_density(&self, axis: usize, r: &Vector3<f64>) -> Result<f64> {
        self.log_marginal_axis_density(axis, r).map(f64::exp)
    }

    /// Tabulates the marginal density of one body axis on a cell-centred
    /// latitude–longitude grid.
    pub fn density_grid(&self, axis: usize, n_lat: usize, n_lon: usize) -> Result<DensityGrid> {
        if n_lat == 0 || n_lon == 0 {
            return Err(Error::Config(format!("grid resolution {n_lat}x{n_lon} is empty")));
        }
        let mut grid = DensityGrid {
            axis,
            n_lat,
            n_lon,
            values: Vec::with_capacity(n_lat * n_lon),
        };
        for i in 0..n_lat {
            for j in 0..n_lon {
                let r = grid.direction(i, j);
                grid.values.push(self.marginal_axis_density(axis, &r)?);
            }
        }
        Ok(grid)
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Rotation> {
        self.sample_with_stats(n, rng).0
    }

    /// Draws `n` i.i.d. samples, reporting the rejection sampler's acceptance.
    ///
    /// With `Q = Uᵀ R V`, the density of `Q` is proportional to `exp(tr(S Q))`,
    /// which is the Bingham density `exp(xᵀ B x)` on unit quaternions. Those
    /// are drawn by rejection from an angular central Gaussian envelope.
    pub fn sample_with_stats<R: Rng + ?Sized>(
        &self,
        n: usize,
        rng: &mut R,
    ) -> (Vec<Rotation>, SamplerStats) {
        let sampler = BinghamSampler::new(&self.svd.s);
        let mut stats = SamplerStats::default();
        let u = self.svd.u;
        let vt = self.svd.v.transpose();
        let out = (0..n)
            .map(|_| {
                let q = sampler.draw(rng, &mut stats).to_rotation();
                (u * q) * vt
            })
            .collect();
        (out, stats)
    }

    /// Moment-matching (maximum likelihood) fit from the mean `R̄` of
    /// attitude samples: keeps the SVD factors of `R̄` and solves
    /// `∇ log c(S) = D` for the singular values by damped Newton on the
    /// convex objective `log c(S) − D·S`.
    pub fn fit_from_mean(rbar: &Matrix3<f64>) -> Result<Self> {
        if rbar.amax() < 1e-14 {
            return Ok(Self::uniform());
        }
        let svd = proper_svd(rbar).map_err(|_| {
            let (_, d, _) = crate::so3::raw_svd(rbar);
            Error::InfeasibleMoment([d[0], d[1], -d[2]])
        })?;
        let d = svd.s;
        let feasible = d.iter().all(|x| *x > 0.0 && *x < 1.0) && d[0] + d[1] - d[2] < 1.0;
        if !feasible {
            return Err(Error::InfeasibleMoment([d[0], d[1], d[2]]));
        }
        let s = solve_moment_equation(&d)?;
        Self::from_parts(svd.u, s, svd.v)
    }
}

/// Sorts singular values descending, permuting the factor columns with them
/// and keeping both factors proper.
fn canonical_order(u: Rotation, s: Vector3<f64>, v: Rotation) -> ProperSvd {
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| s[b].partial_cmp(&s[a]).unwrap_or(std::cmp::Ordering::Equal));
    if order == [0, 1, 2] {
        return ProperSvd { u, s, v };
    }
    let mut um = Matrix3::zeros();
    let mut vm = Matrix3::zeros();
    let mut ss = Vector3::zeros();
    for (dst, &src) in order.iter().enumerate() {
        um.set_column(dst, &u.matrix().column(src));
        vm.set_column(dst, &vm_col(&v, src));
        ss[dst] = s[src];
    }
    if um.determinant() < 0.0 {
        // Odd permutation: flip one column pair, leaving U S Vᵀ unchanged.
        um.set_column(2, &(-um.column(2)));
        vm.set_column(2, &(-vm.column(2)));
    }
    ProperSvd {
        u: Rotation::from_matrix_unchecked(um),
        s: ss,
        v: Rotation::from_matrix_unchecked(vm),
    }
}

fn vm_col(v: &Rotation, i: usize) -> Vector3<f64> {
    v.matrix().column(i).into_owned()
}

fn solve_moment_equation(d: &Vector3<f64>) -> Result<Vector3<f64>> {
    const MAX_ITER: usize = 100;
    const TOL: f64 = 1e-9;

    let objective = |s: &Vector3<f64>| crate::normalizer::log_c_signed(s) - d.dot(s);

    // Near-identity approximation 1 − d_i ≈ ½(1/t_j + 1/t_k), t_i = s_j + s_k.
    let e = d.map(|x| 1.0 - x);
    let z = Vector3::new(e[1] + e[2] - e[0], e[2] + e[0] - e[1], e[0] + e[1] - e[2]);
    let mut s = if z.iter().all(|x| *x > 0.0) {
        let t = z.map(|x| 1.0 / x);
        let s = Vector3::new(t[1] + t[2] - t[0], t[2] + t[0] - t[1], t[0] + t[1] - t[2]) * 0.5;
        if s.iter().all(|x| *x > 0.0) {
            s
        } else {
            d * 3.0
        }
    } else {
        d * 3.0
    };

    let mut residual = f64::INFINITY;
    for _ in 0..MAX_ITER {
        let n = derivatives_signed(&s);
        let g = n.grad - d;
        residual = g.amax();
        if residual <= TOL {
            return if s.iter().all(|x| *x >= 0.0) {
                Ok(s)
            } else {
                Err(Error::InfeasibleMoment([d[0], d[1], d[2]]))
            };
        }
        let step = n
            .hessian
            .cholesky()
            .map(|c| c.solve(&(-g)))
            .unwrap_or(-g);
        let f0 = n.log_c - d.dot(&s);
        let slope = g.dot(&step);
        let mut alpha = 1.0;
        loop {
            let trial = s + step * alpha;
            if objective(&trial) <= f0 + 1e-4 * alpha * slope || alpha < 1e-10 {
                s = trial;
                break;
            }
            alpha *= 0.5;
        }
    }
    Err(Error::NoConvergence {
        solver: "moment fit",
        iterations: MAX_ITER,
        residual,
    })
}

/// The 4×4 Bingham parameter `blockdiag(2S − tr(S) I, tr(S))` sharing its
/// normalizing constant with `M(diag S)`.
pub fn bingham_b(s: &Vector3<f64>) -> Matrix4<f64> {
    let t = s.sum();
    Matrix4::from_diagonal(&Vector4::new(
        2.0 * s[0] - t,
        2.0 * s[1] - t,
        2.0 * s[2] - t,
        t,
    ))
}

/// Normalizing constant of the matrix Fisher distribution on SO(2) whose
/// parameter has trace `t`: `I_0(t)`.
pub fn c2_so2(t: f64) -> f64 {
    special::i0(t)
}

/// `log c(S)`, re-exported for convenience.
pub fn log_c(s: &Vector3<f64>) -> Result<f64> {
    normalizer::log_c(s)
}

/// `∇ log c(S)`, re-exported for convenience.
pub fn grad_log_c(s: &Vector3<f64>) -> Result<Vector3<f64>> {
    normalizer::grad_log_c(s)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerStats {
    pub proposed: u64,
    pub accepted: u64,
}

impl SamplerStats {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            1.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// Rejection sampler for `exp(−xᵀ A x)` on S³ with `A = tr(S) I − B ⪰ 0`
/// diagonal, using the angular central Gaussian envelope with
/// `Ω = I + 2A/b` and `b` chosen to minimize the rejection bound.
#[derive(Clone, Debug)]
struct BinghamSampler {
    lambda: [f64; 4],
    scale: [f64; 4],
    log_bound: f64,
    omega: [f64; 4],
}

impl BinghamSampler {
    fn new(s: &Vector3<f64>) -> Self {
        let t = s.sum();
        let lambda = [2.0 * (t - s[0]), 2.0 * (t - s[1]), 2.0 * (t - s[2]), 0.0];
        let b = Self::solve_b(&lambda);
        let omega = lambda.map(|l| 1.0 + 2.0 * l / b);
        let q = 4.0;
        BinghamSampler {
            lambda,
            scale: omega.map(|o| 1.0 / o.sqrt()),
            log_bound: -(q - b) / 2.0 - (q / 2.0) * (b / q).ln(),
            omega,
        }
    }

    /// Root of `Σ 1/(b + 2λ_i) = 1` on `(0, 4]`.
    fn solve_b(lambda: &[f64; 4]) -> f64 {
        let h = |b: f64| lambda.iter().map(|l| 1.0 / (b + 2.0 * l)).sum::<f64>() - 1.0;
        if h(4.0) >= 0.0 {
            return 4.0;
        }
        let (mut lo, mut hi) = (0.0_f64, 4.0_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if h(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 * hi {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R, stats: &mut SamplerStats) -> UnitQuaternion {
        let unit = Uniform::new(0.0f64, 1.0);
        loop {
            stats.proposed += 1;
            let y: [f64; 4] = std::array::from_fn(|i| {
                let z: f64 = rng.sample(StandardNormal);
                z * self.scale[i]
            });
            let n2: f64 = y.iter().map(|v| v * v).sum();
            if n2 == 0.0 {
                continue;
            }
            let x = y.map(|v| v / n2.sqrt());
            let quad_a: f64 = (0..4).map(|i| self.lambda[i] * x[i] * x[i]).sum();
            let quad_omega: f64 = (0..4).map(|i| self.omega[i] * x[i] * x[i]).sum();
            let log_ratio = -quad_a + 2.0 * quad_omega.ln() - self.log_bound;
            debug_assert!(log_ratio <= 1e-9, "envelope violated: {log_ratio}");
            let log_u = rng.sample(unit).ln();
            if log_u < log_ratio {
                stats.accepted += 1;
                let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                return UnitQuaternion::new(
                    Vector3::new(x[0] / norm, x[1] / norm, x[2] / norm),
                    x[3] / norm,
                )
                .expect("normalized");
            }
        }
    }
}

/// Marginal density of one body axis tabulated on a cell-centred
/// latitude–longitude grid (row-major, latitude outer).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    /// Body axis, 0-based.
    pub axis: usize,
    pub n_lat: usize,
    pub n_lon: usize,
    pub values: Vec<f64>,
}

impl DensityGrid {
    /// Latitude of row `i` in radians.
    pub fn latitude(&self, i: usize) -> f64 {
        -std::f64::consts::FRAC_PI_2 + (i as f64 + 0.5) * std::f64::consts::PI / self.n_lat as f64
    }

    /// Longitude of column `j` in radians, in `(-π, π)`.
    pub fn longitude(&self, j: usize) -> f64 {
        -std::f64::consts::PI + (j as f64 + 0.5) * 2.0 * std::f64::consts::PI / self.n_lon as f64
    }

    pub fn direction(&self, i: usize, j: usize) -> Vector3<f64> {
        let (lat, lon) = (self.latitude(i), self.longitude(j));
        Vector3::new(lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin())
    }

    /// Fraction of the sphere's area covered by a cell in row `i`.
    pub fn cell_weight(&self, i: usize) -> f64 {
        let dlat = std::f64::consts::PI / self.n_lat as f64;
        let lo = -std::f64::consts::FRAC_PI_2 + i as f64 * dlat;
        ((lo + dlat).sin() - lo.sin()) / (2.0 * self.n_lon as f64)
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_lon + j]
    }

    /// Area-weighted sum; approximates the total probability.
    pub fn weighted_sum(&self) -> f64 {
        (0..self.n_lat)
            .map(|i| {
                let w = self.cell_weight(i);
                (0..self.n_lon).map(|j| self.value(i, j)).sum::<f64>() * w
            })
            .sum()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}
