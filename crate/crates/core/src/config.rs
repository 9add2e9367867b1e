//! Run configuration: scenario parameters, sensor models, pendulum truth
//! model and output settings. Matrices are stored row-major as 9 numbers.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::bayes_filter::{AttitudeModel, FilterConfig, GyroModel, ProcessNoise};
use crate::error::{Error, Result};
use crate::pendulum::{RigidBodyParams, TrueState, DEFAULT_STEP, MAX_STEP};
use crate::so3::{exp_so3, from_row_major, row_major, Rotation};
use crate::unscented::DEFAULT_SIGMA;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GyroConfig {
    pub covariance: [f64; 9],
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttitudeConfig {
    pub fz: [f64; 9],
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PendulumConfig {
    pub inertia: [f64; 9],
    pub mass: f64,
    pub gravity: f64,
    pub rho: [f64; 3],
    pub omega0: [f64; 3],
    /// Initial attitude, row-major.
    pub r0: [f64; 9],
    /// Inner integration step (s).
    pub step: f64,
}

impl Default for PendulumConfig {
    fn default() -> Self {
        let p = RigidBodyParams::default();
        PendulumConfig {
            inertia: row_major(&p.j),
            mass: p.m,
            gravity: p.g,
            rho: [p.rho[0], p.rho[1], p.rho[2]],
            omega0: [4.14; 3],
            r0: row_major(&Matrix3::identity()),
            step: DEFAULT_STEP,
        }
    }
}

impl PendulumConfig {
    pub fn params(&self) -> RigidBodyParams {
        RigidBodyParams {
            j: from_row_major(&self.inertia),
            m: self.mass,
            g: self.gravity,
            rho: Vector3::from(self.rho),
        }
    }

    pub fn initial_state(&self) -> Result<TrueState> {
        Ok(TrueState {
            r: Rotation::from_matrix(from_row_major(&self.r0))?,
            omega: Vector3::from(self.omega0),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "case")]
    pub case_name: String,
    pub initial_f: [f64; 9],
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    pub gyro: GyroConfig,
    pub attitude: AttitudeConfig,
    pub duration: f64,
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(default = "default_resolution")]
    pub grid_resolution: [usize; 2],
    #[serde(default)]
    pub grid_times: Vec<f64>,
    #[serde(default)]
    pub process_noise: ProcessNoise,
    #[serde(default)]
    pub pendulum: PendulumConfig,
}

fn default_sigma() -> f64 {
    DEFAULT_SIGMA
}

fn default_resolution() -> [usize; 2] {
    let (a, b) = crate::matrix_fisher::DEFAULT_GRID_RESOLUTION;
    [a, b]
}

fn diag9(a: f64, b: f64, c: f64) -> [f64; 9] {
    [a, 0.0, 0.0, 0.0, b, 0.0, 0.0, 0.0, c]
}

impl RunConfig {
    fn base(name: &str, initial_f: Matrix3<f64>) -> Self {
        RunConfig {
            case_name: name.into(),
            initial_f: row_major(&initial_f),
            sigma: DEFAULT_SIGMA,
            gyro: GyroConfig {
                covariance: diag9(0.5 * 0.5, 0.8 * 0.8, 1.0),
                rate: 50.0,
            },
            attitude: AttitudeConfig {
                fz: diag9(40.0, 50.0, 35.0),
                rate: 10.0,
            },
            duration: 10.0,
            seed: 1,
            output_dir: PathBuf::from("out").join(name),
            grid_resolution: default_resolution(),
            grid_times: vec![0.0, 0.08, 0.1, 0.3, 1.0, 10.0],
            process_noise: ProcessNoise::default(),
            pendulum: PendulumConfig::default(),
        }
    }

    /// Confident and wrong: `F(0) = 100 exp(π ê1)`.
    pub fn case1() -> Self {
        let m = exp_so3(&Vector3::new(PI, 0.0, 0.0));
        Self::base("case1", m.matrix() * 100.0)
    }

    /// Diffuse prior: `F(0) = diag(2, 1, 0.5) exp(0.5π ê1)`.
    pub fn case2() -> Self {
        let m = exp_so3(&Vector3::new(0.5 * PI, 0.0, 0.0));
        Self::base(
            "case2",
            Matrix3::from_diagonal(&Vector3::new(2.0, 1.0, 0.5)) * m.matrix(),
        )
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "case1" => Ok(Self::case1()),
            "case2" => Ok(Self::case2()),
            other => Err(Error::Config(format!("unknown preset '{other}' (expected case1 or case2)"))),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn initial_f(&self) -> Matrix3<f64> {
        from_row_major(&self.initial_f)
    }

    pub fn gyro_model(&self) -> Result<GyroModel> {
        GyroModel::new(from_row_major(&self.gyro.covariance), self.gyro.rate)
    }

    pub fn attitude_model(&self) -> Result<AttitudeModel> {
        AttitudeModel::new(from_row_major(&self.attitude.fz), self.attitude.rate)
    }

    pub fn filter_config(&self) -> Result<FilterConfig> {
        Ok(FilterConfig {
            sigma: self.sigma,
            gyro: self.gyro_model()?,
            attitude: self.attitude_model()?,
            process_noise: self.process_noise,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.sigma.is_finite() && self.sigma < 1.0) {
            return bad(format!("sigma must be below 1, got {}", self.sigma));
        }
        let det = self.initial_f().determinant();
        if !(det > 0.0) {
            return bad(format!("initial F must have positive determinant, got {det:e}"));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad(format!("duration must be positive, got {}", self.duration));
        }
        self.gyro_model().map_err(|e| Error::Config(e.to_string()))?;
        self.attitude_model().map_err(|e| Error::Config(e.to_string()))?;
        if self.gyro.rate < self.attitude.rate {
            return bad("gyro rate must not be below the attitude rate".into());
        }
        let p = &self.pendulum;
        if !(p.step > 0.0 && p.step <= MAX_STEP) {
            return bad(format!("pendulum step must lie in (0, {MAX_STEP}], got {}", p.step));
        }
        for (name, rate) in [("gyro", self.gyro.rate), ("attitude", self.attitude.rate)] {
            let n = 1.0 / (rate * p.step);
            if (n - n.round()).abs() > 1e-6 {
                return bad(format!("{name} rate {rate} Hz is not a divisor of the pendulum step rate"));
            }
        }
        p.params().validate().map_err(|e| Error::Config(e.to_string()))?;
        p.initial_state().map_err(|e| Error::Config(e.to_string()))?;
        let [a, b] = self.grid_resolution;
        if a == 0 || b == 0 {
            return bad("grid resolution must be positive".into());
        }
        if self.grid_times.iter().any(|t| !(*t >= 0.0 && *t <= self.duration)) {
            return bad("grid times must lie within the run".into());
        }
        Ok(())
    }
}

/// Parses `LATxLON`, e.g. `100x200`.
pub fn parse_resolution(s: &str) -> Result<[usize; 2]> {
    let err = || Error::Config(format!("resolution must look like 100x200, got '{s}'"));
    let (a, b) = s.split_once(['x', 'X']).ok_or_else(err)?;
    let a: usize = a.trim().parse().map_err(|_| err())?;
    let b: usize = b.trim().parse().map_err(|_| err())?;
    if a == 0 || b == 0 {
        return Err(err());
    }
    Ok([a, b])
}

/// Parses 9 comma-separated numbers as a row-major 3×3 matrix.
pub fn parse_matrix(s: &str) -> Result<Matrix3<f64>> {
    let vals: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Config(format!("matrix '{s}': {e}")))?;
    let arr: [f64; 9] = vals
        .try_into()
        .map_err(|_| Error::Config(format!("matrix '{s}' needs 9 entries")))?;
    Ok(from_row_major(&arr))
}
