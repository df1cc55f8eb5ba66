//! Gaussian target beliefs maintained by a bank of extended Kalman filters.
//!
//! The state of a target is `[px, py, vx, vy]`. Prediction uses a discretised
//! constant-velocity (double integrator) model, and corrections use a
//! range-bearing measurement taken from a pursuer pose. Uncertainty is
//! summarised by `log det(cov)`, which is what the reward averages.

use nalgebra::{Matrix2, Matrix2x4, Matrix4, Matrix4x2, Vector2, Vector4};
use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::geometry::{wrap, Pose2, TargetPhase};
use crate::stream::SeededStream;
use crate::{Error, Result};

pub const SYMMETRY_TOL: f64 = 1e-9;

/// Filter constants for one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterParams {
    /// Process noise intensity, m^2/s^3.
    pub q: f64,
    pub sigma_range: f64,
    pub sigma_bearing: f64,
    /// Diagonal of the initial covariance.
    pub init_cov_diag: [f64; 4],
    /// Maximum distance between the true target and its initial belief mean.
    pub init_offset_max: f64,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self {
            q: 0.01,
            sigma_range: 0.2,
            sigma_bearing: 0.02,
            init_cov_diag: [2.0, 2.0, 1.0, 1.0],
            init_offset_max: 5.0,
        }
    }
}

impl FilterParams {
    pub fn measurement_noise(&self) -> Matrix2<f64> {
        Matrix2::new(self.sigma_range.powi(2), 0.0, 0.0, self.sigma_bearing.powi(2))
    }

    pub fn init_cov(&self) -> Matrix4<f64> {
        Matrix4::from_diagonal(&Vector4::from(self.init_cov_diag))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBelief {
    pub mean: Vector4<f64>,
    pub cov: Matrix4<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeBearingMeasurement {
    pub range: f64,
    pub bearing: f64,
    pub source_pose: Pose2,
}

/// Transition matrix and process noise of the double integrator.
pub fn make_double_integrator(dt: f64, q: f64) -> (Matrix4<f64>, Matrix4<f64>) {
    let mut a = Matrix4::identity();
    a[(0, 2)] = dt;
    a[(1, 3)] = dt;
    let (c3, c2, c1) = (dt.powi(3) / 3.0, dt.powi(2) / 2.0, dt);
    let mut w = Matrix4::zeros();
    for k in 0..2 {
        w[(k, k)] = c3;
        w[(k, k + 2)] = c2;
        w[(k + 2, k)] = c2;
        w[(k + 2, k + 2)] = c1;
    }
    (a, w * q)
}

fn symmetrize(m: Matrix4<f64>) -> Matrix4<f64> {
    (m + m.transpose()) * 0.5
}

impl GaussianBelief {
    pub fn new(mean: Vector4<f64>, cov: Matrix4<f64>) -> Self {
        Self { mean, cov }
    }

    pub fn position(&self) -> [f64; 2] {
        [self.mean[0], self.mean[1]]
    }

    pub fn velocity(&self) -> [f64; 2] {
        [self.mean[2], self.mean[3]]
    }

    pub fn predict(&self, a: &Matrix4<f64>, w: &Matrix4<f64>) -> GaussianBelief {
        GaussianBelief {
            mean: a * self.mean,
            cov: symmetrize(a * self.cov * a.transpose() + w),
        }
    }

    /// Linear correction with Joseph-form covariance update.
    /// `innovation` is `z - H mean` (already wrapped where angular).
    pub fn correct(
        &self,
        h: &Matrix2x4<f64>,
        r: &Matrix2<f64>,
        innovation: &Vector2<f64>,
    ) -> Result<GaussianBelief> {
        let pht: Matrix4x2<f64> = self.cov * h.transpose();
        let s = h * pht + r;
        let s_inv = s
            .try_inverse()
            .ok_or_else(|| Error::NumericDomain("singular innovation covariance".into()))?;
        let k = pht * s_inv;
        let ikh = Matrix4::identity() - k * h;
        let cov = ikh * self.cov * ikh.transpose() + k * r * k.transpose();
        Ok(GaussianBelief { mean: self.mean + k * innovation, cov: symmetrize(cov) })
    }

    /// Extended Kalman correction with a range-bearing measurement.
    pub fn ekf_update(
        &self,
        z: &RangeBearingMeasurement,
        r: &Matrix2<f64>,
    ) -> Result<GaussianBelief> {
        let p = &z.source_pose;
        let dx = self.mean[0] - p.x;
        let dy = self.mean[1] - p.y;
        let q = dx * dx + dy * dy;
        let range = q.sqrt();
        if range <= 1e-6 {
            return Err(Error::DegenerateGeometry(format!(
                "predicted target mean within {range:.2e} m of the sensor"
            )));
        }
        let bearing = wrap(dy.atan2(dx) - p.heading);
        #[rustfmt::skip]
        let h = Matrix2x4::new(
            dx / range, dy / range, 0.0, 0.0,
            -dy / q,    dx / q,     0.0, 0.0,
        );
        let innovation = Vector2::new(z.range - range, wrap(z.bearing - bearing));
        self.correct(&h, r, &innovation)
    }

    /// `log det(cov)` from a Cholesky factor.
    pub fn logdet(&self) -> Result<f64> {
        logdet_pd(&self.cov)
    }

    /// Symmetric within [`SYMMETRY_TOL`] and strictly positive definite.
    pub fn is_valid(&self) -> bool {
        let asym = (self.cov - self.cov.transpose()).abs().max();
        asym <= SYMMETRY_TOL
            && self.mean.iter().all(|v| v.is_finite())
            && self.cov.symmetric_eigenvalues().iter().all(|&e| e > 0.0)
    }
}

pub fn logdet_pd(m: &Matrix4<f64>) -> Result<f64> {
    let chol = m
        .cholesky()
        .ok_or_else(|| Error::NumericDomain("covariance is not positive definite".into()))?;
    Ok(chol.l_dirty().diagonal().iter().map(|d| 2.0 * d.ln()).sum())
}

/// Belief for a freshly spawned target: mean offset from the truth by a uniform
/// length in `[0, init_offset_max]` along a uniform direction, zero velocity.
pub fn init_belief(
    target: &TargetPhase,
    params: &FilterParams,
    stream: &mut SeededStream,
) -> GaussianBelief {
    let len = Uniform::new_inclusive(0.0, params.init_offset_max).sample(stream);
    let dir = stream.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
    GaussianBelief {
        mean: Vector4::new(target.px + len * dir.cos(), target.py + len * dir.sin(), 0.0, 0.0),
        cov: params.init_cov(),
    }
}

/// Centrally stored beliefs, one per target.
#[derive(Debug, Clone)]
pub struct FilterBank {
    pub beliefs: Vec<GaussianBelief>,
    pub transition: Matrix4<f64>,
    pub process_noise: Matrix4<f64>,
    pub measurement_noise: Matrix2<f64>,
}

impl FilterBank {
    pub fn new(beliefs: Vec<GaussianBelief>, dt: f64, params: &FilterParams) -> Self {
        let (transition, process_noise) = make_double_integrator(dt, params.q);
        Self { beliefs, transition, process_noise, measurement_noise: params.measurement_noise() }
    }

    pub fn len(&self) -> usize {
        self.beliefs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beliefs.is_empty()
    }

    pub fn predict_all(&mut self) {
        for b in &mut self.beliefs {
            *b = b.predict(&self.transition, &self.process_noise);
        }
    }

    /// One-step-ahead copies; the bank itself is untouched.
    pub fn predicted(&self) -> Vec<GaussianBelief> {
        self.beliefs.iter().map(|b| b.predict(&self.transition, &self.process_noise)).collect()
    }

    pub fn update(&mut self, target: usize, z: &RangeBearingMeasurement) -> Result<()> {
        let b = self.beliefs[target].ekf_update(z, &self.measurement_noise)?;
        self.beliefs[target] = b;
        Ok(())
    }

    pub fn logdets(&self) -> Result<Vec<f64>> {
        self.beliefs.iter().map(GaussianBelief::logdet).collect()
    }
}
