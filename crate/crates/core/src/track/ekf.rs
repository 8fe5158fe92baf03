use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix2x4, Matrix4, Vector2, Vector4};

use super::tracker::{Observation, TrackerConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrackState {
    pub x: Vector4<f64>,
    pub p: Matrix4<f64>,
}

impl TrackState {
    pub fn position(&self) -> [f64; 2] {
        [self.x[0], self.x[1]]
    }

    pub fn velocity(&self) -> [f64; 2] {
        [self.x[2], self.x[3]]
    }

    /// Range and azimuth in degrees of the position estimate.
    pub fn polar(&self) -> (f64, f64) {
        let z = measurement(&self.x);
        (z[0], z[1].to_degrees())
    }

    pub fn is_psd(&self) -> bool {
        self.p.cholesky().is_some()
    }
}

/// Cartesian position of a (range, degrees) pair.
pub fn cartesian(d: f64, theta_deg: f64) -> [f64; 2] {
    let (s, c) = theta_deg.to_radians().sin_cos();
    [d * c, d * s]
}

pub fn transition(dt: f64) -> Matrix4<f64> {
    let mut f = Matrix4::identity();
    f[(0, 2)] = dt;
    f[(1, 3)] = dt;
    f
}

fn process_noise(dt: f64, q: f64) -> Matrix4<f64> {
    let (a, b, c) = (dt.powi(3) / 3.0, dt.powi(2) / 2.0, dt);
    let mut m = Matrix4::zeros();
    for axis in 0..2 {
        m[(axis, axis)] = a * q;
        m[(axis, axis + 2)] = b * q;
        m[(axis + 2, axis)] = b * q;
        m[(axis + 2, axis + 2)] = c * q;
    }
    m
}

pub fn predict(state: &TrackState, dt: f64, cfg: &TrackerConfig) -> Result<TrackState> {
    if !(dt > 0.0) {
        return Err(Error::invalid(format!(
            "prediction step must be positive, got {dt}"
        )));
    }
    let f = transition(dt);
    let p = f * state.p * f.transpose() + process_noise(dt, cfg.q);
    Ok(TrackState {
        x: f * state.x,
        p: 0.5 * (p + p.transpose()),
    })
}

/// `[range, azimuth in radians]` of a state.
pub fn measurement(x: &Vector4<f64>) -> Vector2<f64> {
    Vector2::new(x[0].hypot(x[1]), x[1].atan2(x[0]))
}

pub fn measurement_jacobian(x: &Vector4<f64>) -> Result<Matrix2x4<f64>> {
    let r2 = x[0] * x[0] + x[1] * x[1];
    if !(r2 > 1e-18) {
        return Err(Error::Numerical(
            "measurement Jacobian is singular at the origin".into(),
        ));
    }
    let r = r2.sqrt();
    Ok(Matrix2x4::new(
        x[0] / r,
        x[1] / r,
        0.0,
        0.0,
        -x[1] / r2,
        x[0] / r2,
        0.0,
        0.0,
    ))
}

pub(crate) fn measurement_noise(cfg: &TrackerConfig) -> Matrix2<f64> {
    let rt = cfg.r_theta_deg.to_radians();
    Matrix2::new(cfg.r_d * cfg.r_d, 0.0, 0.0, rt * rt)
}

fn wrap(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

/// Innovation ν (angle wrapped to (−π, π]), its covariance S and H.
pub fn innovation(
    state: &TrackState,
    obs: &Observation,
    cfg: &TrackerConfig,
) -> Result<(Vector2<f64>, Matrix2<f64>, Matrix2x4<f64>)> {
    if !(obs.d > 0.0) {
        return Err(Error::invalid("observation range must be positive"));
    }
    let h = measurement_jacobian(&state.x)?;
    let z = Vector2::new(obs.d, obs.theta.to_radians());
    let zp = measurement(&state.x);
    let nu = Vector2::new(z[0] - zp[0], wrap(z[1] - zp[1]));
    let s = h * state.p * h.transpose() + measurement_noise(cfg);
    Ok((nu, 0.5 * (s + s.transpose()), h))
}

/// EKF update with Joseph-form covariance, symmetrized.
pub fn update(state: &TrackState, obs: &Observation, cfg: &TrackerConfig) -> Result<TrackState> {
    let (nu, s, h) = innovation(state, obs, cfg)?;
    let s_inv = s
        .try_inverse()
        .ok_or_else(|| Error::Numerical("innovation covariance is singular".into()))?;
    let k = state.p * h.transpose() * s_inv;
    let x = state.x + k * nu;
    let ikh = Matrix4::identity() - k * h;
    let p = ikh * state.p * ikh.transpose() + k * measurement_noise(cfg) * k.transpose();
    Ok(TrackState {
        x,
        p: 0.5 * (p + p.transpose()),
    })
}
