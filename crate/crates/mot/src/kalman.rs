//! Constant-velocity Kalman filter over `(cx, cy, s, r, vcx, vcy, vs)`, where
//! `s` is box area and `r` the aspect ratio (held constant).

use nalgebra::{SMatrix, SVector};

use crate::geometry::BoundingBox;
use crate::MotError;

pub type Vec7 = SVector<f64, 7>;
pub type Mat7 = SMatrix<f64, 7, 7>;
type Vec4 = SVector<f64, 4>;
type Mat4 = SMatrix<f64, 4, 4>;
type Mat47 = SMatrix<f64, 4, 7>;

/// Noise settings. Defaults are SORT's.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanConfig {
    pub process_noise: Mat7,
    pub measurement_noise: Mat4,
    pub initial_covariance: Mat7,
}

impl Default for KalmanConfig {
    fn default() -> Self {
        KalmanConfig {
            process_noise: Mat7::from_diagonal(&Vec7::from([1.0, 1.0, 1.0, 1.0, 0.01, 0.01, 1e-4])),
            measurement_noise: Mat4::from_diagonal(&Vec4::new(1.0, 1.0, 10.0, 10.0)),
            initial_covariance: Mat7::from_diagonal(&Vec7::from([
                10.0, 10.0, 10.0, 10.0, 1e4, 1e4, 1e4,
            ])),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    pub mean: Vec7,
    pub covariance: Mat7,
}

fn transition() -> Mat7 {
    let mut f = Mat7::identity();
    f[(0, 4)] = 1.0;
    f[(1, 5)] = 1.0;
    f[(2, 6)] = 1.0;
    f
}

fn observation() -> Mat47 {
    let mut h = Mat47::zeros();
    for i in 0..4 {
        h[(i, i)] = 1.0;
    }
    h
}

/// `(cx, cy, s, r)` of a box.
pub fn measurement(b: &BoundingBox) -> Vec4 {
    let (cx, cy) = b.center();
    Vec4::new(cx, cy, b.w * b.h, b.w / b.h)
}

impl KalmanState {
    /// Zero velocity, covariance from the config.
    pub fn from_box(b: &BoundingBox, cfg: &KalmanConfig) -> Self {
        let z = measurement(b);
        let mut mean = Vec7::zeros();
        mean.fixed_rows_mut::<4>(0).copy_from(&z);
        KalmanState {
            mean,
            covariance: cfg.initial_covariance,
        }
    }

    /// The box the mean describes, if it still has positive area.
    pub fn to_box(&self) -> Option<BoundingBox> {
        let (cx, cy, s, r) = (self.mean[0], self.mean[1], self.mean[2], self.mean[3]);
        if !(s > 0.0 && r > 0.0) {
            return None;
        }
        let w = (s * r).sqrt();
        let h = s / w;
        BoundingBox::new(cx - w / 2.0, cy - h / 2.0, w, h).ok()
    }
}

/// Applies the transition `dt` times, adding process noise each step. A
/// step that would make the area non-positive zeroes its velocity first.
///
/// # Panics
/// If `dt` is zero.
pub fn kf_predict(state: &KalmanState, dt: u64, cfg: &KalmanConfig) -> KalmanState {
    assert!(dt >= 1, "kf_predict needs dt >= 1");
    let f = transition();
    let mut x = state.mean;
    let mut p = state.covariance;
    for _ in 0..dt {
        if x[2] + x[6] <= 0.0 {
            x[6] = 0.0;
        }
        x = f * x;
        p = f * p * f.transpose() + cfg.process_noise;
    }
    KalmanState {
        mean: x,
        covariance: p,
    }
}

/// Standard measurement update, Joseph form for the covariance.
pub fn kf_update(state: &KalmanState, b: &BoundingBox, cfg: &KalmanConfig) -> Result<KalmanState, MotError> {
    let z = measurement(b);
    if !z.iter().all(|v| v.is_finite())
        || !state.mean.iter().all(|v| v.is_finite())
        || !state.covariance.iter().all(|v| v.is_finite())
    {
        return Err(MotError::NonFinite);
    }
    let h = observation();
    let r = cfg.measurement_noise;
    let p = state.covariance;
    let s = h * p * h.transpose() + r;
    let s_inv = s.try_inverse().ok_or(MotError::Singular)?;
    let k = p * h.transpose() * s_inv;
    let y = z - h * state.mean;
    let mean = state.mean + k * y;
    let ikh = Mat7::identity() - k * h;
    let cov = ikh * p * ikh.transpose() + k * r * k.transpose();
    let cov = (cov + cov.transpose()) * 0.5;
    Ok(KalmanState {
        mean,
        covariance: cov,
    })
}
