//! Constant-velocity Kalman tracking of individual pedestrians.
//!
//! The state is `[x, y, vx, vy]` in feet and feet/second. Only the bounding-box
//! center of an [`Observation`] drives the correction step; the box size is
//! carried along untouched.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Point2, Rect};
use crate::scalar::Scalar;

pub type Mat4<S> = [[S; 4]; 4];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrackingError {
    #[error("track {0} has a non-finite state")]
    NonFiniteState(u64),
    #[error("prediction step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("observation is not finite or has a non-positive box")]
    InvalidObservation,
    #[error("innovation covariance is singular (zero measurement and position noise)")]
    DegenerateNoise,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrackState<S> {
    pub x: S,
    pub y: S,
    pub vx: S,
    pub vy: S,
}

impl<S: Scalar> TrackState<S> {
    pub fn new(x: S, y: S, vx: S, vy: S) -> Self {
        Self { x, y, vx, vy }
    }

    pub fn position(&self) -> Point2<S> {
        Point2::new(self.x, self.y)
    }

    pub fn velocity(&self) -> Point2<S> {
        Point2::new(self.vx, self.vy)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.vx.is_finite() && self.vy.is_finite()
    }

    fn as_array(&self) -> [S; 4] {
        [self.x, self.y, self.vx, self.vy]
    }

    fn from_array(a: [S; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    /// Noiseless constant-velocity extrapolation.
    pub fn advanced(&self, dt: S) -> Self {
        Self::new(self.x + self.vx * dt, self.y + self.vy * dt, self.vx, self.vy)
    }
}

/// Bounding-box measurement of one pedestrian, in feet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation<S> {
    pub xc: S,
    pub yc: S,
    pub h: S,
    pub w: S,
}

impl<S: Scalar> Observation<S> {
    pub fn new(xc: S, yc: S, h: S, w: S) -> Self {
        Self { xc, yc, h, w }
    }

    pub fn is_valid(&self) -> bool {
        self.xc.is_finite()
            && self.yc.is_finite()
            && self.h.is_finite()
            && self.w.is_finite()
            && self.h > S::zero()
            && self.w > S::zero()
    }
}

/// Diagonal noise levels for the filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KalmanNoise<S> {
    /// Process noise spectral density; the predict step adds `q·dt·I`.
    pub process: S,
    /// Measurement noise variance on each position component (ft²).
    pub measurement: S,
    /// Variance used on every state component when a track is born.
    pub initial: S,
}

impl<S: Scalar> Default for KalmanNoise<S> {
    fn default() -> Self {
        Self {
            process: S::lit(0.01),
            measurement: S::lit(0.25),
            initial: S::lit(10.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track<S> {
    pub id: u64,
    pub state: TrackState<S>,
    pub covariance: Mat4<S>,
    /// Predicted time at which the pedestrian leaves the field; infinite when stationary.
    pub exit_time: S,
    pub interrogated: bool,
    pub birth_time: S,
    /// Box size of the latest observation.
    pub box_size: (S, S),
}

impl<S: Scalar> Track<S> {
    /// A track born from its first observation: zero velocity, inflated diagonal covariance.
    pub fn from_observation(id: u64, obs: &Observation<S>, now: S, initial_variance: S) -> Self {
        let mut covariance = zeros();
        for (i, row) in covariance.iter_mut().enumerate() {
            row[i] = initial_variance;
        }
        Self {
            id,
            state: TrackState::new(obs.xc, obs.yc, S::zero(), S::zero()),
            covariance,
            exit_time: S::infinity(),
            interrogated: false,
            birth_time: now,
            box_size: (obs.h, obs.w),
        }
    }

    /// A track with a known state and a diagonal covariance.
    pub fn with_state(id: u64, state: TrackState<S>, variance: S, now: S) -> Self {
        let mut covariance = zeros();
        for (i, row) in covariance.iter_mut().enumerate() {
            row[i] = variance;
        }
        Self {
            id,
            state,
            covariance,
            exit_time: S::infinity(),
            interrogated: false,
            birth_time: now,
            box_size: (S::lit(5.5), S::lit(1.5)),
        }
    }

    pub fn covariance_trace(&self) -> S {
        (0..4).map(|i| self.covariance[i][i]).sum()
    }
}

fn zeros<S: Scalar>() -> Mat4<S> {
    [[S::zero(); 4]; 4]
}

fn transition<S: Scalar>(dt: S) -> Mat4<S> {
    let mut a = zeros();
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = S::one();
    }
    a[0][2] = dt;
    a[1][3] = dt;
    a
}

fn mat_mul<S: Scalar>(a: &Mat4<S>, b: &Mat4<S>) -> Mat4<S> {
    let mut out = zeros();
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn transpose<S: Scalar>(a: &Mat4<S>) -> Mat4<S> {
    let mut out = zeros();
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = a[j][i];
        }
    }
    out
}

fn symmetrize<S: Scalar>(p: &mut Mat4<S>) {
    let half = S::lit(0.5);
    for i in 0..4 {
        for j in (i + 1)..4 {
            let v = (p[i][j] + p[j][i]) * half;
            p[i][j] = v;
            p[j][i] = v;
        }
    }
}

/// Constant-velocity predict: `x' = A x`, `P' = A P Aᵀ + q·dt·I`.
pub fn kf_predict<S: Scalar>(
    track: &Track<S>,
    dt: S,
    process_noise: S,
) -> Result<Track<S>, TrackingError> {
    if !(dt > S::zero()) {
        return Err(TrackingError::NonPositiveStep(dt.to_f64_lossy()));
    }
    if !track.state.is_finite() {
        return Err(TrackingError::NonFiniteState(track.id));
    }
    let a = transition(dt);
    let mut p = mat_mul(&mat_mul(&a, &track.covariance), &transpose(&a));
    for (i, row) in p.iter_mut().enumerate() {
        row[i] += process_noise * dt;
    }
    symmetrize(&mut p);
    Ok(Track {
        state: track.state.advanced(dt),
        covariance: p,
        ..track.clone()
    })
}

/// Kalman correction with the position-only measurement map `z = [x, y]`.
///
/// Uses the Joseph form so the posterior covariance stays symmetric PSD.
pub fn kf_update<S: Scalar>(
    track: &Track<S>,
    obs: &Observation<S>,
    measurement_noise: S,
) -> Result<Track<S>, TrackingError> {
    if !obs.is_valid() {
        return Err(TrackingError::InvalidObservation);
    }
    if !track.state.is_finite() {
        return Err(TrackingError::NonFiniteState(track.id));
    }
    let p = &track.covariance;
    let s00 = p[0][0] + measurement_noise;
    let s01 = p[0][1];
    let s10 = p[1][0];
    let s11 = p[1][1] + measurement_noise;
    let det = s00 * s11 - s01 * s10;
    let scale = s00.abs().max(s11.abs()).max(S::min_positive_value());
    if !det.is_finite() || det.abs() <= S::epsilon() * scale * scale {
        return Err(TrackingError::DegenerateNoise);
    }
    let inv = [[s11 / det, -s01 / det], [-s10 / det, s00 / det]];

    // K = P Hᵀ S⁻¹, P Hᵀ is the first two columns of P.
    let mut gain = [[S::zero(); 2]; 4];
    for (i, g) in gain.iter_mut().enumerate() {
        for (j, gj) in g.iter_mut().enumerate() {
            *gj = p[i][0] * inv[0][j] + p[i][1] * inv[1][j];
        }
    }

    let innovation = [obs.xc - track.state.x, obs.yc - track.state.y];
    let mut x = track.state.as_array();
    for (i, xi) in x.iter_mut().enumerate() {
        *xi += gain[i][0] * innovation[0] + gain[i][1] * innovation[1];
    }

    // Joseph form: (I - K H) P (I - K H)ᵀ + K R Kᵀ
    let mut ikh = zeros();
    for i in 0..4 {
        ikh[i][i] = S::one();
        ikh[i][0] -= gain[i][0];
        ikh[i][1] -= gain[i][1];
    }
    let mut post = mat_mul(&mat_mul(&ikh, p), &transpose(&ikh));
    for i in 0..4 {
        for j in 0..4 {
            post[i][j] += measurement_noise * (gain[i][0] * gain[j][0] + gain[i][1] * gain[j][1]);
        }
    }
    symmetrize(&mut post);

    Ok(Track {
        state: TrackState::from_array(x),
        covariance: post,
        box_size: (obs.h, obs.w),
        ..track.clone()
    })
}

/// Earliest time at which the constant-velocity ray leaves `bounds`.
///
/// Returns `now` for a track already outside and `+∞` for a stationary one.
pub fn predict_exit_time<S: Scalar>(track: &Track<S>, bounds: &Rect<S>, now: S) -> S {
    let st = &track.state;
    if !bounds.contains(&st.position()) {
        return now;
    }
    let axis = |pos: S, vel: S, lo: S, hi: S| -> S {
        if vel > S::zero() {
            (hi - pos) / vel
        } else if vel < S::zero() {
            (lo - pos) / vel
        } else {
            S::infinity()
        }
    };
    let tx = axis(st.x, st.vx, bounds.min_x, bounds.max_x);
    let ty = axis(st.y, st.vy, bounds.min_y, bounds.max_y);
    let dt = tx.min(ty).max(S::zero());
    now + dt
}

/// Positions at `now + k·period_len` for `k = 1..=periods`, noiseless.
pub fn predict_positions<S: Scalar>(track: &Track<S>, periods: usize, period_len: S) -> Vec<Point2<S>> {
    (1..=periods)
        .map(|k| {
            let dt = period_len * S::from_usize(k).unwrap();
            track.state.advanced(dt).position()
        })
        .collect()
}

/// Unit vector pointing from a pedestrian toward whoever it is facing, i.e. the
/// reverse of its heading. `None` when the pedestrian is (nearly) stationary.
pub fn facing_direction<S: Scalar>(velocity: &Point2<S>) -> Option<Point2<S>> {
    velocity.normalized().map(|u| Point2::new(-u.x, -u.y))
}
