//! PTZ camera geometry: ground footprints, aiming, viewing angles and the
//! angle-based video quality score.
//!
//! Cameras are pinholes mounted `height` feet above the ground plane `z = 0`.
//! Pan is measured counter-clockwise from the +x axis, tilt is the elevation of
//! the optical axis (negative looks down, `-π/2` is straight down).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point2;
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CameraError {
    #[error("camera {camera}: a view ray does not hit the ground plane")]
    Horizon { camera: usize },
    #[error("camera {camera}: target outside the pan/tilt range")]
    OutOfRange { camera: usize },
    #[error("camera {camera}: invalid configuration ({reason})")]
    InvalidConfig { camera: usize, reason: &'static str },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraConfig<S> {
    pub id: usize,
    pub position: Point2<S>,
    pub height: S,
    /// Full field-of-view angle at zoom 1, radians.
    pub fov: S,
    pub aspect: S,
    pub pan_range: (S, S),
    pub tilt_range: (S, S),
    pub max_zoom: S,
    pub transition_time: S,
    pub capture_time: S,
}

impl<S: Scalar> CameraConfig<S> {
    /// The reference PTZ unit: 50 ft mast, 90° lens, full pan, tilt down to
    /// vertical, 10× zoom, 1 s transition and 2 s capture.
    pub fn standard(id: usize, position: Point2<S>) -> Self {
        Self {
            id,
            position,
            height: S::lit(50.0),
            fov: S::FRAC_PI_2(),
            aspect: S::one(),
            pan_range: (-S::PI(), S::PI()),
            tilt_range: (-S::FRAC_PI_2(), S::zero()),
            max_zoom: S::lit(10.0),
            transition_time: S::one(),
            capture_time: S::lit(2.0),
        }
    }

    pub fn validate(&self) -> Result<(), CameraError> {
        let bad = |reason| Err(CameraError::InvalidConfig { camera: self.id, reason });
        if !(self.height > S::zero()) {
            return bad("height must be positive");
        }
        if !(self.fov > S::zero() && self.fov < S::PI()) {
            return bad("fov must lie in (0, π)");
        }
        if !(self.aspect > S::zero()) {
            return bad("aspect must be positive");
        }
        if !(self.max_zoom >= S::one()) {
            return bad("max_zoom must be at least 1");
        }
        if self.pan_range.0 > self.pan_range.1 || self.tilt_range.0 > self.tilt_range.1 {
            return bad("empty pan or tilt range");
        }
        Ok(())
    }

    /// Duration of one interrogation task (transition + capture).
    pub fn task_time(&self) -> S {
        self.transition_time + self.capture_time
    }

    fn in_range(&self, s: &PtzSetting<S>) -> bool {
        let tol = S::lit(1e-9);
        s.pan >= self.pan_range.0 - tol
            && s.pan <= self.pan_range.1 + tol
            && s.tilt >= self.tilt_range.0 - tol
            && s.tilt <= self.tilt_range.1 + tol
            && s.zoom >= S::one() - tol
            && s.zoom <= self.max_zoom + tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PtzSetting<S> {
    pub pan: S,
    pub tilt: S,
    pub zoom: S,
}

/// Ground-plane quadrilateral seen by a camera, corners in boundary order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Footprint<S> {
    pub corners: [Point2<S>; 4],
}

impl<S: Scalar> Footprint<S> {
    /// Shoelace area (always non-negative).
    pub fn area(&self) -> S {
        self.signed_area().abs()
    }

    fn signed_area(&self) -> S {
        let c = &self.corners;
        let twice: S = (0..4).map(|i| c[i].cross(&c[(i + 1) % 4])).sum();
        twice / S::lit(2.0)
    }

    /// Signed distances of `p` to each edge, positive inside.
    fn edge_distances(&self, p: &Point2<S>) -> [S; 4] {
        let orient = if self.signed_area() >= S::zero() { S::one() } else { -S::one() };
        let mut out = [S::zero(); 4];
        for (i, d) in out.iter_mut().enumerate() {
            let a = self.corners[i];
            let b = self.corners[(i + 1) % 4];
            let edge = b.sub(&a);
            let len = edge.norm();
            *d = orient * edge.cross(&p.sub(&a)) / len;
        }
        out
    }

    pub fn contains(&self, p: &Point2<S>) -> bool {
        self.edge_distances(p).iter().all(|&d| d >= -S::lit(1e-9))
    }

    /// Whether the closed disc of `radius` around `center` lies inside the footprint.
    pub fn contains_disc(&self, center: &Point2<S>, radius: S) -> bool {
        self.edge_distances(center).iter().all(|&d| d >= radius - S::lit(1e-9))
    }
}

/// Projects the rectangular view frustum of `setting` onto the ground plane.
pub fn footprint<S: Scalar>(
    cam: &CameraConfig<S>,
    setting: &PtzSetting<S>,
) -> Result<Footprint<S>, CameraError> {
    let (sp, cp) = setting.pan.sin_cos();
    let (st, ct) = setting.tilt.sin_cos();
    let axis = [ct * cp, ct * sp, st];
    let right = [sp, -cp, S::zero()];
    let up = [-st * cp, -st * sp, ct];

    let half = cam.fov / (S::lit(2.0) * setting.zoom);
    let tan_h = half.tan();
    let tan_v = tan_h / cam.aspect;

    let signs = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];
    let mut corners = [Point2::new(S::zero(), S::zero()); 4];
    for (corner, (a, b)) in corners.iter_mut().zip(signs) {
        let a = S::lit(a) * tan_h;
        let b = S::lit(b) * tan_v;
        let ray = [
            axis[0] + a * right[0] + b * up[0],
            axis[1] + a * right[1] + b * up[1],
            axis[2] + a * right[2] + b * up[2],
        ];
        // Rays must point strictly downward to meet z = 0.
        if !(ray[2] < -S::lit(1e-9)) {
            return Err(CameraError::Horizon { camera: cam.id });
        }
        let t = cam.height / -ray[2];
        *corner = Point2::new(cam.position.x + t * ray[0], cam.position.y + t * ray[1]);
    }
    Ok(Footprint { corners })
}

fn pan_tilt_toward<S: Scalar>(cam: &CameraConfig<S>, target: &Point2<S>) -> (S, S) {
    let d = target.sub(&cam.position);
    let pan = d.y.atan2(d.x);
    let tilt = -cam.height.atan2(d.norm());
    (pan, tilt)
}

/// Whether the pan/tilt range allows pointing the optical axis at `target`.
pub fn can_aim<S: Scalar>(cam: &CameraConfig<S>, target: &Point2<S>) -> bool {
    let (pan, tilt) = pan_tilt_toward(cam, target);
    cam.in_range(&PtzSetting { pan, tilt, zoom: S::one() })
}

/// Centers the optical axis on `target` and picks the tightest zoom whose
/// footprint still frames the disc of `required_radius` around it.
pub fn aim_at<S: Scalar>(
    cam: &CameraConfig<S>,
    target: &Point2<S>,
    required_radius: S,
) -> Result<PtzSetting<S>, CameraError> {
    let (pan, tilt) = pan_tilt_toward(cam, target);
    let probe = PtzSetting { pan, tilt, zoom: S::one() };
    if !cam.in_range(&probe) {
        return Err(CameraError::OutOfRange { camera: cam.id });
    }
    let frames = |zoom: S| {
        footprint(cam, &PtzSetting { pan, tilt, zoom })
            .map(|fp| fp.contains_disc(target, required_radius))
            .unwrap_or(false)
    };
    if frames(cam.max_zoom) {
        return Ok(PtzSetting { pan, tilt, zoom: cam.max_zoom });
    }
    // Footprints shrink monotonically with zoom, so framing holds on [z_min, z*].
    // Low zooms may break the horizon, so probe a grid for a framing zoom first.
    let samples = 16;
    let grid: Vec<S> = (0..=samples)
        .map(|k| {
            S::one() + (cam.max_zoom - S::one()) * S::from_usize(k).unwrap() / S::from_usize(samples).unwrap()
        })
        .collect();
    let Some(mut lo) = grid.iter().copied().filter(|&z| frames(z)).last() else {
        // Disc larger than any footprint: widest valid view.
        let widest = grid
            .iter()
            .copied()
            .find(|&z| footprint(cam, &PtzSetting { pan, tilt, zoom: z }).is_ok())
            .ok_or(CameraError::Horizon { camera: cam.id })?;
        return Ok(PtzSetting { pan, tilt, zoom: widest });
    };
    let mut hi = cam.max_zoom;
    for _ in 0..48 {
        let mid = (lo + hi) / S::lit(2.0);
        if frames(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(PtzSetting { pan, tilt, zoom: lo })
}

/// Zoom-1 setting for watching a wide region centered at `center`.
///
/// When pointing straight at the center would put the top of the frame above
/// the horizon, the camera tilts down until every ray meets the ground with a
/// 5° margin.
pub fn wide_setting<S: Scalar>(
    cam: &CameraConfig<S>,
    center: &Point2<S>,
) -> Result<PtzSetting<S>, CameraError> {
    let (pan, tilt) = pan_tilt_toward(cam, center);
    let half_v = (cam.fov / S::lit(2.0)).tan().atan2(cam.aspect);
    let steepest = -(half_v + S::lit(5.0).to_radians());
    let tilt = tilt.min(steepest).max(-S::FRAC_PI_2());
    let setting = PtzSetting { pan, tilt, zoom: S::one() };
    if !cam.in_range(&setting) {
        return Err(CameraError::OutOfRange { camera: cam.id });
    }
    footprint(cam, &setting)?;
    Ok(setting)
}

/// Unsigned ground-plane angle between the camera→target line of sight and `reference_dir`.
pub fn sight_angle<S: Scalar>(cam: &CameraConfig<S>, target: &Point2<S>, reference_dir: &Point2<S>) -> S {
    let los = target.sub(&cam.position);
    los.cross(reference_dir).abs().atan2(los.dot(reference_dir))
}

/// Angle-based video quality score: 3, 2, 1 for `|e|` up to π/6, π/3, π/2, else 0.
pub fn quality_value<S: Scalar>(e: S) -> u8 {
    let e = e.abs();
    if e <= S::FRAC_PI_6() {
        3
    } else if e <= S::FRAC_PI_3() {
        2
    } else if e <= S::FRAC_PI_2() {
        1
    } else {
        0
    }
}
