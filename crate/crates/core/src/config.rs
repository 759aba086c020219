//! Scenario configuration, read from TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::camera::CameraConfig as GenericCamera;
use crate::flow::{feasibility_check, FeasibilityViolation, PFormula};
use crate::geometry::{Point2, Rect};
use crate::tracking::KalmanNoise;
use crate::{CameraConfig, Field};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot parse {path}: {source}")]
    Parse { path: String, source: toml::de::Error },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("infeasible planning network: {0}")]
    Infeasible(#[from] FeasibilityViolation),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum PlannerKind {
    /// Network-flow planner, one node per track.
    Flexible,
    /// Network-flow planner over greedy group-tracking nodes.
    #[default]
    FlexibleGrouped,
    /// Static wide camera plus PTZ slaves on a greedy queue.
    MasterSlave,
}

impl PlannerKind {
    pub const ALL: [PlannerKind; 3] = [PlannerKind::FlexibleGrouped, PlannerKind::Flexible, PlannerKind::MasterSlave];

    pub fn as_str(&self) -> &'static str {
        match self {
            PlannerKind::Flexible => "flexible",
            PlannerKind::FlexibleGrouped => "flexible_grouped",
            PlannerKind::MasterSlave => "master_slave",
        }
    }
}

impl std::fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Target selection of the master-slave PTZ cameras.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselinePolicy {
    /// Earliest predicted exit first.
    #[default]
    Edf,
    /// Oldest detection first, cameras served in turn.
    RoundRobin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldConfig {
    pub width: f64,
    pub height: f64,
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self { width: 300.0, height: 160.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArrivalConfig {
    /// Poisson arrival rate per video frame.
    pub rate_per_frame: f64,
    pub frames_per_second: f64,
    pub total_pedestrians: usize,
    /// Walking speed range, ft/s.
    pub speed_min: f64,
    pub speed_max: f64,
    /// Maximum deviation of the heading from due south, degrees.
    pub heading_jitter_deg: f64,
}

impl Default for ArrivalConfig {
    fn default() -> Self {
        Self {
            rate_per_frame: 1.0 / 20.0,
            frames_per_second: 18.0,
            total_pedestrians: 400,
            speed_min: 3.0,
            speed_max: 5.0,
            heading_jitter_deg: 15.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Process noise density `q` (filter adds `q·dt·I`; pedestrians diffuse with it).
    pub process: f64,
    /// Detection noise variance per position axis, ft².
    pub measurement: f64,
    /// Diagonal covariance of a newborn track.
    pub initial_variance: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        let k = KalmanNoise::<f64>::default();
        Self { process: k.process, measurement: k.measurement, initial_variance: k.initial }
    }
}

impl NoiseConfig {
    pub fn kalman(&self) -> KalmanNoise<f64> {
        KalmanNoise { process: self.process, measurement: self.measurement, initial: self.initial_variance }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    pub kind: PlannerKind,
    /// `H`, periods per plan.
    pub horizon: usize,
    /// `T`, fixed-region revisit window in periods.
    pub window: usize,
    /// Seconds per planning period.
    pub period_len: f64,
    /// Radius of the disc a zoomed capture must frame, ft.
    pub group_radius: f64,
    /// Extra radius around a group framed by a zoomed capture, ft.
    pub aim_margin: f64,
    /// A group is not planned in a period ending less than this many seconds
    /// before its predicted exit.
    pub exit_guard: f64,
    /// Number of fixed regions; defaults to one band per camera.
    pub fixed_regions: Option<usize>,
    pub baseline_policy: BaselinePolicy,
    pub p_formula: PFormula,
    /// Hard stop for the simulated clock, seconds.
    pub max_sim_time: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            kind: PlannerKind::FlexibleGrouped,
            horizon: 10,
            window: 5,
            period_len: 3.0,
            group_radius: 6.0,
            aim_margin: 3.0,
            exit_guard: 0.0,
            fixed_regions: None,
            baseline_policy: BaselinePolicy::Edf,
            p_formula: PFormula::Conserved,
            max_sim_time: 7200.0,
        }
    }
}

/// One camera, angles in degrees. Unset fields take the reference PTZ values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraSpec {
    pub x: f64,
    pub y: f64,
    pub height: f64,
    pub fov_deg: f64,
    pub aspect: f64,
    pub pan_min_deg: f64,
    pub pan_max_deg: f64,
    pub tilt_min_deg: f64,
    pub tilt_max_deg: f64,
    pub max_zoom: f64,
    pub transition_time: f64,
    pub capture_time: f64,
}

impl Default for CameraSpec {
    fn default() -> Self {
        Self {
            x: 0.0,
            y: 0.0,
            height: 50.0,
            fov_deg: 90.0,
            aspect: 1.0,
            pan_min_deg: -180.0,
            pan_max_deg: 180.0,
            tilt_min_deg: -90.0,
            tilt_max_deg: 0.0,
            max_zoom: 10.0,
            transition_time: 1.0,
            capture_time: 2.0,
        }
    }
}

impl CameraSpec {
    pub fn to_camera(&self, id: usize) -> CameraConfig {
        GenericCamera {
            id,
            position: Point2::new(self.x, self.y),
            height: self.height,
            fov: self.fov_deg.to_radians(),
            aspect: self.aspect,
            pan_range: (self.pan_min_deg.to_radians(), self.pan_max_deg.to_radians()),
            tilt_range: (self.tilt_min_deg.to_radians(), self.tilt_max_deg.to_radians()),
            max_zoom: self.max_zoom,
            transition_time: self.transition_time,
            capture_time: self.capture_time,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub seed: u64,
    pub field: FieldConfig,
    pub arrivals: ArrivalConfig,
    pub noise: NoiseConfig,
    pub planner: PlannerConfig,
    /// Empty means three reference cameras evenly spaced on the bottom edge.
    pub cameras: Vec<CameraSpec>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            name: "default".into(),
            seed: 1,
            field: FieldConfig::default(),
            arrivals: ArrivalConfig::default(),
            noise: NoiseConfig::default(),
            planner: PlannerConfig::default(),
            cameras: Vec::new(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|source| ConfigError::Parse { path: origin.to_string(), source })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// SHA-256 of the canonical TOML form, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn field_rect(&self) -> Field {
        Rect::field(self.field.width, self.field.height)
    }

    pub fn camera_configs(&self) -> Vec<CameraConfig> {
        if self.cameras.is_empty() {
            let n = 3;
            (0..n)
                .map(|i| {
                    let x = self.field.width * (i as f64 + 0.5) / n as f64;
                    CameraSpec { x, y: 0.0, ..CameraSpec::default() }.to_camera(i)
                })
                .collect()
        } else {
            self.cameras.iter().enumerate().map(|(i, c)| c.to_camera(i)).collect()
        }
    }

    pub fn fixed_region_count(&self) -> usize {
        self.planner.fixed_regions.unwrap_or_else(|| self.camera_configs().len())
    }

    /// Equal-width vertical bands covering the field.
    pub fn fixed_regions(&self) -> Vec<Field> {
        let m = self.fixed_region_count();
        let w = self.field.width / m.max(1) as f64;
        (0..m)
            .map(|k| Rect::new(k as f64 * w, 0.0, (k + 1) as f64 * w, self.field.height))
            .collect()
    }

    /// Frames per planning period.
    pub fn period_frames(&self) -> u64 {
        (self.planner.period_len * self.arrivals.frames_per_second).round().max(1.0) as u64
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        let a = &self.arrivals;
        let p = &self.planner;
        if !(self.field.width > 0.0 && self.field.height > 0.0) {
            return bad("field dimensions must be positive");
        }
        if !(a.rate_per_frame >= 0.0 && a.rate_per_frame.is_finite()) {
            return bad("arrival rate must be a non-negative number");
        }
        if !(a.frames_per_second > 0.0) {
            return bad("frames_per_second must be positive");
        }
        if !(a.speed_min > 0.0 && a.speed_max >= a.speed_min) {
            return bad("speed range must be positive and ordered");
        }
        if !(a.heading_jitter_deg >= 0.0 && a.heading_jitter_deg < 90.0) {
            return bad("heading jitter must lie in [0, 90) degrees");
        }
        if !(self.noise.process >= 0.0 && self.noise.measurement >= 0.0 && self.noise.initial_variance > 0.0) {
            return bad("noise levels must be non-negative (initial variance positive)");
        }
        if !(p.period_len > 0.0 && p.group_radius > 0.0 && p.max_sim_time > 0.0) {
            return bad("period length, group radius and max_sim_time must be positive");
        }
        if !(p.aim_margin >= 0.0 && p.exit_guard >= 0.0) {
            return bad("aim margin and exit guard must be non-negative");
        }
        if p.horizon == 0 {
            return bad("horizon must be at least one period");
        }
        let cams = self.camera_configs();
        for c in &cams {
            c.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        match p.kind {
            PlannerKind::MasterSlave if cams.len() < 2 => bad("master-slave needs at least two cameras"),
            PlannerKind::MasterSlave => Ok(()),
            _ => {
                if cams.is_empty() {
                    return bad("at least one camera is required");
                }
                feasibility_check(p.horizon, p.window, cams.len(), self.fixed_region_count(), 0)?;
                Ok(())
            }
        }
    }
}
