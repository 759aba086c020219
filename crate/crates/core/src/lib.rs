//! Scheduling engine and discrete-event simulator for multi-PTZ-camera
//! surveillance.
//!
//! Pedestrians are tracked with per-target Kalman filters, nearby targets are
//! clustered into group nodes, and each planning period the cameras'
//! assignments over a receding horizon are solved exactly as a time-expanded
//! network flow.

pub mod camera;
pub mod cli;
pub mod config;
pub mod flow;
pub mod geometry;
pub mod grouping;
pub mod metrics;
pub mod scalar;
pub mod sim;
pub mod solver;
pub mod trace;
pub mod tracking;
pub mod validate;
pub mod valuation;

pub use scalar::Scalar;

pub type Point = geometry::Point2<f64>;
pub type Field = geometry::Rect<f64>;
pub type Track = tracking::Track<f64>;
pub type TrackState = tracking::TrackState<f64>;
pub type Observation = tracking::Observation<f64>;
pub type CameraConfig = camera::CameraConfig<f64>;
pub type PtzSetting = camera::PtzSetting<f64>;
pub type Footprint = camera::Footprint<f64>;
pub type GroupNode = grouping::GroupNode<f64>;
