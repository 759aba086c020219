//! Ground truth: pedestrian arrivals and motion, camera state, detection.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use log::debug;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::camera::footprint;
use crate::config::ScenarioConfig;
use crate::trace::{to_ms, Trace, TraceEvent};
use crate::tracking::{kf_predict, kf_update};
use crate::{CameraConfig, Field, Footprint, Observation, PtzSetting, Track, TrackState};

const STREAM_ARRIVALS: u64 = 1 << 62;
const STREAM_DETECTION: u64 = (1 << 62) + 1;

#[derive(Debug, Clone)]
pub struct Pedestrian {
    pub id: u64,
    pub state: TrackState,
    rng: ChaCha8Rng,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CameraTask {
    Idle,
    /// Fixed whole-field view of a master camera.
    Static,
    Fixed { region: usize },
    Capture { group: u64, members: Vec<u64> },
}

#[derive(Debug, Clone)]
pub struct CameraState {
    pub config: CameraConfig,
    pub setting: PtzSetting,
    pub footprint: Option<Footprint>,
    pub task: CameraTask,
    /// First frame at which the camera has finished moving.
    pub settled_frame: u64,
    /// Frame at which the current task completes.
    pub busy_until_frame: u64,
}

impl CameraState {
    pub fn is_free(&self, frame: u64) -> bool {
        frame >= self.busy_until_frame
    }

    /// Starts a new task; the camera is blind while it moves.
    pub fn assign(&mut self, setting: PtzSetting, task: CameraTask, frame: u64, fps: f64, duration: f64) {
        self.footprint = footprint(&self.config, &setting).ok();
        self.setting = setting;
        self.task = task;
        self.settled_frame = frame + (self.config.transition_time * fps).round() as u64;
        self.busy_until_frame = frame + (duration * fps).round().max(1.0) as u64;
    }

    fn sees(&self, p: &crate::Point, field: &Field, regions: &[Field], frame: u64) -> bool {
        if frame < self.settled_frame {
            return false;
        }
        match &self.task {
            CameraTask::Static => field.contains(p),
            CameraTask::Fixed { region } => {
                regions[*region].contains(p) && self.footprint.is_some_and(|f| f.contains(p))
            }
            _ => self.footprint.is_some_and(|f| f.contains(p)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct WorldState {
    pub frame: u64,
    pub fps: f64,
    pub field: Field,
    pub regions: Vec<Field>,
    pub pedestrians: Vec<Pedestrian>,
    /// Tracks of detected pedestrians still in the field, keyed by pedestrian id.
    pub tracks: BTreeMap<u64, Track>,
    pub first_seen_ms: HashMap<u64, i64>,
    pub interrogated: BTreeSet<u64>,
    pub spawned: usize,
    pub cameras: Vec<CameraState>,
    pub trace: Trace,
    arrival_rng: ChaCha8Rng,
    detect_rng: ChaCha8Rng,
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

impl WorldState {
    pub fn new(cfg: &ScenarioConfig, method: &str) -> Self {
        let field = cfg.field_rect();
        let cameras = cfg
            .camera_configs()
            .into_iter()
            .map(|config| CameraState {
                setting: PtzSetting { pan: 0.0, tilt: -std::f64::consts::FRAC_PI_2, zoom: 1.0 },
                footprint: None,
                task: CameraTask::Idle,
                settled_frame: 0,
                busy_until_frame: 0,
                config,
            })
            .collect();
        Self {
            frame: 0,
            fps: cfg.arrivals.frames_per_second,
            field,
            regions: cfg.fixed_regions(),
            pedestrians: Vec::new(),
            tracks: BTreeMap::new(),
            first_seen_ms: HashMap::new(),
            interrogated: BTreeSet::new(),
            spawned: 0,
            cameras,
            trace: Trace::new(method, cfg.seed, &cfg.hash()),
            arrival_rng: stream_rng(cfg.seed, STREAM_ARRIVALS),
            detect_rng: stream_rng(cfg.seed, STREAM_DETECTION),
        }
    }

    pub fn now(&self) -> f64 {
        self.frame as f64 / self.fps
    }

    pub fn now_ms(&self) -> i64 {
        to_ms(self.now())
    }

    pub fn truth(&self, id: u64) -> Option<&TrackState> {
        self.pedestrians.iter().find(|p| p.id == id).map(|p| &p.state)
    }

    pub fn finished(&self, cfg: &ScenarioConfig) -> bool {
        self.spawned >= cfg.arrivals.total_pedestrians && self.pedestrians.is_empty()
    }

    /// Tracks not yet interrogated, in id order.
    pub fn open_tracks(&self) -> Vec<Track> {
        self.tracks.values().filter(|t| !t.interrogated).cloned().collect()
    }

    /// Marks `ids` interrogated and logs the capture.
    pub fn record_capture(&mut self, camera: usize, group: u64, ids: Vec<u64>) {
        let first_seen_ms = ids.iter().map(|id| self.first_seen_ms[id]).collect();
        for id in &ids {
            self.interrogated.insert(*id);
            if let Some(t) = self.tracks.get_mut(id) {
                t.interrogated = true;
            }
        }
        let t_ms = self.now_ms();
        self.trace.push(TraceEvent::Capture { t_ms, camera, group, ids, first_seen_ms });
    }
}

/// Pedestrians arriving during one frame: a Poisson count, capped by the
/// remaining budget, entering on the top edge and walking roughly south.
pub fn spawn_pedestrians(cfg: &ScenarioConfig, rng: &mut ChaCha8Rng, first_id: u64) -> Vec<Pedestrian> {
    let a = &cfg.arrivals;
    let remaining = a.total_pedestrians.saturating_sub(first_id as usize);
    if remaining == 0 || a.rate_per_frame <= 0.0 {
        return Vec::new();
    }
    let n = Poisson::new(a.rate_per_frame).expect("positive rate").sample(rng) as usize;
    (0..n.min(remaining))
        .map(|k| {
            let id = first_id + k as u64;
            let x = rng.random_range(0.0..=cfg.field.width);
            let speed = rng.random_range(a.speed_min..=a.speed_max);
            let jitter = a.heading_jitter_deg.to_radians();
            let heading = -std::f64::consts::FRAC_PI_2 + rng.random_range(-jitter..=jitter);
            Pedestrian {
                id,
                state: TrackState::new(x, cfg.field.height, speed * heading.cos(), speed * heading.sin()),
                rng: stream_rng(cfg.seed, id),
            }
        })
        .collect()
}

fn gaussian(rng: &mut ChaCha8Rng, var: f64) -> f64 {
    if var <= 0.0 {
        return 0.0;
    }
    Normal::new(0.0, var.sqrt()).expect("finite deviation").sample(rng)
}

/// Advances the world by one frame: arrivals, motion (constant velocity,
/// position diffusing with the process noise), exits, filter prediction, then
/// detection by every settled camera.
pub fn step_world(state: &mut WorldState, cfg: &ScenarioConfig) {
    let dt = 1.0 / state.fps;
    let q = cfg.noise.process;

    let born = spawn_pedestrians(cfg, &mut state.arrival_rng, state.spawned as u64);
    for p in &born {
        state.trace.push(TraceEvent::Spawn { t_ms: to_ms(state.now()), id: p.id });
    }
    state.spawned += born.len();
    state.pedestrians.extend(born);

    state.frame += 1;
    let t_ms = state.now_ms();

    for p in &mut state.pedestrians {
        let mut s = p.state.advanced(dt);
        s.x += gaussian(&mut p.rng, q * dt);
        s.y += gaussian(&mut p.rng, q * dt);
        p.state = s;
    }
    let field = state.field;
    let (inside, gone): (Vec<_>, Vec<_>) =
        std::mem::take(&mut state.pedestrians).into_iter().partition(|p| field.contains(&p.state.position()));
    state.pedestrians = inside;
    for p in gone {
        if !state.interrogated.contains(&p.id) {
            debug!("pedestrian {} left uncaptured (detected: {})", p.id, state.first_seen_ms.contains_key(&p.id));
        }
        state.tracks.remove(&p.id);
        state.trace.push(TraceEvent::Exit { t_ms, id: p.id });
    }

    for track in state.tracks.values_mut() {
        *track = kf_predict(track, dt, q).expect("finite track state");
    }

    let noise = cfg.noise.kalman();
    for p in &state.pedestrians {
        let pos = p.state.position();
        let seen = state.cameras.iter().any(|c| c.sees(&pos, &field, &state.regions, state.frame));
        if !seen {
            continue;
        }
        let obs = Observation::new(
            pos.x + gaussian(&mut state.detect_rng, noise.measurement),
            pos.y + gaussian(&mut state.detect_rng, noise.measurement),
            5.5,
            1.5,
        );
        match state.tracks.get_mut(&p.id) {
            Some(track) => {
                if let Ok(t) = kf_update(track, &obs, noise.measurement) {
                    *track = t;
                }
            }
            None => {
                let mut t = Track::from_observation(p.id, &obs, state.now(), noise.initial);
                t.interrogated = state.interrogated.contains(&p.id);
                state.tracks.insert(p.id, t);
                state.first_seen_ms.entry(p.id).or_insert(t_ms);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet_cfg() -> ScenarioConfig {
        let mut c = ScenarioConfig::default();
        c.noise.process = 0.0;
        c.noise.measurement = 0.0;
        c
    }

    #[test]
    fn poisson_arrival_count() {
        let mut cfg = ScenarioConfig::default();
        cfg.arrivals.rate_per_frame = 0.05;
        cfg.arrivals.total_pedestrians = usize::MAX;
        let mut rng = stream_rng(11, STREAM_ARRIVALS);
        let mut n = 0u64;
        for _ in 0..8100 {
            n += spawn_pedestrians(&cfg, &mut rng, n).len() as u64;
        }
        assert!((385..=425).contains(&n), "spawned {n}");
    }

    #[test]
    fn arrivals_respect_budget_and_zero_rate() {
        let mut cfg = ScenarioConfig::default();
        cfg.arrivals.rate_per_frame = 5.0;
        cfg.arrivals.total_pedestrians = 3;
        let mut rng = stream_rng(1, 0);
        assert!(spawn_pedestrians(&cfg, &mut rng, 0).len() <= 3);
        assert!(spawn_pedestrians(&cfg, &mut rng, 3).is_empty());
        cfg.arrivals.rate_per_frame = 0.0;
        assert!(spawn_pedestrians(&cfg, &mut rng, 0).is_empty());
    }

    #[test]
    fn noiseless_step_is_constant_velocity() {
        let mut cfg = quiet_cfg();
        cfg.arrivals.frames_per_second = 1.0;
        let mut w = WorldState::new(&cfg, "test");
        w.spawned = cfg.arrivals.total_pedestrians;
        w.pedestrians.push(Pedestrian { id: 0, state: TrackState::new(150.0, 100.0, 0.0, -4.0), rng: stream_rng(0, 0) });
        step_world(&mut w, &cfg);
        let s = w.pedestrians[0].state;
        assert_eq!((s.x, s.y), (150.0, 96.0));
    }

    #[test]
    fn exits_are_logged_and_tracks_dropped() {
        let cfg = quiet_cfg();
        let mut w = WorldState::new(&cfg, "test");
        w.spawned = cfg.arrivals.total_pedestrians;
        w.pedestrians.push(Pedestrian { id: 4, state: TrackState::new(10.0, 0.01, 0.0, -1.0), rng: stream_rng(0, 4) });
        w.tracks.insert(4, Track::with_state(4, TrackState::new(10.0, 0.01, 0.0, -1.0), 1.0, 0.0));
        step_world(&mut w, &cfg);
        assert!(w.pedestrians.is_empty() && w.tracks.is_empty());
        assert!(matches!(w.trace.events[..], [TraceEvent::Exit { id: 4, .. }]));
        assert!(w.finished(&cfg));
    }

    #[test]
    fn detection_noise_matches_measurement_variance() {
        let mut cfg = quiet_cfg();
        cfg.noise.measurement = 0.25;
        let mut w = WorldState::new(&cfg, "test");
        let mut errs = Vec::new();
        for _ in 0..10_000 {
            errs.push(gaussian(&mut w.detect_rng, cfg.noise.measurement));
        }
        let mean = errs.iter().sum::<f64>() / errs.len() as f64;
        let sd = (errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (errs.len() - 1) as f64).sqrt();
        assert!((sd - 0.5).abs() < 0.03, "sd {sd}");
    }

    #[test]
    fn static_camera_detects_and_blind_camera_does_not() {
        let cfg = quiet_cfg();
        let mut w = WorldState::new(&cfg, "test");
        w.spawned = cfg.arrivals.total_pedestrians;
        w.pedestrians.push(Pedestrian { id: 0, state: TrackState::new(50.0, 50.0, 0.0, -1.0), rng: stream_rng(0, 0) });
        step_world(&mut w, &cfg);
        assert!(w.tracks.is_empty());
        w.cameras[0].task = CameraTask::Static;
        step_world(&mut w, &cfg);
        assert_eq!(w.tracks.len(), 1);
        assert_eq!(w.first_seen_ms[&0], w.now_ms());
    }
}
