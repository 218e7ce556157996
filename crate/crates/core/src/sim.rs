//! Seeded synthetic multi-camera pedestrian scenarios.
//!
//! Walkers wander the arena on smoothly steered paths (bounded turn rate,
//! wall and mutual-separation avoidance), cameras ring the arena perimeter
//! with a shared focal length chosen so the whole arena volume is visible in
//! every view, and ideal projections are corrupted into detection files with
//! pixel noise, misses, and clutter. Everything is a pure function of the
//! config, including the corruption.

use nalgebra::{Matrix3, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::TrackRecord;
use crate::tracker::{CameraModel, Detection};

/// Synthetic image size, pixels.
pub const IMAGE_WIDTH: f64 = 1280.0;
pub const IMAGE_HEIGHT: f64 = 1024.0;

const CAMERA_HEIGHT: f64 = 5.0;
const CAMERA_STANDOFF: f64 = 3.0;
/// Walkable box inset from the arena edge, meters.
const WALK_MARGIN: f64 = 1.2;
/// Steering kicks in this far from the walkable box edge.
const WALL_BUFFER: f64 = 1.2;
/// Mutual-avoidance radius, meters.
const SEPARATION: f64 = 1.5;
/// Maximum turn rate, radians per frame.
const TURN_MAX: f64 = 0.26;

/// Scenario shape and corruption parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_targets: usize,
    pub n_frames: usize,
    pub n_cameras: usize,
    /// Arena extent (width, depth), meters.
    pub arena: (f64, f64),
    pub fps: f64,
    /// Walker speed cap, m/s.
    pub v_max_sim: f64,
    /// Gaussian pixel noise std on detection centers.
    pub noise_px: f64,
    /// Per-detection drop probability.
    pub p_miss: f64,
    /// Expected false detections per camera-frame.
    pub clutter_rate: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_targets: 10,
            n_frames: 333,
            n_cameras: 4,
            arena: (12.0, 12.0),
            fps: 6.0,
            v_max_sim: 0.75,
            noise_px: 1.0,
            p_miss: 0.05,
            clutter_rate: 0.5,
            seed: 42,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_targets == 0 || self.n_frames == 0 || self.n_cameras == 0 {
            return Err(Error::InvalidParameter {
                name: "counts",
                reason: "targets, frames, and cameras must all be at least 1".into(),
            });
        }
        if !(self.arena.0 > 4.0 * WALK_MARGIN && self.arena.1 > 4.0 * WALK_MARGIN) {
            return Err(Error::InvalidParameter {
                name: "arena",
                reason: format!("arena {:?} too small to walk in", self.arena),
            });
        }
        if !(self.fps > 0.0) || !(self.v_max_sim > 0.0) {
            return Err(Error::InvalidParameter {
                name: "fps/v_max_sim",
                reason: "must be positive".into(),
            });
        }
        if !(0.0..=1.0).contains(&self.p_miss) {
            return Err(Error::InvalidParameter {
                name: "p_miss",
                reason: format!("{} outside [0, 1]", self.p_miss),
            });
        }
        if self.noise_px < 0.0 || self.clutter_rate < 0.0 {
            return Err(Error::InvalidParameter {
                name: "noise_px/clutter_rate",
                reason: "must be nonnegative".into(),
            });
        }
        Ok(())
    }
}

/// Per-frame true target positions, as `frame,id,x,y,z` records.
/// `z` is half the target's height (body center above the ground plane).
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub records: Vec<TrackRecord>,
}

impl GroundTruth {
    pub fn frames(&self) -> u64 {
        self.records.iter().map(|r| r.frame + 1).max().unwrap_or(0)
    }
}

struct Walker {
    position: Vector2<f64>,
    heading: f64,
    turn: f64,
    speed: f64,
    height: f64,
}

fn rotate_sign(heading: f64, toward: Vector2<f64>) -> f64 {
    let h = Vector2::new(heading.cos(), heading.sin());
    let cross = h.x * toward.y - h.y * toward.x;
    if cross >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Generate walker trajectories and the camera rig for a config.
///
/// Deterministic in the seed. Walkers keep moving every frame (turn rate is
/// bounded, so displacement over any few-frame window stays well above the
/// static-point threshold) and respect the `v_max_sim` speed cap exactly.
pub fn generate_world(config: &ScenarioConfig) -> Result<(GroundTruth, Vec<CameraModel>)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (aw, ad) = config.arena;
    let lo = Vector2::new(WALK_MARGIN, WALK_MARGIN);
    let hi = Vector2::new(aw - WALK_MARGIN, ad - WALK_MARGIN);
    let center = Vector2::new(aw / 2.0, ad / 2.0);

    // Spawn walkers, pairwise at least SEPARATION apart.
    let mut walkers: Vec<Walker> = Vec::with_capacity(config.n_targets);
    for _ in 0..config.n_targets {
        let position = loop {
            let p = Vector2::new(
                rng.gen_range(lo.x + WALL_BUFFER..hi.x - WALL_BUFFER),
                rng.gen_range(lo.y + WALL_BUFFER..hi.y - WALL_BUFFER),
            );
            if walkers
                .iter()
                .all(|w| (w.position - p).norm() >= SEPARATION)
            {
                break p;
            }
        };
        walkers.push(Walker {
            position,
            heading: rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
            turn: rng.gen_range(-0.05..0.05),
            speed: config.v_max_sim * rng.gen_range(0.6..1.0),
            height: 1.7 + rng.gen_range(-0.05..0.05),
        });
    }

    let mut records = Vec::with_capacity(config.n_frames * config.n_targets);
    for frame in 0..config.n_frames as u64 {
        for (id, w) in walkers.iter().enumerate() {
            records.push(TrackRecord {
                frame,
                id: id as u64,
                x: w.position.x,
                y: w.position.y,
                z: w.height / 2.0,
            });
        }

        let positions: Vec<Vector2<f64>> = walkers.iter().map(|w| w.position).collect();
        for (i, w) in walkers.iter_mut().enumerate() {
            let near_wall = w.position.x - lo.x < WALL_BUFFER
                || hi.x - w.position.x < WALL_BUFFER
                || w.position.y - lo.y < WALL_BUFFER
                || hi.y - w.position.y < WALL_BUFFER;

            if near_wall {
                w.turn = TURN_MAX * rotate_sign(w.heading, center - w.position);
            } else {
                // Steer away from the nearest walker we are closing on.
                let mut threat: Option<(f64, Vector2<f64>)> = None;
                let h = Vector2::new(w.heading.cos(), w.heading.sin());
                for (j, p) in positions.iter().enumerate() {
                    if i == j {
                        continue;
                    }
                    let d = p - w.position;
                    let dist = d.norm();
                    if dist < SEPARATION && h.dot(&d) > 0.0 {
                        if threat.map_or(true, |(best, _)| dist < best) {
                            threat = Some((dist, d));
                        }
                    }
                }
                match threat {
                    Some((_, d)) => w.turn = -TURN_MAX * rotate_sign(w.heading, d),
                    None => {
                        w.turn = (w.turn + rng.gen_range(-0.05..0.05)).clamp(-TURN_MAX, TURN_MAX)
                    }
                }
            }

            w.heading = crate::ekf::wrap_angle(w.heading + w.turn);
            let step = w.speed / config.fps;
            w.position += Vector2::new(w.heading.cos(), w.heading.sin()) * step;
            // The buffer is wider than the turning radius, so this clamp is a
            // safety net only.
            w.position.x = w.position.x.clamp(lo.x, hi.x);
            w.position.y = w.position.y.clamp(lo.y, hi.y);
        }
    }

    let cameras = build_camera_ring(config);
    Ok((GroundTruth { records }, cameras))
}

/// Cameras on the arena perimeter, all covering the full arena volume.
fn build_camera_ring(config: &ScenarioConfig) -> Vec<CameraModel> {
    let (aw, ad) = config.arena;
    let center = Vector3::new(aw / 2.0, ad / 2.0, 0.8);
    let ring_radius = ((aw / 2.0).powi(2) + (ad / 2.0).powi(2)).sqrt() + CAMERA_STANDOFF;
    let cx = IMAGE_WIDTH / 2.0;
    let cy = IMAGE_HEIGHT / 2.0;

    let mut poses = Vec::with_capacity(config.n_cameras);
    for k in 0..config.n_cameras {
        let angle = std::f64::consts::TAU * k as f64 / config.n_cameras as f64
            + std::f64::consts::FRAC_PI_4;
        let position = Vector3::new(
            aw / 2.0 + ring_radius * angle.cos(),
            ad / 2.0 + ring_radius * angle.sin(),
            CAMERA_HEIGHT,
        );
        let rotation = look_at(position, center);
        poses.push((position, rotation));
    }

    // Shared focal length: largest f that keeps every arena corner (ground
    // and head height) strictly inside every image.
    let mut f = f64::INFINITY;
    for (position, rotation) in &poses {
        for &x in &[0.0, aw] {
            for &y in &[0.0, ad] {
                for &z in &[0.0, 2.0] {
                    let cam = rotation * (Vector3::new(x, y, z) - position);
                    if cam.z <= 0.1 {
                        continue;
                    }
                    if cam.x.abs() > 1e-9 {
                        f = f.min(0.92 * cx * cam.z / cam.x.abs());
                    }
                    if cam.y.abs() > 1e-9 {
                        f = f.min(0.92 * cy * cam.z / cam.y.abs());
                    }
                }
            }
        }
    }
    let f = f.clamp(50.0, 4000.0);

    poses
        .into_iter()
        .enumerate()
        .map(|(id, (position, rotation))| CameraModel {
            id,
            fx: f,
            fy: f,
            cx,
            cy,
            rotation,
            translation: -(rotation * position),
        })
        .collect()
}

/// World-to-camera rotation looking from `eye` toward `target`, image x
/// horizontal and image y pointing downward-ish.
fn look_at(eye: Vector3<f64>, target: Vector3<f64>) -> Matrix3<f64> {
    let forward = (target - eye).normalize();
    let up = Vector3::new(0.0, 0.0, 1.0);
    let right = {
        let r = forward.cross(&up);
        if r.norm() < 1e-9 {
            Vector3::new(1.0, 0.0, 0.0)
        } else {
            r.normalize()
        }
    };
    let down = forward.cross(&right).normalize();
    Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()])
}

/// Pinhole projection of every truth point into every camera.
///
/// The window center is the body-center projection; the window size is the
/// projected body height. Points behind a camera or outside its image are
/// omitted.
pub fn project(truth: &GroundTruth, cameras: &[CameraModel]) -> Vec<Detection> {
    let mut detections = Vec::new();
    for rec in &truth.records {
        let point = Vector3::new(rec.x, rec.y, rec.z);
        let height = 2.0 * rec.z;
        for cam in cameras {
            let Some((u, v, depth)) = cam.project(&point) else {
                continue;
            };
            if u < 0.0 || u > cam.image_width() || v < 0.0 || v > cam.image_height() {
                continue;
            }
            detections.push(Detection {
                frame: rec.frame,
                camera: cam.id,
                u,
                v,
                size: cam.fy * height / depth,
                score: 1.0,
            });
        }
    }
    detections.sort_by(|a, b| {
        (a.frame, a.camera)
            .cmp(&(b.frame, b.camera))
            .then(a.u.total_cmp(&b.u))
            .then(a.v.total_cmp(&b.v))
    });
    detections
}

/// Corrupt ideal detections: Gaussian pixel noise on the window center,
/// Bernoulli misses, and Poisson clutter per camera-frame. Seeded by the
/// config; byte-deterministic.
pub fn corrupt(ideal: &[Detection], config: &ScenarioConfig) -> Result<Vec<Detection>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut out = Vec::with_capacity(ideal.len());

    let noise = if config.noise_px > 0.0 {
        Some(Normal::new(0.0, config.noise_px).expect("finite std"))
    } else {
        None
    };
    for det in ideal {
        if config.p_miss > 0.0 && rng.gen::<f64>() < config.p_miss {
            continue;
        }
        let mut d = det.clone();
        if let Some(n) = &noise {
            d.u += n.sample(&mut rng);
            d.v += n.sample(&mut rng);
        }
        out.push(d);
    }

    if config.clutter_rate > 0.0 {
        let poisson = Poisson::new(config.clutter_rate).map_err(|e| Error::InvalidParameter {
            name: "clutter_rate",
            reason: e.to_string(),
        })?;
        for frame in 0..config.n_frames as u64 {
            for camera in 0..config.n_cameras {
                let count = poisson.sample(&mut rng) as u64;
                for _ in 0..count {
                    out.push(Detection {
                        frame,
                        camera,
                        u: rng.gen_range(0.0..IMAGE_WIDTH),
                        v: rng.gen_range(0.0..IMAGE_HEIGHT),
                        size: rng.gen_range(30.0..90.0),
                        score: rng.gen_range(0.3..1.0),
                    });
                }
            }
        }
    }

    out.sort_by(|a, b| {
        (a.frame, a.camera)
            .cmp(&(b.frame, b.camera))
            .then(a.u.total_cmp(&b.u))
            .then(a.v.total_cmp(&b.v))
    });
    Ok(out)
}
