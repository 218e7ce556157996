//! Online multi-view 3D multi-target tracking.
//!
//! Per frame: detections from overlapping cameras are fused into 3D
//! candidates ([`triangulate`]), candidates are gated against existing tracks
//! ([`gate`]), and a bounded set of global assignment hypotheses is extended
//! and re-ranked ([`hypothesis_step`]). [`MultiviewTracker::step`] drives the
//! whole cycle and commits the best hypothesis's track updates.

mod geometry;
mod hypothesis;

pub use geometry::{back_project, ray_distance, triangulate, Ray};
pub use hypothesis::{
    associate, bls_refine, hypothesis_step, MultiviewTracker, StepStats, TrackerHypothesis,
};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distortion-free pinhole camera. `rotation` maps world to camera frame;
/// the image spans `[0, 2 cx] x [0, 2 cy]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub id: usize,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl CameraModel {
    pub fn validate(&self) -> Result<()> {
        if self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "focal length",
                reason: format!("fx {}, fy {} must be positive", self.fx, self.fy),
            });
        }
        let gram = self.rotation.transpose() * self.rotation;
        if (gram - Matrix3::identity()).abs().max() > 1e-9 {
            return Err(Error::InvalidParameter {
                name: "rotation",
                reason: "not orthonormal to 1e-9".into(),
            });
        }
        if (self.rotation.determinant() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter {
                name: "rotation",
                reason: "determinant is not +1".into(),
            });
        }
        Ok(())
    }

    /// Camera center in the world frame.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }

    /// Project a world point; `None` when it lies at or behind the camera.
    /// Returns `(u, v, depth)`.
    pub fn project(&self, point: &Vector3<f64>) -> Option<(f64, f64, f64)> {
        let cam = self.rotation * point + self.translation;
        if cam.z <= 1e-6 {
            return None;
        }
        Some((
            self.fx * cam.x / cam.z + self.cx,
            self.fy * cam.y / cam.z + self.cy,
            cam.z,
        ))
    }

    pub fn image_width(&self) -> f64 {
        2.0 * self.cx
    }

    pub fn image_height(&self) -> f64 {
        2.0 * self.cy
    }
}

/// One detection window in one camera's image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub frame: u64,
    pub camera: usize,
    pub u: f64,
    pub v: f64,
    pub size: f64,
    pub score: f64,
}

impl Detection {
    pub fn validate(&self) -> Result<()> {
        if !(self.size > 0.0) {
            return Err(Error::InvalidParameter {
                name: "size",
                reason: format!("{} must be positive", self.size),
            });
        }
        if !(0.0..=1.0).contains(&self.score) {
            return Err(Error::InvalidParameter {
                name: "score",
                reason: format!("{} outside [0, 1]", self.score),
            });
        }
        Ok(())
    }
}

/// A detection backing a triangulated target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Support {
    pub camera: usize,
    /// Index into the frame's detection slice.
    pub detection: usize,
    pub size: f64,
}

/// A triangulated 3D candidate: fused position, estimated height, and the
/// per-camera detections that produced it (at most one per camera).
#[derive(Debug, Clone, PartialEq)]
pub struct Target3D {
    pub position: Vector3<f64>,
    pub height: f64,
    pub support: Vec<Support>,
}

impl Target3D {
    pub fn support_size(&self, camera: usize) -> Option<f64> {
        self.support
            .iter()
            .find(|s| s.camera == camera)
            .map(|s| s.size)
    }
}

/// One target's 3D trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: u64,
    pub states: Vec<(u64, Target3D)>,
    pub last_seen: u64,
    /// Finite-difference velocity over the last two states, m/s.
    pub velocity: Vector3<f64>,
}

impl Track {
    pub fn new(id: u64, frame: u64, target: Target3D) -> Self {
        Self {
            id,
            states: vec![(frame, target)],
            last_seen: frame,
            velocity: Vector3::zeros(),
        }
    }

    pub fn last_target(&self) -> &Target3D {
        &self.states.last().expect("track has at least one state").1
    }

    pub fn push_state(&mut self, frame: u64, target: Target3D, fps: f64) {
        let prev = self.states.last().map(|(f, t)| (*f, t.position));
        if let Some((pf, ppos)) = prev {
            let gap = (frame - pf) as f64;
            if gap > 0.0 {
                self.velocity = (target.position - ppos) * (fps / gap);
            }
        }
        self.states.push((frame, target));
        self.last_seen = frame;
    }
}

/// Tracking constants. Distances are meters, windows pixels, gaps frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerParams {
    /// Comparison interval for the static-point test, frames.
    pub l_c: u32,
    /// Static feature point threshold, meters.
    pub delta_min: f64,
    /// Maximum allowed 3D distance between continuous detections, meters
    /// (scaled by the frame gap).
    pub eps_phi: f64,
    /// Maximum allowed per-frame-gap height change, meters.
    pub eps_h: f64,
    /// Window-size change bound as a fraction of the previous size.
    pub omega_s_coeff: f64,
    /// Minimum 3D separation below which a collision penalty applies, meters.
    pub theta_s: f64,
    /// Maximum 3D distance between simultaneous detections fused into one
    /// target, meters.
    pub eps_3d: f64,
    /// Maximum target speed, m/s.
    pub v_max: f64,
    /// Maximum allowed frame gap on a track.
    pub delta_a: u32,
    /// Number of global hypotheses kept.
    pub k_h: usize,
    /// Per-hypothesis local-search budget, move evaluations per frame.
    pub i_bls_max: usize,
    /// Frame rate, Hz.
    pub fps: f64,
    /// Cost of leaving a track unassigned for one frame.
    pub c_miss: f64,
    /// Cost of opening a new track.
    pub c_birth: f64,
    /// Penalty per track pair closer than `theta_s`.
    pub c_coll: f64,
}

impl Default for TrackerParams {
    fn default() -> Self {
        Self {
            l_c: 4,
            delta_min: 0.05,
            eps_phi: 0.5,
            eps_h: 0.3,
            omega_s_coeff: 0.3,
            theta_s: 0.3,
            eps_3d: 2.5,
            v_max: 0.8,
            delta_a: 9,
            k_h: 10,
            i_bls_max: 1000,
            fps: 6.0,
            c_miss: 1.0,
            c_birth: 1.5,
            c_coll: 2.0,
        }
    }
}

impl TrackerParams {
    pub fn validate(&self) -> Result<()> {
        let positive: [(&'static str, f64); 10] = [
            ("delta_min", self.delta_min),
            ("eps_phi", self.eps_phi),
            ("eps_h", self.eps_h),
            ("omega_s_coeff", self.omega_s_coeff),
            ("theta_s", self.theta_s),
            ("eps_3d", self.eps_3d),
            ("v_max", self.v_max),
            ("fps", self.fps),
            ("c_miss", self.c_miss),
            ("c_birth", self.c_birth),
        ];
        for (name, value) in positive {
            if !(value > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("{value} must be positive"),
                });
            }
        }
        if self.c_coll < 0.0 {
            return Err(Error::InvalidParameter {
                name: "c_coll",
                reason: "must be nonnegative".into(),
            });
        }
        if self.l_c == 0 || self.delta_a == 0 {
            return Err(Error::InvalidParameter {
                name: "l_c/delta_a",
                reason: "frame constants must be at least 1".into(),
            });
        }
        if self.k_h == 0 {
            return Err(Error::InvalidParameter {
                name: "k_h",
                reason: "at least one hypothesis must be kept".into(),
            });
        }
        Ok(())
    }
}

/// One consistent set of track-candidate assignments for a frame.
///
/// `assignments[i]` pairs the i-th track of the slice the hypothesis was
/// built against with a candidate index, or records a miss. Unassigned
/// candidates open new tracks and are listed in `births`.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalHypothesis {
    pub assignments: Vec<Option<usize>>,
    pub births: Vec<usize>,
    pub score: f64,
}

impl GlobalHypothesis {
    /// Derive the (sorted) birth list from the assignment vector.
    pub fn births_from(assignments: &[Option<usize>], n_candidates: usize) -> Vec<usize> {
        let mut taken = vec![false; n_candidates];
        for a in assignments.iter().flatten() {
            taken[*a] = true;
        }
        (0..n_candidates).filter(|&c| !taken[c]).collect()
    }
}

/// Hard feasibility test for continuing `track` with `candidate` at `frame`.
///
/// All of: gap within `delta_a`; 3D displacement within `eps_phi` per frame
/// of gap; implied speed within `v_max`; height change within `eps_h` per
/// frame of gap; and, per camera seen by both, window-size change within
/// `omega_s_coeff` of the previous size.
pub fn gate(track: &Track, candidate: &Target3D, frame: u64, params: &TrackerParams) -> bool {
    if frame <= track.last_seen {
        return false;
    }
    let gap = (frame - track.last_seen) as f64;
    if frame - track.last_seen > params.delta_a as u64 {
        return false;
    }
    let last = track.last_target();
    let dist = (candidate.position - last.position).norm();
    if dist > params.eps_phi * gap {
        return false;
    }
    if dist / gap * params.fps > params.v_max {
        return false;
    }
    if (candidate.height - last.height).abs() > params.eps_h * gap {
        return false;
    }
    for s in &last.support {
        if let Some(new_size) = candidate.support_size(s.camera) {
            if (new_size - s.size).abs() > params.omega_s_coeff * s.size {
                return false;
            }
        }
    }
    true
}

/// Outcome of the static-point test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Motion {
    Static,
    Moving,
}

/// Classify a point as static when it moved less than `delta_min` between
/// the current position and the one `l_c` steps earlier.
pub fn classify_static(positions: &[Vector3<f64>], params: &TrackerParams) -> Result<Motion> {
    let needed = params.l_c as usize + 1;
    if positions.len() < needed {
        return Err(Error::InsufficientHistory {
            needed,
            got: positions.len(),
        });
    }
    let current = positions[positions.len() - 1];
    let past = positions[positions.len() - needed];
    if (current - past).norm() < params.delta_min {
        Ok(Motion::Static)
    } else {
        Ok(Motion::Moving)
    }
}

/// Full cost of an assignment set: matched 3D distances, plus `c_miss` per
/// miss, `c_birth` per birth, and `c_coll` per pair of post-assignment track
/// positions closer than `theta_s`.
pub fn cost_function(
    assignments: &[Option<usize>],
    births: &[usize],
    tracks: &[Track],
    candidates: &[Target3D],
    params: &TrackerParams,
) -> f64 {
    debug_assert_eq!(assignments.len(), tracks.len());
    let mut cost = 0.0;
    let mut effective: Vec<Vector3<f64>> = Vec::with_capacity(tracks.len() + births.len());
    for (track, assigned) in tracks.iter().zip(assignments) {
        match assigned {
            Some(c) => {
                cost += (candidates[*c].position - track.last_target().position).norm();
                effective.push(candidates[*c].position);
            }
            None => {
                cost += params.c_miss;
                effective.push(track.last_target().position);
            }
        }
    }
    for &b in births {
        cost += params.c_birth;
        effective.push(candidates[b].position);
    }
    for i in 0..effective.len() {
        for j in (i + 1)..effective.len() {
            if (effective[i] - effective[j]).norm() < params.theta_s {
                cost += params.c_coll;
            }
        }
    }
    cost
}
