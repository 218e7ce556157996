//! Global-hypothesis management: optimal assignment seeding, local-search
//! refinement, and the bounded multi-hypothesis frame step.
//!
//! Each kept hypothesis carries its own track continuation. Extending a
//! hypothesis enumerates assignment seeds in best-first pairwise-cost order
//! (Murty partitioning over the same solver that backs [`associate`]),
//! refines each seed with a collision-aware local search, and charges every
//! scored move against the per-hypothesis `i_bls_max` budget. Children from
//! all parents are ranked by cumulative score, deduplicated, and cut to
//! `k_h`.

use std::collections::BTreeMap;

use crate::assignment::{solve, Assignment, CostMatrix, MurtyStream, FORBIDDEN};
use crate::error::{Error, Result};
use crate::formats::TrackRecord;
use crate::tracker::{
    cost_function, gate, triangulate, CameraModel, Detection, GlobalHypothesis, Motion,
    Target3D, Track, TrackerParams,
};

const IMPROVEMENT_EPS: f64 = 1e-12;

/// Gating matrix plus the square assignment matrix over
/// `tracks + birth rows` x `candidates + miss columns`.
struct Problem {
    matrix: CostMatrix,
    gated: Vec<Vec<bool>>,
    n_tracks: usize,
    n_candidates: usize,
}

fn build_problem(
    tracks: &[Track],
    candidates: &[Target3D],
    frame: u64,
    params: &TrackerParams,
) -> Problem {
    let t = tracks.len();
    let c = candidates.len();
    let n = t + c;
    let mut matrix = CostMatrix::new(n);
    let mut gated = vec![vec![false; c]; t];
    for (i, track) in tracks.iter().enumerate() {
        for (j, cand) in candidates.iter().enumerate() {
            let ok = gate(track, cand, frame, params);
            gated[i][j] = ok;
            matrix.set(
                i,
                j,
                if ok {
                    (cand.position - track.last_target().position).norm()
                } else {
                    FORBIDDEN
                },
            );
        }
        for j in 0..t {
            matrix.set(i, c + j, if i == j { params.c_miss } else { FORBIDDEN });
        }
    }
    for i in 0..c {
        for j in 0..c {
            matrix.set(t + i, j, if i == j { params.c_birth } else { FORBIDDEN });
        }
        // Birth row paired with a miss column means the candidate is matched
        // elsewhere; free, and not meaningful for enumeration.
        for j in 0..t {
            matrix.set(t + i, c + j, 0.0);
        }
    }
    Problem {
        matrix,
        gated,
        n_tracks: t,
        n_candidates: c,
    }
}

fn decode(
    solution: &Assignment,
    problem: &Problem,
    tracks: &[Track],
    candidates: &[Target3D],
    params: &TrackerParams,
) -> GlobalHypothesis {
    let mut assignments = vec![None; problem.n_tracks];
    for (i, slot) in assignments.iter_mut().enumerate() {
        let col = solution.row_to_col[i];
        if col < problem.n_candidates {
            *slot = Some(col);
        }
    }
    let births = GlobalHypothesis::births_from(&assignments, problem.n_candidates);
    let score = cost_function(&assignments, &births, tracks, candidates, params);
    GlobalHypothesis {
        assignments,
        births,
        score,
    }
}

/// Minimum-cost assignment over gated track-candidate pairs, with misses and
/// births priced per the cost function. Optimal for the pairwise terms; the
/// collision term is left to [`bls_refine`].
pub fn associate(
    tracks: &[Track],
    candidates: &[Target3D],
    frame: u64,
    params: &TrackerParams,
) -> GlobalHypothesis {
    let problem = build_problem(tracks, candidates, frame, params);
    let solution = solve(&problem.matrix);
    decode(&solution, &problem, tracks, candidates, params)
}

/// One scored local-search move.
enum Move {
    /// Exchange the assignments of two tracks.
    Swap(usize, usize),
    /// Drop a track's candidate (miss + birth).
    Unassign(usize),
    /// Assign a currently unassigned candidate to a track.
    Merge(usize, usize),
}

fn apply_move(assignments: &[Option<usize>], mv: &Move) -> Vec<Option<usize>> {
    let mut next = assignments.to_vec();
    match *mv {
        Move::Swap(i, j) => next.swap(i, j),
        Move::Unassign(i) => next[i] = None,
        Move::Merge(i, b) => next[i] = Some(b),
    }
    next
}

fn move_is_gated(assignments: &[Option<usize>], mv: &Move, gated: &[Vec<bool>]) -> bool {
    match *mv {
        Move::Swap(i, j) => {
            let a_i = assignments[i];
            let a_j = assignments[j];
            if a_i == a_j {
                return false;
            }
            a_j.map_or(true, |c| gated[i][c]) && a_i.map_or(true, |c| gated[j][c])
        }
        Move::Unassign(i) => assignments[i].is_some(),
        Move::Merge(i, b) => gated[i][b],
    }
}

/// Best-improving local search over swap / unassign / merge moves, scored
/// with the full cost function (collision terms included). Stops at a local
/// optimum or after `budget` scored moves. Never increases the score.
fn bls_refine_budgeted(
    hypothesis: &GlobalHypothesis,
    tracks: &[Track],
    candidates: &[Target3D],
    gated: &[Vec<bool>],
    params: &TrackerParams,
    budget: usize,
) -> (GlobalHypothesis, usize) {
    let mut current = hypothesis.clone();
    let mut used = 0usize;

    while used < budget {
        let mut best: Option<(f64, Vec<Option<usize>>)> = None;
        let mut scan_complete = true;

        let unassigned = GlobalHypothesis::births_from(&current.assignments, candidates.len());
        let mut moves: Vec<Move> = Vec::new();
        for i in 0..tracks.len() {
            for j in (i + 1)..tracks.len() {
                moves.push(Move::Swap(i, j));
            }
        }
        for i in 0..tracks.len() {
            moves.push(Move::Unassign(i));
        }
        for &b in &unassigned {
            for i in 0..tracks.len() {
                moves.push(Move::Merge(i, b));
            }
        }

        for mv in &moves {
            if !move_is_gated(&current.assignments, mv, gated) {
                continue;
            }
            if used >= budget {
                scan_complete = false;
                break;
            }
            let next = apply_move(&current.assignments, mv);
            let births = GlobalHypothesis::births_from(&next, candidates.len());
            let score = cost_function(&next, &births, tracks, candidates, params);
            used += 1;
            if score < current.score - IMPROVEMENT_EPS
                && best.as_ref().map_or(true, |(s, _)| score < *s)
            {
                best = Some((score, next));
            }
        }

        match best {
            Some((score, assignments)) => {
                let births = GlobalHypothesis::births_from(&assignments, candidates.len());
                current = GlobalHypothesis {
                    assignments,
                    births,
                    score,
                };
            }
            None => {
                if scan_complete {
                    break; // local optimum
                }
            }
        }
    }
    (current, used)
}

/// Refine a hypothesis with up to `params.i_bls_max` scored moves.
pub fn bls_refine(
    hypothesis: &GlobalHypothesis,
    tracks: &[Track],
    candidates: &[Target3D],
    frame: u64,
    params: &TrackerParams,
) -> GlobalHypothesis {
    let gated: Vec<Vec<bool>> = tracks
        .iter()
        .map(|t| {
            candidates
                .iter()
                .map(|c| gate(t, c, frame, params))
                .collect()
        })
        .collect();
    bls_refine_budgeted(hypothesis, tracks, candidates, &gated, params, params.i_bls_max).0
}

/// One cross-frame tracking hypothesis: a track continuation, the id counter
/// it owns, and the accumulated assignment cost that ranks it.
#[derive(Debug, Clone)]
pub struct TrackerHypothesis {
    pub tracks: Vec<Track>,
    pub next_track_id: u64,
    pub cumulative_score: f64,
    /// Assignment record of the most recent extension.
    pub last: GlobalHypothesis,
}

impl TrackerHypothesis {
    pub fn empty() -> Self {
        Self {
            tracks: Vec::new(),
            next_track_id: 0,
            cumulative_score: 0.0,
            last: GlobalHypothesis {
                assignments: Vec::new(),
                births: Vec::new(),
                score: 0.0,
            },
        }
    }

    fn extend(
        &self,
        frame_hypothesis: GlobalHypothesis,
        candidates: &[Target3D],
        frame: u64,
        params: &TrackerParams,
    ) -> TrackerHypothesis {
        let mut tracks = self.tracks.clone();
        for (track, assigned) in tracks.iter_mut().zip(&frame_hypothesis.assignments) {
            if let Some(c) = assigned {
                track.push_state(frame, candidates[*c].clone(), params.fps);
            }
        }
        let mut next_track_id = self.next_track_id;
        for &b in &frame_hypothesis.births {
            tracks.push(Track::new(next_track_id, frame, candidates[b].clone()));
            next_track_id += 1;
        }
        TrackerHypothesis {
            tracks,
            next_track_id,
            cumulative_score: self.cumulative_score + frame_hypothesis.score,
            last: frame_hypothesis,
        }
    }

    /// Bit-exact content key: two hypotheses with equal fingerprints have
    /// identical track continuations and evolve identically.
    fn fingerprint(&self) -> Vec<u64> {
        let mut key = Vec::with_capacity(self.tracks.len() * 8);
        for track in &self.tracks {
            key.push(track.id);
            key.push(track.last_seen);
            key.push(track.states.len() as u64);
            for (frame, target) in &track.states {
                key.push(*frame);
                key.push(target.position.x.to_bits());
                key.push(target.position.y.to_bits());
                key.push(target.position.z.to_bits());
                key.push(target.height.to_bits());
            }
        }
        key
    }
}

/// Extend every parent hypothesis with this frame's candidates and keep the
/// `k_h` best children.
///
/// Per parent: assignment seeds come from best-first enumeration; each seed
/// is refined by [`bls_refine`]-style local search; seed generation stops
/// when the parent's `i_bls_max` move-evaluation budget is spent. Children
/// are ranked by cumulative score; children with bit-identical track content
/// are collapsed (lowest score wins).
pub fn hypothesis_step(
    parents: &[TrackerHypothesis],
    candidates: &[Target3D],
    frame: u64,
    params: &TrackerParams,
) -> (Vec<TrackerHypothesis>, u64) {
    let mut children: Vec<TrackerHypothesis> = Vec::new();
    let mut total_evals = 0u64;

    for parent in parents {
        let problem = build_problem(&parent.tracks, candidates, frame, params);
        let n_tracks = problem.n_tracks;
        // Track rows always matter; a birth row matters only when paired
        // with its own candidate column (an actual birth).
        let meaningful =
            move |row: usize, col: usize| row < n_tracks || col == row - n_tracks;
        let stream = MurtyStream::new(problem.matrix.clone(), meaningful);

        let mut budget = params.i_bls_max;
        for solution in stream {
            let seed = decode(&solution, &problem, &parent.tracks, candidates, params);
            let (refined, used) = bls_refine_budgeted(
                &seed,
                &parent.tracks,
                candidates,
                &problem.gated,
                params,
                budget,
            );
            budget -= used;
            total_evals += used as u64;
            // The raw seed preserves the enumeration's diversity; its
            // refinement may collapse onto another seed's optimum.
            if refined.assignments != seed.assignments {
                children.push(parent.extend(refined, candidates, frame, params));
            }
            children.push(parent.extend(seed, candidates, frame, params));
            if budget == 0 {
                break;
            }
        }
    }

    // Collapse duplicates (identical track content), rank, and cut to k_h.
    let mut by_key: BTreeMap<Vec<u64>, TrackerHypothesis> = BTreeMap::new();
    for child in children {
        let key = child.fingerprint();
        match by_key.get(&key) {
            Some(existing) if existing.cumulative_score <= child.cumulative_score => {}
            _ => {
                by_key.insert(key, child);
            }
        }
    }
    let mut ranked: Vec<(Vec<u64>, TrackerHypothesis)> = by_key.into_iter().collect();
    ranked.sort_by(|a, b| {
        a.1.cumulative_score
            .total_cmp(&b.1.cumulative_score)
            .then_with(|| a.0.cmp(&b.0))
    });
    let survivors = ranked
        .into_iter()
        .take(params.k_h)
        .map(|(_, h)| h)
        .collect();
    (survivors, total_evals)
}

/// Per-step diagnostics.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepStats {
    pub move_evaluations: u64,
    pub candidates: usize,
    pub hypotheses: usize,
}

/// The online tracker: owns the camera rig, the hypothesis set, and the
/// frame cursor.
#[derive(Debug, Clone)]
pub struct MultiviewTracker {
    params: TrackerParams,
    cameras: Vec<CameraModel>,
    hypotheses: Vec<TrackerHypothesis>,
    last_frame: Option<u64>,
    last_stats: StepStats,
}

impl MultiviewTracker {
    pub fn new(cameras: Vec<CameraModel>, params: TrackerParams) -> Result<Self> {
        params.validate()?;
        for cam in &cameras {
            cam.validate()?;
        }
        Ok(Self {
            params,
            cameras,
            hypotheses: vec![TrackerHypothesis::empty()],
            last_frame: None,
            last_stats: StepStats::default(),
        })
    }

    pub fn params(&self) -> &TrackerParams {
        &self.params
    }

    pub fn hypotheses(&self) -> &[TrackerHypothesis] {
        &self.hypotheses
    }

    pub fn best_hypothesis(&self) -> &TrackerHypothesis {
        &self.hypotheses[0]
    }

    pub fn last_stats(&self) -> StepStats {
        self.last_stats
    }

    /// Advance one frame: triangulate, extend the hypothesis set, terminate
    /// stale tracks, and emit the best hypothesis's current track records
    /// (static points excluded).
    pub fn step(&mut self, frame: u64, detections: &[Detection]) -> Result<Vec<TrackRecord>> {
        if let Some(last) = self.last_frame {
            if frame <= last {
                return Err(Error::FrameRegression {
                    last,
                    current: frame,
                });
            }
        }
        for det in detections {
            if det.frame != frame {
                return Err(Error::FrameMismatch {
                    expected: frame,
                    found: det.frame,
                });
            }
        }

        let candidates = match triangulate(detections, &self.cameras, &self.params) {
            Ok(c) => c,
            Err(Error::InsufficientCameras { found }) => {
                if !detections.is_empty() {
                    log::warn!("frame {frame}: only {found} camera(s) present, no candidates");
                }
                Vec::new()
            }
            Err(other) => return Err(other),
        };

        let (mut hypotheses, evals) =
            hypothesis_step(&self.hypotheses, &candidates, frame, &self.params);
        for hyp in &mut hypotheses {
            hyp.tracks
                .retain(|t| frame - t.last_seen <= self.params.delta_a as u64);
        }
        self.hypotheses = hypotheses;
        self.last_frame = Some(frame);
        self.last_stats = StepStats {
            move_evaluations: evals,
            candidates: candidates.len(),
            hypotheses: self.hypotheses.len(),
        };

        let best = &self.hypotheses[0];
        let mut records = Vec::new();
        for track in &best.tracks {
            if track.last_seen != frame {
                continue;
            }
            let needed = self.params.l_c as usize + 1;
            if track.states.len() >= needed {
                let positions: Vec<_> = track
                    .states
                    .iter()
                    .rev()
                    .take(needed)
                    .rev()
                    .map(|(_, t)| t.position)
                    .collect();
                if classify_static_ok(&positions, &self.params) {
                    continue;
                }
            }
            let p = track.last_target().position;
            records.push(TrackRecord {
                frame,
                id: track.id,
                x: p.x,
                y: p.y,
                z: p.z,
            });
        }
        records.sort_by_key(|r| r.id);
        Ok(records)
    }
}

fn classify_static_ok(positions: &[nalgebra::Vector3<f64>], params: &TrackerParams) -> bool {
    matches!(
        crate::tracker::classify_static(positions, params),
        Ok(Motion::Static)
    )
}
