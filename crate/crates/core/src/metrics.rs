//! CLEAR-MOT evaluation: per-frame matching with persistence and the
//! aggregate MOTA/MOTP report.

use std::collections::BTreeMap;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::assignment::{solve, CostMatrix, FORBIDDEN};
use crate::error::{Error, Result};
use crate::formats::TrackRecord;

/// Events of one evaluated frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameEvents {
    /// `(truth_id, track_id, distance)` for every matched pair.
    pub matches: Vec<(u64, u64, f64)>,
    pub misses: usize,
    pub false_positives: usize,
    pub id_switches: usize,
}

/// Per-frame events plus running totals.
#[derive(Debug, Clone, Default)]
pub struct MotEvents {
    pub frames: Vec<(u64, FrameEvents)>,
    pub total_matches: usize,
    pub total_misses: usize,
    pub total_false_positives: usize,
    pub total_id_switches: usize,
    pub total_truth: usize,
    pub total_distance: f64,
}

/// Aggregate CLEAR-MOT report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotReport {
    pub mota: f64,
    pub motp: f64,
    pub matches: usize,
    pub misses: usize,
    pub false_positives: usize,
    pub id_switches: usize,
    pub total_truth: usize,
    pub match_threshold: f64,
}

/// Match one frame's truth and hypothesis positions.
///
/// Pairings from `previous` (truth id -> track id) persist when both ends
/// are present and still within `threshold`; the remainder is matched by
/// minimum-cost assignment under the threshold. A truth object matched to a
/// different track id than its last match counts one identity switch.
/// `previous` is updated in place.
pub fn match_frame(
    truth: &[(u64, Vector3<f64>)],
    tracks: &[(u64, Vector3<f64>)],
    previous: &mut BTreeMap<u64, u64>,
    threshold: f64,
) -> FrameEvents {
    let mut events = FrameEvents::default();
    let track_index: BTreeMap<u64, usize> =
        tracks.iter().enumerate().map(|(i, (id, _))| (*id, i)).collect();

    let mut truth_matched = vec![false; truth.len()];
    let mut track_matched = vec![false; tracks.len()];

    // Keep persistent pairings that are still valid.
    for (ti, (truth_id, tpos)) in truth.iter().enumerate() {
        if let Some(track_id) = previous.get(truth_id) {
            if let Some(&hi) = track_index.get(track_id) {
                let dist = (tpos - tracks[hi].1).norm();
                if dist <= threshold && !track_matched[hi] {
                    truth_matched[ti] = true;
                    track_matched[hi] = true;
                    events.matches.push((*truth_id, *track_id, dist));
                }
            }
        }
    }

    // Optimal assignment over the remainder. Every row keeps a feasible
    // "stay unmatched" column priced at the threshold, so no row is ever
    // forced through a forbidden entry.
    let free_truth: Vec<usize> = (0..truth.len()).filter(|&i| !truth_matched[i]).collect();
    let free_tracks: Vec<usize> = (0..tracks.len()).filter(|&i| !track_matched[i]).collect();
    if !free_truth.is_empty() && !free_tracks.is_empty() {
        let nt = free_truth.len();
        let nh = free_tracks.len();
        let n = nt + nh;
        let mut matrix = CostMatrix::new(n);
        for r in 0..n {
            for c in 0..n {
                let cost = match (r < nt, c < nh) {
                    (true, true) => {
                        let d = (truth[free_truth[r]].1 - tracks[free_tracks[c]].1).norm();
                        if d <= threshold {
                            d
                        } else {
                            FORBIDDEN
                        }
                    }
                    (true, false) => {
                        if c - nh == r {
                            threshold
                        } else {
                            FORBIDDEN
                        }
                    }
                    (false, true) => {
                        if r - nt == c {
                            threshold
                        } else {
                            FORBIDDEN
                        }
                    }
                    (false, false) => 0.0,
                };
                matrix.set(r, c, cost);
            }
        }
        let solution = solve(&matrix);
        for (r, &c) in solution.row_to_col.iter().enumerate() {
            if r >= nt || c >= nh {
                continue;
            }
            let (ti, hi) = (free_truth[r], free_tracks[c]);
            let d = (truth[ti].1 - tracks[hi].1).norm();
            if d > threshold {
                continue;
            }
            let truth_id = truth[ti].0;
            let track_id = tracks[hi].0;
            if let Some(&prev_track) = previous.get(&truth_id) {
                if prev_track != track_id {
                    events.id_switches += 1;
                }
            }
            truth_matched[ti] = true;
            track_matched[hi] = true;
            events.matches.push((truth_id, track_id, d));
        }
    }

    for (truth_id, track_id, _) in &events.matches {
        previous.insert(*truth_id, *track_id);
    }
    events.matches.sort_by_key(|(t, _, _)| *t);
    events.misses = truth_matched.iter().filter(|m| !**m).count();
    events.false_positives = track_matched.iter().filter(|m| !**m).count();
    events
}

/// Fold [`match_frame`] over all frames shared by the two record sets.
///
/// Frames are taken from the union of frame indices within the overlap of
/// the two frame ranges; `truth` must be nonempty.
pub fn evaluate(
    truth: &[TrackRecord],
    tracks: &[TrackRecord],
    threshold: f64,
) -> Result<MotReport> {
    if truth.is_empty() {
        return Err(Error::EmptyGroundTruth);
    }
    if !(threshold > 0.0) {
        return Err(Error::InvalidParameter {
            name: "threshold",
            reason: format!("{threshold} must be positive"),
        });
    }
    let events = accumulate(truth, tracks, threshold);
    let mota = 1.0
        - (events.total_misses + events.total_false_positives + events.total_id_switches) as f64
            / events.total_truth as f64;
    let motp = if events.total_matches > 0 {
        events.total_distance / events.total_matches as f64
    } else {
        0.0
    };
    Ok(MotReport {
        mota,
        motp,
        matches: events.total_matches,
        misses: events.total_misses,
        false_positives: events.total_false_positives,
        id_switches: events.total_id_switches,
        total_truth: events.total_truth,
        match_threshold: threshold,
    })
}

/// Per-frame event accumulation behind [`evaluate`].
pub fn accumulate(truth: &[TrackRecord], tracks: &[TrackRecord], threshold: f64) -> MotEvents {
    let mut truth_by_frame: BTreeMap<u64, Vec<(u64, Vector3<f64>)>> = BTreeMap::new();
    for r in truth {
        truth_by_frame
            .entry(r.frame)
            .or_default()
            .push((r.id, Vector3::new(r.x, r.y, r.z)));
    }
    let mut tracks_by_frame: BTreeMap<u64, Vec<(u64, Vector3<f64>)>> = BTreeMap::new();
    for r in tracks {
        tracks_by_frame
            .entry(r.frame)
            .or_default()
            .push((r.id, Vector3::new(r.x, r.y, r.z)));
    }

    let mut events = MotEvents::default();
    let mut previous = BTreeMap::new();
    let empty = Vec::new();
    let frames: Vec<u64> = truth_by_frame
        .keys()
        .chain(tracks_by_frame.keys())
        .copied()
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    for frame in frames {
        let t = truth_by_frame.get(&frame).unwrap_or(&empty);
        let h = tracks_by_frame.get(&frame).unwrap_or(&empty);
        let fe = match_frame(t, h, &mut previous, threshold);
        events.total_matches += fe.matches.len();
        events.total_misses += fe.misses;
        events.total_false_positives += fe.false_positives;
        events.total_id_switches += fe.id_switches;
        events.total_truth += t.len();
        events.total_distance += fe.matches.iter().map(|(_, _, d)| d).sum::<f64>();
        events.frames.push((frame, fe));
    }
    events
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(frame: u64, id: u64, x: f64, y: f64) -> TrackRecord {
        TrackRecord {
            frame,
            id,
            x,
            y,
            z: 0.0,
        }
    }

    #[test]
    fn identical_sets_all_match() {
        let mut prev = BTreeMap::new();
        let pts = vec![
            (0u64, Vector3::new(0.0, 0.0, 0.0)),
            (1u64, Vector3::new(5.0, 0.0, 0.0)),
        ];
        let fe = match_frame(&pts, &pts, &mut prev, 1.0);
        assert_eq!(fe.matches.len(), 2);
        assert_eq!(fe.misses, 0);
        assert_eq!(fe.false_positives, 0);
        assert!(fe.matches.iter().all(|(_, _, d)| *d == 0.0));
    }

    #[test]
    fn empty_hypotheses_all_miss() {
        let mut prev = BTreeMap::new();
        let pts = vec![(0u64, Vector3::zeros()), (1u64, Vector3::new(1.0, 1.0, 0.0))];
        let fe = match_frame(&pts, &[], &mut prev, 1.0);
        assert_eq!(fe.misses, 2);
        assert_eq!(fe.matches.len(), 0);
    }

    #[test]
    fn matching_equals_brute_force_3x3() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let truth: Vec<(u64, Vector3<f64>)> = (0..3)
                .map(|i| {
                    (
                        i,
                        Vector3::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), 0.0),
                    )
                })
                .collect();
            let tracks: Vec<(u64, Vector3<f64>)> = (0..3)
                .map(|i| {
                    (
                        i + 10,
                        Vector3::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), 0.0),
                    )
                })
                .collect();
            let threshold = 2.0;
            let mut prev = BTreeMap::new();
            let fe = match_frame(&truth, &tracks, &mut prev, threshold);
            let got: f64 = fe.matches.iter().map(|(_, _, d)| d).sum::<f64>()
                + (fe.misses + fe.false_positives) as f64 * 10.0;

            // Exhaustive over all one-to-one pairings.
            let mut best = f64::INFINITY;
            let perms = [
                [0, 1, 2],
                [0, 2, 1],
                [1, 0, 2],
                [1, 2, 0],
                [2, 0, 1],
                [2, 1, 0],
            ];
            for perm in perms {
                // Each truth i pairs with tracks[perm[i]] or stays unmatched
                // when over threshold.
                for mask in 0..8u32 {
                    let mut cost = 0.0;
                    let mut unmatched = 0;
                    let mut ok = true;
                    for i in 0..3 {
                        if mask & (1 << i) != 0 {
                            let d = (truth[i].1 - tracks[perm[i]].1).norm();
                            if d > threshold {
                                ok = false;
                                break;
                            }
                            cost += d;
                        } else {
                            unmatched += 1;
                        }
                    }
                    if ok {
                        best = best.min(cost + (unmatched * 2) as f64 * 10.0);
                    }
                }
            }
            assert!(
                (got - best).abs() < 1e-9,
                "match_frame found {got}, exhaustive found {best}"
            );
        }
    }

    #[test]
    fn persistence_prevents_spurious_switches() {
        // Two truths, two tracks drifting slightly; the pairing from frame 1
        // must persist in frame 2 even when a fresh optimal assignment would
        // also be valid.
        let mut prev = BTreeMap::new();
        let t1 = vec![
            (0u64, Vector3::new(0.0, 0.0, 0.0)),
            (1u64, Vector3::new(1.0, 0.0, 0.0)),
        ];
        let h1 = vec![
            (100u64, Vector3::new(0.05, 0.0, 0.0)),
            (101u64, Vector3::new(0.95, 0.0, 0.0)),
        ];
        let fe = match_frame(&t1, &h1, &mut prev, 1.0);
        assert_eq!(fe.id_switches, 0);
        assert_eq!(prev[&0], 100);
        assert_eq!(prev[&1], 101);

        // Both tracks now sit between the truths; persistence keeps 0-100.
        let t2 = t1.clone();
        let h2 = vec![
            (100u64, Vector3::new(0.45, 0.0, 0.0)),
            (101u64, Vector3::new(0.55, 0.0, 0.0)),
        ];
        let fe = match_frame(&t2, &h2, &mut prev, 1.0);
        assert_eq!(fe.id_switches, 0);
        assert_eq!(prev[&0], 100);
        assert_eq!(prev[&1], 101);
    }

    #[test]
    fn engineered_swap_costs_one_sixth() {
        // 2 targets x 3 frames; one target changes track id at frame 2:
        // MOTA = 1 - 1/6.
        let truth = vec![
            rec(0, 0, 0.0, 0.0),
            rec(0, 1, 5.0, 0.0),
            rec(1, 0, 0.1, 0.0),
            rec(1, 1, 5.1, 0.0),
            rec(2, 0, 0.2, 0.0),
            rec(2, 1, 5.2, 0.0),
        ];
        let tracks = vec![
            rec(0, 10, 0.0, 0.0),
            rec(0, 11, 5.0, 0.0),
            rec(1, 10, 0.1, 0.0),
            rec(1, 11, 5.1, 0.0),
            rec(2, 12, 0.2, 0.0), // id change on target 0
            rec(2, 11, 5.2, 0.0),
        ];
        let report = evaluate(&truth, &tracks, 1.0).unwrap();
        assert_eq!(report.id_switches, 1);
        assert_eq!(report.misses, 0);
        assert_eq!(report.false_positives, 0);
        assert!((report.mota - (1.0 - 1.0 / 6.0)).abs() < 1e-12);
        assert!((report.motp - 0.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_tracking_scores_one() {
        let truth = vec![rec(0, 0, 0.0, 0.0), rec(1, 0, 0.1, 0.0)];
        let tracks = vec![rec(0, 7, 0.0, 0.0), rec(1, 7, 0.1, 0.0)];
        let report = evaluate(&truth, &tracks, 1.0).unwrap();
        assert_eq!(report.mota, 1.0);
        assert_eq!(report.motp, 0.0);
    }

    #[test]
    fn no_tracks_scores_zero() {
        let truth = vec![rec(0, 0, 0.0, 0.0), rec(1, 0, 0.1, 0.0)];
        let report = evaluate(&truth, &[], 1.0).unwrap();
        assert_eq!(report.mota, 0.0);
        assert_eq!(report.misses, 2);
    }

    #[test]
    fn empty_truth_is_an_error() {
        assert!(matches!(
            evaluate(&[], &[rec(0, 0, 0.0, 0.0)], 1.0),
            Err(Error::EmptyGroundTruth)
        ));
    }

    #[test]
    fn relabeling_preserves_mota() {
        let truth: Vec<TrackRecord> = (0..10)
            .flat_map(|f| (0..3).map(move |i| rec(f, i, i as f64 * 3.0 + f as f64 * 0.05, 0.0)))
            .collect();
        let tracks: Vec<TrackRecord> = truth
            .iter()
            .map(|r| TrackRecord {
                id: r.id + 50,
                ..*r
            })
            .collect();
        let relabeled: Vec<TrackRecord> = tracks
            .iter()
            .map(|r| TrackRecord {
                id: 1000 - r.id,
                ..*r
            })
            .collect();
        let a = evaluate(&truth, &tracks, 1.0).unwrap();
        let b = evaluate(&truth, &relabeled, 1.0).unwrap();
        assert_eq!(a.mota, b.mota);
        assert_eq!(a.id_switches, b.id_switches);
    }

    #[test]
    fn clutter_tracks_never_raise_mota() {
        let truth: Vec<TrackRecord> = (0..5).map(|f| rec(f, 0, f as f64 * 0.1, 0.0)).collect();
        let clean: Vec<TrackRecord> = (0..5).map(|f| rec(f, 9, f as f64 * 0.1, 0.0)).collect();
        let mut cluttered = clean.clone();
        cluttered.push(rec(2, 77, 50.0, 50.0));
        cluttered.push(rec(3, 78, 60.0, 60.0));
        let a = evaluate(&truth, &clean, 1.0).unwrap();
        let b = evaluate(&truth, &cluttered, 1.0).unwrap();
        assert!(b.mota <= a.mota);

        let mut fewer = clean.clone();
        fewer.remove(2);
        let c = evaluate(&truth, &fewer, 1.0).unwrap();
        assert!(c.mota <= a.mota);
    }
}
