//! Combining what several APs see of the same scene.
//!
//! All positions here are in the common room frame; AP-local estimates are
//! mapped there with the AP's [`ApRegistration`] beforehand.

use pathfinding::kuhn_munkres::kuhn_munkres;
use pathfinding::matrix::Matrix;
use serde::{Deserialize, Serialize};

use crate::scenesim::ApPose;
use crate::{Error, Result};

/// Known extrinsics of one AP.
pub type ApRegistration = ApPose;

/// Default cap on the distance between two tracks paired across APs, m.
pub const PAIRING_RADIUS: f64 = 0.75;

/// A ground-truth subject counts as detected within this distance, m.
pub const DETECTION_RADIUS: f64 = 0.5;

/// Ids must be unique and no two APs may share a pose.
pub fn validate_registrations(aps: &[ApRegistration]) -> Result<()> {
    if aps.is_empty() {
        return Err(Error::invalid("at least one AP registration is required"));
    }
    for (i, a) in aps.iter().enumerate() {
        for b in &aps[..i] {
            if a.id == b.id {
                return Err(Error::invalid(format!("duplicate AP id {}", a.id)));
            }
            if a.position == b.position && a.boresight_deg == b.boresight_deg {
                return Err(Error::invalid(format!(
                    "APs {} and {} share a pose",
                    b.id, a.id
                )));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusedDecision {
    pub label: usize,
    pub confidence: f64,
    pub source_ap: u32,
}

/// The single largest class probability over all APs decides. Ties go to
/// the smaller AP id, then to the smaller label.
pub fn fuse_decisions(per_ap: &[(u32, Vec<f64>)]) -> Result<FusedDecision> {
    let Some((_, first)) = per_ap.first() else {
        return Err(Error::invalid("no classifier outputs to fuse"));
    };
    if first.is_empty() {
        return Err(Error::invalid("probability vectors must be nonempty"));
    }
    let mut best: Option<FusedDecision> = None;
    for (ap, probs) in per_ap {
        if probs.len() != first.len() {
            return Err(Error::invalid(
                "probability vectors must all have the same length",
            ));
        }
        if let Some(bad) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::invalid(format!("probability {bad} outside [0, 1]")));
        }
        for (label, &p) in probs.iter().enumerate() {
            let better = match best {
                None => true,
                Some(b) => {
                    p > b.confidence
                        || (p == b.confidence
                            && (*ap, label) < (b.source_ap, b.label))
                }
            };
            if better {
                best = Some(FusedDecision {
                    label,
                    confidence: p,
                    source_ap: *ap,
                });
            }
        }
    }
    Ok(best.expect("at least one entry"))
}

/// Arithmetic mean of the estimates.
pub fn fuse_positions(estimates: &[[f64; 2]]) -> Result<[f64; 2]> {
    if estimates.is_empty() {
        return Err(Error::invalid("no position estimates to fuse"));
    }
    let n = estimates.len() as f64;
    let sum = estimates
        .iter()
        .fold([0.0, 0.0], |a, p| [a[0] + p[0], a[1] + p[1]]);
    Ok([sum[0] / n, sum[1] / n])
}

/// Tracks of two APs that refer to the same subject.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Pairing {
    /// (id in `a`, id in `b`), ordered by the id in `a`.
    pub pairs: Vec<(u32, u32)>,
    pub only_a: Vec<u32>,
    pub only_b: Vec<u32>,
}

fn dist(p: [f64; 2], q: [f64; 2]) -> f64 {
    (p[0] - q[0]).hypot(p[1] - q[1])
}

/// Pairs tracks `(id, position)` across two APs.
///
/// Among the pairings whose pairs all lie within `radius`, the one with the
/// most pairs wins, and among those the one with the smallest total
/// distance. Distances are compared on a nanometre grid.
pub fn cross_ap_match(a: &[(u32, [f64; 2])], b: &[(u32, [f64; 2])], radius: f64) -> Pairing {
    let (rows, cols, flipped) = if a.len() <= b.len() {
        (a, b, false)
    } else {
        (b, a, true)
    };
    let mut out = Pairing::default();
    if !rows.is_empty() {
        // Each pair is worth more than any total distance, so cardinality
        // dominates and the distance only breaks ties.
        const SCALE: f64 = 1e9;
        let cap = (radius * SCALE).round() as i64;
        let bonus = (rows.len() as i64 + 1) * (cap + 1);
        let weights = rows
            .iter()
            .flat_map(|(_, p)| {
                cols.iter().map(move |(_, q)| {
                    let d = (dist(*p, *q) * SCALE).round() as i64;
                    if d <= cap {
                        bonus - d
                    } else {
                        0
                    }
                })
            })
            .collect::<Vec<_>>();
        let m = Matrix::from_vec(rows.len(), cols.len(), weights).expect("shape");
        let (_, assign) = kuhn_munkres(&m);
        for (r, &c) in assign.iter().enumerate() {
            if dist(rows[r].1, cols[c].1) <= radius {
                let (ia, ib) = if flipped {
                    (cols[c].0, rows[r].0)
                } else {
                    (rows[r].0, cols[c].0)
                };
                out.pairs.push((ia, ib));
            }
        }
    }
    out.pairs.sort_unstable();
    out.only_a = a
        .iter()
        .map(|t| t.0)
        .filter(|id| !out.pairs.iter().any(|p| p.0 == *id))
        .collect();
    out.only_b = b
        .iter()
        .map(|t| t.0)
        .filter(|id| !out.pairs.iter().any(|p| p.1 == *id))
        .collect();
    out
}

/// A subject as seen by one or more APs.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedTrack {
    /// Mean of the member positions.
    pub position: [f64; 2],
    /// (AP id, track id) of the contributing tracks, in AP order.
    pub members: Vec<(u32, u32)>,
}

/// Merges per-AP track sets `(ap id, [(track id, room position)])` into one
/// subject list. APs are folded in the given order: each new AP's tracks
/// are paired against the subjects found so far.
pub fn fuse_track_sets(sets: &[(u32, Vec<(u32, [f64; 2])>)], radius: f64) -> Vec<FusedTrack> {
    let mut fused: Vec<FusedTrack> = Vec::new();
    for (ap, tracks) in sets {
        let current: Vec<(u32, [f64; 2])> = fused
            .iter()
            .enumerate()
            .map(|(i, f)| (i as u32, f.position))
            .collect();
        let pairing = cross_ap_match(&current, tracks, radius);
        for &(i, tid) in &pairing.pairs {
            fused[i as usize].members.push((*ap, tid));
        }
        for tid in &pairing.only_b {
            fused.push(FusedTrack {
                position: [0.0, 0.0],
                members: vec![(*ap, *tid)],
            });
        }
        // Recompute means from the members.
        for f in &mut fused {
            let pts: Vec<[f64; 2]> = f
                .members
                .iter()
                .map(|(a, t)| lookup(sets, *a, *t))
                .collect();
            f.position = fuse_positions(&pts).expect("members are nonempty");
        }
    }
    fused
}

fn lookup(sets: &[(u32, Vec<(u32, [f64; 2])>)], ap: u32, track: u32) -> [f64; 2] {
    sets.iter()
        .find(|(a, _)| *a == ap)
        .and_then(|(_, ts)| ts.iter().find(|(id, _)| *id == track))
        .map(|(_, p)| *p)
        .expect("member comes from the input")
}

/// Detected subject-steps over all subject-steps.
///
/// `tracks[t]` are the confirmed track positions at step `t` (the union
/// over APs when several are fused) and `truth[t]` the true torso positions
/// of the subjects present then. A scene with no subject-steps has rate 1.
pub fn detection_rate(tracks: &[Vec<[f64; 2]>], truth: &[Vec<[f64; 2]>]) -> Result<f64> {
    if tracks.len() != truth.len() {
        return Err(Error::invalid(format!(
            "{} track steps but {} ground-truth steps",
            tracks.len(),
            truth.len()
        )));
    }
    let mut total = 0usize;
    let mut hit = 0usize;
    for (est, gt) in tracks.iter().zip(truth) {
        total += gt.len();
        hit += gt
            .iter()
            .filter(|g| est.iter().any(|e| dist(**g, *e) <= DETECTION_RADIUS))
            .count();
    }
    Ok(if total == 0 {
        1.0
    } else {
        hit as f64 / total as f64
    })
}
