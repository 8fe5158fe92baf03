use super::ekf::innovation;
use super::tracker::{Observation, Track, TrackerConfig};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Association {
    /// (track index, observation index) pairs.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_tracks: Vec<usize>,
    pub unmatched_observations: Vec<usize>,
}

/// Squared Mahalanobis distance in measurement space, or `None` when the
/// pair cannot be evaluated.
pub(crate) fn distance2(track: &Track, obs: &Observation, cfg: &TrackerConfig) -> Option<f64> {
    let (nu, s, _) = innovation(&track.state, obs, cfg).ok()?;
    let s_inv = s.try_inverse()?;
    let d2 = (nu.transpose() * s_inv * nu)[0];
    d2.is_finite().then_some(d2)
}

/// Greedy global nearest neighbour: repeatedly take the closest remaining
/// gated pair. Equal distances resolve to the lower track, then the lower
/// observation index.
pub fn associate(
    tracks: &[Track],
    observations: &[Observation],
    cfg: &TrackerConfig,
) -> Association {
    let mut cand = Vec::new();
    for (i, t) in tracks.iter().enumerate() {
        for (j, o) in observations.iter().enumerate() {
            if let Some(d2) = distance2(t, o, cfg) {
                if d2 <= cfg.gate {
                    cand.push((d2, i, j));
                }
            }
        }
    }
    cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut track_used = vec![false; tracks.len()];
    let mut obs_used = vec![false; observations.len()];
    let mut pairs = Vec::new();
    for (_, i, j) in cand {
        if !track_used[i] && !obs_used[j] {
            track_used[i] = true;
            obs_used[j] = true;
            pairs.push((i, j));
        }
    }
    pairs.sort_unstable();
    Association {
        pairs,
        unmatched_tracks: (0..tracks.len()).filter(|&i| !track_used[i]).collect(),
        unmatched_observations: (0..observations.len()).filter(|&j| !obs_used[j]).collect(),
    }
}
