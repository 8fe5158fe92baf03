use nalgebra::{Matrix2, Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use super::associate::associate;
use super::ekf::{cartesian, predict, update, TrackState};
use crate::{Error, Result};

/// One detection in AP-local polar coordinates at tracking step `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub d: f64,
    /// Azimuth in degrees, counter-clockwise from boresight.
    pub theta: f64,
    pub t: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackStatus {
    Tentative,
    Confirmed,
    Dead,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: u32,
    pub state: TrackState,
    /// Consecutive updates.
    pub hits: u32,
    /// Consecutive steps without an associated observation.
    pub misses: u32,
    pub status: TrackStatus,
    /// Step at which the track was spawned.
    pub born: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerConfig {
    /// White-acceleration intensity, m²/s³.
    pub q: f64,
    /// Range noise std, m.
    pub r_d: f64,
    /// Azimuth noise std, degrees.
    pub r_theta_deg: f64,
    /// χ² gate on the squared Mahalanobis distance.
    pub gate: f64,
    pub confirm_hits: u32,
    pub kill_misses: u32,
    /// Duration of one tracking step, seconds.
    pub dt: f64,
    /// Std of the velocity prior of a new track, m/s.
    pub birth_velocity_std: f64,
    /// Unmatched observations closer than this to a live track do not
    /// spawn a new one, m.
    pub birth_exclusion: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            q: 0.5,
            r_d: 0.1,
            r_theta_deg: 2.0,
            gate: 9.21,
            confirm_hits: 3,
            kill_misses: 10,
            dt: 16.0 * 0.27e-3,
            birth_velocity_std: 2.0,
            birth_exclusion: 0.5,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("q", self.q),
            ("r_d", self.r_d),
            ("r_theta_deg", self.r_theta_deg),
            ("gate", self.gate),
            ("dt", self.dt),
            ("birth_velocity_std", self.birth_velocity_std),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive")));
            }
        }
        if !(self.birth_exclusion >= 0.0) {
            return Err(Error::invalid("birth_exclusion must be nonnegative"));
        }
        if self.confirm_hits == 0 || self.kill_misses == 0 {
            return Err(Error::invalid(
                "confirm_hits and kill_misses must be positive",
            ));
        }
        Ok(())
    }

    /// State of a track spawned from `obs`: zero velocity, position
    /// covariance mapped from the polar measurement noise.
    pub fn birth_state(&self, obs: &Observation) -> TrackState {
        let p = cartesian(obs.d, obs.theta);
        let th = obs.theta.to_radians();
        let (s, c) = th.sin_cos();
        let j = Matrix2::new(c, -obs.d * s, s, obs.d * c);
        let rt = self.r_theta_deg.to_radians();
        let r = Matrix2::new(self.r_d * self.r_d, 0.0, 0.0, rt * rt);
        let pos = j * r * j.transpose();
        let mut cov = Matrix4::zeros();
        cov.fixed_view_mut::<2, 2>(0, 0).copy_from(&pos);
        let vv = self.birth_velocity_std * self.birth_velocity_std;
        cov[(2, 2)] = vv;
        cov[(3, 3)] = vv;
        TrackState {
            x: Vector4::new(p[0], p[1], 0.0, 0.0),
            p: 0.5 * (cov + cov.transpose()),
        }
    }
}

/// Track manager for one AP.
#[derive(Debug, Clone)]
pub struct Tracker {
    cfg: TrackerConfig,
    tracks: Vec<Track>,
    next_id: u32,
    last_t: Option<u64>,
}

impl Tracker {
    pub fn new(cfg: TrackerConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            tracks: Vec::new(),
            next_id: 0,
            last_t: None,
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    /// Live (tentative and confirmed) tracks.
    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    /// Advance to step `t` with this step's observations and return the
    /// confirmed tracks.
    pub fn step(&mut self, observations: &[Observation], t: u64) -> Result<Vec<Track>> {
        if let Some(prev) = self.last_t {
            if t <= prev {
                return Err(Error::invalid(format!(
                    "tracking step {t} does not follow step {prev}"
                )));
            }
            let dt = (t - prev) as f64 * self.cfg.dt;
            for tr in &mut self.tracks {
                tr.state = predict(&tr.state, dt, &self.cfg)?;
            }
        }
        self.last_t = Some(t);

        let obs: Vec<Observation> = observations
            .iter()
            .filter(|o| o.d > 0.0 && o.d.is_finite() && o.theta.is_finite())
            .copied()
            .collect();
        let assoc = associate(&self.tracks, &obs, &self.cfg);
        for &(i, j) in &assoc.pairs {
            let tr = &mut self.tracks[i];
            tr.state = update(&tr.state, &obs[j], &self.cfg)?;
            tr.hits += 1;
            tr.misses = 0;
            if tr.status == TrackStatus::Tentative && tr.hits >= self.cfg.confirm_hits {
                tr.status = TrackStatus::Confirmed;
            }
        }
        for &i in &assoc.unmatched_tracks {
            let tr = &mut self.tracks[i];
            tr.misses += 1;
            tr.hits = 0;
            if tr.misses >= self.cfg.kill_misses {
                tr.status = TrackStatus::Dead;
            }
        }
        self.tracks.retain(|t| t.status != TrackStatus::Dead);

        for &j in &assoc.unmatched_observations {
            let p = cartesian(obs[j].d, obs[j].theta);
            let crowded = self.tracks.iter().any(|t| {
                let q = t.state.position();
                (q[0] - p[0]).hypot(q[1] - p[1]) < self.cfg.birth_exclusion
            });
            if crowded {
                continue;
            }
            let status = if self.cfg.confirm_hits <= 1 {
                TrackStatus::Confirmed
            } else {
                TrackStatus::Tentative
            };
            self.tracks.push(Track {
                id: self.next_id,
                state: self.cfg.birth_state(&obs[j]),
                hits: 1,
                misses: 0,
                status,
                born: t,
            });
            self.next_id += 1;
        }
        Ok(self.confirmed())
    }

    pub fn confirmed(&self) -> Vec<Track> {
        self.tracks
            .iter()
            .filter(|t| t.status == TrackStatus::Confirmed)
            .cloned()
            .collect()
    }
}
