use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::waveform::RadioConfig;
use crate::{Error, Result};

/// The activities the simulator can animate and the classifier labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activity {
    Walking,
    Running,
    Sitting,
    Waving,
}

impl Activity {
    pub const ALL: [Activity; 4] = [
        Activity::Walking,
        Activity::Running,
        Activity::Sitting,
        Activity::Waving,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Activity::Walking => "walking",
            Activity::Running => "running",
            Activity::Sitting => "sitting",
            Activity::Waving => "waving",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == name)
    }

    /// Default limb oscillation frequency.
    pub fn gait_hz(self) -> f64 {
        match self {
            Activity::Walking => 1.5,
            Activity::Running => 2.5,
            Activity::Sitting => 0.5,
            Activity::Waving => 1.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub position: [f64; 2],
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActivitySegment {
    pub start_s: f64,
    pub activity: Activity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScattererRole {
    Torso,
    Limb,
}

/// A point reflector on a body, offset from the torso centre.
///
/// On top of the body translation it oscillates along each AP's line of
/// sight with radial velocity `amplitude · sin(2πf t + phase)`, swinging
/// ±amplitude/(2πf) about its nominal position. With a
/// nonzero `burst_period_s` the oscillation runs for one full cycle at the
/// start of every period and rests otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scatterer {
    pub offset: [f64; 2],
    pub reflectivity: f64,
    pub role: ScattererRole,
    /// Peak oscillation speed, m/s.
    pub amplitude: f64,
    pub freq_hz: f64,
    pub phase: f64,
    pub burst_period_s: f64,
}

/// Peak limb oscillation speed accepted by [`body_model`].
pub const MAX_LIMB_SPEED: f64 = 4.5;

impl Scatterer {
    /// A rigid scatterer that only follows the trajectory.
    pub fn rigid(offset: [f64; 2], reflectivity: f64) -> Self {
        Self {
            offset,
            reflectivity,
            role: ScattererRole::Torso,
            amplitude: 0.0,
            freq_hz: 0.0,
            phase: 0.0,
            burst_period_s: 0.0,
        }
    }

    /// Radial (velocity, displacement) contributed by the oscillation at `t`.
    pub fn oscillation(&self, t: f64) -> (f64, f64) {
        if self.amplitude == 0.0 || self.freq_hz == 0.0 {
            return (0.0, 0.0);
        }
        let w = 2.0 * PI * self.freq_hz;
        let a = self.amplitude;
        if self.burst_period_s > 0.0 {
            let tau = t.rem_euclid(self.burst_period_s);
            if tau < 1.0 / self.freq_hz {
                ((a * (w * tau).sin()), a / w * (1.0 - (w * tau).cos()))
            } else {
                (0.0, 0.0)
            }
        } else {
            // Zero-mean swing about the nominal position.
            let arg = w * t + self.phase;
            (a * arg.sin(), -a / w * arg.cos())
        }
    }
}

/// Five-point body: torso plus two legs and two arms.
///
/// Walking and running swing the legs (and, less, the arms) in antiphase
/// at the gait frequency on top of the trajectory motion. The legs reflect
/// unequally, as one partly shadows the other, so the power-weighted
/// Doppler centroid follows the gait frequency rather than twice it. Sitting adds an
/// intermittent 0.3 m/s torso bob at 0.5 Hz. Waving moves only the arms.
pub fn body_model(activity: Activity, gait_hz: Option<f64>) -> Vec<Scatterer> {
    let f = gait_hz.unwrap_or_else(|| activity.gait_hz());
    let (leg, arm, torso, burst) = match activity {
        Activity::Walking => (2.5, 1.2, 0.0, 0.0),
        Activity::Running => (3.5, 2.0, 0.0, 0.0),
        Activity::Sitting => (0.0, 0.0, 0.3, 4.0),
        Activity::Waving => (0.0, 2.0, 0.0, 0.0),
    };
    let part = |offset: [f64; 2], reflectivity, role, amplitude, phase, burst_period_s| Scatterer {
        offset,
        reflectivity,
        role,
        amplitude,
        freq_hz: f,
        phase,
        burst_period_s,
    };
    vec![
        part([0.0, 0.0], 0.5, ScattererRole::Torso, torso, 0.0, burst),
        part([-0.1, 0.0], 0.12, ScattererRole::Limb, leg, 0.0, 0.0),
        part([0.1, 0.0], 0.08, ScattererRole::Limb, leg, PI, 0.0),
        part([-0.2, 0.0], 0.06, ScattererRole::Limb, arm, PI, 0.0),
        part([0.2, 0.0], 0.06, ScattererRole::Limb, arm, 0.0, 0.0),
    ]
}

/// One person in the scene. The subject is absent before its first
/// waypoint and holds its last waypoint (at rest) after the final one.
#[derive(Debug, Clone, PartialEq)]
pub struct Subject {
    pub id: u32,
    pub waypoints: Vec<Waypoint>,
    /// Activity changes, sorted by start time. The first entry applies
    /// from the subject's appearance regardless of its `start_s`.
    pub schedule: Vec<ActivitySegment>,
    pub reflectivity_scale: f64,
    pub gait_hz: Option<f64>,
    /// Explicit scatterer set replacing the activity's body model.
    pub body: Option<Vec<Scatterer>>,
}

impl Subject {
    pub fn new(id: u32, activity: Activity, waypoints: Vec<Waypoint>) -> Self {
        Self {
            id,
            waypoints,
            schedule: vec![ActivitySegment {
                start_s: 0.0,
                activity,
            }],
            reflectivity_scale: 1.0,
            gait_hz: None,
            body: None,
        }
    }

    pub fn stationary(id: u32, activity: Activity, position: [f64; 2], from_s: f64) -> Self {
        Self::new(
            id,
            activity,
            vec![Waypoint {
                position,
                t: from_s,
            }],
        )
    }

    pub fn appears_at(&self) -> f64 {
        self.waypoints.first().map_or(f64::INFINITY, |w| w.t)
    }

    pub fn is_present(&self, t: f64) -> bool {
        t >= self.appears_at()
    }

    pub fn activity_at(&self, t: f64) -> Activity {
        let mut current = self.schedule[0].activity;
        for seg in &self.schedule[1..] {
            if seg.start_s <= t {
                current = seg.activity;
            }
        }
        current
    }

    /// Torso position and velocity at `t` from piecewise-linear waypoints.
    pub fn kinematics(&self, t: f64) -> ([f64; 2], [f64; 2]) {
        let w = &self.waypoints;
        if t <= w[0].t {
            return (w[0].position, [0.0, 0.0]);
        }
        for pair in w.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if t < b.t {
                let dt = b.t - a.t;
                let v = [
                    (b.position[0] - a.position[0]) / dt,
                    (b.position[1] - a.position[1]) / dt,
                ];
                let s = t - a.t;
                return ([a.position[0] + v[0] * s, a.position[1] + v[1] * s], v);
            }
        }
        (w[w.len() - 1].position, [0.0, 0.0])
    }

    pub fn scatterers_at(&self, t: f64) -> Vec<Scatterer> {
        let mut body = match &self.body {
            Some(b) => b.clone(),
            None => body_model(self.activity_at(t), self.gait_hz),
        };
        for s in &mut body {
            s.reflectivity *= self.reflectivity_scale;
        }
        body
    }

    pub fn validate(&self, room: [f64; 2]) -> Result<()> {
        if self.waypoints.is_empty() {
            return Err(Error::invalid(format!(
                "subject {} has no waypoints",
                self.id
            )));
        }
        if self.schedule.is_empty() {
            return Err(Error::invalid(format!(
                "subject {} has no activity",
                self.id
            )));
        }
        if self.waypoints.windows(2).any(|w| w[1].t <= w[0].t) {
            return Err(Error::invalid(format!(
                "subject {} waypoint times must be strictly increasing",
                self.id
            )));
        }
        if self
            .schedule
            .windows(2)
            .any(|w| w[1].start_s <= w[0].start_s)
        {
            return Err(Error::invalid(format!(
                "subject {} activity schedule must be strictly increasing",
                self.id
            )));
        }
        for w in &self.waypoints {
            if !inside(w.position, room) {
                return Err(Error::invalid(format!(
                    "subject {} waypoint {:?} lies outside the room",
                    self.id, w.position
                )));
            }
        }
        if !(self.reflectivity_scale >= 0.0) {
            return Err(Error::invalid("reflectivity_scale must be nonnegative"));
        }
        let mut bodies: Vec<Vec<Scatterer>> = self
            .schedule
            .iter()
            .map(|seg| body_model(seg.activity, self.gait_hz))
            .collect();
        bodies.extend(self.body.clone());
        for s in bodies.iter().flatten() {
            if !(s.reflectivity >= 0.0) {
                return Err(Error::invalid("scatterer reflectivity must be nonnegative"));
            }
            if s.role == ScattererRole::Limb && s.amplitude.abs() > MAX_LIMB_SPEED {
                return Err(Error::invalid("limb speed exceeds 4.5 m/s"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticReflector {
    pub position: [f64; 2],
    pub reflectivity: f64,
}

/// Position and boresight of an AP in the room frame.
///
/// The AP-local frame has +x along boresight and azimuth measured
/// counter-clockwise from it, in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApPose {
    pub id: u32,
    pub position: [f64; 2],
    pub boresight_deg: f64,
}

impl ApPose {
    pub fn to_local(&self, room: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.boresight_deg.to_radians().sin_cos();
        let dx = room[0] - self.position[0];
        let dy = room[1] - self.position[1];
        [c * dx + s * dy, -s * dx + c * dy]
    }

    pub fn to_room(&self, local: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.boresight_deg.to_radians().sin_cos();
        [
            self.position[0] + c * local[0] - s * local[1],
            self.position[1] + s * local[0] + c * local[1],
        ]
    }

    pub fn rotate_to_room(&self, local_vec: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.boresight_deg.to_radians().sin_cos();
        [
            c * local_vec[0] - s * local_vec[1],
            s * local_vec[0] + c * local_vec[1],
        ]
    }

    /// (range in m, azimuth in degrees) of a room-frame point.
    pub fn polar(&self, room: [f64; 2]) -> (f64, f64) {
        let l = self.to_local(room);
        (l[0].hypot(l[1]), l[1].atan2(l[0]).to_degrees())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    /// Room extent (width along x, depth along y) in metres; the room
    /// occupies [0, width] × [0, depth].
    pub room: [f64; 2],
    pub subjects: Vec<Subject>,
    pub static_reflectors: Vec<StaticReflector>,
    pub aps: Vec<ApPose>,
    /// Std of the complex per-entry noise, E|n|² = noise_std².
    pub noise_std: f64,
    pub cfo_range_hz: f64,
}

impl Scene {
    pub fn empty(room: [f64; 2], aps: Vec<ApPose>) -> Self {
        Self {
            room,
            subjects: Vec::new(),
            static_reflectors: Vec::new(),
            aps,
            noise_std: 0.0,
            cfo_range_hz: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.room[0] > 0.0 && self.room[1] > 0.0) {
            return Err(Error::invalid("room dimensions must be positive"));
        }
        if self.aps.is_empty() {
            return Err(Error::invalid("scene needs at least one AP"));
        }
        for ap in &self.aps {
            if !inside(ap.position, self.room) {
                return Err(Error::invalid(format!(
                    "AP {} lies outside the room",
                    ap.id
                )));
            }
        }
        for (i, a) in self.aps.iter().enumerate() {
            if self.aps[..i].iter().any(|b| b.id == a.id) {
                return Err(Error::invalid(format!("duplicate AP id {}", a.id)));
            }
        }
        if !(self.noise_std >= 0.0) || !(self.cfo_range_hz >= 0.0) {
            return Err(Error::invalid(
                "noise_std and cfo_range_hz must be nonnegative",
            ));
        }
        for s in &self.subjects {
            s.validate(self.room)?;
        }
        if self
            .static_reflectors
            .iter()
            .any(|r| !(r.reflectivity >= 0.0))
        {
            return Err(Error::invalid("static reflectivity must be nonnegative"));
        }
        Ok(())
    }
}

fn inside(p: [f64; 2], room: [f64; 2]) -> bool {
    p[0] >= 0.0 && p[0] <= room[0] && p[1] >= 0.0 && p[1] <= room[1]
}

/// Kinematic state of one scatterer, with one entry per AP for the
/// line-of-sight quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct ScattererState {
    /// Nominal world position (torso + body offset).
    pub position: [f64; 2],
    pub reflectivity: f64,
    pub role: ScattererRole,
    /// Radial velocity per AP, positive when receding.
    pub radial_velocity: Vec<f64>,
    /// Effective range per AP including the oscillation displacement.
    pub range: Vec<f64>,
    /// Range per AP at the subject's appearance; the phase reference.
    pub reference_range: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectState {
    pub id: u32,
    pub activity: Activity,
    pub torso: [f64; 2],
    pub velocity: [f64; 2],
    pub scatterers: Vec<ScattererState>,
}

/// State of every present subject at packet `k` (time k·T_c).
pub fn scene_step(scene: &Scene, k: u64, cfg: &RadioConfig) -> Vec<SubjectState> {
    let t = k as f64 * cfg.packet_interval_s;
    scene
        .subjects
        .iter()
        .filter(|s| s.is_present(t))
        .map(|s| subject_state(s, t, &scene.aps))
        .collect()
}

pub(crate) fn subject_state(subject: &Subject, t: f64, aps: &[ApPose]) -> SubjectState {
    let (torso, velocity) = subject.kinematics(t);
    let (start, _) = subject.kinematics(subject.appears_at());
    let scatterers = subject
        .scatterers_at(t)
        .iter()
        .map(|sc| {
            let position = [torso[0] + sc.offset[0], torso[1] + sc.offset[1]];
            let ref_pos = [start[0] + sc.offset[0], start[1] + sc.offset[1]];
            let (osc_v, osc_d) = sc.oscillation(t);
            let mut radial_velocity = Vec::with_capacity(aps.len());
            let mut range = Vec::with_capacity(aps.len());
            let mut reference_range = Vec::with_capacity(aps.len());
            for ap in aps {
                let dx = position[0] - ap.position[0];
                let dy = position[1] - ap.position[1];
                let r = dx.hypot(dy);
                let v_los = if r > 0.0 {
                    (velocity[0] * dx + velocity[1] * dy) / r
                } else {
                    0.0
                };
                radial_velocity.push(v_los + osc_v);
                range.push(r + osc_d);
                reference_range
                    .push((ref_pos[0] - ap.position[0]).hypot(ref_pos[1] - ap.position[1]));
            }
            ScattererState {
                position,
                reflectivity: sc.reflectivity,
                role: sc.role,
                radial_velocity,
                range,
                reference_range,
            }
        })
        .collect();
    SubjectState {
        id: subject.id,
        activity: subject.activity_at(t),
        torso,
        velocity,
        scatterers,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ap() -> ApPose {
        ApPose {
            id: 0,
            position: [3.0, 0.0],
            boresight_deg: 90.0,
        }
    }

    fn scene_with(subject: Subject) -> Scene {
        let mut s = Scene::empty([6.1, 7.7], vec![ap()]);
        s.subjects.push(subject);
        s
    }

    #[test]
    fn stationary_subject_has_zero_torso_velocity() {
        let scene = scene_with(Subject::stationary(0, Activity::Waving, [3.0, 3.0], 0.0));
        let cfg = RadioConfig::default();
        for k in [0, 100, 5000] {
            let st = scene_step(&scene, k, &cfg);
            let torso = &st[0].scatterers[0];
            assert_eq!(torso.role, ScattererRole::Torso);
            assert_eq!(torso.radial_velocity[0], 0.0);
        }
    }

    #[test]
    fn receding_subject_is_positive() {
        let wp = vec![
            Waypoint {
                position: [3.0, 1.0],
                t: 0.0,
            },
            Waypoint {
                position: [3.0, 5.0],
                t: 4.0,
            },
        ];
        let scene = scene_with(Subject::new(0, Activity::Walking, wp));
        let st = scene_step(&scene, 1000, &RadioConfig::default());
        let v = st[0].scatterers[0].radial_velocity[0];
        assert!((v - 1.0).abs() < 1e-12, "{v}");
    }

    #[test]
    fn limb_adds_peak_oscillation() {
        let wp = vec![
            Waypoint {
                position: [3.0, 1.0],
                t: 0.0,
            },
            Waypoint {
                position: [3.0, 5.0],
                t: 4.0,
            },
        ];
        let mut subj = Subject::new(0, Activity::Walking, wp);
        subj.gait_hz = Some(1.5);
        let scene = scene_with(subj);
        let cfg = RadioConfig::default();
        // first leg has phase 0: sin(2π·1.5·t) = 1 at t = 1/6 s
        let bodies = body_model(Activity::Walking, Some(1.5));
        let leg = bodies[1];
        let t = 1.0 / (4.0 * 1.5);
        let (v, _) = leg.oscillation(t);
        assert!((v - 2.5).abs() < 1e-12);
        let k = (t / cfg.packet_interval_s).round() as u64;
        let st = scene_step(&scene, k, &cfg);
        let torso_v = st[0].scatterers[0].radial_velocity[0];
        let leg_v = st[0].scatterers[1].radial_velocity[0];
        // the leg sits 0.1 m off the torso line, so its line-of-sight share
        // of the walking speed differs by < 0.01 m/s
        assert!((leg_v - torso_v - 2.5).abs() < 0.01, "{leg_v} {torso_v}");
        let mut three = leg;
        three.amplitude = 3.0;
        assert!((three.oscillation(t).0 - 3.0).abs() < 1e-12);
    }

    #[test]
    fn holds_after_last_waypoint() {
        let wp = vec![
            Waypoint {
                position: [3.0, 1.0],
                t: 0.0,
            },
            Waypoint {
                position: [3.0, 2.0],
                t: 1.0,
            },
        ];
        let s = Subject::new(0, Activity::Walking, wp);
        let (p, v) = s.kinematics(10.0);
        assert_eq!(p, [3.0, 2.0]);
        assert_eq!(v, [0.0, 0.0]);
    }

    #[test]
    fn absent_before_first_waypoint() {
        let scene = scene_with(Subject::stationary(0, Activity::Sitting, [3.0, 3.0], 1.0));
        let cfg = RadioConfig::default();
        assert!(scene_step(&scene, 10, &cfg).is_empty());
        assert_eq!(scene_step(&scene, 4000, &cfg).len(), 1);
    }

    #[test]
    fn burst_oscillation_returns_home() {
        let torso = body_model(Activity::Sitting, None)[0];
        assert_eq!(torso.amplitude, 0.3);
        let (_, d_end) = torso.oscillation(2.0 - 1e-9);
        assert!(d_end.abs() < 1e-9);
        assert_eq!(torso.oscillation(3.0), (0.0, 0.0));
        assert!(torso.oscillation(0.5).0 > 0.29);
    }

    #[test]
    fn displacement_integrates_velocity() {
        let leg = body_model(Activity::Running, None)[2];
        let dt = 1e-5;
        for i in 0..50 {
            let t = 0.013 * i as f64;
            let (v, _) = leg.oscillation(t);
            let num = (leg.oscillation(t + dt).1 - leg.oscillation(t - dt).1) / (2.0 * dt);
            assert!((num - v).abs() < 1e-6);
        }
    }

    #[test]
    fn pose_round_trip() {
        let pose = ApPose {
            id: 1,
            position: [1.0, 2.0],
            boresight_deg: 63.0,
        };
        let p = [4.2, 5.1];
        let back = pose.to_room(pose.to_local(p));
        assert!((back[0] - p[0]).abs() < 1e-12 && (back[1] - p[1]).abs() < 1e-12);
        let straight = ApPose {
            id: 0,
            position: [3.0, 0.0],
            boresight_deg: 90.0,
        };
        let (r, th) = straight.polar([3.0, 2.0]);
        assert!((r - 2.0).abs() < 1e-12 && th.abs() < 1e-9);
        let (_, th) = straight.polar([2.0, 1.0]);
        assert!((th - 45.0).abs() < 1e-9, "left of boresight is positive");
    }

    #[test]
    fn validation_catches_bad_input() {
        let mut s = scene_with(Subject::new(
            0,
            Activity::Walking,
            vec![
                Waypoint {
                    position: [1.0, 1.0],
                    t: 1.0,
                },
                Waypoint {
                    position: [1.0, 2.0],
                    t: 1.0,
                },
            ],
        ));
        assert!(s.validate().is_err());
        s.subjects[0].waypoints[1].t = 2.0;
        assert!(s.validate().is_ok());
        s.subjects[0].waypoints[1].position = [9.0, 2.0];
        assert!(s.validate().is_err());
        let mut s2 = Scene::empty([6.0, 6.0], vec![ap()]);
        s2.noise_std = -1.0;
        assert!(s2.validate().is_err());
    }
}
