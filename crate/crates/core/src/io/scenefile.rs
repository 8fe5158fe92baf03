//! Scene description files (TOML).
//!
//! ```toml
//! room = [6.1, 7.7]
//! duration_s = 10.0
//! noise_std = 2e-3
//! cfo_range_hz = 40.0
//!
//! [[aps]]
//! id = 1
//! position = [2.15, 0.0]
//! boresight_deg = 90.0
//!
//! [[subjects]]
//! id = 1
//! waypoints = [{ position = [1.5, 2.0], t = 0.2 }, { position = [1.5, 5.0], t = 4.0 }]
//! schedule = [{ start_s = 0.0, activity = "walking" }, { start_s = 4.0, activity = "waving" }]
//! # optional: reflectivity_scale = 1.0, gait_hz = 1.5
//!
//! [[static_reflectors]]
//! position = [0.5, 7.0]
//! reflectivity = 2.0
//! ```

use serde::{Deserialize, Serialize};

use crate::config::{line_of, section_line, testbed_aps, toml_error};
use crate::scenesim::{ActivitySegment, ApPose, Scene, StaticReflector, Subject, Waypoint};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubjectSpec {
    pub id: u32,
    pub waypoints: Vec<Waypoint>,
    pub schedule: Vec<ActivitySegment>,
    #[serde(default = "one")]
    pub reflectivity_scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gait_hz: Option<f64>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    #[serde(default = "room")]
    pub room: [f64; 2],
    pub duration_s: f64,
    #[serde(default)]
    pub noise_std: f64,
    #[serde(default = "cfo")]
    pub cfo_range_hz: f64,
    #[serde(default = "testbed_aps")]
    pub aps: Vec<ApPose>,
    #[serde(default)]
    pub subjects: Vec<SubjectSpec>,
    #[serde(default)]
    pub static_reflectors: Vec<StaticReflector>,
}

fn room() -> [f64; 2] {
    [6.1, 7.7]
}

fn cfo() -> f64 {
    40.0
}

impl SceneFile {
    pub fn from_scene(scene: &Scene, duration_s: f64) -> Self {
        Self {
            room: scene.room,
            duration_s,
            noise_std: scene.noise_std,
            cfo_range_hz: scene.cfo_range_hz,
            aps: scene.aps.clone(),
            subjects: scene
                .subjects
                .iter()
                .map(|s| SubjectSpec {
                    id: s.id,
                    waypoints: s.waypoints.clone(),
                    schedule: s.schedule.clone(),
                    reflectivity_scale: s.reflectivity_scale,
                    gait_hz: s.gait_hz,
                })
                .collect(),
            static_reflectors: scene.static_reflectors.clone(),
        }
    }

    pub fn scene(&self) -> Scene {
        Scene {
            room: self.room,
            subjects: self
                .subjects
                .iter()
                .map(|s| Subject {
                    id: s.id,
                    waypoints: s.waypoints.clone(),
                    schedule: s.schedule.clone(),
                    reflectivity_scale: s.reflectivity_scale,
                    gait_hz: s.gait_hz,
                    body: None,
                })
                .collect(),
            static_reflectors: self.static_reflectors.clone(),
            aps: self.aps.clone(),
            noise_std: self.noise_std,
            cfo_range_hz: self.cfo_range_hz,
        }
    }

    /// Parses and validates; errors carry the 1-based line of the offending
    /// key, or of the subject or AP table for semantic checks.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: Self = toml::from_str(text).map_err(|e| toml_error(text, &e))?;
        if !(file.duration_s > 0.0 && file.duration_s.is_finite()) {
            let line = text
                .find("duration_s")
                .map_or(1, |o| line_of(text, o));
            return Err(Error::schema(line, "duration_s must be positive"));
        }
        file.scene().validate().map_err(|e| {
            let msg = match e {
                Error::InvalidArgument(m) => m,
                other => other.to_string(),
            };
            let line = if msg.starts_with("subject") {
                nth_table_line(text, "subjects", subject_index(&file, &msg))
            } else if msg.starts_with("AP") || msg.contains("AP id") {
                section_line(text, "aps")
            } else {
                None
            };
            Error::schema(line.unwrap_or(1), msg)
        })?;
        Ok(file)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scene serializes")
    }
}

fn subject_index(file: &SceneFile, msg: &str) -> usize {
    let id = msg
        .split_whitespace()
        .nth(1)
        .and_then(|w| w.parse::<u32>().ok());
    id.and_then(|id| file.subjects.iter().position(|s| s.id == id))
        .unwrap_or(0)
}

/// Line of the `n`-th `[[name]]` header.
fn nth_table_line(text: &str, name: &str, n: usize) -> Option<usize> {
    let header = format!("[[{name}]]");
    text.lines()
        .enumerate()
        .filter(|(_, l)| l.trim() == header)
        .nth(n)
        .map(|(i, _)| i + 1)
}
