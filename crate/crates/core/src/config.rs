//! The full parameter set of a pipeline run, loadable from TOML.
//!
//! Every section and field is optional; missing values take the defaults
//! below. Unknown keys are rejected.
//!
//! ```toml
//! [radio]
//! carrier_hz = 60.48e9
//! bandwidth_hz = 1.76e9
//! packet_interval_s = 0.27e-3
//! samples_per_symbol = 2
//! taps = 192
//! patterns = 12
//!
//! [codebook]
//! patterns = 12
//! fov_deg = 90.0
//! beamwidth_deg = 15.0
//! grid_points = 181
//!
//! [detect]
//! alpha_max = 0.25
//! alpha_mean = 2.0
//! alpha_abs = 2.5e-3
//! k_static = 128
//! background = "initial"   # or "sliding"
//!
//! [tracker]
//! q = 0.5
//! r_d = 0.1
//! r_theta_deg = 2.0
//! gate = 9.21
//! confirm_hits = 3
//! kill_misses = 10
//! dt = 4.32e-3             # must equal stft.sigma × radio.packet_interval_s
//! birth_velocity_std = 2.0
//! birth_exclusion = 0.5
//!
//! [stft]
//! m = 64
//! sigma = 16
//!
//! [md]
//! q = 4
//! t_window = 400
//! overlap = 300
//! static_band = 0.28
//!
//! [train]
//! lr = 1e-4
//! epochs = 120
//! batch_size = 16
//! seed = 0
//!
//! [fusion]
//! pairing_radius = 0.75
//! positions = "average"    # or "single"
//! decisions = "max"        # or "single"
//!
//! [[aps]]
//! id = 1
//! position = [2.15, 0.0]
//! boresight_deg = 90.0
//!
//! [[aps]]
//! id = 2
//! position = [3.95, 0.0]
//! boresight_deg = 90.0
//! ```

use serde::{Deserialize, Serialize};

use crate::classify::TrainConfig;
use crate::detect::DetectConfig;
use crate::fusion::{validate_registrations, ApRegistration, PAIRING_RADIUS};
use crate::microdoppler::{MdConfig, StftConfig};
use crate::scenesim::CodebookConfig;
use crate::track::TrackerConfig;
use crate::waveform::RadioConfig;
use crate::{Error, Result};

/// How the positions of one subject seen by several APs are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PositionFusion {
    Average,
    /// Keep the estimate of the first listed AP that sees the subject.
    Single,
}

/// How per-AP classifier outputs for one subject are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecisionFusion {
    /// The largest class probability over all APs decides.
    Max,
    /// The first listed AP that sees the subject decides.
    Single,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionConfig {
    pub pairing_radius: f64,
    pub positions: PositionFusion,
    pub decisions: DecisionFusion,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            pairing_radius: PAIRING_RADIUS,
            positions: PositionFusion::Average,
            decisions: DecisionFusion::Max,
        }
    }
}

/// The two APs of the reference testbed, 1.8 m apart on one wall, both
/// facing into the room.
pub fn testbed_aps() -> Vec<ApRegistration> {
    vec![
        ApRegistration {
            id: 1,
            position: [2.15, 0.0],
            boresight_deg: 90.0,
        },
        ApRegistration {
            id: 2,
            position: [3.95, 0.0],
            boresight_deg: 90.0,
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub radio: RadioConfig,
    pub codebook: CodebookConfig,
    pub detect: DetectConfig,
    pub tracker: TrackerConfig,
    pub stft: StftConfig,
    pub md: MdConfig,
    pub train: TrainConfig,
    pub fusion: FusionConfig,
    pub aps: Vec<ApRegistration>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            radio: RadioConfig::default(),
            codebook: CodebookConfig::default(),
            detect: DetectConfig::default(),
            tracker: TrackerConfig::default(),
            stft: StftConfig::default(),
            md: MdConfig::default(),
            train: TrainConfig::default(),
            fusion: FusionConfig::default(),
            aps: testbed_aps(),
        }
    }
}

impl PipelineConfig {
    /// Checks every section, naming the first offending one.
    pub fn validate(&self) -> Result<()> {
        let section = |name: &'static str, r: Result<()>| {
            r.map_err(|e| Error::invalid(format!("[{name}] {}", strip(&e))))
        };
        section("radio", self.radio.validate())?;
        section("codebook", self.codebook.build().map(|_| ()))?;
        if self.codebook.patterns != self.radio.patterns {
            return Err(Error::invalid(
                "[codebook] patterns must equal radio.patterns",
            ));
        }
        section("detect", self.detect.validate())?;
        section("tracker", self.tracker.validate())?;
        section("stft", self.stft.validate())?;
        section("md", self.md.validate())?;
        section("train", self.train.validate())?;
        let step = self.stft.sigma as f64 * self.radio.packet_interval_s;
        if (self.tracker.dt - step).abs() > 1e-9 * step {
            return Err(Error::invalid(format!(
                "[tracker] dt = {} s but one tracking step is sigma × packet_interval_s = {step} s",
                self.tracker.dt
            )));
        }
        if !(self.fusion.pairing_radius > 0.0 && self.fusion.pairing_radius.is_finite()) {
            return Err(Error::invalid("[fusion] pairing_radius must be positive"));
        }
        section("aps", validate_registrations(&self.aps))?;
        Ok(())
    }

    /// Parses and validates a TOML document. Errors carry the 1-based line
    /// of the offending key, or of the section header for checks that
    /// involve a whole section.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| toml_error(text, &e))?;
        cfg.validate().map_err(|e| {
            let msg = strip(&e);
            let line = msg
                .strip_prefix('[')
                .and_then(|rest| rest.split(']').next())
                .and_then(|name| section_line(text, name))
                .unwrap_or(1);
            Error::schema(line, msg)
        })?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn registration(&self, ap_id: u32) -> Result<&ApRegistration> {
        self.aps
            .iter()
            .find(|a| a.id == ap_id)
            .ok_or_else(|| Error::invalid(format!("no registration for AP {ap_id}")))
    }

    /// Duration of one tracking step, σ·T_c.
    pub fn step_s(&self) -> f64 {
        self.stft.sigma as f64 * self.radio.packet_interval_s
    }
}

fn strip(e: &Error) -> String {
    match e {
        Error::InvalidArgument(m) => m.clone(),
        other => other.to_string(),
    }
}

/// Schema error for a TOML parse or type failure.
pub(crate) fn toml_error(text: &str, e: &toml::de::Error) -> Error {
    let line = e.span().map_or(1, |s| line_of(text, s.start));
    Error::schema(line, e.message())
}

pub(crate) fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of the `[name]` or `[[name]]` header, if present.
pub(crate) fn section_line(text: &str, name: &str) -> Option<usize> {
    text.lines().position(|l| {
        let t = l.trim();
        t == format!("[{name}]") || t == format!("[[{name}]]")
    })
    .map(|i| i + 1)
}
