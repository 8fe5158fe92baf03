//! Synthetic CIR streams from scenes of moving people and static clutter.
//!
//! The simulator works directly at tap level: every point scatterer adds
//! `reflectivity · g_p(θ) · (1 m / max(r, 0.5 m))²` to the tap nearest its
//! range `r`, with a phase that tracks its radial displacement. Nothing
//! here goes through the Golay correlator; see [`crate::waveform`] for that.

mod codebook;
mod scene;
mod synth;

pub use codebook::{synth_codebook, BeamPattern, Codebook, CodebookConfig, SIDELOBE_FLOOR};
pub use scene::{
    body_model, scene_step, Activity, ActivitySegment, ApPose, Scatterer, ScattererRole,
    ScattererState, Scene, StaticReflector, Subject, SubjectState, Waypoint,
};
pub use synth::{ap_cfo_hz, synth_cir_frame, SceneSource, OCCLUSION_RADIUS};
