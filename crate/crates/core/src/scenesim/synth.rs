use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::codebook::Codebook;
use super::scene::{subject_state, Scene, SubjectState};
use crate::rng::{stream, Purpose};
use crate::source::FrameSource;
use crate::waveform::{CirFrame, RadioConfig, SPEED_OF_LIGHT};
use crate::{Error, Result};

/// Radius of the disc a body shadows.
pub const OCCLUSION_RADIUS: f64 = 0.3;

/// Distance below which path loss stops growing.
const NEAR_FIELD_CLAMP: f64 = 0.5;

/// Residual carrier offset of AP `ap_index` for `seed`, uniform in
/// ±cfo_range. The offset is fixed for a capture, so it rotates the whole
/// frame by 2π·cfo·k·T_c.
pub fn ap_cfo_hz(scene: &Scene, ap_index: usize, seed: u64) -> f64 {
    if scene.cfo_range_hz == 0.0 {
        return 0.0;
    }
    let mut rng = stream(seed, Purpose::Cfo, ap_index as u64, 0);
    rng.gen_range(-scene.cfo_range_hz..=scene.cfo_range_hz)
}

/// One synthetic CIR estimate of AP `ap_index` at packet `k`.
pub fn synth_cir_frame(
    scene: &Scene,
    ap_index: usize,
    codebook: &Codebook,
    cfg: &RadioConfig,
    k: u64,
    seed: u64,
) -> Result<CirFrame> {
    let cfo = ap_cfo_hz(scene, ap_index, seed);
    synth_with_cfo(scene, ap_index, codebook, cfg, k, seed, cfo)
}

fn synth_with_cfo(
    scene: &Scene,
    ap_index: usize,
    codebook: &Codebook,
    cfg: &RadioConfig,
    k: u64,
    seed: u64,
    cfo_hz: f64,
) -> Result<CirFrame> {
    let ap = scene
        .aps
        .get(ap_index)
        .ok_or_else(|| Error::invalid(format!("AP index {ap_index} out of range")))?;
    if codebook.len() != cfg.patterns {
        return Err(Error::invalid(format!(
            "codebook has {} patterns, radio expects {}",
            codebook.len(),
            cfg.patterns
        )));
    }
    let t = k as f64 * cfg.packet_interval_s;
    let states: Vec<SubjectState> = scene
        .subjects
        .iter()
        .filter(|s| s.is_present(t))
        .map(|s| subject_state(s, t, &scene.aps))
        .collect();

    let mut frame = CirFrame::zeros(k, cfg.taps, cfg.patterns);
    let spacing = cfg.tap_spacing();
    let kphase = 4.0 * PI * cfg.carrier_hz / SPEED_OF_LIGHT;

    let mut deposit = |pos: [f64; 2], range: f64, phase: f64, refl: f64| {
        let tap = (range / spacing).round();
        if !(tap >= 0.0 && tap < cfg.taps as f64) || refl == 0.0 {
            return;
        }
        let (_, theta) = ap.polar(pos);
        let loss = 1.0 / range.max(NEAR_FIELD_CLAMP).powi(2);
        let rot = Complex64::from_polar(refl * loss, phase);
        let row = tap as usize;
        for p in 0..cfg.patterns {
            let g = codebook.gain(p, theta);
            if g > 0.0 {
                *frame.get_mut(row, p) += rot * g;
            }
        }
    };

    for (i, st) in states.iter().enumerate() {
        for sc in &st.scatterers {
            let shadowed = states
                .iter()
                .enumerate()
                .any(|(j, o)| j != i && blocks(ap.position, sc.position, o.torso));
            if shadowed {
                continue;
            }
            let r = sc.range[ap_index];
            let r0 = sc.reference_range[ap_index];
            let phase = -kphase * r0 + kphase * (r - r0);
            deposit(sc.position, r, phase, sc.reflectivity);
        }
    }
    for refl in &scene.static_reflectors {
        if states
            .iter()
            .any(|o| blocks(ap.position, refl.position, o.torso))
        {
            continue;
        }
        let r = (refl.position[0] - ap.position[0]).hypot(refl.position[1] - ap.position[1]);
        deposit(refl.position, r, -kphase * r, refl.reflectivity);
    }

    if scene.noise_std > 0.0 {
        let mut rng = stream(seed, Purpose::FrameNoise, ap_index as u64, k);
        let s = scene.noise_std / 2f64.sqrt();
        for z in frame.data_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *z += Complex64::new(re * s, im * s);
        }
    }
    if cfo_hz != 0.0 {
        let rot = Complex64::from_polar(1.0, 2.0 * PI * cfo_hz * t);
        for z in frame.data_mut() {
            *z *= rot;
        }
    }
    Ok(frame)
}

/// True when the segment from `from` to `to` passes within the occlusion
/// radius of `centre`. A point inside its own disc is not tested here;
/// callers exclude the owning subject.
fn blocks(from: [f64; 2], to: [f64; 2], centre: [f64; 2]) -> bool {
    let d = [to[0] - from[0], to[1] - from[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let w = [centre[0] - from[0], centre[1] - from[1]];
    let u = if len2 > 0.0 {
        ((w[0] * d[0] + w[1] * d[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let q = [
        from[0] + u * d[0] - centre[0],
        from[1] + u * d[1] - centre[1],
    ];
    q[0].hypot(q[1]) < OCCLUSION_RADIUS
}

/// Lazily synthesized frame stream of one AP.
#[derive(Debug, Clone)]
pub struct SceneSource {
    scene: Scene,
    codebook: Codebook,
    radio: RadioConfig,
    ap_index: usize,
    seed: u64,
    frames: u64,
    cfo_hz: f64,
}

impl SceneSource {
    pub fn new(
        scene: Scene,
        codebook: Codebook,
        radio: RadioConfig,
        ap_index: usize,
        seed: u64,
        frames: u64,
    ) -> Result<Self> {
        scene.validate()?;
        radio.validate()?;
        if ap_index >= scene.aps.len() {
            return Err(Error::invalid(format!("AP index {ap_index} out of range")));
        }
        if codebook.len() != radio.patterns {
            return Err(Error::invalid(
                "codebook size differs from radio pattern count",
            ));
        }
        let cfo_hz = ap_cfo_hz(&scene, ap_index, seed);
        Ok(Self {
            scene,
            codebook,
            radio,
            ap_index,
            seed,
            frames,
            cfo_hz,
        })
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn codebook(&self) -> &Codebook {
        &self.codebook
    }

    pub fn ap_index(&self) -> usize {
        self.ap_index
    }
}

impl FrameSource for SceneSource {
    fn radio(&self) -> &RadioConfig {
        &self.radio
    }

    fn frame_count(&self) -> u64 {
        self.frames
    }

    fn frame(&mut self, k: u64) -> Result<CirFrame> {
        if k >= self.frames {
            return Err(Error::invalid(format!(
                "frame {k} beyond stream end {}",
                self.frames
            )));
        }
        synth_with_cfo(
            &self.scene,
            self.ap_index,
            &self.codebook,
            &self.radio,
            k,
            self.seed,
            self.cfo_hz,
        )
    }
}
