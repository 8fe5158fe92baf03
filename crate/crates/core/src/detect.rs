//! Background removal and per-frame target detection.
//!
//! Static clutter is removed by subtracting the time-averaged CIR amplitude
//! of every (tap, pattern) entry. Each tap's remaining energy across beam
//! patterns is its path strength; local maxima above an adaptive threshold
//! become candidates. The mean term compares each peak with the average
//! peak, so with α_mean > 1 a frame needs a floor of small noise peaks for
//! anything to survive; an isolated peak in a noiseless frame is dropped.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::waveform::CirFrame;
use crate::{Error, Result};

/// Real L×N_p matrix with the same layout as [`CirFrame`].
#[derive(Debug, Clone, PartialEq)]
pub struct AmpMatrix {
    taps: usize,
    patterns: usize,
    data: Vec<f64>,
}

impl AmpMatrix {
    pub fn new(taps: usize, patterns: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != taps * patterns {
            return Err(Error::invalid(format!(
                "{} values do not fill a {taps}x{patterns} matrix",
                data.len()
            )));
        }
        Ok(Self {
            taps,
            patterns,
            data,
        })
    }

    pub fn filled(taps: usize, patterns: usize, value: f64) -> Self {
        Self {
            taps,
            patterns,
            data: vec![value; taps * patterns],
        }
    }

    pub fn taps(&self) -> usize {
        self.taps
    }

    pub fn patterns(&self) -> usize {
        self.patterns
    }

    pub fn get(&self, tap: usize, pattern: usize) -> f64 {
        self.data[tap * self.patterns + pattern]
    }

    pub fn row(&self, tap: usize) -> &[f64] {
        &self.data[tap * self.patterns..(tap + 1) * self.patterns]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Mean CIR amplitude per (tap, pattern).
pub type BackgroundProfile = AmpMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackgroundMode {
    /// Average the first `k_static` packets, then hold.
    Initial,
    /// Average the most recent `k_static` packets.
    Sliding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectConfig {
    pub alpha_max: f64,
    pub alpha_mean: f64,
    pub alpha_abs: f64,
    pub k_static: usize,
    pub background: BackgroundMode,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            alpha_max: 0.25,
            alpha_mean: 2.0,
            alpha_abs: 2.5e-3,
            k_static: 128,
            background: BackgroundMode::Initial,
        }
    }
}

impl DetectConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha_max", self.alpha_max),
            ("alpha_mean", self.alpha_mean),
            ("alpha_abs", self.alpha_abs),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive")));
            }
        }
        if self.k_static == 0 {
            return Err(Error::invalid("k_static must be positive"));
        }
        Ok(())
    }

    /// A_th for the given peak values; zero peaks give α_abs.
    pub fn threshold(&self, peaks: &[f64]) -> f64 {
        if peaks.is_empty() {
            return self.alpha_abs;
        }
        let max = peaks.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mean = peaks.iter().sum::<f64>() / peaks.len() as f64;
        (self.alpha_max * max)
            .max(self.alpha_mean * mean)
            .max(self.alpha_abs)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub tap: usize,
    pub distance: f64,
    pub strength: f64,
    /// Squared foreground amplitude per beam pattern.
    pub power: Vec<f64>,
}

pub fn estimate_background(frames: &[CirFrame]) -> Result<BackgroundProfile> {
    let first = frames
        .first()
        .ok_or_else(|| Error::invalid("background needs at least one frame"))?;
    let mut sum = vec![0.0; first.data().len()];
    for f in frames {
        if !f.same_shape(first) {
            return Err(Error::invalid("frames differ in shape"));
        }
        for (s, z) in sum.iter_mut().zip(f.data()) {
            *s += z.norm();
        }
    }
    let n = frames.len() as f64;
    AmpMatrix::new(
        first.taps(),
        first.patterns(),
        sum.into_iter().map(|s| s / n).collect(),
    )
}

pub fn subtract_background(frame: &CirFrame, bg: &BackgroundProfile) -> Result<AmpMatrix> {
    if frame.taps() != bg.taps || frame.patterns() != bg.patterns {
        return Err(Error::invalid(format!(
            "frame is {}x{}, background is {}x{}",
            frame.taps(),
            frame.patterns(),
            bg.taps,
            bg.patterns
        )));
    }
    let data = frame
        .data()
        .iter()
        .zip(&bg.data)
        .map(|(z, b)| (z.norm() - b).max(0.0))
        .collect();
    AmpMatrix::new(bg.taps, bg.patterns, data)
}

/// L2 norm of every row of the foreground.
pub fn path_strengths(fg: &AmpMatrix) -> Vec<f64> {
    (0..fg.taps)
        .map(|l| fg.row(l).iter().map(|a| a * a).sum::<f64>().sqrt())
        .collect()
}

/// Indices of interior local maxima. A run of equal values counts once, at
/// its leftmost tap, when both values flanking the run are smaller.
pub fn local_maxima(h: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    let n = h.len();
    let mut i = 1;
    while i + 1 < n {
        if h[i] > h[i - 1] {
            let mut j = i;
            while j + 1 < n && h[j + 1] == h[i] {
                j += 1;
            }
            if j + 1 < n && h[j + 1] < h[i] {
                out.push(i);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Candidates from path strengths alone; `power` is left empty.
pub fn detect_candidates(h: &[f64], distances: &[f64], cfg: &DetectConfig) -> Vec<Candidate> {
    let peaks = local_maxima(h);
    let values: Vec<f64> = peaks.iter().map(|&i| h[i]).collect();
    let th = cfg.threshold(&values);
    peaks
        .into_iter()
        .filter(|&i| h[i] >= th)
        .map(|i| Candidate {
            tap: i,
            distance: distances.get(i).copied().unwrap_or(f64::NAN),
            strength: h[i],
            power: Vec::new(),
        })
        .collect()
}

/// Full per-frame detection on a foreground matrix.
pub fn detect_frame(fg: &AmpMatrix, distances: &[f64], cfg: &DetectConfig) -> Vec<Candidate> {
    let h = path_strengths(fg);
    let mut cands = detect_candidates(&h, distances, cfg);
    for c in &mut cands {
        c.power = fg.row(c.tap).iter().map(|a| a * a).collect();
    }
    cands
}

/// Running background estimate fed one frame at a time.
#[derive(Debug, Clone)]
pub struct BackgroundEstimator {
    mode: BackgroundMode,
    k_static: usize,
    shape: Option<(usize, usize)>,
    sum: Vec<f64>,
    window: VecDeque<Vec<f64>>,
    count: usize,
}

impl BackgroundEstimator {
    pub fn new(cfg: &DetectConfig) -> Self {
        Self {
            mode: cfg.background,
            k_static: cfg.k_static,
            shape: None,
            sum: Vec::new(),
            window: VecDeque::new(),
            count: 0,
        }
    }

    /// True once `k_static` frames have been absorbed.
    pub fn is_ready(&self) -> bool {
        self.count >= self.k_static
    }

    /// True when further frames would change the estimate.
    pub fn wants_frames(&self) -> bool {
        match self.mode {
            BackgroundMode::Initial => !self.is_ready(),
            BackgroundMode::Sliding => true,
        }
    }

    pub fn push(&mut self, frame: &CirFrame) -> Result<()> {
        let shape = (frame.taps(), frame.patterns());
        match self.shape {
            None => {
                self.shape = Some(shape);
                self.sum = vec![0.0; frame.data().len()];
            }
            Some(s) if s != shape => return Err(Error::invalid("frame shape changed")),
            _ => {}
        }
        if !self.wants_frames() {
            return Ok(());
        }
        let amps: Vec<f64> = frame.data().iter().map(|z| z.norm()).collect();
        for (s, a) in self.sum.iter_mut().zip(&amps) {
            *s += a;
        }
        self.count += 1;
        if self.mode == BackgroundMode::Sliding {
            self.window.push_back(amps);
            if self.window.len() > self.k_static {
                let old = self.window.pop_front().unwrap();
                for (s, a) in self.sum.iter_mut().zip(old) {
                    *s -= a;
                }
            }
        }
        Ok(())
    }

    pub fn profile(&self) -> Result<BackgroundProfile> {
        let (taps, patterns) = self
            .shape
            .ok_or_else(|| Error::NotReady("no frames absorbed".into()))?;
        let n = match self.mode {
            BackgroundMode::Initial => self.count.min(self.k_static),
            BackgroundMode::Sliding => self.window.len(),
        } as f64;
        AmpMatrix::new(
            taps,
            patterns,
            self.sum.iter().map(|s| (s / n).max(0.0)).collect(),
        )
    }
}
