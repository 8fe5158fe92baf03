//! Micro-Doppler spectrograms from the slow-time CIR.
//!
//! For a tracked person at range R̂ and azimuth θ̂ the extractor picks the
//! beam pattern with the highest gain at θ̂ and the tap nearest R̂, takes a
//! Hann-windowed M-point DFT along slow time for each of the Q+1 taps
//! around it, and sums their power. One column is produced per tracking
//! step. Rows are ordered by increasing velocity with 0 m/s at row M/2.

mod extract;
mod stft;

pub use extract::{extract_stream, is_window_end, TrackPoint};
pub use stft::{hann, stft_column, stft_column_window, Stft};

use serde::{Deserialize, Serialize};

use crate::scenesim::Codebook;
use crate::waveform::{RadioConfig, SPEED_OF_LIGHT};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StftConfig {
    /// DFT length M in packets.
    pub m: usize,
    /// Hop σ between columns in packets.
    pub sigma: usize,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self { m: 64, sigma: 16 }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.m.is_power_of_two() || self.m < 2 {
            return Err(Error::invalid(format!(
                "STFT length {} is not a power of two",
                self.m
            )));
        }
        if self.sigma == 0 || self.sigma > self.m {
            return Err(Error::invalid("STFT hop must lie in 1..=M"));
        }
        Ok(())
    }

    /// Tracking steps between the first frame of a column's window and the
    /// step that emits it: ceil(M / σ).
    pub fn lag(&self) -> u64 {
        self.m.div_ceil(self.sigma) as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MdConfig {
    /// Fast-time window: Q+1 taps centred on ℓ*.
    pub q: usize,
    /// Columns per spectrogram T.
    pub t_window: usize,
    /// Columns shared by consecutive spectrograms.
    pub overlap: usize,
    /// Half-width of the removed static band, m/s.
    pub static_band: f64,
}

impl Default for MdConfig {
    fn default() -> Self {
        Self {
            q: 4,
            t_window: 400,
            overlap: 300,
            static_band: 0.28,
        }
    }
}

impl MdConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.q.is_multiple_of(2) {
            return Err(Error::invalid("q must be even"));
        }
        if self.t_window == 0 || self.overlap >= self.t_window {
            return Err(Error::invalid("overlap must be smaller than t_window"));
        }
        if !(self.static_band >= 0.0) {
            return Err(Error::invalid("static_band must be nonnegative"));
        }
        Ok(())
    }

    pub fn hop(&self) -> usize {
        self.t_window - self.overlap
    }
}

/// Velocity resolution Δv = c / (2 f_o M T_c) and limit v_max = c / (4 f_o T_c).
pub fn doppler_resolution(radio: &RadioConfig, stft: &StftConfig) -> (f64, f64) {
    let dv = SPEED_OF_LIGHT / (2.0 * radio.carrier_hz * stft.m as f64 * radio.packet_interval_s);
    let vmax = SPEED_OF_LIGHT / (4.0 * radio.carrier_hz * radio.packet_interval_s);
    (dv, vmax)
}

/// Velocity of every row: (r − M/2)·Δv, which equals −v_max + rΔv.
pub fn doppler_axis(radio: &RadioConfig, stft: &StftConfig) -> Vec<f64> {
    let (dv, _) = doppler_resolution(radio, stft);
    let half = (stft.m / 2) as f64;
    (0..stft.m).map(|r| (r as f64 - half) * dv).collect()
}

/// Pattern with the highest gain at θ̂. Gains within 1e−12 relative of
/// each other count as tied and resolve to the smaller index.
pub fn select_beam(theta_deg: f64, codebook: &Codebook) -> usize {
    let g = codebook.gains_at(theta_deg);
    let mut best = 0;
    for p in 1..g.len() {
        if g[p] > g[best] * (1.0 + 1e-12) + 1e-300 {
            best = p;
        }
    }
    best
}

/// Tap whose distance is nearest R̂, ties to the smaller tap.
pub fn select_path(r_hat: f64, radio: &RadioConfig) -> usize {
    let spacing = radio.tap_spacing();
    let mut best = 0usize;
    let mut best_err = f64::INFINITY;
    // the nearest tap is one of the two bracketing R̂
    let lo = ((r_hat / spacing).floor().max(0.0) as usize).min(radio.taps - 1);
    for l in [lo.saturating_sub(1), lo, (lo + 1).min(radio.taps - 1)] {
        let err = (l as f64 * spacing - r_hat).abs();
        if err < best_err * (1.0 - 1e-12) || (err <= best_err * (1.0 + 1e-12) && l < best) {
            best = l;
            best_err = err;
        }
    }
    best
}

/// ℓ* moved inward so that ℓ* ± Q/2 stays inside the CIR.
pub fn clamp_path(tap: usize, taps: usize, q: usize) -> Result<usize> {
    let half = q / 2;
    if taps < q + 1 {
        return Err(Error::invalid("CIR shorter than the fast-time window"));
    }
    Ok(tap.clamp(half, taps - 1 - half))
}

/// Per-person µD matrix: `rows` velocity bins by `cols` time steps, stored
/// row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub values: Vec<f64>,
    pub rows: usize,
    pub cols: usize,
    pub velocity_axis: Vec<f64>,
    /// Tracking step of the first column.
    pub t0: u64,
    /// Track id the spectrogram belongs to.
    pub subject: u32,
}

impl Spectrogram {
    /// Assemble from columns, each a full velocity profile.
    pub fn from_columns(
        columns: &[Vec<f64>],
        velocity_axis: Vec<f64>,
        t0: u64,
        subject: u32,
    ) -> Result<Self> {
        let rows = velocity_axis.len();
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::invalid(
                "column length differs from the velocity axis",
            ));
        }
        let cols = columns.len();
        let mut values = vec![0.0; rows * cols];
        for (j, c) in columns.iter().enumerate() {
            for (i, v) in c.iter().enumerate() {
                values[i * cols + j] = *v;
            }
        }
        Ok(Self {
            values,
            rows,
            cols,
            velocity_axis,
            t0,
            subject,
        })
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, col)).collect()
    }

    pub fn energy(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Power-weighted mean velocity of every column; zero for empty columns.
    pub fn mean_velocity(&self) -> Vec<f64> {
        (0..self.cols)
            .map(|c| {
                let mut w = 0.0;
                let mut acc = 0.0;
                for r in 0..self.rows {
                    let v = self.get(r, c);
                    w += v;
                    acc += v * self.velocity_axis[r];
                }
                if w > 0.0 {
                    acc / w
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// Relative power spread under which a column is treated as constant.
pub const FLAT_COLUMN: f64 = 1e-12;

/// Number of bins on each side of zero inside the static band, snapping
/// the band edge to the nearest bin.
pub fn static_bins(dv: f64, band: f64) -> i64 {
    (band / dv).round() as i64
}

/// Drop the static band and min-max scale every column to [0, 1]. A column
/// with no spread becomes zeros; spread below `FLAT_COLUMN` of the full
/// column's peak counts as none, so DFT round-off around a static line
/// is not stretched to full scale.
pub fn preprocess(spec: &Spectrogram, cfg: &MdConfig) -> Spectrogram {
    let dv = if spec.velocity_axis.len() >= 2 {
        spec.velocity_axis[1] - spec.velocity_axis[0]
    } else {
        f64::INFINITY
    };
    let k = static_bins(dv, cfg.static_band);
    let keep: Vec<usize> = (0..spec.rows)
        .filter(|&r| (spec.velocity_axis[r] / dv).round().abs() as i64 > k)
        .collect();
    let rows = keep.len();
    let cols = spec.cols;
    let mut values = vec![0.0; rows * cols];
    for c in 0..cols {
        let col: Vec<f64> = keep.iter().map(|&r| spec.get(r, c)).collect();
        let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let peak = (0..spec.rows).map(|r| spec.get(r, c)).fold(0.0, f64::max);
        let span = hi - lo;
        let flat = span <= 0.0 || span <= FLAT_COLUMN * peak;
        for (i, v) in col.iter().enumerate() {
            values[i * cols + c] = if !flat {
                ((v - lo) / span).clamp(0.0, 1.0)
            } else {
                0.0
            };
        }
    }
    Spectrogram {
        values,
        rows,
        cols,
        velocity_axis: keep.iter().map(|&r| spec.velocity_axis[r]).collect(),
        t0: spec.t0,
        subject: spec.subject,
    }
}
