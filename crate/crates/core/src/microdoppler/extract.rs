use std::collections::{BTreeMap, VecDeque};

use super::stft::stft_column_window;
use super::{
    clamp_path, doppler_axis, select_beam, select_path, MdConfig, Spectrogram, Stft, StftConfig,
};
use crate::scenesim::Codebook;
use crate::source::FrameSource;
use crate::waveform::CirFrame;
use crate::Result;

/// Position estimate of one track at one tracking step, AP-local frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackPoint {
    pub t: u64,
    pub id: u32,
    pub position: [f64; 2],
}

impl TrackPoint {
    pub fn range(&self) -> f64 {
        self.position[0].hypot(self.position[1])
    }

    pub fn azimuth_deg(&self) -> f64 {
        self.position[1].atan2(self.position[0]).to_degrees()
    }
}

/// Whether a spectrogram ends at column `n`. Windows start at columns
/// 0, hop, 2·hop, … for every track, so windows of different tracks and
/// APs line up in time.
pub fn is_window_end(n: u64, md: &MdConfig) -> bool {
    let t = md.t_window as u64;
    n + 1 >= t && (n + 1 - t).is_multiple_of(md.hop() as u64)
}

/// Raw µD spectrograms of every track.
///
/// Column n of a track uses frames `[nσ, nσ + M)` and the track's estimate
/// at step `n + ceil(M/σ)`, the first step at which those frames are all
/// in the past. Tracks missing any column of a window produce nothing for
/// that window. Output is ordered by window end, then track id.
pub fn extract_stream(
    src: &mut dyn FrameSource,
    codebook: &Codebook,
    points: &[TrackPoint],
    stft_cfg: &StftConfig,
    md: &MdConfig,
) -> Result<Vec<Spectrogram>> {
    md.validate()?;
    let stft = Stft::new(stft_cfg)?;
    let radio = src.radio().clone();
    let axis = doppler_axis(&radio, stft_cfg);
    let lag = stft_cfg.lag();
    let sigma = stft_cfg.sigma as u64;
    let m = stft_cfg.m as u64;
    let t_win = md.t_window as u64;

    let mut by_step: BTreeMap<u64, Vec<TrackPoint>> = BTreeMap::new();
    for p in points {
        by_step.entry(p.t).or_default().push(*p);
    }

    let mut buffer: VecDeque<CirFrame> = VecDeque::with_capacity(stft_cfg.m);
    let mut next_k = 0u64;
    let mut columns: BTreeMap<u32, BTreeMap<u64, Vec<f64>>> = BTreeMap::new();
    let mut out = Vec::new();

    for (&t, pts) in &by_step {
        if t < lag {
            continue;
        }
        let n = t - lag;
        let start = n * sigma;
        let end = start + m;
        if end > src.frame_count() {
            break;
        }
        if start > next_k {
            buffer.clear();
            next_k = start;
        }
        while buffer.front().is_some_and(|f| f.k < start) {
            buffer.pop_front();
        }
        while next_k < end {
            buffer.push_back(src.frame(next_k)?);
            next_k += 1;
        }
        let window = buffer.make_contiguous();
        let mut ids: Vec<&TrackPoint> = pts.iter().collect();
        ids.sort_by_key(|p| p.id);
        for p in ids {
            let beam = select_beam(p.azimuth_deg(), codebook);
            let tap = clamp_path(select_path(p.range(), &radio), radio.taps, md.q)?;
            let mu = stft_column_window(window, tap, beam, &stft, md)?;
            let cols = columns.entry(p.id).or_default();
            cols.insert(n, mu);
            if is_window_end(n, md) {
                let first = n + 1 - t_win;
                if (first..=n).all(|c| cols.contains_key(&c)) {
                    let data: Vec<Vec<f64>> = (first..=n).map(|c| cols[&c].clone()).collect();
                    out.push(Spectrogram::from_columns(
                        &data,
                        axis.clone(),
                        first + lag,
                        p.id,
                    )?);
                }
                let keep_from = first + md.hop() as u64;
                cols.retain(|&c, _| c >= keep_from);
            }
        }
    }
    Ok(out)
}
