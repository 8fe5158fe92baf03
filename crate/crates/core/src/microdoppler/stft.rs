use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{MdConfig, StftConfig};
use crate::waveform::CirFrame;
use crate::{Error, Result};

/// Periodic Hann window, w(m) = 0.5·(1 − cos(2πm/M)).
pub fn hann(m: usize) -> Vec<f64> {
    (0..m)
        .map(|i| 0.5 * (1.0 - (2.0 * PI * i as f64 / m as f64).cos()))
        .collect()
}

/// Planned M-point transform with its window.
///
/// The DFT is unnormalized, H(i) = Σ_m x(m) w(m) e^{−j2πim/M}, so
/// Σ_i |H(i)|² = M · Σ_m |x(m) w(m)|².
#[derive(Clone)]
pub struct Stft {
    m: usize,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Stft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Stft").field("m", &self.m).finish()
    }
}

impl Stft {
    pub fn new(cfg: &StftConfig) -> Result<Self> {
        cfg.validate()?;
        let fft = FftPlanner::new().plan_fft_forward(cfg.m);
        Ok(Self {
            m: cfg.m,
            window: hann(cfg.m),
            fft,
        })
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    /// Windowed DFT of `x` in natural bin order.
    pub fn spectrum(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = x.iter().zip(&self.window).map(|(z, w)| z * w).collect();
        self.fft.process(&mut buf);
        buf
    }

    /// Add |H|² of `x` into `acc`, rotated so that row r holds bin
    /// (r + M/2) mod M.
    pub fn accumulate_power(&self, x: &[Complex64], acc: &mut [f64]) {
        let h = self.spectrum(x);
        let half = self.m / 2;
        for (r, a) in acc.iter_mut().enumerate() {
            *a += h[(r + half) % self.m].norm_sqr();
        }
    }
}

/// µ column from exactly M consecutive frames, summing the Q+1 taps
/// centred on `tap` at beam pattern `pattern`.
pub fn stft_column_window(
    window: &[CirFrame],
    tap: usize,
    pattern: usize,
    stft: &Stft,
    md: &MdConfig,
) -> Result<Vec<f64>> {
    if window.len() != stft.len() {
        return Err(Error::invalid(format!(
            "STFT needs {} frames, got {}",
            stft.len(),
            window.len()
        )));
    }
    let taps = window[0].taps();
    let half = md.q / 2;
    if tap < half || tap + half >= taps || pattern >= window[0].patterns() {
        return Err(Error::invalid("fast-time window leaves the CIR"));
    }
    let mut mu = vec![0.0; stft.len()];
    let mut series = vec![Complex64::new(0.0, 0.0); stft.len()];
    for l in tap - half..=tap + half {
        for (s, f) in series.iter_mut().zip(window) {
            *s = f.get(l, pattern);
        }
        stft.accumulate_power(&series, &mut mu);
    }
    Ok(mu)
}

/// Column `n` of a buffer whose entry `k` is slow-time sample `k`: the
/// window is frames `[nσ, nσ + M)`.
pub fn stft_column(
    buffer: &[CirFrame],
    tap: usize,
    pattern: usize,
    n: usize,
    cfg: &StftConfig,
    md: &MdConfig,
) -> Result<Vec<f64>> {
    let start = n * cfg.sigma;
    let end = start + cfg.m;
    if buffer.len() < end {
        return Err(Error::NotReady(format!(
            "column {n} needs {end} frames, buffer holds {}",
            buffer.len()
        )));
    }
    let stft = Stft::new(cfg)?;
    stft_column_window(&buffer[start..end], tap, pattern, &stft, md)
}
