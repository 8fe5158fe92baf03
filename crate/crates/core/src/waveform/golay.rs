use num_complex::Complex64;

use crate::{Error, Result};

/// A complementary Golay pair (Ga, Gb) of length N.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GolayPair {
    ga: Vec<i8>,
    gb: Vec<i8>,
}

impl GolayPair {
    pub fn ga(&self) -> &[i8] {
        &self.ga
    }

    pub fn gb(&self) -> &[i8] {
        &self.gb
    }

    pub fn len(&self) -> usize {
        self.ga.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ga.is_empty()
    }
}

/// Builds a length-`n` pair by recursive doubling from a = b = [1]:
/// a' = (a | b), b' = (a | -b).
pub fn golay_pair(n: usize) -> Result<GolayPair> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::invalid(format!(
            "Golay length must be a power of two, got {n}"
        )));
    }
    let mut ga = vec![1i8];
    let mut gb = vec![1i8];
    while ga.len() < n {
        let mut a2 = ga.clone();
        a2.extend_from_slice(&gb);
        let mut b2 = ga.clone();
        b2.extend(gb.iter().map(|&v| -v));
        ga = a2;
        gb = b2;
    }
    Ok(GolayPair { ga, gb })
}

/// Aperiodic autocorrelation for lags -(N-1) ..= N-1; index `lag + N - 1`.
pub fn aperiodic_autocorrelation(seq: &[i8]) -> Vec<i64> {
    let n = seq.len();
    if n == 0 {
        return Vec::new();
    }
    let mut out = vec![0i64; 2 * n - 1];
    for lag in 0..n {
        let r: i64 = (0..n - lag)
            .map(|i| seq[i] as i64 * seq[i + lag] as i64)
            .sum();
        out[n - 1 + lag] = r;
        out[n - 1 - lag] = r;
    }
    out
}

/// One TRN unit: {+Ga, -Gb, +Ga, +Gb, +Ga, -Gb}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrnUnit {
    samples: Vec<i8>,
    block: usize,
}

impl TrnUnit {
    pub fn samples(&self) -> &[i8] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Length N of each of the six Golay blocks.
    pub fn block_len(&self) -> usize {
        self.block
    }
}

// (sign, uses Ga) for each of the six blocks.
const TRN_BLOCKS: [(i8, bool); 6] = [
    (1, true),
    (-1, false),
    (1, true),
    (1, false),
    (1, true),
    (-1, false),
];

pub fn build_trn_unit(pair: &GolayPair) -> TrnUnit {
    let n = pair.len();
    let mut samples = Vec::with_capacity(6 * n);
    for (sign, use_a) in TRN_BLOCKS {
        let seq = if use_a { pair.ga() } else { pair.gb() };
        samples.extend(seq.iter().map(|&v| sign * v));
    }
    TrnUnit { samples, block: n }
}

/// Linear convolution of the TRN unit with an L-tap channel, zero-padded
/// to `6N + L` samples (the minimum [`estimate_cir`] accepts).
pub fn propagate(unit: &TrnUnit, channel: &[Complex64]) -> Vec<Complex64> {
    let mut rx = vec![Complex64::new(0.0, 0.0); unit.len() + channel.len()];
    for (d, &h) in channel.iter().enumerate() {
        if h == Complex64::new(0.0, 0.0) {
            continue;
        }
        for (i, &s) in unit.samples().iter().enumerate() {
            rx[i + d] += h * s as f64;
        }
    }
    rx
}

/// Correlation estimate of the first `taps` channel taps from a received
/// TRN unit that starts at `rx[0]`.
///
/// Blocks 1..=4 (-Gb, +Ga, +Gb, +Ga) are correlated against their own
/// sequence and sign-corrected. Blocks 0 and 5 act as cyclic extensions, so
/// for any lag |s| < N the tail/head cross terms of the four windows cancel
/// and the Ga and Gb autocorrelation sidelobes cancel pairwise. The sum is
/// 4N at lag 0 and exactly 0 elsewhere, hence `taps <= N`.
pub fn estimate_cir(rx: &[Complex64], pair: &GolayPair, taps: usize) -> Result<Vec<Complex64>> {
    let n = pair.len();
    if taps == 0 || taps > n {
        return Err(Error::invalid(format!(
            "tap count must be in 1..={n} for a length-{n} Golay pair, got {taps}"
        )));
    }
    if rx.len() < 6 * n + taps {
        return Err(Error::invalid(format!(
            "received sequence has {} samples, need at least {}",
            rx.len(),
            6 * n + taps
        )));
    }
    let scale = 1.0 / (4 * n) as f64;
    let mut out = Vec::with_capacity(taps);
    for tap in 0..taps {
        let mut acc = Complex64::new(0.0, 0.0);
        for (block, &(sign, use_a)) in TRN_BLOCKS.iter().enumerate().take(5).skip(1) {
            let seq = if use_a { pair.ga() } else { pair.gb() };
            let start = block * n + tap;
            let mut c = Complex64::new(0.0, 0.0);
            for (i, &g) in seq.iter().enumerate() {
                c += rx[start + i] * g as f64;
            }
            acc += c * sign as f64;
        }
        out.push(acc * scale);
    }
    Ok(out)
}
