use num_complex::Complex64;

use crate::{Error, Result};

/// One packet's channel estimate: L fast-time taps by N_p beam patterns,
/// stored row-major (tap-major) in linear voltage units.
#[derive(Debug, Clone, PartialEq)]
pub struct CirFrame {
    /// Slow-time index (packet counter).
    pub k: u64,
    taps: usize,
    patterns: usize,
    data: Vec<Complex64>,
}

impl CirFrame {
    pub fn zeros(k: u64, taps: usize, patterns: usize) -> Self {
        Self {
            k,
            taps,
            patterns,
            data: vec![Complex64::new(0.0, 0.0); taps * patterns],
        }
    }

    pub fn from_vec(k: u64, taps: usize, patterns: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != taps * patterns {
            return Err(Error::invalid(format!(
                "frame data has {} entries, expected {}x{}",
                data.len(),
                taps,
                patterns
            )));
        }
        if data.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::invalid("frame contains non-finite entries"));
        }
        Ok(Self {
            k,
            taps,
            patterns,
            data,
        })
    }

    pub fn taps(&self) -> usize {
        self.taps
    }

    pub fn patterns(&self) -> usize {
        self.patterns
    }

    #[inline]
    pub fn get(&self, tap: usize, pattern: usize) -> Complex64 {
        self.data[tap * self.patterns + pattern]
    }

    #[inline]
    pub fn get_mut(&mut self, tap: usize, pattern: usize) -> &mut Complex64 {
        &mut self.data[tap * self.patterns + pattern]
    }

    /// All beam patterns of one tap.
    pub fn row(&self, tap: usize) -> &[Complex64] {
        &self.data[tap * self.patterns..(tap + 1) * self.patterns]
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn same_shape(&self, other: &CirFrame) -> bool {
        self.taps == other.taps && self.patterns == other.patterns
    }
}
