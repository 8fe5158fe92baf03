use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Gain outside the raised-cosine mainlobe of a synthetic pattern.
pub const SIDELOBE_FLOOR: f64 = 0.05;

/// Normalized gain of one beam pattern sampled on the codebook grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamPattern {
    gains: Vec<f64>,
}

impl BeamPattern {
    pub fn new(gains: Vec<f64>) -> Result<Self> {
        if gains.is_empty() {
            return Err(Error::invalid("beam pattern has no samples"));
        }
        if gains.iter().any(|g| !(0.0..=1.0).contains(g)) {
            return Err(Error::invalid("beam pattern gains must lie in [0, 1]"));
        }
        let max = gains.iter().cloned().fold(0.0, f64::max);
        if max <= 0.0 {
            return Err(Error::invalid("beam pattern is identically zero"));
        }
        let gains = gains.into_iter().map(|g| g / max).collect();
        Ok(Self { gains })
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }
}

/// The set of N_p beam patterns over a common uniform azimuth grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    grid_deg: Vec<f64>,
    patterns: Vec<BeamPattern>,
    steering_deg: Vec<f64>,
}

impl Codebook {
    pub fn new(
        grid_deg: Vec<f64>,
        patterns: Vec<BeamPattern>,
        steering_deg: Vec<f64>,
    ) -> Result<Self> {
        if grid_deg.len() < 2 {
            return Err(Error::invalid("codebook grid needs at least two angles"));
        }
        if grid_deg.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("codebook grid must be strictly increasing"));
        }
        if patterns.len() != steering_deg.len() || patterns.is_empty() {
            return Err(Error::invalid("one steering angle per pattern is required"));
        }
        if steering_deg.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid(
                "steering angles must be strictly increasing",
            ));
        }
        if patterns.iter().any(|p| p.gains.len() != grid_deg.len()) {
            return Err(Error::invalid("pattern length does not match the grid"));
        }
        Ok(Self {
            grid_deg,
            patterns,
            steering_deg,
        })
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid_deg
    }

    pub fn steering(&self) -> &[f64] {
        &self.steering_deg
    }

    pub fn pattern(&self, p: usize) -> &BeamPattern {
        &self.patterns[p]
    }

    pub fn patterns(&self) -> &[BeamPattern] {
        &self.patterns
    }

    /// Azimuth limits of the grid.
    pub fn fov(&self) -> (f64, f64) {
        (self.grid_deg[0], *self.grid_deg.last().unwrap())
    }

    /// Gain of pattern `p` at `theta_deg`, linearly interpolated on the grid.
    /// Directions outside the grid are not illuminated and get zero gain.
    pub fn gain(&self, p: usize, theta_deg: f64) -> f64 {
        let (lo, hi) = self.fov();
        if !(lo..=hi).contains(&theta_deg) {
            return 0.0;
        }
        let g = &self.patterns[p].gains;
        let step = (hi - lo) / (self.grid_deg.len() - 1) as f64;
        let pos = (theta_deg - lo) / step;
        let i = (pos.floor() as usize).min(self.grid_deg.len() - 2);
        let frac = pos - i as f64;
        if frac <= 0.0 {
            return g[i];
        }
        if frac >= 1.0 {
            return g[i + 1];
        }
        g[i] * (1.0 - frac) + g[i + 1] * frac
    }

    pub fn gains_at(&self, theta_deg: f64) -> Vec<f64> {
        (0..self.len()).map(|p| self.gain(p, theta_deg)).collect()
    }

    /// FNV-1a over the grid, steering angles and gains. Captures record it
    /// so that tracking refuses a codebook other than the one simulated.
    pub fn fingerprint(&self) -> u64 {
        const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
        const PRIME: u64 = 0x0000_0100_0000_01b3;
        let mut h = OFFSET;
        let mut feed = |v: f64| {
            for b in v.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(PRIME);
            }
        };
        self.grid_deg.iter().for_each(|&v| feed(v));
        self.steering_deg.iter().for_each(|&v| feed(v));
        for p in &self.patterns {
            p.gains.iter().for_each(|&v| feed(v));
        }
        h
    }
}

/// Parameters of the synthetic codebook.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodebookConfig {
    pub patterns: usize,
    pub fov_deg: f64,
    /// Full width of the mainlobe at half gain.
    pub beamwidth_deg: f64,
    pub grid_points: usize,
}

impl Default for CodebookConfig {
    fn default() -> Self {
        Self {
            patterns: 12,
            fov_deg: 90.0,
            beamwidth_deg: 15.0,
            grid_points: 181,
        }
    }
}

impl CodebookConfig {
    pub fn build(&self) -> Result<Codebook> {
        synth_codebook_on_grid(
            self.patterns,
            self.fov_deg,
            self.beamwidth_deg,
            self.grid_points,
        )
    }
}

/// Raised-cosine codebook steered uniformly across `fov_deg`, sampled on a
/// 181-point grid.
///
/// Pattern gain at offset Δ from its steering angle is
/// `floor + (1 - floor)·½(1 + cos(πΔ/bw))` for |Δ| < bw and `floor`
/// beyond, so `bw` is the full width at half gain.
pub fn synth_codebook(n_p: usize, fov_deg: f64, beamwidth_deg: f64) -> Result<Codebook> {
    synth_codebook_on_grid(n_p, fov_deg, beamwidth_deg, 181)
}

fn synth_codebook_on_grid(
    n_p: usize,
    fov_deg: f64,
    beamwidth_deg: f64,
    points: usize,
) -> Result<Codebook> {
    if n_p < 2 {
        return Err(Error::invalid(format!(
            "codebook needs at least 2 patterns, got {n_p}"
        )));
    }
    if !(beamwidth_deg > 0.0) || !(fov_deg > 0.0) {
        return Err(Error::invalid(
            "beamwidth and field of view must be positive",
        ));
    }
    if points < 2 || points.is_multiple_of(2) {
        return Err(Error::invalid("grid_points must be odd and at least 3"));
    }
    // Index-centred formulas keep both the grid and the steering angles
    // exactly antisymmetric about boresight.
    let half = (points - 1) as f64 / 2.0;
    let grid_step = fov_deg / (points - 1) as f64;
    let grid: Vec<f64> = (0..points).map(|j| (j as f64 - half) * grid_step).collect();
    let centre = (n_p - 1) as f64 / 2.0;
    let steer_step = fov_deg / (n_p - 1) as f64;
    let steering: Vec<f64> = (0..n_p).map(|i| (i as f64 - centre) * steer_step).collect();
    let patterns = steering
        .iter()
        .map(|&s| {
            let gains = grid
                .iter()
                .map(|&th| raised_cosine((th - s).abs(), beamwidth_deg))
                .collect();
            BeamPattern::new(gains)
        })
        .collect::<Result<Vec<_>>>()?;
    Codebook::new(grid, patterns, steering)
}

fn raised_cosine(offset_deg: f64, beamwidth_deg: f64) -> f64 {
    if offset_deg >= beamwidth_deg {
        SIDELOBE_FLOOR
    } else {
        let main = 0.5 * (1.0 + (std::f64::consts::PI * offset_deg / beamwidth_deg).cos());
        SIDELOBE_FLOOR + (1.0 - SIDELOBE_FLOOR) * main
    }
}
