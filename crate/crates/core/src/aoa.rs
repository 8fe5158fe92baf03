//! Angle of arrival from per-pattern power profiles.

use crate::detect::Candidate;
use crate::scenesim::Codebook;
use crate::{Error, Result};

/// Correlation score of a power row against the codebook at grid index `i`.
fn score(power: &[f64], codebook: &Codebook, i: usize, norm: f64) -> f64 {
    power
        .iter()
        .enumerate()
        .map(|(p, s)| codebook.pattern(p).gains()[i] * s)
        .sum::<f64>()
        / norm
}

/// Grid angle maximizing Σ_p g_p(θ)·s_p / ‖s‖₂ for a squared-amplitude row.
/// Ties go to the smaller angle.
pub fn estimate_aoa_power(power: &[f64], codebook: &Codebook) -> Result<f64> {
    if power.len() != codebook.len() {
        return Err(Error::invalid(format!(
            "power row has {} entries, codebook has {} patterns",
            power.len(),
            codebook.len()
        )));
    }
    let norm = power.iter().map(|s| s * s).sum::<f64>().sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::invalid("candidate power row has zero norm"));
    }
    let grid = codebook.grid();
    let mut best = 0;
    let mut best_score = score(power, codebook, 0, norm);
    for i in 1..grid.len() {
        let s = score(power, codebook, i, norm);
        if s > best_score {
            best = i;
            best_score = s;
        }
    }
    Ok(grid[best])
}

pub fn estimate_aoa(candidate: &Candidate, codebook: &Codebook) -> Result<f64> {
    estimate_aoa_power(&candidate.power, codebook)
}
