//! Golay training fields, correlation CIR estimation and the radio
//! parameters that tie CIR taps to physical distance.

mod frame;
mod golay;

pub use frame::CirFrame;
pub use golay::{
    aperiodic_autocorrelation, build_trn_unit, estimate_cir, golay_pair, propagate, GolayPair,
    TrnUnit,
};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Front-end and framing parameters of one access point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioConfig {
    /// Carrier frequency f_o in Hz.
    pub carrier_hz: f64,
    /// Signal bandwidth B in Hz.
    pub bandwidth_hz: f64,
    /// Spacing T_c between consecutive sensing packets, seconds.
    pub packet_interval_s: f64,
    /// ADC samples per symbol; 2 gives 3.52 GSPS at 1.76 GHz.
    pub samples_per_symbol: u32,
    /// Number of CIR taps L kept per estimate.
    pub taps: usize,
    /// Number of beam patterns N_p (TRN units) per packet.
    pub patterns: usize,
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self {
            carrier_hz: 60.48e9,
            bandwidth_hz: 1.76e9,
            packet_interval_s: 0.27e-3,
            samples_per_symbol: 2,
            taps: 192,
            patterns: 12,
        }
    }
}

impl RadioConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("carrier_hz", self.carrier_hz),
            ("bandwidth_hz", self.bandwidth_hz),
            ("packet_interval_s", self.packet_interval_s),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.samples_per_symbol < 1 {
            return Err(Error::invalid("samples_per_symbol must be at least 1"));
        }
        if self.taps == 0 || self.patterns == 0 {
            return Err(Error::invalid("taps and patterns must be positive"));
        }
        Ok(())
    }

    /// ADC sample rate in samples per second.
    pub fn sample_rate(&self) -> f64 {
        self.bandwidth_hz * self.samples_per_symbol as f64
    }

    /// One-way distance covered by one tap: c / (2 f_s), which is c / (4B)
    /// at two samples per symbol.
    pub fn tap_spacing(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.sample_rate())
    }

    /// Distance of every tap, d_0 .. d_{L-1}.
    pub fn tap_distances(&self) -> Vec<f64> {
        (0..self.taps).map(|l| tap_to_distance(l, self)).collect()
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    /// Phase advance per packet per m/s of radial velocity, 4π f_o T_c / c.
    pub fn phase_per_velocity(&self) -> f64 {
        4.0 * std::f64::consts::PI * self.carrier_hz * self.packet_interval_s / SPEED_OF_LIGHT
    }
}

/// Reflector distance of tap `tap`: d = c·ℓ / (4B) at the default
/// oversampling. The tap index plays the role of the delay.
pub fn tap_to_distance(tap: usize, cfg: &RadioConfig) -> f64 {
    tap as f64 * cfg.tap_spacing()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_of_first_taps() {
        let cfg = RadioConfig::default();
        assert_eq!(tap_to_distance(0, &cfg), 0.0);
        let d1 = SPEED_OF_LIGHT / (4.0 * 1.76e9);
        assert_eq!(tap_to_distance(1, &cfg), d1);
        assert!((tap_to_distance(1, &cfg) - 0.0426).abs() < 1e-4);
        assert!((tap_to_distance(100, &cfg) - 4.26).abs() < 5e-3);
    }

    #[test]
    fn tap_spacing_is_constant() {
        let cfg = RadioConfig::default();
        let step = SPEED_OF_LIGHT / (4.0 * cfg.bandwidth_hz);
        for l in 0..500 {
            let diff = tap_to_distance(l + 1, &cfg) - tap_to_distance(l, &cfg);
            assert!((diff - step).abs() <= 4.0 * f64::EPSILON * tap_to_distance(l + 1, &cfg));
        }
    }

    #[test]
    fn rejects_nonpositive_parameters() {
        let mut cfg = RadioConfig::default();
        cfg.bandwidth_hz = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = RadioConfig::default();
        cfg.samples_per_symbol = 0;
        assert!(cfg.validate().is_err());
        assert!(RadioConfig::default().validate().is_ok());
    }
}
