//! Radar waveform and array constants.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// FMCW waveform, array and map-shape parameters.
///
/// Defaults model a 77–81 GHz radar with 16 receive antennas: 4 GHz sweeps of
/// 180 µs repeated every 250 µs, 256 chirps per frame, 1024 fast-time samples,
/// 15 frames per second. The RDA map keeps the first 134 range bins (0–5 m)
/// and uses 64 Doppler and 64 azimuth bins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadarParams {
    /// Chirp start frequency f₀ in Hz.
    pub f0: f64,
    /// Chirp end frequency f₁ in Hz.
    pub f1: f64,
    /// Chirp (sweep) duration T_c in seconds.
    pub chirp_duration: f64,
    /// Chirp repetition period T_rep in seconds.
    pub chirp_period: f64,
    /// Chirps per frame P.
    pub chirps_per_frame: usize,
    /// Fast-time samples per chirp N.
    pub fast_time_samples: usize,
    /// Receive antennas Γ in a uniform linear array.
    pub rx_antennas: usize,
    /// Antenna spacing d in meters. The spacing is not pinned by the radar
    /// datasheet values used here; half a wavelength at f₀ is assumed.
    pub antenna_spacing: f64,
    /// Frame rate in Hz.
    pub frame_rate: f64,
    /// Range bins kept after cropping.
    pub range_bins_kept: usize,
    /// Doppler bins in the RDA map (central bins of the P-point spectrum).
    pub doppler_bins: usize,
    /// Azimuth bins in the RDA map (zero-padded DFT over the antennas).
    pub azimuth_bins: usize,
}

impl Default for RadarParams {
    fn default() -> Self {
        let f0 = 77e9;
        RadarParams {
            f0,
            f1: 81e9,
            chirp_duration: 180e-6,
            chirp_period: 250e-6,
            chirps_per_frame: 256,
            fast_time_samples: 1024,
            rx_antennas: 16,
            antenna_spacing: SPEED_OF_LIGHT / f0 / 2.0,
            frame_rate: 15.0,
            range_bins_kept: 134,
            doppler_bins: 64,
            azimuth_bins: 64,
        }
    }
}

impl RadarParams {
    pub fn validate(&self) -> Result<()> {
        if self.bandwidth() <= 0.0 {
            return Err(Error::InvalidSpec("bandwidth B = f1 - f0 must be positive".into()));
        }
        if self.chirp_duration > self.chirp_period {
            return Err(Error::InvalidSpec("chirp duration must not exceed the chirp period".into()));
        }
        if self.range_bins_kept > self.fast_time_samples {
            return Err(Error::InvalidSpec(
                "cannot keep more range bins than fast-time samples".into(),
            ));
        }
        let frame_time = self.frame_rate * self.chirps_per_frame as f64 * self.chirp_period;
        if frame_time > 1.0 {
            return Err(Error::InvalidSpec(format!(
                "frames do not fit in real time: rate*P*T_rep = {frame_time:.3} > 1"
            )));
        }
        if self.doppler_bins > self.chirps_per_frame {
            return Err(Error::InvalidSpec(
                "doppler bins cannot exceed chirps per frame".into(),
            ));
        }
        if self.azimuth_bins < self.rx_antennas {
            return Err(Error::InvalidSpec(
                "azimuth bins must be at least the antenna count".into(),
            ));
        }
        Ok(())
    }

    /// Sweep bandwidth B = f₁ − f₀.
    pub fn bandwidth(&self) -> f64 {
        self.f1 - self.f0
    }

    /// Carrier wavelength λ = c/f₀.
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.f0
    }

    /// Range resolution Δr = c/(2B).
    pub fn range_resolution(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.bandwidth())
    }

    /// Velocity resolution Δv = λ/(2 P T_rep).
    pub fn velocity_resolution(&self) -> f64 {
        self.wavelength() / (2.0 * self.chirps_per_frame as f64 * self.chirp_period)
    }

    /// Maximum range covered by the kept bins.
    pub fn max_range(&self) -> f64 {
        self.range_bins_kept as f64 * self.range_resolution()
    }

    /// Frame period 1/rate.
    pub fn frame_period(&self) -> f64 {
        1.0 / self.frame_rate
    }

    /// Doppler bin index of zero radial velocity.
    pub fn doppler_center_bin(&self) -> usize {
        self.doppler_bins / 2
    }

    /// Azimuth bin index of boresight.
    pub fn azimuth_center_bin(&self) -> usize {
        self.azimuth_bins / 2
    }

    /// Fractional range bin for a range in meters.
    pub fn range_to_bin(&self, range: f64) -> f64 {
        range / self.range_resolution()
    }

    /// Fractional Doppler bin for a radial velocity (positive receding).
    pub fn velocity_to_bin(&self, v_radial: f64) -> f64 {
        self.doppler_center_bin() as f64 + v_radial / self.velocity_resolution()
    }

    /// Fractional azimuth bin for sin(θ): the zero-padded DFT over Γ antennas
    /// maps spatial frequency d·sin(θ)/λ across the azimuth axis.
    pub fn sin_azimuth_to_bin(&self, sin_theta: f64) -> f64 {
        let cycles = self.antenna_spacing * sin_theta / self.wavelength();
        self.azimuth_center_bin() as f64 + cycles * self.azimuth_bins as f64
    }

    /// Physical quantities of a voxel center: (range m, radial velocity m/s,
    /// sin of azimuth).
    pub fn bin_to_physical(&self, range_bin: usize, doppler_bin: usize, azimuth_bin: usize) -> (f64, f64, f64) {
        let r = range_bin as f64 * self.range_resolution();
        let v = (doppler_bin as f64 - self.doppler_center_bin() as f64) * self.velocity_resolution();
        let sin_theta = (azimuth_bin as f64 - self.azimuth_center_bin() as f64)
            / (self.azimuth_bins as f64 * self.antenna_spacing / self.wavelength());
        (r, v, sin_theta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_parameters_are_consistent() {
        let p = RadarParams::default();
        p.validate().unwrap();
        assert_eq!(p.bandwidth(), 4e9);
        // Δr = c/(2B) = 0.0375 m (approximately; c is not exactly 3e8).
        assert!((p.range_resolution() - 0.0375).abs() < 1e-4);
        // Δv = λ/(2·P·T_rep) ≈ 0.0304 m/s.
        assert!((p.velocity_resolution() - 0.0304).abs() < 2e-4);
        // 134 bins reach ≈ 5 m.
        assert!((p.max_range() - 5.025).abs() < 0.01);
        // Duty: 15 fps · 256 chirps · 250 µs = 0.96 s of chirping per second.
        assert!(p.frame_rate * p.chirps_per_frame as f64 * p.chirp_period <= 1.0);
    }

    #[test]
    fn bin_mappings_roundtrip() {
        let p = RadarParams::default();
        // 2 m target sits at fractional bin 2/0.0375 ≈ 53.3.
        let bin = p.range_to_bin(2.0);
        assert!((bin - 53.3).abs() < 0.1);
        // One velocity resolution step moves exactly one Doppler bin.
        let b0 = p.velocity_to_bin(0.0);
        let b1 = p.velocity_to_bin(p.velocity_resolution());
        assert!((b1 - b0 - 1.0).abs() < 1e-12);
        // Boresight maps to the central azimuth bin; sin θ = ±1 to the edges.
        assert!((p.sin_azimuth_to_bin(0.0) - 32.0).abs() < 1e-12);
        assert!((p.sin_azimuth_to_bin(1.0) - 64.0).abs() < 1e-9);
        assert!((p.sin_azimuth_to_bin(-1.0) - 0.0).abs() < 1e-9);
        // bin_to_physical inverts the mapping at bin centers.
        let (r, v, s) = p.bin_to_physical(53, 33, 40);
        assert!((p.range_to_bin(r) - 53.0).abs() < 1e-9);
        assert!((p.velocity_to_bin(v) - 33.0).abs() < 1e-9);
        assert!((p.sin_azimuth_to_bin(s) - 40.0).abs() < 1e-9);
    }

    #[test]
    fn invalid_params_are_rejected() {
        let mut p = RadarParams::default();
        p.f1 = p.f0;
        assert!(p.validate().is_err());
        let mut p = RadarParams::default();
        p.chirp_duration = 300e-6;
        assert!(p.validate().is_err());
        let mut p = RadarParams::default();
        p.range_bins_kept = 2000;
        assert!(p.validate().is_err());
        let mut p = RadarParams::default();
        p.frame_rate = 30.0;
        assert!(p.validate().is_err());
    }
}
