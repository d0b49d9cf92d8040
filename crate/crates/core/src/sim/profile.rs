use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result};

/// Hardware impairments that make one simulated emitter distinguishable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmitterProfile {
    pub cfo_hz: f64,
    pub iq_gain_imbalance: f64,
    pub iq_phase_imbalance_rad: f64,
    pub dc_offset: Complex64,
    pub pa_a3: f64,
    pub pa_a5: f64,
    pub phase_noise_std_rad: f64,
    pub seed: u64,
}

impl EmitterProfile {
    /// An emitter with no impairments.
    pub fn ideal(seed: u64) -> Self {
        EmitterProfile {
            cfo_hz: 0.0,
            iq_gain_imbalance: 1.0,
            iq_phase_imbalance_rad: 0.0,
            dc_offset: Complex64::default(),
            pa_a3: 0.0,
            pa_a5: 0.0,
            phase_noise_std_rad: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.iq_gain_imbalance > 0.0) {
            return Err(Error::Config(format!(
                "iq_gain_imbalance must be positive, got {}",
                self.iq_gain_imbalance
            )));
        }
        if !(self.phase_noise_std_rad >= 0.0) {
            return Err(Error::Config(format!(
                "phase_noise_std_rad must be >= 0, got {}",
                self.phase_noise_std_rad
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopConfig {
    #[serde(default = "HopConfig::default_channels")]
    pub num_channels: usize,
    #[serde(default = "HopConfig::default_spacing")]
    pub channel_spacing_hz: f64,
    #[serde(default = "HopConfig::default_hop_rate")]
    pub hop_rate_hz: f64,
    #[serde(default)]
    pub tuned_channel: usize,
    #[serde(default = "HopConfig::default_symbol_rate")]
    pub symbol_rate_hz: f64,
    #[serde(default = "HopConfig::default_mod_index")]
    pub modulation_index: f64,
    #[serde(default = "HopConfig::default_duty")]
    pub burst_duty: f64,
    /// Seed of the pseudorandom hop sequence.
    #[serde(default)]
    pub hop_seed: u64,
}

impl HopConfig {
    fn default_channels() -> usize {
        40
    }
    fn default_spacing() -> f64 {
        2e6
    }
    fn default_hop_rate() -> f64 {
        1600.0
    }
    fn default_symbol_rate() -> f64 {
        1e6
    }
    fn default_mod_index() -> f64 {
        0.5
    }
    fn default_duty() -> f64 {
        1.0
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_channels == 0 || self.tuned_channel >= self.num_channels {
            return Err(Error::Config(format!(
                "tuned_channel {} must be below num_channels {}",
                self.tuned_channel, self.num_channels
            )));
        }
        if !(self.hop_rate_hz > 0.0) {
            return Err(Error::Config("hop_rate_hz must be positive".into()));
        }
        if !(self.burst_duty > 0.0 && self.burst_duty <= 1.0) {
            return Err(Error::Config(format!("burst_duty must be in (0, 1], got {}", self.burst_duty)));
        }
        if !(self.symbol_rate_hz > 0.0) {
            return Err(Error::Config("symbol_rate_hz must be positive".into()));
        }
        Ok(())
    }
}

impl Default for HopConfig {
    fn default() -> Self {
        HopConfig {
            num_channels: 40,
            channel_spacing_hz: 2e6,
            hop_rate_hz: 1600.0,
            tuned_channel: 6,
            symbol_rate_hz: 1e6,
            modulation_index: 0.5,
            burst_duty: 1.0,
            hop_seed: 0,
        }
    }
}

/// Tapped-delay-line multipath plus AWGN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub tap_delays_samples: Vec<usize>,
    pub tap_gains: Vec<Complex64>,
    /// Per-burst SNR; `null` in JSON means noiseless.
    #[serde(serialize_with = "ser_snr", deserialize_with = "de_snr")]
    pub snr_db: f64,
}

fn ser_snr<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

fn de_snr<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

impl ChannelModel {
    pub fn ideal() -> Self {
        ChannelModel {
            tap_delays_samples: vec![0],
            tap_gains: vec![Complex64::new(1.0, 0.0)],
            snr_db: f64::INFINITY,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tap_delays_samples.is_empty() || self.tap_delays_samples.len() != self.tap_gains.len() {
            return Err(Error::Config("channel needs matching, non-empty tap delay and gain lists".into()));
        }
        if self.tap_delays_samples[0] != 0 {
            return Err(Error::Config("first channel tap must have delay 0".into()));
        }
        if self.snr_db.is_nan() {
            return Err(Error::Config("snr_db must not be NaN".into()));
        }
        Ok(())
    }
}

/// Five emitters used by the desk-scale experiments. CFOs sit a few kHz
/// apart and the remaining impairments vary mildly per device.
pub fn desk_profiles() -> Vec<EmitterProfile> {
    let specs = [
        (-6.0e3, 1.02, 0.020, (0.075, -0.025), 0.05, -0.010, 0.004),
        (-3.0e3, 0.97, -0.030, (-0.050, 0.060), 0.08, 0.000, 0.006),
        (0.5e3, 1.05, 0.010, (0.025, 0.075), 0.03, -0.020, 0.003),
        (3.5e3, 0.99, 0.045, (0.085, 0.025), 0.06, 0.010, 0.005),
        (6.5e3, 1.01, -0.015, (-0.060, -0.075), 0.10, -0.015, 0.007),
    ];
    specs
        .iter()
        .enumerate()
        .map(|(i, &(cfo, g, ph, (dr, di), a3, a5, pn))| EmitterProfile {
            cfo_hz: cfo,
            iq_gain_imbalance: g,
            iq_phase_imbalance_rad: ph,
            dc_offset: Complex64::new(dr, di),
            pa_a3: -a3,
            pa_a5: a5,
            phase_noise_std_rad: pn,
            seed: 1000 + i as u64,
        })
        .collect()
}

/// Train-side (line of sight) and TTD-side (richer multipath, lower SNR) channels.
pub fn desk_channel_plan() -> (ChannelModel, ChannelModel) {
    let los = ChannelModel {
        tap_delays_samples: vec![0, 1],
        tap_gains: vec![Complex64::new(1.0, 0.0), Complex64::new(0.15, 0.05)],
        snr_db: 15.0,
    };
    let multipath = ChannelModel {
        tap_delays_samples: vec![0, 2, 5, 9],
        tap_gains: vec![
            Complex64::new(0.8, 0.1),
            Complex64::new(-0.4, 0.35),
            Complex64::new(0.25, -0.3),
            Complex64::new(0.1, 0.15),
        ],
        snr_db: 0.0,
    };
    (los, multipath)
}
