//! OFDM baseband physical layer: frame synthesis, transmitter impairments,
//! multipath Rayleigh channel with AWGN, and demodulation.

mod channel;
mod impair;
mod ofdm;

pub use channel::{apply_channel, apply_channel_with_taps, draw_taps};
pub use impair::apply_impairments;
pub use ofdm::{demodulate, generate_frame, modulate_bins, qam4_map};

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PhyError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("input shape: expected {expected} {what}, got {actual}")]
    Shape {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("frame contains non-finite samples")]
    NonFinite,
    #[error("impairment out of range: {0}")]
    Impairment(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Modulation {
    #[default]
    Qam4,
}

impl Modulation {
    pub fn bits_per_symbol(&self) -> usize {
        match self {
            Modulation::Qam4 => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OfdmConfig {
    pub n_subcarriers: usize,
    pub cp_len: usize,
    pub sample_rate_hz: f64,
    #[serde(default)]
    pub modulation: Modulation,
    pub n_symbols_per_frame: usize,
}

impl Default for OfdmConfig {
    fn default() -> Self {
        OfdmConfig {
            n_subcarriers: 256,
            cp_len: 64,
            sample_rate_hz: 5_000_000.0,
            modulation: Modulation::Qam4,
            n_symbols_per_frame: 8,
        }
    }
}

impl OfdmConfig {
    pub fn validate(&self) -> Result<(), PhyError> {
        if !self.n_subcarriers.is_power_of_two() || self.n_subcarriers < 2 {
            return Err(PhyError::Config(format!(
                "n_subcarriers must be a power of two, got {}",
                self.n_subcarriers
            )));
        }
        if self.cp_len == 0 || self.cp_len >= self.n_subcarriers {
            return Err(PhyError::Config(format!(
                "cp_len must be in (0, {}), got {}",
                self.n_subcarriers, self.cp_len
            )));
        }
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(PhyError::Config("sample_rate_hz must be positive".into()));
        }
        if self.n_symbols_per_frame == 0 {
            return Err(PhyError::Config("n_symbols_per_frame must be >= 1".into()));
        }
        Ok(())
    }

    pub fn symbol_len(&self) -> usize {
        self.n_subcarriers + self.cp_len
    }

    pub fn frame_len(&self) -> usize {
        self.n_symbols_per_frame * self.symbol_len()
    }

    pub fn bits_per_frame(&self) -> usize {
        self.n_symbols_per_frame * self.n_subcarriers * self.modulation.bits_per_symbol()
    }

    /// Largest |cfo_per_sample| the cyclic-prefix correlator resolves without wrapping.
    pub fn max_cfo_per_sample(&self) -> f64 {
        PI / self.n_subcarriers as f64
    }
}

mod snr_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// Multipath channel. `snr_db = +inf` (JSON `null`) disables noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub n_paths: usize,
    #[serde(with = "snr_serde")]
    pub snr_db: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            n_paths: 10,
            snr_db: 5.0,
        }
    }
}

impl ChannelConfig {
    pub fn noiseless(n_paths: usize) -> Self {
        ChannelConfig {
            n_paths,
            snr_db: f64::INFINITY,
        }
    }

    pub fn validate(&self) -> Result<(), PhyError> {
        if self.n_paths == 0 {
            return Err(PhyError::Config("n_paths must be >= 1".into()));
        }
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return Err(PhyError::Config("snr_db must be a number or +inf".into()));
        }
        Ok(())
    }
}

/// The flat JSON config file: OFDM plus channel keys.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct PhyConfig {
    #[serde(flatten)]
    pub ofdm: OfdmConfig,
    #[serde(flatten)]
    pub channel: ChannelConfig,
}

impl PhyConfig {
    pub fn validate(&self) -> Result<(), PhyError> {
        self.ofdm.validate()?;
        self.channel.validate()
    }
}

/// Converts the scenario-facing CFO unit (thousandths of a subcarrier
/// spacing) to a per-sample phase increment.
pub fn normalized_units_to_cfo(units: f64, n_subcarriers: usize) -> f64 {
    units * 2.0 * PI / (1000.0 * n_subcarriers as f64)
}

pub fn cfo_to_normalized_units(cfo_per_sample: f64, n_subcarriers: usize) -> f64 {
    cfo_per_sample * 1000.0 * n_subcarriers as f64 / (2.0 * PI)
}

/// Ground-truth transmitter fingerprint of one device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceImpairment {
    pub device_id: String,
    /// Radians per sample.
    pub cfo_per_sample: f64,
    pub skew_deg: f64,
}

impl DeviceImpairment {
    pub fn ideal(device_id: impl Into<String>) -> Self {
        DeviceImpairment {
            device_id: device_id.into(),
            cfo_per_sample: 0.0,
            skew_deg: 0.0,
        }
    }

    pub fn validate(&self, cfg: &OfdmConfig) -> Result<(), PhyError> {
        if !self.cfo_per_sample.is_finite() || self.cfo_per_sample.abs() >= cfg.max_cfo_per_sample() {
            return Err(PhyError::Impairment(format!(
                "{}: |cfo_per_sample| = {} must be below {}",
                self.device_id,
                self.cfo_per_sample.abs(),
                cfg.max_cfo_per_sample()
            )));
        }
        if !self.skew_deg.is_finite() || self.skew_deg.abs() >= 45.0 {
            return Err(PhyError::Impairment(format!(
                "{}: |skew_deg| = {} must be below 45",
                self.device_id, self.skew_deg
            )));
        }
        Ok(())
    }
}

/// Complex baseband samples for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct IqFrame {
    samples: Vec<Complex64>,
    config: OfdmConfig,
}

impl IqFrame {
    pub fn new(samples: Vec<Complex64>, config: OfdmConfig) -> Result<Self, PhyError> {
        config.validate()?;
        if samples.len() != config.frame_len() {
            return Err(PhyError::Shape {
                what: "samples",
                expected: config.frame_len(),
                actual: samples.len(),
            });
        }
        if samples.iter().any(|s| !s.re.is_finite() || !s.im.is_finite()) {
            return Err(PhyError::NonFinite);
        }
        Ok(IqFrame { samples, config })
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn config(&self) -> &OfdmConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean_power(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }

    /// Debug dump with header `n,i,q`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), PhyError> {
        writeln!(out, "n,i,q")?;
        for (n, s) in self.samples.iter().enumerate() {
            writeln!(out, "{},{},{}", n, s.re, s.im)?;
        }
        Ok(())
    }

    pub(crate) fn map_samples(mut self, f: impl Fn(usize, Complex64) -> Complex64) -> Self {
        for (n, s) in self.samples.iter_mut().enumerate() {
            *s = f(n, *s);
        }
        self
    }
}
