//! Transmitter fingerprints: CFO from cyclic-prefix lag correlation and
//! quadrature skew from I/Q cross-correlation, plus labeled dataset
//! generation.

mod dataset;

pub use dataset::{
    default_roster, gen_dataset, gen_dataset_with, read_roster, write_roster, Dataset, DatasetMeta,
    LabeledRow, RosterDefaults, RosterEntry, Scenario,
};

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::phy::{IqFrame, OfdmConfig, PhyError};

#[derive(Debug, Error)]
pub enum FingerprintError {
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("invalid extractor config: {0}")]
    Config(String),
    #[error("frame too short: need {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("roster: {0}")]
    Roster(String),
    #[error("dataset: {0}")]
    Dataset(String),
    #[error(transparent)]
    Phy(#[from] PhyError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How the normalized estimate becomes Hz.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HzScaling {
    /// `n_total · ε̂ · F_s`.
    #[default]
    WindowTimesRate,
    /// `ε̂ · F_s`, the physical frequency when ε̂ is in cycles per sample.
    RateOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractorConfig {
    /// Correlation lag in samples.
    pub lag: usize,
    /// Window length; the frame is cut into consecutive windows of this size
    /// and each contributes one estimate.
    pub n_total: usize,
    pub sample_rate_hz: f64,
    #[serde(default)]
    pub hz_scaling: HzScaling,
    /// Skew guard: `|ΣI² − ΣQ²|` below `skew_eps · energy` is degenerate.
    #[serde(default = "default_skew_eps")]
    pub skew_eps: f64,
}

fn default_skew_eps() -> f64 {
    1e-12
}

impl ExtractorConfig {
    /// Lag of one FFT length over one prefixed symbol, so the summed products
    /// are exactly the prefix against the tail it copies.
    pub fn for_ofdm(cfg: &OfdmConfig) -> Self {
        ExtractorConfig {
            lag: cfg.n_subcarriers,
            n_total: cfg.n_subcarriers + cfg.cp_len,
            sample_rate_hz: cfg.sample_rate_hz,
            hz_scaling: HzScaling::default(),
            skew_eps: default_skew_eps(),
        }
    }

    pub fn validate(&self) -> Result<(), FingerprintError> {
        if self.lag < 1 {
            return Err(FingerprintError::Config("lag must be at least 1".into()));
        }
        if self.n_total <= self.lag {
            return Err(FingerprintError::Config(format!(
                "n_total ({}) must exceed lag ({})",
                self.n_total, self.lag
            )));
        }
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(FingerprintError::Config("sample_rate_hz must be positive".into()));
        }
        if !(self.skew_eps.is_finite() && self.skew_eps >= 0.0) {
            return Err(FingerprintError::Config("skew_eps must be non-negative".into()));
        }
        Ok(())
    }

    /// Largest per-sample rotation the estimator resolves without wrapping.
    pub fn acquisition_limit(&self) -> f64 {
        PI / self.lag as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub cfo_hz: f64,
    pub skew_deg: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub device_id: Option<String>,
}

impl FeatureVector {
    pub fn as_array(&self) -> [f64; 2] {
        [self.cfo_hz, self.skew_deg]
    }
}

/// Normalized CFO in cycles per sample, from raw samples. Each `n_total`
/// window yields `arg Σ conj(r[n])·r[n+L] / (2πL)` over `n < n_total − L`;
/// the window estimates are averaged. Windows with zero correlation are
/// skipped.
pub fn cfo_estimate(samples: &[Complex64], cfg: &ExtractorConfig) -> Result<f64, FingerprintError> {
    cfg.validate()?;
    if samples.len() < cfg.n_total {
        return Err(FingerprintError::TooShort {
            needed: cfg.n_total,
            got: samples.len(),
        });
    }
    let span = cfg.n_total - cfg.lag;
    let mut acc = 0.0;
    let mut used = 0usize;
    for w in samples.chunks_exact(cfg.n_total) {
        let corr: Complex64 = (0..span).map(|n| w[n].conj() * w[n + cfg.lag]).sum();
        if corr.norm_sqr() == 0.0 {
            continue;
        }
        acc += corr.arg() / (2.0 * PI * cfg.lag as f64);
        used += 1;
    }
    if used == 0 {
        return Err(FingerprintError::Degenerate(
            "lag correlation is zero in every window".into(),
        ));
    }
    Ok(acc / used as f64)
}

pub fn cfo_extract(frame: &IqFrame, cfg: &ExtractorConfig) -> Result<f64, FingerprintError> {
    cfo_estimate(frame.samples(), cfg)
}

pub fn cfo_to_hz(eps_hat: f64, cfg: &ExtractorConfig) -> f64 {
    match cfg.hz_scaling {
        HzScaling::WindowTimesRate => cfg.n_total as f64 * eps_hat * cfg.sample_rate_hz,
        HzScaling::RateOnly => eps_hat * cfg.sample_rate_hz,
    }
}

/// Skew angle in degrees, `atan(ΣIQ / (ΣI² − ΣQ²))` over all samples.
pub fn skew_estimate(samples: &[Complex64], eps: f64) -> Result<f64, FingerprintError> {
    let (mut iq, mut ii, mut qq) = (0.0, 0.0, 0.0);
    for s in samples {
        iq += s.re * s.im;
        ii += s.re * s.re;
        qq += s.im * s.im;
    }
    let den = ii - qq;
    let energy = ii + qq;
    if energy == 0.0 || den.abs() < eps * energy {
        return Err(FingerprintError::Degenerate(format!(
            "I and Q powers too close (ΣI²−ΣQ² = {den:e}, energy {energy:e})"
        )));
    }
    Ok((iq / den).atan().to_degrees())
}

pub fn quad_skew(frame: &IqFrame) -> Result<f64, FingerprintError> {
    skew_estimate(frame.samples(), default_skew_eps())
}

pub fn extract_features(frame: &IqFrame, cfg: &ExtractorConfig) -> Result<FeatureVector, FingerprintError> {
    let eps_hat = cfo_extract(frame, cfg)?;
    let skew_deg = skew_estimate(frame.samples(), cfg.skew_eps)?;
    Ok(FeatureVector {
        cfo_hz: cfo_to_hz(eps_hat, cfg),
        skew_deg,
        device_id: None,
    })
}
