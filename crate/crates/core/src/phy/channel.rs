use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{ChannelConfig, IqFrame, PhyError};

/// Independent taps at delays `0..n_paths`: Rayleigh magnitude, phase
/// uniform on `[-π, π)`, unit total mean power.
pub fn draw_taps<R: Rng + ?Sized>(n_paths: usize, rng: &mut R) -> Vec<Complex64> {
    let per_path = 1.0 / n_paths as f64;
    (0..n_paths)
        .map(|_| {
            // |h|^2 ~ Exp(per_path) gives a Rayleigh magnitude
            let u: f64 = rng.random();
            let mag = (-(1.0 - u).ln() * per_path).sqrt();
            let phase = rng.random_range(-PI..PI);
            Complex64::from_polar(mag, phase)
        })
        .collect()
}

/// Convolves with `taps` (truncated to the frame) and adds complex AWGN at
/// `snr_db` relative to the measured power of the faded signal.
pub fn apply_channel_with_taps<R: Rng + ?Sized>(
    frame: IqFrame,
    taps: &[Complex64],
    snr_db: f64,
    rng: &mut R,
) -> Result<IqFrame, PhyError> {
    if taps.is_empty() {
        return Err(PhyError::Config("channel needs at least one tap".into()));
    }
    let x = frame.samples();
    let mut y: Vec<Complex64> = (0..x.len())
        .map(|n| {
            taps.iter()
                .enumerate()
                .take(n + 1)
                .map(|(l, h)| h * x[n - l])
                .sum()
        })
        .collect();

    if snr_db.is_finite() {
        let sig_power = y.iter().map(|s| s.norm_sqr()).sum::<f64>() / y.len() as f64;
        let noise_power = sig_power / 10f64.powf(snr_db / 10.0);
        let sigma = (noise_power / 2.0).sqrt();
        for s in y.iter_mut() {
            let ni: f64 = StandardNormal.sample(rng);
            let nq: f64 = StandardNormal.sample(rng);
            *s += Complex64::new(ni * sigma, nq * sigma);
        }
    }
    IqFrame::new(y, *frame.config())
}

/// Draws a fresh tap vector from `rng`, then noise from the same stream.
pub fn apply_channel<R: Rng + ?Sized>(
    frame: IqFrame,
    ch: &ChannelConfig,
    rng: &mut R,
) -> Result<IqFrame, PhyError> {
    ch.validate()?;
    let taps = draw_taps(ch.n_paths, rng);
    apply_channel_with_taps(frame, &taps, ch.snr_db, rng)
}
