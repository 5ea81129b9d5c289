use std::cell::RefCell;
use std::f64::consts::FRAC_1_SQRT_2;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rustfft::{Fft, FftPlanner};

use super::{IqFrame, OfdmConfig, PhyError};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

/// Gray-coded unit-energy 4-QAM: bit 0 drives I, bit 1 drives Q.
pub fn qam4_map(b0: bool, b1: bool) -> Complex64 {
    let i = if b0 { -FRAC_1_SQRT_2 } else { FRAC_1_SQRT_2 };
    let q = if b1 { -FRAC_1_SQRT_2 } else { FRAC_1_SQRT_2 };
    Complex64::new(i, q)
}

fn qam4_demap(s: Complex64) -> (bool, bool) {
    (s.re < 0.0, s.im < 0.0)
}

/// Places frequency-domain values (symbol-major, `n_subcarriers` per
/// symbol) through a unitary inverse DFT and prepends each symbol's cyclic
/// prefix.
pub fn modulate_bins(bins: &[Complex64], config: &OfdmConfig) -> Result<IqFrame, PhyError> {
    config.validate()?;
    let n = config.n_subcarriers;
    let expected = n * config.n_symbols_per_frame;
    if bins.len() != expected {
        return Err(PhyError::Shape {
            what: "frequency bins",
            expected,
            actual: bins.len(),
        });
    }
    let ifft = plan(n, true);
    let scale = 1.0 / (n as f64).sqrt();
    let mut out = Vec::with_capacity(config.frame_len());
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for sym in bins.chunks_exact(n) {
        buf.copy_from_slice(sym);
        ifft.process(&mut buf);
        buf.iter_mut().for_each(|x| *x *= scale);
        out.extend_from_slice(&buf[n - config.cp_len..]);
        out.extend_from_slice(&buf);
    }
    IqFrame::new(out, *config)
}

/// Maps `bits` (or fresh random bits when `None`) onto a frame.
pub fn generate_frame<R: Rng + ?Sized>(
    bits: Option<&[bool]>,
    config: &OfdmConfig,
    rng: &mut R,
) -> Result<IqFrame, PhyError> {
    config.validate()?;
    let needed = config.bits_per_frame();
    let owned;
    let bits = match bits {
        Some(b) => {
            if b.len() != needed {
                return Err(PhyError::Shape {
                    what: "bits",
                    expected: needed,
                    actual: b.len(),
                });
            }
            b
        }
        None => {
            owned = (0..needed).map(|_| rng.random::<bool>()).collect::<Vec<_>>();
            &owned
        }
    };
    let bins: Vec<Complex64> = bits.chunks_exact(2).map(|p| qam4_map(p[0], p[1])).collect();
    modulate_bins(&bins, config)
}

/// Drops each cyclic prefix, applies a unitary DFT and makes hard 4-QAM decisions.
pub fn demodulate(frame: &IqFrame, config: &OfdmConfig) -> Result<Vec<bool>, PhyError> {
    config.validate()?;
    if frame.len() != config.frame_len() {
        return Err(PhyError::Shape {
            what: "samples",
            expected: config.frame_len(),
            actual: frame.len(),
        });
    }
    let n = config.n_subcarriers;
    let fft = plan(n, false);
    let scale = 1.0 / (n as f64).sqrt();
    let mut bits = Vec::with_capacity(config.bits_per_frame());
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for sym in frame.samples().chunks_exact(config.symbol_len()) {
        buf.copy_from_slice(&sym[config.cp_len..]);
        fft.process(&mut buf);
        for s in &buf {
            let (b0, b1) = qam4_demap(*s * scale);
            bits.push(b0);
            bits.push(b1);
        }
    }
    Ok(bits)
}
