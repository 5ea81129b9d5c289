use num_complex::Complex64;

use super::{DeviceImpairment, IqFrame, PhyError};

/// Applies the device's oscillator offset as a per-sample rotation
/// `s[n]·exp(j·cfo·n)`, then its quadrature skew `Q' = I·sinθ + Q·cosθ`
/// with I left untouched.
pub fn apply_impairments(frame: IqFrame, imp: &DeviceImpairment) -> Result<IqFrame, PhyError> {
    imp.validate(frame.config())?;
    let cfo = imp.cfo_per_sample;
    let (sin_t, cos_t) = imp.skew_deg.to_radians().sin_cos();
    Ok(frame.map_samples(|n, s| {
        let r = if cfo == 0.0 {
            s
        } else {
            s * Complex64::from_polar(1.0, cfo * n as f64)
        };
        Complex64::new(r.re, r.re * sin_t + r.im * cos_t)
    }))
}
