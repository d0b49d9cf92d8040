use rustfft::FftPlanner;

use super::ComplexSeries;
use crate::{Error, Result};

/// Single-record periodogram `|FFT(x)|^2 / (M fs)`, reordered so index 0
/// holds the most negative frequency (same ordering as an `fftshift`).
pub fn psd(x: &ComplexSeries) -> Result<Vec<f64>> {
    let m = x.len();
    if m < 2 {
        return Err(Error::Argument("psd needs at least two samples".into()));
    }
    let mut buf = x.iq.clone();
    FftPlanner::<f64>::new().plan_fft_forward(m).process(&mut buf);
    let scale = 1.0 / (m as f64 * x.sample_rate_hz);
    let mut out: Vec<f64> = buf.iter().map(|c| c.norm_sqr() * scale).collect();
    out.rotate_right(m / 2);
    Ok(out)
}
