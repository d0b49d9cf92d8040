use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::profile::ChannelModel;
use crate::dsp::ComplexSeries;
use crate::{Error, Result};

/// Multipath FIR followed by complex AWGN.
///
/// The SNR is measured against the mean power of the nonzero samples after
/// multipath, i.e. the in-burst power. An all-zero input is treated as having
/// unit burst power so the noise floor stays defined.
pub fn apply_channel<R: Rng>(x: &ComplexSeries, ch: &ChannelModel, rng: &mut R) -> Result<ComplexSeries> {
    ch.validate()?;
    let n = x.len();
    if let Some(&d) = ch.tap_delays_samples.iter().find(|&&d| d >= n.max(1)) {
        return Err(Error::Argument(format!("tap delay {d} is not below series length {n}")));
    }

    let mut y = vec![Complex64::default(); n];
    for (&d, &g) in ch.tap_delays_samples.iter().zip(&ch.tap_gains) {
        for (out, &v) in y[d..].iter_mut().zip(&x.iq) {
            *out += g * v;
        }
    }

    if ch.snr_db.is_finite() {
        let (sum, count) = y
            .iter()
            .filter(|v| v.norm_sqr() > 0.0)
            .fold((0.0, 0usize), |(s, c), v| (s + v.norm_sqr(), c + 1));
        let signal = if count > 0 { sum / count as f64 } else { 1.0 };
        let sigma = (signal / 10f64.powf(ch.snr_db / 10.0) / 2.0).sqrt();
        for v in y.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *v += Complex64::new(re, im) * sigma;
        }
    }

    Ok(ComplexSeries { iq: y, sample_rate_hz: x.sample_rate_hz, center_freq_hz: x.center_freq_hz })
}
