use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::profile::{EmitterProfile, HopConfig};
use crate::dsp::ComplexSeries;
use crate::seed;
use crate::{Error, Result};

const BT_PRODUCT: f64 = 0.5;

/// Unit-amplitude GFSK baseband for `n` samples of random data bits.
pub fn gfsk_baseband<R: Rng>(n: usize, fs: f64, hops: &HopConfig, rng: &mut R) -> Vec<Complex64> {
    if n == 0 {
        return Vec::new();
    }
    let sps = fs / hops.symbol_rate_hz;
    let n_sym = (n as f64 / sps).ceil() as usize + 1;
    let bits: Vec<f64> = (0..n_sym).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect();

    let sigma = (2f64.ln()).sqrt() / (2.0 * PI * BT_PRODUCT) * sps;
    let half = (3.0 * sigma).ceil().max(1.0) as isize;
    let mut taps: Vec<f64> = (-half..=half).map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let norm: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= norm);

    let nrz = |i: isize| -> f64 {
        let i = i.clamp(0, n as isize - 1) as f64;
        bits[((i / sps).floor() as usize).min(n_sym - 1)]
    };

    let deviation = hops.modulation_index * hops.symbol_rate_hz / 2.0;
    let step = 2.0 * PI * deviation / fs;
    let mut phase = rng.gen::<f64>() * 2.0 * PI;
    let mut out = Vec::with_capacity(n);
    for i in 0..n as isize {
        let shaped: f64 = taps.iter().enumerate().map(|(j, t)| t * nrz(i + j as isize - half)).sum();
        out.push(Complex64::from_polar(1.0, phase));
        phase += step * shaped;
    }
    out
}

/// Active sample ranges for the tuned channel over `n` samples.
fn burst_ranges(hops: &HopConfig, n: usize, fs: f64) -> Vec<(usize, usize)> {
    let mut rng = seed::rng(&[hops.hop_seed, seed::tag("hop")]);
    let slot = fs / hops.hop_rate_hz;
    let mut ranges = Vec::new();
    let mut j = 0usize;
    loop {
        let start = (j as f64 * slot).floor() as usize;
        if start >= n {
            break;
        }
        let channel = rng.gen_range(0..hops.num_channels);
        if channel == hops.tuned_channel {
            let end = ((j as f64 * slot + hops.burst_duty * slot).floor() as usize).min(n);
            if end > start {
                ranges.push((start, end));
            }
        }
        j += 1;
    }
    ranges
}

/// Receiver view of one emitter on the tuned channel.
///
/// Samples are zero whenever the hop sequence is elsewhere. During bursts the
/// impairments are applied in the order IQ imbalance, DC offset, PA
/// nonlinearity, CFO rotation, phase noise.
pub fn gen_emission(profile: &EmitterProfile, hops: &HopConfig, duration_s: f64, fs: f64) -> Result<ComplexSeries> {
    if !(fs.is_finite() && fs > 0.0) {
        return Err(Error::Argument(format!("sample rate must be positive, got {fs}")));
    }
    if !(duration_s * fs >= 1.0) {
        return Err(Error::Argument(format!("duration {duration_s} s at {fs} Hz yields no samples")));
    }
    if fs < 2.0 * hops.symbol_rate_hz {
        return Err(Error::Argument(format!(
            "sample rate {fs} Hz is below twice the symbol rate {} Hz",
            hops.symbol_rate_hz
        )));
    }
    hops.validate().map_err(|e| Error::Argument(e.to_string()))?;
    profile.validate().map_err(|e| Error::Argument(e.to_string()))?;

    let n = (duration_s * fs).round() as usize;
    let mut iq = vec![Complex64::default(); n];
    let mut data_rng = seed::rng(&[profile.seed, hops.hop_seed, seed::tag("data")]);
    let mut pn_rng = seed::rng(&[profile.seed, hops.hop_seed, seed::tag("phase-noise")]);

    let (sin_phi, cos_phi) = profile.iq_phase_imbalance_rad.sin_cos();
    let g = profile.iq_gain_imbalance;
    let w = 2.0 * PI * profile.cfo_hz / fs;
    let mut theta = 0.0f64;
    let mut last = 0usize;

    for (start, end) in burst_ranges(hops, n, fs) {
        let base = gfsk_baseband(end - start, fs, hops, &mut data_rng);
        if profile.phase_noise_std_rad > 0.0 {
            let gap = (start - last) as f64;
            let z: f64 = pn_rng.sample(StandardNormal);
            theta += z * profile.phase_noise_std_rad * gap.sqrt();
        }
        for (k, x) in base.into_iter().enumerate() {
            let i_part = x.re;
            let q_part = g * (x.im * cos_phi - x.re * sin_phi);
            let mut y = Complex64::new(i_part, q_part) + profile.dc_offset;
            let p = y.norm_sqr();
            y = y + y * (profile.pa_a3 * p + profile.pa_a5 * p * p);
            let idx = start + k;
            y *= Complex64::from_polar(1.0, w * idx as f64);
            if profile.phase_noise_std_rad > 0.0 && k > 0 {
                let z: f64 = pn_rng.sample(StandardNormal);
                theta += z * profile.phase_noise_std_rad;
            }
            iq[idx] = y * Complex64::from_polar(1.0, theta);
        }
        last = end - 1;
    }
    ComplexSeries::with_center(iq, fs, hops.tuned_channel as f64 * hops.channel_spacing_hz)
}

/// Fraction of samples where the emitter occupies the tuned channel.
pub fn occupancy(hops: &HopConfig, n: usize, fs: f64) -> f64 {
    let active: usize = burst_ranges(hops, n, fs).iter().map(|(a, b)| b - a).sum();
    active as f64 / n as f64
}
