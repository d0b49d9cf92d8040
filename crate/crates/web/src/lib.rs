//! Browser bindings: each exported function returns a JSON string (or plain
//! text) so the page can stay dependency-free.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rflab_core::dsp::{decimate_to, design_cheby1, psd, DecimationMode, AA_CUTOFF_FRACTION, AA_ORDER, AA_RIPPLE_DB};
use rflab_core::model::build_mbed_atn;
use rflab_core::sim::{apply_channel, desk_profiles, gen_emission, ChannelModel, HopConfig};
use rflab_core::{complexity, Error, Result};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Simulated capture rate of the demo emitters.
pub const SAMPLE_RATE_HZ: f64 = 2e6;
/// Simulated samples per output sample.
pub const DECIMATION: usize = 40;
const MAX_M: usize = 50_000;

#[derive(Debug, Serialize)]
pub struct FilterCurve {
    /// Frequency as a fraction of the input Nyquist.
    pub freq: Vec<f64>,
    pub magnitude_db: Vec<f64>,
    pub cutoff: f64,
    /// Attenuation at 1.5x the post-decimation Nyquist.
    pub stopband_db: f64,
    pub stable: bool,
}

/// Chebyshev-I anti-aliasing response for a decimation `factor`.
pub fn filter_curve(order: usize, ripple_db: f64, factor: usize, points: usize) -> Result<FilterCurve> {
    if factor < 2 || points < 2 {
        return Err(Error::Argument("factor and points must be at least 2".into()));
    }
    let cutoff = AA_CUTOFF_FRACTION / factor as f64;
    let f = design_cheby1(order, ripple_db, cutoff)?;
    let freq: Vec<f64> = (0..points).map(|i| i as f64 / (points - 1) as f64).collect();
    let magnitude_db = freq.iter().map(|&w| f.magnitude_db(w).max(-200.0)).collect();
    Ok(FilterCurve {
        freq,
        magnitude_db,
        cutoff,
        stopband_db: -f.magnitude_db(1.5 / factor as f64),
        stable: f.is_stable(),
    })
}

#[derive(Debug, Serialize)]
pub struct Spectrum {
    pub emitter: usize,
    pub cfo_hz: f64,
    pub m: usize,
    /// Bin centres in Hz relative to the carrier.
    pub freq_hz: Vec<f64>,
    pub plain_db: Vec<f64>,
    pub aa_db: Vec<f64>,
}

/// Max-pools `v` into at most `bins` buckets so long spectra stay plottable.
fn pool_max(v: &[f64], bins: usize) -> Vec<f64> {
    if v.len() <= bins {
        return v.to_vec();
    }
    (0..bins)
        .map(|b| {
            let (lo, hi) = (b * v.len() / bins, (b + 1) * v.len() / bins);
            v[lo..hi].iter().copied().fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

/// Decimated PSD of one desk emitter, plain and anti-aliased, in dB.
pub fn emitter_spectrum(emitter: usize, m: usize, snr_db: f64, hop_seed: u64, bins: usize) -> Result<Spectrum> {
    let profiles = desk_profiles();
    let profile = profiles
        .get(emitter)
        .ok_or_else(|| Error::Argument(format!("emitter {emitter} out of range (0..{})", profiles.len())))?;
    if !(16..=MAX_M).contains(&m) {
        return Err(Error::Argument(format!("M must be in 16..={MAX_M}")));
    }
    let hops = HopConfig { hop_seed, ..HopConfig::default() };
    let duration = (m * DECIMATION) as f64 / SAMPLE_RATE_HZ;
    let clean = gen_emission(profile, &hops, duration, SAMPLE_RATE_HZ)?;
    let channel = ChannelModel { snr_db, ..ChannelModel::ideal() };
    let x = apply_channel(&clean, &channel, &mut ChaCha8Rng::seed_from_u64(hop_seed))?;
    let db = |mode| -> Result<Vec<f64>> {
        let y = decimate_to(&x, m, mode)?;
        let p = psd(&y)?;
        Ok(pool_max(&p, bins).into_iter().map(|v| 10.0 * v.max(1e-20).log10()).collect())
    };
    let plain_db = db(DecimationMode::Plain)?;
    let aa_db = db(DecimationMode::AntiAliased)?;
    let fs_out = SAMPLE_RATE_HZ / DECIMATION as f64;
    let n = plain_db.len();
    let freq_hz = (0..n).map(|i| (i as f64 + 0.5) / n as f64 * fs_out - fs_out / 2.0).collect();
    Ok(Spectrum { emitter, cfo_hz: profile.cfo_hz, m, freq_hz, plain_db, aa_db })
}

/// Complexity report of Mbed-ATN as `(table text, json)`.
pub fn complexity_summary(m: usize, scale: f64, batch: usize, classes: usize) -> Result<(String, String)> {
    if batch == 0 {
        return Err(Error::Argument("batch must be at least 1".into()));
    }
    let graph = build_mbed_atn(3, m, scale, classes, 1)?;
    let r = complexity::report(&graph, batch, 4)?;
    Ok((r.table(), r.to_json()?))
}

fn js<T>(r: Result<T>) -> std::result::Result<T, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = filterResponse)]
pub fn filter_response(order: usize, ripple_db: f64, factor: usize, points: usize) -> std::result::Result<String, JsError> {
    let c = js(filter_curve(order, ripple_db, factor, points))?;
    Ok(serde_json::to_string(&c)?)
}

#[wasm_bindgen(js_name = defaultFilter)]
pub fn default_filter() -> String {
    format!(r#"{{"order":{AA_ORDER},"ripple_db":{AA_RIPPLE_DB},"factor":{DECIMATION}}}"#)
}

#[wasm_bindgen(js_name = emitterPsd)]
pub fn emitter_psd(emitter: usize, m: usize, snr_db: f64, hop_seed: u64) -> std::result::Result<String, JsError> {
    let s = js(emitter_spectrum(emitter, m, snr_db, hop_seed, 1024))?;
    Ok(serde_json::to_string(&s)?)
}

#[wasm_bindgen(js_name = complexityTable)]
pub fn complexity_table(m: usize, scale: f64, batch: usize, classes: usize) -> std::result::Result<String, JsError> {
    Ok(js(complexity_summary(m, scale, batch, classes))?.0)
}

#[wasm_bindgen(js_name = complexityJson)]
pub fn complexity_json(m: usize, scale: f64, batch: usize, classes: usize) -> std::result::Result<String, JsError> {
    Ok(js(complexity_summary(m, scale, batch, classes))?.1)
}
