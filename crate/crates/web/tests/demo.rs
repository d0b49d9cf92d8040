use rflab_core::complexity;
use rflab_core::model::build_mbed_atn;
use rflab_web::{complexity_summary, emitter_spectrum, filter_curve, DECIMATION, SAMPLE_RATE_HZ};

#[test]
fn filter_curve_has_flat_passband_and_deep_stopband() {
    let c = filter_curve(8, 0.05, 40, 2001).unwrap();
    assert!(c.stable);
    assert_eq!(c.freq.len(), 2001);
    assert!((c.cutoff - 0.02).abs() < 1e-15);
    for (&f, &db) in c.freq.iter().zip(&c.magnitude_db) {
        if f <= c.cutoff {
            assert!((-0.06..=1e-9).contains(&db), "passband {f}: {db}");
        }
        if f >= 2.0 / 40.0 {
            assert!(db <= -40.0, "stopband {f}: {db}");
        }
    }
    assert!(c.stopband_db > 20.0);
    assert!(filter_curve(8, 0.05, 1, 10).is_err());
}

#[test]
fn spectrum_peak_sits_near_emitter_cfo_after_anti_aliasing() {
    let s = emitter_spectrum(0, 4000, 30.0, 3, 4000).unwrap();
    assert_eq!(s.freq_hz.len(), 4000);
    let fs_out = SAMPLE_RATE_HZ / DECIMATION as f64;
    assert!(s.freq_hz[0] >= -fs_out / 2.0 && *s.freq_hz.last().unwrap() <= fs_out / 2.0);
    let peak = (0..s.aa_db.len()).max_by(|&a, &b| s.aa_db[a].total_cmp(&s.aa_db[b])).unwrap();
    // DC leak of the emitter lands at its carrier offset
    assert!((s.freq_hz[peak] - s.cfo_hz).abs() < 500.0, "peak {} vs cfo {}", s.freq_hz[peak], s.cfo_hz);
    let pooled = emitter_spectrum(0, 4000, 30.0, 3, 256).unwrap();
    assert_eq!(pooled.aa_db.len(), 256);
    assert!(emitter_spectrum(9, 4000, 30.0, 3, 256).is_err());
    assert!(emitter_spectrum(0, 8, 30.0, 3, 256).is_err());
}

#[test]
fn complexity_summary_matches_library() {
    let (table, json) = complexity_summary(10_000, 1.0, 2, 10).unwrap();
    let r = complexity::report(&build_mbed_atn(3, 10_000, 1.0, 10, 1).unwrap(), 2, 4).unwrap();
    assert_eq!(table, r.table());
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["params"].as_u64().unwrap(), r.params);
    assert!(complexity_summary(1000, 1.0, 1, 10).is_err());
}

#[test]
fn bindings_return_json() {
    let f: serde_json::Value = serde_json::from_str(&rflab_web::filter_response(8, 0.05, 40, 64).unwrap()).unwrap();
    assert_eq!(f["freq"].as_array().unwrap().len(), 64);
    let d: serde_json::Value = serde_json::from_str(&rflab_web::default_filter()).unwrap();
    assert_eq!(d["factor"], 40);
}
