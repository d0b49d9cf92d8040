use super::filter::IirFilter;
use super::ComplexSeries;
use crate::{Error, Result};

fn check_factor(x: &ComplexSeries, factor: usize) -> Result<()> {
    if factor < 1 {
        return Err(Error::Argument("decimation factor must be >= 1".into()));
    }
    if x.len() < factor {
        return Err(Error::Argument(format!(
            "series of length {} is shorter than decimation factor {factor}",
            x.len()
        )));
    }
    Ok(())
}

/// Keeps every `factor`-th sample starting at index 0.
pub fn downsample(x: &ComplexSeries, factor: usize) -> Result<ComplexSeries> {
    check_factor(x, factor)?;
    Ok(ComplexSeries {
        iq: x.iq.iter().step_by(factor).copied().collect(),
        sample_rate_hz: x.sample_rate_hz / factor as f64,
        center_freq_hz: x.center_freq_hz,
    })
}

/// Causal low-pass with `filter` (zero initial state), then [`downsample`].
pub fn decimate_aa(x: &ComplexSeries, factor: usize, filter: &IirFilter) -> Result<ComplexSeries> {
    check_factor(x, factor)?;
    let filtered = ComplexSeries {
        iq: filter.filter(&x.iq),
        sample_rate_hz: x.sample_rate_hz,
        center_freq_hz: x.center_freq_hz,
    };
    downsample(&filtered, factor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::design_cheby1;
    use num_complex::Complex64;

    fn ramp(n: usize) -> ComplexSeries {
        ComplexSeries::new((0..n).map(|i| Complex64::new(i as f64, -(i as f64))).collect(), 6.0).unwrap()
    }

    #[test]
    fn keeps_every_other() {
        let y = downsample(&ramp(6), 2).unwrap();
        let re: Vec<f64> = y.iq.iter().map(|c| c.re).collect();
        assert_eq!(re, vec![0., 2., 4.]);
        assert_eq!(y.sample_rate_hz, 3.0);
    }

    #[test]
    fn factor_one_is_identity() {
        let x = ramp(7);
        assert_eq!(downsample(&x, 1).unwrap(), x);
    }

    #[test]
    fn invalid_factors() {
        assert!(downsample(&ramp(3), 0).is_err());
        assert!(downsample(&ramp(3), 4).is_err());
    }

    #[test]
    fn forty_to_one() {
        let x = ComplexSeries::new(vec![Complex64::new(1.0, 0.0); 40_000], 2e6).unwrap();
        let y = downsample(&x, 40).unwrap();
        assert_eq!(y.len(), 1000);
        assert_eq!(y.sample_rate_hz, 50e3);
    }

    #[test]
    fn dc_passes_with_ripple_gain() {
        let f = design_cheby1(8, 0.05, 0.8 / 4.0).unwrap();
        let x = ComplexSeries::new(vec![Complex64::new(1.0, 0.0); 4000], 1.0).unwrap();
        let y = decimate_aa(&x, 4, &f).unwrap();
        let dc = f.response(0.0).norm();
        for c in &y.iq[500..] {
            assert!((c.re - dc).abs() < 1e-3 && c.im.abs() < 1e-3);
        }
    }
}
