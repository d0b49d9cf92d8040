use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{decimate_aa, design_cheby1, downsample, psd, ComplexSeries};
use crate::{Error, Result};

/// Passband ripple of the anti-aliasing filter in dB.
pub const AA_RIPPLE_DB: f64 = 0.05;
/// Anti-aliasing filter order.
pub const AA_ORDER: usize = 8;
/// Passband edge as a fraction of the post-decimation Nyquist rate.
pub const AA_CUTOFF_FRACTION: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DecimationMode {
    #[serde(rename = "plain")]
    Plain,
    #[serde(rename = "aa", alias = "anti_aliased")]
    AntiAliased,
}

impl DecimationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DecimationMode::Plain => "plain",
            DecimationMode::AntiAliased => "aa",
        }
    }
}

impl std::str::FromStr for DecimationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(DecimationMode::Plain),
            "aa" | "anti_aliased" => Ok(DecimationMode::AntiAliased),
            other => Err(Error::Argument(format!("unknown decimation mode `{other}` (plain|aa)"))),
        }
    }
}

/// Which rows make up the network input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    /// Magnitude, phase and PSD of the decimated signal (3 rows).
    #[default]
    MagPhasePsd,
    /// In-phase and quadrature samples of the decimated signal (2 rows).
    RawIq,
}

impl FeatureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::MagPhasePsd => "mag_phase_psd",
            FeatureKind::RawIq => "raw_iq",
        }
    }

    pub fn rows(self) -> usize {
        match self {
            FeatureKind::MagPhasePsd => 3,
            FeatureKind::RawIq => 2,
        }
    }

    fn magic(self) -> &'static [u8; 4] {
        match self {
            FeatureKind::MagPhasePsd => b"FT3M",
            FeatureKind::RawIq => b"FT2M",
        }
    }
}

/// `rows x M` network input, stored row-major in 32-bit floats.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    pub kind: FeatureKind,
    pub m: usize,
    pub data: Vec<f32>,
}

impl FeatureTensor {
    pub fn rows(&self) -> usize {
        self.kind.rows()
    }

    pub fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.m..(r + 1) * self.m]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(12 + 4 * self.data.len());
        buf.extend_from_slice(self.kind.magic());
        buf.extend_from_slice(&(self.m as u64).to_le_bytes());
        for v in &self.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 {
            return Err(Error::Format("feature file shorter than its header".into()));
        }
        let kind = match &bytes[..4] {
            b"FT3M" => FeatureKind::MagPhasePsd,
            b"FT2M" => FeatureKind::RawIq,
            _ => return Err(Error::Format("bad feature magic, expected FT3M".into())),
        };
        let m = u64::from_le_bytes(bytes[4..12].try_into().unwrap()) as usize;
        let want = 12 + 4 * kind.rows() * m;
        if m == 0 || bytes.len() != want {
            return Err(Error::Format(format!(
                "feature file has {} bytes, header implies {want}",
                bytes.len()
            )));
        }
        let data = bytes[12..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(FeatureTensor { kind, m, data })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Decimates `x` to exactly `m` samples using the implied integer factor.
pub fn decimate_to(x: &ComplexSeries, m: usize, mode: DecimationMode) -> Result<ComplexSeries> {
    if m == 0 || x.len() < m {
        return Err(Error::Argument(format!(
            "cannot produce M = {m} samples from a series of length {}",
            x.len()
        )));
    }
    let factor = x.len() / m;
    let mut y = match mode {
        DecimationMode::Plain => downsample(x, factor)?,
        DecimationMode::AntiAliased => {
            let filter = design_cheby1(AA_ORDER, AA_RIPPLE_DB, AA_CUTOFF_FRACTION / factor as f64)?;
            decimate_aa(x, factor, &filter)?
        }
    };
    y.iq.truncate(m);
    Ok(y)
}

fn wrap_phase(p: f64) -> f64 {
    // atan2 can return exactly -pi; the row lives in (-pi, pi]
    if p <= -PI {
        p + 2.0 * PI
    } else {
        p
    }
}

/// Rows of an already decimated series, before standardisation.
pub fn rows_of(y: &ComplexSeries, kind: FeatureKind) -> Result<Vec<Vec<f64>>> {
    Ok(match kind {
        FeatureKind::MagPhasePsd => vec![
            y.iq.iter().map(|c| c.norm()).collect(),
            y.iq.iter().map(|c| wrap_phase(c.im.atan2(c.re))).collect(),
            psd(y)?,
        ],
        FeatureKind::RawIq => vec![
            y.iq.iter().map(|c| c.re).collect(),
            y.iq.iter().map(|c| c.im).collect(),
        ],
    })
}

/// Decimate-then-extract, without the final standardisation.
pub fn feature_rows(x: &ComplexSeries, m: usize, mode: DecimationMode, kind: FeatureKind) -> Result<Vec<Vec<f64>>> {
    rows_of(&decimate_to(x, m, mode)?, kind)
}

/// Zero-mean, unit-variance rows packed into a [`FeatureTensor`].
pub fn standardize(rows: &[Vec<f64>], kind: FeatureKind) -> FeatureTensor {
    let m = rows[0].len();
    let mut data = Vec::with_capacity(rows.len() * m);
    for row in rows {
        let mean = row.iter().sum::<f64>() / m as f64;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m as f64;
        let inv = if var > 1e-24 { 1.0 / var.sqrt() } else { 1.0 };
        data.extend(row.iter().map(|v| ((v - mean) * inv) as f32));
    }
    FeatureTensor { kind, m, data }
}

/// Builds the standardised magnitude / phase / PSD tensor of `x` decimated to `m` samples.
pub fn build_feature_tensor(x: &ComplexSeries, m: usize, mode: DecimationMode) -> Result<FeatureTensor> {
    build_features(x, m, mode, FeatureKind::MagPhasePsd)
}

pub fn build_features(x: &ComplexSeries, m: usize, mode: DecimationMode, kind: FeatureKind) -> Result<FeatureTensor> {
    Ok(standardize(&feature_rows(x, m, mode, kind)?, kind))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn two_sample_rows() {
        let y = ComplexSeries::new(vec![Complex64::new(1., 0.), Complex64::new(0., 1.)], 1.0).unwrap();
        let rows = feature_rows(&y, 2, DecimationMode::Plain, FeatureKind::MagPhasePsd).unwrap();
        assert_eq!(rows[0], vec![1.0, 1.0]);
        assert_eq!(rows[1], vec![0.0, PI / 2.0]);
        assert_eq!(rows[2].len(), 2);
    }

    #[test]
    fn phase_never_minus_pi() {
        let y = ComplexSeries::new(vec![Complex64::new(-1., -0.0), Complex64::new(-1., 0.0)], 1.0).unwrap();
        let rows = rows_of(&y, FeatureKind::MagPhasePsd).unwrap();
        assert!(rows[1].iter().all(|&p| p > -PI && p <= PI));
    }

    #[test]
    fn m_too_large() {
        let y = ComplexSeries::new(vec![Complex64::new(1., 0.); 10], 1.0).unwrap();
        assert!(build_feature_tensor(&y, 11, DecimationMode::Plain).is_err());
        assert!(build_feature_tensor(&y, 0, DecimationMode::Plain).is_err());
    }

    #[test]
    fn standardised_rows() {
        let iq = (0..400).map(|i| Complex64::from_polar(1.0 + (i % 7) as f64, i as f64 * 0.1)).collect();
        let x = ComplexSeries::new(iq, 10.0).unwrap();
        let t = build_feature_tensor(&x, 100, DecimationMode::AntiAliased).unwrap();
        assert_eq!(t.data.len(), 300);
        for r in 0..3 {
            let row: Vec<f64> = t.row(r).iter().map(|&v| v as f64).collect();
            let mean = row.iter().sum::<f64>() / 100.0;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 100.0;
            assert!(mean.abs() < 1e-5 && (var - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn file_header() {
        let t = FeatureTensor {
            kind: FeatureKind::MagPhasePsd,
            m: 2,
            data: vec![1., 2., 3., 4., 5., 6.],
        };
        let b = t.to_bytes();
        assert_eq!(&b[..4], b"FT3M");
        assert_eq!(&b[4..12], &2u64.to_le_bytes());
        assert_eq!(b.len(), 12 + 24);
        assert_eq!(FeatureTensor::from_bytes(&b).unwrap(), t);
        assert!(FeatureTensor::from_bytes(&b[..b.len() - 2]).is_err());
    }
}
