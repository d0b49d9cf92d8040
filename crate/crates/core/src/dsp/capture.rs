use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::ComplexSeries;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalarFormat {
    /// 32-bit IEEE float.
    F32,
    /// 16-bit signed integer, scaled by 1/32768.
    I16,
}

impl ScalarFormat {
    fn width(self) -> usize {
        match self {
            ScalarFormat::F32 => 4,
            ScalarFormat::I16 => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Endianness {
    Little,
    Big,
}

/// Describes how a raw interleaved I,Q capture file is laid out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptureDescriptor {
    #[serde(default = "default_scalar")]
    pub scalar: ScalarFormat,
    #[serde(default = "default_endian")]
    pub endianness: Endianness,
    pub sample_rate_hz: f64,
    #[serde(default)]
    pub center_freq_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emitter_label: Option<String>,
}

fn default_scalar() -> ScalarFormat {
    ScalarFormat::F32
}

fn default_endian() -> Endianness {
    Endianness::Little
}

impl CaptureDescriptor {
    pub fn f32_le(sample_rate_hz: f64) -> Self {
        CaptureDescriptor {
            scalar: ScalarFormat::F32,
            endianness: Endianness::Little,
            sample_rate_hz,
            center_freq_hz: 0.0,
            emitter_label: None,
        }
    }
}

fn decode_scalars(bytes: &[u8], desc: &CaptureDescriptor) -> Vec<f64> {
    let w = desc.scalar.width();
    bytes
        .chunks_exact(w)
        .map(|c| match (desc.scalar, desc.endianness) {
            (ScalarFormat::F32, Endianness::Little) => f32::from_le_bytes(c.try_into().unwrap()) as f64,
            (ScalarFormat::F32, Endianness::Big) => f32::from_be_bytes(c.try_into().unwrap()) as f64,
            (ScalarFormat::I16, Endianness::Little) => i16::from_le_bytes(c.try_into().unwrap()) as f64 / 32768.0,
            (ScalarFormat::I16, Endianness::Big) => i16::from_be_bytes(c.try_into().unwrap()) as f64 / 32768.0,
        })
        .collect()
}

/// Parses an in-memory interleaved I,Q buffer.
pub fn parse_capture(bytes: &[u8], desc: &CaptureDescriptor) -> Result<ComplexSeries> {
    let per_complex = 2 * desc.scalar.width();
    if bytes.is_empty() {
        return Err(Error::Format("capture is empty".into()));
    }
    if !bytes.len().is_multiple_of(per_complex) {
        return Err(Error::Format(format!(
            "capture length {} is not a multiple of {per_complex} bytes per complex sample",
            bytes.len()
        )));
    }
    let scalars = decode_scalars(bytes, desc);
    let iq = scalars
        .chunks_exact(2)
        .map(|p| Complex64::new(p[0], p[1]))
        .collect();
    ComplexSeries::with_center(iq, desc.sample_rate_hz, desc.center_freq_hz)
}

pub fn read_capture(path: &Path, desc: &CaptureDescriptor) -> Result<ComplexSeries> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_capture(&bytes, desc)
}

/// Writes interleaved little-endian f32 I,Q plus a `<path>.json` metadata sidecar.
pub fn write_capture(path: &Path, series: &ComplexSeries, emitter_label: Option<&str>) -> Result<()> {
    let mut buf = Vec::with_capacity(series.len() * 8);
    for c in &series.iq {
        buf.extend_from_slice(&(c.re as f32).to_le_bytes());
        buf.extend_from_slice(&(c.im as f32).to_le_bytes());
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))?;
    let desc = CaptureDescriptor {
        center_freq_hz: series.center_freq_hz,
        emitter_label: emitter_label.map(str::to_string),
        ..CaptureDescriptor::f32_le(series.sample_rate_hz)
    };
    let sidecar = sidecar_path(path);
    fs::write(&sidecar, serde_json::to_vec_pretty(&desc)?).map_err(|e| Error::io(&sidecar, e))
}

pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    s.into()
}
