//! Signal front end: capture ingestion, decimation, PSD and the network input tensor.

mod capture;
mod decimate;
mod features;
mod filter;
mod psd;

pub use capture::{parse_capture, read_capture, sidecar_path, write_capture, CaptureDescriptor, Endianness, ScalarFormat};
pub use decimate::{decimate_aa, downsample};
pub use features::{
    build_feature_tensor, build_features, decimate_to, feature_rows, rows_of, standardize,
    DecimationMode, FeatureKind, FeatureTensor, AA_CUTOFF_FRACTION, AA_ORDER, AA_RIPPLE_DB,
};
pub use filter::{design_cheby1, Biquad, IirFilter};
pub use psd::psd;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Complex baseband IQ record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexSeries {
    pub iq: Vec<Complex64>,
    pub sample_rate_hz: f64,
    #[serde(default)]
    pub center_freq_hz: f64,
}

impl ComplexSeries {
    pub fn new(iq: Vec<Complex64>, sample_rate_hz: f64) -> Result<Self> {
        Self::with_center(iq, sample_rate_hz, 0.0)
    }

    pub fn with_center(iq: Vec<Complex64>, sample_rate_hz: f64, center_freq_hz: f64) -> Result<Self> {
        if iq.is_empty() {
            return Err(Error::Argument("complex series must contain at least one sample".into()));
        }
        if !(sample_rate_hz > 0.0) || !sample_rate_hz.is_finite() {
            return Err(Error::Argument(format!("sample rate must be positive, got {sample_rate_hz}")));
        }
        Ok(ComplexSeries {
            iq,
            sample_rate_hz,
            center_freq_hz,
        })
    }

    pub fn len(&self) -> usize {
        self.iq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iq.is_empty()
    }

    /// Mean of `|x|^2`.
    pub fn mean_power(&self) -> f64 {
        self.iq.iter().map(|c| c.norm_sqr()).sum::<f64>() / self.iq.len() as f64
    }
}
