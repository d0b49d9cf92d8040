//! Chebyshev type I low-pass design via the bilinear transform, realised as
//! cascaded second-order sections.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One second-order section `(b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Biquad {
    pub b: [f64; 3],
    /// Denominator with leading coefficient 1.
    pub a: [f64; 3],
}

impl Biquad {
    pub fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        (self.b[0] + self.b[1] * z_inv + self.b[2] * z2) / (self.a[0] + self.a[1] * z_inv + self.a[2] * z2)
    }

    pub fn poles(&self) -> [Complex64; 2] {
        // z^2 + a1 z + a2 = 0
        let disc = Complex64::new(self.a[1] * self.a[1] - 4.0 * self.a[2], 0.0).sqrt();
        [(-self.a[1] + disc) / 2.0, (-self.a[1] - disc) / 2.0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IirFilter {
    pub sections: Vec<Biquad>,
}

impl IirFilter {
    /// Complex frequency response at normalised angular frequency `omega` (rad/sample).
    pub fn response(&self, omega: f64) -> Complex64 {
        let z_inv = Complex64::from_polar(1.0, -omega);
        self.sections.iter().map(|s| s.response(z_inv)).product()
    }

    /// Magnitude response in dB at `freq` given as a fraction of Nyquist.
    pub fn magnitude_db(&self, freq: f64) -> f64 {
        20.0 * self.response(freq * PI).norm().log10()
    }

    pub fn poles(&self) -> Vec<Complex64> {
        self.sections.iter().flat_map(|s| s.poles()).collect()
    }

    pub fn is_stable(&self) -> bool {
        self.poles().iter().all(|p| p.norm() < 1.0)
    }

    /// Runs the cascade over complex samples (zero initial state, transposed direct form II).
    pub fn filter(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = x.to_vec();
        for s in &self.sections {
            let (mut z1, mut z2) = (Complex64::default(), Complex64::default());
            for v in y.iter_mut() {
                let input = *v;
                let out = s.b[0] * input + z1;
                z1 = s.b[1] * input - s.a[1] * out + z2;
                z2 = s.b[2] * input - s.a[2] * out;
                *v = out;
            }
        }
        y
    }
}

/// Designs an even-order Chebyshev-I low-pass.
///
/// `cutoff` is the passband edge as a fraction of Nyquist. The passband
/// equiripples between 0 and `-ripple_db`; for even orders the DC gain sits
/// at the bottom of the ripple, `10^(-ripple_db/20)`.
pub fn design_cheby1(order: usize, ripple_db: f64, cutoff: f64) -> Result<IirFilter> {
    if order < 2 || !order.is_multiple_of(2) {
        return Err(Error::Argument(format!("order must be even and >= 2, got {order}")));
    }
    if !(cutoff > 0.0 && cutoff < 1.0) {
        return Err(Error::Argument(format!("cutoff must lie in (0, 1), got {cutoff}")));
    }
    if !(ripple_db > 0.0) {
        return Err(Error::Argument(format!("ripple must be positive, got {ripple_db}")));
    }
    let n = order as f64;
    let eps = (10f64.powf(ripple_db / 10.0) - 1.0).sqrt();
    let mu = (1.0 / eps).asinh() / n;

    // bilinear transform with fs = 2 so that the prewarped edge is 4 tan(pi*cutoff/2)
    let fs2 = 4.0;
    let warped = fs2 * (PI * cutoff / 2.0).tan();

    let mut sections = Vec::with_capacity(order / 2);
    for k in 0..order / 2 {
        let theta = PI * (2 * k + 1) as f64 / (2.0 * n);
        let s_pole = warped * Complex64::new(-mu.sinh() * theta.sin(), mu.cosh() * theta.cos());
        let z_pole = (fs2 + s_pole) / (fs2 - s_pole);
        // analog pair gain |p|^2 plus the bilinear factor 1/|fs2 - p|^2, zeros at z = -1
        let gain = s_pole.norm_sqr() / (fs2 - s_pole).norm_sqr();
        sections.push(Biquad {
            b: [gain, 2.0 * gain, gain],
            a: [1.0, -2.0 * z_pole.re, z_pole.norm_sqr()],
        });
    }
    // even order: DC sits at the ripple floor
    let dc_target = 1.0 / (1.0 + eps * eps).sqrt();
    let per_section = dc_target.powf(1.0 / sections.len() as f64);
    for s in &mut sections {
        for b in &mut s.b {
            *b *= per_section;
        }
    }
    Ok(IirFilter { sections })
}
