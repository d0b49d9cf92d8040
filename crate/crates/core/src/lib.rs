//! Bluetooth RF fingerprinting toolkit.
//!
//! The crate is organised as a pipeline:
//!
//! - [`engine`]: a small dense-tensor engine (conv1d, maxpool, dense, GRU,
//!   activations, softmax cross-entropy, Adam) with hand-written backward passes.
//! - [`dsp`]: IQ capture ingestion, Chebyshev-I anti-aliasing decimation,
//!   periodogram and the 3xM magnitude/phase/PSD input tensor.
//! - [`sim`]: a frequency-hopping GFSK emitter simulator with per-device
//!   hardware impairments and multipath channels.
//! - [`model`]: declarative layer graphs for the Mbed embedding module and
//!   the ATN attentional classifier, plus their runtime networks.
//! - [`train`]: two-stage training with patience-based stopping.
//! - [`eval`]: confusion matrices and TPR / FPR / balanced top-1 KPIs.
//! - [`complexity`]: analytic parameter, FLOP and training-memory accounting.

pub mod checkpoint;
pub mod complexity;
pub mod dsp;
pub mod engine;
pub mod error;
pub mod eval;
pub mod model;
pub mod seed;
pub mod sim;
pub mod train;

pub use error::{Error, Result};
