//! Declarative Mbed / ATN layer graphs and their executable counterparts.
//!
//! A [`ModelGraph`] is pure data (serialisable, consumed by the complexity
//! profiler). [`MbedAtn`] instantiates it with parameters of a chosen float
//! type and provides traced forward and backward passes.

mod graph;
mod net;
mod stack;

pub use graph::{
    build_atn, build_atn_with, build_mbed, build_mbed_atn, build_mbed_rows, infer_shapes, scaled, AtnGraph,
    LayerSpec, MbedGraph, ModelGraph, Shape,
};
pub use net::{AtnTrace, MbedAtn, MbedTrace, NetGrads};
pub use stack::{Cache, LayerParams, Stack};
