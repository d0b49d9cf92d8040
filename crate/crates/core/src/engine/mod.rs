//! Dense tensor engine with explicit forward and backward kernels.
//!
//! Every operation is a pure function of its inputs. Training code keeps the
//! forward traces it needs and calls the matching `*_backward` kernel; there
//! is no global tape. Kernels are generic over [`Scalar`] so the same code
//! runs in 64-bit for gradient checks and 32-bit for training.

mod dropout;
mod gru;
mod loss;
mod ops;
mod optim;
pub mod params;
mod tensor;

pub use dropout::{dropout, dropout_backward, Mode};
pub use gru::{GRU_TENSOR_NAMES, gru_backward, gru_forward, gru_forward_traced, GruGrads, GruLayer, GruParams, GruTrace};
pub use loss::{softmax, softmax_xent};
pub use ops::{
    conv1d, conv1d_backward, conv1d_output_len, dense, dense_backward, maxpool1d,
    maxpool1d_backward, prelu, prelu_backward, relu, relu_backward, sigmoid, silu,
    silu_backward,
};
pub use optim::{adam_step, AdamConfig, AdamState};
pub use tensor::{Scalar, Tensor};
