//! Minimal differentiable operations for the tracking network.
//!
//! Every operation comes as a forward function plus an explicit backward
//! function; there is no graph or tape. The scalar type is generic so the
//! production model runs in `f32` while gradient checks instantiate the same
//! code at `f64`.

pub mod adam;
pub mod gru;
pub mod ops;
pub mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gru::{gru_step, gru_step_backward, GruCache, GruCell};
pub use ops::{
    conv2d, conv2d_backward, conv2d_output_shape, dropout, dropout_mask, elu, elu_backward,
    fully_connected, fully_connected_backward, DropoutMode,
};
pub use tensor::{Scalar, Tensor};
