//! The convolutional-recurrent tracking network: two parallel conv branches
//! over the RD and RA images, a fully connected compression to a 16-d
//! observation, a GRU with 128-d hidden state, and three linear heads for the
//! state estimate and the covariance parameters.

pub mod checkpoint;
pub mod forward;
pub mod model;
pub mod stream;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta};
pub use forward::{
    backward_sequence, conv_block, forward_sequence, HeadOutputs, SequenceCache, StepGrad,
};
pub use model::{ConvLayer, MlCrnnConfig, MlCrnnModel, MlCrnnParams};
pub use stream::{stream_init, stream_step, StreamState};
