//! The chord model.
//!
//! Each frame's input is the melody presence vector (12), the chord context
//! (96, a one-hot row or all zeros when the frame is masked) and the mask bit
//! itself, 109 values in total. Two bidirectional LSTM layers run over the
//! sequence; the second layer's output is concatenated with the raw input
//! and a dense layer maps the result to 96 chord logits.
//!
//! Training minimizes a class-weighted negative log-likelihood over the
//! masked frames only, normalized by their count. Gradients are computed by
//! hand; `backward` is checked against central finite differences in the
//! test suite.

mod adam;
mod checkpoint;
mod lstm;
mod model;
mod params;
mod weights;

pub use adam::{adam_step, AdamState};
pub use checkpoint::{Checkpoint, CheckpointHeader, TensorSpec, CHECKPOINT_VERSION, MAGIC};
pub use lstm::{LstmCache, LstmDirection, LstmGrads};
pub use model::{assemble_input, make_training_mask, masked_nll, softmax, BatchInput, ForwardPass};
pub use params::{BiLstm, Hyper, ModelParams};
pub use weights::{class_weights, ClassWeights, COUNT_SMOOTHING};

pub use crate::vocab::NUM_CHORDS;

/// Width of one assembled input row: melody, chord context and mask bit.
pub const INPUT_WIDTH: usize = crate::vocab::NUM_PITCH_CLASSES + NUM_CHORDS + 1;
