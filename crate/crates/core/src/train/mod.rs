//! Loss, backpropagation through time, Adam and early stopping.

mod adam;
mod bptt;
mod gradcheck;
mod loss;
mod trainer;

pub use adam::{adam_step, AdamState, BETA1, BETA2, EPSILON};
pub use bptt::{backward, lmn_backward, loss, rnn_backward, unfolded_backward, BackwardOptions, Gradients};
pub use gradcheck::{grad_check, grad_check_report, GradCheckReport};
pub use loss::{bce_loss, bce_output_delta};
pub use trainer::{evaluate_accuracy, mean_loss, train_loop, EpochRecord, History, TrainConfig, TrainOutcome};
