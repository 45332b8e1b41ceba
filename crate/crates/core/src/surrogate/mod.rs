//! Neural surrogate for the solution operator and its training loop.

mod mlp;
mod optim;
mod train;

pub use mlp::{Activation, Mlp};
pub use optim::{Adam, PlateauScheduler};
pub use train::{
    evaluate, held_out_set, train, write_history_csv, Evaluation, HeldOutSet, StepLog, TrainConfig,
    TrainReport, DIVERGENCE_LOSS,
};

/// Default hidden widths.
pub const DEFAULT_HIDDEN: [usize; 3] = [128, 128, 128];

/// `[input, hidden..., 1]`
pub fn layer_sizes(input: usize, hidden: &[usize]) -> Vec<usize> {
    let mut s = Vec::with_capacity(hidden.len() + 2);
    s.push(input);
    s.extend_from_slice(hidden);
    s.push(1);
    s
}
