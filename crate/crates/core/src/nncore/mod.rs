//! Dense numerical core: matrices, parameter storage, layers with
//! hand-written backward passes, the weighted cross-entropy loss and SGD
//! with momentum.
//!
//! Training math runs in `f64`; `f32` only appears at the storage
//! boundary (embedding tables, exported predictions).

mod layers;
mod loss;
mod matrix;
mod params;

pub mod gradcheck;

use thiserror::Error;

pub use layers::{
    dropout_backward, dropout_forward, elu, elu_backward, elu_forward, linear_backward, linear_forward, BatchNorm,
    BatchNormCache, Linear, BN_EPS, BN_MOMENTUM,
};
pub use loss::{weighted_ce_loss, weighted_ce_sum};
pub use matrix::Matrix;
pub use params::{read_checkpoint, sgd_step, ParamId, ParamStore, ParamTensor};

/// Explicit train/eval switch; nothing consults a global.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("batch normalization needs at least 2 rows in train mode, got {n}")]
    DegenerateBatch { n: usize },
    #[error("loss mask selects no rows")]
    EmptyMask,
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

impl NnError {
    pub(crate) fn shape(op: &str, a: (usize, usize), b: (usize, usize)) -> Self {
        NnError::Shape(format!("{op}: {}x{} vs {}x{}", a.0, a.1, b.0, b.1))
    }
}

/// Glorot/Xavier uniform init: `U(−√(6/(fan_in+fan_out)), +√(6/(fan_in+fan_out)))`
/// for a `fan_in × fan_out` weight.
pub fn glorot_uniform(rng: &mut crate::seed::Rng, fan_in: usize, fan_out: usize) -> Matrix {
    use rand::Rng as _;
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Matrix::from_vec(
        fan_in,
        fan_out,
        (0..fan_in * fan_out).map(|_| rng.gen_range(-bound..=bound)).collect(),
    )
}
