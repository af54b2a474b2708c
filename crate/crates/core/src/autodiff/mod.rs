//! Automatic differentiation: forward-mode jets for input partials and a
//! reverse-mode tape over those jets for parameter gradients.

mod jet;
mod kernels;
mod tape;

pub use jet::{seed_inputs, DualScalar, MultiIndex, PartialSet, UnaryFn, SLOTS};
pub use tape::{grad_wrt_params, Tape, Tensor, Var};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AdError {
    #[error("unsupported derivative order (t: {t}, x: {x}); need t <= 1, x <= 3, t + x <= 3")]
    UnsupportedOrder { t: u8, x: u8 },
    #[error("tape handle for node {node} is stale or belongs to another tape")]
    StaleHandle { node: usize },
    #[error("node {node} is not a scalar")]
    NotScalar { node: usize },
    #[error("non-finite value at node {node} ({op}) during {pass} pass")]
    NonFinite {
        node: usize,
        op: &'static str,
        pass: &'static str,
    },
    #[error("parameter vector has {got} entries, tape is bound to {expected}")]
    ParamCount { expected: usize, got: usize },
}
