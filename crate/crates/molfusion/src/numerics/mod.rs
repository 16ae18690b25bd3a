//! Dense f64 arrays with reverse-mode differentiation.
//!
//! The computation graph is a dynamic tape: every op allocates a fresh node
//! holding its forward value and a closure that routes the output gradient
//! to the op's inputs. Gradients flow only through subgraphs that reach a
//! trainable leaf, so constant data (similarity targets, atom features) costs
//! nothing at backward time.

mod adam;
mod store;
mod tensor;

pub use adam::{adam_step, AdamHyper, AdamState};
pub use store::{Binding, ParamStore};
pub use tensor::{NumericsError, Tensor};

pub type Result<T> = std::result::Result<T, NumericsError>;
