//! Dense tensors with tape-based reverse-mode differentiation.
//!
//! The op set is exactly what shared-MLP point networks need: 2D matrix
//! products, bias rows, activations, column/row concatenation, row gathers
//! by neighbor index, and max-pooling over neighbor groups. Operations that
//! are cheaper to differentiate by hand (bilateral interpolation, Chamfer
//! losses) plug in through [`CustomBackward`].

mod adam;
mod gradcheck;
mod tape;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::finite_difference_check;
pub use tape::{CustomBackward, Tape, Var};
pub use tensor::Tensor;
