//! Numeric substrate: tensors, the differentiation tape, parameters, Adam and
//! seeded randomness.

mod adam;
mod graph;
mod param;
mod rng;
mod tensor;

pub use adam::Adam;
pub use graph::{Gradients, Graph, Var};
pub use param::{Binding, Param, Parameterized};
pub use rng::SeededRng;
pub use tensor::{log_softmax_rows, matmul, softmax_rows, Tensor};
