//! Dense `f64` matrices with a reverse-mode tape, the layers the policy
//! network is built from, Adam, and a binary checkpoint format.

mod adam;
mod checkpoint;
pub mod gradcheck;
mod graph;
mod layers;
mod tensor;

pub use adam::{clip_grad_norm, Adam};
pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};
pub use graph::{Gradients, Graph, NodeId};
pub use layers::{Conv2d, Linear, Lstm, MultiHeadAttention, ParamStore};
pub use tensor::Tensor;
