//! Small double-precision neural stack with hand-written gradients.

pub mod checkpoint;
pub mod layers;
pub mod network;
pub mod optim;
pub mod tensor;

pub use layers::{Activation, Linear, Mlp, MlpCache};
pub use network::{soft_update, GraphForward, GraphNet, NetShape, EMBED_WIDTH, HEAD_HIDDEN};
pub use optim::{Adam, ParamSet};
pub use tensor::Tensor2;
