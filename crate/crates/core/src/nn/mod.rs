//! Dense numerical stack: BiLSTM encoder, pair fusion, MLP head,
//! cross-entropy and Adam.

pub mod adam;
pub mod lstm;
pub mod mlp;
pub mod network;
pub mod ops;
pub mod params;

pub use adam::{adam_step, AdamState};
pub use lstm::{BiLstm, Pooling};
pub use mlp::Mlp;
pub use network::{Architecture, Network, NetworkSpec, PairSources};
pub use ops::{cross_entropy, mii, softmax, Operator};
pub use params::{ParamEntry, ParamLayout};
