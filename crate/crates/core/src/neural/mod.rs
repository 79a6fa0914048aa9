//! Fixed-architecture MLP with batch norm, dropout, hand-derived gradients
//! and Adam.

mod adam;
mod checkpoint;
mod network;

pub use adam::AdamState;
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use network::{
    Gradients, Head, HiddenLayer, LayerGrads, Mode, Network, NetworkConfig, OutputLayer, Tape,
    BN_EPSILON, BN_MOMENTUM,
};
