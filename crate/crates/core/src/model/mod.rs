//! The full network: tuple encoding with an optional supernode, a stack of
//! pre-LN refinement blocks, a final normalization and a linear readout.

pub mod config;
pub mod forward;
pub mod init;
pub mod params;

pub use config::{kv_lines, ModelConfig};
pub use forward::{
    floyd_block, floyd_block_on_tape, forward_on_tape, model_forward, predict, readout,
    readout_on_tape, readout_rows,
};
pub use init::{attach_supernode, encode_tuples, init_korder, init_relationship, SupernodeSlots};
pub use params::{LayerParams, ModelParams};
