//! The attention model: local neighbor attention, global self-attention and
//! masked temporal self-attention, producing one embedding per node and step.

mod checkpoint;
mod config;
mod forward;
mod init;
mod inputs;
mod layers;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint, CheckpointMeta};
pub use config::{MaskMode, ModelConfig, Variant};
pub use forward::{forward, model_forward, EmbeddingCube, ForwardOutput, ForwardTrace};
pub use init::init_params;
pub use inputs::GraphInputs;
pub use layers::{global_attention, local_attention, temporal_attention, temporal_mask};

pub use crate::tensor::ParameterSet;

/// Parameter names.
pub mod names {
    pub const EMBED: &str = "embed";
    pub const LOCAL_PROJ: &str = "local.proj";
    pub const POSITION: &str = "temporal.pos";

    pub fn local_w(h: usize) -> String {
        format!("local.{h:02}.w")
    }
    pub fn local_a(h: usize) -> String {
        format!("local.{h:02}.a")
    }
    pub fn global(h: usize, which: &str) -> String {
        format!("global.{h:02}.{which}")
    }
    pub fn temporal(h: usize, which: &str) -> String {
        format!("temporal.{h:02}.{which}")
    }
}
