//! Graph classifiers (MPGNN, RDS, Deep Set), the dual-input Comparison
//! model and the MLP baseline.

mod layers;
mod mlp;
mod model;

pub use layers::{ds_pass, mpgnn_pass, rds_pass, GraphState, LayerKind, PassParams, Tower};
pub use mlp::Mlp;
pub use model::{
    predict_label, target_class, Checkpoint, Model, ModelConfig, ModelInput, CHECKPOINT_FORMAT,
    CHECKPOINT_VERSION,
};
