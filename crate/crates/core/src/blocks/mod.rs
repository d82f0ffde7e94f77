//! Composite video blocks and the layer-stack description built on them.

mod fsb;
mod model;
mod trg;

pub use fsb::{fsb_forward, FsbWeights};
pub use model::{
    max_pool3d, model_forward, model_from_str, model_parse, random_weights, Backend, ClipShape, LayerKind, LayerSpec,
    LayerWeights, ModelSpec,
};
pub use trg::trg_forward;
