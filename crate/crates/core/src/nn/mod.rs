//! Point cloud regression network: a permutation-invariant encoder feeding
//! one MLP head per target group. Forward and backward passes are written
//! out by hand in f64 over a flat parameter vector.

mod encoder;
pub mod layers;
mod mlp;
mod model;

pub use encoder::{input_features, MaxPoolEncoder, PointEncoder, INPUT_CHANNELS, INPUT_SCALE_MM};
pub use mlp::{DenseSpec, Mlp, MlpCache, ParamBlock};
pub use model::{default_heads, ForwardPass, HeadSpec, Model, ModelConfig, ParamGroup};
