//! Differentiable building blocks shared by both branches.

pub mod attention;
pub mod checkpoint;
pub mod downsample;
pub mod encoding;
pub mod layers;
pub mod prompt;
pub mod two_way;

pub use attention::{AttentionOutput, CoAttention, MultiHeadAttention, TransformerLayer};
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use downsample::Downsampler;
pub use encoding::{positional_encoding, positional_matrix, DurationBinner, DurationBins, DurationEncoder};
pub use layers::{LayerNorm, Linear, MlpHead, N_CLASSES};
pub use prompt::{BoxPromptEncoder, FourierFeatures};
pub use two_way::TwoWayBlock;
