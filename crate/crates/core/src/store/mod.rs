//! On-disk data model: tensor blobs, samples, manifests, chronological
//! splitting and the synthetic corpus generator.

pub mod blob;
pub mod manifest;
pub mod sample;
pub mod split;
pub mod synth;

pub use blob::{probe_tensor, read_tensor, write_tensor, DType, TensorBlob};
pub use manifest::{load_manifest, validate_manifest, write_dataset, DatasetManifest, FeatureDims, SampleRecord};
pub use sample::{AnalysisAnnotations, FeatureBundle, Label, Modality, NewsVideoSample, Segment, SegmentSequence, TextBox};
pub use split::{split_sizes, temporal_split, DEFAULT_RATIOS};
pub use synth::{synthesize, synthesize_dataset, CueEffects, SynthSpec, SyntheticCorpus};
