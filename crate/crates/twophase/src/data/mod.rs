//! Dataset manifests, deterministic stratified splits, augmentation, and the
//! synthetic long-tail image generator.

pub mod augment;
pub mod dataset;
pub mod manifest;
pub mod split;
pub mod synthetic;

pub use augment::{augment, channel_stats, normalize, ChannelStats};
pub use dataset::{locator_rows, TensorDataset};
pub use manifest::{ClassDistribution, DatasetManifest, Exclusions, FilterOutcome, Locator, Sample};
pub use split::{split, SplitSpec};
pub use synthetic::{
    generate, materialize, read_blob, write_blob, BlobHeader, CountSpec, ImageStore,
    SyntheticDataset, SyntheticSpec,
};
