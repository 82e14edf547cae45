//! Dataset plumbing: the on-disk raster pair, PNG adapters, dataset
//! manifests, patch extraction, and synthetic test data.

pub mod manifest;
pub mod patch;
pub mod png;
pub mod raster;
pub mod synth;

pub use manifest::{load_manifest, save_manifest, CubeEntry, DatasetManifest, RgbEntry, Role};
pub use patch::{extract_patches, PatchPair};
pub use png::{band_triplet_rgb, load_rgb, save_heatmap_png, save_rgb_png};
pub use raster::{load_cube, save_cube};
pub use synth::synth_dataset;
