//! Image ingestion, the two preprocessing recipes, dataset manifests,
//! tensor caches and a synthetic two-class image generator.

pub mod cache;
pub mod error;
pub mod labels;
pub mod manifest;
pub mod preprocess;
pub mod resize;
pub mod synth;

pub use cache::{read_tensor_cache, write_tensor_cache, TensorCache};
pub use error::{DataError, Result};
pub use labels::{label_from_filename, CLASS_NAMES};
pub use manifest::{build_manifest, build_manifest_tree, DatasetManifest, Record, Split};
pub use preprocess::{load_image, preprocess_path, preprocess_v1, preprocess_v2, AxisOrder, Method, Preprocessed};
pub use resize::Plane;
pub use synth::{synth_dataset, SynthConfig};
