//! Synthetic domain-shift generators, IDX digit ingestion, the bundle
//! container and run configuration files.

mod bundle;
mod config;
mod idx;
mod scenario;

pub use bundle::{decode_bundle, encode_bundle, load_bundle, save_bundle, DatasetBundle, EvalSet, TrainingView, BUNDLE_MAGIC, BUNDLE_VERSION};
pub use config::{config_hash, load_run_config, parse_run_config, DataSource, DigitsSource, RunConfig};
pub use idx::{load_idx, write_idx_images, write_idx_labels, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
pub use scenario::{gen_gaussian_shift, gen_shift, gen_two_moons_shift, GeneratorKind, ShiftScenario};
