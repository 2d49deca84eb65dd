//! Synthetic box-world scenes with exact ground truth, and a dense reference
//! implementation of the void set for checking the production pipeline.

mod generate;
pub mod oracle;
pub mod presets;
mod scene;

pub use generate::{generate, true_sensor_pose};
pub use oracle::{oracle_voids, oracle_voids_with, IndexBox, Sampling, MAX_ORACLE_CELLS};
pub use scene::{Aabb, DynamicObject, RayPattern, SceneSpec};
