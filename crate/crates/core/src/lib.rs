//! Detects dynamic points in posed point-cloud sequences by finding voxels that
//! some single scan observed completely empty.
//!
//! ```
//! use nalgebra::Point3;
//! use voidmap::{run_offline, Params, Pose, PosedScan, PointLabel};
//!
//! let scan = PosedScan::new(0, Pose::identity(), vec![Point3::new(2.0, 0.3, 0.1)]);
//! let out = run_offline(&[scan], &Params::default()).unwrap();
//! assert_eq!(out.labels.scans[0].labels, vec![PointLabel::Static]);
//! ```

mod error;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod raycast;
mod scan;
pub mod synth;
pub mod void;

pub use error::{Error, Result};
pub use grid::{merge_state, neighborhood, voxel_key, Params, ScanScratch, VoidMap, VoxelKey, VoxelState};
pub use metrics::{associated_accuracy, compute_metrics, confusion, Confusion, Metrics};
pub use nalgebra::Point3;
pub use pipeline::{
    classify_point, classify_scan, export_cleaned, run_offline, run_online, CleanedMap, LabeledSequence, OnlineOrder,
    PointLabel, RunOutput, ScanLabels,
};
pub use raycast::{build_scratch, integrate_ray, integrate_scan, traverse, Ray, ScanIntegration};
pub use scan::{pose_from_parts, Pose, PosedScan, QUATERNION_TOLERANCE};
pub use void::classify_voids;
