//! File formats: PCD clouds, pose tables, run configs and dataset directories.

pub mod config;
pub mod pcd;
pub mod poses;
pub mod sequence;

pub use config::{load_config, parse_config, Mode, RunConfig};
pub use pcd::{encode_pcd, parse_pcd, read_pcd, write_pcd, CloudFile, DataMode, Viewpoint};
pub use poses::{format_poses, parse_poses, read_poses, write_poses, PoseTable, LOAD_QUATERNION_TOLERANCE};
pub use sequence::{
    labels_file_name, list_scans, load_sequence, pose_viewpoint, read_labels, viewpoint_pose, write_labels,
    write_sequence, PoseSource,
};
