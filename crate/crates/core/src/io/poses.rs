//! Plain-text pose tables: one `scan_id tx ty tz qx qy qz qw` line per scan.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scan::{pose_from_parts, Pose};

/// Quaternions farther than this from unit norm are rejected on load.
pub const LOAD_QUATERNION_TOLERANCE: f64 = 1e-3;

pub type PoseTable = BTreeMap<u64, Pose>;

pub fn parse_poses(path: &Path, text: &str) -> Result<PoseTable> {
    let mut table = PoseTable::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 8 {
            return Err(Error::parse(
                path,
                line_no,
                format!(
                    "expected 8 columns (scan_id tx ty tz qx qy qz qw), found {}",
                    tokens.len()
                ),
            ));
        }
        let id: u64 = tokens[0]
            .parse()
            .map_err(|_| Error::parse(path, line_no, format!("invalid scan id '{}'", tokens[0])))?;
        let mut v = [0.0f64; 7];
        for (slot, tok) in v.iter_mut().zip(&tokens[1..]) {
            *slot = tok
                .parse()
                .map_err(|_| Error::parse(path, line_no, format!("invalid number '{tok}'")))?;
        }
        let pose = pose_from_parts([v[0], v[1], v[2]], [v[6], v[3], v[4], v[5]], LOAD_QUATERNION_TOLERANCE)
            .map_err(|e| Error::parse(path, line_no, e.to_string()))?;
        if table.insert(id, pose).is_some() {
            return Err(Error::parse(path, line_no, format!("duplicate scan id {id}")));
        }
    }
    Ok(table)
}

pub fn read_poses(path: impl AsRef<Path>) -> Result<PoseTable> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_poses(path, &text)
}

pub fn format_poses(table: &PoseTable) -> String {
    let mut out = String::from("# scan_id tx ty tz qx qy qz qw\n");
    for (id, pose) in table {
        let t = &pose.translation.vector;
        let q = pose.rotation.quaternion();
        let _ = writeln!(out, "{id} {} {} {} {} {} {} {}", t.x, t.y, t.z, q.i, q.j, q.k, q.w);
    }
    out
}

pub fn write_poses(path: impl AsRef<Path>, table: &PoseTable) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_poses(table)).map_err(|e| Error::io(path, e))
}
