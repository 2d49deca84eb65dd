//! Directory-level dataset layout: numbered PCD files plus an optional pose table,
//! and per-scan label files.
//!
//! ```text
//! dataset/
//!   000000.pcd      # sensor-frame points, optional `label` field (0 static, 1 dynamic)
//!   000001.pcd
//!   poses.txt       # scan_id tx ty tz qx qy qz qw
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::Point3;
use rayon::prelude::*;

use super::pcd::{read_pcd, write_pcd, CloudFile, DataMode, Viewpoint};
use super::poses::{read_poses, write_poses, PoseTable, LOAD_QUATERNION_TOLERANCE};
use crate::error::{Error, Result};
use crate::pipeline::{PointLabel, ScanLabels};
use crate::scan::{pose_from_parts, Pose, PosedScan};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PoseSource {
    File(PathBuf),
    Viewpoint,
}

/// `(scan_id, path)` of every `*.pcd` file, sorted by numeric stem.
pub fn list_scans(dir: &Path) -> Result<Vec<(u64, PathBuf)>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.extension().and_then(|e| e.to_str()) != Some("pcd") {
            continue;
        }
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
        let id: u64 = stem
            .parse()
            .map_err(|_| Error::invalid(format!("{}: file stem is not a scan number", path.display())))?;
        out.push((id, path));
    }
    out.sort();
    if let Some(w) = out.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::invalid(format!(
            "{} and {} share scan id {}",
            w[0].1.display(),
            w[1].1.display(),
            w[0].0
        )));
    }
    Ok(out)
}

pub fn viewpoint_pose(vp: &Viewpoint) -> Result<Pose> {
    pose_from_parts(vp.translation, vp.rotation_wxyz, LOAD_QUATERNION_TOLERANCE)
}

pub fn pose_viewpoint(pose: &Pose) -> Viewpoint {
    let t = pose.translation.vector;
    let q = pose.rotation.quaternion();
    Viewpoint {
        translation: [t.x, t.y, t.z],
        rotation_wxyz: [q.w, q.i, q.j, q.k],
    }
}

fn labels_from_codes(path: &Path, codes: &[i64]) -> Result<Vec<PointLabel>> {
    codes
        .iter()
        .enumerate()
        .map(|(i, c)| {
            PointLabel::from_code(*c).ok_or_else(|| {
                Error::parse(
                    path,
                    0,
                    format!("point {i}: label {c} is not 0 (static) or 1 (dynamic)"),
                )
            })
        })
        .collect()
}

/// Loads every scan in `dir`. With `world_frame`, file points are taken to be in
/// the world frame and are mapped back into the sensor frame.
pub fn load_sequence(dir: impl AsRef<Path>, source: &PoseSource, world_frame: bool) -> Result<Vec<PosedScan>> {
    let dir = dir.as_ref();
    let files = list_scans(dir)?;
    if files.is_empty() {
        return Err(Error::invalid(format!("{}: no .pcd files", dir.display())));
    }
    let table = match source {
        PoseSource::File(path) => Some(read_poses(path)?),
        PoseSource::Viewpoint => None,
    };
    files
        .par_iter()
        .map(|(id, path)| {
            let cloud = read_pcd(path)?;
            let pose = match &table {
                Some(t) => *t
                    .get(id)
                    .ok_or_else(|| Error::invalid(format!("no pose for scan {id} ({})", path.display())))?,
                None => {
                    let vp = cloud
                        .viewpoint
                        .ok_or_else(|| Error::invalid(format!("scan {id} ({}) has no VIEWPOINT", path.display())))?;
                    viewpoint_pose(&vp).map_err(|e| e.in_scan(*id))?
                }
            };
            let inverse = pose.inverse();
            let points = cloud
                .points
                .iter()
                .map(|p| {
                    let q = Point3::new(p[0] as f64, p[1] as f64, p[2] as f64);
                    if world_frame {
                        inverse * q
                    } else {
                        q
                    }
                })
                .collect();
            let mut scan = PosedScan::new(*id, pose, points);
            if let Some(codes) = &cloud.labels {
                scan.ground_truth = Some(labels_from_codes(path, codes)?);
            }
            Ok(scan)
        })
        .collect()
}

/// Writes scans as numbered PCD files (pose in VIEWPOINT, ground truth in `label`)
/// plus `poses.txt`.
pub fn write_sequence(dir: impl AsRef<Path>, scans: &[PosedScan], mode: DataMode) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut table = PoseTable::new();
    for scan in scans {
        let cloud = CloudFile {
            points: scan
                .points
                .iter()
                .map(|p| [p.x as f32, p.y as f32, p.z as f32])
                .collect(),
            labels: scan
                .ground_truth
                .as_ref()
                .map(|l| l.iter().map(|x| x.code() as i64).collect()),
            viewpoint: Some(pose_viewpoint(&scan.pose)),
        };
        write_pcd(dir.join(format!("{:06}.pcd", scan.scan_id)), &cloud, mode)?;
        table.insert(scan.scan_id, scan.pose);
    }
    write_poses(dir.join("poses.txt"), &table)
}

pub fn labels_file_name(scan_id: u64) -> String {
    format!("{scan_id:06}.labels")
}

/// One `raw_index label` line per labeled point.
pub fn write_labels(path: impl AsRef<Path>, labels: &ScanLabels) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::with_capacity(labels.labels.len() * 8);
    let _ = writeln!(out, "# scan {} raw_index label", labels.scan_id);
    for (i, l) in labels.indices.iter().zip(&labels.labels) {
        let _ = writeln!(out, "{i} {}", l.code());
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_labels(path: impl AsRef<Path>, scan_id: u64) -> Result<ScanLabels> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = ScanLabels {
        scan_id,
        ..Default::default()
    };
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let (Some(idx), Some(code), None) = (it.next(), it.next(), it.next()) else {
            return Err(Error::parse(path, i + 1, "expected 'raw_index label'"));
        };
        let idx: usize = idx
            .parse()
            .map_err(|_| Error::parse(path, i + 1, format!("invalid index '{idx}'")))?;
        let label = code
            .parse::<i64>()
            .ok()
            .and_then(PointLabel::from_code)
            .ok_or_else(|| Error::parse(path, i + 1, format!("invalid label '{code}'")))?;
        out.indices.push(idx);
        out.labels.push(label);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scan(id: u64, x: f64) -> PosedScan {
        let pose = pose_from_parts([x, 0.0, 1.0], [1.0, 0.0, 0.0, 0.0], 1e-6).unwrap();
        PosedScan::new(id, pose, vec![Point3::new(1.0, 2.0, 3.0), Point3::new(-1.0, 0.5, 0.0)])
            .with_ground_truth(vec![PointLabel::Static, PointLabel::Dynamic])
    }

    #[test]
    fn write_then_load_both_pose_sources() {
        let dir = tempfile::tempdir().unwrap();
        let scans = vec![scan(0, 0.0), scan(1, 1.0), scan(2, 2.5)];
        write_sequence(dir.path(), &scans, DataMode::Binary).unwrap();
        let from_file = load_sequence(dir.path(), &PoseSource::File(dir.path().join("poses.txt")), false).unwrap();
        let from_vp = load_sequence(dir.path(), &PoseSource::Viewpoint, false).unwrap();
        assert_eq!(from_file.len(), 3);
        for (a, b) in from_file.iter().zip(&from_vp) {
            assert_eq!(a.scan_id, b.scan_id);
            assert_eq!(a.points, b.points);
            assert_eq!(a.ground_truth, b.ground_truth);
            assert!((a.pose.translation.vector - b.pose.translation.vector).norm() < 1e-12);
        }
        assert_eq!(from_file[2].pose.translation.vector.x, 2.5);
        assert_eq!(from_file[1].ground_truth.as_ref().unwrap()[1], PointLabel::Dynamic);
    }

    #[test]
    fn order_is_numeric_not_listing() {
        let dir = tempfile::tempdir().unwrap();
        let scans: Vec<_> = [10u64, 2, 7, 0].iter().map(|i| scan(*i, *i as f64)).collect();
        write_sequence(dir.path(), &scans, DataMode::Ascii).unwrap();
        let loaded = load_sequence(dir.path(), &PoseSource::Viewpoint, false).unwrap();
        let ids: Vec<u64> = loaded.iter().map(|s| s.scan_id).collect();
        assert_eq!(ids, vec![0, 2, 7, 10]);
    }

    #[test]
    fn world_frame_points_are_mapped_to_sensor_frame() {
        let dir = tempfile::tempdir().unwrap();
        write_sequence(dir.path(), &[scan(0, 4.0)], DataMode::Binary).unwrap();
        let loaded = load_sequence(dir.path(), &PoseSource::Viewpoint, true).unwrap();
        let p = loaded[0].pose * loaded[0].points[0];
        assert!((p - Point3::new(1.0, 2.0, 3.0)).norm() < 1e-12);
    }

    #[test]
    fn missing_pose_names_scan() {
        let dir = tempfile::tempdir().unwrap();
        write_sequence(dir.path(), &[scan(0, 0.0), scan(5, 0.0)], DataMode::Ascii).unwrap();
        fs::write(dir.path().join("poses.txt"), "0 0 0 0 0 0 0 1\n").unwrap();
        let err = load_sequence(dir.path(), &PoseSource::File(dir.path().join("poses.txt")), false)
            .unwrap_err()
            .to_string();
        assert!(err.contains("scan 5"), "{err}");
    }

    #[test]
    fn empty_dir_is_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(load_sequence(dir.path(), &PoseSource::Viewpoint, false).is_err());
    }

    #[test]
    fn unknown_label_value_is_error() {
        let dir = tempfile::tempdir().unwrap();
        let cloud = CloudFile {
            points: vec![[0.0, 0.0, 0.0]],
            labels: Some(vec![2]),
            viewpoint: Some(Viewpoint::default()),
        };
        write_pcd(dir.path().join("000000.pcd"), &cloud, DataMode::Ascii).unwrap();
        assert!(load_sequence(dir.path(), &PoseSource::Viewpoint, false).is_err());
    }

    #[test]
    fn labels_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let labels = ScanLabels {
            scan_id: 4,
            indices: vec![0, 2, 3],
            labels: vec![PointLabel::Dynamic, PointLabel::Static, PointLabel::Dynamic],
        };
        let path = dir.path().join(labels_file_name(4));
        write_labels(&path, &labels).unwrap();
        assert_eq!(read_labels(&path, 4).unwrap(), labels);
    }
}
