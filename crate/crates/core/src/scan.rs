use nalgebra::{Isometry3, Point3, Quaternion, Translation3, UnitQuaternion};

use crate::error::{Error, Result};

/// Sensor-to-world rigid transform.
pub type Pose = Isometry3<f64>;

/// Maximum deviation from unit norm accepted for quaternions in [`PosedScan`].
pub const QUATERNION_TOLERANCE: f64 = 1e-6;

/// Builds a pose from a translation and a `(w, x, y, z)` quaternion.
///
/// The quaternion norm must be within `tolerance` of one; it is renormalized.
pub fn pose_from_parts(translation: [f64; 3], wxyz: [f64; 4], tolerance: f64) -> Result<Pose> {
    if translation.iter().chain(wxyz.iter()).any(|c| !c.is_finite()) {
        return Err(Error::invalid("pose contains non-finite values"));
    }
    let q = Quaternion::new(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
    let norm = q.norm();
    if (norm - 1.0).abs() > tolerance {
        return Err(Error::invalid(format!(
            "quaternion norm {norm} deviates from 1 by more than {tolerance}"
        )));
    }
    Ok(Isometry3::from_parts(
        Translation3::new(translation[0], translation[1], translation[2]),
        UnitQuaternion::new_normalize(q),
    ))
}

pub(crate) fn check_pose(pose: &Pose) -> Result<()> {
    let t = &pose.translation.vector;
    let q = pose.rotation.quaternion();
    if !(t.iter().all(|c| c.is_finite()) && q.coords.iter().all(|c| c.is_finite())) {
        return Err(Error::invalid("pose contains non-finite values"));
    }
    if (q.norm() - 1.0).abs() > QUATERNION_TOLERANCE {
        return Err(Error::invalid(format!("pose quaternion norm {} is not unit", q.norm())));
    }
    Ok(())
}

/// One point cloud and the pose of the sensor that captured it.
#[derive(Clone, Debug)]
pub struct PosedScan {
    pub scan_id: u64,
    pub pose: Pose,
    /// Points in the sensor frame.
    pub points: Vec<Point3<f64>>,
    /// Ground-truth labels aligned with `points`, when known.
    pub ground_truth: Option<Vec<crate::pipeline::PointLabel>>,
}

impl PosedScan {
    pub fn new(scan_id: u64, pose: Pose, points: Vec<Point3<f64>>) -> Self {
        Self {
            scan_id,
            pose,
            points,
            ground_truth: None,
        }
    }

    pub fn with_ground_truth(mut self, labels: Vec<crate::pipeline::PointLabel>) -> Self {
        self.ground_truth = Some(labels);
        self
    }

    pub fn origin(&self) -> Point3<f64> {
        Point3::from(self.pose.translation.vector)
    }

    /// Raw point index and world-frame position of every finite point.
    pub fn world_points(&self) -> impl Iterator<Item = (usize, Point3<f64>)> + '_ {
        self.points.iter().enumerate().filter_map(move |(i, p)| {
            let w = self.pose * p;
            (w.x.is_finite() && w.y.is_finite() && w.z.is_finite()).then_some((i, w))
        })
    }
}
