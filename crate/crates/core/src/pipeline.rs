//! Offline and online static/dynamic classification of posed scan sequences.

use std::time::Instant;

use nalgebra::Point3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{key_of, voxel_key, Params, VoidMap};
use crate::raycast::{integrate_scan, ScanIntegration};
pub use crate::scan::{pose_from_parts, Pose, PosedScan};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PointLabel {
    Static,
    Dynamic,
}

impl PointLabel {
    pub fn from_code(code: i64) -> Option<Self> {
        match code {
            0 => Some(PointLabel::Static),
            1 => Some(PointLabel::Dynamic),
            _ => None,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            PointLabel::Static => 0,
            PointLabel::Dynamic => 1,
        }
    }

    pub fn is_dynamic(self) -> bool {
        self == PointLabel::Dynamic
    }
}

/// Labels for one scan. `indices[i]` is the raw point index labeled by `labels[i]`;
/// non-finite points are absent.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanLabels {
    pub scan_id: u64,
    pub indices: Vec<usize>,
    pub labels: Vec<PointLabel>,
}

impl ScanLabels {
    pub fn dynamic_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_dynamic()).count()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSequence {
    pub scans: Vec<ScanLabels>,
}

impl LabeledSequence {
    pub fn total(&self) -> usize {
        self.scans.iter().map(|s| s.labels.len()).sum()
    }

    pub fn dynamic_count(&self) -> usize {
        self.scans.iter().map(ScanLabels::dynamic_count).sum()
    }

    /// Ground-truth labels restricted to the same retained points the pipeline labels.
    /// Returns `None` if any scan lacks ground truth.
    pub fn ground_truth(scans: &[PosedScan]) -> Result<Option<LabeledSequence>> {
        let mut out = Vec::with_capacity(scans.len());
        for scan in scans {
            let Some(gt) = &scan.ground_truth else {
                return Ok(None);
            };
            if gt.len() != scan.points.len() {
                return Err(Error::invalid(format!(
                    "scan {}: {} ground-truth labels for {} points",
                    scan.scan_id,
                    gt.len(),
                    scan.points.len()
                )));
            }
            let indices: Vec<usize> = scan.world_points().map(|(i, _)| i).collect();
            let labels = indices.iter().map(|i| gt[*i]).collect();
            out.push(ScanLabels {
                scan_id: scan.scan_id,
                indices,
                labels,
            });
        }
        Ok(Some(LabeledSequence { scans: out }))
    }
}

/// When the current scan is integrated relative to classifying its points in online mode.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OnlineOrder {
    /// Classify against scans `0..k`, then integrate scan `k`.
    #[default]
    ClassifyFirst,
    /// Integrate scan `k` first, then classify it against scans `0..=k`.
    IntegrateFirst,
}

/// Dynamic iff the point's voxel is void.
pub fn classify_point(map: &VoidMap, p: &Point3<f64>) -> Result<PointLabel> {
    let key = voxel_key(p, map.voxel_size())?;
    Ok(if map.contains(&key) {
        PointLabel::Dynamic
    } else {
        PointLabel::Static
    })
}

const PARALLEL_LABEL_THRESHOLD: usize = 50_000;

/// Labels every finite point of a scan against an immutable map snapshot.
pub fn classify_scan(map: &VoidMap, scan: &PosedScan) -> ScanLabels {
    let v = map.voxel_size();
    let label = |p: &Point3<f64>| {
        if map.contains(&key_of(p, v)) {
            PointLabel::Dynamic
        } else {
            PointLabel::Static
        }
    };
    let (indices, labels) = if scan.points.len() >= PARALLEL_LABEL_THRESHOLD {
        let world: Vec<(usize, Point3<f64>)> = scan.world_points().collect();
        let labels = world.par_iter().map(|(_, p)| label(p)).collect();
        (world.into_iter().map(|(i, _)| i).collect(), labels)
    } else {
        scan.world_points().map(|(i, p)| (i, label(&p))).unzip()
    };
    ScanLabels {
        scan_id: scan.scan_id,
        indices,
        labels,
    }
}

/// Result of a pipeline run.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub void_map: VoidMap,
    pub labels: LabeledSequence,
    /// Per-scan integration counters, in input order.
    pub integrations: Vec<ScanIntegration>,
    /// Wall-clock seconds spent in `integrate_scan` for each scan.
    pub integrate_seconds: Vec<f64>,
}

fn timed_integrate(map: &mut VoidMap, scan: &PosedScan, params: &Params) -> Result<(ScanIntegration, f64)> {
    let start = Instant::now();
    let stats = integrate_scan(map, scan, params).map_err(|e| match e {
        Error::Scan { .. } => e,
        other => other.in_scan(scan.scan_id),
    })?;
    Ok((stats, start.elapsed().as_secs_f64()))
}

fn require_scans(scans: &[PosedScan]) -> Result<()> {
    if scans.is_empty() {
        Err(Error::invalid("at least one scan is required"))
    } else {
        Ok(())
    }
}

/// Integrates every scan, then labels every point against the final map.
pub fn run_offline(scans: &[PosedScan], params: &Params) -> Result<RunOutput> {
    require_scans(scans)?;
    params.validate()?;
    let mut map = VoidMap::new(*params);
    let mut integrations = Vec::with_capacity(scans.len());
    let mut seconds = Vec::with_capacity(scans.len());
    for scan in scans {
        let (stats, t) = timed_integrate(&mut map, scan, params)?;
        integrations.push(stats);
        seconds.push(t);
    }
    let labels = LabeledSequence {
        scans: scans.iter().map(|s| classify_scan(&map, s)).collect(),
    };
    Ok(RunOutput {
        void_map: map,
        labels,
        integrations,
        integrate_seconds: seconds,
    })
}

/// Labels each scan against the map accumulated so far, in input order.
pub fn run_online(scans: &[PosedScan], params: &Params, order: OnlineOrder) -> Result<RunOutput> {
    require_scans(scans)?;
    params.validate()?;
    let mut map = VoidMap::new(*params);
    let mut integrations = Vec::with_capacity(scans.len());
    let mut seconds = Vec::with_capacity(scans.len());
    let mut labels = Vec::with_capacity(scans.len());
    for scan in scans {
        if order == OnlineOrder::ClassifyFirst {
            labels.push(classify_scan(&map, scan));
        }
        let (stats, t) = timed_integrate(&mut map, scan, params)?;
        integrations.push(stats);
        seconds.push(t);
        if order == OnlineOrder::IntegrateFirst {
            labels.push(classify_scan(&map, scan));
        }
    }
    Ok(RunOutput {
        void_map: map,
        labels: LabeledSequence { scans: labels },
        integrations,
        integrate_seconds: seconds,
    })
}

/// World-frame points split into static and dynamic sets.
#[derive(Clone, Debug, Default)]
pub struct CleanedMap {
    pub static_points: Vec<Point3<f64>>,
    pub dynamic_points: Vec<Point3<f64>>,
}

pub fn export_cleaned(scans: &[PosedScan], labels: &LabeledSequence) -> Result<CleanedMap> {
    if scans.len() != labels.scans.len() {
        return Err(Error::invalid(format!(
            "{} scans but {} label sequences",
            scans.len(),
            labels.scans.len()
        )));
    }
    let mut out = CleanedMap::default();
    for (scan, sl) in scans.iter().zip(&labels.scans) {
        if sl.scan_id != scan.scan_id || sl.indices.len() != sl.labels.len() {
            return Err(Error::invalid(format!("labels misaligned with scan {}", scan.scan_id)));
        }
        for (idx, label) in sl.indices.iter().zip(&sl.labels) {
            let Some(p) = scan.points.get(*idx) else {
                return Err(Error::invalid(format!(
                    "scan {}: label index {idx} out of range",
                    scan.scan_id
                )));
            };
            let w = scan.pose * p;
            match label {
                PointLabel::Static => out.static_points.push(w),
                PointLabel::Dynamic => out.dynamic_points.push(w),
            }
        }
    }
    Ok(out)
}
