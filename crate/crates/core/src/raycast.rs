//! Ray traversal and per-scan observation integration.

use nalgebra::{Point3, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{key_of, Params, ScanScratch, VoidMap, VoxelKey, VoxelState};
use crate::scan::{check_pose, PosedScan};
use crate::void::classify_voids;

/// Segment from the sensor origin to a measured point, both in the world frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ray {
    pub origin: Point3<f64>,
    pub endpoint: Point3<f64>,
}

impl Ray {
    pub fn new(origin: Point3<f64>, endpoint: Point3<f64>) -> Self {
        Self { origin, endpoint }
    }

    pub fn length(&self) -> f64 {
        (self.endpoint - self.origin).norm()
    }

    fn check(&self) -> Result<()> {
        let finite = |p: &Point3<f64>| p.iter().all(|c| c.is_finite());
        if finite(&self.origin) && finite(&self.endpoint) {
            Ok(())
        } else {
            Err(Error::invalid("ray has non-finite coordinates"))
        }
    }
}

fn check_voxel_size(voxel_size: f64) -> Result<()> {
    if voxel_size > 0.0 && voxel_size.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("voxel size must be positive, got {voxel_size}")))
    }
}

/// Incremental 6-connected walk through the voxels pierced by a ray.
///
/// Boundary crossings are recomputed from the voxel index on every step rather
/// than accumulated, so exit parameters carry no drift along long rays.
#[derive(Clone, Debug)]
pub(crate) struct GridWalk {
    voxel_size: f64,
    origin: Point3<f64>,
    dir: Vector3<f64>,
    current: VoxelKey,
    step: [i64; 3],
    t_next: [f64; 3],
}

impl GridWalk {
    fn new(origin: Point3<f64>, dir: Vector3<f64>, voxel_size: f64) -> Self {
        let current = key_of(&origin, voxel_size);
        let step = [
            dir.x.partial_cmp(&0.0).map_or(0, |o| o as i64),
            dir.y.partial_cmp(&0.0).map_or(0, |o| o as i64),
            dir.z.partial_cmp(&0.0).map_or(0, |o| o as i64),
        ];
        let mut walk = Self {
            voxel_size,
            origin,
            dir,
            current,
            step,
            t_next: [f64::INFINITY; 3],
        };
        for axis in 0..3 {
            walk.refresh(axis);
        }
        walk
    }

    fn index(&self, axis: usize) -> i64 {
        match axis {
            0 => self.current.x,
            1 => self.current.y,
            _ => self.current.z,
        }
    }

    fn refresh(&mut self, axis: usize) {
        let s = self.step[axis];
        self.t_next[axis] = if s == 0 {
            f64::INFINITY
        } else {
            let boundary = if s > 0 { self.index(axis) + 1 } else { self.index(axis) };
            (boundary as f64 * self.voxel_size - self.origin[axis]) / self.dir[axis]
        };
    }

    /// Ray parameter at which the walk leaves the current voxel.
    fn exit_t(&self, allowed: [bool; 3]) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        for (axis, ok) in allowed.into_iter().enumerate() {
            if ok && self.t_next[axis] < best.1 {
                best = (axis, self.t_next[axis]);
            }
        }
        if best.0 == usize::MAX {
            // All allowed crossings are at infinity; fall back to the first allowed axis.
            if let Some(axis) = (0..3).find(|a| allowed[*a]) {
                best.0 = axis;
            }
        }
        best
    }

    fn advance(&mut self, axis: usize) {
        match axis {
            0 => self.current.x += self.step[0],
            1 => self.current.y += self.step[1],
            _ => self.current.z += self.step[2],
        }
        self.refresh(axis);
    }
}

/// Visits each voxel of a ray in order, reporting the parameter (meters from the
/// origin) at which the ray leaves it. The endpoint voxel reports the ray length.
///
/// The walk takes exactly one step per index difference on each axis, so it always
/// ends in `key(endpoint)` even when floating-point crossings disagree at corners.
/// Ties between axes advance in x, y, z order.
fn walk_segment(ray: &Ray, voxel_size: f64, mut visit: impl FnMut(VoxelKey, f64)) -> Option<GridWalk> {
    let start = key_of(&ray.origin, voxel_size);
    let end = key_of(&ray.endpoint, voxel_size);
    let delta = ray.endpoint - ray.origin;
    let length = delta.norm();
    if start == end || length == 0.0 {
        visit(start, length);
        return None;
    }
    let dir = delta / length;
    let mut walk = GridWalk::new(ray.origin, dir, voxel_size);
    let mut remaining = [
        end.x.abs_diff(start.x),
        end.y.abs_diff(start.y),
        end.z.abs_diff(start.z),
    ];
    // Step direction follows the key difference, which is authoritative.
    for (axis, d) in [end.x - start.x, end.y - start.y, end.z - start.z]
        .into_iter()
        .enumerate()
    {
        if d.signum() != walk.step[axis] && d != 0 {
            walk.step[axis] = d.signum();
            walk.refresh(axis);
        }
    }
    while remaining.iter().any(|r| *r > 0) {
        let allowed = [remaining[0] > 0, remaining[1] > 0, remaining[2] > 0];
        let (axis, t_exit) = walk.exit_t(allowed);
        visit(walk.current, t_exit.min(length));
        remaining[axis] -= 1;
        walk.advance(axis);
    }
    visit(walk.current, length);
    Some(walk)
}

/// Every voxel the segment passes through, from `key(origin)` to `key(endpoint)`.
pub fn traverse(ray: &Ray, voxel_size: f64) -> Result<Vec<VoxelKey>> {
    ray.check()?;
    check_voxel_size(voxel_size)?;
    let mut keys = Vec::new();
    walk_segment(ray, voxel_size, |k, _| keys.push(k));
    Ok(keys)
}

/// Casts one ray into the scan's observation buffer.
///
/// Voxels whose exit lies within `noise_margin` of the endpoint, the endpoint voxel
/// itself, and `hit_extension` voxels past the endpoint are joined as `Hit`; the
/// rest of the traversed voxels are joined as `Intersected`.
pub fn integrate_ray(scratch: &mut ScanScratch, ray: &Ray, params: &Params) -> Result<()> {
    ray.check()?;
    params.validate()?;
    integrate_ray_unchecked(scratch, ray, params);
    Ok(())
}

#[inline]
pub(crate) fn integrate_ray_unchecked(scratch: &mut ScanScratch, ray: &Ray, params: &Params) {
    let length = ray.length();
    let hit_from = length - params.noise_margin;
    let end = key_of(&ray.endpoint, params.voxel_size);
    let walk = walk_segment(ray, params.voxel_size, |key, t_exit| {
        let state = if key == end || t_exit > hit_from {
            VoxelState::Hit
        } else {
            VoxelState::Intersected
        };
        scratch.mark(key, state);
    });
    let extension = params.effective_hit_extension();
    if let Some(mut walk) = walk {
        let allowed = [walk.step[0] != 0, walk.step[1] != 0, walk.step[2] != 0];
        for _ in 0..extension {
            let (axis, _) = walk.exit_t(allowed);
            if axis == usize::MAX {
                break;
            }
            walk.advance(axis);
            scratch.mark(walk.current, VoxelState::Hit);
        }
    }
}

/// Counters from integrating one scan.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ScanIntegration {
    /// Rays cast into the scratch buffer.
    pub rays: usize,
    /// Points dropped for non-finite coordinates.
    pub non_finite: usize,
    /// Finite points skipped for exceeding the maximum range.
    pub out_of_range: usize,
    /// Voxels touched by this scan.
    pub touched: usize,
    /// Voxels classified void in this scan.
    pub voids: usize,
    /// Of those, voxels not already in the map.
    pub new_voids: usize,
}

const PARALLEL_RAY_CHUNK: usize = 16_384;

/// Builds the observation buffer for a single scan.
pub fn build_scratch(scan: &PosedScan, params: &Params) -> Result<(ScanScratch, ScanIntegration)> {
    params.validate()?;
    check_pose(&scan.pose).map_err(|e| e.in_scan(scan.scan_id))?;
    let origin = scan.origin();
    let mut stats = ScanIntegration::default();
    let mut rays = Vec::with_capacity(scan.points.len());
    for p in &scan.points {
        let w = scan.pose * p;
        if !w.iter().all(|c| c.is_finite()) {
            stats.non_finite += 1;
            continue;
        }
        if let Some(max) = params.max_range {
            if (w - origin).norm() > max {
                stats.out_of_range += 1;
                continue;
            }
        }
        rays.push(Ray::new(origin, w));
    }
    stats.rays = rays.len();

    let scratch = if rays.len() <= PARALLEL_RAY_CHUNK || rayon::current_num_threads() == 1 {
        let mut scratch = ScanScratch::with_capacity(rays.len() * 4);
        for ray in &rays {
            integrate_ray_unchecked(&mut scratch, ray, params);
        }
        scratch
    } else {
        rays.par_chunks(PARALLEL_RAY_CHUNK)
            .map(|chunk| {
                let mut scratch = ScanScratch::with_capacity(chunk.len() * 4);
                for ray in chunk {
                    integrate_ray_unchecked(&mut scratch, ray, params);
                }
                scratch
            })
            .reduce(ScanScratch::new, |mut a, b| {
                if a.len() < b.len() {
                    let mut b = b;
                    b.merge(&a);
                    return b;
                }
                a.merge(&b);
                a
            })
    };
    stats.touched = scratch.len();
    Ok((scratch, stats))
}

/// Ray casts one scan, classifies its void voxels, and adds them to `void_map`.
pub fn integrate_scan(void_map: &mut VoidMap, scan: &PosedScan, params: &Params) -> Result<ScanIntegration> {
    if params.voxel_size != void_map.voxel_size() {
        return Err(Error::invalid(format!(
            "params voxel size {} does not match map voxel size {}",
            params.voxel_size,
            void_map.voxel_size()
        )));
    }
    let (scratch, mut stats) = build_scratch(scan, params)?;
    let voids = classify_voids(&scratch, params.localization_radius);
    stats.voids = voids.len();
    for key in voids {
        if void_map.mark_void(key) {
            stats.new_voids += 1;
        }
    }
    Ok(stats)
}
