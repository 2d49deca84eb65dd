//! Dense brute-force reference for the void set of a scan sequence.
//!
//! Shares nothing with the production traversal or classification: each ray is
//! cut at every grid plane it crosses, each piece is sampled at its midpoint,
//! and states live in a dense array that is scanned with a plain triple loop.

use std::collections::BTreeSet;

use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};
use crate::grid::{Params, VoxelKey};
use crate::pipeline::PosedScan;

/// Upper limit on oracle grid cells.
pub const MAX_ORACLE_CELLS: usize = 10_000_000;

/// Inclusive box of voxel indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IndexBox {
    pub min: VoxelKey,
    pub max: VoxelKey,
}

impl IndexBox {
    pub fn new(min: VoxelKey, max: VoxelKey) -> Self {
        Self { min, max }
    }

    /// Smallest box holding the metric box `lo..hi` plus `margin` voxels on each side.
    pub fn covering(lo: &Point3<f64>, hi: &Point3<f64>, voxel_size: f64, margin: i64) -> Self {
        let f = |c: f64| (c / voxel_size).floor() as i64;
        Self {
            min: VoxelKey::new(f(lo.x) - margin, f(lo.y) - margin, f(lo.z) - margin),
            max: VoxelKey::new(f(hi.x) + margin, f(hi.y) + margin, f(hi.z) + margin),
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        [
            (self.max.x - self.min.x + 1).max(0) as usize,
            (self.max.y - self.min.y + 1).max(0) as usize,
            (self.max.z - self.min.z + 1).max(0) as usize,
        ]
    }

    pub fn cells(&self) -> usize {
        self.dims().iter().product()
    }
}

const UNKNOWN: u8 = 0;
const INTERSECTED: u8 = 1;
const HIT: u8 = 2;

struct DenseGrid {
    bounds: IndexBox,
    dims: [usize; 3],
    cells: Vec<u8>,
}

impl DenseGrid {
    fn new(bounds: IndexBox) -> Self {
        let dims = bounds.dims();
        Self {
            bounds,
            dims,
            cells: vec![UNKNOWN; dims[0] * dims[1] * dims[2]],
        }
    }

    fn index(&self, x: i64, y: i64, z: i64) -> Option<usize> {
        let (lx, ly, lz) = (x - self.bounds.min.x, y - self.bounds.min.y, z - self.bounds.min.z);
        if lx < 0 || ly < 0 || lz < 0 {
            return None;
        }
        let (lx, ly, lz) = (lx as usize, ly as usize, lz as usize);
        if lx >= self.dims[0] || ly >= self.dims[1] || lz >= self.dims[2] {
            return None;
        }
        Some((lx * self.dims[1] + ly) * self.dims[2] + lz)
    }

    fn raise(&mut self, k: [i64; 3], state: u8) -> Result<()> {
        let Some(i) = self.index(k[0], k[1], k[2]) else {
            return Err(Error::BoundsExceeded(format!(
                "voxel ({}, {}, {}) outside {:?}",
                k[0], k[1], k[2], self.bounds
            )));
        };
        if self.cells[i] < state {
            self.cells[i] = state;
        }
        Ok(())
    }

    fn get(&self, x: i64, y: i64, z: i64) -> u8 {
        self.index(x, y, z).map_or(UNKNOWN, |i| self.cells[i])
    }

    fn voids(&self, radius: i64, out: &mut BTreeSet<VoxelKey>) {
        let b = self.bounds;
        for x in b.min.x..=b.max.x {
            for y in b.min.y..=b.max.y {
                for z in b.min.z..=b.max.z {
                    if self.get(x, y, z) != INTERSECTED {
                        continue;
                    }
                    let mut all_seen = true;
                    'n: for dx in -radius..=radius {
                        for dy in -radius..=radius {
                            for dz in -radius..=radius {
                                if self.get(x + dx, y + dy, z + dz) == UNKNOWN {
                                    all_seen = false;
                                    break 'n;
                                }
                            }
                        }
                    }
                    if all_seen {
                        out.insert(VoxelKey::new(x, y, z));
                    }
                }
            }
        }
    }
}

fn cell_of(p: &Point3<f64>, v: f64) -> [i64; 3] {
    [
        (p.x / v).floor() as i64,
        (p.y / v).floor() as i64,
        (p.z / v).floor() as i64,
    ]
}

/// How the oracle finds the voxels along a ray.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Sampling {
    /// Cut the ray at every grid-plane crossing and sample each piece's midpoint.
    PlaneCrossings,
    /// March at a fixed step in meters. Misses voxels whose chord is shorter than the step.
    FixedStep(f64),
}

/// Ray parameters in `(from, to)` where the ray crosses a grid plane, sorted.
fn plane_crossings(o: &Point3<f64>, d: &Vector3<f64>, v: f64, from: f64, to: f64) -> Vec<f64> {
    let mut ts = Vec::new();
    for a in 0..3 {
        if d[a] == 0.0 {
            continue;
        }
        let (c0, c1) = (o[a] + d[a] * from, o[a] + d[a] * to);
        let (lo, hi) = if c0 < c1 { (c0, c1) } else { (c1, c0) };
        let mut i = (lo / v).floor() as i64;
        while (i as f64) * v <= hi {
            let t = ((i as f64) * v - o[a]) / d[a];
            if t > from && t < to {
                ts.push(t);
            }
            i += 1;
        }
    }
    ts.sort_by(f64::total_cmp);
    ts
}

/// Ordered `(cell, exit parameter)` pieces of the ray between `from` and `to`.
fn pieces(o: &Point3<f64>, d: &Vector3<f64>, v: f64, from: f64, to: f64, sampling: Sampling) -> Vec<([i64; 3], f64)> {
    let at = |t: f64| cell_of(&(o + d * t), v);
    let mut out: Vec<([i64; 3], f64)> = Vec::new();
    let mut push = |cell: [i64; 3], exit: f64| match out.last_mut() {
        Some(last) if last.0 == cell => last.1 = last.1.max(exit),
        _ => out.push((cell, exit)),
    };
    match sampling {
        Sampling::PlaneCrossings => {
            let mut bounds = vec![from];
            bounds.extend(plane_crossings(o, d, v, from, to));
            bounds.push(to);
            for w in bounds.windows(2) {
                if w[1] > w[0] {
                    push(at(0.5 * (w[0] + w[1])), w[1]);
                }
            }
        }
        Sampling::FixedStep(step) => {
            let n = ((to - from) / step).ceil() as usize;
            for i in 0..=n {
                let t = (from + i as f64 * step).min(to);
                push(at(t), t);
            }
        }
    }
    out
}

fn mark_ray(
    grid: &mut DenseGrid,
    origin: &Point3<f64>,
    endpoint: &Point3<f64>,
    params: &Params,
    sampling: Sampling,
) -> Result<()> {
    let v = params.voxel_size;
    let end_cell = cell_of(endpoint, v);
    let length = (endpoint - origin).norm();
    if length == 0.0 || cell_of(origin, v) == end_cell {
        return grid.raise(end_cell, HIT);
    }
    let d = (endpoint - origin) / length;
    let hit_from = length - params.noise_margin;
    for (cell, exit) in pieces(origin, &d, v, 0.0, length, sampling) {
        let state = if cell == end_cell || exit > hit_from {
            HIT
        } else {
            INTERSECTED
        };
        grid.raise(cell, state)?;
    }
    grid.raise(end_cell, HIT)?;

    let extension = params.effective_hit_extension() as usize;
    if extension > 0 {
        let reach = (extension as f64 + 2.0) * v * 3f64.sqrt();
        let beyond = pieces(origin, &d, v, length, length + reach, sampling);
        let mut added: Vec<[i64; 3]> = Vec::new();
        for (cell, _) in beyond {
            if added.len() == extension {
                break;
            }
            if cell != end_cell && !added.contains(&cell) {
                added.push(cell);
            }
        }
        for cell in added {
            grid.raise(cell, HIT)?;
        }
    }
    Ok(())
}

/// Union over scans of the voxels each scan alone classifies as void.
pub fn oracle_voids(scans: &[PosedScan], params: &Params, bounds: IndexBox) -> Result<BTreeSet<VoxelKey>> {
    oracle_voids_with(scans, params, bounds, Sampling::PlaneCrossings)
}

pub fn oracle_voids_with(
    scans: &[PosedScan],
    params: &Params,
    bounds: IndexBox,
    sampling: Sampling,
) -> Result<BTreeSet<VoxelKey>> {
    params.validate()?;
    let cells = bounds.cells();
    if cells == 0 || cells > MAX_ORACLE_CELLS {
        return Err(Error::BoundsExceeded(format!(
            "{cells} cells requested, limit is {MAX_ORACLE_CELLS}"
        )));
    }
    let mut result = BTreeSet::new();
    for scan in scans {
        let mut grid = DenseGrid::new(bounds);
        let origin = Point3::from(scan.pose.translation.vector);
        for p in &scan.points {
            let w = scan.pose * p;
            if !(w.x.is_finite() && w.y.is_finite() && w.z.is_finite()) {
                continue;
            }
            if params.max_range.is_some_and(|r| (w - origin).norm() > r) {
                continue;
            }
            mark_ray(&mut grid, &origin, &w, params, sampling)?;
        }
        grid.voids(params.localization_radius as i64, &mut result);
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scan::Pose;

    #[test]
    fn single_ray_has_no_voids() {
        let scan = PosedScan::new(0, Pose::identity(), vec![Point3::new(1.23, 0.41, 0.17)]);
        let bounds = IndexBox::new(VoxelKey::new(-5, -5, -5), VoxelKey::new(20, 20, 20));
        assert!(oracle_voids(&[scan], &Params::default(), bounds).unwrap().is_empty());
    }

    #[test]
    fn bounds_are_enforced() {
        let scan = PosedScan::new(0, Pose::identity(), vec![Point3::new(5.0, 0.0, 0.0)]);
        let small = IndexBox::new(VoxelKey::new(-2, -2, -2), VoxelKey::new(2, 2, 2));
        assert!(matches!(
            oracle_voids(std::slice::from_ref(&scan), &Params::default(), small),
            Err(Error::BoundsExceeded(_))
        ));
        let huge = IndexBox::new(VoxelKey::new(0, 0, 0), VoxelKey::new(1000, 1000, 1000));
        assert!(matches!(
            oracle_voids(&[scan], &Params::default(), huge),
            Err(Error::BoundsExceeded(_))
        ));
    }

    #[test]
    fn axis_ray_pieces() {
        let o = Point3::new(0.05, 0.05, 0.05);
        let d = Vector3::x();
        let p = pieces(&o, &d, 0.1, 0.0, 1.0, Sampling::PlaneCrossings);
        let cells: Vec<i64> = p.iter().map(|(c, _)| c[0]).collect();
        assert_eq!(cells, (0..=10).collect::<Vec<_>>());
        assert!((p[0].1 - 0.05).abs() < 1e-12);
    }
}
