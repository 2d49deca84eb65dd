//! Sparse voxel addressing, per-scan observation state, and the persistent void map.

use std::fmt;
use std::ops::Add;

use nalgebra::Point3;
use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integer index of a voxel. Voxel `k` covers the half-open box `[k·v, (k+1)·v)` on each axis.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VoxelKey {
    pub x: i64,
    pub y: i64,
    pub z: i64,
}

impl VoxelKey {
    pub const fn new(x: i64, y: i64, z: i64) -> Self {
        Self { x, y, z }
    }

    pub fn chebyshev(&self, other: &VoxelKey) -> u64 {
        let dx = self.x.abs_diff(other.x);
        let dy = self.y.abs_diff(other.y);
        let dz = self.z.abs_diff(other.z);
        dx.max(dy).max(dz)
    }

    pub fn component_min(&self, other: &VoxelKey) -> VoxelKey {
        VoxelKey::new(self.x.min(other.x), self.y.min(other.y), self.z.min(other.z))
    }

    pub fn component_max(&self, other: &VoxelKey) -> VoxelKey {
        VoxelKey::new(self.x.max(other.x), self.y.max(other.y), self.z.max(other.z))
    }

    /// Lower corner of the voxel in meters.
    pub fn min_corner(&self, voxel_size: f64) -> Point3<f64> {
        Point3::new(
            self.x as f64 * voxel_size,
            self.y as f64 * voxel_size,
            self.z as f64 * voxel_size,
        )
    }

    /// Center of the voxel in meters.
    pub fn center(&self, voxel_size: f64) -> Point3<f64> {
        Point3::new(
            (self.x as f64 + 0.5) * voxel_size,
            (self.y as f64 + 0.5) * voxel_size,
            (self.z as f64 + 0.5) * voxel_size,
        )
    }
}

impl Add for VoxelKey {
    type Output = VoxelKey;

    fn add(self, rhs: VoxelKey) -> VoxelKey {
        VoxelKey::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl fmt::Display for VoxelKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

impl From<[i64; 3]> for VoxelKey {
    fn from(v: [i64; 3]) -> Self {
        VoxelKey::new(v[0], v[1], v[2])
    }
}

// Largest magnitude representable both as f64 and i64 without overflow on cast.
const INDEX_LIMIT: f64 = 9.0e18;

#[inline]
fn axis_index(c: f64, voxel_size: f64) -> Option<i64> {
    let q = (c / voxel_size).floor();
    if q.is_finite() && q.abs() < INDEX_LIMIT {
        Some(q as i64)
    } else {
        None
    }
}

/// Key of the voxel containing `p`; each component is `floor(c / v)`.
pub fn voxel_key(p: &Point3<f64>, voxel_size: f64) -> Result<VoxelKey> {
    if !(voxel_size > 0.0 && voxel_size.is_finite()) {
        return Err(Error::invalid(format!(
            "voxel size must be positive and finite, got {voxel_size}"
        )));
    }
    match (
        axis_index(p.x, voxel_size),
        axis_index(p.y, voxel_size),
        axis_index(p.z, voxel_size),
    ) {
        (Some(x), Some(y), Some(z)) => Ok(VoxelKey::new(x, y, z)),
        _ => Err(Error::invalid(format!(
            "point ({}, {}, {}) has no voxel index at size {voxel_size}",
            p.x, p.y, p.z
        ))),
    }
}

/// Unchecked variant for callers that already validated their inputs.
#[inline]
pub(crate) fn key_of(p: &Point3<f64>, voxel_size: f64) -> VoxelKey {
    VoxelKey::new(
        (p.x / voxel_size).floor() as i64,
        (p.y / voxel_size).floor() as i64,
        (p.z / voxel_size).floor() as i64,
    )
}

/// What a single scan observed about one voxel.
///
/// The variants form a chain `Unknown < Intersected < Hit`; combining two
/// observations keeps the larger one.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum VoxelState {
    #[default]
    Unknown = 0,
    Intersected = 1,
    Hit = 2,
}

impl VoxelState {
    pub const ALL: [VoxelState; 3] = [VoxelState::Unknown, VoxelState::Intersected, VoxelState::Hit];

    #[inline]
    pub fn join(self, other: VoxelState) -> VoxelState {
        self.max(other)
    }

    #[inline]
    pub fn is_observed(self) -> bool {
        self != VoxelState::Unknown
    }
}

pub fn merge_state(a: VoxelState, b: VoxelState) -> VoxelState {
    a.join(b)
}

/// Iterator over every key within Chebyshev distance `radius` of a center, excluding the center.
#[derive(Clone, Debug)]
pub struct Neighborhood {
    center: VoxelKey,
    radius: i64,
    dx: i64,
    dy: i64,
    dz: i64,
    done: bool,
}

impl Iterator for Neighborhood {
    type Item = VoxelKey;

    fn next(&mut self) -> Option<VoxelKey> {
        loop {
            if self.done {
                return None;
            }
            let offset = VoxelKey::new(self.dx, self.dy, self.dz);
            self.dz += 1;
            if self.dz > self.radius {
                self.dz = -self.radius;
                self.dy += 1;
                if self.dy > self.radius {
                    self.dy = -self.radius;
                    self.dx += 1;
                    if self.dx > self.radius {
                        self.done = true;
                    }
                }
            }
            if offset != VoxelKey::default() {
                return Some(self.center + offset);
            }
        }
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let side = (2 * self.radius + 1) as usize;
        let total = side * side * side - 1;
        (0, Some(total))
    }
}

/// All keys `k'` with `1 ≤ chebyshev(k, k') ≤ radius`; there are `(2r+1)³ − 1` of them.
pub fn neighborhood(center: VoxelKey, radius: u32) -> Neighborhood {
    let r = radius as i64;
    Neighborhood {
        center,
        radius: r,
        dx: -r,
        dy: -r,
        dz: -r,
        done: r == 0,
    }
}

/// Method parameters shared by ray integration and void classification.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params {
    /// Voxel edge length in meters.
    pub voxel_size: f64,
    /// Distance before each endpoint, in meters, that is treated as occupied to absorb range noise.
    pub noise_margin: f64,
    /// Chebyshev radius, in voxels, that must be fully observed around a void candidate.
    pub localization_radius: u32,
    /// Points farther than this from the sensor are not ray cast.
    pub max_range: Option<f64>,
    /// Voxels marked occupied past each endpoint. Defaults to `localization_radius`.
    pub hit_extension: Option<u32>,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            voxel_size: 0.1,
            noise_margin: 0.2,
            localization_radius: 1,
            max_range: None,
            hit_extension: None,
        }
    }
}

impl Params {
    pub fn new(voxel_size: f64, noise_margin: f64, localization_radius: u32) -> Self {
        Self {
            voxel_size,
            noise_margin,
            localization_radius,
            ..Self::default()
        }
    }

    pub fn with_max_range(mut self, max_range: Option<f64>) -> Self {
        self.max_range = max_range;
        self
    }

    pub fn with_hit_extension(mut self, hit_extension: Option<u32>) -> Self {
        self.hit_extension = hit_extension;
        self
    }

    pub fn effective_hit_extension(&self) -> u32 {
        self.hit_extension.unwrap_or(self.localization_radius)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.voxel_size > 0.0 && self.voxel_size.is_finite()) {
            return Err(Error::invalid(format!(
                "voxel_size must be > 0, got {}",
                self.voxel_size
            )));
        }
        if !(self.noise_margin >= 0.0 && self.noise_margin.is_finite()) {
            return Err(Error::invalid(format!("d_s must be >= 0, got {}", self.noise_margin)));
        }
        if let Some(r) = self.max_range {
            if r.is_nan() || r <= 0.0 {
                return Err(Error::invalid(format!("max_range must be > 0, got {r}")));
            }
        }
        Ok(())
    }
}

/// Observation buffer for one scan. Absent keys are `Unknown`.
#[derive(Clone, Debug, Default)]
pub struct ScanScratch {
    states: FxHashMap<VoxelKey, VoxelState>,
    bounds: Option<(VoxelKey, VoxelKey)>,
}

impl ScanScratch {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(capacity: usize) -> Self {
        Self {
            states: FxHashMap::with_capacity_and_hasher(capacity, Default::default()),
            bounds: None,
        }
    }

    pub fn clear(&mut self) {
        self.states.clear();
        self.bounds = None;
    }

    /// Joins `state` into the voxel's current state.
    #[inline]
    pub fn mark(&mut self, key: VoxelKey, state: VoxelState) {
        if state == VoxelState::Unknown {
            return;
        }
        let slot = self.states.entry(key).or_insert(state);
        *slot = slot.join(state);
        self.bounds = Some(match self.bounds {
            None => (key, key),
            Some((lo, hi)) => (lo.component_min(&key), hi.component_max(&key)),
        });
    }

    #[inline]
    pub fn state(&self, key: &VoxelKey) -> VoxelState {
        self.states.get(key).copied().unwrap_or_default()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Inclusive index box of all touched keys.
    pub fn bounds(&self) -> Option<(VoxelKey, VoxelKey)> {
        self.bounds
    }

    pub fn iter(&self) -> impl Iterator<Item = (VoxelKey, VoxelState)> + '_ {
        self.states.iter().map(|(k, s)| (*k, *s))
    }

    /// Joins every entry of `other` into `self`. Order of merges does not affect the result.
    pub fn merge(&mut self, other: &ScanScratch) {
        if other.states.len() > self.states.len() {
            self.states.reserve(other.states.len());
        }
        for (k, s) in &other.states {
            let slot = self.states.entry(*k).or_insert(*s);
            *slot = slot.join(*s);
        }
        self.bounds = match (self.bounds, other.bounds) {
            (None, b) | (b, None) => b,
            (Some((alo, ahi)), Some((blo, bhi))) => Some((alo.component_min(&blo), ahi.component_max(&bhi))),
        };
    }

    pub(crate) fn states(&self) -> &FxHashMap<VoxelKey, VoxelState> {
        &self.states
    }
}

/// Sparse set of voxels that were fully observed empty in at least one scan.
///
/// Membership is sticky: keys are added, never removed.
#[derive(Clone, Debug)]
pub struct VoidMap {
    voxels: FxHashSet<VoxelKey>,
    params: Params,
}

impl VoidMap {
    pub fn new(params: Params) -> Self {
        Self {
            voxels: FxHashSet::default(),
            params,
        }
    }

    pub fn voxel_size(&self) -> f64 {
        self.params.voxel_size
    }

    /// Parameters the map was built with.
    pub fn params(&self) -> &Params {
        &self.params
    }

    /// Returns true if the key was newly added.
    pub fn mark_void(&mut self, key: VoxelKey) -> bool {
        self.voxels.insert(key)
    }

    #[inline]
    pub fn contains(&self, key: &VoxelKey) -> bool {
        self.voxels.contains(key)
    }

    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &VoxelKey> {
        self.voxels.iter()
    }

    pub fn keys(&self) -> &FxHashSet<VoxelKey> {
        &self.voxels
    }

    /// Union with another map built at the same voxel size.
    pub fn absorb(&mut self, other: &VoidMap) -> Result<()> {
        if other.voxel_size() != self.voxel_size() {
            return Err(Error::invalid(format!(
                "cannot merge void maps with voxel sizes {} and {}",
                self.voxel_size(),
                other.voxel_size()
            )));
        }
        self.voxels.extend(other.voxels.iter().copied());
        Ok(())
    }
}

impl Extend<VoxelKey> for VoidMap {
    fn extend<T: IntoIterator<Item = VoxelKey>>(&mut self, iter: T) {
        self.voxels.extend(iter);
    }
}
