//! Ready-made scenes used by tests, benches and the CLI examples.
//!
//! Room surfaces sit a few millimeters inside a voxel boundary so that only a
//! sliver of each surface voxel lies in free space. Grazing rays then cannot
//! observe those voxels as empty.

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::oracle::IndexBox;
use super::scene::{Aabb, DynamicObject, RayPattern, SceneSpec};
use crate::grid::Params;
use crate::scan::Pose;

/// Static 10 m x 10 m x 2.9 m room, sensor drifting across the middle, no movers.
pub fn static_room() -> SceneSpec {
    SceneSpec {
        seed: 11,
        scans: 10,
        pattern: RayPattern {
            azimuth_count: 720,
            elevation_count: 48,
            elevation_min: -60.0,
            elevation_max: 45.0,
            azimuth_offset: 0.13,
        },
        static_boxes: Aabb::room_walls(
            Point3::new(-5.006, -4.507, -0.004),
            Point3::new(5.004, 5.506, 2.905),
            0.2,
        ),
        sensor: vec![
            (0, Pose::translation(-1.03, 0.21, 1.17)),
            (9, Pose::translation(1.07, -0.33, 1.17)),
        ],
        ..SceneSpec::default()
    }
}

/// Interior extent of the corridor scene.
pub const CORRIDOR_MIN: [f64; 3] = [-2.006, -1.507, -0.004];
pub const CORRIDOR_MAX: [f64; 3] = [12.004, 1.506, 2.705];

const CUBE_SIZE: f64 = 0.9;

/// Region occupied by the moving cube during scans 0-4.
pub fn corridor_cube_region() -> Aabb {
    let min = Point3::new(5.03, -0.47, 0.41);
    Aabb::new(min, min + Vector3::repeat(CUBE_SIZE))
}

/// Corridor with a floating cube that occupies [`corridor_cube_region`] for
/// scans 0-4 and is gone for scans 5-9, while the sensor drives down the
/// corridor. `pose_noise` is the translation sigma in meters.
pub fn corridor_moving_cube(pose_noise: f64) -> SceneSpec {
    let region = corridor_cube_region();
    let gone = Point3::new(500.0, 500.0, 500.0);
    SceneSpec {
        seed: 5,
        scans: 10,
        pattern: RayPattern {
            azimuth_count: 720,
            elevation_count: 64,
            elevation_min: -50.0,
            elevation_max: 50.0,
            azimuth_offset: 0.13,
        },
        pose_noise,
        static_boxes: Aabb::room_walls(CORRIDOR_MIN.into(), CORRIDOR_MAX.into(), 0.2),
        dynamic_objects: vec![DynamicObject {
            size: Vector3::repeat(CUBE_SIZE),
            keyframes: vec![(0, region.min), (4, region.min), (5, gone), (9, gone)],
        }],
        sensor: vec![
            (0, Pose::translation(0.0, 0.31, 1.23)),
            (9, Pose::translation(10.0, 0.31, 1.23)),
        ],
        ..SceneSpec::default()
    }
}

/// A randomized closed scene small enough for the dense oracle.
#[derive(Clone, Debug)]
pub struct OracleCase {
    pub spec: SceneSpec,
    pub params: Params,
    pub bounds: IndexBox,
}

fn free_of(p: &Point3<f64>, boxes: &[Aabb], clearance: f64) -> bool {
    boxes
        .iter()
        .all(|b| (0..3).any(|a| p[a] < b.min[a] - clearance || p[a] > b.max[a] + clearance))
}

/// Closed room with a couple of static boxes, one mover, random sensor poses and
/// random parameters drawn from `d_p` in {0, 1, 2} and `d_s` in {0, 0.2}. The
/// oracle bounds never exceed 50 voxels per axis.
pub fn random_oracle_case(seed: u64) -> OracleCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coarse = rng.random_bool(0.5);
    let voxel_size = if coarse { 0.2 } else { 0.1 };
    let wall = voxel_size;
    let margin = 3;
    let budget = 50.0 - 2.0 * margin as f64 - 2.0;
    let max_inner = budget * voxel_size - 2.0 * wall;
    let lo = Point3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-0.5..0.5),
    );
    let size = Vector3::new(
        rng.random_range(0.6 * max_inner..max_inner),
        rng.random_range(0.6 * max_inner..max_inner),
        rng.random_range(0.5 * max_inner..0.8 * max_inner),
    );
    let hi = lo + size;
    let mut boxes = Aabb::room_walls(lo, hi, wall);
    let outer = Aabb::new(lo - Vector3::repeat(wall), hi + Vector3::repeat(wall));

    let mut interior = Vec::new();
    for _ in 0..rng.random_range(1..=3) {
        let ext = Vector3::new(
            rng.random_range(0.1..0.3) * size.x,
            rng.random_range(0.1..0.3) * size.y,
            rng.random_range(0.2..0.6) * size.z,
        );
        let min = Point3::new(
            rng.random_range(lo.x..hi.x - ext.x),
            rng.random_range(lo.y..hi.y - ext.y),
            lo.z,
        );
        interior.push(Aabb::new(min, min + ext));
    }
    boxes.extend(interior.iter().copied());

    let scans = rng.random_range(3..=10u64);
    let mover_size = Vector3::repeat(rng.random_range(0.15..0.3) * size.x.min(size.y));
    let start = Point3::new(
        rng.random_range(lo.x..hi.x - mover_size.x),
        rng.random_range(lo.y..hi.y - mover_size.y),
        rng.random_range(lo.z..hi.z - mover_size.z),
    );
    let end = Point3::new(
        rng.random_range(lo.x..hi.x - mover_size.x),
        rng.random_range(lo.y..hi.y - mover_size.y),
        start.z,
    );
    let mover = DynamicObject {
        size: mover_size,
        keyframes: vec![(0, start), (scans - 1, end)],
    };

    let mut sensor = Vec::new();
    for s in 0..scans {
        let cube = mover.aabb_at(s);
        let mut blocked = interior.clone();
        blocked.push(cube);
        let p = loop {
            let p = Point3::new(
                rng.random_range(lo.x + 0.2..hi.x - 0.2),
                rng.random_range(lo.y + 0.2..hi.y - 0.2),
                rng.random_range(lo.z + 0.2..hi.z - 0.2),
            );
            if free_of(&p, &blocked, 0.05) {
                break p;
            }
        };
        sensor.push((s, Pose::translation(p.x, p.y, p.z)));
    }

    let d_p = rng.random_range(0..=2u32);
    let d_s = if rng.random_bool(0.5) { 0.0 } else { 0.2 };
    let spec = SceneSpec {
        seed,
        scans,
        pattern: RayPattern {
            azimuth_count: rng.random_range(90..=180),
            elevation_count: rng.random_range(24..=40),
            elevation_min: -85.0,
            elevation_max: 85.0,
            azimuth_offset: rng.random_range(0.0..1.0),
        },
        static_boxes: boxes,
        dynamic_objects: vec![mover],
        sensor,
        ..SceneSpec::default()
    };
    OracleCase {
        spec,
        params: Params::new(voxel_size, d_s, d_p),
        bounds: IndexBox::covering(&outer.min, &outer.max, voxel_size, margin),
    }
}
