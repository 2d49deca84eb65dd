use nalgebra::{Point3, Translation3, UnitQuaternion, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::scene::{Aabb, SceneSpec};
use crate::error::Result;
use crate::pipeline::{PointLabel, PosedScan};
use crate::scan::Pose;

fn gaussian3(rng: &mut ChaCha8Rng, sigma: f64) -> Vector3<f64> {
    if sigma == 0.0 {
        return Vector3::zeros();
    }
    let n = Normal::new(0.0, sigma).expect("sigma validated");
    Vector3::new(n.sample(rng), n.sample(rng), n.sample(rng))
}

/// Nearest surface along a ray: distance and whether it belongs to a moving object.
/// Static geometry wins exact ties.
fn first_hit(origin: &Point3<f64>, dir: &Vector3<f64>, statics: &[Aabb], dynamics: &[Aabb]) -> Option<(f64, bool)> {
    let mut best: Option<(f64, bool)> = None;
    for b in statics {
        if let Some(t) = b.ray_entry(origin, dir) {
            if best.is_none_or(|(bt, _)| t < bt) {
                best = Some((t, false));
            }
        }
    }
    for b in dynamics {
        if let Some(t) = b.ray_entry(origin, dir) {
            if best.is_none_or(|(bt, _)| t < bt) {
                best = Some((t, true));
            }
        }
    }
    best
}

/// The sensor pose actually used to cast rays for a scan. Differs from the
/// recorded pose only when pose noise is configured.
pub fn true_sensor_pose(spec: &SceneSpec, scan: u64) -> Pose {
    let nominal = spec.sensor_pose(scan);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(scan);
    let dt = gaussian3(&mut rng, spec.pose_noise);
    let dr = gaussian3(&mut rng, spec.rotation_noise);
    Pose::from_parts(
        Translation3::from(nominal.translation.vector + dt),
        nominal.rotation * UnitQuaternion::from_scaled_axis(dr),
    )
}

fn generate_scan(spec: &SceneSpec, scan: u64, directions: &[Vector3<f64>]) -> PosedScan {
    let nominal = spec.sensor_pose(scan);
    let truth = true_sensor_pose(spec, scan);
    // Range noise draws from a separate stream so pose draws stay stable.
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x9e37_79b9_7f4a_7c15);
    rng.set_stream(scan);
    let range_noise = (spec.range_noise > 0.0).then(|| Normal::new(0.0, spec.range_noise).unwrap());

    let dynamics: Vec<Aabb> = spec.dynamic_objects.iter().map(|d| d.aabb_at(scan)).collect();
    let origin = Point3::from(truth.translation.vector);
    let mut points = Vec::with_capacity(directions.len());
    let mut labels = Vec::with_capacity(directions.len());
    for dir in directions {
        let world_dir = truth.rotation * dir;
        let Some((t, dynamic)) = first_hit(&origin, &world_dir, &spec.static_boxes, &dynamics) else {
            continue;
        };
        if spec.max_range.is_some_and(|r| t > r) {
            continue;
        }
        let range = match &range_noise {
            Some(n) => (t + n.sample(&mut rng)).max(0.0),
            None => t,
        };
        points.push(Point3::from(dir * range));
        labels.push(if dynamic {
            PointLabel::Dynamic
        } else {
            PointLabel::Static
        });
    }
    PosedScan::new(scan, nominal, points).with_ground_truth(labels)
}

/// Casts the scene's ray pattern for every scan. Points are in the (possibly
/// perturbed) true sensor frame; the recorded pose is the nominal one.
pub fn generate(spec: &SceneSpec) -> Result<Vec<PosedScan>> {
    spec.validate()?;
    let directions = spec.pattern.directions();
    Ok((0..spec.scans)
        .into_par_iter()
        .map(|s| generate_scan(spec, s, &directions))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::scene::{DynamicObject, RayPattern};

    fn room() -> SceneSpec {
        SceneSpec {
            seed: 1,
            scans: 10,
            pattern: RayPattern {
                azimuth_count: 120,
                elevation_count: 12,
                elevation_min: -60.0,
                elevation_max: 60.0,
                azimuth_offset: 0.37,
            },
            static_boxes: Aabb::room_walls(Point3::new(-5.0, -5.0, 0.0), Point3::new(5.0, 5.0, 3.0), 0.2),
            sensor: vec![(0, Pose::translation(0.0, 0.0, 1.5))],
            ..SceneSpec::default()
        }
    }

    #[test]
    fn empty_room_is_all_static() {
        let scans = generate(&room()).unwrap();
        assert_eq!(scans.len(), 10);
        for s in &scans {
            assert_eq!(s.points.len(), 120 * 12, "closed room returns every ray");
            assert!(s
                .ground_truth
                .as_ref()
                .unwrap()
                .iter()
                .all(|l| *l == PointLabel::Static));
        }
    }

    #[test]
    fn crossing_cube_labels_exact_points() {
        let mut spec = room();
        spec.dynamic_objects.push(DynamicObject {
            size: Vector3::repeat(1.0),
            keyframes: vec![(0, Point3::new(-4.0, 1.0, 0.0)), (9, Point3::new(3.0, 1.0, 0.0))],
        });
        let scans = generate(&spec).unwrap();
        let mut dynamic = 0;
        for s in &scans {
            let cube = spec.dynamic_objects[0].aabb_at(s.scan_id);
            for (p, l) in s.points.iter().zip(s.ground_truth.as_ref().unwrap()) {
                let w = s.pose * p;
                let on_cube = (0..3).all(|a| w[a] >= cube.min[a] - 1e-9 && w[a] <= cube.max[a] + 1e-9)
                    && (0..3).any(|a| (w[a] - cube.min[a]).abs() < 1e-9 || (w[a] - cube.max[a]).abs() < 1e-9);
                assert_eq!(*l == PointLabel::Dynamic, on_cube);
                dynamic += (*l == PointLabel::Dynamic) as usize;
            }
        }
        assert!(dynamic > 0);
    }

    #[test]
    fn deterministic_per_seed() {
        let mut spec = room();
        spec.pose_noise = 0.05;
        spec.range_noise = 0.01;
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        for (x, y) in a.iter().zip(&b) {
            let bits = |s: &PosedScan| {
                s.points
                    .iter()
                    .flat_map(|p| p.iter().map(|c| c.to_bits()).collect::<Vec<_>>())
                    .collect::<Vec<_>>()
            };
            assert_eq!(bits(x), bits(y));
            assert_eq!(x.pose, y.pose);
        }
        spec.seed = 2;
        let c = generate(&spec).unwrap();
        assert_ne!(a[0].points, c[0].points);
    }

    #[test]
    fn pose_noise_leaves_recorded_pose_nominal() {
        let mut spec = room();
        spec.pose_noise = 0.1;
        let scans = generate(&spec).unwrap();
        assert!(scans.iter().all(|s| s.pose == Pose::translation(0.0, 0.0, 1.5)));
        let t = true_sensor_pose(&spec, 3);
        assert_ne!(t.translation.vector, Vector3::new(0.0, 0.0, 1.5));
    }

    #[test]
    fn max_range_drops_returns() {
        let mut spec = room();
        spec.max_range = Some(2.0);
        let scans = generate(&spec).unwrap();
        assert!(scans[0].points.iter().all(|p| p.coords.norm() <= 2.0 + 1e-9));
        assert!(scans[0].points.len() < 120 * 12);
    }
}
