//! Scene descriptions for the synthetic generator and their text format.
//!
//! The format is flat `key = value` lines for global settings followed by
//! repeated `[section]` blocks:
//!
//! ```text
//! seed = 7
//! scans = 10
//! azimuth_count = 720
//! elevation_count = 48
//! elevation_min = -45      # degrees
//! elevation_max = 30
//! azimuth_offset = 0.1     # degrees
//! max_range = 30           # optional
//! pose_noise = 0.0         # translation sigma, meters
//! rotation_noise = 0.0     # sigma, radians
//! range_noise = 0.0        # sigma, meters
//!
//! [room]                   # six slabs enclosing min..max
//! min = 0 0 0
//! max = 12 3 2.5
//! thickness = 0.2
//!
//! [box]                    # static solid box
//! min = 4 0 0
//! max = 5 0.5 1
//!
//! [dynamic]                # moving box: size plus min-corner keyframes
//! size = 0.8 0.8 0.8
//! at = 0 6 1 0.5           # scan x y z
//! at = 9 6 2 0.5
//!
//! [sensor]                 # keyframes: scan x y z [qx qy qz qw]
//! at = 0 1 1.5 1.2
//! at = 9 11 1.5 1.2
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{Point3, Quaternion, Translation3, UnitQuaternion, Vector3};

use crate::error::{Error, Result};
use crate::scan::Pose;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Point3<f64>,
    pub max: Point3<f64>,
}

impl Aabb {
    pub fn new(min: Point3<f64>, max: Point3<f64>) -> Self {
        Self { min, max }
    }

    pub fn is_degenerate(&self) -> bool {
        !(0..3).all(|a| self.max[a] > self.min[a])
    }

    pub fn contains(&self, p: &Point3<f64>) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }

    pub fn translated(&self, by: Vector3<f64>) -> Aabb {
        Aabb::new(self.min + by, self.max + by)
    }

    /// Entry distance of a ray with unit direction `dir` starting outside the box.
    /// Returns `None` when the ray misses or starts inside.
    pub fn ray_entry(&self, origin: &Point3<f64>, dir: &Vector3<f64>) -> Option<f64> {
        let mut t_near = f64::NEG_INFINITY;
        let mut t_far = f64::INFINITY;
        for a in 0..3 {
            if dir[a] == 0.0 {
                if origin[a] < self.min[a] || origin[a] > self.max[a] {
                    return None;
                }
                continue;
            }
            let t1 = (self.min[a] - origin[a]) / dir[a];
            let t2 = (self.max[a] - origin[a]) / dir[a];
            let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
            t_near = t_near.max(lo);
            t_far = t_far.min(hi);
        }
        (t_near <= t_far && t_near > 0.0).then_some(t_near)
    }

    /// Six slabs of `thickness` enclosing the interior box `min..max`.
    pub fn room_walls(min: Point3<f64>, max: Point3<f64>, thickness: f64) -> Vec<Aabb> {
        let t = thickness;
        let (lo, hi) = (min - Vector3::repeat(t), max + Vector3::repeat(t));
        vec![
            Aabb::new(Point3::new(lo.x, lo.y, lo.z), Point3::new(hi.x, hi.y, min.z)),
            Aabb::new(Point3::new(lo.x, lo.y, max.z), Point3::new(hi.x, hi.y, hi.z)),
            Aabb::new(Point3::new(lo.x, lo.y, min.z), Point3::new(min.x, hi.y, max.z)),
            Aabb::new(Point3::new(max.x, lo.y, min.z), Point3::new(hi.x, hi.y, max.z)),
            Aabb::new(Point3::new(min.x, lo.y, min.z), Point3::new(max.x, min.y, max.z)),
            Aabb::new(Point3::new(min.x, max.y, min.z), Point3::new(max.x, hi.y, max.z)),
        ]
    }
}

/// A box of fixed size whose min corner follows piecewise-linear keyframes.
#[derive(Clone, Debug, PartialEq)]
pub struct DynamicObject {
    pub size: Vector3<f64>,
    /// `(scan index, min corner)`, sorted by scan index.
    pub keyframes: Vec<(u64, Point3<f64>)>,
}

impl DynamicObject {
    pub fn aabb_at(&self, scan: u64) -> Aabb {
        let corner = interpolate(&self.keyframes, scan, |a, b, f| a + (b - a) * f);
        Aabb::new(corner, corner + self.size)
    }
}

fn interpolate<T: Copy>(frames: &[(u64, T)], scan: u64, lerp: impl Fn(T, T, f64) -> T) -> T {
    let first = frames.first().expect("validated non-empty");
    if scan <= first.0 {
        return first.1;
    }
    for w in frames.windows(2) {
        let ((s0, a), (s1, b)) = (w[0], w[1]);
        if scan <= s1 {
            let f = (scan - s0) as f64 / (s1 - s0) as f64;
            return lerp(a, b, f);
        }
    }
    frames.last().unwrap().1
}

/// Spherical grid of ray directions in the sensor frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayPattern {
    pub azimuth_count: usize,
    pub elevation_count: usize,
    /// Degrees.
    pub elevation_min: f64,
    /// Degrees.
    pub elevation_max: f64,
    /// Degrees added to every azimuth.
    pub azimuth_offset: f64,
}

impl Default for RayPattern {
    fn default() -> Self {
        Self {
            azimuth_count: 360,
            elevation_count: 32,
            elevation_min: -30.0,
            elevation_max: 30.0,
            azimuth_offset: 0.0,
        }
    }
}

impl RayPattern {
    pub fn rays_per_scan(&self) -> usize {
        self.azimuth_count * self.elevation_count
    }

    pub fn directions(&self) -> Vec<Vector3<f64>> {
        let mut out = Vec::with_capacity(self.rays_per_scan());
        for e in 0..self.elevation_count {
            let elev = if self.elevation_count == 1 {
                self.elevation_min
            } else {
                self.elevation_min
                    + (self.elevation_max - self.elevation_min) * e as f64 / (self.elevation_count - 1) as f64
            }
            .to_radians();
            for a in 0..self.azimuth_count {
                let az = (360.0 * a as f64 / self.azimuth_count as f64 + self.azimuth_offset).to_radians();
                out.push(Vector3::new(elev.cos() * az.cos(), elev.cos() * az.sin(), elev.sin()));
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneSpec {
    pub seed: u64,
    pub scans: u64,
    pub pattern: RayPattern,
    pub max_range: Option<f64>,
    /// Translation noise sigma in meters applied to the true sensor pose.
    pub pose_noise: f64,
    /// Rotation noise sigma in radians.
    pub rotation_noise: f64,
    pub range_noise: f64,
    pub static_boxes: Vec<Aabb>,
    pub dynamic_objects: Vec<DynamicObject>,
    /// `(scan index, pose)` keyframes, sorted by scan index.
    pub sensor: Vec<(u64, Pose)>,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            scans: 1,
            pattern: RayPattern::default(),
            max_range: None,
            pose_noise: 0.0,
            rotation_noise: 0.0,
            range_noise: 0.0,
            static_boxes: Vec::new(),
            dynamic_objects: Vec::new(),
            sensor: Vec::new(),
        }
    }
}

impl SceneSpec {
    /// Nominal sensor pose at a scan index, interpolated between keyframes.
    pub fn sensor_pose(&self, scan: u64) -> Pose {
        interpolate(&self.sensor, scan, |a, b, f| {
            let t = a.translation.vector.lerp(&b.translation.vector, f);
            let r = a.rotation.slerp(&b.rotation, f);
            Pose::from_parts(Translation3::from(t), r)
        })
    }

    pub fn validate(&self) -> Result<()> {
        let err = |field: &str, msg: &str| Err(Error::invalid(format!("{field}: {msg}")));
        if self.scans == 0 {
            return err("scans", "must be at least 1");
        }
        if self.pattern.azimuth_count == 0 || self.pattern.elevation_count == 0 {
            return err("azimuth_count", "ray pattern must have at least one ray");
        }
        if self.static_boxes.is_empty() && self.dynamic_objects.is_empty() && self.max_range.is_none() {
            return err("box", "scene has no geometry and no max_range; rays never terminate");
        }
        if let Some(r) = self.max_range {
            if r.is_nan() || r <= 0.0 {
                return err("max_range", "must be positive");
            }
        }
        for (field, v) in [
            ("pose_noise", self.pose_noise),
            ("rotation_noise", self.rotation_noise),
            ("range_noise", self.range_noise),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return err(field, "must be a finite non-negative number");
            }
        }
        if self.static_boxes.iter().any(Aabb::is_degenerate) {
            return err("box", "degenerate box (max must exceed min on every axis)");
        }
        for d in &self.dynamic_objects {
            if d.keyframes.is_empty() {
                return err("dynamic.at", "dynamic object needs at least one keyframe");
            }
            if !d.size.iter().all(|s| *s > 0.0) {
                return err("dynamic.size", "size must be positive on every axis");
            }
            if d.keyframes.windows(2).any(|w| w[0].0 >= w[1].0) {
                return err("dynamic.at", "keyframes must have strictly increasing scan indices");
            }
        }
        if self.sensor.is_empty() {
            return err("sensor.at", "sensor trajectory needs at least one keyframe");
        }
        if self.sensor.windows(2).any(|w| w[0].0 >= w[1].0) {
            return err("sensor.at", "keyframes must have strictly increasing scan indices");
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let p = &self.pattern;
        let _ = writeln!(s, "seed = {}\nscans = {}", self.seed, self.scans);
        let _ = writeln!(
            s,
            "azimuth_count = {}\nelevation_count = {}\nelevation_min = {}\nelevation_max = {}\nazimuth_offset = {}",
            p.azimuth_count, p.elevation_count, p.elevation_min, p.elevation_max, p.azimuth_offset
        );
        if let Some(r) = self.max_range {
            let _ = writeln!(s, "max_range = {r}");
        }
        let _ = writeln!(
            s,
            "pose_noise = {}\nrotation_noise = {}\nrange_noise = {}",
            self.pose_noise, self.rotation_noise, self.range_noise
        );
        let v3 = |v: &Point3<f64>| format!("{} {} {}", v.x, v.y, v.z);
        for b in &self.static_boxes {
            let _ = writeln!(s, "\n[box]\nmin = {}\nmax = {}", v3(&b.min), v3(&b.max));
        }
        for d in &self.dynamic_objects {
            let _ = writeln!(s, "\n[dynamic]\nsize = {} {} {}", d.size.x, d.size.y, d.size.z);
            for (scan, c) in &d.keyframes {
                let _ = writeln!(s, "at = {scan} {}", v3(c));
            }
        }
        let _ = writeln!(s, "\n[sensor]");
        for (scan, pose) in &self.sensor {
            let t = pose.translation.vector;
            let q = pose.rotation.quaternion();
            let _ = writeln!(s, "at = {scan} {} {} {} {} {} {} {}", t.x, t.y, t.z, q.i, q.j, q.k, q.w);
        }
        s
    }

    pub fn parse(path: &Path, text: &str) -> Result<SceneSpec> {
        parse_scene(path, text)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<SceneSpec> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        parse_scene(path, &text)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Section {
    Global,
    Room,
    Box,
    Dynamic,
    Sensor,
}

#[derive(Default)]
struct Pending {
    min: Option<Point3<f64>>,
    max: Option<Point3<f64>>,
    thickness: Option<f64>,
    size: Option<Vector3<f64>>,
    frames: Vec<(u64, Point3<f64>)>,
    start_line: usize,
}

fn parse_scene(path: &Path, text: &str) -> Result<SceneSpec> {
    let mut spec = SceneSpec::default();
    let mut section = Section::Global;
    let mut pending = Pending::default();

    let flush = |section: Section, pending: &mut Pending, spec: &mut SceneSpec| -> Result<()> {
        let p = std::mem::take(pending);
        let line = p.start_line;
        let missing = |field: &str| Error::parse(path, line, format!("section is missing '{field}'"));
        match section {
            Section::Global | Section::Sensor => {}
            Section::Room => {
                let (min, max) = (
                    p.min.ok_or_else(|| missing("min"))?,
                    p.max.ok_or_else(|| missing("max"))?,
                );
                let t = p.thickness.unwrap_or(0.2);
                if t.is_nan() || t <= 0.0 || Aabb::new(min, max).is_degenerate() {
                    return Err(Error::parse(path, line, "room: degenerate extent or thickness"));
                }
                spec.static_boxes.extend(Aabb::room_walls(min, max, t));
            }
            Section::Box => {
                let b = Aabb::new(
                    p.min.ok_or_else(|| missing("min"))?,
                    p.max.ok_or_else(|| missing("max"))?,
                );
                spec.static_boxes.push(b);
            }
            Section::Dynamic => {
                let size = p.size.ok_or_else(|| missing("size"))?;
                if p.frames.is_empty() {
                    return Err(missing("at"));
                }
                spec.dynamic_objects.push(DynamicObject {
                    size,
                    keyframes: p.frames,
                });
            }
        }
        Ok(())
    };

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            flush(section, &mut pending, &mut spec)?;
            pending.start_line = line_no;
            section = match name.trim() {
                "room" => Section::Room,
                "box" => Section::Box,
                "dynamic" => Section::Dynamic,
                "sensor" => Section::Sensor,
                other => return Err(Error::parse(path, line_no, format!("unknown section [{other}]"))),
            };
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected key = value, got '{line}'"),
            ));
        };
        let (key, value) = (key.trim(), value.trim());
        let bad = |what: &str| Error::parse(path, line_no, format!("{key}: invalid {what} '{value}'"));
        let nums = || -> Result<Vec<f64>> {
            value
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| bad("number list")))
                .collect()
        };
        let vec3 = || -> Result<[f64; 3]> {
            match nums()?.as_slice() {
                [x, y, z] => Ok([*x, *y, *z]),
                _ => Err(bad("3-vector")),
            }
        };
        let num = || value.parse::<f64>().map_err(|_| bad("number"));
        let int = || value.parse::<u64>().map_err(|_| bad("integer"));
        match (section, key) {
            (Section::Global, "seed") => spec.seed = int()?,
            (Section::Global, "scans") => spec.scans = int()?,
            (Section::Global, "azimuth_count") => spec.pattern.azimuth_count = int()? as usize,
            (Section::Global, "elevation_count") => spec.pattern.elevation_count = int()? as usize,
            (Section::Global, "elevation_min") => spec.pattern.elevation_min = num()?,
            (Section::Global, "elevation_max") => spec.pattern.elevation_max = num()?,
            (Section::Global, "azimuth_offset") => spec.pattern.azimuth_offset = num()?,
            (Section::Global, "max_range") => spec.max_range = Some(num()?),
            (Section::Global, "pose_noise") => spec.pose_noise = num()?,
            (Section::Global, "rotation_noise") => spec.rotation_noise = num()?,
            (Section::Global, "range_noise") => spec.range_noise = num()?,
            (Section::Room | Section::Box, "min") => pending.min = Some(vec3()?.into()),
            (Section::Room | Section::Box, "max") => pending.max = Some(vec3()?.into()),
            (Section::Room, "thickness") => pending.thickness = Some(num()?),
            (Section::Dynamic, "size") => pending.size = Some(vec3()?.into()),
            (Section::Dynamic, "at") => match nums()?.as_slice() {
                [s, x, y, z] if *s >= 0.0 && s.fract() == 0.0 => {
                    pending.frames.push((*s as u64, Point3::new(*x, *y, *z)))
                }
                _ => return Err(bad("keyframe (scan x y z)")),
            },
            (Section::Sensor, "at") => {
                let v = nums()?;
                let (s, t, q) = match v.as_slice() {
                    [s, x, y, z] => (*s, [*x, *y, *z], [0.0, 0.0, 0.0, 1.0]),
                    [s, x, y, z, qx, qy, qz, qw] => (*s, [*x, *y, *z], [*qx, *qy, *qz, *qw]),
                    _ => return Err(bad("keyframe (scan x y z [qx qy qz qw])")),
                };
                if !(s >= 0.0 && s.fract() == 0.0) {
                    return Err(bad("scan index"));
                }
                let quat = Quaternion::new(q[3], q[0], q[1], q[2]);
                if (quat.norm() - 1.0).abs() > 1e-3 {
                    return Err(bad("quaternion (must be unit)"));
                }
                let pose = Pose::from_parts(Translation3::new(t[0], t[1], t[2]), UnitQuaternion::new_normalize(quat));
                spec.sensor.push((s as u64, pose));
            }
            (_, other) => {
                return Err(Error::parse(
                    path,
                    line_no,
                    format!("unknown key '{other}' in this section"),
                ))
            }
        }
    }
    flush(section, &mut pending, &mut spec)?;
    spec.validate().map_err(|e| Error::parse(path, 0, e.to_string()))?;
    Ok(spec)
}
