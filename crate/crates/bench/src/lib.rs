//! Workloads shared by the benchmarks.

use voidmap::synth::{generate, presets, RayPattern};
use voidmap::PosedScan;

/// One scan of the static room with roughly `points` returns.
pub fn room_scan(points: usize) -> PosedScan {
    let mut spec = presets::static_room();
    spec.scans = 1;
    let elevation_count = 100;
    spec.pattern = RayPattern {
        azimuth_count: points.div_ceil(elevation_count),
        elevation_count,
        ..spec.pattern
    };
    generate(&spec).expect("preset is valid").remove(0)
}
