//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits nonzero
//! if any gated criterion fails. Criterion 6 (throughput) is reported only.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use voidmap::io::{encode_pcd, parse_pcd, CloudFile, DataMode, Viewpoint};
use voidmap::synth::{generate, oracle_voids, presets, RayPattern};
use voidmap::*;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, bool);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn void_set(map: &VoidMap) -> BTreeSet<VoxelKey> {
    map.keys().iter().copied().collect()
}

fn metrics_for(scans: &[PosedScan], params: &Params) -> Metrics {
    let out = run_offline(scans, params).expect("pipeline runs");
    let gt = LabeledSequence::ground_truth(scans)
        .unwrap()
        .expect("synthetic scans carry ground truth");
    compute_metrics(&confusion(&out.labels, &gt).unwrap())
}

/// Every (SA, DA, AA) triple of the published comparison table: six methods on
/// four datasets.
const PUBLISHED: [(f64, f64, f64); 24] = [
    (99.44, 41.53, 64.26),
    (97.81, 39.56, 62.20),
    (98.97, 31.16, 55.53),
    (99.96, 12.15, 34.85),
    (66.70, 98.54, 81.07),
    (98.12, 90.94, 94.46),
    (77.51, 99.18, 87.68),
    (94.90, 66.26, 79.30),
    (68.05, 99.69, 82.37),
    (55.55, 99.59, 74.38),
    (69.04, 97.50, 82.04),
    (88.97, 82.18, 85.51),
    (97.96, 98.72, 98.34),
    (98.09, 94.20, 96.12),
    (96.67, 88.90, 92.70),
    (99.64, 83.00, 90.94),
    (96.76, 90.68, 93.67),
    (96.33, 68.01, 80.94),
    (96.08, 92.87, 94.46),
    (98.81, 36.49, 60.05),
    (98.37, 92.37, 95.31),
    (98.48, 81.34, 89.50),
    (98.66, 73.98, 85.43),
    (99.94, 54.76, 73.98),
];

fn published_aa() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut misses = Vec::new();
    for (sa, da, aa) in PUBLISHED {
        let err = (associated_accuracy(sa, da) - aa).abs();
        worst = worst.max(err);
        if err > 0.01 + 1e-9 {
            misses.push(format!("{sa}/{da} -> {:.4}, table {aa}", associated_accuracy(sa, da)));
        }
    }
    check(misses.is_empty(), || {
        format!(
            "{}/{} rows within tolerance; off: {}",
            PUBLISHED.len() - misses.len(),
            PUBLISHED.len(),
            misses.join("; ")
        )
    })?;
    Ok(format!("{} rows, max |error| {worst:.4}", PUBLISHED.len()))
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut combos = BTreeSet::new();
    let cases = 24;
    for seed in 0..cases {
        let case = presets::random_oracle_case(seed);
        check(case.bounds.dims().iter().all(|d| *d <= 50), || {
            format!("seed {seed}: bounds {:?}", case.bounds.dims())
        })?;
        let scans = generate(&case.spec).map_err(|e| e.to_string())?;
        let produced = void_set(&run_offline(&scans, &case.params).map_err(|e| e.to_string())?.void_map);
        let expected = oracle_voids(&scans, &case.params, case.bounds).map_err(|e| e.to_string())?;
        check(produced == expected, || {
            format!(
                "seed {seed}: {} production voids vs {} oracle, {} differ",
                produced.len(),
                expected.len(),
                produced.symmetric_difference(&expected).count()
            )
        })?;
        combos.insert((
            case.params.localization_radius,
            (case.params.noise_margin * 10.0) as u32,
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    check(secs < 60.0, || format!("took {secs:.1} s"))?;
    Ok(format!(
        "{cases} scenes equal, {} (d_p, d_s) combinations, {secs:.1} s",
        combos.len()
    ))
}

fn corridor_cleaning() -> Outcome {
    let scans = generate(&presets::corridor_moving_cube(0.0)).map_err(|e| e.to_string())?;
    let m = metrics_for(&scans, &Params::default());
    let (sa, da) = (m.static_accuracy.unwrap(), m.dynamic_accuracy.unwrap());
    let line = format!("SA {sa:.2} DA {da:.2} AA {:.2}", m.associated_accuracy.unwrap());
    check(da >= 99.0 && sa >= 95.0, || line.clone())?;
    Ok(line)
}

fn ablation_direction() -> Outcome {
    let scans = generate(&presets::corridor_moving_cube(0.05)).map_err(|e| e.to_string())?;
    let full = metrics_for(&scans, &Params::new(0.1, 0.2, 1));
    let none = metrics_for(&scans, &Params::new(0.1, 0.0, 0));
    let (sa_full, da_full) = (full.static_accuracy.unwrap(), full.dynamic_accuracy.unwrap());
    let (sa_none, da_none) = (none.static_accuracy.unwrap(), none.dynamic_accuracy.unwrap());
    let line = format!("full SA {sa_full:.2} DA {da_full:.2}; no models SA {sa_none:.2} DA {da_none:.2}");
    check(sa_full > sa_none && da_none >= da_full, || line.clone())?;
    Ok(line)
}

fn property_suite() -> Outcome {
    let mut passed = Vec::new();

    // Scan-order permutation.
    let case = presets::random_oracle_case(7);
    let scans = generate(&case.spec).unwrap();
    let reference = run_offline(&scans, &case.params).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for i in 0..5 {
        let mut shuffled = scans.clone();
        shuffled.shuffle(&mut rng);
        let out = run_offline(&shuffled, &case.params).unwrap();
        check(void_set(&out.void_map) == void_set(&reference.void_map), || {
            format!("permutation {i} changed the void set")
        })?;
    }
    passed.push("permutation");

    // Online dynamic implies offline dynamic.
    for seed in [7, 11, 13] {
        let case = presets::random_oracle_case(seed);
        let scans = generate(&case.spec).unwrap();
        let offline = run_offline(&scans, &case.params).unwrap();
        let online = run_online(&scans, &case.params, OnlineOrder::ClassifyFirst).unwrap();
        for (on, off) in online.labels.scans.iter().zip(&offline.labels.scans) {
            let bad = on
                .labels
                .iter()
                .zip(&off.labels)
                .filter(|(a, b)| a.is_dynamic() && !b.is_dynamic())
                .count();
            check(bad == 0, || {
                format!("seed {seed} scan {}: {bad} online-only dynamic points", on.scan_id)
            })?;
        }
    }
    passed.push("online-subset");

    // Void set shrinks as the radius grows.
    for scan in &scans {
        let (scratch, _) = build_scratch(scan, &case.params).unwrap();
        let sets: Vec<_> = (0..=3).map(|r| classify_voids(&scratch, r)).collect();
        for r in 0..3 {
            check(sets[r + 1].iter().all(|k| sets[r].contains(k)), || {
                format!("scan {}: radius {} not within {r}", scan.scan_id, r + 1)
            })?;
        }
    }
    passed.push("d_p anti-monotone");

    // Lattice laws, exhaustively.
    for a in VoxelState::ALL {
        check(merge_state(a, a) == a, || format!("{a:?} not idempotent"))?;
        check(merge_state(a, VoxelState::Unknown) == a, || {
            format!("Unknown not identity for {a:?}")
        })?;
        check(merge_state(a, VoxelState::Hit) == VoxelState::Hit, || {
            format!("Hit not absorbing for {a:?}")
        })?;
        for b in VoxelState::ALL {
            check(merge_state(a, b) == merge_state(b, a), || {
                format!("{a:?},{b:?} not commutative")
            })?;
            for c in VoxelState::ALL {
                check(
                    merge_state(merge_state(a, b), c) == merge_state(a, merge_state(b, c)),
                    || format!("{a:?},{b:?},{c:?} not associative"),
                )?;
            }
        }
    }
    passed.push("lattice");

    // The void map only ever grows.
    let mut map = VoidMap::new(case.params);
    let mut before = BTreeSet::new();
    for scan in &scans {
        integrate_scan(&mut map, scan, &case.params).unwrap();
        let now = void_set(&map);
        check(before.is_subset(&now), || {
            format!("scan {} removed voids", scan.scan_id)
        })?;
        before = now;
    }
    passed.push("monotone growth");

    // Binary PCD round trip on arbitrary bit patterns, NaN payloads included.
    let mut runner = TestRunner::new(Config {
        cases: 64,
        failure_persistence: None,
        ..Config::default()
    });
    let cloud_strategy = (
        prop::collection::vec(prop::array::uniform3(any::<u32>()), 0..300),
        prop::bool::ANY,
        prop::array::uniform3(-1e3f64..1e3),
    );
    runner
        .run(&cloud_strategy, |(bits, with_labels, t)| {
            let cloud = CloudFile {
                labels: with_labels.then(|| (0..bits.len() as i64).map(|i| i % 2).collect()),
                points: bits.iter().map(|b| b.map(f32::from_bits)).collect(),
                viewpoint: Some(Viewpoint {
                    translation: t,
                    rotation_wxyz: [1.0, 0.0, 0.0, 0.0],
                }),
            };
            let bytes = encode_pcd(&cloud, DataMode::Binary).unwrap();
            let back = parse_pcd(Path::new("roundtrip.pcd"), &bytes).unwrap();
            let got: Vec<[u32; 3]> = back.points.iter().map(|p| p.map(f32::to_bits)).collect();
            prop_assert_eq!(got, bits);
            prop_assert_eq!(back.labels, cloud.labels);
            prop_assert_eq!(back.viewpoint, cloud.viewpoint);
            Ok(())
        })
        .map_err(|e| format!("pcd round trip: {e}"))?;
    passed.push("pcd bit-exact");

    // Associated accuracy lies between its inputs and squares to their product.
    runner
        .run(&(0.0f64..=100.0, 0.0f64..=100.0), |(sa, da)| {
            let aa = associated_accuracy(sa, da);
            prop_assert!(aa >= sa.min(da) - 1e-9 && aa <= sa.max(da) + 1e-9);
            prop_assert!((aa * aa - sa * da).abs() <= 1e-9 * (1.0 + sa * da));
            Ok(())
        })
        .map_err(|e| format!("AA bounds: {e}"))?;
    passed.push("AA bounds");

    Ok(passed.join(", "))
}

fn throughput() -> Outcome {
    let mut spec = presets::static_room();
    spec.scans = 1;
    spec.pattern = RayPattern {
        azimuth_count: 1000,
        elevation_count: 100,
        ..spec.pattern
    };
    let scan = generate(&spec).unwrap().remove(0);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let params = Params::default();
    let mut best = f64::INFINITY;
    for _ in 0..3 {
        let mut map = VoidMap::new(params);
        let start = Instant::now();
        pool.install(|| integrate_scan(&mut map, &scan, &params)).unwrap();
        best = best.min(start.elapsed().as_secs_f64());
    }
    let line = format!("{} points, best of 3: {best:.3} s single-threaded", scan.points.len());
    check(best < 0.5, || line.clone())?;
    Ok(line)
}

fn main() -> ExitCode {
    let criteria: [Criterion; 6] = [
        ("1 published AA values within 0.01", published_aa, true),
        ("2 oracle equivalence on random scenes", oracle_equivalence, true),
        ("3 corridor cleaning DA >= 99, SA >= 95", corridor_cleaning, true),
        ("4 ablation direction under pose noise", ablation_direction, true),
        ("5 property suite", property_suite, true),
        ("6 throughput under 0.5 s (not gated)", throughput, false),
    ];
    let mut failed = 0;
    for (name, run, gated) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default())
        });
        match outcome {
            Ok(detail) => println!("criterion {name}: PASS ({detail})"),
            Err(detail) => {
                println!("criterion {name}: FAIL ({detail})");
                if gated {
                    failed += 1;
                }
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
