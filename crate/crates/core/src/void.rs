//! Void classification of a single scan's observations.

use rayon::prelude::*;
use rustc_hash::FxHashSet;

use crate::grid::{neighborhood, ScanScratch, VoxelKey, VoxelState};

const PARALLEL_THRESHOLD: usize = 1 << 15;

#[inline]
fn fully_observed(scratch: &ScanScratch, key: VoxelKey, radius: u32) -> bool {
    let states = scratch.states();
    neighborhood(key, radius).all(|n| states.contains_key(&n))
}

/// Keys whose state is `Intersected` and whose every neighbor within Chebyshev
/// distance `radius` was observed (`Intersected` or `Hit`) in the same scan.
pub fn classify_voids(scratch: &ScanScratch, radius: u32) -> FxHashSet<VoxelKey> {
    let candidates = scratch
        .states()
        .iter()
        .filter(|(_, s)| **s == VoxelState::Intersected)
        .map(|(k, _)| *k);
    if scratch.len() < PARALLEL_THRESHOLD || rayon::current_num_threads() == 1 {
        candidates.filter(|k| fully_observed(scratch, *k, radius)).collect()
    } else {
        let keys: Vec<VoxelKey> = candidates.collect();
        keys.par_iter()
            .copied()
            .filter(|k| fully_observed(scratch, *k, radius))
            .collect::<Vec<_>>()
            .into_iter()
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    fn block(lo: i64, hi: i64, state: VoxelState) -> ScanScratch {
        let mut s = ScanScratch::new();
        for x in lo..=hi {
            for y in lo..=hi {
                for z in lo..=hi {
                    s.mark(VoxelKey::new(x, y, z), state);
                }
            }
        }
        s
    }

    /// Dense brute force over a cube of side `n` holding states as a flat array.
    fn brute_force(grid: &[VoxelState], n: i64, radius: i64) -> BTreeSet<VoxelKey> {
        let at = |x: i64, y: i64, z: i64| -> VoxelState {
            if x < 0 || y < 0 || z < 0 || x >= n || y >= n || z >= n {
                VoxelState::Unknown
            } else {
                grid[(x * n * n + y * n + z) as usize]
            }
        };
        let mut out = BTreeSet::new();
        for x in 0..n {
            for y in 0..n {
                for z in 0..n {
                    if at(x, y, z) != VoxelState::Intersected {
                        continue;
                    }
                    let mut ok = true;
                    for dx in -radius..=radius {
                        for dy in -radius..=radius {
                            for dz in -radius..=radius {
                                if at(x + dx, y + dy, z + dz) == VoxelState::Unknown {
                                    ok = false;
                                }
                            }
                        }
                    }
                    if ok {
                        out.insert(VoxelKey::new(x, y, z));
                    }
                }
            }
        }
        out
    }

    #[test]
    fn center_of_intersected_block() {
        let s = block(-1, 1, VoxelState::Intersected);
        let v = classify_voids(&s, 1);
        assert_eq!(v.into_iter().collect::<Vec<_>>(), vec![VoxelKey::new(0, 0, 0)]);
    }

    #[test]
    fn lone_intersected_voxel() {
        let mut s = ScanScratch::new();
        s.mark(VoxelKey::new(4, 4, 4), VoxelState::Intersected);
        assert!(classify_voids(&s, 1).is_empty());
        // With no neighborhood requirement every intersected voxel qualifies.
        assert_eq!(classify_voids(&s, 0).len(), 1);
    }

    #[test]
    fn hits_are_never_void() {
        let s = block(-3, 3, VoxelState::Hit);
        assert!(classify_voids(&s, 1).is_empty());
        assert!(classify_voids(&s, 0).is_empty());
    }

    #[test]
    fn planar_slice_like_figure() {
        // 2D analogue: a 5x5 slab one voxel thick surrounded by hits above and below.
        let mut s = ScanScratch::new();
        for x in 0..5 {
            for y in 0..5 {
                s.mark(VoxelKey::new(x, y, 0), VoxelState::Intersected);
                s.mark(VoxelKey::new(x, y, -1), VoxelState::Hit);
                s.mark(VoxelKey::new(x, y, 1), VoxelState::Hit);
            }
        }
        let got: BTreeSet<_> = classify_voids(&s, 1).into_iter().collect();
        let want: BTreeSet<_> = (1..4)
            .flat_map(|x| (1..4).map(move |y| VoxelKey::new(x, y, 0)))
            .collect();
        assert_eq!(got, want);
    }

    #[test]
    fn random_grids_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let n = 20i64;
        for trial in 0..8 {
            let fill = [0.6, 0.8, 0.9, 0.97][trial % 4];
            let mut grid = vec![VoxelState::Unknown; (n * n * n) as usize];
            let mut s = ScanScratch::new();
            for x in 0..n {
                for y in 0..n {
                    for z in 0..n {
                        let r: f64 = rng.random();
                        let st = if r > fill {
                            VoxelState::Unknown
                        } else if r > fill * 0.7 {
                            VoxelState::Hit
                        } else {
                            VoxelState::Intersected
                        };
                        grid[(x * n * n + y * n + z) as usize] = st;
                        s.mark(VoxelKey::new(x, y, z), st);
                    }
                }
            }
            for radius in [1u32, 2] {
                let got: BTreeSet<_> = classify_voids(&s, radius).into_iter().collect();
                assert_eq!(
                    got,
                    brute_force(&grid, n, radius as i64),
                    "trial {trial} radius {radius}"
                );
            }
        }
    }

    fn arb_scratch() -> impl Strategy<Value = Vec<(i64, i64, i64, bool)>> {
        proptest::collection::vec((0i64..6, 0i64..6, 0i64..6, any::<bool>()), 0..216)
    }

    fn build(entries: &[(i64, i64, i64, bool)]) -> ScanScratch {
        let mut s = ScanScratch::new();
        for (x, y, z, hit) in entries {
            let st = if *hit { VoxelState::Hit } else { VoxelState::Intersected };
            s.mark(VoxelKey::new(*x, *y, *z), st);
        }
        s
    }

    proptest! {
        #[test]
        fn anti_monotone_in_radius(entries in arb_scratch()) {
            let s = build(&entries);
            let r0 = classify_voids(&s, 0);
            let r1 = classify_voids(&s, 1);
            let r2 = classify_voids(&s, 2);
            prop_assert!(r1.is_subset(&r0));
            prop_assert!(r2.is_subset(&r1));
            prop_assert!(r0.iter().all(|k| s.state(k) == VoxelState::Intersected));
        }

        #[test]
        fn more_observations_grow_result(
            entries in arb_scratch(),
            extra in proptest::collection::vec((0i64..6, 0i64..6, 0i64..6), 0..60),
        ) {
            let s = build(&entries);
            let mut grown = s.clone();
            for (x, y, z) in extra {
                let k = VoxelKey::new(x, y, z);
                if s.state(&k) == VoxelState::Unknown {
                    grown.mark(k, VoxelState::Intersected);
                }
            }
            prop_assert!(classify_voids(&s, 1).is_subset(&classify_voids(&grown, 1)));
        }
    }
}
