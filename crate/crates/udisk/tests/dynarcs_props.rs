use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use udisk::dynarcs::*;
use udisk::geometry::arc_from_center;
use udisk::{tolerance, Point, UnitArc};

fn random_arc(rng: &mut ChaCha8Rng, id: u64, width: f64) -> UnitArc {
    let c = Point::new(rng.gen_range(0.0..width), rng.gen_range(0.0..0.999), id);
    arc_from_center(c, 0.0).unwrap().unwrap()
}

/// Brute-force k lowest by (height, id) among arcs crossing x.
fn oracle_k_lowest(live: &BTreeMap<u64, UnitArc>, x: f64, k: usize) -> Vec<u64> {
    let mut v: Vec<(f64, u64)> = live
        .values()
        .filter(|g| x >= g.xl - tolerance() && x <= g.xr + tolerance())
        .map(|g| (g.y_unchecked(x), g.source_id))
        .collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    v.into_iter().take(k).map(|p| p.1).collect()
}

/// Centers within unit distance of q, which for q under the separator are
/// exactly the arcs met by its downward ray.
fn oracle_below(live: &BTreeMap<u64, UnitArc>, q: &Point) -> Vec<u64> {
    live.values().filter(|g| g.center.dist(q) <= 1.0 + tolerance()).map(|g| g.source_id).collect()
}

/// Whether a vertical query line passes within 10τ of an arc end.
fn x_near_end(live: &BTreeMap<u64, UnitArc>, x: f64) -> bool {
    let m = 10.0 * tolerance();
    live.values().any(|g| (x - g.xl).abs() < m || (x - g.xr).abs() < m)
}

fn q_near_circle(live: &BTreeMap<u64, UnitArc>, q: &Point) -> bool {
    live.values().any(|g| (g.center.dist(q) - 1.0).abs() < 10.0 * tolerance())
}

fn run_trace(seed: u64, ops: usize, max_live: usize) -> (usize, DynStats) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = [1.0, 3.0, 8.0][(seed % 3) as usize];
    let mut s = DynamicArcSet::new();
    let mut live: BTreeMap<u64, UnitArc> = BTreeMap::new();
    let mut next_id = 0u64;
    let mut checked = 0;
    for _ in 0..ops {
        let r: f64 = rng.gen();
        if (r < 0.45 && live.len() < max_live) || live.is_empty() {
            let g = random_arc(&mut rng, next_id, width);
            next_id += 1;
            s.insert(g).unwrap();
            live.insert(g.source_id, g);
        } else if r < 0.7 {
            let id = *live.keys().nth(rng.gen_range(0..live.len())).unwrap();
            s.delete(id).unwrap();
            live.remove(&id);
            assert_eq!(s.delete(id), Err(DynError::UnknownArc(id)));
        } else {
            let x = rng.gen_range(-1.5..width + 1.5);
            if x_near_end(&live, x) {
                continue;
            }
            let k = [1, 2, 5, 17, 64][rng.gen_range(0..5)];
            let got: Vec<u64> = s.k_lowest(x, k, true).iter().map(|g| g.source_id).collect();
            assert_eq!(got, oracle_k_lowest(&live, x, k), "seed {seed}: k_lowest({x}, {k})");
            let lowest = s.lowest_arc(x).map(|g| g.source_id);
            assert_eq!(lowest, oracle_k_lowest(&live, x, 1).first().copied());
            let q = Point::xy(x, rng.gen_range(-1.0..0.0));
            if !q_near_circle(&live, &q) {
                assert_eq!(s.arcs_below(&q), oracle_below(&live, &q), "seed {seed}: arcs_below({q:?})");
            }
            checked += 1;
        }
        assert_eq!(s.len(), live.len());
    }
    (checked, s.stats())
}

#[test]
fn random_traces_match_brute_force() {
    let mut checked = 0;
    for seed in 0..200 {
        checked += run_trace(seed, 2000, 512).0;
    }
    assert!(checked > 50_000);
}

#[test]
fn bucket_sizes_follow_the_logarithmic_method() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut s = DynamicArcSet::new();
    for i in 0..100u64 {
        s.insert(random_arc(&mut rng, i, 4.0)).unwrap();
        for (j, &c) in s.occupancy().iter().enumerate() {
            assert!(c <= 1 << j);
        }
        assert!(s.occupancy().len() <= 8);
    }
    for i in (0..100u64).step_by(3) {
        s.delete(i).unwrap();
    }
    assert_eq!(s.occupancy().iter().sum::<usize>(), s.len());
}

#[test]
fn thousand_arcs_build_with_n_log_n_conflicts() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let g: Vec<UnitArc> = (0..1024).map(|i| random_arc(&mut rng, i, 16.0)).collect();
    let d = build_delonly(&g).unwrap();
    let entries = d.conflict_entries() as f64;
    let bound = 64.0 * 1024.0 * 10.0;
    assert!(entries <= bound, "{entries} conflict entries");
    assert_eq!(d.len(), 1024);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn unsorted_mode_returns_the_same_set(seed in any::<u64>(), n in 1usize..200, k in 1usize..40, x in -0.5f64..3.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = DynamicArcSet::new();
        for i in 0..n as u64 {
            s.insert(random_arc(&mut rng, i, 3.0)).unwrap();
        }
        let sorted = s.k_lowest(x, k, true);
        prop_assert!(sorted.windows(2).all(|w| w[0].y_unchecked(x) <= w[1].y_unchecked(x)));
        let mut a: Vec<u64> = sorted.iter().map(|g| g.source_id).collect();
        let mut b: Vec<u64> = s.k_lowest(x, k, false).iter().map(|g| g.source_id).collect();
        a.sort_unstable();
        b.sort_unstable();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn short_traces_match_brute_force(seed in any::<u64>()) {
        run_trace(seed, 300, 64);
    }
}
