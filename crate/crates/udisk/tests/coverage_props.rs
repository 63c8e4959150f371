use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use udisk::coverage::Coverage;
use udisk::Point;

fn brute_in_disk(pts: &[Point], q: &Point) -> Vec<u64> {
    let mut v: Vec<u64> = pts.iter().filter(|p| p.dist(q) <= 1.0 + 1e-9).map(|p| p.id).collect();
    v.sort();
    v
}

/// Checks the covering conditions for sampled queries near the live points.
fn check_queries(cov: &Coverage, live: &[Point], rng: &mut ChaCha8Rng, samples: usize) {
    for _ in 0..samples {
        let q = if live.is_empty() || rng.gen_bool(0.3) {
            Point::xy(rng.gen_range(-5.0..25.0), rng.gen_range(-5.0..25.0))
        } else {
            let p = live[rng.gen_range(0..live.len())];
            Point::xy(p.x + rng.gen_range(-1.2..1.2), p.y + rng.gen_range(-1.2..1.2))
        };
        let truth = brute_in_disk(live, &q);
        match cov.locate(&q) {
            None => assert!(truth.is_empty(), "uncovered query {q:?} has neighbors {truth:?}"),
            Some((_, rec)) => {
                assert!(rec.cell.contains(&q));
                let mut got: Vec<u64> = rec
                    .neighbors
                    .iter()
                    .flat_map(|k| cov.record(k).unwrap().points.values())
                    .filter(|p| p.dist(&q) <= 1.0 + 1e-9)
                    .map(|p| p.id)
                    .collect();
                got.sort();
                assert_eq!(got, truth, "query {q:?}");
            }
        }
    }
}

#[test]
fn static_build_conditions() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..30 {
        let n = rng.gen_range(1..200);
        let side = if trial % 2 == 0 { 10.0 } else { 40.0 };
        let pts: Vec<Point> = (0..n)
            .map(|i| Point::new(rng.gen_range(0.0..side), rng.gen_range(0.0..side), i))
            .collect();
        let cov = Coverage::build(&pts);
        assert!(cov.check_invariants().is_empty(), "{:?}", cov.check_invariants());
        check_queries(&cov, &pts, &mut rng, 500);
    }
}

#[test]
fn cells_pairwise_separated() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let pts: Vec<Point> = (0..300)
        .map(|i| Point::new(rng.gen_range(0.0..20.0), rng.gen_range(0.0..20.0), i))
        .collect();
    let mut cov = Coverage::build(&pts[..100]);
    for p in &pts[100..] {
        cov.insert(*p);
    }
    let cells: Vec<_> = cov.cells().map(|(_, r)| r.cell.clone()).collect();
    for _ in 0..10_000 {
        let a = &cells[rng.gen_range(0..cells.len())];
        let b = &cells[rng.gen_range(0..cells.len())];
        if a.key() == b.key() {
            continue;
        }
        let sep = a.x_range.1 <= b.x_range.0
            || b.x_range.1 <= a.x_range.0
            || a.y_range.1 <= b.y_range.0
            || b.y_range.1 <= a.y_range.0;
        assert!(sep, "{a:?} and {b:?} overlap");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dynamic_sequences_keep_invariants(seed in any::<u64>(), spread in 3.0f64..60.0, ops in 20usize..250) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut live: Vec<Point> = Vec::new();
        let mut cov = Coverage::build(&[]);
        let mut next_id = 0u64;
        for _ in 0..ops {
            if live.is_empty() || rng.gen_bool(0.7) {
                let p = Point::new(rng.gen_range(0.0..spread), rng.gen_range(0.0..spread), next_id);
                next_id += 1;
                cov.insert(p);
                live.push(p);
            } else {
                let i = rng.gen_range(0..live.len());
                let p = live.swap_remove(i);
                cov.delete(&p).unwrap();
            }
            let bad = cov.check_invariants();
            prop_assert!(bad.is_empty(), "{:?}", bad);
        }
        prop_assert_eq!(cov.len(), live.len());
        check_queries(&cov, &live, &mut rng, 300);
    }
}
