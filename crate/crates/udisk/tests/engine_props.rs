use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use udisk::coverage::Cell;
use udisk::engine::*;
use udisk::geometry::{arc_below_point, arc_from_center};
use udisk::{tolerance, Point};

fn brute(points: &[Point], q: &Point) -> Vec<u64> {
    let mut v: Vec<u64> = points.iter().filter(|p| p.dist(q) <= 1.0 + tolerance()).map(|p| p.id).collect();
    v.sort_unstable();
    v
}

fn near_boundary(points: &[Point], q: &Point) -> bool {
    points.iter().any(|p| (p.dist(q) - 1.0).abs() < 10.0 * tolerance())
}

fn random_points(rng: &mut ChaCha8Rng, n: usize, side: f64) -> Vec<Point> {
    (0..n as u64).map(|i| Point::new(rng.gen_range(0.0..side), rng.gen_range(0.0..side), i)).collect()
}

#[test]
fn static_engine_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for trial in 0..40 {
        let n = rng.gen_range(1..=512);
        let side = [10.0, 3.0, 1.0, 25.0][trial % 4];
        let pts = random_points(&mut rng, n, side);
        let s = build_static(&pts).unwrap();
        assert!(s.total_pieces() <= 4 * n);
        for _ in 0..300 {
            let q = Point::xy(rng.gen_range(-1.0..side + 1.0), rng.gen_range(-1.0..side + 1.0));
            if near_boundary(&pts, &q) {
                continue;
            }
            let want = brute(&pts, &q);
            assert_eq!(s.report(&q), want, "trial {trial}: {q:?}");
            match s.empty(&q) {
                Some(w) => assert!(want.contains(&w.id), "witness {w:?} out of range"),
                None => assert!(want.is_empty()),
            }
        }
    }
}

#[test]
fn static_query_cost_is_logarithmic_plus_output() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let pts = random_points(&mut rng, 4096, 20.0);
    let s = build_static(&pts).unwrap();
    let lg = (4096f64).log2();
    for _ in 0..2000 {
        let q = Point::xy(rng.gen_range(0.0..20.0), rng.gen_range(0.0..20.0));
        let (ids, cost) = s.report_cost(&q);
        assert!(cost.touched as f64 <= 64.0 * (lg + ids.len() as f64), "{cost:?} for {} ids", ids.len());
        assert!(cost.structures <= 48);
    }
}

#[test]
fn dynamic_engine_matches_brute_force() {
    for seed in 0..12u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let side = [10.0, 2.0, 5.0][(seed % 3) as usize];
        let mut d = new_dynamic();
        let mut live: BTreeMap<u64, Point> = BTreeMap::new();
        for op in 0..1000u64 {
            let r: f64 = rng.gen();
            if r < 0.4 || live.is_empty() {
                let p = Point::new(rng.gen_range(0.0..side), rng.gen_range(0.0..side), op);
                d.insert(p).unwrap();
                live.insert(op, p);
            } else if r < 0.6 {
                let id = *live.keys().nth(rng.gen_range(0..live.len())).unwrap();
                d.delete(id).unwrap();
                live.remove(&id);
            } else {
                let q = Point::xy(rng.gen_range(-1.0..side + 1.0), rng.gen_range(-1.0..side + 1.0));
                let pts: Vec<Point> = live.values().copied().collect();
                if near_boundary(&pts, &q) {
                    continue;
                }
                let want = brute(&pts, &q);
                assert_eq!(d.report(&q), want, "seed {seed} op {op}");
                match d.empty(&q) {
                    Some(w) => assert!(want.contains(&w.id)),
                    None => assert!(want.is_empty(), "seed {seed} op {op}: missed {want:?}"),
                }
            }
            assert_eq!(d.len(), live.len());
        }
        assert!(d.arc_count() <= 4 * live.len());
    }
}

#[test]
fn frame_round_trips_and_arc_membership() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..10_000 {
        let x0 = rng.gen_range(-50.0..50.0);
        let y0 = rng.gen_range(-50.0..50.0);
        let (w, h) = (rng.gen_range(0.1..0.5), rng.gen_range(0.1..0.5));
        let cell = Cell { x_range: (x0, x0 + w), y_range: (y0, y0 + h) };
        let p = Point::new(x0 + rng.gen_range(0.0..w), y0 + rng.gen_range(0.0..h), 1);
        let e = EDGES[rng.gen_range(0..4)];
        let f = FrameTransform::for_edge(&cell, e);
        let l = f.apply(&p);
        assert!(l.y >= -tolerance());
        let back = f.invert(&l);
        assert!((back.x - p.x).abs() <= tolerance() && (back.y - p.y).abs() <= tolerance());
        // a query on the far side of the edge line
        let q = Point::xy(p.x + rng.gen_range(-1.5..1.5), p.y + rng.gen_range(-1.5..1.5));
        let lq = f.apply(&q);
        if lq.y > 0.0 || (p.dist(&q) - 1.0).abs() < 10.0 * tolerance() {
            continue;
        }
        assert!((lq.dist(&l) - q.dist(&p)).abs() <= tolerance());
        let member = arc_from_center(l, 0.0).unwrap().is_some_and(|a| arc_below_point(&lq, &a));
        assert_eq!(member, p.dist(&q) <= 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn clustered_static_reports(seed in any::<u64>(), clusters in 1usize..5, per in 1usize..60) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pts = Vec::new();
        for _ in 0..clusters {
            let c = (rng.gen_range(0.0..30.0), rng.gen_range(0.0..30.0));
            for _ in 0..per {
                let id = pts.len() as u64;
                pts.push(Point::new(c.0 + rng.gen_range(-0.8..0.8), c.1 + rng.gen_range(-0.8..0.8), id));
            }
        }
        let s = build_static(&pts).unwrap();
        for p in pts.clone() {
            let q = Point::xy(p.x + rng.gen_range(-1.2..1.2), p.y + rng.gen_range(-1.2..1.2));
            if !near_boundary(&pts, &q) {
                prop_assert_eq!(s.report(&q), brute(&pts, &q));
            }
        }
    }
}
