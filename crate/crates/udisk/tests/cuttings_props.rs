use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use udisk::cuttings::*;
use udisk::geometry::arc_from_center;
use udisk::hulls::CellTop;
use udisk::{Point, UnitArc};

fn random_arcs(rng: &mut ChaCha8Rng, n: usize, width: f64) -> Vec<UnitArc> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let c = Point::new(rng.gen_range(0.0..width), rng.gen_range(0.0..1.0), out.len() as u64);
        if let Some(a) = arc_from_center(c, 0.0).unwrap() {
            out.push(a);
        }
    }
    out
}

/// Level by brute force: arcs strictly below `u` along its vertical line.
fn level(gamma: &[UnitArc], u: &Point) -> usize {
    gamma.iter().filter(|g| g.xl < u.x && u.x < g.xr && g.y_unchecked(u.x) < u.y).count()
}

/// Height of the (k+1)-th lowest arc at `x`, capped at the separator.
fn k_level(gamma: &[UnitArc], x: f64, k: usize) -> f64 {
    let mut ys: Vec<f64> = gamma.iter().filter(|g| g.xl < x && x < g.xr).map(|g| g.y_unchecked(x)).collect();
    ys.sort_by(f64::total_cmp);
    ys.get(k).copied().unwrap_or(0.0).min(0.0)
}

/// Random points of level at most `k` in the slab, half of them just under the k-level.
fn low_samples(gamma: &[UnitArc], slab: (f64, f64), k: usize, rng: &mut ChaCha8Rng, n: usize) -> Vec<Point> {
    let mut out = Vec::new();
    while out.len() < n {
        let x = rng.gen_range(slab.0..=slab.1);
        let y = if rng.gen_bool(0.5) { rng.gen_range(-1.0..=0.0) } else { k_level(gamma, x, k) - 1e-9 };
        let u = Point::xy(x, y);
        if level(gamma, &u) <= k {
            out.push(u);
        }
    }
    out
}

fn check_trapezoids(gamma: &[UnitArc], t: &TrapezoidCutting, k: usize, big_k: usize, rng: &mut ChaCha8Rng) {
    for w in t.cells.windows(2) {
        assert!(w[0].xr <= w[1].xl, "cells overlap");
    }
    for c in &t.cells {
        assert!(c.conflicts.len() <= 3 * big_k, "{} conflicts over {}", c.conflicts.len(), 3 * big_k);
        if c.special {
            assert!(c.conflicts.is_empty(), "special cell with conflicts");
        }
    }
    for u in low_samples(gamma, t.slab, k, rng, 2000) {
        assert!(t.cells.iter().any(|c| c.contains(&u)), "{u:?} outside every cell");
    }
}

#[test]
fn hierarchy_levels_verify_independently() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let cfg = CuttingConfig::default();
    for trial in 0..6 {
        let n = rng.gen_range(64..=1024);
        let width = [1.0, 3.0, 8.0][trial % 3];
        let g = random_arcs(&mut rng, n, width);
        let k = [1, 8][trial % 2];
        let h = hierarchy(&g, k, &cfg).unwrap();
        for (i, l) in h.levels.iter().enumerate() {
            let ki = k * cfg.b.pow(i as u32);
            assert_eq!(l.k, ki);
            assert!(l.q.len() as f64 <= cfg.c_prime * n as f64 / ki as f64);
            assert!(l.q.windows(2).all(|w| w[0].p.x <= w[1].p.x));
            for v in &l.q {
                assert!(level(&g, &v.p) <= l.big_k);
                assert!(l.big_k as f64 <= cfg.c * ki as f64 * 8.0);
            }
            for s in &l.s {
                let crossing = g.iter().filter(|a| (s.a..=s.b).contains(&a.xl) || (s.a..=s.b).contains(&a.xr)).count();
                assert!(crossing <= l.big_k);
                assert!(l.q.iter().any(|v| v.p.x == s.a && v.p.y == 0.0));
                assert!(l.q.iter().any(|v| v.p.x == s.b && v.p.y == 0.0));
            }
            let vd = l.decomposition();
            for u in low_samples(&g, l.slab, ki, &mut rng, 10_000) {
                assert!(vd.contains(&u), "level {i}: {u:?} uncovered");
            }
            let t = to_trapezoids(&g, l);
            check_trapezoids(&g, &t, ki, l.big_k, &mut rng);
        }
    }
}

#[test]
fn thousand_arcs_k1_has_six_levels() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let g = random_arcs(&mut rng, 1024, 4.0);
    let cfg = CuttingConfig::default();
    let h = hierarchy(&g, 1, &cfg).unwrap();
    assert_eq!(h.levels.len(), 6);
    for (i, l) in h.levels.iter().enumerate() {
        assert!(l.q.len() as f64 <= cfg.c_prime * 1024.0 / 4f64.powi(i as i32));
        let r = verify(&g, l, l.k, l.big_k, &cfg, 10_000);
        assert!(r.ok(), "{:?}", r.violations);
        assert!(r.samples_checked > 1000);
    }
}

#[test]
fn stacked_arcs_keep_vertex_levels() {
    let g: Vec<UnitArc> =
        (0..200).map(|i| arc_from_center(Point::new(0.0, i as f64 / 200.0, i), 0.0).unwrap().unwrap()).collect();
    let cfg = CuttingConfig::default();
    let h = hierarchy(&g, 2, &cfg).unwrap();
    for l in &h.levels {
        for v in &l.q {
            assert!(level(&g, &v.p) <= l.big_k);
        }
        assert!(verify(&g, l, l.k, l.big_k, &cfg, 5000).ok());
    }
}

#[test]
fn one_refinement_of_the_base() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let g = random_arcs(&mut rng, 400, 2.0);
    let cfg = CuttingConfig::default();
    let base = base_cutting(&g);
    let k = 400 / cfg.b;
    let (out, _) = refine(&g, &base, k, &cfg).unwrap();
    let t = to_trapezoids(&g, &out);
    check_trapezoids(&g, &t, k, out.big_k, &mut rng);
    assert!(out.big_k as f64 <= 3.0 * cfg.c * k as f64);
}

#[test]
fn trapezoid_round_trip_verifies() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let g = random_arcs(&mut rng, 300, 3.0);
    let cfg = CuttingConfig::default();
    let h = hierarchy(&g, 4, &cfg).unwrap();
    let l = &h.levels[0];
    let t = to_trapezoids(&g, l);
    let back = trapezoids_to_vs(&g, &t, l.k);
    assert_eq!(back.big_k, l.k + t.max_conflicts());
    let mut loose = cfg.clone();
    loose.c_prime = f64::INFINITY;
    let r = verify(&g, &back, l.k, l.k + 3 * l.big_k, &loose, 5000);
    assert!(r.ok(), "{:?}", r.violations);
}

#[test]
fn wing_cells_are_special_and_empty() {
    let g: Vec<UnitArc> = [(0.0, 0.3), (0.4, 0.5)]
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| arc_from_center(Point::new(x, y, i as u64), 0.0).unwrap().unwrap())
        .collect();
    // one interior vertex well below the separator and far from the slab ends
    let set = ArcSet::new(&g);
    let slab = set.slab();
    let v = Point::xy(0.2, -0.9);
    let vs = VertexSegmentCutting {
        k: 0,
        big_k: 2,
        q: vec![
            CutVertex { p: Point::xy(slab.0, 0.0), conflicts: vec![] },
            CutVertex { p: v, conflicts: set.below_ids(&v) },
            CutVertex { p: Point::xy(slab.1, 0.0), conflicts: vec![] },
        ],
        s: vec![],
        slab,
    };
    let t = to_trapezoids(&g, &vs);
    let special: Vec<_> = t.cells.iter().filter(|c| c.special).collect();
    assert!(!special.is_empty());
    for c in special {
        assert_eq!(c.top, CellTop::Separator);
        let brute = g.iter().filter(|a| (1..200).any(|i| {
            let x = c.xl + (c.xr - c.xl) * i as f64 / 200.0;
            a.xl < x && x < a.xr
        }));
        assert_eq!(c.conflicts.len(), brute.count());
    }
}

#[test]
fn hierarchy_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let g = random_arcs(&mut rng, 500, 2.0);
    let cfg = CuttingConfig::default();
    let a = hierarchy(&g, 1, &cfg).unwrap();
    let b = hierarchy(&g, 1, &cfg).unwrap();
    assert_eq!(a.levels, b.levels);
    assert_eq!(epsilon_cutting(&g[..40], 0.25, 3), epsilon_cutting(&g[..40], 0.25, 3));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn epsilon_cuttings_are_certified(seed in any::<u64>(), n in 1usize..80, eps in 0.2f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_arcs(&mut rng, n, 2.5);
        let t = epsilon_cutting(&g, eps, seed);
        for c in &t.cells {
            prop_assert!(c.conflicts.len() as f64 <= eps * n as f64);
        }
        // the cells tile the slab below the separator
        for _ in 0..300 {
            let u = Point::xy(rng.gen_range(t.slab.0..t.slab.1), -rng.gen_range(0.0..1.5f64));
            prop_assert!(t.cells.iter().any(|c| c.contains(&u)));
        }
    }
}
