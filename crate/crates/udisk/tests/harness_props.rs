use proptest::prelude::*;
use udisk::harness::*;

fn strip_timing(r: &Replay) -> Vec<OpResult> {
    r.results.iter().cloned().map(|mut x| {
        x.nanos = 0;
        x
    }).collect()
}

#[test]
fn clustered_points_stay_near_their_centers() {
    for seed in 0..20 {
        let cfg = WorkloadConfig {
            seed,
            n: 500,
            mix: "I:1".parse().unwrap(),
            dist: Distribution::Clustered,
            ..Default::default()
        };
        let centers = workload_centers(&cfg);
        let t = gen_workload(&cfg);
        let near = t
            .ops
            .iter()
            .filter(|o| match o {
                Op::Insert { x, y, .. } => centers.iter().any(|c| (c.0 - x).hypot(c.1 - y) <= 1.0),
                _ => false,
            })
            .count();
        assert!(near as f64 >= 0.9 * 500.0, "seed {seed}: {near} of 500 near a center");
    }
}

#[test]
fn engines_agree_on_every_distribution() {
    for (i, dist) in [Distribution::UniformSquare, Distribution::Clustered, Distribution::CollinearJittered]
        .into_iter()
        .enumerate()
    {
        for seed in 0..4u64 {
            let cfg = WorkloadConfig {
                seed: seed * 10 + i as u64,
                n: 800,
                mix: "I:0.35,D:0.15,Q:0.2,E:0.2,K:0.1".parse().unwrap(),
                dist,
                side: [10.0, 3.0][seed as usize % 2],
            };
            let t = gen_workload(&cfg);
            for kind in [EngineKind::Dynamic, EngineKind::StaticRebuild] {
                let m = differential(&t, kind).unwrap();
                assert!(m.is_empty(), "{dist:?} seed {}: {kind:?} {:?}", cfg.seed, &m[..m.len().min(3)]);
            }
        }
    }
}

#[test]
fn results_survive_json_lines() {
    let t = gen_workload(&WorkloadConfig { seed: 2, n: 300, ..Default::default() });
    let r = replay(&t, EngineKind::Dynamic).unwrap();
    let back = parse_results(&r.to_json_lines()).unwrap();
    assert_eq!(back, r.results);
    assert!(diff(&back, &r.results).is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn replay_is_deterministic(seed in any::<u64>()) {
        let t = gen_workload(&WorkloadConfig { seed, n: 200, ..Default::default() });
        prop_assert_eq!(&t, &gen_workload(&WorkloadConfig { seed, n: 200, ..Default::default() }));
        for kind in [EngineKind::Dynamic, EngineKind::StaticRebuild, EngineKind::Oracle] {
            let a = replay(&t, kind).unwrap();
            let b = replay(&t, kind).unwrap();
            prop_assert_eq!(strip_timing(&a), strip_timing(&b));
            prop_assert!(diff(&a.results, &a.results).is_empty());
        }
    }
}
