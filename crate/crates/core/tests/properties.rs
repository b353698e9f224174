//! Randomised invariants across modules.

use manyrrt::bench::{nearest_rank, summarize, Percentile, TrialResult};
use manyrrt::collision::{EnvironmentKind, EnvironmentSpec, Scene};
use manyrrt::ik::{downsample, solve_ik_sqp, IkSettings};
use manyrrt::kinematics::{distance, pose_error};
use manyrrt::rrt::{extend, rewire, trace_is_monotone, Path, PlannerConfig, SolutionRecord, TracePoint, TraceRecorder, Tree};
use manyrrt::{JointConfig, SerialChain};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn in_limits(chain: &SerialChain, unit: &[f64]) -> Vec<f64> {
    chain.limits().zip(unit).map(|(l, u)| l.min + u * l.width()).collect()
}

fn cluttered_planar(seed: u64) -> Scene {
    let chain = SerialChain::planar_2dof();
    let world = EnvironmentSpec::new(EnvironmentKind::Random, chain.reach(), seed)
        .planar(true)
        .with_obstacles(6)
        .build()
        .unwrap();
    Scene::new(chain, world)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn jacobian_matches_central_differences(unit in prop::collection::vec(0.0f64..1.0, 7)) {
        let chain = SerialChain::generic_7dof();
        let q = in_limits(&chain, &unit);
        let j = chain.jacobian(&q).unwrap();
        let h = 1e-6;
        for c in 0..chain.dof() {
            let (mut lo, mut hi) = (q.clone(), q.clone());
            lo[c] -= h;
            hi[c] += h;
            let d = pose_error(&chain.forward_kinematics(&lo).unwrap(), &chain.forward_kinematics(&hi).unwrap()) / (2.0 * h);
            prop_assert!((d - j.column(c)).amax() < 1e-5);
        }
    }

    #[test]
    fn converged_ik_meets_tolerance(unit in prop::collection::vec(0.0f64..1.0, 6), nudge in prop::collection::vec(-0.3f64..0.3, 6)) {
        let chain = SerialChain::generic_6dof();
        let settings = IkSettings::for_chain(&chain);
        let q = in_limits(&chain, &unit);
        let target = chain.forward_kinematics(&q).unwrap();
        let seed: Vec<f64> = q.iter().zip(&nudge).map(|(a, b)| a + b).collect();
        if let Ok(sol) = solve_ik_sqp(&chain, &target, &seed.into(), &settings) {
            prop_assert!(sol.residual <= settings.residual_tol);
            prop_assert!(chain.within_limits(&sol.q));
            let check = settings.pose_residual(&chain, &sol.q, &target).unwrap();
            prop_assert!((check - sol.residual).abs() < 1e-12);
        }
    }

    #[test]
    fn downsample_keeps_a_sparse_cover(points in prop::collection::vec(prop::collection::vec(-2i32..2, 3), 0..80), eps in 0.5f64..2.5) {
        let input: Vec<JointConfig> = points.iter().map(|p| p.iter().map(|&v| v as f64 * 0.5).collect::<Vec<_>>().into()).collect();
        let kept = downsample(&input, eps);
        for (i, a) in kept.iter().enumerate() {
            prop_assert!(input.contains(a));
            for b in &kept[i + 1..] {
                prop_assert!(distance(a, b) > eps);
            }
        }
        for q in &input {
            prop_assert!(kept.iter().any(|k| distance(k, q) <= eps));
        }
        prop_assert_eq!(downsample(&kept, eps), kept);
    }

    #[test]
    fn edge_checks_are_symmetric(world in 0u64..20, a in prop::collection::vec(0.0f64..1.0, 2), b in prop::collection::vec(0.0f64..1.0, 2)) {
        let scene = cluttered_planar(world);
        let (a, b) = (in_limits(&scene.chain, &a), in_limits(&scene.chain, &b));
        let forward = scene.edge_free(&a, &b, 0.05);
        prop_assert_eq!(forward, scene.edge_free(&b, &a, 0.05));
        if forward {
            prop_assert!(scene.is_free(&a) && scene.is_free(&b));
        }
    }

    #[test]
    fn rewiring_never_raises_tree_cost(world in 0u64..20, seed in any::<u64>()) {
        let scene = cluttered_planar(world);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let Some(root) = scene.sample_free(&mut rng, 10_000) else { return Ok(()) };
        let growth = PlannerConfig::for_chain(&scene.chain).growth(&scene.chain);
        let mut tree = Tree::new(&root);
        for _ in 0..300 {
            let target = scene.sample_uniform(&mut rng);
            let before = tree.len();
            extend(&mut tree, &scene, &growth, &target);
            if tree.len() > before {
                let total = tree.total_cost();
                let new = tree.len() - 1;
                rewire(&mut tree, &scene, &growth, new);
                prop_assert!(tree.total_cost() <= total + 1e-9);
            }
        }
        prop_assert!(tree.check_invariants(1e-9).is_ok());
        for i in 0..tree.len() {
            let path = Path::from_waypoints(tree.path_to_root(i));
            prop_assert!(path.verify(&scene, growth.resolution));
            prop_assert!((path.cost - tree.cost(i)).abs() < 1e-9);
        }
    }

    #[test]
    fn incumbent_only_improves(offers in prop::collection::vec((0.0f64..10.0, 0usize..5), 1..40)) {
        let mut record = SolutionRecord::default();
        let mut trace = TraceRecorder::new(std::time::Instant::now());
        for (i, (len, goal)) in offers.iter().enumerate() {
            let path = Path::from_waypoints(vec![vec![0.0].into(), vec![*len].into()]);
            let before = record.best_cost();
            let accepted = record.offer(path, *goal, i, i as f64);
            prop_assert_eq!(accepted, before.is_none_or(|b| *len < b));
            trace.record(i, record.best_cost());
        }
        let points: Vec<TracePoint> = trace.into_points();
        prop_assert!(trace_is_monotone(&points));
    }

    #[test]
    fn percentiles_are_ordered(iters in prop::collection::vec(prop::option::of(1usize..3000), 1..40)) {
        let results: Vec<TrialResult> = iters
            .iter()
            .enumerate()
            .map(|(i, it)| row(i, *it))
            .collect();
        let summary = summarize(&results);
        prop_assert_eq!(summary.len(), 1);
        let s = &summary[0];
        prop_assert_eq!(s.successes, iters.iter().flatten().count());
        let rank = |p: &Percentile| match *p {
            Percentile::Value(v) => v,
            Percentile::Over(m) => m + 1,
        };
        prop_assert!(rank(&s.first_iteration_p10) <= rank(&s.first_iteration_p50));
        prop_assert!(rank(&s.first_iteration_p50) <= rank(&s.first_iteration_p90));
        let mut sorted: Vec<usize> = iters.iter().map(|i| i.unwrap_or(3001)).collect();
        sorted.sort_unstable();
        prop_assert_eq!(rank(&s.first_iteration_p50), nearest_rank(&sorted, 50.0));
    }
}

fn row(trial: usize, first_iteration: Option<usize>) -> TrialResult {
    let cost = first_iteration.map(|i| i as f64 / 100.0);
    TrialResult {
        trial,
        chain: "planar2".into(),
        env: "random".into(),
        env_seed: 0,
        planner: "many".into(),
        seed: trial as u64,
        success: first_iteration.is_some(),
        max_iterations: 3000,
        first_iteration,
        first_ms: cost,
        first_cost: cost,
        final_cost: cost,
        final_iteration: first_iteration,
        final_ms: cost,
        total_ms: 1.0,
        setup_ms: 0.0,
        iterations: 3000,
        nodes: 0,
        goal_configs: 1,
        stop: "iterations".into(),
        error: None,
        trace: Vec::new(),
    }
}
