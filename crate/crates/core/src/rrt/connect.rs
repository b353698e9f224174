use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::star::{check_endpoints, grow};
use super::{bridge_path, Extend, PlanReport, PlannerConfig, SolutionRecord, StopReason, Timing, TraceRecorder, Tree};
use crate::collision::Scene;
use crate::kinematics::distance;
use crate::many::{iteration_count, node_budget};
use crate::Result;

/// Bidirectional RRT*: a start-rooted and a goal-rooted tree take turns
/// growing toward uniform samples; after each successful step the other tree
/// greedily extends toward the new node. A greedy run that reaches the node
/// exactly records a bridge. All bridges are re-priced every iteration because
/// rewiring keeps lowering the costs on both sides.
///
/// Iterations follow the multi-tree definition with a single goal tree:
/// `i = 2 · (nodes_start + nodes_goal)`.
pub fn plan_rrt_star_connect(scene: &Scene, q_start: &[f64], goal: &[f64], config: &PlannerConfig) -> Result<PlanReport> {
    let mut timing = Timing::begin();
    check_endpoints(scene, q_start, goal, config)?;
    let growth = config.growth(&scene.chain);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut trees = [Tree::new(q_start), Tree::new(goal)];
    // (start-tree node, goal-tree node)
    let mut bridges: Vec<(usize, usize)> = Vec::new();
    if distance(q_start, goal) == 0.0 {
        bridges.push((0, 0));
    }
    let budget = node_budget(config.nodes_max, 0);
    let mut record = SolutionRecord::default();
    timing.setup_finished = Instant::now();
    timing.search_started = timing.setup_finished;
    let mut trace = TraceRecorder::new(timing.search_started);

    let sizes = |t: &[Tree; 2]| [t[0].len(), t[1].len()];
    let mut turn = 0usize;
    let mut attempts = 0usize;
    let stop = loop {
        let iteration = iteration_count(&sizes(&trees), 0);
        let best = bridges
            .iter()
            .map(|&(s, g)| {
                let c = trees[0].cost(s) + distance(trees[0].config(s), trees[1].config(g)) + trees[1].cost(g);
                (c, s, g)
            })
            .min_by(|a, b| a.0.total_cmp(&b.0));
        if let Some((c, s, g)) = best {
            if record.improves(c) {
                let ms = timing.search_started.elapsed().as_secs_f64() * 1e3;
                record.offer(bridge_path(&trees[0], s, &trees[1], g), 0, iteration, ms);
            }
        }
        trace.record(iteration, record.best_cost());
        if iteration >= config.max_iterations {
            break StopReason::Iterations;
        }
        if trees[0].len() + trees[1].len() >= budget {
            break StopReason::Nodes;
        }
        if timing.deadline_passed(config.max_runtime_ms) {
            break StopReason::Timeout;
        }
        attempts += 1;
        if attempts > 20 * config.max_iterations {
            break StopReason::Stalled;
        }

        let (a, b) = (turn % 2, 1 - turn % 2);
        turn += 1;
        // the first attempt heads straight for the goal root
        let sample = if turn == 1 { goal.to_vec() } else { scene.sample_uniform(&mut rng) };
        let (r, _) = grow(&mut trees[a], scene, &growth, &sample);
        let Some(v) = r.node() else { continue };
        let target = trees[a].config(v).to_vec();
        loop {
            if trees[0].len() + trees[1].len() >= budget {
                break;
            }
            match grow(&mut trees[b], scene, &growth, &target).0 {
                Extend::Advanced(_) => continue,
                Extend::Reached(u) => {
                    bridges.push(if a == 0 { (v, u) } else { (u, v) });
                    break;
                }
                Extend::Trapped => break,
            }
        }
    };
    timing.search_finished = Instant::now();
    let iterations = iteration_count(&sizes(&trees), 0);
    Ok(PlanReport {
        record,
        trace: trace.into_points(),
        iterations,
        tree_sizes: vec![trees[1].len(), trees[0].len()],
        goal_configs: vec![goal.into()],
        stop,
        timing,
    })
}
