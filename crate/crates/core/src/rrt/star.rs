use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    biased_sample, extend, rewire, Extend, Path, PlanReport, PlannerConfig, SolutionRecord, StopReason, Timing,
    TraceRecorder, Tree,
};
use crate::collision::Scene;
use crate::kinematics::distance;
use crate::{Error, Result};

/// Inserts the node returned by `extend` and rewires around it; `None` when
/// nothing new was added.
pub(crate) fn grow(tree: &mut Tree, scene: &Scene, growth: &super::Growth, target: &[f64]) -> (Extend, Option<usize>) {
    let before = tree.len();
    let r = extend(tree, scene, growth, target);
    let added = (tree.len() > before).then(|| tree.len() - 1);
    if let Some(i) = added {
        rewire(tree, scene, growth, i);
    }
    (r, added)
}

pub(crate) fn check_endpoints(scene: &Scene, q_start: &[f64], goal: &[f64], config: &PlannerConfig) -> Result<()> {
    config.validate()?;
    scene.chain.check_dims(q_start)?;
    scene.chain.check_dims(goal)?;
    if !scene.is_free(q_start) {
        return Err(Error::invalid("start configuration is not collision-free"));
    }
    Ok(())
}

/// Single-tree RRT* from `q_start` toward one goal configuration.
///
/// An iteration is one sample + EXTEND + REWIRE. The goal becomes a tree node
/// once a node lands within ε of it with a free connecting edge; from then on
/// rewiring keeps lowering its cost.
pub fn plan_rrt_star(scene: &Scene, q_start: &[f64], goal: &[f64], config: &PlannerConfig) -> Result<PlanReport> {
    let mut timing = Timing::begin();
    check_endpoints(scene, q_start, goal, config)?;
    let growth = config.growth(&scene.chain);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut tree = Tree::new(q_start);
    let mut record = SolutionRecord::default();
    let mut goal_node = (distance(q_start, goal) == 0.0).then_some(0);
    timing.setup_finished = Instant::now();
    timing.search_started = timing.setup_finished;
    let mut trace = TraceRecorder::new(timing.search_started);

    let mut iteration = 0;
    let stop = loop {
        if let Some(g) = goal_node {
            if record.improves(tree.cost(g)) {
                let ms = timing.search_started.elapsed().as_secs_f64() * 1e3;
                record.offer(Path::from_waypoints(tree.path_to_root(g)), 0, iteration, ms);
            }
        }
        trace.record(iteration, record.best_cost());
        if iteration >= config.max_iterations {
            break StopReason::Iterations;
        }
        if tree.len() >= config.nodes_max {
            break StopReason::Nodes;
        }
        if timing.deadline_passed(config.max_runtime_ms) {
            break StopReason::Timeout;
        }
        iteration += 1;
        let sample = biased_sample(scene, &mut rng, config.goal_bias, goal);
        let (_, added) = grow(&mut tree, scene, &growth, &sample);
        let (Some(new), None) = (added, goal_node) else {
            continue;
        };
        if tree.config(new) == goal {
            goal_node = Some(new);
        } else if distance(tree.config(new), goal) <= growth.step {
            if let (Extend::Reached(g), _) = grow(&mut tree, scene, &growth, goal) {
                goal_node = Some(g);
            }
        }
    };
    timing.search_finished = Instant::now();
    Ok(PlanReport {
        record,
        trace: trace.into_points(),
        iterations: iteration,
        tree_sizes: vec![tree.len()],
        goal_configs: vec![goal.into()],
        stop,
        timing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collision::{Aabb, World};
    use crate::kinematics::SerialChain;

    #[test]
    fn start_equals_goal() {
        let scene = Scene::new(SerialChain::planar_2dof(), World::empty(Aabb::cube(3.0)));
        let q = [0.3, -0.2];
        let r = plan_rrt_star(&scene, &q, &q, &PlannerConfig::for_chain(&scene.chain)).unwrap();
        assert_eq!(r.record.first.unwrap().iteration, 0);
        assert_eq!(r.path().unwrap().cost, 0.0);
    }

    #[test]
    fn rejects_colliding_start() {
        let world = World::new(vec![crate::collision::Sphere::new([2.0, 0.0, 0.0], 0.2)], Aabb::cube(3.0)).unwrap();
        let scene = Scene::new(SerialChain::planar_2dof(), world);
        assert!(plan_rrt_star(&scene, &[0.0, 0.0], &[1.0, 1.0], &PlannerConfig::default()).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let scene = Scene::new(SerialChain::planar_2dof(), World::empty(Aabb::cube(3.0)));
        let cfg = PlannerConfig {
            max_iterations: 500,
            ..PlannerConfig::for_chain(&scene.chain).with_seed(3)
        };
        let a = plan_rrt_star(&scene, &[-2.0, 0.5], &[2.0, -0.5], &cfg).unwrap();
        let b = plan_rrt_star(&scene, &[-2.0, 0.5], &[2.0, -0.5], &cfg).unwrap();
        assert_eq!(a.record.best, b.record.best);
        assert_eq!(a.tree_sizes, b.tree_sizes);
        let costs = |r: &PlanReport| r.trace.iter().map(|p| p.best_cost).collect::<Vec<_>>();
        assert_eq!(costs(&a), costs(&b));
    }
}
