//! Tree growth primitives and the single-goal baselines.
//!
//! [`extend`] and [`rewire`] are shared by every planner in the crate:
//! [`plan_rrt_star`], [`plan_rrt_star_connect`] and the multi-goal planner in
//! [`crate::many`].

mod connect;
mod path;
mod report;
mod star;
mod tree;

pub use connect::plan_rrt_star_connect;
pub use path::Path;
pub use report::{
    read_trace_csv, trace_is_monotone, write_trace_csv, Improvement, PlanReport, SolutionRecord, StopReason, Timing, TracePoint,
    TraceRecorder,
};
pub use star::plan_rrt_star;
pub(crate) use star::grow;
pub use tree::Tree;

use serde::{Deserialize, Serialize};

use crate::collision::Scene;
use crate::kinematics::{distance, SerialChain};
use crate::{Error, Result};

/// Budget and growth parameters shared by all planners.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    /// Maximum joint-space length ε of one EXTEND step (radians).
    pub step: f64,
    pub max_iterations: usize,
    pub max_runtime_ms: u64,
    pub nodes_max: usize,
    /// Probability of sampling the goal (RRT*) or the start (goal trees).
    pub goal_bias: f64,
    /// Shrinking-ball constant; `None` derives it from the joint box.
    pub rewire_radius_scale: Option<f64>,
    /// Collision-check spacing along edges (radians).
    pub edge_resolution: f64,
    pub seed: u64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            step: 0.15,
            max_iterations: 3000,
            max_runtime_ms: 3000,
            nodes_max: 3000,
            goal_bias: 0.05,
            rewire_radius_scale: None,
            edge_resolution: 0.05,
            seed: 0,
        }
    }
}

impl PlannerConfig {
    /// Defaults with the step length used for this chain's DoF.
    pub fn for_chain(chain: &SerialChain) -> Self {
        PlannerConfig {
            step: default_step(chain.dof()),
            ..Default::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.step) || !positive(self.edge_resolution) {
            return Err(Error::invalid("step and edge resolution must be positive"));
        }
        if self.max_iterations == 0 || self.max_runtime_ms == 0 || self.nodes_max == 0 {
            return Err(Error::invalid("budgets must be positive"));
        }
        if !(0.0..=1.0).contains(&self.goal_bias) {
            return Err(Error::invalid("goal bias must lie in [0, 1]"));
        }
        if let Some(s) = self.rewire_radius_scale {
            if !positive(s) {
                return Err(Error::invalid("rewire radius scale must be positive"));
            }
        }
        Ok(())
    }

    /// Growth parameters for trees of `chain`.
    pub fn growth(&self, chain: &SerialChain) -> Growth {
        Growth {
            step: self.step,
            resolution: self.edge_resolution,
            gamma: self.rewire_radius_scale.unwrap_or_else(|| optimal_gamma(chain)),
        }
    }
}

/// EXTEND step length: 0.1 for planar arms, 0.15 otherwise.
pub fn default_step(dof: usize) -> f64 {
    if dof <= 2 {
        0.1
    } else {
        0.15
    }
}

/// Lebesgue measure of the unit ball in `m` dimensions.
pub fn unit_ball_volume(m: usize) -> f64 {
    match m {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(m - 2) * 2.0 * std::f64::consts::PI / m as f64,
    }
}

/// Shrinking-ball constant `2 (1 + 1/m)^{1/m} (μ(Q) / ζ_m)^{1/m}` over the
/// joint-limit box, the lower bound for asymptotic optimality of RRT*.
pub fn optimal_gamma(chain: &SerialChain) -> f64 {
    let m = chain.dof() as f64;
    let volume: f64 = chain.limits().map(|l| l.width()).product();
    2.0 * (1.0 + 1.0 / m).powf(1.0 / m) * (volume / unit_ball_volume(chain.dof())).powf(1.0 / m)
}

/// `min(γ (ln n / n)^{1/m}, 4ε)`; zero for `n ≤ 1`.
pub fn near_radius(gamma: f64, n: usize, dim: usize, step: f64) -> f64 {
    if n <= 1 {
        return 0.0;
    }
    let n = n as f64;
    (gamma * (n.ln() / n).powf(1.0 / dim as f64)).min(4.0 * step)
}

/// Per-tree constants for EXTEND and REWIRE.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Growth {
    pub step: f64,
    pub resolution: f64,
    pub gamma: f64,
}

impl Growth {
    pub fn radius(&self, tree: &Tree) -> f64 {
        near_radius(self.gamma, tree.len(), tree.dim(), self.step)
    }
}

/// Rewire neighbourhood of `q` in `tree`.
pub fn near(tree: &Tree, q: &[f64], growth: &Growth) -> Vec<usize> {
    tree.within(q, growth.radius(tree))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Extend {
    /// A node was added short of the target.
    Advanced(usize),
    /// The node at the target (new, or already present at distance zero).
    Reached(usize),
    /// The step from the nearest node collides; the tree is unchanged.
    Trapped,
}

impl Extend {
    pub fn node(self) -> Option<usize> {
        match self {
            Extend::Advanced(i) | Extend::Reached(i) => Some(i),
            Extend::Trapped => None,
        }
    }
}

/// Steps from the nearest node toward `target` by at most ε and inserts the new
/// configuration under its cheapest collision-free neighbour.
pub fn extend(tree: &mut Tree, scene: &Scene, growth: &Growth, target: &[f64]) -> Extend {
    let nearest = tree.nearest(target);
    let q_near = tree.config(nearest);
    let d = distance(q_near, target);
    if d == 0.0 {
        return Extend::Reached(nearest);
    }
    let reached = d <= growth.step;
    let q_new: Vec<f64> = if reached {
        target.to_vec()
    } else {
        let s = growth.step / d;
        q_near.iter().zip(target).map(|(a, b)| a + s * (b - a)).collect()
    };
    if !scene.edge_free(q_near, &q_new, growth.resolution) {
        return Extend::Trapped;
    }
    let via_nearest = tree.cost(nearest) + distance(q_near, &q_new);
    let mut candidates: Vec<(f64, usize)> = near(tree, &q_new, growth)
        .into_iter()
        .filter(|&i| i != nearest)
        .map(|i| (tree.cost(i) + distance(tree.config(i), &q_new), i))
        .filter(|(c, _)| *c < via_nearest)
        .collect();
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let parent = candidates
        .into_iter()
        .find(|&(_, i)| scene.edge_free(tree.config(i), &q_new, growth.resolution))
        .map_or(nearest, |(_, i)| i);
    let id = tree.add_node(&q_new, parent);
    if reached {
        Extend::Reached(id)
    } else {
        Extend::Advanced(id)
    }
}

/// Reparents neighbours of `new` through it when that is strictly cheaper and
/// the connecting edge is free. Returns the number of reparented nodes.
pub fn rewire(tree: &mut Tree, scene: &Scene, growth: &Growth, new: usize) -> usize {
    let q_new = tree.config(new).to_vec();
    let base = tree.cost(new);
    let parent = tree.parent(new);
    let mut changed = 0;
    for nb in near(tree, &q_new, growth) {
        if nb == new || Some(nb) == parent || nb == 0 {
            continue;
        }
        let via = base + distance(&q_new, tree.config(nb));
        if via < tree.cost(nb) - 1e-12 && scene.edge_free(&q_new, tree.config(nb), growth.resolution) {
            tree.reparent(nb, new);
            changed += 1;
        }
    }
    changed
}

/// Root-to-`s` in `start`, then `g`-to-root in `goal`.
pub(crate) fn bridge_path(start: &Tree, s: usize, goal: &Tree, g: usize) -> Path {
    let mut waypoints = start.path_to_root(s);
    let mut tail = goal.path_to_root(g);
    tail.reverse();
    waypoints.extend(tail);
    Path::from_waypoints(waypoints)
}

/// Uniform joint-box sample, or `bias_target` with probability `bias`.
pub(crate) fn biased_sample(scene: &Scene, rng: &mut impl rand::Rng, bias: f64, bias_target: &[f64]) -> Vec<f64> {
    if bias > 0.0 && rng.random::<f64>() < bias {
        bias_target.to_vec()
    } else {
        scene.sample_uniform(rng)
    }
}
