//! Many-RRT*: one RRT* tree per distinct IK solution of the goal pose, plus a
//! start tree that samples toward the goal trees' frontier and keeps the
//! cheapest assembled path across all of them.

mod planner;

pub use planner::{plan_many, plan_many_with_goals};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::collision::Scene;
use crate::ik::{IkSettings, DEFAULT_DEDUP_EPS};
use crate::kdtree::KdTree;
use crate::kinematics::{distance, JointConfig, SerialChain};
use crate::rrt::{PlannerConfig, Tree};
use crate::{Error, Result};

/// How the N+2 trees are scheduled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WorkerMode {
    /// Round-robin on the calling thread; deterministic for a fixed seed.
    #[default]
    Single,
    /// One thread per tree.
    Parallel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ManyConfig {
    pub base: PlannerConfig,
    /// Number of IK seeds queried from the database.
    pub k: usize,
    /// Exploit threshold γ₀ of the start-tree sampler.
    pub gamma0: f64,
    /// Probability that a goal tree samples the start configuration.
    pub goal_tree_bias: f64,
    /// Cross-tree proximity for CONN_TREE; `None` uses the EXTEND step.
    pub connect_tolerance: Option<f64>,
    pub dedup_eps: f64,
    /// IK weights and tolerances; `None` picks [`IkSettings::for_chain`].
    pub ik: Option<IkSettings>,
    /// After an exploit sample, keep extending the start tree toward it until
    /// reached or trapped.
    pub greedy_connect: bool,
    pub workers: WorkerMode,
}

impl Default for ManyConfig {
    fn default() -> Self {
        ManyConfig {
            base: PlannerConfig::default(),
            k: 10,
            gamma0: 0.2,
            goal_tree_bias: 0.02,
            connect_tolerance: None,
            dedup_eps: DEFAULT_DEDUP_EPS,
            ik: None,
            greedy_connect: true,
            workers: WorkerMode::Single,
        }
    }
}

impl ManyConfig {
    pub fn for_chain(chain: &SerialChain) -> Self {
        ManyConfig {
            base: PlannerConfig::for_chain(chain),
            ..Default::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.base.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.k == 0 {
            return Err(Error::invalid("K must be at least 1"));
        }
        if !(self.gamma0 > 0.0 && self.gamma0 < 1.0) {
            return Err(Error::invalid("gamma0 must lie in (0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.goal_tree_bias) {
            return Err(Error::invalid("goal tree bias must lie in [0, 1]"));
        }
        if let Some(t) = self.connect_tolerance {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::invalid("connect tolerance must be non-negative"));
            }
        }
        if !(self.dedup_eps > 0.0) {
            return Err(Error::invalid("dedup epsilon must be positive"));
        }
        Ok(())
    }

    pub fn tolerance(&self) -> f64 {
        self.connect_tolerance.unwrap_or(self.base.step)
    }

    pub fn ik_settings(&self, chain: &SerialChain) -> IkSettings {
        self.ik.clone().unwrap_or_else(|| IkSettings::for_chain(chain))
    }
}

/// `⌊Σ_k 2·nodes_k / (N+1)⌋` over all trees, `N + 1` being the goal-tree count.
pub fn iteration_count(tree_sizes: &[usize], n: usize) -> usize {
    2 * tree_sizes.iter().sum::<usize>() / (n + 1)
}

/// Total node budget `nodes_max / 2 · (N+1)`.
pub fn node_budget(nodes_max: usize, n: usize) -> usize {
    nodes_max / 2 * (n + 1)
}

/// The start worker's copy of the goal trees' node positions.
///
/// Goal trees only append, so each mirror is a prefix of its tree with the
/// same indices. Nodes absorbed since the last [`GoalFeed::clear_fresh`] are
/// the sampler's exploit set.
#[derive(Clone, Debug)]
pub struct GoalFeed {
    mirrors: Vec<KdTree>,
    fresh: Vec<(usize, usize)>,
}

impl GoalFeed {
    /// Mirrors holding only the roots.
    pub fn new(goal_configs: &[JointConfig]) -> Self {
        let mirrors = goal_configs
            .iter()
            .map(|q| {
                let mut t = KdTree::new(q.len());
                t.insert(q);
                t
            })
            .collect();
        GoalFeed {
            mirrors,
            fresh: Vec::new(),
        }
    }

    pub fn trees(&self) -> usize {
        self.mirrors.len()
    }

    pub fn tree_len(&self, k: usize) -> usize {
        self.mirrors[k].len()
    }

    pub fn total_nodes(&self) -> usize {
        self.mirrors.iter().map(KdTree::len).sum()
    }

    pub fn node(&self, k: usize, i: usize) -> &[f64] {
        self.mirrors[k].point(i)
    }

    /// Copies nodes of goal tree `k` that the mirror has not seen yet.
    pub fn absorb(&mut self, k: usize, tree: &Tree) {
        for i in self.mirrors[k].len()..tree.len() {
            self.mirrors[k].insert(tree.config(i));
            self.fresh.push((k, i));
        }
    }

    pub fn fresh(&self) -> &[(usize, usize)] {
        &self.fresh
    }

    pub fn clear_fresh(&mut self) {
        self.fresh.clear();
    }

    pub fn within(&self, k: usize, q: &[f64], radius: f64) -> Vec<usize> {
        self.mirrors[k].within_radius(q, radius)
    }
}

/// Start-tree sampling rule. Draws `γ ~ U[0,1]`; if `γ > γ₀` returns a uniform
/// joint-box sample, otherwise a uniform pick from the goal configurations and
/// the fresh goal-tree nodes, or from every goal-tree node when nothing is
/// fresh. The flag tells whether the exploit branch was taken.
pub fn sample_vertex(
    rng: &mut impl Rng,
    gamma0: f64,
    scene: &Scene,
    goal_configs: &[JointConfig],
    feed: &GoalFeed,
) -> (Vec<f64>, bool) {
    let gamma: f64 = rng.random();
    if gamma > gamma0 {
        return (scene.sample_uniform(rng), false);
    }
    let fresh = feed.fresh();
    let q = if fresh.is_empty() {
        let mut pick = rng.random_range(0..feed.total_nodes());
        let mut k = 0;
        while pick >= feed.tree_len(k) {
            pick -= feed.tree_len(k);
            k += 1;
        }
        feed.node(k, pick).to_vec()
    } else {
        let pick = rng.random_range(0..goal_configs.len() + fresh.len());
        match pick.checked_sub(goal_configs.len()) {
            None => goal_configs[pick].to_vec(),
            Some(j) => {
                let (k, i) = fresh[j];
                feed.node(k, i).to_vec()
            }
        }
    };
    (q, true)
}

/// A collision-free connection between a start-tree node and a goal-tree node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bridge {
    pub start: usize,
    pub tree: usize,
    pub node: usize,
    pub length: f64,
}

/// CONN_TREE for one new start-tree node `s`: every goal node within
/// `tolerance` whose straight connection is free becomes a bridge.
pub fn conn_tree(
    scene: &Scene,
    start: &Tree,
    s: usize,
    feed: &GoalFeed,
    tolerance: f64,
    resolution: f64,
) -> Vec<Bridge> {
    let q = start.config(s);
    let mut out = Vec::new();
    for k in 0..feed.trees() {
        for i in feed.within(k, q, tolerance) {
            let g = feed.node(k, i);
            if scene.edge_free(q, g, resolution) {
                out.push(Bridge {
                    start: s,
                    tree: k,
                    node: i,
                    length: distance(q, g),
                });
            }
        }
    }
    out
}

/// Cheapest bridge under current tree costs; ties keep the earliest bridge.
pub fn cheapest_bridge(start: &Tree, bridges: &[Bridge], goal_cost: impl Fn(usize, usize) -> f64) -> Option<(f64, Bridge)> {
    let mut best: Option<(f64, Bridge)> = None;
    for b in bridges {
        let c = start.cost(b.start) + b.length + goal_cost(b.tree, b.node);
        if best.is_none_or(|(bc, _)| c < bc) {
            best = Some((c, *b));
        }
    }
    best
}
