use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::RwLock;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{cheapest_bridge, conn_tree, iteration_count, node_budget, sample_vertex, Bridge, GoalFeed, ManyConfig, WorkerMode};
use crate::collision::Scene;
use crate::ik::{sample_goal_set, SeedDatabase};
use crate::kinematics::{JointConfig, Pose};
use crate::rrt::{
    biased_sample, bridge_path, extend, grow, rewire, Extend, Growth, PlanReport, SolutionRecord, StopReason, Timing,
    TraceRecorder, Tree,
};
use crate::{Error, Result};

/// Full pipeline: IK goal-set sampling from `db`, then tree search.
///
/// IK and tree allocation count as set-up; [`Timing::search_started`] marks
/// the moment the first tree starts growing.
pub fn plan_many(
    scene: &Scene,
    q_start: &[f64],
    target: &Pose,
    db: &SeedDatabase,
    config: &ManyConfig,
) -> Result<PlanReport> {
    let timing = Timing::begin();
    validate(scene, q_start, config)?;
    let settings = config.ik_settings(&scene.chain);
    let goals = sample_goal_set(scene, db, target, config.k, &settings, config.dedup_eps)?;
    search(scene, q_start, &goals.configs, config, timing)
}

/// Tree search toward explicitly given goal configurations.
pub fn plan_many_with_goals(
    scene: &Scene,
    q_start: &[f64],
    goals: &[JointConfig],
    config: &ManyConfig,
) -> Result<PlanReport> {
    let timing = Timing::begin();
    validate(scene, q_start, config)?;
    if goals.is_empty() {
        return Err(Error::NoReachableGoal);
    }
    for g in goals {
        scene.chain.check_dims(g)?;
        if !scene.is_free(g) {
            return Err(Error::invalid("goal configuration is not collision-free"));
        }
    }
    search(scene, q_start, goals, config, timing)
}

fn validate(scene: &Scene, q_start: &[f64], config: &ManyConfig) -> Result<()> {
    config.validate()?;
    scene.chain.check_dims(q_start)?;
    if !scene.is_free(q_start) {
        return Err(Error::invalid("start configuration is not collision-free"));
    }
    Ok(())
}

/// State shared by all workers. Tree `k < goals.len()` is goal tree `k`; the
/// start tree is owned by the start worker and only its size is published.
struct Shared<'a> {
    scene: &'a Scene,
    config: &'a ManyConfig,
    growth: Growth,
    q_start: &'a [f64],
    goals: &'a [JointConfig],
    goal_trees: Vec<RwLock<Tree>>,
    sizes: Vec<AtomicUsize>,
    per_tree_cap: usize,
    budget: usize,
    stop: AtomicBool,
}

enum GoalStep {
    Grew,
    Trapped,
    Full,
}

impl Shared<'_> {
    fn n(&self) -> usize {
        self.goals.len() - 1
    }

    fn sizes(&self) -> Vec<usize> {
        self.sizes.iter().map(|s| s.load(Ordering::Acquire)).collect()
    }

    fn goal_step(&self, k: usize, rng: &mut ChaCha8Rng) -> GoalStep {
        let mut tree = self.goal_trees[k].write().expect("goal tree lock");
        if tree.len() >= self.per_tree_cap {
            return GoalStep::Full;
        }
        let q = biased_sample(self.scene, rng, self.config.goal_tree_bias, self.q_start);
        let (_, added) = grow(&mut tree, self.scene, &self.growth, &q);
        self.sizes[k].store(tree.len(), Ordering::Release);
        if added.is_some() {
            GoalStep::Grew
        } else {
            GoalStep::Trapped
        }
    }
}

struct StartWorker {
    tree: Tree,
    feed: GoalFeed,
    /// Bridges grouped by goal tree.
    bridges: Vec<Vec<Bridge>>,
    /// Per goal tree, how many bridges have been priced.
    priced: Vec<usize>,
    /// Rounds since every bridge was last re-priced.
    since_full: usize,
    record: SolutionRecord,
    rng: ChaCha8Rng,
    trace: TraceRecorder,
}

impl StartWorker {
    fn new(shared: &Shared, rng: ChaCha8Rng, origin: Instant) -> Self {
        let tree = Tree::new(shared.q_start);
        let feed = GoalFeed::new(shared.goals);
        let mut bridges = vec![Vec::new(); shared.goals.len()];
        let res = shared.config.base.edge_resolution;
        for b in conn_tree(shared.scene, &tree, 0, &feed, shared.config.tolerance(), res) {
            bridges[b.tree].push(b);
        }
        StartWorker {
            tree,
            feed,
            priced: vec![0; bridges.len()],
            bridges,
            since_full: 0,
            record: SolutionRecord::default(),
            rng,
            trace: TraceRecorder::new(origin),
        }
    }

    /// One start-tree iteration: drain the goal feeds, sample, extend, connect, rewire.
    fn step(&mut self, shared: &Shared) {
        for (k, t) in shared.goal_trees.iter().enumerate() {
            let t = t.read().expect("goal tree lock");
            self.feed.absorb(k, &t);
        }
        let (q, exploit) = sample_vertex(&mut self.rng, shared.config.gamma0, shared.scene, shared.goals, &self.feed);
        self.feed.clear_fresh();
        let tol = shared.config.tolerance();
        let res = shared.config.base.edge_resolution;
        let start_slot = shared.goals.len();
        loop {
            if self.tree.len() >= shared.per_tree_cap {
                break;
            }
            let before = self.tree.len();
            let r = extend(&mut self.tree, shared.scene, &shared.growth, &q);
            if self.tree.len() > before {
                let s = self.tree.len() - 1;
                for b in conn_tree(shared.scene, &self.tree, s, &self.feed, tol, res) {
                    self.bridges[b.tree].push(b);
                }
                rewire(&mut self.tree, shared.scene, &shared.growth, s);
                shared.sizes[start_slot].store(self.tree.len(), Ordering::Release);
            }
            let total: usize = shared.sizes().iter().sum();
            if !(shared.config.greedy_connect && exploit && matches!(r, Extend::Advanced(_))) || total >= shared.budget {
                break;
            }
        }
    }

    /// Offers the cheapest bridge of each goal tree under current costs.
    ///
    /// Bridges added since the last call are always priced. Rewiring lowers
    /// the cost of old bridges too, so the whole set is re-priced once the
    /// rounds since the last full pass cover its size at [`REPRICE_PER_ROUND`]
    /// bridges per round, or when `full` is set.
    fn update_record(&mut self, shared: &Shared, iteration: usize, origin: Instant, full: bool) {
        let total: usize = self.bridges.iter().map(Vec::len).sum();
        self.since_full += 1;
        let full = full || self.since_full * REPRICE_PER_ROUND >= total;
        if full {
            self.since_full = 0;
        }
        for (k, bridges) in self.bridges.iter().enumerate() {
            let from = if full { 0 } else { self.priced[k] };
            self.priced[k] = bridges.len();
            if from == bridges.len() {
                continue;
            }
            let goal = shared.goal_trees[k].read().expect("goal tree lock");
            let Some((c, b)) = cheapest_bridge(&self.tree, &bridges[from..], |_, i| goal.cost(i)) else {
                continue;
            };
            if self.record.improves(c) {
                let path = bridge_path(&self.tree, b.start, &goal, b.node);
                let ms = origin.elapsed().as_secs_f64() * 1e3;
                self.record.offer(path, k, iteration, ms);
            }
        }
    }
}

/// Amortized bridge re-pricing work per round.
const REPRICE_PER_ROUND: usize = 256;

/// Rounds without any tree growing after which the search gives up: every
/// tree is then full or confined to a region it has already covered.
const STALL_ROUNDS: usize = 2000;

fn tree_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn search(
    scene: &Scene,
    q_start: &[f64],
    goals: &[JointConfig],
    config: &ManyConfig,
    mut timing: Timing,
) -> Result<PlanReport> {
    let base = &config.base;
    let shared = Shared {
        scene,
        config,
        growth: base.growth(&scene.chain),
        q_start,
        goals,
        goal_trees: goals.iter().map(|g| RwLock::new(Tree::new(g))).collect(),
        sizes: (0..=goals.len()).map(|_| AtomicUsize::new(1)).collect(),
        per_tree_cap: (base.nodes_max / 2).max(2),
        budget: node_budget(base.nodes_max, goals.len() - 1),
        stop: AtomicBool::new(false),
    };
    let mut goal_rngs: Vec<ChaCha8Rng> = (0..goals.len()).map(|k| tree_rng(base.seed, k as u64 + 1)).collect();
    timing.setup_finished = Instant::now();
    timing.search_started = Instant::now();
    let origin = timing.search_started;
    let mut start = StartWorker::new(&shared, tree_rng(base.seed, 0), origin);

    // Checks the budget and records the incumbent; `Some` ends the search.
    // `idle` counts consecutive rounds in which no tree gained a node. Only
    // single mode uses it: parallel rounds are not synchronized with growth.
    let single = config.workers == WorkerMode::Single;
    let mut last_total = 0;
    let mut idle = 0;
    let mut control = |start: &mut StartWorker| -> Option<StopReason> {
        let sizes = shared.sizes();
        let total: usize = sizes.iter().sum();
        idle = if total > last_total { 0 } else { idle + 1 };
        last_total = total;
        let iteration = iteration_count(&sizes, shared.n());
        start.update_record(&shared, iteration, origin, false);
        start.trace.record(iteration, start.record.best_cost());
        if iteration >= base.max_iterations {
            Some(StopReason::Iterations)
        } else if total >= shared.budget {
            Some(StopReason::Nodes)
        } else if timing.deadline_passed(base.max_runtime_ms) {
            Some(StopReason::Timeout)
        } else if single && idle > STALL_ROUNDS {
            Some(StopReason::Stalled)
        } else {
            None
        }
    };

    let stop = match config.workers {
        WorkerMode::Single => {
            loop {
                if let Some(reason) = control(&mut start) {
                    break reason;
                }
                for (k, rng) in goal_rngs.iter_mut().enumerate() {
                    shared.goal_step(k, rng);
                }
                start.step(&shared);
            }
        }
        WorkerMode::Parallel => std::thread::scope(|sc| {
            for (k, mut rng) in goal_rngs.drain(..).enumerate() {
                let shared = &shared;
                sc.spawn(move || {
                    while !shared.stop.load(Ordering::Acquire) {
                        match shared.goal_step(k, &mut rng) {
                            GoalStep::Full => break,
                            GoalStep::Grew | GoalStep::Trapped => {}
                        }
                    }
                });
            }
            let reason = loop {
                if let Some(reason) = control(&mut start) {
                    break reason;
                }
                start.step(&shared);
            };
            shared.stop.store(true, Ordering::Release);
            reason
        }),
    };
    let iteration = iteration_count(&shared.sizes(), shared.n());
    start.update_record(&shared, iteration, origin, true);
    start.trace.record(iteration, start.record.best_cost());
    timing.search_finished = Instant::now();

    let goal_trees: Vec<Tree> = shared
        .goal_trees
        .into_iter()
        .map(|t| t.into_inner().expect("goal tree lock"))
        .collect();
    debug_assert!(goal_trees
        .iter()
        .chain(std::iter::once(&start.tree))
        .all(|t| t.check_invariants(1e-9).is_ok()));
    let mut tree_sizes: Vec<usize> = goal_trees.iter().map(Tree::len).collect();
    tree_sizes.push(start.tree.len());
    Ok(PlanReport {
        iterations: iteration_count(&tree_sizes, goals.len() - 1),
        record: start.record,
        trace: start.trace.into_points(),
        tree_sizes,
        goal_configs: goals.to_vec(),
        stop,
        timing,
    })
}
