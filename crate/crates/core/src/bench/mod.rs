//! Trial orchestration, metrics and validation oracles.
//!
//! A suite is a list of [`TrialSpec`]s. [`run_suite`] resolves each spec into
//! a concrete start configuration and goal pose, runs the requested planner
//! with fresh state, and streams one [`TrialResult`] row per trial plus the
//! per-trial trace to disk. [`summarize`] turns results into the per
//! (environment, planner) table.

mod oracle;
mod scenarios;
mod summary;

pub use oracle::{grid_oracle_2dof, OCTILE_STRETCH};
pub use scenarios::{
    bifurcated_branches, bifurcated_target, resolve_trial, wall_endpoints, ResolvedTrial, BIFURCATED_START,
};
pub use summary::{nearest_rank, render_csv, render_markdown, summarize, Percentile, SummaryRow};

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path as FsPath;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::collision::{EnvironmentKind, EnvironmentSpec, Scene};
use crate::ik::{naive_goal, SeedDatabase};
use crate::kinematics::SerialChain;
use crate::many::{plan_many, ManyConfig};
use crate::rrt::{plan_rrt_star, plan_rrt_star_connect, write_trace_csv, PlanReport, TracePoint};
use crate::{Error, Result};

/// Default seed database size.
pub const DEFAULT_SEED_SAMPLES: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlannerKind {
    #[serde(rename = "rrtstar")]
    RrtStar,
    Connect,
    Many,
}

impl PlannerKind {
    pub fn name(&self) -> &'static str {
        match self {
            PlannerKind::RrtStar => "rrtstar",
            PlannerKind::Connect => "connect",
            PlannerKind::Many => "many",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "rrtstar" => Ok(PlannerKind::RrtStar),
            "connect" => Ok(PlannerKind::Connect),
            "many" => Ok(PlannerKind::Many),
            other => Err(Error::invalid(format!("unknown planner '{other}'"))),
        }
    }
}

/// Environment of a trial; scaled to the chain's reach at resolution time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub kind: EnvironmentKind,
    #[serde(default)]
    pub seed: u64,
    /// Obstacle count of `random` worlds.
    #[serde(default)]
    pub obstacles: Option<usize>,
    /// Keep random obstacles in the arm's plane; defaults to true for 2-DoF chains.
    #[serde(default)]
    pub planar: Option<bool>,
}

impl EnvSpec {
    pub fn new(kind: EnvironmentKind, seed: u64) -> Self {
        EnvSpec {
            kind,
            seed,
            obstacles: None,
            planar: None,
        }
    }

    pub fn for_chain(&self, chain: &SerialChain) -> EnvironmentSpec {
        let mut spec = EnvironmentSpec::new(self.kind, chain.reach(), self.seed).planar(self.planar.unwrap_or(chain.dof() == 2));
        if let Some(n) = self.obstacles {
            spec = spec.with_obstacles(n);
        }
        spec
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StartSpec {
    /// Rejection-sampled collision-free configuration.
    Random,
    Config(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GoalSpec {
    /// Pose of a random free configuration verified reachable from the start.
    Random,
    /// Pose of this configuration.
    Config(Vec<f64>),
    Pose([f64; 7]),
}

/// One benchmark trial. Start and goal are resolved from `(chain, env, seed)`
/// only, so specs differing only in `planner` share the same start and goal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    /// Reference chain name or path to a chain file.
    pub chain: String,
    pub env: EnvSpec,
    pub start: StartSpec,
    pub goal: GoalSpec,
    pub planner: PlannerKind,
    /// Planner parameters; `None` uses the chain defaults. Baselines read `base`.
    #[serde(default)]
    pub config: Option<ManyConfig>,
    /// Seeds start/goal resolution and the planner.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_seed_samples")]
    pub seed_samples: usize,
}

fn default_seed_samples() -> usize {
    DEFAULT_SEED_SAMPLES
}

impl TrialSpec {
    pub fn new(chain: &str, env: EnvSpec, start: StartSpec, goal: GoalSpec, planner: PlannerKind, seed: u64) -> Self {
        TrialSpec {
            chain: chain.to_string(),
            env,
            start,
            goal,
            planner,
            config: None,
            seed,
            seed_samples: DEFAULT_SEED_SAMPLES,
        }
    }

    pub fn with_config(mut self, config: ManyConfig) -> Self {
        self.config = Some(config);
        self
    }

    /// Same trial with a different planner.
    pub fn with_planner(&self, planner: PlannerKind) -> Self {
        TrialSpec {
            planner,
            ..self.clone()
        }
    }

    /// Planner parameters with the trial seed applied.
    pub fn planner_config(&self, chain: &SerialChain) -> ManyConfig {
        let mut c = self.config.clone().unwrap_or_else(|| ManyConfig::for_chain(chain));
        c.base.seed = self.seed;
        c
    }
}

/// Suite file: `[[trial]]` tables in TOML.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Suite {
    #[serde(default, rename = "trial")]
    pub trials: Vec<TrialSpec>,
}

impl Suite {
    pub fn load(path: impl AsRef<FsPath>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<FsPath>) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::invalid(e.to_string()))?;
        fs::write(path, text)?;
        Ok(())
    }
}

/// `stop` value of trials whose IK step found no collision-free goal.
pub const NO_GOAL: &str = "no_goal";

/// One row of the results table. `error` is set only when the trial could not
/// be executed; a planner that finds no goal or no path is a plain failure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub chain: String,
    pub env: String,
    pub env_seed: u64,
    pub planner: String,
    pub seed: u64,
    pub success: bool,
    pub max_iterations: usize,
    pub first_iteration: Option<usize>,
    pub first_ms: Option<f64>,
    pub first_cost: Option<f64>,
    pub final_cost: Option<f64>,
    /// Iteration and time of the last improvement.
    pub final_iteration: Option<usize>,
    pub final_ms: Option<f64>,
    /// Measured search span.
    pub total_ms: f64,
    /// Goal sampling and set-up, outside the search span.
    pub setup_ms: f64,
    pub iterations: usize,
    pub nodes: usize,
    pub goal_configs: usize,
    pub stop: String,
    pub error: Option<String>,
    #[serde(skip)]
    pub trace: Vec<TracePoint>,
}

impl TrialResult {
    fn failed(index: usize, spec: &TrialSpec, max_iterations: usize, error: String) -> Self {
        TrialResult {
            trial: index,
            chain: spec.chain.clone(),
            env: spec.env.kind.name().to_string(),
            env_seed: spec.env.seed,
            planner: spec.planner.name().to_string(),
            seed: spec.seed,
            success: false,
            max_iterations,
            first_iteration: None,
            first_ms: None,
            first_cost: None,
            final_cost: None,
            final_iteration: None,
            final_ms: None,
            total_ms: 0.0,
            setup_ms: 0.0,
            iterations: 0,
            nodes: 0,
            goal_configs: 0,
            stop: "error".to_string(),
            error: Some(error),
            trace: Vec::new(),
        }
    }

    fn no_goal(index: usize, spec: &TrialSpec, max_iterations: usize) -> Self {
        TrialResult {
            stop: NO_GOAL.to_string(),
            error: None,
            ..Self::failed(index, spec, max_iterations, String::new())
        }
    }

    fn from_report(index: usize, spec: &TrialSpec, max_iterations: usize, report: PlanReport) -> Self {
        let first = report.record.first;
        let latest = report.record.latest;
        TrialResult {
            trial: index,
            chain: spec.chain.clone(),
            env: spec.env.kind.name().to_string(),
            env_seed: spec.env.seed,
            planner: spec.planner.name().to_string(),
            seed: spec.seed,
            success: report.success(),
            max_iterations,
            first_iteration: first.map(|f| f.iteration),
            first_ms: first.map(|f| f.wall_ms),
            first_cost: first.map(|f| f.cost),
            final_cost: latest.map(|f| f.cost),
            final_iteration: latest.map(|f| f.iteration),
            final_ms: latest.map(|f| f.wall_ms),
            total_ms: report.timing.search_ms(),
            setup_ms: report.timing.setup_ms(),
            iterations: report.iterations,
            nodes: report.total_nodes(),
            goal_configs: report.goal_configs.len(),
            stop: serde_json::to_value(report.stop)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default(),
            error: None,
            trace: report.trace,
        }
    }
}

/// State shared across the trials of a suite: seed databases per
/// (chain, world, size) and resolved endpoints per (chain, env, start, goal,
/// seed), so planners compared on one trial reuse its set-up.
#[derive(Default)]
pub struct TrialCache {
    dbs: HashMap<(u64, u64, usize), Arc<SeedDatabase>>,
    resolved: HashMap<String, std::result::Result<Arc<ResolvedTrial>, String>>,
}

impl TrialCache {
    pub fn seeds(&mut self, scene: &Scene, samples: usize) -> Result<Arc<SeedDatabase>> {
        let key = (scene.chain.content_hash(), scene.world.content_hash(), samples);
        if let Some(db) = self.dbs.get(&key) {
            return Ok(db.clone());
        }
        let db = Arc::new(SeedDatabase::build(scene, samples, key.0 ^ key.1)?);
        self.dbs.insert(key, db.clone());
        Ok(db)
    }

    /// [`resolve_trial`] memoized on everything it depends on; errors are kept as messages.
    pub fn resolve(&mut self, spec: &TrialSpec, chain: SerialChain) -> std::result::Result<Arc<ResolvedTrial>, String> {
        let key = serde_json::to_string(&(&spec.chain, &spec.env, &spec.start, &spec.goal, spec.seed))
            .expect("trial keys serialize");
        self.resolved
            .entry(key)
            .or_insert_with(|| resolve_trial(spec, chain).map(Arc::new).map_err(|e| e.to_string()))
            .clone()
    }
}

/// Runs the planner of one resolved trial.
pub fn run_planner(
    resolved: &ResolvedTrial,
    planner: PlannerKind,
    config: &ManyConfig,
    db: Option<&SeedDatabase>,
) -> Result<PlanReport> {
    let scene = &resolved.scene;
    let ik = config.ik_settings(&scene.chain);
    match planner {
        PlannerKind::RrtStar | PlannerKind::Connect => {
            let goal = naive_goal(scene, &resolved.q_start, &resolved.target, &ik)?;
            if planner == PlannerKind::RrtStar {
                plan_rrt_star(scene, &resolved.q_start, &goal, &config.base)
            } else {
                plan_rrt_star_connect(scene, &resolved.q_start, &goal, &config.base)
            }
        }
        PlannerKind::Many => {
            let db = db.ok_or_else(|| Error::invalid("the multi-goal planner needs a seed database"))?;
            plan_many(scene, &resolved.q_start, &resolved.target, db, config)
        }
    }
}

/// Resolves and runs one trial; failures of any kind become a failed row.
pub fn run_trial(index: usize, spec: &TrialSpec, cache: &mut TrialCache) -> TrialResult {
    let chain = match SerialChain::resolve(&spec.chain) {
        Ok(c) => c,
        Err(e) => return TrialResult::failed(index, spec, 0, e.to_string()),
    };
    let config = spec.planner_config(&chain);
    let max_iterations = config.base.max_iterations;
    let resolved = match cache.resolve(spec, chain) {
        Ok(r) => r,
        Err(e) => return TrialResult::failed(index, spec, max_iterations, e),
    };
    let db = match spec.planner {
        PlannerKind::Many => match cache.seeds(&resolved.scene, spec.seed_samples) {
            Ok(db) => Some(db),
            Err(e) => return TrialResult::failed(index, spec, max_iterations, e.to_string()),
        },
        _ => None,
    };
    match run_planner(&resolved, spec.planner, &config, db.as_deref()) {
        Ok(report) => TrialResult::from_report(index, spec, max_iterations, report),
        // the planner ran but its IK step produced no usable goal
        Err(Error::NoReachableGoal) => TrialResult::no_goal(index, spec, max_iterations),
        Err(e) => TrialResult::failed(index, spec, max_iterations, e.to_string()),
    }
}

pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const TRACE_DIR: &str = "traces";

/// File name of a trial's trace inside [`TRACE_DIR`].
pub fn trace_file_name(r: &TrialResult) -> String {
    format!("{:05}_{}_{}.csv", r.trial, r.env, r.planner)
}

/// Runs every trial in order. With `out_dir`, each result row and trace is
/// written as soon as the trial finishes, and `summary.json` at the end.
pub fn run_suite(specs: &[TrialSpec], out_dir: Option<&FsPath>) -> Result<Vec<TrialResult>> {
    let mut writer = match out_dir {
        Some(dir) => {
            fs::create_dir_all(dir.join(TRACE_DIR))?;
            Some(csv::Writer::from_writer(BufWriter::new(File::create(dir.join(RESULTS_FILE))?)))
        }
        None => None,
    };
    let mut cache = TrialCache::default();
    let mut results = Vec::with_capacity(specs.len());
    for (i, spec) in specs.iter().enumerate() {
        let r = run_trial(i, spec, &mut cache);
        if let (Some(w), Some(dir)) = (writer.as_mut(), out_dir) {
            w.serialize(&r)?;
            w.flush()?;
            let f = File::create(dir.join(TRACE_DIR).join(trace_file_name(&r)))?;
            write_trace_csv(BufWriter::new(f), &r.trace)?;
        }
        results.push(r);
    }
    if let Some(dir) = out_dir {
        let summary = summarize(&results);
        fs::write(dir.join(SUMMARY_FILE), serde_json::to_string_pretty(&summary)?)?;
    }
    Ok(results)
}

pub fn read_results(path: impl AsRef<FsPath>) -> Result<Vec<TrialResult>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in r.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

/// A goal pose as the 7-array `[x y z qw qx qy qz]`.
pub fn pose_of(chain: &SerialChain, q: &[f64]) -> Result<[f64; 7]> {
    Ok(chain.forward_kinematics(q)?.to_array())
}
