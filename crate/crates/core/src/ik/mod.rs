//! Inverse kinematics: seed database, two local solvers, and multi-seed goal
//! set sampling with ε-downsampling.

mod seeds;
mod solver;

pub use seeds::SeedDatabase;
pub use solver::{solve_ik_newton, solve_ik_sqp, solve_ik_sqp_traced, IkFailure, IkSolution, SqpIterate};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collision::Scene;
use crate::kinematics::{distance, JointConfig, Pose, SerialChain};
use crate::{Error, Result};

/// Default pairwise threshold below which two IK solutions count as duplicates.
pub const DEFAULT_DEDUP_EPS: f64 = 1e-4;

/// Weights and stopping rules shared by both IK solvers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IkSettings {
    /// Diagonal of the task-space weight W: (x, y, z, rx, ry, rz).
    pub task_weight: [f64; 6],
    /// Weight λ of the pull toward the seed configuration.
    pub seed_weight: f64,
    pub max_iters: usize,
    /// Success threshold on the W-weighted pose error norm.
    pub residual_tol: f64,
    /// Newton step scale α.
    pub step: f64,
    /// Newton stops once ‖q_{k+1} − q_k‖² ≤ this.
    pub convergence_eps: f64,
    /// Diagonal damping of the Newton pseudoinverse.
    pub damping: f64,
}

impl Default for IkSettings {
    fn default() -> Self {
        IkSettings {
            task_weight: [1.0; 6],
            seed_weight: 1e-3,
            max_iters: 200,
            residual_tol: 1e-4,
            step: 0.5,
            convergence_eps: 1e-16,
            damping: 1e-6,
        }
    }
}

impl IkSettings {
    /// Ignores orientation; used for arms that cannot control it (planar chains).
    pub fn position_only() -> Self {
        IkSettings {
            task_weight: [1.0, 1.0, 1.0, 0.0, 0.0, 0.0],
            ..Default::default()
        }
    }

    /// Full-pose weights for chains with at least six joints, position-only otherwise.
    pub fn for_chain(chain: &SerialChain) -> Self {
        if chain.dof() >= 6 {
            Self::default()
        } else {
            Self::position_only()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.task_weight.iter().any(|w| !(*w >= 0.0 && w.is_finite()))
            || self.task_weight.iter().all(|w| *w == 0.0)
        {
            return Err(Error::invalid("task weights must be non-negative with at least one positive"));
        }
        if !(self.seed_weight >= 0.0) {
            return Err(Error::invalid("seed weight must be non-negative"));
        }
        if !(self.residual_tol > 0.0) {
            return Err(Error::invalid("residual tolerance must be positive"));
        }
        if !(self.step > 0.0 && self.step <= 1.0) {
            return Err(Error::invalid("step must lie in (0, 1]"));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be positive"));
        }
        Ok(())
    }

    /// W-weighted norm of a pose error.
    pub fn residual(&self, err: &nalgebra::Vector6<f64>) -> f64 {
        err.iter()
            .zip(&self.task_weight)
            .map(|(e, w)| w * e * e)
            .sum::<f64>()
            .sqrt()
    }

    /// W-weighted error between `f(q)` and `target`.
    pub fn pose_residual(&self, chain: &SerialChain, q: &[f64], target: &Pose) -> Result<f64> {
        let pose = chain.forward_kinematics(q)?;
        Ok(self.residual(&crate::kinematics::pose_error(&pose, target)))
    }
}

/// Greedy ε-filter: keeps a solution iff it is farther than `eps` from every
/// solution kept before it. Output preserves input order.
pub fn downsample(solutions: &[JointConfig], eps: f64) -> Vec<JointConfig> {
    let mut kept: Vec<JointConfig> = Vec::new();
    for q in solutions {
        if kept.iter().all(|k| distance(k, q) > eps) {
            kept.push(q.clone());
        }
    }
    kept
}

/// Distinct joint-space preimages of a task-space goal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoalSet {
    pub configs: Vec<JointConfig>,
    pub target: Pose,
}

impl GoalSet {
    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    /// A goal set made of a single known configuration.
    pub fn single(chain: &SerialChain, q: JointConfig) -> Result<Self> {
        let target = chain.forward_kinematics(&q)?;
        Ok(GoalSet {
            configs: vec![q],
            target,
        })
    }

    /// Wraps explicit configurations (their FK is not checked against `target`).
    pub fn from_configs(configs: Vec<JointConfig>, target: Pose) -> Self {
        GoalSet { configs, target }
    }
}

/// Queries `k` seeds near the target, solves one seeded IK problem per seed,
/// drops failures and colliding solutions, then downsamples with `dedup_eps`.
///
/// Solves run concurrently; results are merged in seed order so the output
/// does not depend on scheduling.
pub fn sample_goal_set(
    scene: &Scene,
    db: &SeedDatabase,
    target: &Pose,
    k: usize,
    settings: &IkSettings,
    dedup_eps: f64,
) -> Result<GoalSet> {
    if k == 0 {
        return Err(Error::invalid("K must be at least 1"));
    }
    if !(dedup_eps > 0.0) {
        return Err(Error::invalid("dedup epsilon must be positive"));
    }
    settings.validate()?;
    if db.dof() != scene.dof() {
        return Err(Error::DimensionMismatch {
            expected: scene.dof(),
            got: db.dof(),
        });
    }
    let seeds = db.query_seeds(target, k)?;
    let solved: Vec<Option<JointConfig>> = seeds
        .par_iter()
        .map(|seed| {
            solve_ik_sqp(&scene.chain, target, seed, settings)
                .ok()
                .map(|s| s.q)
                .filter(|q| scene.is_free(q))
        })
        .collect();
    let survivors: Vec<JointConfig> = solved.into_iter().flatten().collect();
    let configs = downsample(&survivors, dedup_eps);
    if configs.is_empty() {
        return Err(Error::NoReachableGoal);
    }
    Ok(GoalSet {
        configs,
        target: *target,
    })
}

/// The baseline planners' goal: one IK solve seeded with the current
/// configuration.
pub fn naive_goal(scene: &Scene, q_current: &[f64], target: &Pose, settings: &IkSettings) -> Result<JointConfig> {
    let seed = JointConfig::from(q_current);
    match solve_ik_sqp(&scene.chain, target, &seed, settings) {
        Ok(sol) if scene.is_free(&sol.q) => Ok(sol.q),
        _ => Err(Error::NoReachableGoal),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collision::{Aabb, World};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Brute-force greedy filter, written independently of `downsample`.
    fn oracle_filter(list: &[Vec<f64>], eps: f64) -> Vec<usize> {
        let mut keep = Vec::new();
        for i in 0..list.len() {
            let mut ok = true;
            for &j in &keep {
                let d: f64 = list[i]
                    .iter()
                    .zip(&list[j] as &Vec<f64>)
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    .sqrt();
                if d <= eps {
                    ok = false;
                }
            }
            if ok {
                keep.push(i);
            }
        }
        keep
    }

    #[test]
    fn downsample_cases() {
        let q = JointConfig::new(vec![0.1, 0.2]);
        assert_eq!(downsample(&vec![q.clone(); 5], 1e-4), vec![q.clone()]);
        let eps = 1e-4;
        let far = JointConfig::new(vec![0.1 + 2.0 * eps, 0.2]);
        assert_eq!(downsample(&[q.clone(), far.clone()], eps).len(), 2);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let list: Vec<Vec<f64>> = (0..40)
                .map(|_| (0..3).map(|_| rng.random_range(0.0..1.0)).collect())
                .collect();
            let eps = 0.3;
            let cfgs: Vec<JointConfig> = list.iter().cloned().map(JointConfig::new).collect();
            let got = downsample(&cfgs, eps);
            let want: Vec<JointConfig> = oracle_filter(&list, eps).into_iter().map(|i| cfgs[i].clone()).collect();
            assert_eq!(got, want);
            for i in 0..got.len() {
                for j in i + 1..got.len() {
                    assert!(got[i].distance(&got[j]) > eps);
                }
            }
        }
    }

    /// Closed-form planar 2-link IK (unit links): both elbow branches.
    fn planar_branches(x: f64, y: f64) -> [[f64; 2]; 2] {
        let c2 = (x * x + y * y - 2.0) / 2.0;
        let s2 = (1.0 - c2 * c2).sqrt();
        let mut out = [[0.0; 2]; 2];
        for (i, s) in [s2, -s2].into_iter().enumerate() {
            let q2 = s.atan2(c2);
            let q1 = y.atan2(x) - s.atan2(1.0 + c2);
            out[i] = [q1, q2];
        }
        out
    }

    #[test]
    fn planar_goal_set_contains_both_elbows() {
        let chain = SerialChain::planar_2dof();
        let scene = Scene::new(chain.clone(), World::empty(Aabb::cube(3.0)));
        let db = SeedDatabase::build(&scene, 2000, 3).unwrap();
        let target = Pose::from_position(nalgebra::Vector3::new(0.9, 0.8, 0.0));
        let settings = IkSettings::position_only();
        let goals = sample_goal_set(&scene, &db, &target, 10, &settings, DEFAULT_DEDUP_EPS).unwrap();
        for g in &goals.configs {
            assert!(settings.pose_residual(&chain, g, &target).unwrap() <= settings.residual_tol);
        }
        for branch in planar_branches(0.9, 0.8) {
            assert!(
                goals.configs.iter().any(|g| g.distance(&branch) < 1e-3),
                "missing branch {branch:?} in {:?}",
                goals.configs
            );
        }
        // both branches are found, and near-duplicates of each are merged only
        // down to ε, so the set has at least two members
        assert!(goals.len() >= 2);
    }

    #[test]
    fn single_seed_on_stored_pose() {
        let chain = SerialChain::generic_6dof();
        let scene = Scene::new(chain.clone(), World::empty(Aabb::cube(2.0)));
        let db = SeedDatabase::build(&scene, 500, 8).unwrap();
        let (pose, q) = db.entry(17);
        let goals = sample_goal_set(&scene, &db, &pose, 1, &IkSettings::default(), DEFAULT_DEDUP_EPS).unwrap();
        assert_eq!(goals.len(), 1);
        assert!(goals.configs[0].distance(&q) < 1e-9);
    }

    #[test]
    fn unreachable_target_has_no_goal() {
        let chain = SerialChain::planar_2dof();
        let scene = Scene::new(chain, World::empty(Aabb::cube(3.0)));
        let db = SeedDatabase::build(&scene, 500, 3).unwrap();
        let target = Pose::from_position(nalgebra::Vector3::new(3.0, 0.5, 0.0));
        let err = sample_goal_set(&scene, &db, &target, 5, &IkSettings::position_only(), 1e-4).unwrap_err();
        assert!(matches!(err, Error::NoReachableGoal));
    }

    #[test]
    fn goal_set_members_are_valid_on_redundant_arm() {
        let chain = SerialChain::generic_7dof();
        let world = crate::collision::make_environment(crate::collision::EnvironmentKind::Random, chain.reach(), 4).unwrap();
        let scene = Scene::new(chain.clone(), world);
        let db = SeedDatabase::build(&scene, 5000, 1).unwrap();
        let settings = IkSettings::default();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut solved = 0;
        for _ in 0..10 {
            let q = scene.sample_free(&mut rng, 10_000).unwrap();
            let target = chain.forward_kinematics(&q).unwrap();
            if let Ok(goals) = sample_goal_set(&scene, &db, &target, 10, &settings, DEFAULT_DEDUP_EPS) {
                solved += 1;
                for (i, g) in goals.configs.iter().enumerate() {
                    assert!(settings.pose_residual(&chain, g, &target).unwrap() <= 1e-4);
                    assert!(scene.is_free(g));
                    for h in &goals.configs[i + 1..] {
                        assert!(g.distance(h) > DEFAULT_DEDUP_EPS);
                    }
                }
            }
        }
        assert!(solved >= 8, "only {solved}/10 targets solved");
    }

    #[test]
    fn settings_validation() {
        assert!(IkSettings::default().validate().is_ok());
        assert!(IkSettings::position_only().validate().is_ok());
        let bad = IkSettings {
            task_weight: [0.0; 6],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = IkSettings {
            step: 1.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
