use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{grid_oracle_2dof, GoalSpec, StartSpec, TrialSpec};
use crate::collision::{EnvironmentKind, Scene};
use crate::kinematics::{JointConfig, Pose, SerialChain};
use crate::rrt::{plan_rrt_star_connect, PlannerConfig};
use crate::{Error, Result};

/// Start of the bifurcated scenario for the planar arm. Its link 1 sits in the
/// `q1 > 0` component, while a start-seeded IK solve toward
/// [`bifurcated_target`] converges to the elbow branch in the `q1 < 0`
/// component.
pub const BIFURCATED_START: [f64; 2] = [2.0, 1.0];

/// Goal of the bifurcated scenario: on the x axis at 0.6 of the reach, behind
/// the obstacle.
pub fn bifurcated_target(reach: f64) -> Pose {
    Pose::from_position(nalgebra::Vector3::new(0.6 * reach, 0.0, 0.0))
}

/// Closed-form elbow solutions of the planar arm (equal link lengths) for
/// [`bifurcated_target`]: `(unreachable, reachable)` from [`BIFURCATED_START`].
pub fn bifurcated_branches() -> (JointConfig, JointConfig) {
    // |p| = 1.2 l/2 with unit links: cos q2 = (1.2² − 2) / 2
    let q2 = ((1.2f64 * 1.2 - 2.0) / 2.0).acos();
    let q1 = q2.sin().atan2(1.0 + q2.cos());
    (vec![-q1, q2].into(), vec![q1, -q2].into())
}

/// Fixed start and goal configurations of the wall worlds, with the end
/// effector on opposite sides of the wall. Defined for the 6-DoF reference
/// chain; other chains must supply explicit configurations.
///
/// The pair was drawn from a seeded search over free configurations and is the
/// first one where, in both wall worlds, the start-seeded IK goal has a blocked
/// straight edge and costs more to reach (best of three long RRT*-Connect runs)
/// than the straight edge to another IK branch.
pub fn wall_endpoints(chain: &SerialChain) -> Result<(JointConfig, JointConfig)> {
    if chain.dof() != 6 {
        return Err(Error::invalid("fixed wall endpoints exist only for 6-DoF chains"));
    }
    let start = vec![0.81, 1.53, -1.42, -0.51, -0.14, 0.4];
    let goal = vec![-0.69, 1.14, -1.08, 2.71, -1.74, 1.94];
    Ok((start.into(), goal.into()))
}

/// A trial with its world built and its endpoints fixed.
#[derive(Clone, Debug)]
pub struct ResolvedTrial {
    pub scene: Scene,
    pub q_start: JointConfig,
    pub target: Pose,
    /// Configuration the target was generated from, when known.
    pub goal_config: Option<JointConfig>,
}

const SAMPLE_TRIES: usize = 200_000;
const GOAL_TRIES: usize = 50;
/// Lattice spacing of the planar reachability pre-filter (radians).
const PLANAR_FILTER_RESOLUTION: f64 = 0.02;

fn feasibility_config(chain: &SerialChain, seed: u64) -> PlannerConfig {
    PlannerConfig {
        max_iterations: 40_000,
        nodes_max: 40_000,
        max_runtime_ms: 10_000,
        ..PlannerConfig::for_chain(chain).with_seed(seed)
    }
}

/// Builds the world and fixes start and goal. Depends only on the chain, the
/// environment and `spec.seed`.
///
/// Random goals must be reachable from the start by a long RRT*-Connect run.
/// Planar candidates must first be connected to the start on a coarse lattice.
pub fn resolve_trial(spec: &TrialSpec, chain: SerialChain) -> Result<ResolvedTrial> {
    let world = spec.env.for_chain(&chain).build()?;
    let scene = Scene::new(chain, world);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let infeasible = |tried| Error::InfeasibleWorld { accepted: 0, tried };
    let fixed_wall = matches!(spec.env.kind, EnvironmentKind::Wall | EnvironmentKind::Passage);

    let q_start: JointConfig = match &spec.start {
        StartSpec::Config(v) => v.clone().into(),
        StartSpec::Random if fixed_wall => wall_endpoints(&scene.chain)?.0,
        StartSpec::Random => scene.sample_free(&mut rng, SAMPLE_TRIES).ok_or(infeasible(SAMPLE_TRIES))?.into(),
    };
    scene.chain.check_dims(&q_start)?;
    if !scene.is_free(&q_start) {
        return Err(Error::invalid("start configuration is not collision-free"));
    }

    let (target, goal_config) = match &spec.goal {
        GoalSpec::Pose(p) => (Pose::from_array(*p)?, None),
        GoalSpec::Config(v) => (scene.chain.forward_kinematics(v)?, Some(v.clone().into())),
        GoalSpec::Random if fixed_wall => {
            let g = wall_endpoints(&scene.chain)?.1;
            (scene.chain.forward_kinematics(&g)?, Some(g))
        }
        GoalSpec::Random => {
            let mut found = None;
            for attempt in 0..GOAL_TRIES {
                let Some(q) = scene.sample_free(&mut rng, SAMPLE_TRIES) else {
                    return Err(infeasible(SAMPLE_TRIES));
                };
                // a lattice miss rejects a candidate without a long Connect run
                if scene.dof() == 2
                    && grid_oracle_2dof(&scene, &q_start, &[q.clone().into()], PLANAR_FILTER_RESOLUTION)?.is_infinite()
                {
                    continue;
                }
                let cfg = feasibility_config(&scene.chain, spec.seed.wrapping_add(attempt as u64));
                if plan_rrt_star_connect(&scene, &q_start, &q, &cfg)?.success() {
                    found = Some(q);
                    break;
                }
            }
            let q: JointConfig = found.ok_or(Error::NoReachableGoal)?.into();
            (scene.chain.forward_kinematics(&q)?, Some(q))
        }
    };
    Ok(ResolvedTrial {
        scene,
        q_start,
        target,
        goal_config,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{EnvSpec, PlannerKind};
    use crate::collision::make_environment;

    #[test]
    fn bifurcated_branches_hit_target() {
        let chain = SerialChain::planar_2dof();
        let target = bifurcated_target(chain.reach());
        let (a, b) = bifurcated_branches();
        for q in [&a, &b] {
            let p = chain.forward_kinematics(q).unwrap().position;
            assert!((p - target.position).norm() < 1e-12);
        }
        let scene = Scene::new(chain, make_environment(EnvironmentKind::Bifurcated, 2.0, 0).unwrap());
        assert!(scene.is_free(&a) && scene.is_free(&b) && scene.is_free(&BIFURCATED_START));
        assert!(a[0] < 0.0 && b[0] > 0.0);
    }

    #[test]
    fn wall_endpoints_straddle_the_wall() {
        let chain = SerialChain::generic_6dof();
        let (s, g) = wall_endpoints(&chain).unwrap();
        for kind in [EnvironmentKind::Wall, EnvironmentKind::Passage] {
            let scene = Scene::new(chain.clone(), make_environment(kind, chain.reach(), 0).unwrap());
            assert!(scene.is_free(&s) && scene.is_free(&g), "{kind}");
            assert!(!scene.edge_free(&s, &g, 0.05), "{kind}");
        }
        let (ps, pg) = (
            chain.forward_kinematics(&s).unwrap().position,
            chain.forward_kinematics(&g).unwrap().position,
        );
        assert!(ps.y > 0.0 && pg.y < 0.0 && ps.x > 0.2 * chain.reach() && pg.x > 0.2 * chain.reach());
        assert!(wall_endpoints(&SerialChain::planar_2dof()).is_err());
    }

    #[test]
    fn resolution_ignores_planner() {
        let spec = TrialSpec::new(
            "planar2",
            EnvSpec::new(EnvironmentKind::Random, 3),
            StartSpec::Random,
            GoalSpec::Random,
            PlannerKind::Many,
            17,
        );
        let a = resolve_trial(&spec, SerialChain::planar_2dof()).unwrap();
        let b = resolve_trial(&spec.with_planner(PlannerKind::RrtStar), SerialChain::planar_2dof()).unwrap();
        assert_eq!(a.q_start, b.q_start);
        assert_eq!(a.target, b.target);
        assert!(a.scene.is_free(&a.q_start));
    }
}
