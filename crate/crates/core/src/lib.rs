//! Sampling-based motion planning for serial manipulators.
//!
//! The crate plans joint-space paths toward a task-space goal pose. Besides the
//! classic single-tree RRT* and bidirectional RRT*-Connect, it provides
//! Many-RRT*: the goal pose is turned into a set of distinct inverse-kinematics
//! solutions, every solution roots its own RRT* tree, and a start-rooted tree
//! connects into whichever of them yields the cheapest path.
//!
//! Module map:
//!
//! - [`kinematics`]: serial chains, forward kinematics, Jacobians.
//! - [`ik`]: seed database, IK solvers, goal-set sampling.
//! - [`collision`]: sphere worlds, robot sphere model, benchmark environments.
//! - [`rrt`]: tree structure, EXTEND/REWIRE, RRT* and RRT*-Connect.
//! - [`many`]: the multi-goal planner.
//! - [`bench`]: trial orchestration, metrics and the 2-DoF grid oracle.

pub mod bench;
pub mod collision;
mod error;
pub mod ik;
pub mod kdtree;
pub mod kinematics;
pub mod many;
pub mod rrt;

pub use error::{Error, Result};
pub use kinematics::{JointConfig, Pose, SerialChain};
