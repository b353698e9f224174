use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};

use crate::collision::Scene;
use crate::kinematics::{distance, JointConfig};
use crate::{Error, Result};

/// Piecewise-linear joint-space plan.
///
/// `cost` is the sum of Euclidean lengths of consecutive segments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub cost: f64,
    pub waypoints: Vec<JointConfig>,
}

impl Path {
    /// Builds a path and computes its cost. Consecutive duplicate waypoints are dropped.
    pub fn from_waypoints(waypoints: Vec<JointConfig>) -> Self {
        let mut kept: Vec<JointConfig> = Vec::with_capacity(waypoints.len());
        for w in waypoints {
            if kept.last().is_some_and(|l| l.as_slice() == w.as_slice()) {
                continue;
            }
            kept.push(w);
        }
        Path {
            cost: Self::length(&kept),
            waypoints: kept,
        }
    }

    pub fn length(waypoints: &[JointConfig]) -> f64 {
        waypoints.windows(2).map(|w| distance(&w[0], &w[1])).sum()
    }

    pub fn start(&self) -> &JointConfig {
        &self.waypoints[0]
    }

    pub fn end(&self) -> &JointConfig {
        self.waypoints.last().expect("path has waypoints")
    }

    /// Re-checks the cost (relative 1e-9) and every segment with `edge_free`.
    pub fn verify(&self, scene: &Scene, resolution: f64) -> bool {
        if self.waypoints.is_empty() || self.waypoints.iter().any(|w| w.len() != scene.dof()) {
            return false;
        }
        let len = Self::length(&self.waypoints);
        if (len - self.cost).abs() > 1e-9 * len.max(1.0) {
            return false;
        }
        if !scene.is_free(&self.waypoints[0]) {
            return false;
        }
        self.waypoints
            .windows(2)
            .all(|w| scene.edge_free(&w[0], &w[1], resolution))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("path serializes")
    }

    pub fn save(&self, path: impl AsRef<FsPath>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<FsPath>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let p: Path = serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        if p.waypoints.is_empty() {
            return Err(Error::format(path, "path has no waypoints"));
        }
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collision::{Aabb, Sphere, World};
    use crate::kinematics::SerialChain;

    #[test]
    fn cost_and_duplicates() {
        let p = Path::from_waypoints(vec![
            vec![0.0, 0.0].into(),
            vec![0.0, 0.0].into(),
            vec![3.0, 4.0].into(),
            vec![3.0, 5.0].into(),
        ]);
        assert_eq!(p.waypoints.len(), 3);
        assert!((p.cost - 6.0).abs() < 1e-12);
        let single = Path::from_waypoints(vec![vec![1.0, 2.0].into()]);
        assert_eq!(single.cost, 0.0);
    }

    #[test]
    fn verify_detects_collisions_and_tampering() {
        let world = World::new(vec![Sphere::new([0.0, 1.5, 0.0], 0.2)], Aabb::cube(3.0)).unwrap();
        let scene = Scene::new(SerialChain::planar_2dof(), world);
        let ok = Path::from_waypoints(vec![vec![-0.5, 0.0].into(), vec![-1.0, 0.0].into()]);
        assert!(ok.verify(&scene, 0.05));
        // sweeping the straight arm through +y hits the sphere
        let bad = Path::from_waypoints(vec![vec![0.0, 0.0].into(), vec![3.0, 0.0].into()]);
        assert!(!bad.verify(&scene, 0.05));
        let mut tampered = ok.clone();
        tampered.cost += 0.1;
        assert!(!tampered.verify(&scene, 0.05));
    }

    #[test]
    fn json_roundtrip() {
        let p = Path::from_waypoints(vec![vec![0.1, 0.2].into(), vec![0.3, -0.4].into()]);
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("p.json");
        p.save(&f).unwrap();
        assert_eq!(Path::load(&f).unwrap(), p);
        assert!(p.to_json().find("cost").unwrap() < p.to_json().find("waypoints").unwrap());
    }
}
