//! Task-space indexed database of collision-free configurations used to seed IK.
//!
//! File layout (little endian):
//!
//! ```text
//! magic    8 bytes  "MRSEEDDB"
//! version  u32      1
//! chain    u64      SerialChain::content_hash
//! world    u64      World::content_hash
//! dof      u32
//! count    u64
//! records  count × (dof × f64 joint values, 7 × f64 pose [x y z qw qx qy qz])
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::collision::Scene;
use crate::kdtree::KdTree;
use crate::kinematics::{JointConfig, Pose};
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"MRSEEDDB";
const VERSION: u32 = 1;
/// Rejection sampling gives up when fewer than this fraction of a window is accepted.
const MIN_ACCEPTANCE: f64 = 1e-4;
const WINDOW: usize = 20_000;

#[derive(Clone, Debug)]
pub struct SeedDatabase {
    chain_hash: u64,
    world_hash: u64,
    dof: usize,
    configs: Vec<f64>,
    poses: Vec<Pose>,
    index: KdTree,
}

impl SeedDatabase {
    /// Rejection-samples `sample_count` collision-free configurations uniformly
    /// from the joint-limit box and indexes their end-effector positions.
    pub fn build(scene: &Scene, sample_count: usize, seed: u64) -> Result<Self> {
        if sample_count == 0 {
            return Err(Error::invalid("sample_count must be at least 1"));
        }
        let dof = scene.dof();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut configs = Vec::with_capacity(sample_count * dof);
        let mut poses = Vec::with_capacity(sample_count);
        let (mut tried, mut accepted) = (0usize, 0usize);
        let mut window_accepted = 0usize;
        while accepted < sample_count {
            let q = scene.sample_uniform(&mut rng);
            tried += 1;
            if scene.is_free(&q) {
                poses.push(scene.chain.fk_unchecked(&q));
                configs.extend_from_slice(&q);
                accepted += 1;
                window_accepted += 1;
            }
            if tried % WINDOW == 0 {
                if (window_accepted as f64) < MIN_ACCEPTANCE * WINDOW as f64 {
                    return Err(Error::InfeasibleWorld { accepted, tried });
                }
                window_accepted = 0;
            }
        }
        Ok(Self::assemble(
            scene.chain.content_hash(),
            scene.world.content_hash(),
            dof,
            configs,
            poses,
        ))
    }

    fn assemble(chain_hash: u64, world_hash: u64, dof: usize, configs: Vec<f64>, poses: Vec<Pose>) -> Self {
        let positions: Vec<f64> = poses
            .iter()
            .flat_map(|p| [p.position.x, p.position.y, p.position.z])
            .collect();
        SeedDatabase {
            chain_hash,
            world_hash,
            dof,
            configs,
            poses,
            index: KdTree::build(3, positions),
        }
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn dof(&self) -> usize {
        self.dof
    }

    pub fn chain_hash(&self) -> u64 {
        self.chain_hash
    }

    pub fn world_hash(&self) -> u64 {
        self.world_hash
    }

    /// Whether the database was built for this chain and world.
    pub fn matches(&self, scene: &Scene) -> bool {
        self.chain_hash == scene.chain.content_hash() && self.world_hash == scene.world.content_hash()
    }

    pub fn config(&self, i: usize) -> &[f64] {
        &self.configs[i * self.dof..(i + 1) * self.dof]
    }

    pub fn entry(&self, i: usize) -> (Pose, JointConfig) {
        (self.poses[i], self.config(i).into())
    }

    /// The `k` stored configurations whose end-effector positions are nearest
    /// to `target.position`, nearest first, ties by insertion order. `k` larger
    /// than the database returns everything.
    pub fn query_seeds(&self, target: &Pose, k: usize) -> Result<Vec<JointConfig>> {
        if k == 0 {
            return Err(Error::invalid("K must be at least 1"));
        }
        let p = target.position;
        Ok(self
            .index
            .k_nearest(&[p.x, p.y, p.z], k)
            .into_iter()
            .map(|(i, _)| self.config(i).into())
            .collect())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(VERSION)?;
        w.write_u64::<LittleEndian>(self.chain_hash)?;
        w.write_u64::<LittleEndian>(self.world_hash)?;
        w.write_u32::<LittleEndian>(self.dof as u32)?;
        w.write_u64::<LittleEndian>(self.len() as u64)?;
        for i in 0..self.len() {
            for v in self.config(i) {
                w.write_f64::<LittleEndian>(*v)?;
            }
            for v in self.poses[i].to_array() {
                w.write_f64::<LittleEndian>(v)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bad = |msg: &str| Error::format(path, msg);
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(bad("not a seed database"));
        }
        if r.read_u32::<LittleEndian>()? != VERSION {
            return Err(bad("unsupported seed database version"));
        }
        let chain_hash = r.read_u64::<LittleEndian>()?;
        let world_hash = r.read_u64::<LittleEndian>()?;
        let dof = r.read_u32::<LittleEndian>()? as usize;
        let count = r.read_u64::<LittleEndian>()? as usize;
        if dof == 0 || count == 0 {
            return Err(bad("empty seed database"));
        }
        let mut configs = Vec::with_capacity(count * dof);
        let mut poses = Vec::with_capacity(count);
        for _ in 0..count {
            for _ in 0..dof {
                configs.push(r.read_f64::<LittleEndian>()?);
            }
            let mut p = [0.0; 7];
            for v in p.iter_mut() {
                *v = r.read_f64::<LittleEndian>()?;
            }
            poses.push(Pose::from_array(p).map_err(|e| bad(&e.to_string()))?);
        }
        Ok(Self::assemble(chain_hash, world_hash, dof, configs, poses))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collision::{make_environment, Aabb, EnvironmentKind, Sphere, World};
    use crate::kinematics::SerialChain;
    use rand::Rng;

    #[test]
    fn empty_world_planar() {
        let scene = Scene::new(SerialChain::planar_2dof(), World::empty(Aabb::cube(3.0)));
        let db = SeedDatabase::build(&scene, 100, 1).unwrap();
        assert_eq!(db.len(), 100);
        for i in 0..db.len() {
            assert!(scene.chain.within_limits(db.config(i)));
        }
    }

    #[test]
    fn stored_poses_match_fk() {
        let chain = SerialChain::generic_6dof();
        let scene = Scene::new(chain.clone(), make_environment(EnvironmentKind::Random, 1.3, 2).unwrap());
        let db = SeedDatabase::build(&scene, 1000, 2).unwrap();
        for i in 0..db.len() {
            let (pose, q) = db.entry(i);
            assert!(scene.is_free(&q));
            let fk = chain.forward_kinematics(&q).unwrap();
            assert!((fk.position - pose.position).norm() < 1e-9);
            assert!(fk.orientation.angle_to(&pose.orientation) < 1e-9);
        }
    }

    #[test]
    fn fully_blocked_world_is_infeasible() {
        let world = World::new(vec![Sphere::new([0.0; 3], 100.0)], Aabb::cube(100.0)).unwrap();
        let scene = Scene::new(SerialChain::planar_2dof(), world);
        assert!(matches!(
            SeedDatabase::build(&scene, 10, 0),
            Err(Error::InfeasibleWorld { accepted: 0, .. })
        ));
    }

    #[test]
    fn query_matches_linear_scan() {
        let chain = SerialChain::generic_6dof();
        let scene = Scene::new(chain, World::empty(Aabb::cube(2.0)));
        let db = SeedDatabase::build(&scene, 100_000, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..50 {
            let p = nalgebra::Vector3::new(
                rng.random_range(-1.3..1.3),
                rng.random_range(-1.3..1.3),
                rng.random_range(-1.3..1.3),
            );
            let target = Pose::from_position(p);
            let mut scan: Vec<(f64, usize)> = (0..db.len())
                .map(|i| ((db.poses[i].position - p).norm_squared(), i))
                .collect();
            scan.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let got = db.query_seeds(&target, 10).unwrap();
            let want: Vec<JointConfig> = scan[..10].iter().map(|(_, i)| db.config(*i).into()).collect();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn exact_match_and_exhaustive_queries() {
        let scene = Scene::new(SerialChain::planar_2dof(), World::empty(Aabb::cube(3.0)));
        let db = SeedDatabase::build(&scene, 50, 9).unwrap();
        let (pose, q) = db.entry(13);
        assert_eq!(db.query_seeds(&pose, 1).unwrap(), vec![q]);
        let all = db.query_seeds(&pose, 50).unwrap();
        assert_eq!(all.len(), 50);
        let more = db.query_seeds(&pose, 500).unwrap();
        assert_eq!(more, all);
        let d: Vec<f64> = all
            .iter()
            .map(|c| (scene.chain.forward_kinematics(c).unwrap().position - pose.position).norm())
            .collect();
        assert!(d.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn file_roundtrip() {
        let scene = Scene::new(SerialChain::generic_7dof(), World::empty(Aabb::cube(2.0)));
        let db = SeedDatabase::build(&scene, 300, 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("seeds.bin");
        db.save(&path).unwrap();
        let back = SeedDatabase::load(&path).unwrap();
        assert!(back.matches(&scene));
        assert_eq!(back.len(), 300);
        assert_eq!(back.configs, db.configs);
        std::fs::write(&path, b"garbage!").unwrap();
        assert!(SeedDatabase::load(&path).is_err());
    }
}
