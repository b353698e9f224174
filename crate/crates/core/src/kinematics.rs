//! Revolute serial chains: forward kinematics, geometric Jacobian and joint limits.
//!
//! A chain is a list of links. Link `j` rotates about its own `axis` by `q[j]`
//! and then translates by its fixed `offset`, both expressed in the frame left
//! by link `j - 1`:
//!
//! ```text
//! T(q) = R(axis_0, q_0) * Tr(offset_0) * R(axis_1, q_1) * Tr(offset_1) * ...
//! ```
//!
//! The end-effector frame is the frame after the last offset.

use std::f64::consts::PI;
use std::fmt;
use std::ops::Deref;
use std::path::Path;

use nalgebra::{Isometry3, Matrix6xX, Translation3, Unit, UnitQuaternion, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Euclidean distance between two joint vectors.
#[inline]
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// A point in configuration space (joint angles in radians).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointConfig(Vec<f64>);

impl JointConfig {
    pub fn new(values: Vec<f64>) -> Self {
        JointConfig(values)
    }

    pub fn zeros(dof: usize) -> Self {
        JointConfig(vec![0.0; dof])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn distance(&self, other: &[f64]) -> f64 {
        distance(&self.0, other)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Deref for JointConfig {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for JointConfig {
    fn from(values: Vec<f64>) -> Self {
        JointConfig(values)
    }
}

impl From<&[f64]> for JointConfig {
    fn from(values: &[f64]) -> Self {
        JointConfig(values.to_vec())
    }
}

impl fmt::Display for JointConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|v| format!("{v:.6}")).collect();
        write!(f, "[{}]", parts.join(", "))
    }
}

/// End-effector pose: position in meters and a unit quaternion.
///
/// Serialized as `[x, y, z, qw, qx, qy, qz]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 7]", try_from = "[f64; 7]")]
pub struct Pose {
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
}

impl Pose {
    pub fn new(position: Vector3<f64>, orientation: UnitQuaternion<f64>) -> Self {
        Pose {
            position,
            orientation,
        }
    }

    pub fn from_position(position: Vector3<f64>) -> Self {
        Pose::new(position, UnitQuaternion::identity())
    }

    /// Builds a pose from `[x, y, z, qw, qx, qy, qz]`; the quaternion is normalized.
    pub fn from_array(v: [f64; 7]) -> Result<Self> {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("pose contains non-finite values"));
        }
        let q = nalgebra::Quaternion::new(v[3], v[4], v[5], v[6]);
        if q.norm() < 1e-12 {
            return Err(Error::invalid("pose quaternion has zero norm"));
        }
        Ok(Pose::new(
            Vector3::new(v[0], v[1], v[2]),
            UnitQuaternion::from_quaternion(q),
        ))
    }

    pub fn to_array(&self) -> [f64; 7] {
        let q = self.orientation.quaternion();
        [
            self.position.x,
            self.position.y,
            self.position.z,
            q.w,
            q.i,
            q.j,
            q.k,
        ]
    }

    pub fn isometry(&self) -> Isometry3<f64> {
        Isometry3::from_parts(Translation3::from(self.position), self.orientation)
    }
}

impl From<Pose> for [f64; 7] {
    fn from(p: Pose) -> Self {
        p.to_array()
    }
}

impl TryFrom<[f64; 7]> for Pose {
    type Error = Error;

    fn try_from(v: [f64; 7]) -> Result<Self> {
        Pose::from_array(v)
    }
}

/// Twist-like error that takes `current` to `target`: translation difference
/// followed by the log-map (scaled axis) of the relative rotation, both in the
/// world frame.
pub fn pose_error(current: &Pose, target: &Pose) -> Vector6<f64> {
    let dp = target.position - current.position;
    let dr = (target.orientation * current.orientation.inverse()).scaled_axis();
    Vector6::new(dp.x, dp.y, dp.z, dr.x, dr.y, dr.z)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointLimit {
    pub min: f64,
    pub max: f64,
}

impl JointLimit {
    pub fn new(min: f64, max: f64) -> Self {
        JointLimit { min, max }
    }

    pub fn width(&self) -> f64 {
        self.max - self.min
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }
}

/// One revolute link: joint axis (unit) and the fixed translation that follows it.
#[derive(Clone, Debug, PartialEq)]
pub struct Link {
    pub axis: Unit<Vector3<f64>>,
    pub offset: Vector3<f64>,
    pub limit: JointLimit,
}

/// Record layout of one link in a chain file.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct LinkRecord {
    axis: [f64; 3],
    offset: [f64; 3],
    limits: [f64; 2],
}

/// Chain file layout, see `SerialChain::load`.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct ChainRecord {
    name: String,
    #[serde(rename = "link")]
    links: Vec<LinkRecord>,
}

/// Kinematic description of an m-DoF revolute serial manipulator.
#[derive(Clone, Debug, PartialEq)]
pub struct SerialChain {
    name: String,
    links: Vec<Link>,
    reach: f64,
}

impl SerialChain {
    /// Validates and builds a chain. Axes are normalized; `reach` is the sum of
    /// link offset lengths, i.e. the distance to the end effector when every
    /// offset is collinear.
    pub fn new(name: impl Into<String>, links: Vec<(Vector3<f64>, Vector3<f64>, JointLimit)>) -> Result<Self> {
        if links.is_empty() {
            return Err(Error::invalid("a chain needs at least one link"));
        }
        let mut out = Vec::with_capacity(links.len());
        for (j, (axis, offset, limit)) in links.into_iter().enumerate() {
            let norm = axis.norm();
            if !(norm.is_finite() && norm > 1e-12) {
                return Err(Error::invalid(format!("link {j}: joint axis must be nonzero")));
            }
            if !offset.iter().all(|v| v.is_finite()) {
                return Err(Error::invalid(format!("link {j}: offset must be finite")));
            }
            if !(limit.min.is_finite() && limit.max.is_finite() && limit.min < limit.max) {
                return Err(Error::invalid(format!(
                    "link {j}: joint limits need min < max (got [{}, {}])",
                    limit.min, limit.max
                )));
            }
            out.push(Link {
                axis: Unit::new_normalize(axis),
                offset,
                limit,
            });
        }
        let reach = out.iter().map(|l| l.offset.norm()).sum::<f64>();
        if reach <= 0.0 {
            return Err(Error::invalid("chain has zero reach"));
        }
        Ok(SerialChain {
            name: name.into(),
            links: out,
            reach,
        })
    }

    /// Two-link planar arm (both joints about z, unit links), reach 2.
    pub fn planar_2dof() -> Self {
        let lim = JointLimit::new(-PI, PI);
        SerialChain::new(
            "planar2",
            vec![
                (Vector3::z(), Vector3::x(), lim),
                (Vector3::z(), Vector3::x(), lim),
            ],
        )
        .expect("valid reference chain")
    }

    /// Generic 6R arm, straight up at q = 0, reach 1.3 m.
    pub fn generic_6dof() -> Self {
        let lim = JointLimit::new(-PI, PI);
        let up = |h: f64| Vector3::new(0.0, 0.0, h);
        SerialChain::new(
            "generic6",
            vec![
                (Vector3::z(), up(0.18), lim),
                (Vector3::y(), up(0.55), lim),
                (Vector3::y(), up(0.45), lim),
                (Vector3::y(), up(0.06), lim),
                (Vector3::z(), up(0.04), lim),
                (Vector3::y(), up(0.02), lim),
            ],
        )
        .expect("valid reference chain")
    }

    /// Generic 7R redundant arm, straight up at q = 0, reach 0.85 m.
    pub fn generic_7dof() -> Self {
        let yaw = JointLimit::new(-2.9, 2.9);
        let pitch = JointLimit::new(-2.2, 2.2);
        let up = |h: f64| Vector3::new(0.0, 0.0, h);
        SerialChain::new(
            "generic7",
            vec![
                (Vector3::z(), up(0.15), yaw),
                (Vector3::y(), up(0.16), pitch),
                (Vector3::z(), up(0.16), yaw),
                (Vector3::y(), up(0.16), pitch),
                (Vector3::z(), up(0.11), yaw),
                (Vector3::y(), up(0.07), pitch),
                (Vector3::z(), up(0.04), yaw),
            ],
        )
        .expect("valid reference chain")
    }

    /// Looks up one of the shipped chains by name.
    pub fn reference(name: &str) -> Option<Self> {
        match name {
            "planar2" => Some(Self::planar_2dof()),
            "generic6" => Some(Self::generic_6dof()),
            "generic7" => Some(Self::generic_7dof()),
            _ => None,
        }
    }

    /// Resolves a chain argument: a reference name or a path to a chain file.
    pub fn resolve(spec: &str) -> Result<Self> {
        match Self::reference(spec) {
            Some(chain) => Ok(chain),
            None => Self::load(spec),
        }
    }

    /// Parses a chain from TOML text:
    ///
    /// ```toml
    /// name = "planar2"
    ///
    /// [[link]]
    /// axis = [0.0, 0.0, 1.0]     # joint rotation axis
    /// offset = [1.0, 0.0, 0.0]   # translation after the joint, meters
    /// limits = [-3.14159, 3.14159]
    /// ```
    pub fn from_toml_str(text: &str) -> std::result::Result<Self, String> {
        let rec: ChainRecord = toml::from_str(text).map_err(|e| e.to_string())?;
        let links = rec
            .links
            .iter()
            .map(|l| {
                (
                    Vector3::from(l.axis),
                    Vector3::from(l.offset),
                    JointLimit::new(l.limits[0], l.limits[1]),
                )
            })
            .collect();
        SerialChain::new(rec.name, links).map_err(|e| e.to_string())
    }

    pub fn to_toml_string(&self) -> String {
        let rec = ChainRecord {
            name: self.name.clone(),
            links: self
                .links
                .iter()
                .map(|l| LinkRecord {
                    axis: [l.axis.x, l.axis.y, l.axis.z],
                    offset: [l.offset.x, l.offset.y, l.offset.z],
                    limits: [l.limit.min, l.limit.max],
                })
                .collect(),
        };
        toml::to_string(&rec).expect("chain record serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| Error::format(path, e))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_toml_string())?;
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dof(&self) -> usize {
        self.links.len()
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn reach(&self) -> f64 {
        self.reach
    }

    pub fn limits(&self) -> impl Iterator<Item = JointLimit> + '_ {
        self.links.iter().map(|l| l.limit)
    }

    /// Stable identifier of the chain geometry, used to key seed databases.
    pub fn content_hash(&self) -> u64 {
        crate::collision::stable_hash(self.to_toml_string().as_bytes())
    }

    pub fn check_dims(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.dof() {
            return Err(Error::DimensionMismatch {
                expected: self.dof(),
                got: q.len(),
            });
        }
        Ok(())
    }

    pub fn within_limits(&self, q: &[f64]) -> bool {
        q.len() == self.dof() && self.links.iter().zip(q).all(|(l, v)| l.limit.contains(*v))
    }

    /// Componentwise projection onto the joint-limit box.
    pub fn clamp_to_limits(&self, q: &[f64]) -> Result<JointConfig> {
        self.check_dims(q)?;
        Ok(self
            .links
            .iter()
            .zip(q)
            .map(|(l, v)| v.clamp(l.limit.min, l.limit.max))
            .collect::<Vec<_>>()
            .into())
    }

    pub(crate) fn clamp_in_place(&self, q: &mut [f64]) {
        for (l, v) in self.links.iter().zip(q.iter_mut()) {
            *v = v.clamp(l.limit.min, l.limit.max);
        }
    }

    /// Frame of every link after its joint rotation (origin at the joint),
    /// followed by the end-effector frame. Length is `dof + 1`.
    ///
    /// No dimension check; callers must pass `dof` values.
    pub(crate) fn frames(&self, q: &[f64]) -> Vec<Isometry3<f64>> {
        let mut out = Vec::with_capacity(self.dof() + 1);
        let mut t = Isometry3::identity();
        for (link, &angle) in self.links.iter().zip(q) {
            t.rotation *= UnitQuaternion::from_axis_angle(&link.axis, angle);
            out.push(t);
            t.translation.vector += t.rotation * link.offset;
        }
        out.push(t);
        out
    }

    /// End-effector pose `x = f(q)`.
    pub fn forward_kinematics(&self, q: &[f64]) -> Result<Pose> {
        self.check_dims(q)?;
        Ok(self.fk_unchecked(q))
    }

    pub(crate) fn fk_unchecked(&self, q: &[f64]) -> Pose {
        let mut t = Isometry3::<f64>::identity();
        for (link, &angle) in self.links.iter().zip(q) {
            t.rotation *= UnitQuaternion::from_axis_angle(&link.axis, angle);
            t.translation.vector += t.rotation * link.offset;
        }
        Pose::new(t.translation.vector, t.rotation)
    }

    /// Geometric Jacobian (6 × dof). Rows 0..3 are linear velocity of the
    /// end effector, rows 3..6 angular velocity, both in the world frame.
    pub fn jacobian(&self, q: &[f64]) -> Result<Matrix6xX<f64>> {
        self.check_dims(q)?;
        Ok(self.jacobian_unchecked(q).1)
    }

    pub(crate) fn jacobian_unchecked(&self, q: &[f64]) -> (Pose, Matrix6xX<f64>) {
        let frames = self.frames(q);
        let ee = frames[self.dof()];
        let p_ee = ee.translation.vector;
        let mut jac = Matrix6xX::zeros(self.dof());
        for (j, link) in self.links.iter().enumerate() {
            let axis = frames[j].rotation * link.axis.into_inner();
            let lin = axis.cross(&(p_ee - frames[j].translation.vector));
            jac.fixed_view_mut::<3, 1>(0, j).copy_from(&lin);
            jac.fixed_view_mut::<3, 1>(3, j).copy_from(&axis);
        }
        (Pose::new(p_ee, ee.rotation), jac)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Matrix4;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Independent FK: product of 4x4 homogeneous transforms with Rodrigues rotations.
    fn fk_homogeneous(chain: &SerialChain, q: &[f64]) -> Matrix4<f64> {
        let mut t = Matrix4::identity();
        for (link, &a) in chain.links().iter().zip(q) {
            let k = link.axis.into_inner();
            let kx = nalgebra::Matrix3::new(0.0, -k.z, k.y, k.z, 0.0, -k.x, -k.y, k.x, 0.0);
            let r = nalgebra::Matrix3::identity() + kx * a.sin() + kx * kx * (1.0 - a.cos());
            let mut rot = Matrix4::identity();
            rot.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
            let mut tr = Matrix4::identity();
            tr.fixed_view_mut::<3, 1>(0, 3).copy_from(&link.offset);
            t = t * rot * tr;
        }
        t
    }

    fn random_q(chain: &SerialChain, rng: &mut impl Rng) -> Vec<f64> {
        chain
            .limits()
            .map(|l| rng.random_range(l.min..=l.max))
            .collect()
    }

    #[test]
    fn planar_straight_and_rotated() {
        let chain = SerialChain::planar_2dof();
        let p = chain.forward_kinematics(&[0.0, 0.0]).unwrap();
        assert_relative_eq!(p.position, Vector3::new(2.0, 0.0, 0.0), epsilon = 1e-12);
        assert_relative_eq!(p.orientation.angle(), 0.0, epsilon = 1e-12);

        let p = chain.forward_kinematics(&[PI / 2.0, 0.0]).unwrap();
        assert_relative_eq!(p.position, Vector3::new(0.0, 2.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn fk_matches_homogeneous_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for chain in [
            SerialChain::planar_2dof(),
            SerialChain::generic_6dof(),
            SerialChain::generic_7dof(),
        ] {
            for _ in 0..1000 {
                let q = random_q(&chain, &mut rng);
                let pose = chain.forward_kinematics(&q).unwrap();
                let t = fk_homogeneous(&chain, &q);
                let pos = t.fixed_view::<3, 1>(0, 3).into_owned();
                assert!((pose.position - pos).amax() < 1e-9);
                let rot = pose.orientation.to_rotation_matrix().into_inner();
                assert!((rot - t.fixed_view::<3, 3>(0, 0)).amax() < 1e-9);
            }
        }
    }

    #[test]
    fn reach_is_straightened_extension() {
        for chain in [
            SerialChain::planar_2dof(),
            SerialChain::generic_6dof(),
            SerialChain::generic_7dof(),
        ] {
            let p = chain.forward_kinematics(&vec![0.0; chain.dof()]).unwrap();
            assert!((p.position.norm() - chain.reach()).abs() < 1e-9, "{}", chain.name());
        }
        assert_relative_eq!(SerialChain::generic_6dof().reach(), 1.3, epsilon = 1e-12);
        assert_relative_eq!(SerialChain::generic_7dof().reach(), 0.85, epsilon = 1e-12);
    }

    #[test]
    fn planar_jacobian_at_zero() {
        let chain = SerialChain::planar_2dof();
        let j = chain.jacobian(&[0.0, 0.0]).unwrap();
        assert_eq!(j.shape(), (6, 2));
        assert_relative_eq!(j.fixed_view::<3, 1>(0, 0).into_owned(), Vector3::new(0.0, 2.0, 0.0), epsilon = 1e-12);
        assert_relative_eq!(j.fixed_view::<3, 1>(0, 1).into_owned(), Vector3::new(0.0, 1.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = 1e-6;
        for chain in [
            SerialChain::planar_2dof(),
            SerialChain::generic_6dof(),
            SerialChain::generic_7dof(),
        ] {
            for _ in 0..100 {
                let q = random_q(&chain, &mut rng);
                let jac = chain.jacobian(&q).unwrap();
                assert_eq!(jac.shape(), (6, chain.dof()));
                let base = chain.forward_kinematics(&q).unwrap();
                for j in 0..chain.dof() {
                    let mut qp = q.clone();
                    let mut qm = q.clone();
                    qp[j] += h;
                    qm[j] -= h;
                    let pp = chain.forward_kinematics(&qp).unwrap();
                    let pm = chain.forward_kinematics(&qm).unwrap();
                    let dpos = (pp.position - pm.position) / (2.0 * h);
                    // angular velocity from the relative rotation of the two samples
                    let dang = (pp.orientation * pm.orientation.inverse()).scaled_axis() / (2.0 * h);
                    for r in 0..3 {
                        assert!((jac[(r, j)] - dpos[r]).abs() < 1e-5);
                        assert!((jac[(r + 3, j)] - dang[r]).abs() < 1e-5);
                    }
                }
                let _ = base;
            }
        }
    }

    #[test]
    fn clamp_behaviour() {
        let chain = SerialChain::planar_2dof();
        let inside = [0.3, -1.0];
        assert_eq!(chain.clamp_to_limits(&inside).unwrap().as_slice(), &inside);
        let out = chain.clamp_to_limits(&[PI + 0.5, 0.0]).unwrap();
        assert_eq!(out[0], PI);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let q: Vec<f64> = (0..2).map(|_| rng.random_range(-10.0..10.0)).collect();
            let once = chain.clamp_to_limits(&q).unwrap();
            let twice = chain.clamp_to_limits(&once).unwrap();
            assert_eq!(once, twice);
            assert!(chain.within_limits(&once));
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let chain = SerialChain::generic_6dof();
        assert!(matches!(
            chain.forward_kinematics(&[0.0; 3]),
            Err(Error::DimensionMismatch { expected: 6, got: 3 })
        ));
        assert!(chain.jacobian(&[0.0; 7]).is_err());
        assert!(chain.clamp_to_limits(&[0.0]).is_err());
    }

    #[test]
    fn invalid_chains_are_rejected() {
        let bad_limit = JointLimit::new(1.0, -1.0);
        assert!(SerialChain::new("x", vec![(Vector3::z(), Vector3::x(), bad_limit)]).is_err());
        let ok = JointLimit::new(-1.0, 1.0);
        assert!(SerialChain::new("x", vec![(Vector3::zeros(), Vector3::x(), ok)]).is_err());
        assert!(SerialChain::new("x", vec![]).is_err());
    }

    #[test]
    fn chain_file_roundtrip() {
        let chain = SerialChain::generic_7dof();
        let text = chain.to_toml_string();
        assert!(text.contains("[[link]]"));
        let back = SerialChain::from_toml_str(&text).unwrap();
        assert_eq!(back, chain);
        assert_eq!(back.content_hash(), chain.content_hash());
        assert_ne!(chain.content_hash(), SerialChain::generic_6dof().content_hash());
    }

    #[test]
    fn pose_array_normalizes_quaternion() {
        let p = Pose::from_array([1.0, 2.0, 3.0, 2.0, 0.0, 0.0, 0.0]).unwrap();
        assert_relative_eq!(p.orientation.quaternion().norm(), 1.0, epsilon = 1e-12);
        assert!(Pose::from_array([0.0; 7]).is_err());
        let json = serde_json::to_string(&p).unwrap();
        let back: Pose = serde_json::from_str(&json).unwrap();
        assert_relative_eq!(back.position, p.position);
    }

    #[test]
    fn pose_error_zero_at_target() {
        let chain = SerialChain::generic_6dof();
        let p = chain.forward_kinematics(&[0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap();
        assert!(pose_error(&p, &p).norm() < 1e-12);
    }
}
