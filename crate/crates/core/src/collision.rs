//! Sphere-based collision model: obstacle worlds, the robot's sphere cover,
//! point and edge validity, and the benchmark environment generators.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::kinematics::{distance, SerialChain};
use crate::{Error, Result};

/// First 8 bytes of SHA-256, little endian.
pub fn stable_hash(bytes: &[u8]) -> u64 {
    let digest = Sha256::digest(bytes);
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(head)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sphere {
    pub center: [f64; 3],
    pub radius: f64,
}

impl Sphere {
    pub fn new(center: [f64; 3], radius: f64) -> Self {
        Sphere { center, radius }
    }

    pub fn center(&self) -> Vector3<f64> {
        Vector3::from(self.center)
    }

    #[inline]
    pub fn intersects(&self, center: &Vector3<f64>, radius: f64) -> bool {
        let d = self.center() - center;
        let r = self.radius + radius;
        d.norm_squared() < r * r
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn cube(half: f64) -> Self {
        Aabb {
            min: [-half; 3],
            max: [half; 3],
        }
    }
}

/// Uniform-grid broadphase over obstacle spheres, stored as CSR buckets.
#[derive(Clone, Debug, Default)]
struct SphereGrid {
    origin: [f64; 3],
    cell: f64,
    dims: [usize; 3],
    starts: Vec<u32>,
    ids: Vec<u32>,
}

impl SphereGrid {
    fn build(spheres: &[Sphere]) -> Self {
        if spheres.is_empty() {
            return SphereGrid::default();
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        let mut rmax: f64 = 0.0;
        for s in spheres {
            rmax = rmax.max(s.radius);
            for a in 0..3 {
                lo[a] = lo[a].min(s.center[a] - s.radius);
                hi[a] = hi[a].max(s.center[a] + s.radius);
            }
        }
        let extent = (0..3).map(|a| hi[a] - lo[a]).fold(0.0, f64::max);
        let cell = (2.0 * rmax).max(extent / 48.0).max(1e-9);
        let dims = [0, 1, 2].map(|a| (((hi[a] - lo[a]) / cell).floor() as usize + 1).max(1));
        let ncells = dims[0] * dims[1] * dims[2];
        let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); ncells];
        let grid = SphereGrid {
            origin: lo,
            cell,
            dims,
            starts: Vec::new(),
            ids: Vec::new(),
        };
        for (i, s) in spheres.iter().enumerate() {
            if let Some(r) = grid.cell_range(&s.center(), s.radius) {
                for x in r[0].0..=r[0].1 {
                    for y in r[1].0..=r[1].1 {
                        for z in r[2].0..=r[2].1 {
                            buckets[grid.flat(x, y, z)].push(i as u32);
                        }
                    }
                }
            }
        }
        let mut starts = Vec::with_capacity(ncells + 1);
        let mut ids = Vec::new();
        for b in &buckets {
            starts.push(ids.len() as u32);
            ids.extend_from_slice(b);
        }
        starts.push(ids.len() as u32);
        SphereGrid { starts, ids, ..grid }
    }

    #[inline]
    fn flat(&self, x: usize, y: usize, z: usize) -> usize {
        (x * self.dims[1] + y) * self.dims[2] + z
    }

    /// Inclusive cell index range covered by the box of a sphere, or `None`
    /// when it misses the grid entirely.
    fn cell_range(&self, c: &Vector3<f64>, r: f64) -> Option<[(usize, usize); 3]> {
        let mut out = [(0, 0); 3];
        for a in 0..3 {
            let lo = ((c[a] - r - self.origin[a]) / self.cell).floor();
            let hi = ((c[a] + r - self.origin[a]) / self.cell).floor();
            let max = (self.dims[a] - 1) as f64;
            if hi < 0.0 || lo > max {
                return None;
            }
            out[a] = (lo.max(0.0) as usize, hi.min(max) as usize);
        }
        Some(out)
    }

    fn any_hit(&self, spheres: &[Sphere], c: &Vector3<f64>, r: f64) -> bool {
        if self.ids.is_empty() {
            return false;
        }
        let Some(range) = self.cell_range(c, r) else {
            return false;
        };
        for x in range[0].0..=range[0].1 {
            for y in range[1].0..=range[1].1 {
                for z in range[2].0..=range[2].1 {
                    let cell = self.flat(x, y, z);
                    let (s, e) = (self.starts[cell] as usize, self.starts[cell + 1] as usize);
                    if self.ids[s..e]
                        .iter()
                        .any(|&i| spheres[i as usize].intersects(c, r))
                    {
                        return true;
                    }
                }
            }
        }
        false
    }
}

#[derive(Serialize, Deserialize)]
struct WorldRecord {
    bounds: Aabb,
    obstacles: Vec<Sphere>,
}

/// Obstacle spheres plus the workspace box; defines C_free together with a
/// robot sphere model.
#[derive(Clone, Debug)]
pub struct World {
    obstacles: Vec<Sphere>,
    bounds: Aabb,
    grid: SphereGrid,
}

impl PartialEq for World {
    fn eq(&self, other: &Self) -> bool {
        self.obstacles == other.obstacles && self.bounds == other.bounds
    }
}

impl World {
    pub fn new(obstacles: Vec<Sphere>, bounds: Aabb) -> Result<Self> {
        for (i, s) in obstacles.iter().enumerate() {
            if !(s.radius > 0.0 && s.radius.is_finite()) {
                return Err(Error::invalid(format!("obstacle {i}: radius must be positive")));
            }
            if s.center.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("obstacle {i}: center must be finite")));
            }
        }
        let grid = SphereGrid::build(&obstacles);
        Ok(World {
            obstacles,
            bounds,
            grid,
        })
    }

    pub fn empty(bounds: Aabb) -> Self {
        World::new(Vec::new(), bounds).expect("empty world is valid")
    }

    pub fn obstacles(&self) -> &[Sphere] {
        &self.obstacles
    }

    pub fn bounds(&self) -> &Aabb {
        &self.bounds
    }

    /// Whether a sphere overlaps any obstacle (grid-accelerated).
    pub fn sphere_hits(&self, center: &Vector3<f64>, radius: f64) -> bool {
        self.grid.any_hit(&self.obstacles, center, radius)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&WorldRecord {
            bounds: self.bounds,
            obstacles: self.obstacles.clone(),
        })
        .expect("world serializes")
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, String> {
        let rec: WorldRecord = serde_json::from_str(text).map_err(|e| e.to_string())?;
        World::new(rec.obstacles, rec.bounds).map_err(|e| e.to_string())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        World::from_json(&text).map_err(|e| Error::format(path, e))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn content_hash(&self) -> u64 {
        stable_hash(self.to_json().as_bytes())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkSphere {
    pub center: [f64; 3],
    pub radius: f64,
}

/// Robot side of the collision model: spheres attached to each link frame.
#[derive(Clone, Debug, PartialEq)]
pub struct RobotSphereModel {
    links: Vec<Vec<LinkSphere>>,
    /// Per-link bounding sphere (center, radius) for early rejection.
    bounds: Vec<(Vector3<f64>, f64)>,
}

/// Robot sphere radius as a fraction of chain reach.
pub const DEFAULT_ROBOT_RADIUS_FRACTION: f64 = 0.05;

impl RobotSphereModel {
    /// Covers every link segment (joint origin to joint origin + offset) with
    /// equal spheres of `radius`, spaced at most `radius` apart so neighbours
    /// always overlap. Zero-length links get a single sphere.
    pub fn for_chain(chain: &SerialChain, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::invalid("robot sphere radius must be positive"));
        }
        let links = chain
            .links()
            .iter()
            .map(|link| {
                let len = link.offset.norm();
                let n = if len < 1e-12 {
                    1
                } else {
                    ((len / radius).ceil() as usize + 1).max(3)
                };
                (0..n)
                    .map(|i| {
                        let t = if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
                        let c = link.offset * t;
                        LinkSphere {
                            center: [c.x, c.y, c.z],
                            radius,
                        }
                    })
                    .collect()
            })
            .collect();
        RobotSphereModel::from_link_spheres(links)
    }

    pub fn default_for(chain: &SerialChain) -> Self {
        Self::for_chain(chain, DEFAULT_ROBOT_RADIUS_FRACTION * chain.reach())
            .expect("positive reach gives a valid model")
    }

    pub fn from_link_spheres(links: Vec<Vec<LinkSphere>>) -> Result<Self> {
        if links.iter().any(|l| l.is_empty()) {
            return Err(Error::invalid("every link needs at least one sphere"));
        }
        let bounds = links
            .iter()
            .map(|spheres| {
                let n = spheres.len() as f64;
                let c = spheres
                    .iter()
                    .fold(Vector3::zeros(), |acc, s| acc + Vector3::from(s.center))
                    / n;
                let r = spheres
                    .iter()
                    .map(|s| (Vector3::from(s.center) - c).norm() + s.radius)
                    .fold(0.0, f64::max);
                (c, r)
            })
            .collect();
        Ok(RobotSphereModel { links, bounds })
    }

    pub fn link_spheres(&self) -> &[Vec<LinkSphere>] {
        &self.links
    }

    pub fn dof(&self) -> usize {
        self.links.len()
    }
}

/// `true` iff `q` respects joint limits and no robot sphere placed by forward
/// kinematics intersects an obstacle. Self-collision is not modelled.
pub fn is_free(chain: &SerialChain, model: &RobotSphereModel, world: &World, q: &[f64]) -> bool {
    if !chain.within_limits(q) || model.dof() != chain.dof() {
        return false;
    }
    if world.obstacles.is_empty() {
        return true;
    }
    let frames = chain.frames(q);
    for (j, spheres) in model.links.iter().enumerate() {
        let frame = &frames[j];
        let (bc, br) = &model.bounds[j];
        if !world.sphere_hits(&frame.transform_point(&(*bc).into()).coords, *br) {
            continue;
        }
        for s in spheres {
            let c = frame.transform_point(&Vector3::from(s.center).into()).coords;
            if world.sphere_hits(&c, s.radius) {
                return false;
            }
        }
    }
    true
}

/// Reference all-pairs check without broadphase or link bounds.
pub fn is_free_brute_force(
    chain: &SerialChain,
    model: &RobotSphereModel,
    world: &World,
    q: &[f64],
) -> bool {
    if !chain.within_limits(q) {
        return false;
    }
    let frames = chain.frames(q);
    for (j, spheres) in model.links.iter().enumerate() {
        for s in spheres {
            let c = frames[j].transform_point(&Vector3::from(s.center).into()).coords;
            if world.obstacles.iter().any(|o| o.intersects(&c, s.radius)) {
                return false;
            }
        }
    }
    true
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Less => return true,
            std::cmp::Ordering::Greater => return false,
            std::cmp::Ordering::Equal => {}
        }
    }
    false
}

/// Checks the straight joint-space segment `a → b` at
/// `t ∈ {0, Δ, 2Δ, …} ∪ {1}`, `Δ = resolution / ‖b − a‖`.
///
/// Samples are always generated from the lexicographically smaller endpoint,
/// so the result is symmetric in its arguments.
pub fn edge_free(
    chain: &SerialChain,
    model: &RobotSphereModel,
    world: &World,
    a: &[f64],
    b: &[f64],
    resolution: f64,
) -> bool {
    debug_assert!(resolution > 0.0);
    let (a, b) = if lex_less(b, a) { (b, a) } else { (a, b) };
    if world.obstacles.is_empty() {
        // the joint box is convex
        return chain.within_limits(a) && chain.within_limits(b);
    }
    let len = distance(a, b);
    if !is_free(chain, model, world, b) || !is_free(chain, model, world, a) {
        return false;
    }
    if len == 0.0 {
        return true;
    }
    let dt = resolution / len;
    let mut q = vec![0.0; a.len()];
    let mut k = 1usize;
    loop {
        let t = k as f64 * dt;
        if t >= 1.0 {
            break;
        }
        for (i, v) in q.iter_mut().enumerate() {
            *v = a[i] + t * (b[i] - a[i]);
        }
        if !is_free(chain, model, world, &q) {
            return false;
        }
        k += 1;
    }
    true
}

/// Chain + robot spheres + world: everything a planner needs to validate
/// configurations and edges.
#[derive(Clone, Debug)]
pub struct Scene {
    pub chain: SerialChain,
    pub model: RobotSphereModel,
    pub world: World,
}

impl Scene {
    pub fn new(chain: SerialChain, world: World) -> Self {
        let model = RobotSphereModel::default_for(&chain);
        Scene {
            chain,
            model,
            world,
        }
    }

    pub fn with_model(chain: SerialChain, model: RobotSphereModel, world: World) -> Result<Self> {
        if model.dof() != chain.dof() {
            return Err(Error::DimensionMismatch {
                expected: chain.dof(),
                got: model.dof(),
            });
        }
        Ok(Scene {
            chain,
            model,
            world,
        })
    }

    pub fn dof(&self) -> usize {
        self.chain.dof()
    }

    pub fn is_free(&self, q: &[f64]) -> bool {
        is_free(&self.chain, &self.model, &self.world, q)
    }

    pub fn edge_free(&self, a: &[f64], b: &[f64], resolution: f64) -> bool {
        edge_free(&self.chain, &self.model, &self.world, a, b, resolution)
    }

    /// Uniform sample over the joint-limit box (no collision rejection).
    pub fn sample_uniform(&self, rng: &mut impl Rng) -> Vec<f64> {
        self.chain
            .limits()
            .map(|l| l.min + rng.random::<f64>() * l.width())
            .collect()
    }

    /// Rejection-samples a collision-free configuration.
    pub fn sample_free(&self, rng: &mut impl Rng, max_tries: usize) -> Option<Vec<f64>> {
        (0..max_tries)
            .map(|_| self.sample_uniform(rng))
            .find(|q| self.is_free(q))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvironmentKind {
    /// No obstacles.
    Empty,
    Table,
    Wall,
    Passage,
    Random,
    /// One sphere next to the base of a planar arm that splits C_free into
    /// two components.
    Bifurcated,
}

impl EnvironmentKind {
    pub fn name(&self) -> &'static str {
        match self {
            EnvironmentKind::Empty => "empty",
            EnvironmentKind::Table => "table",
            EnvironmentKind::Wall => "wall",
            EnvironmentKind::Passage => "passage",
            EnvironmentKind::Random => "random",
            EnvironmentKind::Bifurcated => "bifurcated",
        }
    }
}

impl fmt::Display for EnvironmentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvironmentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "empty" => EnvironmentKind::Empty,
            "table" => EnvironmentKind::Table,
            "wall" => EnvironmentKind::Wall,
            "passage" => EnvironmentKind::Passage,
            "random" => EnvironmentKind::Random,
            "bifurcated" => EnvironmentKind::Bifurcated,
            other => return Err(Error::invalid(format!("unknown environment '{other}'"))),
        })
    }
}

/// Default obstacle count of the random environment.
pub const DEFAULT_RANDOM_OBSTACLES: usize = 20;

/// Everything that determines a generated world.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSpec {
    pub kind: EnvironmentKind,
    /// Reach of the arm the world is scaled to (meters).
    pub reach: f64,
    #[serde(default)]
    pub seed: u64,
    /// Obstacle count for `random`.
    #[serde(default = "default_random_count")]
    pub obstacles: usize,
    /// Keep random obstacles in the z = 0 plane (for planar arms).
    #[serde(default)]
    pub planar: bool,
}

fn default_random_count() -> usize {
    DEFAULT_RANDOM_OBSTACLES
}

impl EnvironmentSpec {
    pub fn new(kind: EnvironmentKind, reach: f64, seed: u64) -> Self {
        EnvironmentSpec {
            kind,
            reach,
            seed,
            obstacles: DEFAULT_RANDOM_OBSTACLES,
            planar: false,
        }
    }

    pub fn planar(mut self, planar: bool) -> Self {
        self.planar = planar;
        self
    }

    pub fn with_obstacles(mut self, n: usize) -> Self {
        self.obstacles = n;
        self
    }

    pub fn build(&self) -> Result<World> {
        generate(self)
    }
}

/// Table thickness (sphere radius) as a fraction of reach.
const TABLE_RADIUS: f64 = 0.08;
/// Free disc around the base in which the table has no spheres.
const BASE_CUTOUT: f64 = 0.15;
/// Robot base used to reject random obstacles.
pub const BASE_RADIUS: f64 = 0.15;
const WALL_RADIUS: f64 = 0.05;
const WALL_X: (f64, f64) = (0.2, 1.0);
const WALL_TOP: f64 = 1.0;
/// Centre (x, z) and side of the passage opening.
pub const PASSAGE_CENTER: (f64, f64) = (0.6, 0.45);
pub const PASSAGE_SIDE: f64 = 0.3;
const RANDOM_SHELL: (f64, f64) = (0.25, 0.9);
const RANDOM_RADII: (f64, f64) = (0.05, 0.12);

/// Builds one of the benchmark worlds scaled to `reach`; a pure function of
/// `(kind, reach, seed)` (plus the random obstacle count and planar flag).
pub fn make_environment(kind: EnvironmentKind, reach: f64, seed: u64) -> Result<World> {
    generate(&EnvironmentSpec::new(kind, reach, seed))
}

fn generate(spec: &EnvironmentSpec) -> Result<World> {
    let l = spec.reach;
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::invalid("environment reach must be positive"));
    }
    let bounds = Aabb::cube(1.2 * l);
    let spheres = match spec.kind {
        EnvironmentKind::Empty => Vec::new(),
        EnvironmentKind::Table => table(l),
        EnvironmentKind::Wall => {
            let mut s = table(l);
            s.extend(wall(l, false));
            s
        }
        EnvironmentKind::Passage => {
            let mut s = table(l);
            s.extend(wall(l, true));
            s
        }
        EnvironmentKind::Random => random(l, spec.seed, spec.obstacles, spec.planar),
        EnvironmentKind::Bifurcated => vec![Sphere::new([0.25 * l, 0.0, 0.0], 0.125 * l)],
    };
    World::new(spheres, bounds)
}

fn table(l: f64) -> Vec<Sphere> {
    let r = TABLE_RADIUS * l;
    let n = (l / r).ceil() as i64;
    let mut out = Vec::new();
    for i in -n..=n {
        for j in -n..=n {
            let (x, y) = (i as f64 * r, j as f64 * r);
            let rho = x.hypot(y);
            if rho <= l && rho >= BASE_CUTOUT * l + r {
                out.push(Sphere::new([x, y, -r], r));
            }
        }
    }
    out
}

fn wall(l: f64, opening: bool) -> Vec<Sphere> {
    let r = WALL_RADIUS * l;
    let (cx, cz) = (PASSAGE_CENTER.0 * l, PASSAGE_CENTER.1 * l);
    let half = 0.5 * PASSAGE_SIDE * l;
    let nx = ((WALL_X.1 - WALL_X.0) * l / r).round() as i64;
    let nz = (WALL_TOP * l / r).round() as i64;
    let mut out = Vec::new();
    for i in 0..=nx {
        for k in 0..=nz {
            let x = WALL_X.0 * l + i as f64 * r;
            let z = k as f64 * r;
            if opening {
                // distance from the sphere centre to the opening rectangle
                let dx = ((x - cx).abs() - half).max(0.0);
                let dz = ((z - cz).abs() - half).max(0.0);
                let inside = (x - cx).abs() < half && (z - cz).abs() < half;
                if inside || dx.hypot(dz) < r {
                    continue;
                }
            }
            out.push(Sphere::new([x, 0.0, z], r));
        }
    }
    out
}

fn random(l: f64, seed: u64, count: usize, planar: bool) -> Vec<Sphere> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, b) = (RANDOM_SHELL.0 * l, RANDOM_SHELL.1 * l);
    let base = Sphere::new([0.0; 3], BASE_RADIUS * l);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let (rho, dir) = if planar {
            let rho = (rng.random::<f64>() * (b * b - a * a) + a * a).sqrt();
            let th = rng.random::<f64>() * 2.0 * PI;
            (rho, Vector3::new(th.cos(), th.sin(), 0.0))
        } else {
            let rho = (rng.random::<f64>() * (b.powi(3) - a.powi(3)) + a.powi(3)).cbrt();
            let z: f64 = rng.random_range(-1.0..=1.0);
            let th = rng.random::<f64>() * 2.0 * PI;
            let s = (1.0 - z * z).sqrt();
            (rho, Vector3::new(s * th.cos(), s * th.sin(), z))
        };
        let radius = rng.random_range(RANDOM_RADII.0 * l..=RANDOM_RADII.1 * l);
        let c = dir * rho;
        if base.intersects(&c, radius) {
            continue;
        }
        out.push(Sphere::new([c.x, c.y, c.z], radius));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn planar_scene(world: World) -> Scene {
        Scene::new(SerialChain::planar_2dof(), world)
    }

    #[test]
    fn sphere_model_covers_links() {
        for chain in [
            SerialChain::planar_2dof(),
            SerialChain::generic_6dof(),
            SerialChain::generic_7dof(),
        ] {
            let model = RobotSphereModel::default_for(&chain);
            assert_eq!(model.dof(), chain.dof());
            for (link, spheres) in chain.links().iter().zip(model.link_spheres()) {
                assert!(!spheres.is_empty());
                for w in spheres.windows(2) {
                    let d = (Vector3::from(w[0].center) - Vector3::from(w[1].center)).norm();
                    assert!(d < w[0].radius + w[1].radius);
                }
                let last = Vector3::from(spheres.last().unwrap().center);
                assert!((last - link.offset).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn empty_world_is_free_everywhere_in_limits() {
        let scene = planar_scene(World::empty(Aabb::cube(3.0)));
        assert!(scene.is_free(&[0.3, -2.0]));
        assert!(!scene.is_free(&[4.0, 0.0]));
    }

    #[test]
    fn obstacle_on_end_effector_collides() {
        let chain = SerialChain::generic_6dof();
        let q = [0.4, 0.3, -0.8, 0.2, 0.1, 0.0];
        let p = chain.forward_kinematics(&q).unwrap().position;
        let world = World::new(vec![Sphere::new([p.x, p.y, p.z], 0.5)], Aabb::cube(2.0)).unwrap();
        let scene = Scene::new(chain, world);
        assert!(!scene.is_free(&q));
    }

    #[test]
    fn accelerated_check_agrees_with_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for (chain, planar) in [
            (SerialChain::planar_2dof(), true),
            (SerialChain::generic_6dof(), false),
            (SerialChain::generic_7dof(), false),
        ] {
            for seed in 0..5 {
                let spec = EnvironmentSpec::new(EnvironmentKind::Random, chain.reach(), seed).planar(planar);
                let scene = Scene::new(chain.clone(), spec.build().unwrap());
                let mut free = 0;
                for _ in 0..400 {
                    let q = scene.sample_uniform(&mut rng);
                    let fast = scene.is_free(&q);
                    let slow = is_free_brute_force(&scene.chain, &scene.model, &scene.world, &q);
                    assert_eq!(fast, slow);
                    free += fast as usize;
                }
                assert!(free > 0 && free < 400, "degenerate world: {free}/400 free");
            }
        }
        // wall worlds exercise the dense grid
        let chain = SerialChain::generic_6dof();
        let scene = Scene::new(chain.clone(), make_environment(EnvironmentKind::Passage, chain.reach(), 0).unwrap());
        for _ in 0..500 {
            let q = scene.sample_uniform(&mut rng);
            assert_eq!(
                scene.is_free(&q),
                is_free_brute_force(&scene.chain, &scene.model, &scene.world, &q)
            );
        }
    }

    #[test]
    fn degenerate_edge_equals_point_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let spec = EnvironmentSpec::new(EnvironmentKind::Random, 2.0, 4).planar(true);
        let scene = planar_scene(spec.build().unwrap());
        for _ in 0..300 {
            let q = scene.sample_uniform(&mut rng);
            assert_eq!(scene.edge_free(&q, &q, 0.05), scene.is_free(&q));
        }
    }

    #[test]
    fn edge_blocked_in_the_middle() {
        // arm sweeps from +90° to -90° through an obstacle on the +x axis
        let world = World::new(vec![Sphere::new([1.5, 0.0, 0.0], 0.3)], Aabb::cube(3.0)).unwrap();
        let scene = planar_scene(world);
        let a = [PI / 2.0, 0.0];
        let b = [-PI / 2.0, 0.0];
        assert!(scene.is_free(&a) && scene.is_free(&b));
        assert!(!scene.edge_free(&a, &b, 0.05));
    }

    #[test]
    fn edge_check_is_symmetric_and_one_sided() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let spec = EnvironmentSpec::new(EnvironmentKind::Random, 2.0, 1).planar(true);
        let scene = planar_scene(spec.build().unwrap());
        let (mut agree, mut total) = (0, 0);
        for _ in 0..2000 {
            let a = scene.sample_uniform(&mut rng);
            let b = scene.sample_uniform(&mut rng);
            let coarse = scene.edge_free(&a, &b, 0.05);
            assert_eq!(coarse, scene.edge_free(&b, &a, 0.05));
            let fine = scene.edge_free(&a, &b, 0.005);
            if !coarse {
                // finer sampling can only find more collisions
                assert!(!fine || coarse == fine);
            }
            if coarse == fine {
                agree += 1;
            } else {
                assert!(coarse && !fine);
            }
            total += 1;
        }
        assert!(agree as f64 >= 0.95 * total as f64, "{agree}/{total}");
    }

    #[test]
    fn table_spheres_are_at_table_height() {
        let w = make_environment(EnvironmentKind::Table, 1.0, 0).unwrap();
        assert!(!w.obstacles().is_empty());
        assert!(w.obstacles().iter().all(|s| s.center[2] <= s.radius));
    }

    fn segment_free(world: &World, from: Vector3<f64>, to: Vector3<f64>, probe: f64) -> bool {
        (0..=200).all(|i| {
            let t = i as f64 / 200.0;
            !world.sphere_hits(&(from + (to - from) * t), probe)
        })
    }

    #[test]
    fn passage_has_an_opening() {
        let w = make_environment(EnvironmentKind::Passage, 1.0, 0).unwrap();
        let (cx, cz) = PASSAGE_CENTER;
        let through = segment_free(&w, Vector3::new(cx, -0.4, cz), Vector3::new(cx, 0.4, cz), 0.01);
        assert!(through);
        for (dx, dz) in [(0.0, 0.5), (0.0, -0.5), (0.35, 0.0), (-0.35, 0.0)] {
            let (x, z) = (cx + dx, cz + dz);
            assert!(
                !segment_free(&w, Vector3::new(x, -0.4, z), Vector3::new(x, 0.4, z), 0.01),
                "segment at offset ({dx}, {dz}) passes"
            );
        }
        // the plain wall has no opening
        let wall = make_environment(EnvironmentKind::Wall, 1.0, 0).unwrap();
        assert!(!segment_free(&wall, Vector3::new(cx, -0.4, cz), Vector3::new(cx, 0.4, cz), 0.01));
    }

    #[test]
    fn random_is_deterministic_and_in_shell() {
        let a = make_environment(EnvironmentKind::Random, 1.3, 17).unwrap();
        let b = make_environment(EnvironmentKind::Random, 1.3, 17).unwrap();
        let c = make_environment(EnvironmentKind::Random, 1.3, 18).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.obstacles().len(), DEFAULT_RANDOM_OBSTACLES);
        for s in a.obstacles() {
            let rho = s.center().norm();
            assert!(rho >= 0.25 * 1.3 - 1e-12 && rho <= 0.9 * 1.3 + 1e-12);
            assert!(s.radius >= 0.05 * 1.3 - 1e-12 && s.radius <= 0.12 * 1.3 + 1e-12);
            assert!(rho > s.radius + BASE_RADIUS * 1.3);
        }
        let p = EnvironmentSpec::new(EnvironmentKind::Random, 2.0, 3).planar(true).with_obstacles(6);
        let w = p.build().unwrap();
        assert_eq!(w.obstacles().len(), 6);
        assert!(w.obstacles().iter().all(|s| s.center[2] == 0.0));
    }

    #[test]
    fn world_json_roundtrip_and_validation() {
        let w = make_environment(EnvironmentKind::Random, 1.0, 2).unwrap();
        let back = World::from_json(&w.to_json()).unwrap();
        assert_eq!(back, w);
        assert_eq!(back.content_hash(), w.content_hash());
        assert!(World::new(vec![Sphere::new([0.0; 3], 0.0)], Aabb::cube(1.0)).is_err());
    }

    #[test]
    fn environment_kind_parsing() {
        for k in ["table", "wall", "passage", "random", "empty", "bifurcated"] {
            assert_eq!(k.parse::<EnvironmentKind>().unwrap().name(), k);
        }
        assert!("maze".parse::<EnvironmentKind>().is_err());
    }
}
