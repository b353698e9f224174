//! k-d tree over points of a runtime-chosen dimension.
//!
//! Supports median-split bulk construction (seed databases) and incremental
//! insertion (planner trees). Point ids are insertion indices; every query
//! breaks distance ties toward the lower id.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const NONE: u32 = u32::MAX;

#[derive(Clone, Debug)]
struct KdNode {
    point: u32,
    axis: u32,
    left: u32,
    right: u32,
}

#[derive(Clone, Debug)]
pub struct KdTree {
    dim: usize,
    points: Vec<f64>,
    nodes: Vec<KdNode>,
    root: u32,
}

/// (squared distance, id), ordered lexicographically.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Candidate(f64, u32);

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

impl KdTree {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "k-d tree needs a positive dimension");
        KdTree {
            dim,
            points: Vec::new(),
            nodes: Vec::new(),
            root: NONE,
        }
    }

    /// Builds a balanced tree from row-major points (`points.len() == n * dim`).
    pub fn build(dim: usize, points: Vec<f64>) -> Self {
        assert!(dim > 0 && points.len() % dim == 0);
        let n = points.len() / dim;
        let mut tree = KdTree {
            dim,
            points,
            nodes: Vec::with_capacity(n),
            root: NONE,
        };
        let mut ids: Vec<u32> = (0..n as u32).collect();
        tree.root = tree.build_rec(&mut ids);
        tree
    }

    fn build_rec(&mut self, ids: &mut [u32]) -> u32 {
        if ids.is_empty() {
            return NONE;
        }
        let axis = self.widest_axis(ids);
        let mid = ids.len() / 2;
        {
            let pts = &self.points;
            let dim = self.dim;
            ids.select_nth_unstable_by(mid, |a, b| {
                pts[*a as usize * dim + axis]
                    .total_cmp(&pts[*b as usize * dim + axis])
                    .then(a.cmp(b))
            });
        }
        let node = self.nodes.len() as u32;
        self.nodes.push(KdNode {
            point: ids[mid],
            axis: axis as u32,
            left: NONE,
            right: NONE,
        });
        let (lo, rest) = ids.split_at_mut(mid);
        let left = self.build_rec(lo);
        let right = self.build_rec(&mut rest[1..]);
        self.nodes[node as usize].left = left;
        self.nodes[node as usize].right = right;
        node
    }

    fn widest_axis(&self, ids: &[u32]) -> usize {
        let mut best = (0, f64::NEG_INFINITY);
        for a in 0..self.dim {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &i in ids {
                let v = self.points[i as usize * self.dim + a];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if hi - lo > best.1 {
                best = (a, hi - lo);
            }
        }
        best.0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, id: usize) -> &[f64] {
        &self.points[id * self.dim..(id + 1) * self.dim]
    }

    /// Appends a point and returns its id.
    pub fn insert(&mut self, p: &[f64]) -> usize {
        assert_eq!(p.len(), self.dim);
        let id = self.len() as u32;
        self.points.extend_from_slice(p);
        let node = self.nodes.len() as u32;
        if self.root == NONE {
            self.nodes.push(KdNode {
                point: id,
                axis: 0,
                left: NONE,
                right: NONE,
            });
            self.root = node;
            return id as usize;
        }
        let mut cur = self.root;
        loop {
            let n = &self.nodes[cur as usize];
            let axis = n.axis as usize;
            let split = self.points[n.point as usize * self.dim + axis];
            let go_left = p[axis] < split;
            let next = if go_left { n.left } else { n.right };
            if next == NONE {
                let child_axis = ((axis + 1) % self.dim) as u32;
                self.nodes.push(KdNode {
                    point: id,
                    axis: child_axis,
                    left: NONE,
                    right: NONE,
                });
                let n = &mut self.nodes[cur as usize];
                if go_left {
                    n.left = node;
                } else {
                    n.right = node;
                }
                return id as usize;
            }
            cur = next;
        }
    }

    #[inline]
    fn dist2(&self, id: u32, q: &[f64]) -> f64 {
        let p = &self.points[id as usize * self.dim..(id as usize + 1) * self.dim];
        p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    /// Nearest point as `(id, squared distance)`.
    pub fn nearest(&self, q: &[f64]) -> Option<(usize, f64)> {
        debug_assert_eq!(q.len(), self.dim);
        if self.root == NONE {
            return None;
        }
        let mut best = Candidate(f64::INFINITY, u32::MAX);
        let mut stack: Vec<(u32, f64)> = Vec::with_capacity(64);
        stack.push((self.root, 0.0));
        while let Some((node, bound)) = stack.pop() {
            if bound > best.0 {
                continue;
            }
            let n = &self.nodes[node as usize];
            let c = Candidate(self.dist2(n.point, q), n.point);
            if c < best {
                best = c;
            }
            let axis = n.axis as usize;
            let diff = q[axis] - self.points[n.point as usize * self.dim + axis];
            let (near, far) = if diff < 0.0 {
                (n.left, n.right)
            } else {
                (n.right, n.left)
            };
            if far != NONE {
                stack.push((far, bound.max(diff * diff)));
            }
            if near != NONE {
                stack.push((near, bound));
            }
        }
        Some((best.1 as usize, best.0))
    }

    /// The `k` nearest points sorted by (distance, id).
    pub fn k_nearest(&self, q: &[f64], k: usize) -> Vec<(usize, f64)> {
        debug_assert_eq!(q.len(), self.dim);
        if self.root == NONE || k == 0 {
            return Vec::new();
        }
        let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
        let mut stack: Vec<(u32, f64)> = Vec::with_capacity(64);
        stack.push((self.root, 0.0));
        while let Some((node, bound)) = stack.pop() {
            if heap.len() == k && bound > heap.peek().map_or(f64::INFINITY, |c| c.0) {
                continue;
            }
            let n = &self.nodes[node as usize];
            let c = Candidate(self.dist2(n.point, q), n.point);
            if heap.len() < k {
                heap.push(c);
            } else if c < *heap.peek().expect("heap is full") {
                heap.pop();
                heap.push(c);
            }
            let axis = n.axis as usize;
            let diff = q[axis] - self.points[n.point as usize * self.dim + axis];
            let (near, far) = if diff < 0.0 {
                (n.left, n.right)
            } else {
                (n.right, n.left)
            };
            if far != NONE {
                stack.push((far, bound.max(diff * diff)));
            }
            if near != NONE {
                stack.push((near, bound));
            }
        }
        heap.into_sorted_vec()
            .into_iter()
            .map(|c| (c.1 as usize, c.0))
            .collect()
    }

    /// Ids of all points with distance ≤ `radius`, in ascending id order.
    pub fn within_radius(&self, q: &[f64], radius: f64) -> Vec<usize> {
        debug_assert_eq!(q.len(), self.dim);
        let mut out = Vec::new();
        if self.root == NONE || radius < 0.0 {
            return out;
        }
        let r2 = radius * radius;
        let mut stack: Vec<u32> = Vec::with_capacity(64);
        stack.push(self.root);
        while let Some(node) = stack.pop() {
            let n = &self.nodes[node as usize];
            if self.dist2(n.point, q) <= r2 {
                out.push(n.point as usize);
            }
            let axis = n.axis as usize;
            let diff = q[axis] - self.points[n.point as usize * self.dim + axis];
            let (near, far) = if diff < 0.0 {
                (n.left, n.right)
            } else {
                (n.right, n.left)
            };
            if near != NONE {
                stack.push(near);
            }
            if far != NONE && diff * diff <= r2 {
                stack.push(far);
            }
        }
        out.sort_unstable();
        out
    }
}
