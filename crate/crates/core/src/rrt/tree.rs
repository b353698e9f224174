use std::collections::VecDeque;

use crate::kdtree::KdTree;
use crate::kinematics::{distance, JointConfig};

const NO_PARENT: u32 = u32::MAX;

/// Rooted tree over joint configurations with cost-to-root bookkeeping.
///
/// Node 0 is the root. Nodes are never removed, so indices are stable and the
/// node list only grows.
#[derive(Clone, Debug)]
pub struct Tree {
    index: KdTree,
    parent: Vec<u32>,
    cost: Vec<f64>,
    children: Vec<Vec<u32>>,
}

impl Tree {
    pub fn new(root: &[f64]) -> Self {
        let mut index = KdTree::new(root.len());
        index.insert(root);
        Tree {
            index,
            parent: vec![NO_PARENT],
            cost: vec![0.0],
            children: vec![Vec::new()],
        }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.index.dim()
    }

    pub fn config(&self, i: usize) -> &[f64] {
        self.index.point(i)
    }

    pub fn root(&self) -> &[f64] {
        self.config(0)
    }

    pub fn parent(&self, i: usize) -> Option<usize> {
        let p = self.parent[i];
        (p != NO_PARENT).then_some(p as usize)
    }

    pub fn cost(&self, i: usize) -> f64 {
        self.cost[i]
    }

    pub fn children(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.children[i].iter().map(|c| *c as usize)
    }

    /// Sum of cost-to-root over all nodes.
    pub fn total_cost(&self) -> f64 {
        self.cost.iter().sum()
    }

    /// Closest node; ties go to the lowest index.
    pub fn nearest(&self, q: &[f64]) -> usize {
        self.index.nearest(q).expect("tree has a root").0
    }

    /// All nodes within `radius` of `q` (inclusive), ascending by index.
    pub fn within(&self, q: &[f64], radius: f64) -> Vec<usize> {
        self.index.within_radius(q, radius)
    }

    pub fn add_node(&mut self, q: &[f64], parent: usize) -> usize {
        let id = self.index.insert(q);
        debug_assert_eq!(id, self.parent.len());
        let c = self.cost[parent] + distance(self.config(parent), q);
        self.parent.push(parent as u32);
        self.cost.push(c);
        self.children.push(Vec::new());
        self.children[parent].push(id as u32);
        id
    }

    /// Moves `node` under `new_parent` and refreshes the cost of its subtree.
    ///
    /// `new_parent` must not lie in the subtree of `node`.
    pub fn reparent(&mut self, node: usize, new_parent: usize) {
        debug_assert!(node != 0);
        debug_assert!(!self.is_ancestor(node, new_parent));
        let old = self.parent[node] as usize;
        if let Some(pos) = self.children[old].iter().position(|c| *c as usize == node) {
            self.children[old].remove(pos);
        }
        self.parent[node] = new_parent as u32;
        self.children[new_parent].push(node as u32);
        self.cost[node] = self.cost[new_parent] + distance(self.config(new_parent), self.config(node));
        let mut queue: VecDeque<usize> = self.children(node).collect();
        while let Some(c) = queue.pop_front() {
            let p = self.parent[c] as usize;
            self.cost[c] = self.cost[p] + distance(self.config(p), self.config(c));
            queue.extend(self.children[c].iter().map(|x| *x as usize));
        }
    }

    /// Whether `a` is `b` or one of its ancestors.
    pub fn is_ancestor(&self, a: usize, b: usize) -> bool {
        let mut cur = Some(b);
        while let Some(c) = cur {
            if c == a {
                return true;
            }
            cur = self.parent(c);
        }
        false
    }

    /// Configurations from the root to `i`.
    pub fn path_to_root(&self, i: usize) -> Vec<JointConfig> {
        let mut out = Vec::new();
        let mut cur = Some(i);
        while let Some(c) = cur {
            out.push(self.config(c).into());
            cur = self.parent(c);
        }
        out.reverse();
        out
    }

    /// Checks root, acyclicity, child lists and cost consistency (to `tol`).
    pub fn check_invariants(&self, tol: f64) -> Result<(), String> {
        let n = self.len();
        if self.parent[0] != NO_PARENT || self.cost[0] != 0.0 {
            return Err("root must have no parent and zero cost".into());
        }
        for i in 1..n {
            let p = self.parent[i];
            if p == NO_PARENT || p as usize >= n {
                return Err(format!("node {i} has invalid parent"));
            }
            let mut cur = i;
            let mut steps = 0;
            while cur != 0 {
                cur = self.parent[cur] as usize;
                steps += 1;
                if steps > n {
                    return Err(format!("cycle through node {i}"));
                }
            }
            let p = p as usize;
            let want = self.cost[p] + distance(self.config(p), self.config(i));
            if (self.cost[i] - want).abs() > tol {
                return Err(format!("node {i}: cost {} != {}", self.cost[i], want));
            }
            if !self.children[p].contains(&(i as u32)) {
                return Err(format!("node {i} missing from children of {p}"));
            }
        }
        let listed: usize = self.children.iter().map(Vec::len).sum();
        if listed != n - 1 {
            return Err(format!("{listed} child entries for {} edges", n - 1));
        }
        Ok(())
    }
}
