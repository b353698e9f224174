use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::collision::Scene;
use crate::kinematics::{distance, JointConfig};
use crate::{Error, Result};

/// Worst-case ratio between the octile lattice distance and the Euclidean
/// distance it approximates: `1 / cos(π/8)`.
pub const OCTILE_STRETCH: f64 = 1.082_392_200_292_394;

#[derive(Clone, Copy, PartialEq, PartialOrd)]
struct Key(f64);

impl Eq for Key {}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Shortest joint-space path length from `q_start` to any configuration in
/// `goals` on an 8-connected lattice over the joint box of a 2-DoF arm.
///
/// Each axis is split into `⌈width / resolution⌉` equal cells, so the lattice
/// spacing never exceeds `resolution`. Lattice vertices are collision-checked;
/// a lattice edge is free when both endpoints and its midpoint are. The start
/// and each goal are joined to the corners of their own cell with full
/// `edge_free` checks. Returns `∞` when no goal is reachable.
///
/// Lattice paths are at most [`OCTILE_STRETCH`] times longer than the
/// continuous geodesic they follow, so the result is an upper estimate of the
/// true optimum within that factor plus one cell diagonal.
pub fn grid_oracle_2dof(scene: &Scene, q_start: &[f64], goals: &[JointConfig], resolution: f64) -> Result<f64> {
    if scene.dof() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: scene.dof(),
        });
    }
    if !(resolution > 0.0) {
        return Err(Error::invalid("grid resolution must be positive"));
    }
    scene.chain.check_dims(q_start)?;
    for g in goals {
        scene.chain.check_dims(g)?;
    }
    let limits: Vec<_> = scene.chain.limits().collect();
    let cells: Vec<usize> = limits.iter().map(|l| (l.width() / resolution).ceil() as usize).collect();
    let h: Vec<f64> = limits.iter().zip(&cells).map(|(l, n)| l.width() / *n as f64).collect();
    let (nx, ny) = (cells[0] + 1, cells[1] + 1);
    let coord = |i: usize, j: usize| [limits[0].min + i as f64 * h[0], limits[1].min + j as f64 * h[1]];
    let lattice = nx * ny;
    let free: Vec<bool> = (0..lattice).map(|v| scene.is_free(&coord(v % nx, v / nx))).collect();

    // extra vertices: start = lattice, goals = lattice + 1 + g
    let total = lattice + 1 + goals.len();
    let mut extra_adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); 1 + goals.len()];
    let mut lattice_to_goal: Vec<(usize, usize, f64)> = Vec::new();
    let corners = |q: &[f64]| -> Vec<usize> {
        let i = (((q[0] - limits[0].min) / h[0]).floor() as usize).min(cells[0] - 1);
        let j = (((q[1] - limits[1].min) / h[1]).floor() as usize).min(cells[1] - 1);
        vec![i + j * nx, i + 1 + j * nx, i + (j + 1) * nx, i + 1 + (j + 1) * nx]
    };
    let fine = resolution / 2.0;
    if scene.is_free(q_start) {
        for c in corners(q_start) {
            let p = coord(c % nx, c / nx);
            if free[c] && scene.edge_free(q_start, &p, fine) {
                extra_adj[0].push((c, distance(q_start, &p)));
            }
        }
        for (g, q) in goals.iter().enumerate() {
            if scene.edge_free(q_start, q, fine) && distance(q_start, q) <= 2.0 * resolution {
                extra_adj[0].push((lattice + 1 + g, distance(q_start, q)));
            }
        }
    }
    for (g, q) in goals.iter().enumerate() {
        if !scene.is_free(q) {
            continue;
        }
        for c in corners(q) {
            let p = coord(c % nx, c / nx);
            if free[c] && scene.edge_free(&p, q, fine) {
                lattice_to_goal.push((c, g, distance(q, &p)));
            }
        }
    }
    let mut goal_links: Vec<Vec<(usize, f64)>> = vec![Vec::new(); lattice];
    for (c, g, d) in lattice_to_goal {
        goal_links[c].push((lattice + 1 + g, d));
    }

    let mut dist = vec![f64::INFINITY; total];
    let mut heap = BinaryHeap::new();
    dist[lattice] = 0.0;
    heap.push(Reverse((Key(0.0), lattice)));
    let diag = h[0].hypot(h[1]);
    while let Some(Reverse((Key(d), v))) = heap.pop() {
        if d > dist[v] {
            continue;
        }
        if v > lattice {
            // first goal settled is the cheapest
            return Ok(d);
        }
        let mut relax = |u: usize, w: f64, heap: &mut BinaryHeap<Reverse<(Key, usize)>>| {
            if d + w < dist[u] {
                dist[u] = d + w;
                heap.push(Reverse((Key(d + w), u)));
            }
        };
        if v == lattice {
            for &(u, w) in &extra_adj[0] {
                relax(u, w, &mut heap);
            }
            continue;
        }
        let (i, j) = ((v % nx) as i64, (v / nx) as i64);
        let here = coord(i as usize, j as usize);
        for (di, dj) in [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)] {
            let (a, b) = (i + di, j + dj);
            if a < 0 || b < 0 || a >= nx as i64 || b >= ny as i64 {
                continue;
            }
            let u = a as usize + b as usize * nx;
            if !free[u] {
                continue;
            }
            let there = coord(a as usize, b as usize);
            let mid = [(here[0] + there[0]) / 2.0, (here[1] + there[1]) / 2.0];
            if !scene.is_free(&mid) {
                continue;
            }
            let w = if di != 0 && dj != 0 {
                diag
            } else if di != 0 {
                h[0]
            } else {
                h[1]
            };
            relax(u, w, &mut heap);
        }
        for &(u, w) in &goal_links[v] {
            relax(u, w, &mut heap);
        }
    }
    Ok(f64::INFINITY)
}
