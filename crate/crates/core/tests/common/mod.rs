//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

pub mod flight;
pub mod gradcheck;
pub mod learning;

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use sfcrl::corridor::SubCorridor;
use sfcrl::worldmap::OccupancyGrid;
use sfcrl::Vec3;

/// De Boor evaluation of a uniform cubic B-spline with knots
/// `t_j = (j - 1)·dt`, so that `p_{t-1}` peaks at `t·dt`.
pub fn de_boor(points: &[Vec3], dt: f64, tau: f64) -> Vec3 {
    let n = points.len() - 1;
    let knot = |j: usize| (j as f64 - 1.0) * dt;
    let mut k = ((tau / dt).floor() as usize + 1).clamp(3, n);
    while k > 3 && tau < knot(k) {
        k -= 1;
    }
    let mut d: Vec<Vec3> = points[k - 3..=k].to_vec();
    for r in 1..=3 {
        for j in (r..=3).rev() {
            let i = k - 3 + j;
            let alpha = (tau - knot(i)) / (knot(i + 4 - r) - knot(i));
            d[j] = d[j - 1] * (1.0 - alpha) + d[j] * alpha;
        }
    }
    d[3]
}

/// A 20×20×8 grid of random density with random free start and goal voxels.
pub fn random_search_case(seed: u64) -> (OccupancyGrid, [i32; 3], [i32; 3]) {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let density = rng.random_range(0.05..0.35);
    let g = random_grid(&mut rng, [20, 20, 8], density, 0.15);
    let s = random_free_voxel(&mut rng, &g).unwrap();
    let t = random_free_voxel(&mut rng, &g).unwrap();
    (g, s, t)
}

/// Random grid with independent occupancy per voxel.
pub fn random_grid<R: Rng>(rng: &mut R, dims: [usize; 3], density: f64, res: f64) -> OccupancyGrid {
    let mut g = OccupancyGrid::new(Vec3::zeros(), res, dims).unwrap();
    for iz in 0..dims[2] as i32 {
        for iy in 0..dims[1] as i32 {
            for ix in 0..dims[0] as i32 {
                if rng.random_bool(density) {
                    g.set([ix, iy, iz], true);
                }
            }
        }
    }
    g
}

pub fn random_free_voxel<R: Rng>(rng: &mut R, g: &OccupancyGrid) -> Option<[i32; 3]> {
    let d = g.dims();
    for _ in 0..1000 {
        let v = [
            rng.random_range(0..d[0] as i32),
            rng.random_range(0..d[1] as i32),
            rng.random_range(0..d[2] as i32),
        ];
        if !g.voxel_occupied(v) {
            return Some(v);
        }
    }
    None
}

fn free(g: &OccupancyGrid, v: [i32; 3]) -> bool {
    g.in_bounds(v) && !g.voxel_occupied(v)
}

/// A move is legal when every voxel of its bounding block is free.
fn legal(g: &OccupancyGrid, v: [i32; 3], d: [i32; 3]) -> bool {
    let lo = [0, 1, 2].map(|a| v[a].min(v[a] + d[a]));
    let hi = [0, 1, 2].map(|a| v[a].max(v[a] + d[a]));
    for x in lo[0]..=hi[0] {
        for y in lo[1]..=hi[1] {
            for z in lo[2]..=hi[2] {
                if !free(g, [x, y, z]) {
                    return false;
                }
            }
        }
    }
    true
}

/// Dijkstra over the 26-connected graph; returns the optimal cost
/// expressed through move-type counts, or None if unreachable.
pub fn dijkstra_cost(g: &OccupancyGrid, start: [i32; 3], goal: [i32; 3]) -> Option<f64> {
    let d = g.dims();
    let idx = |v: [i32; 3]| (v[2] as usize * d[1] + v[1] as usize) * d[0] + v[0] as usize;
    let mut dist = vec![f64::INFINITY; g.len()];
    let mut counts = vec![[0u32; 3]; g.len()];
    let mut heap = BinaryHeap::new();
    dist[idx(start)] = 0.0;
    heap.push((Reverse(ordered(0.0)), start));
    let unit = [1.0, 2f64.sqrt(), 3f64.sqrt()];
    while let Some((Reverse(c), v)) = heap.pop() {
        let c = c as f64 / 1e12;
        if c > dist[idx(v)] + 1e-12 {
            continue;
        }
        if v == goal {
            let k = counts[idx(v)];
            return Some(g.resolution() * (k[0] as f64 + k[1] as f64 * unit[1] + k[2] as f64 * unit[2]));
        }
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let dd = [dx, dy, dz];
                    let kind = dd.iter().filter(|&&a| a != 0).count();
                    if kind == 0 || !legal(g, v, dd) {
                        continue;
                    }
                    let w = [v[0] + dx, v[1] + dy, v[2] + dz];
                    let nc = dist[idx(v)] + unit[kind - 1];
                    if nc < dist[idx(w)] - 1e-12 {
                        dist[idx(w)] = nc;
                        let mut k = counts[idx(v)];
                        k[kind - 1] += 1;
                        counts[idx(w)] = k;
                        heap.push((Reverse(ordered(nc)), w));
                    }
                }
            }
        }
    }
    None
}

fn ordered(c: f64) -> u64 {
    (c * 1e12).round() as u64
}

/// Closed box overlap of segment `a → b` with the voxel `v` (slab test).
pub fn segment_hits_voxel(g: &OccupancyGrid, a: Vec3, b: Vec3, v: [i32; 3]) -> bool {
    let res = g.resolution();
    let lo = g.origin() + Vec3::new(v[0] as f64, v[1] as f64, v[2] as f64) * res;
    let hi = lo + Vec3::repeat(res);
    let d = b - a;
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for ax in 0..3 {
        if d[ax].abs() < 1e-15 {
            if a[ax] < lo[ax] || a[ax] > hi[ax] {
                return false;
            }
        } else {
            let (mut ta, mut tb) = ((lo[ax] - a[ax]) / d[ax], (hi[ax] - a[ax]) / d[ax]);
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
            if t0 > t1 {
                return false;
            }
        }
    }
    true
}

/// Brute force over all occupied voxels; out-of-bounds parts count as hits.
pub fn brute_segment_collision(g: &OccupancyGrid, a: Vec3, b: Vec3) -> bool {
    let up = g.upper_corner();
    let o = g.origin();
    let inside = |p: Vec3| (0..3).all(|k| p[k] >= o[k] && p[k] <= up[k]);
    if !inside(a) || !inside(b) {
        return true;
    }
    g.occupied_voxels().any(|v| segment_hits_voxel(g, a, b, v))
}

fn xy_dist(p: Vec3, a: Vec3, b: Vec3) -> f64 {
    let ab = nalgebra::Vector2::new(b.x - a.x, b.y - a.y);
    let ap = nalgebra::Vector2::new(p.x - a.x, p.y - a.y);
    let l2 = ab.norm_squared();
    let t = if l2 == 0.0 { 0.0 } else { (ap.dot(&ab) / l2).clamp(0.0, 1.0) };
    (ap - ab * t).norm()
}

/// Direct evaluation of the sub-corridor membership formula.
pub fn membership(sc: &SubCorridor, p: Vec3) -> bool {
    let left = (p - sc.end).dot(&sc.normal) >= 0.0;
    let w = if left { sc.width_left } else { sc.width_right };
    xy_dist(p, sc.start, sc.end) < w && sc.z_inf < p.z && p.z < sc.z_sup
}

/// Occupied lattice points inside `sc`, by a full scan of the grid.
pub fn lattice_violations(sc: &SubCorridor, g: &OccupancyGrid) -> usize {
    let d = g.dims();
    let mut bad = 0;
    for iz in 0..d[2] as i32 {
        for iy in 0..d[1] as i32 {
            for ix in 0..d[0] as i32 {
                let v = [ix, iy, iz];
                if g.voxel_occupied(v) && membership(sc, g.voxel_to_world(v)) {
                    bad += 1;
                }
            }
        }
    }
    bad
}

/// Smallest horizontal clearance from the segment to an occupied voxel
/// center on one side within the z band, minus half a voxel, by full scan.
pub fn scan_width(sc: &SubCorridor, g: &OccupancyGrid, left: bool, cap: f64) -> f64 {
    let res = g.resolution();
    let mut best = cap + 0.5 * res;
    for v in g.occupied_voxels() {
        let c = g.voxel_to_world(v);
        let zlo = c.z - 0.5 * res;
        let zhi = c.z + 0.5 * res;
        if !(zlo < sc.z_sup && zhi > sc.z_inf) {
            continue;
        }
        if ((c - sc.end).dot(&sc.normal) >= 0.0) != left {
            continue;
        }
        best = best.min(xy_dist(c, sc.start, sc.end));
    }
    (best - 0.5 * res).min(cap)
}

/// Relative error with an absolute floor.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// A 7.2 m × 7.2 m × 3 m world with random boxes, start and goal at
/// opposite corners at 1 m altitude.
pub fn random_block_world<R: Rng>(rng: &mut R) -> (OccupancyGrid, Vec3, Vec3) {
    let dims = [48, 48, 20];
    let mut g = OccupancyGrid::new(Vec3::zeros(), 0.15, dims).unwrap();
    let start = Vec3::new(0.825, 0.825, 1.025);
    let goal = Vec3::new(6.375, 6.375, 1.025);
    let boxes = rng.random_range(3..10);
    for _ in 0..boxes {
        let w = [rng.random_range(2..10), rng.random_range(2..10), rng.random_range(4..21)];
        let lo = [
            rng.random_range(0..dims[0] as i32 - w[0]),
            rng.random_range(0..dims[1] as i32 - w[1]),
            rng.random_range(0..dims[2] as i32 - w[2] + 1),
        ];
        for x in lo[0]..lo[0] + w[0] {
            for y in lo[1]..lo[1] + w[1] {
                for z in lo[2]..lo[2] + w[2] {
                    g.set([x, y, z], true);
                }
            }
        }
    }
    for p in [start, goal] {
        let c = g.world_to_voxel(p);
        for dx in -4..=4 {
            for dy in -4..=4 {
                for dz in -4..=4 {
                    let v = [c[0] + dx, c[1] + dy, c[2] + dz];
                    if g.in_bounds(v) {
                        g.set(v, false);
                    }
                }
            }
        }
    }
    (g, start, goal)
}
