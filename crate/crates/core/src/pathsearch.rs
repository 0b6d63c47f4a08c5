//! 26-connected A* over occupancy grids, greedy polyline simplification and
//! exact segment-versus-voxel collision.
//!
//! Voxels are treated as closed boxes: a segment that merely touches a face,
//! edge or corner of an occupied voxel collides. Diagonal A* moves are only
//! allowed when every voxel of their bounding block is free, so each single
//! A* step is collision-free under the same rule.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::table::Table;
use crate::worldmap::{OccupancyGrid, VoxelIndex};
use crate::Vec3;

#[derive(Debug, Error, PartialEq)]
pub enum SearchError {
    #[error("no path between start and goal")]
    NoPath,
    #[error("invalid endpoint: {0}")]
    InvalidEndpoint(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoxelPath {
    pub voxels: Vec<VoxelIndex>,
    /// Voxel centers, in order.
    pub waypoints: Vec<Vec3>,
    /// Sum of Euclidean step lengths in meters.
    pub cost: f64,
}

impl VoxelPath {
    pub fn length(&self) -> f64 {
        self.waypoints.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }
}

/// Path cost from step-type counts, so that two optimal paths with the same
/// number of face, edge and corner moves report bit-identical costs.
pub fn canonical_cost(voxels: &[VoxelIndex], resolution: f64) -> f64 {
    let mut counts = [0u64; 3];
    for w in voxels.windows(2) {
        let nz = (0..3).filter(|&a| w[0][a] != w[1][a]).count();
        if nz > 0 {
            counts[nz - 1] += 1;
        }
    }
    resolution
        * (counts[0] as f64 + counts[1] as f64 * 2f64.sqrt() + counts[2] as f64 * 3f64.sqrt())
}

/// Offsets of the 26 neighbors.
pub fn neighbor_offsets() -> impl Iterator<Item = [i32; 3]> {
    (-1..=1).flat_map(|dx| {
        (-1..=1).flat_map(move |dy| {
            (-1..=1).filter(move |&dz| (dx, dy, dz) != (0, 0, 0)).map(move |dz| [dx, dy, dz])
        })
    })
}

/// True if moving from `v` by offset `d` stays in free space without
/// cutting a corner.
pub fn move_allowed(map: &OccupancyGrid, v: VoxelIndex, d: [i32; 3]) -> bool {
    for mx in 0..=d[0].abs() {
        for my in 0..=d[1].abs() {
            for mz in 0..=d[2].abs() {
                if (mx, my, mz) == (0, 0, 0) {
                    continue;
                }
                let c = [v[0] + mx * d[0].signum(), v[1] + my * d[1].signum(), v[2] + mz * d[2].signum()];
                if map.voxel_occupied(c) {
                    return false;
                }
            }
        }
    }
    true
}

#[derive(Debug, Clone, Copy)]
struct Frontier {
    f: f64,
    h: f64,
    voxel: VoxelIndex,
    idx: usize,
}

impl PartialEq for Frontier {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Frontier {}
impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Frontier {
    // BinaryHeap is a max-heap: invert so the smallest (f, h, voxel) pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.h.total_cmp(&self.h))
            .then_with(|| other.voxel.cmp(&self.voxel))
    }
}

fn endpoint(map: &OccupancyGrid, p: Vec3, what: &str) -> Result<VoxelIndex, SearchError> {
    let v = map.world_to_voxel(p);
    if !map.in_bounds(v) {
        return Err(SearchError::InvalidEndpoint(format!("{what} {p:?} is outside the map")));
    }
    if map.voxel_occupied(v) {
        return Err(SearchError::InvalidEndpoint(format!("{what} {p:?} is occupied")));
    }
    Ok(v)
}

/// Occupancy copied into a grid with a one-voxel occupied border, so
/// neighbor lookups need no bounds checks.
struct PaddedGrid {
    free: Vec<bool>,
    stride: [isize; 3],
}

impl PaddedGrid {
    fn new(map: &OccupancyGrid) -> Self {
        let [nx, ny, nz] = map.dims();
        let (px, py, pz) = (nx + 2, ny + 2, nz + 2);
        let mut free = vec![false; px * py * pz];
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    let v = [x as i32, y as i32, z as i32];
                    free[(x + 1) + px * ((y + 1) + py * (z + 1))] = !map.voxel_occupied(v);
                }
            }
        }
        PaddedGrid {
            free,
            stride: [1, px as isize, (px * py) as isize],
        }
    }

    fn index(&self, v: VoxelIndex) -> usize {
        ((v[0] + 1) as isize + self.stride[1] * (v[1] + 1) as isize + self.stride[2] * (v[2] + 1) as isize) as usize
    }
}

/// One of the 26 moves: target offset plus every cell of its bounding
/// block that must be free.
struct Move {
    d: [i32; 3],
    target: isize,
    block: Vec<isize>,
    cost: f64,
}

fn moves(grid: &PaddedGrid, res: f64) -> Vec<Move> {
    let lin = |c: [i32; 3]| c[0] as isize * grid.stride[0] + c[1] as isize * grid.stride[1] + c[2] as isize * grid.stride[2];
    neighbor_offsets()
        .map(|d| {
            let mut block = Vec::new();
            for mx in 0..=d[0].abs() {
                for my in 0..=d[1].abs() {
                    for mz in 0..=d[2].abs() {
                        if (mx, my, mz) != (0, 0, 0) {
                            block.push(lin([mx * d[0].signum(), my * d[1].signum(), mz * d[2].signum()]));
                        }
                    }
                }
            }
            let nnz = d.iter().filter(|&&c| c != 0).count();
            Move {
                d,
                target: lin(d),
                block,
                cost: res * (nnz as f64).sqrt(),
            }
        })
        .collect()
}

/// Minimal-cost 26-connected voxel path with a Euclidean heuristic.
/// Ties pop the smaller heuristic first, then the lexicographically smaller
/// voxel.
pub fn astar_3d(map: &OccupancyGrid, start: Vec3, goal: Vec3) -> Result<VoxelPath, SearchError> {
    let s = endpoint(map, start, "start")?;
    let g = endpoint(map, goal, "goal")?;
    let res = map.resolution();
    let heuristic = |v: VoxelIndex| {
        let d = [v[0] - g[0], v[1] - g[1], v[2] - g[2]];
        res * ((d[0] as f64).powi(2) + (d[1] as f64).powi(2) + (d[2] as f64).powi(2)).sqrt()
    };
    let grid = PaddedGrid::new(map);
    let moves = moves(&grid, res);
    let n = grid.free.len();
    let mut best = vec![f64::INFINITY; n];
    let mut parent = vec![u32::MAX; n];
    let mut closed = vec![false; n];
    let si = grid.index(s);
    let gi = grid.index(g);
    best[si] = 0.0;
    let mut open = BinaryHeap::new();
    let h0 = heuristic(s);
    open.push(Frontier {
        f: h0,
        h: h0,
        voxel: s,
        idx: si,
    });
    while let Some(cur) = open.pop() {
        if closed[cur.idx] {
            continue;
        }
        closed[cur.idx] = true;
        if cur.idx == gi {
            break;
        }
        let base = best[cur.idx];
        let ci = cur.idx as isize;
        for m in &moves {
            let ni = (ci + m.target) as usize;
            if closed[ni] || !m.block.iter().all(|&o| grid.free[(ci + o) as usize]) {
                continue;
            }
            let cand = base + m.cost;
            if cand < best[ni] {
                best[ni] = cand;
                parent[ni] = cur.idx as u32;
                let nv = [cur.voxel[0] + m.d[0], cur.voxel[1] + m.d[1], cur.voxel[2] + m.d[2]];
                let h = heuristic(nv);
                open.push(Frontier {
                    f: cand + h,
                    h,
                    voxel: nv,
                    idx: ni,
                });
            }
        }
    }
    if !closed[gi] {
        return Err(SearchError::NoPath);
    }
    let unpad = |i: usize| -> VoxelIndex {
        let i = i as isize;
        let z = i / grid.stride[2];
        let y = (i % grid.stride[2]) / grid.stride[1];
        let x = i % grid.stride[1];
        [(x - 1) as i32, (y - 1) as i32, (z - 1) as i32]
    };
    let mut voxels = vec![g];
    let mut at = gi;
    while at != si {
        at = parent[at] as usize;
        voxels.push(unpad(at));
    }
    voxels.reverse();
    let waypoints = voxels.iter().map(|&v| map.voxel_to_world(v)).collect();
    let cost = canonical_cost(&voxels, res);
    Ok(VoxelPath {
        voxels,
        waypoints,
        cost,
    })
}

/// Closed-box slab test in voxel units: does `a + t d`, `t ∈ [0, 1]`, meet
/// the box `[lo, lo + 1]^3`?
fn segment_meets_unit_box(a: [f64; 3], d: [f64; 3], lo: [f64; 3]) -> bool {
    let mut t0: f64 = 0.0;
    let mut t1: f64 = 1.0;
    for ax in 0..3 {
        let (bl, bh) = (lo[ax], lo[ax] + 1.0);
        if d[ax] == 0.0 {
            if a[ax] < bl || a[ax] > bh {
                return false;
            }
        } else {
            let inv = 1.0 / d[ax];
            let mut ta = (bl - a[ax]) * inv;
            let mut tb = (bh - a[ax]) * inv;
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

/// True iff the closed segment `a → b` meets any occupied (or out-of-grid)
/// voxel. Walks the voxels the segment passes through and tests their 26
/// neighbors exactly, which also catches face/edge/corner contacts.
pub fn segment_collision(map: &OccupancyGrid, a: Vec3, b: Vec3) -> bool {
    let res = map.resolution();
    let o = map.origin();
    let ga = [(a.x - o.x) / res, (a.y - o.y) / res, (a.z - o.z) / res];
    let gb = [(b.x - o.x) / res, (b.y - o.y) / res, (b.z - o.z) / res];
    let d = [gb[0] - ga[0], gb[1] - ga[1], gb[2] - ga[2]];
    let mut cell = [0i32; 3];
    let mut end = [0i32; 3];
    let mut step = [0i32; 3];
    let mut t_max = [f64::INFINITY; 3];
    let mut t_delta = [f64::INFINITY; 3];
    for ax in 0..3 {
        cell[ax] = ga[ax].floor() as i32;
        end[ax] = gb[ax].floor() as i32;
        if d[ax] > 0.0 {
            step[ax] = 1;
            t_max[ax] = ((cell[ax] + 1) as f64 - ga[ax]) / d[ax];
            t_delta[ax] = 1.0 / d[ax];
        } else if d[ax] < 0.0 {
            step[ax] = -1;
            t_max[ax] = (cell[ax] as f64 - ga[ax]) / d[ax];
            t_delta[ax] = -1.0 / d[ax];
        }
    }
    let check = |c: [i32; 3]| -> bool {
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let v = [c[0] + dx, c[1] + dy, c[2] + dz];
                    if map.voxel_occupied(v)
                        && segment_meets_unit_box(ga, d, [v[0] as f64, v[1] as f64, v[2] as f64])
                    {
                        return true;
                    }
                }
            }
        }
        false
    };
    let max_steps = (0..3).map(|ax| (end[ax] - cell[ax]).unsigned_abs() as usize).sum::<usize>() + 3;
    for _ in 0..=max_steps {
        if check(cell) {
            return true;
        }
        if cell == end {
            break;
        }
        let ax = if t_max[0] <= t_max[1] && t_max[0] <= t_max[2] {
            0
        } else if t_max[1] <= t_max[2] {
            1
        } else {
            2
        };
        if t_max[ax] > 1.0 {
            break;
        }
        cell[ax] += step[ax];
        t_max[ax] += t_delta[ax];
    }
    false
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePolyline {
    vertices: Vec<Vec3>,
}

impl ReferencePolyline {
    pub fn new(vertices: Vec<Vec3>) -> Self {
        ReferencePolyline { vertices }
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn segment_count(&self) -> usize {
        self.vertices.len().saturating_sub(1)
    }

    pub fn segment_lengths(&self) -> Vec<f64> {
        self.vertices.windows(2).map(|w| (w[1] - w[0]).norm()).collect()
    }

    pub fn xy_lengths(&self) -> Vec<f64> {
        self.vertices
            .windows(2)
            .map(|w| (w[1].x - w[0].x).hypot(w[1].y - w[0].y))
            .collect()
    }

    pub fn length(&self) -> f64 {
        self.segment_lengths().iter().sum()
    }

    pub fn vertex_table(&self) -> Table {
        let mut t = Table::new(["index", "x", "y", "z"]).comment("reference polyline vertices");
        for (i, v) in self.vertices.iter().enumerate() {
            t.push(vec![i as f64, v.x, v.y, v.z]);
        }
        t
    }
}

/// Greedy simplification: from a moving local start, extend the segment to
/// successive waypoints until one is blocked, then commit the previous
/// waypoint. The first and last waypoints are kept. A final pass drops any
/// vertex whose neighbors see each other, so no single vertex is redundant.
pub fn simplify_polyline(map: &OccupancyGrid, path: &[Vec3]) -> ReferencePolyline {
    if path.len() <= 2 {
        return ReferencePolyline::new(path.to_vec());
    }
    let k = path.len() - 1;
    let mut out = vec![path[0]];
    let mut start = path[0];
    for i in 2..=k {
        if segment_collision(map, start, path[i]) {
            out.push(path[i - 1]);
            start = path[i - 1];
        }
    }
    out.push(path[k]);
    prune_redundant(map, &mut out);
    ReferencePolyline::new(out)
}

fn prune_redundant(map: &OccupancyGrid, v: &mut Vec<Vec3>) {
    loop {
        let mut changed = false;
        let mut i = 1;
        while i + 1 < v.len() {
            if !segment_collision(map, v[i - 1], v[i + 1]) {
                v.remove(i);
                changed = true;
            } else {
                i += 1;
            }
        }
        if !changed {
            break;
        }
    }
}

/// Splits every segment whose xy-projected length exceeds `max_len` into
/// equal parts.
pub fn split_long_segments(poly: &ReferencePolyline, max_len: f64) -> ReferencePolyline {
    assert!(max_len > 0.0, "max_len must be positive");
    let v = poly.vertices();
    if v.is_empty() {
        return poly.clone();
    }
    let mut out = vec![v[0]];
    for w in v.windows(2) {
        let xy = (w[1].x - w[0].x).hypot(w[1].y - w[0].y);
        let parts = ((xy / max_len) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        for j in 1..parts {
            out.push(w[0] + (w[1] - w[0]) * (j as f64 / parts as f64));
        }
        out.push(w[1]);
    }
    ReferencePolyline::new(out)
}
