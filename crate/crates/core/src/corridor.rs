//! Safe flight corridors: one box-like region per polyline segment, split
//! left/right by the segment's horizontal normal and bounded by a z-band.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pathsearch::ReferencePolyline;
use crate::table::Table;
use crate::worldmap::OccupancyGrid;
use crate::Vec3;

#[derive(Debug, Error, PartialEq)]
pub enum CorridorError {
    #[error("segment {0} has no horizontal extent")]
    VerticalSegment(usize),
    #[error("no z-band yields positive widths")]
    NoFeasibleBand,
    #[error("polyline needs at least 2 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("window index {index} out of range 0..{count}")]
    BadIndex { index: usize, count: usize },
}

/// Map preprocessing and corridor construction settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlanningConfig {
    /// Obstacle inflation applied before corridor construction.
    pub inflation_voxels: usize,
    /// Extra inflation for A* and polyline simplification only.
    pub search_margin_voxels: usize,
    /// Allowed altitude range; layers outside it count as obstacles.
    pub flight_band: [f64; 2],
    /// Candidate z-band heights in addition to the full band.
    pub band_heights: Vec<f64>,
    pub band_step: f64,
    /// Upper bound for sub-corridor widths.
    pub width_cap: f64,
    /// Maximum xy length of a polyline segment.
    pub max_segment_len: f64,
    /// Width used on both sides when no z-band is feasible.
    pub fallback_width: f64,
}

impl Default for PlanningConfig {
    fn default() -> Self {
        PlanningConfig {
            inflation_voxels: 1,
            search_margin_voxels: 1,
            flight_band: [0.2, 3.0],
            band_heights: vec![1.0, 1.5, 2.0],
            band_step: 0.25,
            width_cap: 4.0,
            max_segment_len: 3.0,
            fallback_width: 0.1,
        }
    }
}

/// The two derived grids used for planning.
#[derive(Debug, Clone)]
pub struct PlanningMaps {
    /// Inflated map with out-of-band layers blocked; corridor widths and
    /// safety checks refer to this grid.
    pub corridor: OccupancyGrid,
    /// `corridor` dilated by the search margin.
    pub search: OccupancyGrid,
}

impl PlanningMaps {
    pub fn new(raw: &OccupancyGrid, cfg: &PlanningConfig) -> Self {
        let mut corridor = raw.dilate(cfg.inflation_voxels);
        let [nx, ny, nz] = corridor.dims();
        let [lo, hi] = cfg.flight_band;
        for iz in 0..nz as i32 {
            let z = corridor.voxel_to_world([0, 0, iz]).z;
            if z < lo || z > hi {
                for iy in 0..ny as i32 {
                    for ix in 0..nx as i32 {
                        corridor.set([ix, iy, iz], true);
                    }
                }
            }
        }
        let search = corridor.dilate(cfg.search_margin_voxels);
        PlanningMaps { corridor, search }
    }
}

/// Horizontal left-normal of the segment `a → b`.
pub fn segment_normal(a: Vec3, b: Vec3) -> Option<Vec3> {
    let n = Vec3::new(a.y - b.y, b.x - a.x, 0.0);
    let len = n.x.hypot(n.y);
    (len > 1e-9).then(|| n / len)
}

/// Horizontal distance from `p` to the segment `a → b`.
pub fn dist_xy(p: Vec3, a: Vec3, b: Vec3) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let (px, py) = (p.x - a.x, p.y - a.y);
    let l2 = dx * dx + dy * dy;
    let t = if l2 > 0.0 {
        ((px * dx + py * dy) / l2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (px - t * dx).hypot(py - t * dy)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubCorridor {
    pub start: Vec3,
    pub end: Vec3,
    pub normal: Vec3,
    pub width_left: f64,
    pub width_right: f64,
    pub z_inf: f64,
    pub z_sup: f64,
    /// True when built by the minimum-width fallback.
    pub fallback: bool,
}

impl SubCorridor {
    pub fn is_left(&self, p: Vec3) -> bool {
        (p - self.end).dot(&self.normal) >= 0.0
    }

    pub fn contains(&self, p: Vec3) -> bool {
        if !(p.z > self.z_inf && p.z < self.z_sup) {
            return false;
        }
        let w = if self.is_left(p) {
            self.width_left
        } else {
            self.width_right
        };
        dist_xy(p, self.start, self.end) < w
    }

    pub fn length(&self) -> f64 {
        (self.end - self.start).norm()
    }

    /// Voxel centers of `grid` lying inside this sub-corridor.
    pub fn lattice_points(&self, grid: &OccupancyGrid) -> Vec<[i32; 3]> {
        let wmax = self.width_left.max(self.width_right);
        let lo = Vec3::new(
            self.start.x.min(self.end.x) - wmax,
            self.start.y.min(self.end.y) - wmax,
            self.z_inf,
        );
        let hi = Vec3::new(
            self.start.x.max(self.end.x) + wmax,
            self.start.y.max(self.end.y) + wmax,
            self.z_sup,
        );
        let vl = grid.world_to_voxel(lo);
        let vh = grid.world_to_voxel(hi);
        let mut out = Vec::new();
        for iz in vl[2]..=vh[2] {
            for iy in vl[1]..=vh[1] {
                for ix in vl[0]..=vh[0] {
                    let v = [ix, iy, iz];
                    if self.contains(grid.voxel_to_world(v)) {
                        out.push(v);
                    }
                }
            }
        }
        out
    }

    /// Number of in-corridor lattice points that are occupied in `grid`.
    pub fn lattice_violations(&self, grid: &OccupancyGrid) -> usize {
        self.lattice_points(grid)
            .into_iter()
            .filter(|&v| grid.voxel_occupied(v))
            .count()
    }
}

/// Occupied layers of one grid column as a bitset.
struct ColumnMask<'a> {
    grid: &'a OccupancyGrid,
}

impl ColumnMask<'_> {
    fn fill(&self, ix: i32, iy: i32, out: &mut [u64]) {
        out.iter_mut().for_each(|w| *w = 0);
        let nz = self.grid.dims()[2];
        if !self.grid.in_bounds([ix, iy, 0]) {
            for iz in 0..nz {
                out[iz / 64] |= 1 << (iz % 64);
            }
            return;
        }
        for iz in 0..nz {
            if self.grid.voxel_occupied([ix, iy, iz as i32]) {
                out[iz / 64] |= 1 << (iz % 64);
            }
        }
    }
}

fn band_mask(grid: &OccupancyGrid, z_inf: f64, z_sup: f64, words: usize) -> Vec<u64> {
    let mut m = vec![0u64; words];
    let res = grid.resolution();
    let oz = grid.origin().z;
    for iz in 0..grid.dims()[2] {
        let lo = oz + iz as f64 * res;
        let hi = lo + res;
        if lo < z_sup && hi > z_inf {
            m[iz / 64] |= 1 << (iz % 64);
        }
    }
    m
}

/// Candidate `(z_inf, z_sup)` bands strictly containing both endpoint
/// altitudes.
pub fn candidate_bands(grid: &OccupancyGrid, a: Vec3, b: Vec3, cfg: &PlanningConfig) -> Vec<(f64, f64)> {
    let zl = cfg.flight_band[0];
    let zh = cfg.flight_band[1].min(grid.upper_corner().z);
    let (pz_lo, pz_hi) = (a.z.min(b.z), a.z.max(b.z));
    let mut out = Vec::new();
    if zh <= zl {
        return out;
    }
    let full = zh - zl;
    for &h in &cfg.band_heights {
        if h >= full {
            continue;
        }
        let mut k = 0;
        loop {
            let z_inf = zl + k as f64 * cfg.band_step;
            let z_sup = z_inf + h;
            if z_sup > zh + 1e-9 {
                break;
            }
            if z_inf < pz_lo && z_sup > pz_hi {
                out.push((z_inf, z_sup));
            }
            k += 1;
        }
    }
    if zl < pz_lo && zh > pz_hi {
        out.push((zl, zh));
    }
    out
}

/// Minimum left/right obstacle distances of segment `a → b` within each
/// band, measured to occupied voxel centers minus half a voxel and capped
/// at `cap`. Out-of-grid columns count as obstacles.
fn band_widths(
    grid: &OccupancyGrid,
    a: Vec3,
    b: Vec3,
    normal: Vec3,
    bands: &[(f64, f64)],
    cap: f64,
) -> Vec<(f64, f64)> {
    let res = grid.resolution();
    let words = grid.dims()[2].div_ceil(64);
    let masks: Vec<Vec<u64>> = bands.iter().map(|&(l, h)| band_mask(grid, l, h, words)).collect();
    let mut widths = vec![(cap, cap); bands.len()];
    let reach = cap + res;
    let lo = grid.world_to_voxel(Vec3::new(a.x.min(b.x) - reach, a.y.min(b.y) - reach, 0.0));
    let hi = grid.world_to_voxel(Vec3::new(a.x.max(b.x) + reach, a.y.max(b.y) + reach, 0.0));
    let col = ColumnMask { grid };
    let mut occ = vec![0u64; words];
    let z0 = grid.voxel_to_world([0, 0, 0]).z;
    for iy in lo[1]..=hi[1] {
        for ix in lo[0]..=hi[0] {
            let mut c = grid.voxel_to_world([ix, iy, 0]);
            let d = dist_xy(c, a, b) - res / 2.0;
            if d >= cap {
                continue;
            }
            col.fill(ix, iy, &mut occ);
            if occ.iter().all(|&w| w == 0) {
                continue;
            }
            c.z = z0;
            let left = (c - b).dot(&normal) >= 0.0;
            for (w, m) in widths.iter_mut().zip(&masks) {
                if occ.iter().zip(m).any(|(o, m)| o & m != 0) {
                    let slot = if left { &mut w.0 } else { &mut w.1 };
                    if d < *slot {
                        *slot = d;
                    }
                }
            }
        }
    }
    widths
}

/// Sub-corridor for segment `a → b` maximizing band height times total
/// width. `fallback_normal` is used when the segment is vertical.
pub fn build_subcorridor(
    grid: &OccupancyGrid,
    a: Vec3,
    b: Vec3,
    fallback_normal: Vec3,
    cfg: &PlanningConfig,
) -> Result<SubCorridor, CorridorError> {
    let normal = segment_normal(a, b).unwrap_or(fallback_normal);
    let bands = candidate_bands(grid, a, b, cfg);
    let widths = band_widths(grid, a, b, normal, &bands, cfg.width_cap);
    let mut best: Option<(f64, usize)> = None;
    for (i, (&(zl, zh), &(wl, wr))) in bands.iter().zip(&widths).enumerate() {
        if wl > 0.0 && wr > 0.0 {
            let score = (zh - zl) * (wl + wr);
            if best.is_none_or(|(s, _)| score > s) {
                best = Some((score, i));
            }
        }
    }
    let (_, i) = best.ok_or(CorridorError::NoFeasibleBand)?;
    Ok(SubCorridor {
        start: a,
        end: b,
        normal,
        width_left: widths[i].0,
        width_right: widths[i].1,
        z_inf: bands[i].0,
        z_sup: bands[i].1,
        fallback: false,
    })
}

/// Bisection levels allowed when a sub-corridor prism still holds an
/// occupied voxel center (a sloped segment running under an overhang).
const SPLIT_DEPTH: usize = 8;

/// Builds the sub-corridor for `a -> b`, bisecting the segment until every
/// piece is free of occupied lattice points.
fn push_sound(grid: &OccupancyGrid, a: Vec3, b: Vec3, cfg: &PlanningConfig, depth: usize, subs: &mut Vec<SubCorridor>) {
    let inherit = subs.last().map_or(Vec3::new(0.0, 1.0, 0.0), |s| s.normal);
    let sc = build_subcorridor(grid, a, b, inherit, cfg).unwrap_or_else(|_| fallback_subcorridor(a, b, inherit, cfg));
    if depth == 0 || sc.lattice_violations(grid) == 0 {
        subs.push(sc);
        return;
    }
    let mid = (a + b) / 2.0;
    push_sound(grid, a, mid, cfg, depth - 1, subs);
    push_sound(grid, mid, b, cfg, depth - 1, subs);
}

/// Thin corridor hugging the segment, used when no band is feasible.
pub fn fallback_subcorridor(a: Vec3, b: Vec3, fallback_normal: Vec3, cfg: &PlanningConfig) -> SubCorridor {
    let margin = 0.5 * cfg.band_step.max(0.1);
    SubCorridor {
        start: a,
        end: b,
        normal: segment_normal(a, b).unwrap_or(fallback_normal),
        width_left: cfg.fallback_width,
        width_right: cfg.fallback_width,
        z_inf: a.z.min(b.z) - margin,
        z_sup: a.z.max(b.z) + margin,
        fallback: true,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SafeFlightCorridor {
    subs: Vec<SubCorridor>,
}

impl SafeFlightCorridor {
    pub fn build(
        grid: &OccupancyGrid,
        poly: &ReferencePolyline,
        cfg: &PlanningConfig,
    ) -> Result<Self, CorridorError> {
        let v = poly.vertices();
        if v.len() < 2 {
            return Err(CorridorError::TooFewVertices(v.len()));
        }
        let mut subs: Vec<SubCorridor> = Vec::with_capacity(v.len() - 1);
        for w in v.windows(2) {
            push_sound(grid, w[0], w[1], cfg, SPLIT_DEPTH, &mut subs);
        }
        Ok(SafeFlightCorridor { subs })
    }

    pub fn from_subcorridors(subs: Vec<SubCorridor>) -> Self {
        SafeFlightCorridor { subs }
    }

    pub fn subcorridors(&self) -> &[SubCorridor] {
        &self.subs
    }

    pub fn len(&self) -> usize {
        self.subs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subs.is_empty()
    }

    pub fn last_index(&self) -> usize {
        self.subs.len().saturating_sub(1)
    }

    pub fn vertices(&self) -> Vec<Vec3> {
        let mut v: Vec<Vec3> = self.subs.iter().map(|s| s.start).collect();
        if let Some(s) = self.subs.last() {
            v.push(s.end);
        }
        v
    }

    pub fn segment_lengths(&self) -> Vec<f64> {
        self.subs.iter().map(SubCorridor::length).collect()
    }

    pub fn contains(&self, p: Vec3) -> bool {
        self.subs.iter().any(|s| s.contains(p))
    }

    /// Largest index of a sub-corridor containing `p`.
    pub fn locate(&self, p: Vec3) -> Option<usize> {
        self.subs.iter().rposition(|s| s.contains(p))
    }

    pub fn fallback_count(&self) -> usize {
        self.subs.iter().filter(|s| s.fallback).count()
    }

    /// `6n + 2` features for sub-corridors `index..index + n`: `n + 1`
    /// vertices `(x, y)` followed by `(w_left, w_right, z_sup, z_inf)` per
    /// sub-corridor, all translated by `-origin`. Past the end, the final
    /// vertex and the final sub-corridor's widths and band repeat.
    pub fn observation_window(&self, index: usize, n: usize, origin: Vec3) -> Result<Vec<f64>, CorridorError> {
        let k = self.subs.len();
        if index >= k {
            return Err(CorridorError::BadIndex { index, count: k });
        }
        let mut out = Vec::with_capacity(6 * n + 2);
        for j in 0..=n {
            let i = index + j;
            let v = if i < k { self.subs[i].start } else { self.subs[k - 1].end };
            out.push(v.x - origin.x);
            out.push(v.y - origin.y);
        }
        for j in 0..n {
            let s = &self.subs[(index + j).min(k - 1)];
            out.extend([s.width_left, s.width_right, s.z_sup - origin.z, s.z_inf - origin.z]);
        }
        Ok(out)
    }

    /// Unpadded serialization: every vertex `(x, y)` then per-sub-corridor
    /// `(w_left, w_right, z_sup, z_inf)`.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.vertices().iter().flat_map(|v| [v.x, v.y]).collect();
        for s in &self.subs {
            out.extend([s.width_left, s.width_right, s.z_sup, s.z_inf]);
        }
        out
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new([
            "index", "x0", "y0", "z0", "x1", "y1", "z1", "nx", "ny", "w_left", "w_right", "z_inf", "z_sup",
            "fallback",
        ])
        .comment("safe flight corridor, one sub-corridor per row");
        for (i, s) in self.subs.iter().enumerate() {
            t.push(vec![
                i as f64,
                s.start.x,
                s.start.y,
                s.start.z,
                s.end.x,
                s.end.y,
                s.end.z,
                s.normal.x,
                s.normal.y,
                s.width_left,
                s.width_right,
                s.z_inf,
                s.z_sup,
                s.fallback as u8 as f64,
            ]);
        }
        t
    }
}
