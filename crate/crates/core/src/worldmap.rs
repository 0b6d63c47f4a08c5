//! Occupancy grids, map files and procedural scenario generation.
//!
//! Voxel `(i, j, k)` covers `origin + [i, i+1) x [j, j+1) x [k, k+1)` times
//! the resolution. Anything outside the grid is reported as occupied.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corridor::{PlanningConfig, PlanningMaps};
use crate::pathsearch;
use crate::{Error, Result, Vec3};

/// Integer voxel coordinates. Negative and too-large values are valid
/// queries; they simply fall outside the grid.
pub type VoxelIndex = [i32; 3];

const MAP_MAGIC: &[u8; 4] = b"OGRD";
const MAP_VERSION: u16 = 1;
const TEXT_HEADER: &str = "# occupancy-grid text v1";

#[derive(Debug, Error, PartialEq)]
pub enum MapError {
    #[error("resolution must be positive and finite, got {0}")]
    BadResolution(f64),
    #[error("grid dimensions must all be >= 1, got {0:?}")]
    BadDims([usize; 3]),
    #[error("cell buffer has {got} entries, grid needs {want}")]
    CellCount { got: usize, want: usize },
    #[error("invalid scenario: {0}")]
    BadScenario(String),
    #[error("no feasible scenario after {attempts} attempts (seed {seed})")]
    Infeasible { seed: u64, attempts: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    origin: Vec3,
    resolution: f64,
    dims: [usize; 3],
    cells: Vec<bool>,
}

impl OccupancyGrid {
    /// An all-free grid.
    pub fn new(origin: Vec3, resolution: f64, dims: [usize; 3]) -> Result<Self, MapError> {
        let n = Self::validate(resolution, dims)?;
        Ok(OccupancyGrid {
            origin,
            resolution,
            dims,
            cells: vec![false; n],
        })
    }

    pub fn from_cells(
        origin: Vec3,
        resolution: f64,
        dims: [usize; 3],
        cells: Vec<bool>,
    ) -> Result<Self, MapError> {
        let n = Self::validate(resolution, dims)?;
        if cells.len() != n {
            return Err(MapError::CellCount {
                got: cells.len(),
                want: n,
            });
        }
        Ok(OccupancyGrid {
            origin,
            resolution,
            dims,
            cells,
        })
    }

    fn validate(resolution: f64, dims: [usize; 3]) -> Result<usize, MapError> {
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(MapError::BadResolution(resolution));
        }
        if dims.iter().any(|&d| d == 0 || d > i32::MAX as usize) {
            return Err(MapError::BadDims(dims));
        }
        Ok(dims[0] * dims[1] * dims[2])
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Far corner of the grid in world coordinates.
    pub fn upper_corner(&self) -> Vec3 {
        self.origin
            + Vec3::new(
                self.dims[0] as f64,
                self.dims[1] as f64,
                self.dims[2] as f64,
            ) * self.resolution
    }

    pub fn in_bounds(&self, v: VoxelIndex) -> bool {
        (0..3).all(|a| v[a] >= 0 && (v[a] as usize) < self.dims[a])
    }

    pub fn linear_index(&self, v: VoxelIndex) -> Option<usize> {
        self.in_bounds(v).then(|| {
            v[0] as usize + self.dims[0] * (v[1] as usize + self.dims[1] * v[2] as usize)
        })
    }

    pub fn voxel_of_linear(&self, idx: usize) -> VoxelIndex {
        let x = idx % self.dims[0];
        let y = (idx / self.dims[0]) % self.dims[1];
        let z = idx / (self.dims[0] * self.dims[1]);
        [x as i32, y as i32, z as i32]
    }

    /// Occupancy of a voxel; out-of-range voxels count as occupied.
    pub fn voxel_occupied(&self, v: VoxelIndex) -> bool {
        match self.linear_index(v) {
            Some(i) => self.cells[i],
            None => true,
        }
    }

    pub fn set(&mut self, v: VoxelIndex, occupied: bool) {
        if let Some(i) = self.linear_index(v) {
            self.cells[i] = occupied;
        }
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    pub fn world_to_voxel(&self, p: Vec3) -> VoxelIndex {
        let r = (p - self.origin) / self.resolution;
        let f = |x: f64| x.floor().clamp(i32::MIN as f64, i32::MAX as f64) as i32;
        [f(r.x), f(r.y), f(r.z)]
    }

    /// Center of voxel `v`.
    pub fn voxel_to_world(&self, v: VoxelIndex) -> Vec3 {
        self.origin
            + Vec3::new(
                v[0] as f64 + 0.5,
                v[1] as f64 + 0.5,
                v[2] as f64 + 0.5,
            ) * self.resolution
    }

    /// True iff the voxel containing `p` is occupied or `p` is outside the grid.
    pub fn is_occupied(&self, p: Vec3) -> bool {
        self.voxel_occupied(self.world_to_voxel(p))
    }

    pub fn occupied_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn occupied_voxels(&self) -> impl Iterator<Item = VoxelIndex> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &c)| c)
            .map(|(i, _)| self.voxel_of_linear(i))
    }

    /// Cube (Chebyshev) dilation by `r` voxels; `r = 1` is the 26-neighborhood.
    pub fn dilate(&self, r: usize) -> OccupancyGrid {
        if r == 0 {
            return self.clone();
        }
        let [nx, ny, _] = self.dims;
        let mut cur = self.cells.clone();
        let strides = [1, nx, nx * ny];
        for axis in 0..3 {
            let n = self.dims[axis];
            let stride = strides[axis];
            let mut next = vec![false; cur.len()];
            let mut line_prefix = vec![0u32; n + 1];
            // Every line along `axis` is identified by its start cell.
            for start in 0..cur.len() {
                let coord = (start / stride) % n;
                if coord != 0 {
                    continue;
                }
                for i in 0..n {
                    line_prefix[i + 1] = line_prefix[i] + cur[start + i * stride] as u32;
                }
                for i in 0..n {
                    let lo = i.saturating_sub(r);
                    let hi = (i + r + 1).min(n);
                    next[start + i * stride] = line_prefix[hi] > line_prefix[lo];
                }
            }
            cur = next;
        }
        OccupancyGrid {
            origin: self.origin,
            resolution: self.resolution,
            dims: self.dims,
            cells: cur,
        }
    }

    /// Bit-packed binary encoding: magic, version, origin, resolution, dims,
    /// then occupancy LSB-first in x-fastest order. All fields little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(48 + self.cells.len() / 8 + 1);
        out.extend_from_slice(MAP_MAGIC);
        out.extend_from_slice(&MAP_VERSION.to_le_bytes());
        out.extend_from_slice(&0u16.to_le_bytes());
        for a in 0..3 {
            out.extend_from_slice(&self.origin[a].to_le_bytes());
        }
        out.extend_from_slice(&self.resolution.to_le_bytes());
        for d in self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        let mut byte = 0u8;
        for (i, &c) in self.cells.iter().enumerate() {
            if c {
                byte |= 1 << (i % 8);
            }
            if i % 8 == 7 {
                out.push(byte);
                byte = 0;
            }
        }
        if self.cells.len() % 8 != 0 {
            out.push(byte);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<OccupancyGrid, String> {
        let mut r = ByteReader { buf: bytes, pos: 0 };
        if r.take(4)? != MAP_MAGIC {
            return Err("bad magic".into());
        }
        let version = u16::from_le_bytes(r.take(2)?.try_into().unwrap());
        if version != MAP_VERSION {
            return Err(format!("unsupported version {version}"));
        }
        r.take(2)?;
        let origin = Vec3::new(r.f64()?, r.f64()?, r.f64()?);
        let resolution = r.f64()?;
        let dims = [r.u32()? as usize, r.u32()? as usize, r.u32()? as usize];
        let n = Self::validate(resolution, dims).map_err(|e| e.to_string())?;
        let packed = r.take(n.div_ceil(8))?;
        if r.pos != bytes.len() {
            return Err("trailing bytes after occupancy".into());
        }
        let cells = (0..n).map(|i| packed[i / 8] & (1 << (i % 8)) != 0).collect();
        Ok(OccupancyGrid {
            origin,
            resolution,
            dims,
            cells,
        })
    }

    /// Human-readable variant: header lines, then one `.`/`#` row per (y, z),
    /// grouped in `z` blocks.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(TEXT_HEADER);
        s.push('\n');
        s.push_str(&format!(
            "origin {} {} {}\nresolution {}\ndims {} {} {}\n",
            self.origin.x,
            self.origin.y,
            self.origin.z,
            self.resolution,
            self.dims[0],
            self.dims[1],
            self.dims[2]
        ));
        for z in 0..self.dims[2] {
            s.push_str(&format!("z {z}\n"));
            for y in 0..self.dims[1] {
                for x in 0..self.dims[0] {
                    let occ = self.voxel_occupied([x as i32, y as i32, z as i32]);
                    s.push(if occ { '#' } else { '.' });
                }
                s.push('\n');
            }
        }
        s
    }

    pub fn from_text(text: &str) -> std::result::Result<OccupancyGrid, String> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(TEXT_HEADER) {
            return Err("missing text header".into());
        }
        let mut field = |name: &str| -> std::result::Result<Vec<String>, String> {
            let line = lines.next().ok_or_else(|| format!("missing {name}"))?;
            let mut it = line.split_whitespace();
            if it.next() != Some(name) {
                return Err(format!("expected {name}"));
            }
            Ok(it.map(String::from).collect())
        };
        let num = |v: &[String], n: usize| -> std::result::Result<Vec<f64>, String> {
            if v.len() != n {
                return Err("wrong field count".into());
            }
            v.iter()
                .map(|t| t.parse::<f64>().map_err(|e| e.to_string()))
                .collect()
        };
        let o = num(&field("origin")?, 3)?;
        let res = num(&field("resolution")?, 1)?[0];
        let d = num(&field("dims")?, 3)?;
        let dims = [d[0] as usize, d[1] as usize, d[2] as usize];
        let mut grid = OccupancyGrid::new(Vec3::new(o[0], o[1], o[2]), res, dims)
            .map_err(|e| e.to_string())?;
        for z in 0..dims[2] {
            let tag = lines.next().ok_or("truncated z block")?;
            if tag.trim() != format!("z {z}") {
                return Err(format!("expected z {z}"));
            }
            for y in 0..dims[1] {
                let row = lines.next().ok_or("truncated row")?;
                let row = row.trim_end();
                if row.chars().count() != dims[0] {
                    return Err(format!("row z={z} y={y} has wrong length"));
                }
                for (x, ch) in row.chars().enumerate() {
                    match ch {
                        '#' => grid.set([x as i32, y as i32, z as i32], true),
                        '.' => {}
                        other => return Err(format!("bad cell character {other:?}")),
                    }
                }
            }
        }
        Ok(grid)
    }
}

struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        if self.pos + n > self.buf.len() {
            return Err(format!("truncated: need {n} bytes at offset {}", self.pos));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn f64(&mut self) -> std::result::Result<f64, String> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// Writes `map` to `path`. A `.txt` extension selects the text variant.
pub fn export_map(map: &OccupancyGrid, path: &Path) -> Result<()> {
    let data = if is_text_path(path) {
        map.to_text().into_bytes()
    } else {
        map.to_bytes()
    };
    std::fs::write(path, data).map_err(|e| Error::io(path, e))
}

pub fn import_map(path: &Path) -> Result<OccupancyGrid> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let parsed = if is_text_path(path) {
        let text = String::from_utf8(bytes).map_err(|e| Error::format(path, e.to_string()))?;
        OccupancyGrid::from_text(&text)
    } else {
        OccupancyGrid::from_bytes(&bytes)
    };
    parsed.map_err(|msg| Error::format(path, msg))
}

fn is_text_path(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "txt")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    CurriculumWalls,
    BenchmarkWalls,
    Forest,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

/// Procedural scenario description. Travel is along +y; wall spacing
/// interpolates from `spacing_near` at the start side to `spacing_far` at
/// the goal side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub extent: Aabb,
    pub resolution: f64,
    pub spacing_near: f64,
    pub spacing_far: f64,
    pub gap_size_range: [f64; 2],
    pub obstacle_count: usize,
    pub rng_seed: u64,
    pub start: Option<[f64; 3]>,
    pub goal: Option<[f64; 3]>,
    pub max_attempts: usize,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec::curriculum(0)
    }
}

impl ScenarioSpec {
    fn course(kind: ScenarioKind, near: f64, far: f64, seed: u64) -> Self {
        ScenarioSpec {
            kind,
            extent: Aabb {
                min: [-10.0, -34.0, 0.0],
                max: [10.0, 34.0, 3.0],
            },
            resolution: 0.15,
            spacing_near: near,
            spacing_far: far,
            gap_size_range: [0.8, 1.6],
            obstacle_count: 0,
            rng_seed: seed,
            start: Some([0.0, -32.0, 1.0]),
            goal: Some([0.0, 32.0, 1.0]),
            max_attempts: 16,
        }
    }

    /// Easy-to-hard training course, 4.5 m down to 2.75 m wall spacing.
    pub fn curriculum(seed: u64) -> Self {
        Self::course(ScenarioKind::CurriculumWalls, 4.5, 2.75, seed)
    }

    pub fn sparse_walls(seed: u64) -> Self {
        Self::course(ScenarioKind::BenchmarkWalls, 5.0, 3.5, seed)
    }

    pub fn dense_walls(seed: u64) -> Self {
        Self::course(ScenarioKind::BenchmarkWalls, 4.0, 2.0, seed)
    }

    pub fn forest(seed: u64) -> Self {
        let mut s = Self::course(ScenarioKind::Forest, 0.0, 0.0, seed);
        s.obstacle_count = 200;
        s
    }

    pub fn start_point(&self) -> Vec3 {
        let e = &self.extent;
        let p = self
            .start
            .unwrap_or([0.5 * (e.min[0] + e.max[0]), e.min[1] + 1.0, 1.0]);
        Vec3::from(p)
    }

    pub fn goal_point(&self) -> Vec3 {
        let e = &self.extent;
        let p = self
            .goal
            .unwrap_or([0.5 * (e.min[0] + e.max[0]), e.max[1] - 1.0, 1.0]);
        Vec3::from(p)
    }

    pub fn validate(&self) -> Result<(), MapError> {
        let bad = |m: &str| Err(MapError::BadScenario(m.to_string()));
        let e = &self.extent;
        if (0..3).any(|a| !(e.max[a] > e.min[a])) {
            return bad("extent must have positive size on every axis");
        }
        if !(self.resolution > 0.0) {
            return bad("resolution must be positive");
        }
        if self.kind != ScenarioKind::Forest {
            if !(self.spacing_near > 0.0 && self.spacing_far > 0.0) {
                return bad("wall spacing must be positive");
            }
            if self.spacing_far > self.spacing_near {
                return bad("spacing_far must not exceed spacing_near");
            }
            let [glo, ghi] = self.gap_size_range;
            if !(glo > 0.0 && ghi >= glo) {
                return bad("gap_size_range must be positive and ordered");
            }
        }
        let inside = |p: Vec3| (0..3).all(|a| p[a] > e.min[a] && p[a] < e.max[a]);
        if !inside(self.start_point()) || !inside(self.goal_point()) {
            return bad("start and goal must lie inside the extent");
        }
        if self.max_attempts == 0 {
            return bad("max_attempts must be >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gap {
    pub x_min: f64,
    pub x_max: f64,
    pub z_min: f64,
    pub z_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Obstacle {
    /// One-voxel-thick slab perpendicular to y, with rectangular openings.
    Wall { y: f64, gaps: Vec<Gap> },
    Cylinder { center: [f64; 2], radius: f64 },
    Ring { center: [f64; 2], inner: f64, outer: f64 },
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub grid: OccupancyGrid,
    pub start: Vec3,
    pub goal: Vec3,
    pub obstacles: Vec<Obstacle>,
    /// Seed of the attempt that produced a feasible map.
    pub seed_used: u64,
}

impl Scenario {
    /// Successive wall y-coordinates (empty for forests).
    pub fn wall_positions(&self) -> Vec<f64> {
        self.obstacles
            .iter()
            .filter_map(|o| match o {
                Obstacle::Wall { y, .. } => Some(*y),
                _ => None,
            })
            .collect()
    }
}

pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn generate_scenario(spec: &ScenarioSpec) -> Result<Scenario> {
    generate_scenario_with(spec, &PlanningConfig::default())
}

/// Deterministic in `spec`. Retries with derived seeds until A* (on the
/// planning maps built with `planning`) connects start and goal.
pub fn generate_scenario_with(spec: &ScenarioSpec, planning: &PlanningConfig) -> Result<Scenario> {
    generate_planned(spec, planning).map(|p| p.scenario)
}

/// A generated scenario together with the planning maps and the A* path
/// found by the feasibility check.
#[derive(Debug, Clone)]
pub struct PlannedScenario {
    pub scenario: Scenario,
    pub maps: PlanningMaps,
    pub path: pathsearch::VoxelPath,
}

pub fn generate_planned(spec: &ScenarioSpec, planning: &PlanningConfig) -> Result<PlannedScenario> {
    spec.validate()?;
    for attempt in 0..spec.max_attempts {
        let seed = if attempt == 0 {
            spec.rng_seed
        } else {
            splitmix64(spec.rng_seed ^ (attempt as u64).wrapping_mul(0xA24B_AED4_963E_E407))
        };
        let scenario = build_once(spec, seed)?;
        let maps = PlanningMaps::new(&scenario.grid, planning);
        if let Ok(path) = pathsearch::astar_3d(&maps.search, scenario.start, scenario.goal) {
            return Ok(PlannedScenario { scenario, maps, path });
        }
    }
    Err(MapError::Infeasible {
        seed: spec.rng_seed,
        attempts: spec.max_attempts,
    }
    .into())
}

fn build_once(spec: &ScenarioSpec, seed: u64) -> Result<Scenario, MapError> {
    let e = &spec.extent;
    let res = spec.resolution;
    let dims = [0, 1, 2].map(|a| (((e.max[a] - e.min[a]) / res).round() as usize).max(1));
    let mut grid = OccupancyGrid::new(Vec3::from(e.min), res, dims)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = spec.start_point();
    let goal = spec.goal_point();
    let obstacles = match spec.kind {
        ScenarioKind::CurriculumWalls | ScenarioKind::BenchmarkWalls => {
            place_walls(spec, &mut grid, &mut rng, start, goal)
        }
        ScenarioKind::Forest => place_forest(spec, &mut grid, &mut rng, start, goal),
    };
    Ok(Scenario {
        grid,
        start,
        goal,
        obstacles,
        seed_used: seed,
    })
}

fn place_walls(
    spec: &ScenarioSpec,
    grid: &mut OccupancyGrid,
    rng: &mut ChaCha8Rng,
    start: Vec3,
    goal: Vec3,
) -> Vec<Obstacle> {
    let res = grid.resolution();
    let [nx, _, nz] = grid.dims();
    let y0 = start.y;
    let y1 = goal.y;
    let spacing_at = |y: f64| {
        let f = ((y - y0) / (y1 - y0)).clamp(0.0, 1.0);
        spec.spacing_near + (spec.spacing_far - spec.spacing_near) * f
    };
    // Spacing is chosen in whole voxels and never allowed to grow, so the
    // snapped wall positions keep the monotone density profile exactly.
    let mut row = grid.world_to_voxel(Vec3::new(0.0, y0 + spec.spacing_near, 0.0))[1];
    let mut last_step = i32::MAX;
    let goal_row = grid.world_to_voxel(Vec3::new(0.0, y1 - 1.5, 0.0))[1];
    let mut walls = Vec::new();
    while row <= goal_row {
        let y = grid.voxel_to_world([0, row, 0]).y;
        let gaps = sample_gaps(spec, rng);
        for ix in 0..nx as i32 {
            for iz in 0..nz as i32 {
                let c = grid.voxel_to_world([ix, row, iz]);
                let open = gaps
                    .iter()
                    .any(|g| c.x >= g.x_min && c.x <= g.x_max && c.z >= g.z_min && c.z <= g.z_max);
                if !open {
                    grid.set([ix, row, iz], true);
                }
            }
        }
        walls.push(Obstacle::Wall { y, gaps });
        let step = ((spacing_at(y) / res).round() as i32).max(1).min(last_step);
        last_step = step;
        row += step;
    }
    walls
}

fn sample_gaps(spec: &ScenarioSpec, rng: &mut ChaCha8Rng) -> Vec<Gap> {
    let e = &spec.extent;
    let [glo, ghi] = spec.gap_size_range;
    let count = rng.random_range(1..=3);
    (0..count)
        .map(|_| {
            let w = if ghi > glo { rng.random_range(glo..ghi) } else { glo };
            let lo = e.min[0] + 0.5 + w / 2.0;
            let hi = (e.max[0] - 0.5 - w / 2.0).max(lo);
            let cx = if hi > lo { rng.random_range(lo..hi) } else { lo };
            let (z_min, z_max) = if rng.random_bool(0.5) {
                (e.min[2], e.max[2])
            } else {
                // Window opening; tall enough to hold the smallest z-band
                // after inflation.
                let h = rng.random_range(1.65f64..2.4).min(e.max[2] - e.min[2]);
                let base_hi = (e.max[2] - h).max(e.min[2] + 0.2);
                let base = if base_hi > e.min[2] + 0.2 {
                    rng.random_range(e.min[2] + 0.2..base_hi)
                } else {
                    e.min[2]
                };
                (base, base + h)
            };
            Gap {
                x_min: cx - w / 2.0,
                x_max: cx + w / 2.0,
                z_min,
                z_max,
            }
        })
        .collect()
}

fn place_forest(
    spec: &ScenarioSpec,
    grid: &mut OccupancyGrid,
    rng: &mut ChaCha8Rng,
    start: Vec3,
    goal: Vec3,
) -> Vec<Obstacle> {
    let e = &spec.extent;
    let clearance = 1.0;
    let mut obstacles = Vec::with_capacity(spec.obstacle_count);
    while obstacles.len() < spec.obstacle_count {
        let center = [
            rng.random_range(e.min[0]..e.max[0]),
            rng.random_range(e.min[1]..e.max[1]),
        ];
        let obstacle = if rng.random_bool(0.7) {
            Obstacle::Cylinder {
                center,
                radius: rng.random_range(0.3..0.8),
            }
        } else {
            let inner = rng.random_range(0.6..1.0);
            Obstacle::Ring {
                center,
                inner,
                outer: inner + rng.random_range(0.15..0.3),
            }
        };
        let outer = match obstacle {
            Obstacle::Cylinder { radius, .. } => radius,
            Obstacle::Ring { outer, .. } => outer,
            Obstacle::Wall { .. } => unreachable!(),
        };
        let near = |p: Vec3| (p.x - center[0]).hypot(p.y - center[1]) < outer + clearance;
        if near(start) || near(goal) {
            continue;
        }
        rasterize_disk(grid, &obstacle);
        obstacles.push(obstacle);
    }
    obstacles
}

fn rasterize_disk(grid: &mut OccupancyGrid, obstacle: &Obstacle) {
    let (center, inner, outer) = match *obstacle {
        Obstacle::Cylinder { center, radius } => (center, 0.0, radius),
        Obstacle::Ring {
            center,
            inner,
            outer,
        } => (center, inner, outer),
        Obstacle::Wall { .. } => return,
    };
    let nz = grid.dims()[2] as i32;
    let lo = grid.world_to_voxel(Vec3::new(center[0] - outer, center[1] - outer, 0.0));
    let hi = grid.world_to_voxel(Vec3::new(center[0] + outer, center[1] + outer, 0.0));
    for ix in lo[0]..=hi[0] {
        for iy in lo[1]..=hi[1] {
            let c = grid.voxel_to_world([ix, iy, 0]);
            let r = (c.x - center[0]).hypot(c.y - center[1]);
            if r <= outer && r >= inner {
                for iz in 0..nz {
                    grid.set([ix, iy, iz], true);
                }
            }
        }
    }
}
