//! The planning MDP: each decision appends one B-spline control point
//! chosen through an acceleration action, scored against the corridor.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::bspline::{init_from_state, segment_jerk, segment_point, BSplineTrajectory, KinematicState};
use crate::corridor::{PlanningConfig, PlanningMaps, SafeFlightCorridor};
use crate::pathsearch::{astar_3d, simplify_polyline, split_long_segments, ReferencePolyline, VoxelPath};
use crate::table::Table;
use crate::worldmap::OccupancyGrid;
use crate::{Result, Vec3};

/// Dynamic limits for one maximum speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionSpec {
    pub v_max: f64,
    pub a_max: f64,
    pub j_max: f64,
    pub vz_max: f64,
    pub az_max: f64,
    /// Slack allowed when checking mapped actions against the limits.
    pub eps: f64,
}

impl ActionSpec {
    pub fn for_max_speed(v_max: f64) -> Self {
        let a_max = 2.0 * v_max;
        ActionSpec {
            v_max,
            a_max,
            j_max: 50.0 + 10.0 * v_max,
            vz_max: v_max / 2.0,
            az_max: a_max.min(6.0),
            eps: 1e-9,
        }
    }
}

/// Maps a cube action to an acceleration whose horizontal part lies in a
/// disc of radius `a_max`.
pub fn transform_action(alpha: [f64; 3], spec: &ActionSpec) -> Vec3 {
    let [ax, ay, az] = alpha;
    let r = ax.hypot(ay);
    let m = ax.abs().max(ay.abs());
    let s = if r > 0.0 { m / r } else { 0.0 };
    Vec3::new(ax * s * spec.a_max, ay * s * spec.a_max, az * spec.az_max)
}

pub fn clamp_velocity(v: Vec3, spec: &ActionSpec) -> Vec3 {
    let vz = v.z.clamp(-spec.vz_max, spec.vz_max);
    if v.x.hypot(v.y) <= spec.v_max {
        return Vec3::new(v.x, v.y, vz);
    }
    let mut s = spec.v_max / v.x.hypot(v.y);
    // Rounding may leave the rescaled norm an ulp above the cap, which
    // would make a second clamp move the vector again.
    while (v.x * s).hypot(v.y * s) > spec.v_max {
        s *= 1.0 - f64::EPSILON;
    }
    Vec3::new(v.x * s, v.y * s, vz)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    /// Corridor-exit weight; its magnitude scales the penalty.
    pub k_p: f64,
    pub k_f: f64,
    pub k_s: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            k_p: -30.0,
            k_f: 5.0,
            k_s: 50.0,
        }
    }
}

impl RewardConfig {
    /// Weighted total. The exit term is always a penalty regardless of the
    /// sign convention used for `k_p`.
    pub fn total(&self, r_p: f64, r_f: f64, r_s: f64) -> f64 {
        self.k_p.abs() * r_p + self.k_f * r_f + self.k_s * r_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StartNoise {
    pub position_sigma: f64,
    pub velocity_sigma: f64,
}

impl Default for StartNoise {
    fn default() -> Self {
        StartNoise {
            position_sigma: 0.05,
            velocity_sigma: 0.1,
        }
    }
}

impl StartNoise {
    pub fn apply<R: Rng + ?Sized>(&self, s: &KinematicState, rng: &mut R) -> KinematicState {
        let mut draw = |sigma: f64| -> Vec3 {
            if sigma > 0.0 {
                let n = Normal::new(0.0, sigma).expect("positive sigma");
                Vec3::new(n.sample(rng), n.sample(rng), n.sample(rng))
            } else {
                Vec3::zeros()
            }
        };
        let dp = draw(self.position_sigma);
        let dv = draw(self.velocity_sigma);
        KinematicState {
            position: s.position + dp,
            velocity: s.velocity + dv,
            acceleration: s.acceleration,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub v_max: f64,
    pub knot_interval: f64,
    pub horizon: usize,
    /// Sub-corridors visible in the observation.
    pub window: usize,
    pub position_scale: f64,
    pub collision_samples: usize,
    pub reward: RewardConfig,
    pub start_noise: StartNoise,
    pub planning: PlanningConfig,
    pub a_max: Option<f64>,
    pub j_max: Option<f64>,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            v_max: 4.0,
            knot_interval: 0.3,
            horizon: 100,
            window: 9,
            position_scale: 10.0,
            collision_samples: 10,
            reward: RewardConfig::default(),
            start_noise: StartNoise::default(),
            planning: PlanningConfig::default(),
            a_max: None,
            j_max: None,
        }
    }
}

impl EnvConfig {
    pub fn with_max_speed(v_max: f64) -> Self {
        EnvConfig {
            v_max,
            ..EnvConfig::default()
        }
    }

    pub fn action_spec(&self) -> ActionSpec {
        let mut s = ActionSpec::for_max_speed(self.v_max);
        if let Some(a) = self.a_max {
            s.a_max = a;
            s.az_max = a.min(6.0);
        }
        if let Some(j) = self.j_max {
            s.j_max = j;
        }
        s
    }

    pub fn observation_dim(&self) -> usize {
        observation_dim(self.window)
    }
}

pub fn observation_dim(window: usize) -> usize {
    9 + 6 * window + 2 + 1
}

/// Signed polyline progress from sub-corridor `m` to `n`.
pub fn reward_follow(m: usize, n: usize, lengths: &[f64]) -> f64 {
    if n >= m {
        lengths[m..n].iter().sum()
    } else {
        -lengths[n..m].iter().sum::<f64>()
    }
}

pub fn jerk_discount(r_f: f64, jerk: f64, j_max: f64) -> f64 {
    if jerk <= j_max / 2.0 {
        r_f
    } else if jerk <= j_max {
        r_f * 2.0 * (j_max - jerk) / j_max
    } else {
        0.0
    }
}

/// `0` if all samples `u = k/count`, `k = 1..=count`, of the segment lie in
/// the corridor, else `-1`.
pub fn reward_collision(seg: [Vec3; 4], sfc: &SafeFlightCorridor, count: usize) -> f64 {
    let inside = (1..=count).all(|k| sfc.contains(segment_point(seg, k as f64 / count as f64)));
    if inside {
        0.0
    } else {
        -1.0
    }
}

pub fn reward_success(next_index: usize, last_index: usize) -> f64 {
    if next_index == last_index {
        1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Success,
    CorridorExit,
    JerkViolation,
    Horizon,
}

impl Termination {
    pub fn name(self) -> &'static str {
        match self {
            Termination::Success => "success",
            Termination::CorridorExit => "corridor_exit",
            Termination::JerkViolation => "jerk_violation",
            Termination::Horizon => "horizon",
        }
    }

    pub fn code(self) -> f64 {
        match self {
            Termination::Success => 0.0,
            Termination::CorridorExit => 1.0,
            Termination::JerkViolation => 2.0,
            Termination::Horizon => 3.0,
        }
    }
}

/// The last three control points plus bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerState {
    pub points: [Vec3; 3],
    pub velocity: Vec3,
    /// Sub-corridor containing the current knot.
    pub index: usize,
    /// Decisions taken so far; the current knot is `τ_{step + 2}`.
    pub step: usize,
}

impl PlannerState {
    pub fn new(start: &KinematicState, sfc: &SafeFlightCorridor, knot_interval: f64) -> Self {
        let points = init_from_state(start, knot_interval);
        let mut s = PlannerState {
            points,
            velocity: (points[2] - points[1]) / knot_interval,
            index: 0,
            step: 0,
        };
        s.index = sfc.locate(s.knot()).unwrap_or(0);
        s
    }

    pub fn knot(&self) -> Vec3 {
        let [a, b, c] = self.points;
        (a + b * 4.0 + c) / 6.0
    }

    pub fn knot_time(&self, knot_interval: f64) -> f64 {
        (self.step + 2) as f64 * knot_interval
    }
}

pub fn observe(state: &PlannerState, sfc: &SafeFlightCorridor, cfg: &EnvConfig) -> Vec<f64> {
    let o = state.knot();
    let ps = cfg.position_scale;
    let cap = cfg.planning.width_cap;
    let mut obs = Vec::with_capacity(cfg.observation_dim());
    for p in &state.points {
        obs.extend([(p.x - o.x) / ps, (p.y - o.y) / ps, (p.z - o.z) / ps]);
    }
    let w = sfc
        .observation_window(state.index, cfg.window, o)
        .expect("state index inside corridor");
    let vertex_values = 2 * (cfg.window + 1);
    obs.extend(w[..vertex_values].iter().map(|v| v / ps));
    for c in w[vertex_values..].chunks(4) {
        obs.extend([c[0] / cap, c[1] / cap, c[2] / ps, c[3] / ps]);
    }
    obs.push((state.step + 2) as f64 / cfg.horizon as f64);
    obs
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RewardParts {
    pub r_p: f64,
    pub r_f_raw: f64,
    pub r_f: f64,
    pub r_s: f64,
    pub jerk: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// Observation of the successor state.
    pub observation: Vec<f64>,
    pub reward: f64,
    /// Corridor exit or jerk violation.
    pub terminated: bool,
    pub success: bool,
    /// Horizon reached without any other cause.
    pub truncated: bool,
    pub cause: Option<Termination>,
    pub parts: RewardParts,
    pub acceleration: Vec3,
    pub new_point: Vec3,
}

impl StepOutcome {
    /// True when the next state should not be bootstrapped.
    pub fn done(&self) -> bool {
        self.terminated || self.success
    }

    pub fn ends_episode(&self) -> bool {
        self.cause.is_some()
    }
}

pub fn step(
    state: &PlannerState,
    alpha: [f64; 3],
    sfc: &SafeFlightCorridor,
    cfg: &EnvConfig,
) -> (StepOutcome, PlannerState) {
    let spec = cfg.action_spec();
    let dt = cfg.knot_interval;
    let acceleration = transform_action(alpha, &spec);
    let velocity = clamp_velocity(state.velocity + acceleration * dt, &spec);
    let [p0, p1, p2] = state.points;
    let p3 = p2 + velocity * dt;
    let seg = [p0, p1, p2, p3];
    let r_p = reward_collision(seg, sfc, cfg.collision_samples);
    let jerk = segment_jerk(seg, dt).norm();
    let mut next = PlannerState {
        points: [p1, p2, p3],
        velocity,
        index: state.index,
        step: state.step + 1,
    };
    let located = sfc.locate(next.knot());
    if let Some(i) = located {
        next.index = i;
    }
    let r_f_raw = reward_follow(state.index, next.index, &sfc.segment_lengths());
    let r_f = jerk_discount(r_f_raw, jerk, spec.j_max);
    let exited = r_p < 0.0;
    let r_s = if exited {
        0.0
    } else {
        reward_success(next.index, sfc.last_index())
    };
    let jerk_violation = jerk > spec.j_max;
    let terminated = exited || jerk_violation;
    let cause = if exited {
        Some(Termination::CorridorExit)
    } else if jerk_violation {
        Some(Termination::JerkViolation)
    } else if r_s > 0.0 {
        Some(Termination::Success)
    } else if next.step >= cfg.horizon {
        Some(Termination::Horizon)
    } else {
        None
    };
    let success = cause == Some(Termination::Success);
    let reward = cfg.reward.total(r_p, r_f, r_s);
    let observation = observe(&next, sfc, cfg);
    let outcome = StepOutcome {
        observation,
        reward,
        terminated,
        success,
        truncated: cause == Some(Termination::Horizon),
        cause,
        parts: RewardParts {
            r_p,
            r_f_raw,
            r_f,
            r_s,
            jerk,
        },
        acceleration,
        new_point: p3,
    };
    (outcome, next)
}

/// Anything that maps an observation to a cube action.
pub trait Policy {
    fn act(&mut self, observation: &[f64]) -> [f64; 3];
}

impl<F: FnMut(&[f64]) -> [f64; 3]> Policy for F {
    fn act(&mut self, observation: &[f64]) -> [f64; 3] {
        self(observation)
    }
}

/// Always outputs the zero action.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroPolicy;

impl Policy for ZeroPolicy {
    fn act(&mut self, _: &[f64]) -> [f64; 3] {
        [0.0; 3]
    }
}

/// Reference path, polyline and corridor for one start/goal query.
#[derive(Debug, Clone)]
pub struct Plan {
    pub start: Vec3,
    pub goal: Vec3,
    pub path: VoxelPath,
    pub polyline: ReferencePolyline,
    pub corridor: SafeFlightCorridor,
}

pub fn build_plan(raw: &OccupancyGrid, start: Vec3, goal: Vec3, cfg: &PlanningConfig) -> Result<Plan> {
    let maps = PlanningMaps::new(raw, cfg);
    build_plan_on(&maps, start, goal, cfg)
}

pub fn build_plan_on(maps: &PlanningMaps, start: Vec3, goal: Vec3, cfg: &PlanningConfig) -> Result<Plan> {
    let path = astar_3d(&maps.search, start, goal)?;
    plan_from_path(maps, path, start, goal, cfg)
}

/// Finishes a plan from an already computed A* path.
pub fn plan_from_path(maps: &PlanningMaps, path: VoxelPath, start: Vec3, goal: Vec3, cfg: &PlanningConfig) -> Result<Plan> {
    let polyline = reference_polyline(maps, &path, cfg);
    let corridor = SafeFlightCorridor::build(&maps.corridor, &polyline, cfg)?;
    Ok(Plan {
        start,
        goal,
        path,
        polyline,
        corridor,
    })
}

pub(crate) fn reference_polyline(maps: &PlanningMaps, path: &VoxelPath, cfg: &PlanningConfig) -> ReferencePolyline {
    let mut pts = path.waypoints.clone();
    if pts.len() == 1 {
        pts.push(pts[0]);
    }
    let simple = simplify_polyline(&maps.search, &pts);
    split_long_segments(&simple, cfg.max_segment_len)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub alpha: [f64; 3],
    pub acceleration: Vec3,
    pub velocity: Vec3,
    /// Knot position after the step.
    pub knot: Vec3,
    pub index: usize,
    pub reward: f64,
    pub parts: RewardParts,
}

#[derive(Debug, Clone)]
pub struct Episode {
    pub trajectory: BSplineTrajectory,
    pub steps: Vec<StepRecord>,
    pub cause: Termination,
    pub final_index: usize,
}

impl Episode {
    pub fn success(&self) -> bool {
        self.cause == Termination::Success
    }

    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    /// Simulated duration: knots traversed times the knot interval.
    pub fn duration(&self) -> f64 {
        self.steps.len() as f64 * self.trajectory.knot_interval()
    }

    pub fn peak_speed(&self) -> f64 {
        self.steps.iter().map(|s| s.velocity.norm()).fold(0.0, f64::max)
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new([
            "step", "alpha_x", "alpha_y", "alpha_z", "acc_x", "acc_y", "acc_z", "vel_x", "vel_y", "vel_z", "knot_x",
            "knot_y", "knot_z", "index", "reward", "r_p", "r_f_raw", "r_f", "r_s", "jerk",
        ])
        .comment(format!("episode ended by {}", self.cause.name()));
        for s in &self.steps {
            t.push(vec![
                s.step as f64,
                s.alpha[0],
                s.alpha[1],
                s.alpha[2],
                s.acceleration.x,
                s.acceleration.y,
                s.acceleration.z,
                s.velocity.x,
                s.velocity.y,
                s.velocity.z,
                s.knot.x,
                s.knot.y,
                s.knot.z,
                s.index as f64,
                s.reward,
                s.parts.r_p,
                s.parts.r_f_raw,
                s.parts.r_f,
                s.parts.r_s,
                s.parts.jerk,
            ]);
        }
        t
    }
}

/// Steps `policy` from `start` until the episode ends.
pub fn run_episode(
    sfc: &SafeFlightCorridor,
    start: &KinematicState,
    policy: &mut dyn Policy,
    cfg: &EnvConfig,
) -> Episode {
    let mut state = PlannerState::new(start, sfc, cfg.knot_interval);
    let mut points = state.points.to_vec();
    let mut steps = Vec::new();
    let mut obs = observe(&state, sfc, cfg);
    loop {
        let alpha = policy.act(&obs);
        let (out, next) = step(&state, alpha, sfc, cfg);
        points.push(out.new_point);
        steps.push(StepRecord {
            step: state.step,
            alpha,
            acceleration: out.acceleration,
            velocity: next.velocity,
            knot: next.knot(),
            index: next.index,
            reward: out.reward,
            parts: out.parts,
        });
        state = next;
        obs = out.observation;
        if let Some(cause) = out.cause {
            let trajectory =
                BSplineTrajectory::new(points, cfg.knot_interval).expect("positive knot interval");
            return Episode {
                trajectory,
                steps,
                cause,
                final_index: state.index,
            };
        }
    }
}

/// Plans on `map` and flies `policy` from `start` toward `goal`.
pub fn rollout(
    map: &OccupancyGrid,
    start: &KinematicState,
    goal: Vec3,
    policy: &mut dyn Policy,
    cfg: &EnvConfig,
) -> Result<(Plan, Episode)> {
    let plan = build_plan(map, start.position, goal, &cfg.planning)?;
    let ep = run_episode(&plan.corridor, start, policy, cfg);
    Ok((plan, ep))
}

/// Dense membership audit: samples `per_segment` points per knot interval
/// over the flown part of `traj` and counts those outside `sfc`.
pub fn audit_trajectory(traj: &BSplineTrajectory, sfc: &SafeFlightCorridor, per_segment: usize) -> usize {
    let p = traj.control_points();
    let mut bad = 0;
    for w in p.windows(4) {
        let seg = [w[0], w[1], w[2], w[3]];
        bad += (1..=per_segment)
            .filter(|&k| !sfc.contains(segment_point(seg, k as f64 / per_segment as f64)))
            .count();
    }
    bad
}
