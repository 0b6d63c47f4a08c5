//! Benchmark suites, reports and single-shot planning with timings.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bspline::KinematicState;
use crate::corridor::{PlanningMaps, SafeFlightCorridor};
use crate::env::{audit_trajectory, plan_from_path, run_episode, EnvConfig, Episode, Plan, RewardConfig, Termination};
use crate::pathsearch::astar_3d;
use crate::sdcq::{AgentNetworks, GreedyPolicy};
use crate::worldmap::{generate_planned, import_map, splitmix64, ScenarioSpec};
use crate::{Error, Result, Vec3};

/// Named reward weightings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardProfile {
    /// Fast profile.
    CorbF,
    /// Safe profile.
    CorbS,
    /// Training weights.
    Default,
    /// Weights taken from the suite's `custom_rewards`.
    Custom,
}

impl FromStr for RewardProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "corb_f" => Ok(RewardProfile::CorbF),
            "corb_s" => Ok(RewardProfile::CorbS),
            "default" => Ok(RewardProfile::Default),
            "custom" => Ok(RewardProfile::Custom),
            other => Err(Error::Config(format!("unknown reward profile `{other}`"))),
        }
    }
}

pub fn profile_rewards(profile: RewardProfile) -> Option<RewardConfig> {
    let (k_p, k_f, k_s) = match profile {
        RewardProfile::CorbF => (-30.0, 8.0, 50.0),
        RewardProfile::CorbS => (-50.0, 3.0, 50.0),
        RewardProfile::Default => (-30.0, 5.0, 50.0),
        RewardProfile::Custom => return None,
    };
    Some(RewardConfig { k_p, k_f, k_s })
}

/// Looks a profile up by name.
pub fn profile_rewards_by_name(name: &str) -> Result<RewardConfig> {
    let p: RewardProfile = name.parse()?;
    profile_rewards(p).ok_or_else(|| Error::Config("the custom profile has no fixed weights".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteScenario {
    Forest,
    SparseWalls,
    DenseWalls,
    Curriculum,
}

impl SuiteScenario {
    pub fn spec(self, seed: u64) -> ScenarioSpec {
        match self {
            SuiteScenario::Forest => ScenarioSpec::forest(seed),
            SuiteScenario::SparseWalls => ScenarioSpec::sparse_walls(seed),
            SuiteScenario::DenseWalls => ScenarioSpec::dense_walls(seed),
            SuiteScenario::Curriculum => ScenarioSpec::curriculum(seed),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SuiteScenario::Forest => "forest",
            SuiteScenario::SparseWalls => "sparse_walls",
            SuiteScenario::DenseWalls => "dense_walls",
            SuiteScenario::Curriculum => "curriculum",
        }
    }
}

impl FromStr for SuiteScenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forest" => Ok(SuiteScenario::Forest),
            "sparse_walls" => Ok(SuiteScenario::SparseWalls),
            "dense_walls" => Ok(SuiteScenario::DenseWalls),
            "curriculum" => Ok(SuiteScenario::Curriculum),
            other => Err(Error::Config(format!("unknown scenario `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkSuite {
    pub scenario: SuiteScenario,
    pub v_max: f64,
    pub checkpoint: PathBuf,
    pub episodes: usize,
    pub seed: u64,
    pub profile: RewardProfile,
    pub custom_rewards: Option<RewardConfig>,
    /// Base environment; `v_max` and the reward weights are overridden.
    pub env: EnvConfig,
    /// Audit samples per knot interval.
    pub audit_samples: usize,
}

impl Default for BenchmarkSuite {
    fn default() -> Self {
        BenchmarkSuite {
            scenario: SuiteScenario::SparseWalls,
            v_max: 7.0,
            checkpoint: PathBuf::from("agent.sdcq"),
            episodes: 20,
            seed: 0,
            profile: RewardProfile::CorbF,
            custom_rewards: None,
            env: EnvConfig::default(),
            audit_samples: 100,
        }
    }
}

impl BenchmarkSuite {
    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(Error::Config("episodes must be >= 1".into()));
        }
        if !(self.v_max > 0.0) {
            return Err(Error::Config("v_max must be positive".into()));
        }
        if self.audit_samples == 0 {
            return Err(Error::Config("audit_samples must be >= 1".into()));
        }
        self.rewards().map(|_| ())
    }

    pub fn rewards(&self) -> Result<RewardConfig> {
        match self.profile {
            RewardProfile::Custom => self
                .custom_rewards
                .ok_or_else(|| Error::Config("custom profile needs custom_rewards".into())),
            p => Ok(profile_rewards(p).expect("fixed profile")),
        }
    }

    /// Environment actually flown.
    pub fn env_config(&self) -> Result<EnvConfig> {
        let mut env = self.env.clone();
        env.v_max = self.v_max;
        env.reward = self.rewards()?;
        Ok(env)
    }

    /// Course seed of episode `i`.
    pub fn episode_seed(&self, i: usize) -> u64 {
        splitmix64(self.seed.wrapping_add(i as u64))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchEpisode {
    pub seed: u64,
    pub success: bool,
    pub cause: Termination,
    pub steps: usize,
    /// Knots traversed times the knot interval.
    pub episode_time: f64,
    pub peak_speed: f64,
    pub reward: f64,
    /// Straight-line start to goal distance.
    pub course_length: f64,
    /// Dense samples found outside the corridor.
    pub audit_violations: usize,
}

/// Reference numbers for the same courses from external planners, kept
/// only as annotations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalReference {
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub config: BenchmarkSuite,
    pub episodes: Vec<BenchEpisode>,
    pub success_count: usize,
    pub episode_count: usize,
    /// Mean over successful episodes; NaN when none succeeded.
    pub mean_time: f64,
    pub mean_peak_speed: f64,
    pub external: ExternalReference,
}

impl BenchmarkReport {
    pub fn success_rate(&self) -> f64 {
        self.success_count as f64 / self.episode_count.max(1) as f64
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}

fn load_checked(suite: &BenchmarkSuite, env: &EnvConfig) -> Result<AgentNetworks> {
    let (nets, _) = AgentNetworks::load(&suite.checkpoint)?;
    check_width(&nets, env)?;
    Ok(nets)
}

fn check_width(nets: &AgentNetworks, env: &EnvConfig) -> Result<()> {
    if nets.obs_dim() != env.observation_dim() {
        return Err(Error::Config(format!(
            "checkpoint expects {} observation values but the environment produces {}",
            nets.obs_dim(),
            env.observation_dim()
        )));
    }
    Ok(())
}

/// Loads the suite's checkpoint and runs it.
pub fn run_benchmark(suite: &BenchmarkSuite) -> Result<BenchmarkReport> {
    suite.validate()?;
    let env = suite.env_config()?;
    let nets = load_checked(suite, &env)?;
    run_benchmark_with(suite, &nets).map(|(r, _)| r)
}

/// Runs the suite with in-memory networks; also returns every flown episode.
pub fn run_benchmark_with(suite: &BenchmarkSuite, nets: &AgentNetworks) -> Result<(BenchmarkReport, Vec<(Plan, Episode)>)> {
    suite.validate()?;
    let env = suite.env_config()?;
    check_width(nets, &env)?;
    let mut records = Vec::with_capacity(suite.episodes);
    let mut flights = Vec::with_capacity(suite.episodes);
    for i in 0..suite.episodes {
        let spec = suite.scenario.spec(suite.episode_seed(i));
        let planned = generate_planned(&spec, &env.planning)?;
        let sc = &planned.scenario;
        let plan = plan_from_path(&planned.maps, planned.path, sc.start, sc.goal, &env.planning)?;
        let ep = run_episode(&plan.corridor, &KinematicState::at_rest(sc.start), &mut GreedyPolicy(nets), &env);
        let audit_violations = audit_trajectory(&ep.trajectory, &plan.corridor, suite.audit_samples);
        records.push(BenchEpisode {
            seed: spec.rng_seed,
            success: ep.success(),
            cause: ep.cause,
            steps: ep.steps.len(),
            episode_time: ep.steps.len() as f64 * env.knot_interval,
            peak_speed: ep.peak_speed(),
            reward: ep.total_reward(),
            course_length: (sc.goal - sc.start).norm(),
            audit_violations,
        });
        flights.push((plan, ep));
    }
    Ok((assemble(suite.clone(), records), flights))
}

fn assemble(config: BenchmarkSuite, episodes: Vec<BenchEpisode>) -> BenchmarkReport {
    let wins: Vec<_> = episodes.iter().filter(|e| e.success).collect();
    let mean = |v: Vec<f64>| {
        if v.is_empty() {
            f64::NAN
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    };
    BenchmarkReport {
        success_count: wins.len(),
        episode_count: episodes.len(),
        mean_time: mean(wins.iter().map(|e| e.episode_time).collect()),
        mean_peak_speed: mean(episodes.iter().map(|e| e.peak_speed).collect()),
        external: ExternalReference {
            note: "external planner columns are not reproduced".into(),
        },
        config,
        episodes,
    }
}

/// Writes `report.toml` plus one trajectory table per episode into `dir`.
pub fn write_report(dir: &Path, report: &BenchmarkReport, flights: &[(Plan, Episode)]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join("report.toml");
    std::fs::write(&path, report.to_toml()?).map_err(|e| Error::io(&path, e))?;
    for (i, (plan, ep)) in flights.iter().enumerate() {
        ep.table()
            .comment(format!("episode {i} seed {} cause {}", report.episodes[i].seed, ep.cause.name()))
            .write(&dir.join(format!("episode_{i:03}.txt")))?;
        plan.corridor
            .table()
            .write(&dir.join(format!("corridor_{i:03}.txt")))?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StageTimings {
    pub maps_ms: f64,
    pub search_ms: f64,
    pub corridor_ms: f64,
    pub rollout_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone)]
pub struct PlanOnce {
    pub plan: Plan,
    pub episode: Episode,
    pub timings: StageTimings,
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Inflation, A*, polyline + corridor and a greedy rollout on an
/// in-memory map, timing each stage.
pub fn plan_on_grid(
    raw: &crate::worldmap::OccupancyGrid,
    start: Vec3,
    goal: Vec3,
    nets: &AgentNetworks,
    env: &EnvConfig,
) -> Result<PlanOnce> {
    check_width(nets, env)?;
    let t0 = Instant::now();
    let maps = PlanningMaps::new(raw, &env.planning);
    let maps_ms = ms(t0);
    let t = Instant::now();
    let path = astar_3d(&maps.search, start, goal)?;
    let search_ms = ms(t);
    let t = Instant::now();
    let plan = plan_from_path(&maps, path, start, goal, &env.planning)?;
    let corridor_ms = ms(t);
    let t = Instant::now();
    let episode = run_episode(&plan.corridor, &KinematicState::at_rest(start), &mut GreedyPolicy(nets), env);
    let rollout_ms = ms(t);
    Ok(PlanOnce {
        plan,
        episode,
        timings: StageTimings {
            maps_ms,
            search_ms,
            corridor_ms,
            rollout_ms,
            total_ms: ms(t0),
        },
    })
}

/// File-based variant of [`plan_on_grid`].
pub fn plan_once(map: &Path, start: Vec3, goal: Vec3, checkpoint: &Path, env: &EnvConfig) -> Result<PlanOnce> {
    let raw = import_map(map)?;
    let (nets, _) = AgentNetworks::load(checkpoint)?;
    plan_on_grid(&raw, start, goal, &nets, env)
}

/// Whether every dense sample of a flight lies inside its corridor.
pub fn audit_clean(ep: &Episode, sfc: &SafeFlightCorridor, per_segment: usize) -> bool {
    audit_trajectory(&ep.trajectory, sfc, per_segment) == 0
}
