//! Training orchestration: per-episode scenario generation on the
//! easy-to-hard course, exploitation-decoupled sampling cycles, a replay
//! buffer shared by sampler workers, periodic greedy evaluation and
//! step-stamped checkpoints.

use std::collections::VecDeque;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{mpsc, Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bspline::KinematicState;
use crate::corridor::SafeFlightCorridor;
use crate::env::{observe, plan_from_path, step, EnvConfig, PlannerState, Termination};
use crate::sdcq::{Agent, AgentNetworks, ReplayBuffer, SdcqConfig, TrainDiagnostics, Transition};
use crate::table::Table;
use crate::worldmap::{generate_planned, splitmix64, ScenarioSpec};
use crate::{Error, Result, Vec3};

/// Which part of a course an evaluation episode flies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalRange {
    /// Start to the course midpoint (the sparse half of the curriculum).
    EasyHalf,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub env: EnvConfig,
    pub agent: SdcqConfig,
    /// Training course; regenerated with a fresh seed every episode.
    pub scenario: ScenarioSpec,
    /// When false the course is uniformly dense (near spacing = far spacing).
    pub curriculum: bool,
    /// Sampler workers. 1 runs everything on the calling thread.
    pub threads: usize,
    /// Boltzmann trajectories per cycle.
    pub exploration_trajectories: usize,
    /// Length of greedy and exploration trajectories.
    pub trajectory_len: usize,
    /// Greedy steps actually executed per cycle (at most `trajectory_len`).
    pub executed_steps: usize,
    /// Network updates per sampling cycle.
    pub updates_per_cycle: f64,
    /// Transitions required before the first update.
    pub warmup: usize,
    /// Updates between evaluations.
    pub eval_period: u64,
    pub eval_episodes: usize,
    pub eval_range: EvalRange,
    /// Evaluation course; defaults to the training course family.
    pub eval_scenario: Option<ScenarioSpec>,
    pub eval_seed: u64,
    /// Update budget.
    pub total_updates: u64,
    /// Optional wall-clock budget in seconds.
    pub time_limit: Option<f64>,
    /// Stop once evaluation success reaches this rate.
    pub target_success: Option<f64>,
    pub seed: u64,
    pub checkpoint_dir: Option<PathBuf>,
    /// Minimum seconds between published snapshots in multi-thread mode.
    pub publish_interval: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            env: EnvConfig::default(),
            agent: SdcqConfig::default(),
            scenario: ScenarioSpec::curriculum(0),
            curriculum: true,
            threads: 1,
            exploration_trajectories: 20,
            trajectory_len: 12,
            executed_steps: 1,
            updates_per_cycle: 8.0,
            warmup: 2000,
            eval_period: 500,
            eval_episodes: 10,
            eval_range: EvalRange::EasyHalf,
            eval_scenario: None,
            eval_seed: 1 << 40,
            total_updates: 20_000,
            time_limit: None,
            target_success: None,
            seed: 0,
            checkpoint_dir: None,
            publish_interval: 0.5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.threads == 0 {
            return bad("threads must be >= 1");
        }
        if self.trajectory_len == 0 {
            return bad("trajectory_len must be >= 1");
        }
        if self.executed_steps == 0 || self.executed_steps > self.trajectory_len {
            return bad("executed_steps must lie in 1..=trajectory_len");
        }
        if self.eval_period == 0 {
            return bad("eval_period must be > 0");
        }
        if !(self.updates_per_cycle >= 0.0) {
            return bad("updates_per_cycle must be >= 0");
        }
        if self.env.horizon == 0 || !(self.env.knot_interval > 0.0) || !(self.env.v_max > 0.0) {
            return bad("env needs a positive horizon, knot interval and speed");
        }
        if let Some(t) = self.time_limit {
            if !(t > 0.0) {
                return bad("time_limit must be positive");
            }
        }
        self.agent.validate()?;
        self.scenario.validate()?;
        if let Some(s) = &self.eval_scenario {
            s.validate()?;
        }
        Ok(())
    }

    /// Training course for one episode seed.
    pub fn training_spec(&self, seed: u64) -> ScenarioSpec {
        let mut s = self.scenario.clone();
        s.rng_seed = seed;
        if !self.curriculum {
            s.spacing_near = s.spacing_far;
        }
        s
    }

    /// Held-out evaluation courses.
    pub fn eval_specs(&self) -> Vec<ScenarioSpec> {
        let base = self.eval_scenario.clone().unwrap_or_else(|| self.scenario.clone());
        (0..self.eval_episodes)
            .map(|i| {
                let mut s = base.clone();
                s.rng_seed = splitmix64(self.eval_seed.wrapping_add(i as u64));
                if self.eval_range == EvalRange::EasyHalf {
                    let start = s.start_point();
                    let goal = s.goal_point();
                    s.goal = Some([start.x, 0.5 * (start.y + goal.y), goal.z]);
                }
                s
            })
            .collect()
    }
}

/// Independent random streams derived from one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Scenario,
    Exploration,
    Init,
    Update,
}

pub fn stream_rng(seed: u64, stream: Stream, worker: usize) -> ChaCha8Rng {
    let tag = match stream {
        Stream::Scenario => 1u64,
        Stream::Exploration => 2,
        Stream::Init => 3,
        Stream::Update => 4,
    };
    let mut r = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(tag)));
    r.set_stream(worker as u64);
    r
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub seed: u64,
    pub success: bool,
    pub cause: Termination,
    pub steps: usize,
    pub reward: f64,
    pub final_index: usize,
    /// Furthest knot y reached.
    pub max_y: f64,
    pub wall_time: f64,
}

impl EpisodeRecord {
    /// Simulated traversal time.
    pub fn episode_time(&self, knot_interval: f64) -> f64 {
        self.steps as f64 * knot_interval
    }
}

/// An executed episode in progress.
#[derive(Debug, Clone)]
pub struct LiveEpisode {
    pub seed: u64,
    pub corridor: SafeFlightCorridor,
    pub state: PlannerState,
    pub observation: Vec<f64>,
    pub reward: f64,
    pub max_y: f64,
    pub started: Instant,
}

impl LiveEpisode {
    pub fn new(seed: u64, corridor: SafeFlightCorridor, start: &KinematicState, cfg: &EnvConfig) -> Self {
        let state = PlannerState::new(start, &corridor, cfg.knot_interval);
        let observation = observe(&state, &corridor, cfg);
        LiveEpisode {
            seed,
            max_y: state.knot().y,
            corridor,
            state,
            observation,
            reward: 0.0,
            started: Instant::now(),
        }
    }

    fn record(&self, cause: Termination) -> EpisodeRecord {
        EpisodeRecord {
            seed: self.seed,
            success: cause == Termination::Success,
            cause,
            steps: self.state.step,
            reward: self.reward,
            final_index: self.state.index,
            max_y: self.max_y,
            wall_time: self.started.elapsed().as_secs_f64(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleSettings {
    pub exploration_trajectories: usize,
    pub trajectory_len: usize,
    pub executed_steps: usize,
}

impl CycleSettings {
    pub fn from_config(cfg: &TrainConfig) -> Self {
        CycleSettings {
            exploration_trajectories: cfg.exploration_trajectories,
            trajectory_len: cfg.trajectory_len,
            executed_steps: cfg.executed_steps,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CycleResult {
    /// Greedy transitions followed by exploration transitions.
    pub transitions: Vec<Transition>,
    pub greedy_len: usize,
    /// Set when the executed part ended the episode.
    pub finished: Option<EpisodeRecord>,
}

fn transition(state: &[f64], action: [f64; 3], reward: f64, next: &[f64], cause: Option<Termination>) -> Transition {
    Transition {
        state: state.to_vec(),
        action,
        reward,
        next_state: next.to_vec(),
        // Horizon truncation still bootstraps.
        done: matches!(
            cause,
            Some(Termination::Success | Termination::CorridorExit | Termination::JerkViolation)
        ),
    }
}

/// One exploitation-decoupled cycle from the episode's current state: a
/// greedy trajectory whose first `executed_steps` steps advance the episode,
/// plus Boltzmann trajectories from the same state that are stored but never
/// executed. Exploration draws only from `rng`.
pub fn sampling_cycle<R: rand::Rng + ?Sized>(
    ep: &mut LiveEpisode,
    nets: &AgentNetworks,
    settings: &CycleSettings,
    cfg: &EnvConfig,
    rng: &mut R,
) -> CycleResult {
    let mut transitions = Vec::new();
    let sfc = &ep.corridor;
    let origin = (ep.state.clone(), ep.observation.clone());

    let mut state = ep.state.clone();
    let mut obs = ep.observation.clone();
    let mut finished = None;
    for k in 0..settings.trajectory_len {
        let alpha = nets.greedy_action(&obs).expect("observation width matches networks");
        let (out, next) = step(&state, alpha, sfc, cfg);
        transitions.push(transition(&obs, alpha, out.reward, &out.observation, out.cause));
        if k < settings.executed_steps {
            ep.reward += out.reward;
            ep.max_y = ep.max_y.max(next.knot().y);
            ep.state = next.clone();
            ep.observation = out.observation.clone();
            if let Some(cause) = out.cause {
                finished = Some(ep.record(cause));
            }
        }
        state = next;
        obs = out.observation;
        if out.cause.is_some() {
            break;
        }
    }
    let greedy_len = transitions.len();

    let n = settings.exploration_trajectories;
    let mut live: Vec<(PlannerState, Vec<f64>)> = vec![origin; n];
    let dim = nets.obs_dim();
    for _ in 0..settings.trajectory_len {
        if live.is_empty() {
            break;
        }
        let mut batch = Array2::zeros((live.len(), dim));
        for (mut row, (_, o)) in batch.rows_mut().into_iter().zip(&live) {
            row.assign(&ndarray::ArrayView1::from(o.as_slice()));
        }
        let actions = nets.boltzmann_actions(batch.view(), rng);
        let mut survivors = Vec::with_capacity(live.len());
        for ((s, o), alpha) in live.into_iter().zip(actions) {
            let (out, next) = step(&s, alpha, sfc, cfg);
            transitions.push(transition(&o, alpha, out.reward, &out.observation, out.cause));
            if out.cause.is_none() {
                survivors.push((next, out.observation));
            }
        }
        live = survivors;
    }

    CycleResult {
        transitions,
        greedy_len,
        finished,
    }
}

/// Owns one environment: regenerates the course each episode and applies
/// start noise, both from the scenario stream.
pub struct Sampler {
    cfg: TrainConfig,
    settings: CycleSettings,
    scenario_rng: ChaCha8Rng,
    explore_rng: ChaCha8Rng,
    episode: Option<LiveEpisode>,
    pub episodes_started: u64,
}

impl Sampler {
    pub fn new(cfg: &TrainConfig, worker: usize) -> Self {
        Sampler {
            settings: CycleSettings::from_config(cfg),
            scenario_rng: stream_rng(cfg.seed, Stream::Scenario, worker),
            explore_rng: stream_rng(cfg.seed, Stream::Exploration, worker),
            cfg: cfg.clone(),
            episode: None,
            episodes_started: 0,
        }
    }

    pub fn episode(&self) -> Option<&LiveEpisode> {
        self.episode.as_ref()
    }

    fn reset(&mut self) -> Result<()> {
        use rand::Rng;
        let seed: u64 = self.scenario_rng.random();
        let spec = self.cfg.training_spec(seed);
        let planned = generate_planned(&spec, &self.cfg.env.planning)?;
        let sc = &planned.scenario;
        let plan = plan_from_path(&planned.maps, planned.path, sc.start, sc.goal, &self.cfg.env.planning)?;
        let start = self
            .cfg
            .env
            .start_noise
            .apply(&KinematicState::at_rest(sc.start), &mut self.scenario_rng);
        self.episode = Some(LiveEpisode::new(seed, plan.corridor, &start, &self.cfg.env));
        self.episodes_started += 1;
        Ok(())
    }

    /// Runs one cycle, starting a new episode first if needed.
    pub fn cycle(&mut self, nets: &AgentNetworks) -> Result<CycleResult> {
        if self.episode.is_none() {
            self.reset()?;
        }
        let ep = self.episode.as_mut().expect("episode present after reset");
        let out = sampling_cycle(ep, nets, &self.settings, &self.cfg.env, &mut self.explore_rng);
        if out.finished.is_some() {
            self.episode = None;
        }
        Ok(out)
    }
}

/// Prepared greedy evaluation courses.
#[derive(Debug, Clone)]
pub struct EvalSet {
    pub seeds: Vec<u64>,
    pub corridors: Vec<SafeFlightCorridor>,
    pub starts: Vec<Vec3>,
}

impl EvalSet {
    pub fn build(specs: &[ScenarioSpec], cfg: &EnvConfig) -> Result<Self> {
        let mut set = EvalSet {
            seeds: Vec::new(),
            corridors: Vec::new(),
            starts: Vec::new(),
        };
        for spec in specs {
            let p = generate_planned(spec, &cfg.planning)?;
            let sc = &p.scenario;
            let plan = plan_from_path(&p.maps, p.path, sc.start, sc.goal, &cfg.planning)?;
            set.seeds.push(spec.rng_seed);
            set.corridors.push(plan.corridor);
            set.starts.push(sc.start);
        }
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.corridors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.corridors.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub records: Vec<EpisodeRecord>,
    pub success_rate: f64,
    /// Mean simulated time over successful episodes; NaN if none succeeded.
    pub mean_time: f64,
}

/// Greedy episodes from rest; no exploration and no buffer writes.
pub fn evaluate(nets: &AgentNetworks, set: &EvalSet, cfg: &EnvConfig) -> EvalReport {
    let mut records = Vec::with_capacity(set.len());
    for i in 0..set.len() {
        let start = KinematicState::at_rest(set.starts[i]);
        let mut ep = LiveEpisode::new(set.seeds[i], set.corridors[i].clone(), &start, cfg);
        let cause = loop {
            let alpha = nets.greedy_action(&ep.observation).expect("observation width matches networks");
            let (out, next) = step(&ep.state, alpha, &ep.corridor, cfg);
            ep.reward += out.reward;
            ep.max_y = ep.max_y.max(next.knot().y);
            ep.state = next;
            ep.observation = out.observation;
            if let Some(c) = out.cause {
                break c;
            }
        };
        records.push(ep.record(cause));
    }
    summarize(records, cfg.knot_interval)
}

fn summarize(records: Vec<EpisodeRecord>, knot_interval: f64) -> EvalReport {
    let wins: Vec<_> = records.iter().filter(|r| r.success).collect();
    let success_rate = if records.is_empty() {
        0.0
    } else {
        wins.len() as f64 / records.len() as f64
    };
    let mean_time = if wins.is_empty() {
        f64::NAN
    } else {
        wins.iter().map(|r| r.episode_time(knot_interval)).sum::<f64>() / wins.len() as f64
    };
    EvalReport {
        records,
        success_rate,
        mean_time,
    }
}

/// One row of the training log.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub wall_clock: f64,
    pub updates: u64,
    pub episodes: u64,
    pub transitions: u64,
    pub mean_return: f64,
    pub train_success: f64,
    pub mean_steps: f64,
    pub eval_success: f64,
    pub eval_time: f64,
    pub critic_loss: f64,
    pub discrete_loss: f64,
    pub kappa: f64,
    pub entropy: f64,
    pub mean_q: f64,
    /// Furthest y reached by any executed episode so far.
    pub frontier: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub nets: AgentNetworks,
    pub updates: u64,
    pub log: Vec<LogRow>,
    pub episodes: Vec<EpisodeRecord>,
    pub final_eval: EvalReport,
    pub transitions: u64,
    pub wall_clock: f64,
}

impl TrainOutcome {
    pub fn log_table(&self) -> Table {
        training_log_table(&self.log)
    }
}

pub fn training_log_table(rows: &[LogRow]) -> Table {
    let mut t = Table::new([
        "wall_clock",
        "updates",
        "episodes",
        "transitions",
        "mean_return",
        "train_success",
        "mean_steps",
        "eval_success",
        "eval_time",
        "critic_loss",
        "discrete_loss",
        "kappa",
        "entropy",
        "mean_q",
        "frontier",
    ])
    .comment("training log");
    for r in rows {
        t.push(vec![
            r.wall_clock,
            r.updates as f64,
            r.episodes as f64,
            r.transitions as f64,
            r.mean_return,
            r.train_success,
            r.mean_steps,
            r.eval_success,
            r.eval_time,
            r.critic_loss,
            r.discrete_loss,
            r.kappa,
            r.entropy,
            r.mean_q,
            r.frontier,
        ]);
    }
    t
}

pub fn checkpoint_path(dir: &Path, updates: u64) -> PathBuf {
    dir.join(format!("agent_{updates:09}.sdcq"))
}

/// Bookkeeping shared by both training modes.
struct Progress {
    started: Instant,
    recent: VecDeque<EpisodeRecord>,
    episodes: Vec<EpisodeRecord>,
    log: Vec<LogRow>,
    frontier: f64,
    last_diag: TrainDiagnostics,
    last_eval: Option<EvalReport>,
}

const RECENT: usize = 50;

impl Progress {
    fn new() -> Self {
        Progress {
            started: Instant::now(),
            recent: VecDeque::new(),
            episodes: Vec::new(),
            log: Vec::new(),
            frontier: f64::NEG_INFINITY,
            last_diag: TrainDiagnostics::default(),
            last_eval: None,
        }
    }

    fn elapsed(&self) -> f64 {
        self.started.elapsed().as_secs_f64()
    }

    fn finish_episode(&mut self, r: EpisodeRecord) {
        self.frontier = self.frontier.max(r.max_y);
        if self.recent.len() == RECENT {
            self.recent.pop_front();
        }
        self.recent.push_back(r.clone());
        self.episodes.push(r);
    }

    fn out_of_time(&self, cfg: &TrainConfig) -> bool {
        cfg.time_limit.is_some_and(|t| self.elapsed() >= t)
    }

    /// Evaluates, logs and checkpoints. Returns true when the target is met.
    fn evaluate(&mut self, cfg: &TrainConfig, agent: &Agent, set: &EvalSet, transitions: u64) -> Result<bool> {
        let eval = evaluate(&agent.nets, set, &cfg.env);
        let n = self.recent.len().max(1) as f64;
        let d = self.last_diag;
        self.log.push(LogRow {
            wall_clock: self.elapsed(),
            updates: agent.updates,
            episodes: self.episodes.len() as u64,
            transitions,
            mean_return: self.recent.iter().map(|r| r.reward).sum::<f64>() / n,
            train_success: self.recent.iter().filter(|r| r.success).count() as f64 / n,
            mean_steps: self.recent.iter().map(|r| r.steps as f64).sum::<f64>() / n,
            eval_success: eval.success_rate,
            eval_time: eval.mean_time,
            critic_loss: d.critic_loss,
            discrete_loss: d.discrete_loss,
            kappa: agent.nets.kappa,
            entropy: d.entropy,
            mean_q: d.mean_q,
            frontier: self.frontier,
        });
        if let Some(dir) = &cfg.checkpoint_dir {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            agent.nets.save(&checkpoint_path(dir, agent.updates), agent.updates)?;
        }
        let hit = cfg.target_success.is_some_and(|t| eval.success_rate >= t);
        self.last_eval = Some(eval);
        Ok(hit)
    }

    fn into_outcome(mut self, cfg: &TrainConfig, agent: Agent, set: &EvalSet, transitions: u64) -> Result<TrainOutcome> {
        let fresh = self.log.last().is_none_or(|r| r.updates != agent.updates);
        if fresh {
            self.evaluate(cfg, &agent, set, transitions)?;
        }
        if let Some(dir) = &cfg.checkpoint_dir {
            agent.nets.save(&dir.join("final.sdcq"), agent.updates)?;
            training_log_table(&self.log).write(&dir.join("train_log.txt"))?;
        }
        Ok(TrainOutcome {
            updates: agent.updates,
            final_eval: self.last_eval.clone().expect("evaluated at least once"),
            wall_clock: self.elapsed(),
            nets: agent.nets,
            log: self.log,
            episodes: self.episodes,
            transitions,
        })
    }
}

/// Trains an agent from scratch.
pub fn train(cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut init_rng = stream_rng(cfg.seed, Stream::Init, 0);
    let agent = Agent::new(cfg.env.observation_dim(), cfg.agent.clone(), &mut init_rng)?;
    train_from(cfg, agent)
}

/// Continues training `agent`.
pub fn train_from(cfg: &TrainConfig, agent: Agent) -> Result<TrainOutcome> {
    cfg.validate()?;
    let set = EvalSet::build(&cfg.eval_specs(), &cfg.env)?;
    if cfg.threads == 1 {
        train_single(cfg, agent, &set)
    } else {
        train_parallel(cfg, agent, &set)
    }
}

fn done_training(cfg: &TrainConfig, agent: &Agent, progress: &Progress) -> bool {
    agent.updates >= cfg.total_updates || progress.out_of_time(cfg)
}

/// Deterministic reference loop: one cycle, then the owed updates.
fn train_single(cfg: &TrainConfig, mut agent: Agent, set: &EvalSet) -> Result<TrainOutcome> {
    let mut buffer = ReplayBuffer::new(cfg.env.observation_dim(), cfg.agent.buffer_capacity);
    let mut sampler = Sampler::new(cfg, 0);
    let mut update_rng = stream_rng(cfg.seed, Stream::Update, 0);
    let mut progress = Progress::new();
    let mut credit = 0.0;
    'outer: while !done_training(cfg, &agent, &progress) {
        let out = sampler.cycle(&agent.nets)?;
        for t in &out.transitions {
            buffer.push(t)?;
        }
        if let Some(r) = out.finished {
            progress.finish_episode(r);
        }
        if buffer.len() < cfg.warmup.max(cfg.agent.batch_size) {
            continue;
        }
        credit += cfg.updates_per_cycle;
        while credit >= 1.0 {
            credit -= 1.0;
            progress.last_diag = agent.train_step(&buffer, &mut update_rng)?;
            if agent.updates % cfg.eval_period == 0 && progress.evaluate(cfg, &agent, set, buffer.inserted())? {
                break 'outer;
            }
            if done_training(cfg, &agent, &progress) {
                break 'outer;
            }
        }
    }
    let inserted = buffer.inserted();
    progress.into_outcome(cfg, agent, set, inserted)
}

/// Counters shared between sampler workers and the trainer.
struct Shared {
    buffer: Mutex<ReplayBuffer>,
    snapshot: RwLock<Arc<AgentNetworks>>,
    cycles: AtomicU64,
    updates: AtomicU64,
    stop: AtomicBool,
}

impl Shared {
    fn publish(&self, nets: &AgentNetworks) {
        *self.snapshot.write().expect("snapshot lock") = Arc::new(nets.clone());
    }

    fn snapshot(&self) -> Arc<AgentNetworks> {
        self.snapshot.read().expect("snapshot lock").clone()
    }
}

/// Cycles a sampler may run ahead of the update ratio.
const CYCLE_SLACK: u64 = 4;

fn sampler_worker(cfg: &TrainConfig, worker: usize, shared: &Shared, records: mpsc::Sender<EpisodeRecord>) -> Result<()> {
    let mut sampler = Sampler::new(cfg, worker);
    let warm = cfg.warmup.max(cfg.agent.batch_size);
    while !shared.stop.load(Ordering::Acquire) {
        let cycles = shared.cycles.load(Ordering::Acquire);
        let updates = shared.updates.load(Ordering::Acquire) as f64;
        let warming = shared.buffer.lock().expect("buffer lock").len() < warm;
        let allowed = (updates / cfg.updates_per_cycle.max(1e-9)) as u64 + CYCLE_SLACK * cfg.threads as u64;
        if !warming && cycles >= allowed {
            std::thread::sleep(Duration::from_millis(1));
            continue;
        }
        let nets = shared.snapshot();
        let out = sampler.cycle(&nets)?;
        {
            let mut buf = shared.buffer.lock().expect("buffer lock");
            for t in &out.transitions {
                buf.push(t)?;
            }
        }
        shared.cycles.fetch_add(1, Ordering::AcqRel);
        if let Some(r) = out.finished {
            let _ = records.send(r);
        }
    }
    Ok(())
}

/// N sampler threads feed one buffer; the calling thread trains, publishes
/// snapshots and evaluates.
fn train_parallel(cfg: &TrainConfig, mut agent: Agent, set: &EvalSet) -> Result<TrainOutcome> {
    let shared = Shared {
        buffer: Mutex::new(ReplayBuffer::new(cfg.env.observation_dim(), cfg.agent.buffer_capacity)),
        snapshot: RwLock::new(Arc::new(agent.nets.clone())),
        cycles: AtomicU64::new(0),
        updates: AtomicU64::new(agent.updates),
        stop: AtomicBool::new(false),
    };
    let (tx, rx) = mpsc::channel();
    let mut update_rng = stream_rng(cfg.seed, Stream::Update, 0);
    let mut progress = Progress::new();
    let warm = cfg.warmup.max(cfg.agent.batch_size);
    let base_updates = agent.updates;

    let trainer_result: Result<()> = std::thread::scope(|scope| {
        let workers: Vec<_> = (0..cfg.threads)
            .map(|w| {
                let tx = tx.clone();
                let shared = &shared;
                scope.spawn(move || sampler_worker(cfg, w, shared, tx))
            })
            .collect();
        drop(tx);
        let mut last_publish = Instant::now();
        let result = (|| -> Result<()> {
            while !done_training(cfg, &agent, &progress) {
                while let Ok(r) = rx.try_recv() {
                    progress.finish_episode(r);
                }
                if workers.iter().any(|w| w.is_finished()) {
                    break;
                }
                let cycles = shared.cycles.load(Ordering::Acquire) as f64;
                let owed = (cycles * cfg.updates_per_cycle) as u64 + base_updates;
                let ready = shared.buffer.lock().expect("buffer lock").len() >= warm;
                if !ready || agent.updates >= owed {
                    std::thread::sleep(Duration::from_millis(1));
                    continue;
                }
                let batch = {
                    let buf = shared.buffer.lock().expect("buffer lock");
                    let idx = buf.sample_indices(cfg.agent.batch_size, &mut update_rng)?;
                    buf.gather(&idx)
                };
                progress.last_diag = agent.update_on(&batch, &mut update_rng);
                shared.updates.store(agent.updates, Ordering::Release);
                if last_publish.elapsed().as_secs_f64() >= cfg.publish_interval {
                    shared.publish(&agent.nets);
                    last_publish = Instant::now();
                }
                if agent.updates % cfg.eval_period == 0 {
                    let inserted = shared.buffer.lock().expect("buffer lock").inserted();
                    if progress.evaluate(cfg, &agent, set, inserted)? {
                        break;
                    }
                }
            }
            Ok(())
        })();
        shared.stop.store(true, Ordering::Release);
        for w in workers {
            match w.join() {
                Ok(r) => r?,
                Err(_) => return Err(Error::Config("sampler thread panicked".into())),
            }
        }
        result
    });
    trainer_result?;
    while let Ok(r) = rx.try_recv() {
        progress.finish_episode(r);
    }
    let inserted = shared.buffer.lock().expect("buffer lock").inserted();
    progress.into_outcome(cfg, agent, set, inserted)
}
