use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use sfcrl::bench::{plan_once, profile_rewards_by_name, run_benchmark_with, write_report, SuiteScenario};
use sfcrl::config::ExperimentConfig;
use sfcrl::env::plan_from_path;
use sfcrl::sdcq::AgentNetworks;
use sfcrl::trainer::{evaluate, train, EvalRange, EvalSet};
use sfcrl::worldmap::{export_map, generate_planned};
use sfcrl::Vec3;

#[derive(Parser)]
#[command(name = "sfcrl", version, about = "Corridor-constrained RL trajectory planner")]
struct Cli {
    /// TOML experiment file; command-line flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    #[arg(long)]
    vmax: Option<f64>,
    /// corb_f, corb_s or default.
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// forest, sparse_walls, dense_walls or curriculum.
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent; `--out` is the checkpoint directory.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        threads: Option<usize>,
        /// Wall-clock budget in minutes.
        #[arg(long)]
        minutes: Option<f64>,
        #[arg(long)]
        updates: Option<u64>,
        /// Disable the easy-to-hard density gradient.
        #[arg(long)]
        no_curriculum: bool,
        /// Exploration trajectories per cycle.
        #[arg(long)]
        exploration: Option<usize>,
    },
    /// Run a benchmark suite; `--out` is the report directory.
    Bench {
        #[command(flatten)]
        common: Common,
    },
    /// Plan once on a map file and report stage timings.
    Plan {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        map: PathBuf,
        /// x,y,z in meters.
        #[arg(long, value_parser = parse_point)]
        start: Vec3,
        #[arg(long, value_parser = parse_point)]
        goal: Vec3,
    },
    /// Greedy evaluation of a checkpoint on held-out courses.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Fly only to the course midpoint.
        #[arg(long)]
        easy_half: bool,
    },
    /// Generate a course map file (`.txt` for the text variant).
    GenMap {
        #[command(flatten)]
        common: Common,
    },
    /// Export map, polyline and corridor tables for one course.
    Export {
        #[command(flatten)]
        common: Common,
    },
}

fn parse_point(s: &str) -> std::result::Result<Vec3, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| e.to_string()))
        .collect::<std::result::Result<_, _>>()?;
    match v.as_slice() {
        [x, y, z] => Ok(Vec3::new(*x, *y, *z)),
        _ => Err("expected x,y,z".into()),
    }
}

fn apply_common(cfg: &mut ExperimentConfig, c: &Common) -> Result<()> {
    if let Some(v) = c.vmax {
        cfg.train.env.v_max = v;
        cfg.bench.v_max = v;
    }
    if let Some(p) = &c.profile {
        cfg.bench.profile = p.parse()?;
        cfg.train.env.reward = profile_rewards_by_name(p)?;
    }
    if let Some(n) = c.episodes {
        cfg.bench.episodes = n;
        cfg.train.eval_episodes = n;
    }
    if let Some(s) = c.seed {
        cfg.bench.seed = s;
        cfg.train.seed = s;
    }
    if let Some(s) = &c.scenario {
        let sc: SuiteScenario = s.parse()?;
        cfg.bench.scenario = sc;
        cfg.train.eval_scenario = Some(sc.spec(0));
    }
    if let Some(p) = &c.checkpoint {
        cfg.bench.checkpoint = p.clone();
    }
    Ok(())
}

fn load_nets(path: &std::path::Path) -> Result<AgentNetworks> {
    let (nets, _) = AgentNetworks::load(path).with_context(|| format!("loading {}", path.display()))?;
    Ok(nets)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    match cli.command {
        Command::Train {
            common,
            threads,
            minutes,
            updates,
            no_curriculum,
            exploration,
        } => {
            apply_common(&mut cfg, &common)?;
            let t = &mut cfg.train;
            if let Some(n) = threads {
                t.threads = n;
            }
            if let Some(m) = minutes {
                t.time_limit = Some(m * 60.0);
            }
            if let Some(u) = updates {
                t.total_updates = u;
            }
            if no_curriculum {
                t.curriculum = false;
            }
            if let Some(n) = exploration {
                t.exploration_trajectories = n;
            }
            t.checkpoint_dir = Some(common.out.unwrap_or_else(|| PathBuf::from("checkpoints")));
            let out = train(t)?;
            print!("{}", out.log_table().render());
            println!(
                "updates {} episodes {} eval success {:.2}",
                out.updates,
                out.episodes.len(),
                out.final_eval.success_rate
            );
        }
        Command::Bench { common } => {
            apply_common(&mut cfg, &common)?;
            let nets = load_nets(&cfg.bench.checkpoint)?;
            let (report, flights) = run_benchmark_with(&cfg.bench, &nets)?;
            println!(
                "{}: {}/{} successes, mean time {:.2} s, mean peak speed {:.2} m/s",
                cfg.bench.scenario.name(),
                report.success_count,
                report.episode_count,
                report.mean_time,
                report.mean_peak_speed
            );
            let dir = common.out.unwrap_or_else(|| PathBuf::from("bench_out"));
            write_report(&dir, &report, &flights)?;
        }
        Command::Plan {
            common,
            map,
            start,
            goal,
        } => {
            apply_common(&mut cfg, &common)?;
            let env = cfg.bench.env_config()?;
            let r = plan_once(&map, start, goal, &cfg.bench.checkpoint, &env)?;
            let t = r.timings;
            println!(
                "maps {:.2} ms, search {:.2} ms, corridor {:.2} ms, rollout {:.2} ms, total {:.2} ms, outcome {}",
                t.maps_ms,
                t.search_ms,
                t.corridor_ms,
                t.rollout_ms,
                t.total_ms,
                r.episode.cause.name()
            );
            if let Some(out) = common.out {
                r.episode.trajectory.sampled_table(10)?.write(&out)?;
            }
        }
        Command::Eval { common, easy_half } => {
            apply_common(&mut cfg, &common)?;
            let nets = load_nets(&cfg.bench.checkpoint)?;
            let mut t = cfg.train.clone();
            t.env = cfg.bench.env_config()?;
            t.eval_scenario = Some(cfg.bench.scenario.spec(0));
            t.eval_episodes = cfg.bench.episodes;
            t.eval_seed = cfg.bench.seed;
            t.eval_range = if easy_half { EvalRange::EasyHalf } else { EvalRange::Full };
            let set = EvalSet::build(&t.eval_specs(), &t.env)?;
            let rep = evaluate(&nets, &set, &t.env);
            println!(
                "success rate {:.3} over {} episodes, mean time {:.2} s",
                rep.success_rate,
                rep.records.len(),
                rep.mean_time
            );
        }
        Command::GenMap { common } => {
            apply_common(&mut cfg, &common)?;
            let Some(out) = common.out else {
                bail!("gen-map needs --out");
            };
            let spec = cfg.bench.scenario.spec(cfg.bench.seed);
            let p = generate_planned(&spec, &cfg.bench.env.planning)?;
            export_map(&p.scenario.grid, &out)?;
            println!("wrote {} (seed used {})", out.display(), p.scenario.seed_used);
        }
        Command::Export { common } => {
            apply_common(&mut cfg, &common)?;
            let dir = common.out.unwrap_or_else(|| PathBuf::from("export"));
            std::fs::create_dir_all(&dir)?;
            let spec = cfg.bench.scenario.spec(cfg.bench.seed);
            let env = &cfg.bench.env;
            let p = generate_planned(&spec, &env.planning)?;
            let sc = &p.scenario;
            export_map(&sc.grid, &dir.join("map.bin"))?;
            let plan = plan_from_path(&p.maps, p.path, sc.start, sc.goal, &env.planning)?;
            plan.polyline.vertex_table().write(&dir.join("polyline.txt"))?;
            plan.corridor.table().write(&dir.join("corridor.txt"))?;
            println!("exported {} sub-corridors to {}", plan.corridor.len(), dir.display());
        }
    }
    Ok(())
}
