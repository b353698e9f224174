use std::fs::File;
use std::io::BufWriter;
use std::path::{Path as FsPath, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use manyrrt::bench::{
    read_results, render_csv, render_markdown, run_planner, run_suite, summarize, PlannerKind, ResolvedTrial, Suite,
    RESULTS_FILE,
};
use manyrrt::collision::{EnvironmentKind, EnvironmentSpec, Scene, World};
use manyrrt::ik::SeedDatabase;
use manyrrt::many::{ManyConfig, WorkerMode};
use manyrrt::rrt::write_trace_csv;
use manyrrt::{Error, JointConfig, Pose, Result, SerialChain};

#[derive(Parser)]
#[command(name = "manyrrt", version, about = "Multi-goal RRT* motion planning for serial manipulators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct WorldArgs {
    /// Reference chain (planar2, generic6, generic7) or chain file.
    #[arg(long)]
    chain: String,
    /// Environment name (empty, table, wall, passage, random, bifurcated) or world file.
    #[arg(long, default_value = "empty")]
    env: String,
    #[arg(long, default_value_t = 0)]
    env_seed: u64,
    /// Obstacle count of random worlds.
    #[arg(long)]
    obstacles: Option<usize>,
}

impl WorldArgs {
    fn scene(&self) -> Result<Scene> {
        let chain = SerialChain::resolve(&self.chain)?;
        let world = match self.env.parse::<EnvironmentKind>() {
            Ok(kind) => {
                let mut spec = EnvironmentSpec::new(kind, chain.reach(), self.env_seed).planar(chain.dof() == 2);
                if let Some(n) = self.obstacles {
                    spec = spec.with_obstacles(n);
                }
                spec.build()?
            }
            Err(_) => World::load(&self.env)?,
        };
        Ok(Scene::new(chain, world))
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
    Md,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a seed database of free configurations and their poses.
    BuildSeeds {
        #[command(flatten)]
        world: WorldArgs,
        #[arg(long, default_value_t = 100_000)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Plan one query and write the path and its cost trace.
    Plan {
        #[command(flatten)]
        world: WorldArgs,
        /// Start configuration, or `random` for a seeded free sample.
        #[arg(long, num_args = 1.., allow_negative_numbers = true, required = true)]
        start: Vec<String>,
        /// Goal pose `x y z qw qx qy qz`.
        #[arg(long, num_args = 7, allow_negative_numbers = true, required = true)]
        goal_pose: Vec<f64>,
        #[arg(long, value_enum, default_value = "many")]
        planner: PlannerArg,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value_t = 3000)]
        max_iters: usize,
        #[arg(long, default_value_t = 3000)]
        timeout_ms: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Seed database file; built on the fly when omitted.
        #[arg(long)]
        seeds: Option<PathBuf>,
        #[arg(long, default_value_t = 100_000)]
        seed_samples: usize,
        /// Run each tree on its own thread.
        #[arg(long)]
        parallel: bool,
        /// Path output (JSON with cost and waypoints).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Trace CSV output: iteration, wall_ms, best_cost.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run a suite file and write results.csv, summary.json and traces/.
    Bench {
        #[arg(long)]
        suite: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Aggregate a results directory (or results.csv) per environment and planner.
    Summarize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "md")]
        format: Format,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PlannerArg {
    Rrtstar,
    Connect,
    Many,
}

impl From<PlannerArg> for PlannerKind {
    fn from(p: PlannerArg) -> Self {
        match p {
            PlannerArg::Rrtstar => PlannerKind::RrtStar,
            PlannerArg::Connect => PlannerKind::Connect,
            PlannerArg::Many => PlannerKind::Many,
        }
    }
}

fn parse_start(scene: &Scene, args: &[String], seed: u64) -> Result<JointConfig> {
    if args.len() == 1 && args[0] == "random" {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        return scene
            .sample_free(&mut rng, 200_000)
            .map(JointConfig::from)
            .ok_or(Error::InfeasibleWorld {
                accepted: 0,
                tried: 200_000,
            });
    }
    let q: Vec<f64> = args
        .iter()
        .map(|s| s.parse::<f64>().map_err(|_| Error::InvalidArgument(format!("bad joint value '{s}'"))))
        .collect::<Result<_>>()?;
    scene.chain.check_dims(&q)?;
    Ok(q.into())
}

fn load_or_build_db(scene: &Scene, file: Option<&FsPath>, samples: usize, seed: u64) -> Result<SeedDatabase> {
    match file {
        Some(f) => {
            let db = SeedDatabase::load(f)?;
            if !db.matches(scene) {
                return Err(Error::InvalidArgument("seed database was built for another chain or world".into()));
            }
            Ok(db)
        }
        None => SeedDatabase::build(scene, samples, seed),
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::BuildSeeds {
            world,
            count,
            seed,
            out,
        } => {
            let scene = world.scene()?;
            let db = SeedDatabase::build(&scene, count, seed)?;
            db.save(&out)?;
            eprintln!("{} entries written to {}", db.len(), out.display());
        }
        Command::Plan {
            world,
            start,
            goal_pose,
            planner,
            k,
            max_iters,
            timeout_ms,
            seed,
            seeds,
            seed_samples,
            parallel,
            out,
            trace,
        } => {
            let scene = world.scene()?;
            let q_start = parse_start(&scene, &start, seed)?;
            let target = Pose::from_array(goal_pose.try_into().expect("clap enforces 7 values"))?;
            let mut config = ManyConfig::for_chain(&scene.chain).with_seed(seed);
            config.k = k;
            config.base.max_iterations = max_iters;
            config.base.max_runtime_ms = timeout_ms;
            if parallel {
                config.workers = WorkerMode::Parallel;
            }
            let kind = PlannerKind::from(planner);
            let db = match kind {
                PlannerKind::Many => Some(load_or_build_db(&scene, seeds.as_deref(), seed_samples, seed)?),
                _ => None,
            };
            let resolved = ResolvedTrial {
                scene,
                q_start,
                target,
                goal_config: None,
            };
            let report = run_planner(&resolved, kind, &config, db.as_ref())?;
            if let Some(t) = trace {
                write_trace_csv(BufWriter::new(File::create(t)?), &report.trace)?;
            }
            match report.path() {
                Some(p) => {
                    println!("solved: cost {:.6}, {} waypoints, {} iterations", p.cost, p.waypoints.len(), report.iterations);
                    if let Some(o) = out {
                        p.save(o)?;
                    }
                }
                None => println!("no solution after {} iterations", report.iterations),
            }
        }
        Command::Bench { suite, out_dir } => {
            let suite = Suite::load(&suite)?;
            let results = run_suite(&suite.trials, Some(&out_dir))?;
            let errors = results.iter().filter(|r| r.error.is_some()).count();
            print!("{}", render_markdown(&summarize(&results)));
            if errors > 0 {
                eprintln!("{errors} of {} trials did not execute", results.len());
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Summarize { input, format } => {
            let file = if input.is_dir() { input.join(RESULTS_FILE) } else { input };
            let rows = summarize(&read_results(file)?);
            match format {
                Format::Csv => print!("{}", render_csv(&rows)),
                Format::Json => println!("{}", serde_json::to_string_pretty(&rows)?),
                Format::Md => print!("{}", render_markdown(&rows)),
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
