use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use stlwalk::collision::{sample_dataset, train_mlp};
use stlwalk::config::Config;
use stlwalk::harness::{run_episode, sweep_with, Controller, Simulator, N_DIRECTIONS};
use stlwalk::mpc::{MpcError, PlannerContext};

#[derive(Parser)]
#[command(
    name = "stlwalk",
    version,
    about = "STL-constrained MPC push recovery for reduced-order walking"
)]
struct Cli {
    /// JSON configuration file; defaults are used for missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the collision training seed and the state-noise seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Unperturbed walking; writes the trace CSV.
    Walk {
        #[arg(long, default_value = "stl")]
        controller: String,
        #[arg(long, default_value_t = 10)]
        steps: usize,
        #[arg(long, default_value = "walk.csv")]
        out: PathBuf,
    },
    /// Single push episode; writes the episode JSON and trace CSV.
    Push {
        /// Direction index, 30 degrees each, counter-clockwise from forward.
        #[arg(long)]
        dir: usize,
        #[arg(long)]
        phase: f64,
        /// Force in newtons.
        #[arg(long)]
        force: f64,
        #[arg(long, default_value = "stl")]
        controller: String,
        #[arg(long, default_value = "push")]
        out: PathBuf,
    },
    /// Largest recoverable force over every direction and phase.
    Sweep {
        /// Comma-separated push phases; the configured ones when omitted.
        #[arg(long, value_delimiter = ',')]
        phases: Option<Vec<f64>>,
        #[arg(long, default_value = "sweep")]
        out: PathBuf,
    },
    /// Trains the collision network and writes it as JSON.
    TrainCollision {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value = "model.json")]
        out: PathBuf,
    },
}

/// Marks errors caused by a configuration that admits no valid gait or plan.
#[derive(Debug, thiserror::Error)]
#[error("infeasible configuration: {0}")]
struct Infeasible(String);

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Infeasible>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

fn load_config(cli: &Cli) -> anyhow::Result<Config> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.collision.training.seed = seed;
        cfg.sweep.noise_seed = seed;
    }
    Ok(cfg)
}

fn simulator(cfg: &Config) -> anyhow::Result<Simulator> {
    let net = cfg.collision.network()?;
    let ctx = PlannerContext::new(cfg, Arc::new(net)).map_err(|e| match e {
        MpcError::Locomotion(_) | MpcError::Model(_) => {
            anyhow::Error::new(Infeasible(e.to_string()))
        }
        e => e.into(),
    })?;
    Ok(Simulator::new(Arc::new(ctx), cfg.sweep.clone()))
}

fn controller(id: &str) -> anyhow::Result<Controller> {
    Controller::parse(id)
        .with_context(|| format!("unknown controller {id:?} (expected stl or baseline)"))
}

fn write_trace(trace: &stlwalk::stl::Trace, path: &Path) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    trace.write_csv(BufWriter::new(f))?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = load_config(&cli)?;
    match cli.command {
        Command::Walk {
            controller: c,
            steps,
            out,
        } => {
            let sim = simulator(&cfg)?;
            let r = run_episode(&sim, controller(&c)?, None, steps, false);
            write_trace(r.trace(), &out)?;
            println!(
                "walked {} steps, {} keyframes, min keyframe distance {:.3}, failure: {}",
                r.steps.len(),
                r.keyframes.len(),
                r.keyframes
                    .iter()
                    .map(|k| k.distance)
                    .fold(f64::INFINITY, f64::min),
                r.failure.as_deref().unwrap_or("none"),
            );
            println!("trace written to {}", out.display());
        }
        Command::Push {
            dir,
            phase,
            force,
            controller: c,
            out,
        } => {
            if dir >= N_DIRECTIONS {
                bail!("direction index must be below {N_DIRECTIONS}");
            }
            if !(0.0..1.0).contains(&phase) || !force.is_finite() || force < 0.0 {
                bail!("phase must lie in [0, 1) and force must be non-negative");
            }
            let sim = simulator(&cfg)?;
            let push = sim.push(dir, force, phase);
            let steps = sim.push_step() + 1 + cfg.sweep.post_push_steps;
            let r = run_episode(&sim, controller(&c)?, Some(push), steps, false);
            std::fs::create_dir_all(&out)?;
            write_trace(r.trace(), &out.join("trace.csv"))?;
            std::fs::write(
                out.join("episode.json"),
                serde_json::to_string_pretty(&r)? + "\n",
            )?;
            match r.first_post_push_foothold() {
                Some(f) => println!(
                    "first foothold after push at [{:.3}, {:.3}], crosses: {}",
                    f.position[0],
                    f.position[1],
                    f.crosses()
                ),
                None => println!("no foothold after push"),
            }
            println!(
                "recovered: {} (steps {:?}), min collision margin {:.4} m",
                r.recovered, r.steps_to_recover, r.min_collision_margin
            );
            println!("outputs written to {}", out.display());
        }
        Command::Sweep { phases, out } => {
            let mut cfg = cfg;
            if let Some(p) = phases {
                cfg.sweep.phases = p;
            }
            let sim = simulator(&cfg)?;
            let table = sweep_with(&sim, |c| {
                eprintln!(
                    "{} phase {:.2} dir {:2}: {}",
                    c.controller.id(),
                    c.phase,
                    c.direction_index,
                    c.search.map_or_else(
                        || c.error.clone().unwrap_or_default(),
                        |s| format!("{:.1} N", s.max_force)
                    ),
                );
            });
            if let Some(e) = table.cells.iter().find_map(|c| c.error.as_ref()) {
                table.write_outputs(&out)?;
                return Err(Infeasible(e.clone()).into());
            }
            table.write_outputs(&out)?;
            let s = table.summary();
            println!(
                "{} cells compared: at least baseline {:.1}%, strictly greater {:.1}%",
                s.compared_cells,
                100.0 * s.at_least_fraction,
                100.0 * s.strictly_greater_fraction
            );
            println!("outputs written to {}", out.display());
        }
        Command::TrainCollision { n, out } => {
            let mut c = cfg.collision.clone();
            if let Some(n) = n {
                c.training.samples = n;
            }
            let data = sample_dataset(c.training.samples, &c.geometry, &c.ranges, c.training.seed)?;
            let (net, report) = train_mlp(&data, &c.training)?;
            std::fs::write(&out, serde_json::to_string(&net)?)?;
            println!("{report:?}");
            println!("model written to {}", out.display());
        }
    }
    Ok(())
}
