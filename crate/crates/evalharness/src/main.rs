use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use swarmtrack_eval::{
    evaluate_grid, parse_grid, parse_mask, write_results, EvalReport, EvalSettings, ExperimentConfig, NetSource, Policy,
};
use swarmtrack_trainer::PolicyMode;

#[derive(Parser)]
#[command(name = "swarmtrack", version, about = "Train and evaluate set-based Q-networks for multi-target tracking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train from a config file, writing curves.csv and checkpoints to --out.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate one checkpoint on a task grid.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Policy mode, if the checkpoint does not record one.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Which net pair acts.
        #[arg(long, value_enum, default_value = "online")]
        nets: NetsArg,
        #[arg(long = "mask-k", default_value = "none")]
        mask_k: String,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Greedy (nearest target only) or uniform-random baseline.
    Baseline {
        #[arg(long, value_enum)]
        kind: BaselineKind,
        /// Required for the greedy baseline.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long, value_enum, default_value = "online")]
        nets: NetsArg,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Evaluate every checkpoint x task x mask cell listed in a config file.
    Grid {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the default configuration as TOML.
    Config,
}

#[derive(Args)]
struct CommonArgs {
    /// Comma-separated task labels, e.g. 1a1t,4a4t,1ka1kt.
    #[arg(long)]
    tasks: String,
    #[arg(long, default_value_t = 50)]
    episodes: usize,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
    seeds: Vec<u64>,
    /// Results CSV.
    #[arg(long)]
    out: PathBuf,
    /// Config file supplying the world settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Sampling temperature for stochastic checkpoints.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Argmax of the minimum Q even for stochastic checkpoints.
    #[arg(long)]
    greedy: bool,
    /// Record per-episode wall time (results are then no longer byte-reproducible).
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    trace_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineKind {
    Greedy,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum NetsArg {
    Online,
    Target,
}

impl From<NetsArg> for NetSource {
    fn from(n: NetsArg) -> Self {
        match n {
            NetsArg::Online => NetSource::Online,
            NetsArg::Target => NetSource::Target,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Stochastic,
    Deterministic,
}

impl From<ModeArg> for PolicyMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Stochastic => PolicyMode::Stochastic,
            ModeArg::Deterministic => PolicyMode::Deterministic,
        }
    }
}

fn load_config(path: Option<&PathBuf>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("reading {}", p.display())),
        None => Ok(ExperimentConfig::default()),
    }
}

fn run_cells(policies: &[Policy], masks: &[Option<usize>], common: &CommonArgs, with_random: bool) -> Result<()> {
    let cfg = load_config(common.config.as_ref())?;
    let settings = EvalSettings {
        world: cfg.world,
        episodes: common.episodes,
        seeds: common.seeds.clone(),
        alpha: common.alpha,
        greedy: common.greedy,
        record_timing: common.timing,
        trace_dir: common.trace_dir.clone(),
    };
    let tasks = parse_grid(&common.tasks)?;
    let out = evaluate_grid(policies, &tasks, masks, &settings, with_random)?;
    write_results(&common.out, &out.records)?;
    print_reports(&out.reports);
    Ok(())
}

fn print_reports(reports: &[EvalReport]) {
    println!("{:<32} {:>10} {:>6} {:>12} {:>10} {:>8} {:>10}", "checkpoint", "task", "mask", "mean_return", "seed_std", "dup", "normalized");
    for r in reports {
        let mask = r.task.mask_k.map_or_else(|| "none".to_string(), |k| k.to_string());
        let norm = r.normalized.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
        println!(
            "{:<32} {:>10} {:>6} {:>12.4} {:>10.4} {:>8.4} {:>10}",
            r.checkpoint, r.task.label, mask, r.mean_return, r.std_across_seeds, r.mean_duplicate_assignment_rate, norm
        );
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Train { config, seed, out } => {
            let cfg = load_config(config.as_ref())?;
            std::fs::create_dir_all(&out)?;
            std::fs::write(out.join("config.toml"), cfg.to_toml_string())?;
            let outcome = swarmtrack_trainer::train(&cfg.train, &cfg.world, &cfg.net, seed, Some(&out))?;
            let last = outcome.curves.last().map_or(0, |c| c.env_steps);
            println!("trained {last} environment steps; {} checkpoints in {}", outcome.checkpoints.len(), out.display());
        }
        Command::Eval { checkpoint, mode, nets, mask_k, common } => {
            let policy = Policy::load(&checkpoint, mode.map(Into::into), nets.into())?;
            run_cells(&[policy], &[parse_mask(&mask_k)?], &common, false)?;
        }
        Command::Baseline { kind, checkpoint, mode, nets, common } => match kind {
            BaselineKind::Greedy => {
                let Some(path) = checkpoint else { bail!("the greedy baseline needs --checkpoint") };
                let policy = Policy::load(&path, mode.map(Into::into), nets.into())?;
                run_cells(&[policy], &[Some(1)], &common, false)?;
            }
            BaselineKind::Random => run_cells(&[], &[None], &common, true)?,
        },
        Command::Grid { config } => {
            let cfg = ExperimentConfig::load(&config).with_context(|| format!("reading {}", config.display()))?;
            let out = swarmtrack_eval::run_grid(&cfg)?;
            print_reports(&out.reports);
        }
        Command::Config => print!("{}", ExperimentConfig::default().to_toml_string()),
    }
    Ok(())
}
