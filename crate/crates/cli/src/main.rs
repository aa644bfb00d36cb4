use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;
use nslice::agents::Algorithm;
use nslice::harness::{
    self, eval_seeds, evaluate, random_baseline, read_timing, Checkpoint, PlotKind, PlotOptions,
    RunConfig, Trainer, CONFIG_FILE, TIMING_FILE,
};
use nslice::parallel::Exec;
use nslice::Error;

#[derive(Parser, Debug)]
#[command(name = "nslice", version, about = "Train and evaluate network-slicing agents")]
struct Cli {
    /// Log filter (error, warn, info, debug, trace).
    #[arg(long, global = true, env = "NSLICE_LOG", default_value = "info")]
    log: String,

    /// Run sequentially instead of on the thread pool.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train one run.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Run directory; defaults to `<output_dir>/<algorithm>/seed_<n>`.
        #[arg(long, env = "NSLICE_OUT")]
        out: Option<PathBuf>,
        /// Continue from a checkpoint instead of starting fresh.
        #[arg(long, conflicts_with = "config")]
        resume: Option<PathBuf>,
    },
    /// Score a checkpoint with the best-of-episodes protocol.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 5)]
        episodes: usize,
        #[arg(long, default_value_t = 3)]
        best: usize,
        /// Also score a uniform-random policy on the same episodes.
        #[arg(long)]
        random_baseline: bool,
    },
    /// Draw learning or cost curves from run directories.
    Plot {
        /// return, energy, energy_per_slice, cpu or wallclock.
        #[arg(long)]
        kind: PlotKind,
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Moving-average window.
        #[arg(long, default_value_t = 1)]
        smooth: usize,
    },
    /// Train one run per seed.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', required = true)]
        seeds: Vec<u64>,
        /// Parent directory of the per-seed runs.
        #[arg(long, env = "NSLICE_OUT")]
        out: Option<PathBuf>,
    },
    /// Compare wall-clock time per timing window across runs.
    Wallclock {
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        /// Trailing windows used per run.
        #[arg(long, default_value_t = 100)]
        windows: usize,
    },
}

fn load_config(path: Option<&PathBuf>) -> nslice::Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::desk(Algorithm::Tdsac)),
    }
}

fn run(cli: Cli) -> nslice::Result<()> {
    let exec = if cli.sequential { Exec::Sequential } else { Exec::default() };
    match cli.command {
        Command::Train { config, seed, out, resume } => {
            let summary = if let Some(ckpt) = resume {
                Trainer::resume(&ckpt, out.as_deref())?.with_exec(exec).run()?
            } else {
                let cfg = load_config(config.as_ref())?;
                let dir = out.unwrap_or_else(|| {
                    cfg.output_dir.join(cfg.algorithm.to_string()).join(format!("seed_{seed}"))
                });
                info!("training {} seed {seed} into {}", cfg.algorithm, dir.display());
                Trainer::new(cfg, seed, &dir)?.with_exec(exec).run()?
            };
            println!(
                "{} seed {}: {} steps, final eval score {}",
                summary.algorithm,
                summary.seed,
                summary.global_step,
                summary.final_eval_score.map_or("n/a".into(), |s| format!("{s:.6}"))
            );
        }
        Command::Eval { checkpoint, episodes, best, random_baseline: with_random } => {
            if best == 0 || best > episodes {
                return Err(Error::Config("need 1 <= best <= episodes".into()));
            }
            let ckpt = Checkpoint::load(&checkpoint)?;
            let seeds = eval_seeds(ckpt.seed, episodes);
            let report = evaluate(&ckpt.agent, &ckpt.config.env, &seeds, best, exec)?;
            println!("step {} returns {:?}", ckpt.global_step, report.returns);
            println!("score (best {best} of {episodes}): {:.6}", report.score);
            if with_random {
                let r = random_baseline(&ckpt.config.env, &seeds, best, ckpt.seed, exec)?;
                println!("random baseline score: {:.6}", r.score);
            }
        }
        Command::Plot { kind, runs, out, smooth } => {
            let opts = PlotOptions { smoothing: smooth, ..PlotOptions::default() };
            let series = harness::plot_runs(&runs, kind, &out, &opts)?;
            println!("wrote {} ({} series)", out.display(), series.len());
        }
        Command::Sweep { config, seeds, out } => {
            let cfg = load_config(config.as_ref())?;
            let dir = out.unwrap_or_else(|| cfg.output_dir.join(cfg.algorithm.to_string()));
            for s in harness::sweep(&cfg, &seeds, &dir, exec)? {
                println!(
                    "{} seed {}: final eval score {}",
                    s.algorithm,
                    s.seed,
                    s.final_eval_score.map_or("n/a".into(), |v| format!("{v:.6}"))
                );
            }
        }
        Command::Wallclock { runs, windows } => {
            let mut data = Vec::new();
            for dir in &runs {
                let cfg = RunConfig::load(&dir.join(CONFIG_FILE))?;
                data.push((cfg.algorithm, read_timing(&dir.join(TIMING_FILE))?));
            }
            print!("{}", harness::format_wallclock(&harness::report_wallclock(&data, windows)));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::new().parse_filters(&cli.log).format_timestamp_secs().init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if matches!(e, Error::Config(_)) { 1 } else { 2 })
        }
    }
}
