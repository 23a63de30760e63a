use clap::{Parser, Subcommand};
use qeopt::ising::SkInstance;
use qeopt_harness::config::ExperimentConfig;
use qeopt_harness::error::{HarnessError, Result};
use qeopt_harness::runner::{self, PreparedInstance};
use qeopt_harness::seeds::{Ensemble, RunCoord, SeedTree};
use qeopt_harness::studies::{self, InstanceSource, RunOptions, SweepOutput};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "qeopt", version, about = "Annealing and tempering benchmarks on SK spin glasses")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct StudyArgs {
    /// TOML experiment config.
    #[arg(long, short)]
    config: PathBuf,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads, overriding the config (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Discard progress from an earlier interrupted run.
    #[arg(long)]
    fresh: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Write generated instances to JSON files.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "tune")]
        ensemble: String,
        #[arg(long, default_value = "instances")]
        out: PathBuf,
    },
    /// Run the configured method on instance files over the length grid.
    Run {
        #[command(flatten)]
        study: StudyArgs,
        /// Instance JSON files.
        #[arg(long, required = true, num_args = 1..)]
        instance: Vec<PathBuf>,
    },
    /// Success probability against length.
    SweepProb(StudyArgs),
    /// Effort against length with the fitted optimum.
    SweepEffort(StudyArgs),
    /// Tuned optimum per size, evaluated on a fresh ensemble.
    Scaling(StudyArgs),
    /// Exact spectral gaps and mixing-time bounds.
    Gap(StudyArgs),
    /// Re-run a single run from its coordinates and print the result as JSON.
    Replay {
        #[arg(long, short)]
        config: PathBuf,
        #[arg(long)]
        series: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value = "tune")]
        ensemble: String,
        #[arg(long)]
        instance: usize,
        #[arg(long)]
        length: u64,
        #[arg(long)]
        repeat: usize,
    },
    /// Summarize an output directory.
    Report {
        #[arg(long)]
        dir: PathBuf,
    },
}

fn parse_ensemble(s: &str) -> Result<Ensemble> {
    Ensemble::parse(s).ok_or_else(|| HarnessError::Config(format!("unknown ensemble {s:?}; use tune or eval")))
}

fn options(args: &StudyArgs, cfg: &ExperimentConfig, command: &str) -> RunOptions {
    RunOptions {
        out: Some(args.out.clone().unwrap_or_else(|| cfg.output.clone())),
        fresh: args.fresh,
        workers: args.workers,
        command: command.into(),
    }
}

fn summarize(out: &SweepOutput, opts: &RunOptions) -> Result<()> {
    if let Some(dir) = &opts.out {
        eprintln!(
            "{} tasks ({} resumed), results in {}",
            out.tasks_total,
            out.tasks_resumed,
            dir.display()
        );
    }
    for f in &out.failures {
        eprintln!("warning [{}] {}: {}", f.kind, f.scope, f.message);
    }
    match studies::worst_failure(out) {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn study(args: &StudyArgs, name: &str, f: fn(&ExperimentConfig, &RunOptions) -> Result<SweepOutput>) -> Result<()> {
    let cfg = ExperimentConfig::load(&args.config)?;
    let opts = options(args, &cfg, name);
    let out = f(&cfg, &opts)?;
    summarize(&out, &opts)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen {
            n,
            count,
            seed,
            ensemble,
            out,
        } => {
            let ens = parse_ensemble(&ensemble)?;
            let seeds = SeedTree::new(seed);
            std::fs::create_dir_all(&out)?;
            for i in 0..count {
                let s = seeds.instance_seed(n, ens, i);
                let inst = qeopt::ising::generate_sk(n, s).map_err(|e| HarnessError::Config(e.to_string()))?;
                let path = out.join(format!("sk-n{n}-{}-{i:04}.json", ens.label()));
                inst.save(&path)?;
                println!("{}", path.display());
            }
            Ok(())
        }
        Command::Run { study, instance } => {
            let cfg = ExperimentConfig::load(&study.config)?;
            let mut list = Vec::new();
            for (index, path) in instance.iter().enumerate() {
                let inst = SkInstance::load(path).map_err(|e| HarnessError::Config(e.to_string()))?;
                let (_, ground_energy) = qeopt::ising::ground_state(&inst)?;
                list.push(PreparedInstance {
                    index,
                    seed: inst.seed(),
                    instance: inst,
                    ground_energy,
                });
            }
            let opts = options(&study, &cfg, "run");
            let out = studies::sweep_on(&cfg, &opts, &InstanceSource::Given(list))?;
            summarize(&out, &opts)
        }
        Command::SweepProb(a) => study(&a, "sweep-prob", studies::probability_sweep),
        Command::SweepEffort(a) => study(&a, "sweep-effort", studies::effort_sweep),
        Command::Scaling(a) => study(&a, "scaling", studies::scaling_study),
        Command::Gap(a) => study(&a, "gap", studies::gap_study),
        Command::Replay {
            config,
            series,
            n,
            ensemble,
            instance,
            length,
            repeat,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let coord = RunCoord {
                series,
                n,
                ensemble: parse_ensemble(&ensemble)?,
                instance,
                length,
                repeat,
            };
            let rec = runner::replay(&cfg, &coord)?;
            println!("{}", serde_json::to_string(&rec).expect("record serializes"));
            Ok(())
        }
        Command::Report { dir } => {
            print!("{}", qeopt_harness::report::report(&dir)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
