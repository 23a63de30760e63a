//! Execution of single runs and of task batches over a worker pool.

use crate::config::{ExperimentConfig, Method, Series};
use crate::error::{HarnessError, Result};
use crate::seeds::{Ensemble, RunCoord, SeedTree};
use qeopt::chain::{mcmc_step, ChainState};
use qeopt::ising::{generate_sk, ground_state, SkInstance};
use qeopt::proposal::Proposer;
use qeopt::schedule::{anneal_with, is_ground, make_schedule};
use qeopt::tempering::{PtConfig, PtRunner, PtStreams, SwapRule, TemperatureLadder};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Arc;

/// An instance with its exact ground energy.
#[derive(Debug, Clone)]
pub struct PreparedInstance {
    pub index: usize,
    pub seed: u64,
    pub instance: SkInstance,
    pub ground_energy: f64,
}

pub fn prepare_instance(seeds: &SeedTree, n: usize, ensemble: Ensemble, index: usize) -> Result<PreparedInstance> {
    let seed = seeds.instance_seed(n, ensemble, index);
    let instance = generate_sk(n, seed)?;
    let (_, ground_energy) = ground_state(&instance)?;
    Ok(PreparedInstance {
        index,
        seed,
        instance,
        ground_energy,
    })
}

/// Outcome of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub repeat: usize,
    pub success: bool,
    pub best_energy: f64,
    pub final_energy: f64,
    pub proposals: u64,
}

/// A batch of repeats sharing everything but the repeat index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TaskId {
    pub series: String,
    pub n: usize,
    pub ensemble: Ensemble,
    pub instance: usize,
    pub length: u64,
}

#[derive(Debug, Clone)]
pub struct Task {
    pub id: TaskId,
    pub series: Arc<Series>,
    pub prepared: Arc<PreparedInstance>,
    pub repeats: usize,
}

/// Per-series state reused across the repeats of one task.
enum Engine<'a> {
    Anneal(Proposer),
    Chain(Proposer, f64),
    Tempering(PtRunner<'a>),
}

fn engine<'a>(cfg: &ExperimentConfig, series: &Series, instance: &'a SkInstance, length: u64) -> Result<Engine<'a>> {
    Ok(match series.method {
        Method::Sa | Method::Qesa => Engine::Anneal(Proposer::new(instance, series.kernel)?),
        Method::Mcmc => Engine::Chain(Proposer::new(instance, series.kernel)?, cfg.mcmc_temperature()),
        Method::Pt | Method::Qept => {
            let pt = PtConfig {
                ladder: TemperatureLadder::geometric(cfg.temperature.high, cfg.temperature.low, series.replicas)?,
                quantum_replicas: series.quantum_replicas,
                quantum_kernel: series.kernel,
                swap_interval: cfg.tempering.swap_interval.unwrap_or(instance.n() as u64),
                total_steps: length,
                swap_rule: SwapRule::Metropolis,
            };
            Engine::Tempering(PtRunner::new(instance, pt)?)
        }
    })
}

fn run_once(
    cfg: &ExperimentConfig,
    engine: &mut Engine<'_>,
    prepared: &PreparedInstance,
    coord: &RunCoord,
    seeds: &SeedTree,
) -> Result<RunRecord> {
    let key = seeds.run_key(coord);
    let inst = &prepared.instance;
    let g = Some(prepared.ground_energy);
    let (best_energy, final_energy, proposals) = match engine {
        Engine::Anneal(proposer) => {
            let schedule = make_schedule(cfg.temperature.high, cfg.temperature.low, coord.length as usize)?;
            let out = anneal_with(proposer, inst, &schedule, &mut key.rng(), g)?;
            (out.best_energy, out.final_energy, out.proposals)
        }
        Engine::Chain(proposer, t) => {
            let mut rng = key.rng();
            let mut state = ChainState::random(inst, &mut rng);
            for _ in 0..coord.length {
                mcmc_step(&mut state, inst, proposer, *t, &mut rng)?;
            }
            (state.best_energy(), state.current_energy(), state.steps_taken())
        }
        Engine::Tempering(runner) => {
            let mut streams = PtStreams::derive(&key, runner.config().ladder.len());
            let out = runner.run(&mut streams, g)?;
            (out.best_energy, out.coldest_energy, out.proposals)
        }
    };
    Ok(RunRecord {
        repeat: coord.repeat,
        success: is_ground(best_energy, prepared.ground_energy),
        best_energy,
        final_energy,
        proposals,
    })
}

/// Runs every repeat of a task.
pub fn run_task(cfg: &ExperimentConfig, seeds: &SeedTree, task: &Task) -> Result<Vec<RunRecord>> {
    let mut eng = engine(cfg, &task.series, &task.prepared.instance, task.id.length)?;
    (0..task.repeats)
        .map(|repeat| {
            let coord = coord_of(&task.id, repeat);
            run_once(cfg, &mut eng, &task.prepared, &coord, seeds)
        })
        .collect()
}

/// Re-executes a single run in isolation.
pub fn replay(cfg: &ExperimentConfig, coord: &RunCoord) -> Result<RunRecord> {
    let series = cfg
        .series()
        .into_iter()
        .find(|s| s.label == coord.series)
        .ok_or_else(|| HarnessError::Config(format!("config has no series {:?}", coord.series)))?;
    cfg.check_caps(coord.n)?;
    let seeds = SeedTree::new(cfg.master_seed);
    let prepared = prepare_instance(&seeds, coord.n, coord.ensemble, coord.instance)?;
    let mut eng = engine(cfg, &series, &prepared.instance, coord.length)?;
    run_once(cfg, &mut eng, &prepared, coord, &seeds)
}

pub fn coord_of(id: &TaskId, repeat: usize) -> RunCoord {
    RunCoord {
        series: id.series.clone(),
        n: id.n,
        ensemble: id.ensemble,
        instance: id.instance,
        length: id.length,
        repeat,
    }
}

/// Builds a rayon pool; 0 workers means one per available core.
pub fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))
}

/// Instances keyed by `(n, ensemble, index)`.
pub type InstanceCache = BTreeMap<(usize, Ensemble, usize), Arc<PreparedInstance>>;
