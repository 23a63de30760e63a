//! Metropolis-Hastings steps and fixed-budget single-temperature chains.

use crate::error::{invalid, Result};
use crate::ising::{energy, energy_delta, SkInstance, SpinConfiguration};
use crate::proposal::{Move, ProposalKernel, Proposer};
use rand::Rng;

/// Steps between exact re-evaluations of the cached energy.
const RESYNC_INTERVAL: u64 = 1000;

/// State of one Markov chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub(crate) current: SpinConfiguration,
    pub(crate) current_energy: f64,
    pub(crate) best: SpinConfiguration,
    pub(crate) best_energy: f64,
    pub(crate) steps_taken: u64,
    pub(crate) accepts: u64,
}

impl ChainState {
    pub fn new(instance: &SkInstance, start: SpinConfiguration) -> Result<Self> {
        let e = energy(instance, &start)?;
        Ok(Self {
            best: start.clone(),
            current: start,
            current_energy: e,
            best_energy: e,
            steps_taken: 0,
            accepts: 0,
        })
    }

    pub fn random<R: Rng + ?Sized>(instance: &SkInstance, rng: &mut R) -> Self {
        Self::new(instance, SpinConfiguration::random(instance.n(), rng)).expect("dimension matches")
    }

    pub fn current(&self) -> &SpinConfiguration {
        &self.current
    }

    pub fn current_energy(&self) -> f64 {
        self.current_energy
    }

    pub fn best(&self) -> &SpinConfiguration {
        &self.best
    }

    pub fn best_energy(&self) -> f64 {
        self.best_energy
    }

    pub fn steps_taken(&self) -> u64 {
        self.steps_taken
    }

    pub fn accepts(&self) -> u64 {
        self.accepts
    }

    pub(crate) fn note_best(&mut self) {
        if self.current_energy < self.best_energy {
            self.best_energy = self.current_energy;
            self.best = self.current.clone();
        }
    }
}

/// `min(1, exp(-delta_f / temperature))`.
pub fn mh_accept_probability(delta_f: f64, temperature: f64) -> Result<f64> {
    if !(temperature > 0.0) {
        return invalid(format!("temperature {temperature} must be positive"));
    }
    if delta_f <= 0.0 {
        return Ok(1.0);
    }
    Ok((-delta_f / temperature).exp())
}

/// One proposal and accept/reject. Returns whether the move was accepted.
///
/// The step counter advances whether or not the proposal is accepted.
pub fn mcmc_step<R: Rng + ?Sized>(
    state: &mut ChainState,
    instance: &SkInstance,
    proposer: &mut Proposer,
    temperature: f64,
    rng: &mut R,
) -> Result<bool> {
    if !(temperature > 0.0) {
        return invalid(format!("temperature {temperature} must be positive"));
    }
    let mv = proposer.propose(&state.current, rng);
    let (delta, new_energy) = match &mv {
        Move::Flip(j) => {
            let d = energy_delta(instance, &state.current, *j)?;
            (d, state.current_energy + d)
        }
        Move::Jump(next) => {
            let e = energy(instance, next)?;
            (e - state.current_energy, e)
        }
    };
    let accept_p = mh_accept_probability(delta, temperature)?;
    let u: f64 = rng.random();
    let accepted = u < accept_p;
    if accepted {
        match mv {
            Move::Flip(j) => state.current.flip(j),
            Move::Jump(next) => state.current = next,
        }
        state.current_energy = new_energy;
        state.accepts += 1;
    }
    state.steps_taken += 1;
    if state.steps_taken % RESYNC_INTERVAL == 0 {
        state.current_energy = energy(instance, &state.current)?;
    }
    if accepted {
        state.note_best();
    }
    Ok(accepted)
}

/// Which configurations a chain run keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RecordPolicy {
    #[default]
    Nothing,
    /// The current index after every step.
    EveryStep,
    /// The current index after every `k`-th step.
    Every(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainRun {
    pub state: ChainState,
    pub trajectory: Option<Vec<usize>>,
}

/// Runs `length` Metropolis-Hastings steps at a fixed temperature.
///
/// Starts from `start` or, when absent, a uniformly random configuration drawn
/// from `rng`.
pub fn run_chain<R: Rng + ?Sized>(
    instance: &SkInstance,
    kernel: &ProposalKernel,
    temperature: f64,
    length: u64,
    rng: &mut R,
    record: RecordPolicy,
    start: Option<SpinConfiguration>,
) -> Result<ChainRun> {
    if length == 0 {
        return invalid("chain length must be at least 1");
    }
    if let RecordPolicy::Every(0) = record {
        return invalid("recording interval must be at least 1");
    }
    let mut proposer = Proposer::new(instance, *kernel)?;
    let mut state = match start {
        Some(s) => ChainState::new(instance, s)?,
        None => ChainState::random(instance, rng),
    };
    let mut trajectory = match record {
        RecordPolicy::Nothing => None,
        RecordPolicy::EveryStep => Some(Vec::with_capacity(length as usize)),
        RecordPolicy::Every(k) => Some(Vec::with_capacity((length / k) as usize)),
    };
    for step in 1..=length {
        mcmc_step(&mut state, instance, &mut proposer, temperature, rng)?;
        if let Some(t) = trajectory.as_mut() {
            let keep = match record {
                RecordPolicy::Every(k) => step % k == 0,
                _ => true,
            };
            if keep {
                t.push(state.current.index());
            }
        }
    }
    Ok(ChainRun { state, trajectory })
}
