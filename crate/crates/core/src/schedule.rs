//! Exponential-decay temperature schedules and (quantum-enhanced) simulated annealing.

use crate::chain::{mcmc_step, ChainState};
use crate::error::{invalid, Result};
use crate::ising::{SkInstance, SpinConfiguration};
use crate::proposal::{ProposalKernel, Proposer};
use rand::Rng;

/// Energies within this distance of the ground energy count as a success.
pub const SUCCESS_TOLERANCE: f64 = 1e-9;

/// `|energy - ground| <= SUCCESS_TOLERANCE * (1 + |ground|)`.
pub fn is_ground(energy: f64, ground_energy: f64) -> bool {
    (energy - ground_energy).abs() <= SUCCESS_TOLERANCE * (1.0 + ground_energy.abs())
}

/// Temperatures `t_high * exp(-a i)` for `i = 0..length`, with
/// `a = ln(t_high / t_low) / (length - 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TemperatureSchedule {
    t_high: f64,
    t_low: f64,
    values: Vec<f64>,
}

impl TemperatureSchedule {
    pub fn t_high(&self) -> f64 {
        self.t_high
    }

    pub fn t_low(&self) -> f64 {
        self.t_low
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Decay rate `a`; zero for the single-entry schedule.
    pub fn decay_rate(&self) -> f64 {
        if self.values.len() < 2 {
            0.0
        } else {
            (self.t_high / self.t_low).ln() / (self.values.len() - 1) as f64
        }
    }

    pub fn is_strictly_decreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1] < w[0])
    }
}

/// Geometric interpolation from `t_high` down to `t_low` in `length` entries.
///
/// A length of one yields the single value `t_high`.
pub fn make_schedule(t_high: f64, t_low: f64, length: usize) -> Result<TemperatureSchedule> {
    if !(t_low > 0.0 && t_high > t_low && t_high.is_finite()) {
        return invalid(format!("need t_high > t_low > 0, got t_high = {t_high}, t_low = {t_low}"));
    }
    if length == 0 {
        return invalid("schedule length must be at least 1");
    }
    let values = geometric(t_high, t_low, length);
    Ok(TemperatureSchedule { t_high, t_low, values })
}

pub(crate) fn geometric(t_high: f64, t_low: f64, length: usize) -> Vec<f64> {
    if length == 1 {
        return vec![t_high];
    }
    let a = (t_high / t_low).ln() / (length - 1) as f64;
    let mut values: Vec<f64> = (0..length).map(|i| t_high * (-a * i as f64).exp()).collect();
    values[length - 1] = t_low;
    values
}

/// Result of a single annealing run.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnealOutcome {
    pub best: SpinConfiguration,
    pub best_energy: f64,
    pub final_config: SpinConfiguration,
    pub final_energy: f64,
    pub proposals: u64,
    pub accepts: u64,
    /// Best-seen energy reached the ground energy, when one was supplied.
    pub success: Option<bool>,
    /// Final energy equals the ground energy, when one was supplied.
    pub success_final: Option<bool>,
}

/// One annealing run: a single Metropolis-Hastings step per schedule entry,
/// starting from a uniformly random configuration.
pub fn simulated_anneal<R: Rng + ?Sized>(
    instance: &SkInstance,
    kernel: &ProposalKernel,
    schedule: &TemperatureSchedule,
    rng: &mut R,
    ground_energy: Option<f64>,
) -> Result<AnnealOutcome> {
    let mut proposer = Proposer::new(instance, *kernel)?;
    anneal_with(&mut proposer, instance, schedule, rng, ground_energy)
}

/// [`simulated_anneal`] with a proposer built once and reused across runs.
pub fn anneal_with<R: Rng + ?Sized>(
    proposer: &mut Proposer,
    instance: &SkInstance,
    schedule: &TemperatureSchedule,
    rng: &mut R,
    ground_energy: Option<f64>,
) -> Result<AnnealOutcome> {
    if schedule.is_empty() {
        return invalid("empty schedule");
    }
    if !schedule.is_strictly_decreasing() {
        return invalid("schedule must be strictly decreasing");
    }
    let mut state = ChainState::random(instance, rng);
    for &t in schedule.values() {
        mcmc_step(&mut state, instance, proposer, t, rng)?;
    }
    Ok(outcome(state, ground_energy))
}

pub(crate) fn outcome(state: ChainState, ground_energy: Option<f64>) -> AnnealOutcome {
    let hit = |e: f64| ground_energy.map(|g| is_ground(e, g));
    AnnealOutcome {
        success: hit(state.best_energy),
        success_final: hit(state.current_energy),
        best: state.best,
        best_energy: state.best_energy,
        final_config: state.current,
        final_energy: state.current_energy,
        proposals: state.steps_taken,
        accepts: state.accepts,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ising::{generate_sk, ground_state};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn three_point_schedule() {
        let s = make_schedule(10.0, 0.1, 3).unwrap();
        assert_eq!(s.values()[0], 10.0);
        assert!((s.values()[1] - 1.0).abs() < 1e-12);
        assert_eq!(s.values()[2], 0.1);
        assert_eq!(make_schedule(10.0, 0.1, 2).unwrap().values(), &[10.0, 0.1]);
        assert_eq!(make_schedule(10.0, 0.1, 1).unwrap().values(), &[10.0]);
    }

    #[test]
    fn long_schedule_has_constant_ratio() {
        let s = make_schedule(10.0, 0.1, 151).unwrap();
        assert_eq!(s.values()[0], 10.0);
        assert_eq!(s.values()[150], 0.1);
        let r0 = s.values()[1] / s.values()[0];
        for w in s.values().windows(2) {
            assert!((w[1] / w[0] - r0).abs() < 1e-12);
        }
        assert!(s.is_strictly_decreasing());
        assert!((s.decay_rate() - 100f64.ln() / 150.0).abs() < 1e-15);
    }

    #[test]
    fn schedule_errors() {
        assert!(make_schedule(0.1, 10.0, 5).is_err());
        assert!(make_schedule(10.0, 0.0, 5).is_err());
        assert!(make_schedule(10.0, -1.0, 5).is_err());
        assert!(make_schedule(1.0, 1.0, 5).is_err());
        assert!(make_schedule(10.0, 0.1, 0).is_err());
    }

    #[test]
    fn budget_is_schedule_length() {
        let inst = generate_sk(6, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for len in [1, 2, 17] {
            let s = make_schedule(10.0, 0.1, len).unwrap();
            for kernel in [ProposalKernel::Local, ProposalKernel::quantum_default()] {
                let out = simulated_anneal(&inst, &kernel, &s, &mut rng, None).unwrap();
                assert_eq!(out.proposals, len as u64);
                assert_eq!(out.success, None);
            }
        }
    }

    #[test]
    fn zero_instance_always_succeeds() {
        let inst = SkInstance::zero(5).unwrap();
        let s = make_schedule(10.0, 0.1, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let out = simulated_anneal(&inst, &ProposalKernel::Local, &s, &mut rng, Some(0.0)).unwrap();
            assert_eq!(out.success, Some(true));
        }
    }

    #[test]
    fn best_seen_dominates_final() {
        let inst = generate_sk(7, 3).unwrap();
        let (_, g) = ground_state(&inst).unwrap();
        let s = make_schedule(10.0, 0.1, 60).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut proposer = Proposer::new(&inst, ProposalKernel::Local).unwrap();
        for _ in 0..200 {
            let out = anneal_with(&mut proposer, &inst, &s, &mut rng, Some(g)).unwrap();
            assert!(out.best_energy <= out.final_energy);
            assert!(out.success.unwrap() >= out.success_final.unwrap());
        }
    }
}
