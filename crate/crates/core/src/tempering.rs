//! Parallel tempering with an optional set of quantum-enhanced replicas.
//!
//! Replica `i` is pinned to `ladder[i]`; the ladder runs from hottest to coldest.
//! Swaps exchange configurations (and their cached energies) between adjacent
//! temperatures, never the temperatures themselves, so "the `m_q` coldest replicas
//! are quantum" stays well defined for the whole run.

use crate::chain::{mcmc_step, ChainState};
use crate::error::{invalid, Result};
use crate::ising::{SkInstance, SpinConfiguration};
use crate::proposal::{ProposalKernel, Proposer};
use crate::rng::StreamKey;
use crate::schedule::{geometric, is_ground};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Replica temperatures, hottest first.
#[derive(Debug, Clone, PartialEq)]
pub struct TemperatureLadder {
    temperatures: Vec<f64>,
}

impl TemperatureLadder {
    /// `m` temperatures `t_high * exp(-a i)` ending exactly at `t_low`.
    pub fn geometric(t_high: f64, t_low: f64, m: usize) -> Result<Self> {
        if m < 2 {
            return invalid(format!("a ladder needs at least 2 replicas, got {m}"));
        }
        if !(t_low > 0.0 && t_high > t_low && t_high.is_finite()) {
            return invalid(format!("need t_high > t_low > 0, got t_high = {t_high}, t_low = {t_low}"));
        }
        Ok(Self {
            temperatures: geometric(t_high, t_low, m),
        })
    }

    /// An explicit strictly decreasing ladder.
    pub fn from_temperatures(temperatures: Vec<f64>) -> Result<Self> {
        if temperatures.len() < 2 {
            return invalid("a ladder needs at least 2 replicas");
        }
        if temperatures.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return invalid("ladder temperatures must be positive and finite");
        }
        if !temperatures.windows(2).all(|w| w[1] < w[0]) {
            return invalid("ladder must be strictly decreasing");
        }
        Ok(Self { temperatures })
    }

    /// Every replica at the same temperature. Only useful for checking that
    /// exchanges between identical temperatures leave the product measure intact.
    pub fn degenerate(temperature: f64, m: usize) -> Result<Self> {
        if m < 2 || !(temperature > 0.0) {
            return invalid("degenerate ladder needs m >= 2 and a positive temperature");
        }
        Ok(Self {
            temperatures: vec![temperature; m],
        })
    }

    pub fn temperatures(&self) -> &[f64] {
        &self.temperatures
    }

    pub fn len(&self) -> usize {
        self.temperatures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.temperatures.is_empty()
    }
}

/// `min(1, exp((1/t_i - 1/t_j) (f_i - f_j)))`.
pub fn pt_swap_probability(t_i: f64, t_j: f64, f_i: f64, f_j: f64) -> Result<f64> {
    if !(t_i > 0.0 && t_j > 0.0) {
        return invalid(format!("temperatures must be positive, got {t_i} and {t_j}"));
    }
    let exponent = (1.0 / t_i - 1.0 / t_j) * (f_i - f_j);
    if exponent >= 0.0 {
        return Ok(1.0);
    }
    Ok(exponent.exp())
}

/// Adjacent pairs attempted at a swap epoch, as 0-based ladder positions.
///
/// `step` must be a positive multiple of `k`. Odd epochs (`step / k` odd) pair
/// `(0,1), (2,3), ...`; even epochs pair `(1,2), (3,4), ...`. In 1-based labels
/// this is the `start = 2 - ((step / k) mod 2)` rule.
pub fn swap_pairs_for(step: u64, k: u64, m: usize) -> Result<Vec<(usize, usize)>> {
    if k == 0 {
        return invalid("swap interval must be at least 1");
    }
    if step == 0 || step % k != 0 {
        return invalid(format!("step {step} is not a positive multiple of {k}"));
    }
    let start = if (step / k) % 2 == 1 { 0 } else { 1 };
    Ok((start..m.saturating_sub(1)).step_by(2).map(|i| (i, i + 1)).collect())
}

/// How swap proposals are decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SwapRule {
    #[default]
    Metropolis,
    AlwaysAccept,
    AlwaysReject,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PtConfig {
    pub ladder: TemperatureLadder,
    /// Number of coldest replicas that use the quantum kernel.
    pub quantum_replicas: usize,
    pub quantum_kernel: ProposalKernel,
    pub swap_interval: u64,
    pub total_steps: u64,
    pub swap_rule: SwapRule,
}

impl PtConfig {
    /// Four replicas between 10 and 0.1, swaps every `n` steps.
    pub fn standard(n: usize, quantum_replicas: usize, total_steps: u64) -> Result<Self> {
        Ok(Self {
            ladder: TemperatureLadder::geometric(10.0, 0.1, 4)?,
            quantum_replicas,
            quantum_kernel: ProposalKernel::quantum_default(),
            swap_interval: n as u64,
            total_steps,
            swap_rule: SwapRule::Metropolis,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.ladder.len();
        if self.quantum_replicas > m {
            return invalid(format!("{} quantum replicas exceeds ladder size {m}", self.quantum_replicas));
        }
        if self.swap_interval == 0 {
            return invalid("swap interval must be at least 1");
        }
        if self.total_steps == 0 {
            return invalid("total steps must be at least 1");
        }
        if self.quantum_replicas > 0 && !self.quantum_kernel.is_quantum() {
            return invalid("quantum replicas need a quantum kernel");
        }
        Ok(())
    }

    pub fn is_quantum(&self, replica: usize) -> bool {
        replica >= self.ladder.len() - self.quantum_replicas
    }
}

/// Independent random streams for one tempering run.
#[derive(Debug, Clone)]
pub struct PtStreams<R> {
    pub replicas: Vec<R>,
    pub swap: R,
}

impl PtStreams<ChaCha8Rng> {
    /// Replica `i` uses `key/replica/i`; exchanges use `key/swap/0`.
    pub fn derive(key: &StreamKey, m: usize) -> Self {
        Self {
            replicas: (0..m).map(|i| key.child("replica", i as u64).rng()).collect(),
            swap: key.child("swap", 0).rng(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReplicaStats {
    pub temperature: f64,
    pub quantum: bool,
    pub steps: u64,
    pub accepts: u64,
    pub swap_attempts: u64,
    pub swap_accepts: u64,
}

/// Replicas plus the global step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaEnsemble {
    pub replicas: Vec<ChainState>,
    pub stats: Vec<ReplicaStats>,
    pub step: u64,
}

impl ReplicaEnsemble {
    /// Draws each replica's start from its own stream.
    pub fn new<R: Rng>(instance: &SkInstance, config: &PtConfig, streams: &mut PtStreams<R>) -> Result<Self> {
        config.validate()?;
        let m = config.ladder.len();
        if streams.replicas.len() != m {
            return invalid(format!("{} replica streams for {m} replicas", streams.replicas.len()));
        }
        let replicas = streams
            .replicas
            .iter_mut()
            .map(|r| ChainState::random(instance, r))
            .collect();
        let stats = (0..m)
            .map(|i| ReplicaStats {
                temperature: config.ladder.temperatures()[i],
                quantum: config.is_quantum(i),
                ..Default::default()
            })
            .collect();
        Ok(Self {
            replicas,
            stats,
            step: 0,
        })
    }

    /// Exchanges the configurations of replicas `i` and `j`.
    pub fn swap_configurations(&mut self, i: usize, j: usize) {
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        let (left, right) = self.replicas.split_at_mut(hi);
        let (a, b) = (&mut left[lo], &mut right[0]);
        std::mem::swap(&mut a.current, &mut b.current);
        std::mem::swap(&mut a.current_energy, &mut b.current_energy);
        a.note_best();
        b.note_best();
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PtOutcome {
    /// Configuration held by the coldest replica at the end.
    pub coldest: SpinConfiguration,
    pub coldest_energy: f64,
    /// Best configuration seen by any replica.
    pub best: SpinConfiguration,
    pub best_energy: f64,
    pub success: Option<bool>,
    pub success_coldest: Option<bool>,
    /// Proposals made, `M * total_steps`; exchanges are not counted.
    pub proposals: u64,
    pub replicas: Vec<ReplicaStats>,
}

/// Proposers for a tempering run, built once per instance.
#[derive(Debug, Clone)]
pub struct PtRunner<'a> {
    instance: &'a SkInstance,
    config: PtConfig,
    local: Proposer,
    quantum: Option<Proposer>,
}

impl<'a> PtRunner<'a> {
    pub fn new(instance: &'a SkInstance, config: PtConfig) -> Result<Self> {
        config.validate()?;
        let quantum = if config.quantum_replicas > 0 {
            Some(Proposer::new(instance, config.quantum_kernel)?)
        } else {
            None
        };
        Ok(Self {
            instance,
            local: Proposer::new(instance, ProposalKernel::Local)?,
            quantum,
            config,
        })
    }

    pub fn config(&self) -> &PtConfig {
        &self.config
    }

    pub fn run<R: Rng>(&mut self, streams: &mut PtStreams<R>, ground_energy: Option<f64>) -> Result<PtOutcome> {
        let mut ensemble = ReplicaEnsemble::new(self.instance, &self.config, streams)?;
        let m = self.config.ladder.len();
        for _ in 0..self.config.total_steps {
            self.advance(&mut ensemble, streams)?;
        }
        let best_replica = (0..m)
            .min_by(|&a, &b| ensemble.replicas[a].best_energy.total_cmp(&ensemble.replicas[b].best_energy))
            .expect("ladder is non-empty");
        let hit = |e: f64| ground_energy.map(|g| is_ground(e, g));
        let coldest = &ensemble.replicas[m - 1];
        let best = &ensemble.replicas[best_replica];
        Ok(PtOutcome {
            coldest: coldest.current.clone(),
            coldest_energy: coldest.current_energy,
            best: best.best.clone(),
            best_energy: best.best_energy,
            success: hit(best.best_energy),
            success_coldest: hit(coldest.current_energy),
            proposals: ensemble.replicas.iter().map(|r| r.steps_taken).sum(),
            replicas: ensemble.stats,
        })
    }

    /// One global step: an MCMC step on every replica, then exchanges if due.
    pub fn advance<R: Rng>(&mut self, ensemble: &mut ReplicaEnsemble, streams: &mut PtStreams<R>) -> Result<()> {
        let temps = self.config.ladder.temperatures();
        ensemble.step += 1;
        for (i, (state, rng)) in ensemble.replicas.iter_mut().zip(streams.replicas.iter_mut()).enumerate() {
            let proposer = if self.config.is_quantum(i) {
                self.quantum.as_mut().expect("quantum proposer exists when m_q > 0")
            } else {
                &mut self.local
            };
            let accepted = mcmc_step(state, self.instance, proposer, temps[i], rng)?;
            ensemble.stats[i].steps += 1;
            ensemble.stats[i].accepts += accepted as u64;
        }
        let k = self.config.swap_interval;
        if ensemble.step % k == 0 {
            for (i, j) in swap_pairs_for(ensemble.step, k, temps.len())? {
                let p = pt_swap_probability(
                    temps[i],
                    temps[j],
                    ensemble.replicas[i].current_energy,
                    ensemble.replicas[j].current_energy,
                )?;
                let v: f64 = streams.swap.random();
                let accept = match self.config.swap_rule {
                    SwapRule::Metropolis => v < p,
                    SwapRule::AlwaysAccept => true,
                    SwapRule::AlwaysReject => false,
                };
                for r in [i, j] {
                    ensemble.stats[r].swap_attempts += 1;
                    ensemble.stats[r].swap_accepts += accept as u64;
                }
                if accept {
                    ensemble.swap_configurations(i, j);
                }
            }
        }
        Ok(())
    }
}

/// Runs one tempering ensemble for `config.total_steps` global steps.
pub fn run_pt<R: Rng>(
    instance: &SkInstance,
    config: &PtConfig,
    streams: &mut PtStreams<R>,
    ground_energy: Option<f64>,
) -> Result<PtOutcome> {
    PtRunner::new(instance, config.clone())?.run(streams, ground_energy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ising::{energy, generate_sk, ground_state};

    #[test]
    fn swap_probability_closed_forms() {
        assert_eq!(pt_swap_probability(1.0, 1.0, -3.0, 5.0).unwrap(), 1.0);
        assert_eq!(pt_swap_probability(0.5, 2.0, 1.5, 1.5).unwrap(), 1.0);
        assert_eq!(pt_swap_probability(0.5, 2.0, 3.0, -1.0).unwrap(), 1.0);
        let p = pt_swap_probability(0.5, 1.0, -1.0, 0.0).unwrap();
        assert!((p - (-1.0f64).exp()).abs() < 1e-15);
        assert!(pt_swap_probability(0.0, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn pair_alternation() {
        assert_eq!(swap_pairs_for(3, 3, 4).unwrap(), vec![(0, 1), (2, 3)]);
        assert_eq!(swap_pairs_for(6, 3, 4).unwrap(), vec![(1, 2)]);
        assert_eq!(swap_pairs_for(9, 3, 4).unwrap(), vec![(0, 1), (2, 3)]);
        assert_eq!(swap_pairs_for(1, 1, 2).unwrap(), vec![(0, 1)]);
        assert!(swap_pairs_for(2, 1, 2).unwrap().is_empty());
        assert_eq!(swap_pairs_for(2, 2, 5).unwrap(), vec![(0, 1), (2, 3)]);
        assert_eq!(swap_pairs_for(4, 2, 5).unwrap(), vec![(1, 2), (3, 4)]);
        assert!(swap_pairs_for(4, 3, 4).is_err());
        assert!(swap_pairs_for(0, 3, 4).is_err());
        assert!(swap_pairs_for(3, 0, 4).is_err());
    }

    #[test]
    fn ladder_shape() {
        let l = TemperatureLadder::geometric(10.0, 0.1, 4).unwrap();
        let t = l.temperatures();
        assert_eq!(t[0], 10.0);
        assert_eq!(t[3], 0.1);
        assert!(t.windows(2).all(|w| w[1] < w[0]));
        assert!(TemperatureLadder::geometric(10.0, 0.1, 1).is_err());
        assert!(TemperatureLadder::from_temperatures(vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn quantum_replicas_are_the_coldest() {
        let c = PtConfig::standard(5, 2, 10).unwrap();
        let flags: Vec<_> = (0..4).map(|i| c.is_quantum(i)).collect();
        assert_eq!(flags, vec![false, false, true, true]);
        let none = PtConfig::standard(5, 0, 10).unwrap();
        assert!((0..4).all(|i| !none.is_quantum(i)));
        assert!(PtConfig::standard(5, 5, 10).unwrap().validate().is_err());
    }

    #[test]
    fn proposal_accounting_and_energy_cache() {
        let inst = generate_sk(6, 2).unwrap();
        let (_, g) = ground_state(&inst).unwrap();
        for m_q in 0..=4 {
            let cfg = PtConfig::standard(6, m_q, 250).unwrap();
            let mut streams = PtStreams::derive(&StreamKey::root(9).child("pt", m_q as u64), 4);
            let out = run_pt(&inst, &cfg, &mut streams, Some(g)).unwrap();
            assert_eq!(out.proposals, 4 * 250);
            assert!(out.best_energy <= out.coldest_energy);
            assert!((energy(&inst, &out.coldest).unwrap() - out.coldest_energy).abs() < 1e-9);
            assert_eq!(out.replicas.iter().filter(|r| r.quantum).count(), m_q);
        }
    }

    #[test]
    fn swaps_conserve_configurations() {
        let inst = generate_sk(5, 3).unwrap();
        let cfg = PtConfig::standard(5, 1, 1).unwrap();
        let mut streams = PtStreams::derive(&StreamKey::root(1), 4);
        let mut ens = ReplicaEnsemble::new(&inst, &cfg, &mut streams).unwrap();
        let mut before: Vec<_> = ens.replicas.iter().map(|r| (r.current.index(), r.current_energy.to_bits())).collect();
        ens.swap_configurations(1, 2);
        ens.swap_configurations(3, 0);
        let mut after: Vec<_> = ens.replicas.iter().map(|r| (r.current.index(), r.current_energy.to_bits())).collect();
        before.sort();
        after.sort();
        assert_eq!(before, after);
        for r in &ens.replicas {
            assert!(r.best_energy <= r.current_energy);
        }
    }
}
