//! Proposal kernels: local single-spin flip, uniform resample, and quantum.
//!
//! All three are symmetric, `Q(s'|s) = Q(s|s')`, which is what lets the chain use
//! the plain Metropolis acceptance rule.

use crate::error::{invalid, Error, Result};
use crate::ising::{SkInstance, SpinConfiguration};
use crate::statevector::{compute_alpha, EvolutionParams, Evolver, QuantumState};
use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Largest spin count for exact quantum proposal matrices.
pub const MAX_EXACT_QUANTUM_SPINS: usize = 12;

/// Largest spin count for exact proposal matrices of the classical kernels.
pub const MAX_EXACT_SPINS: usize = 14;

/// Default number of midpoint nodes for averaging over gamma.
pub const DEFAULT_GAMMA_NODES: usize = 8;

/// Hyperparameter ranges of the quantum kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuantumHyper {
    pub gamma_range: (f64, f64),
    pub t_range: (u32, u32),
    pub dt: f64,
}

impl Default for QuantumHyper {
    fn default() -> Self {
        Self {
            gamma_range: (0.25, 0.6),
            t_range: (2, 20),
            dt: 0.8,
        }
    }
}

impl QuantumHyper {
    pub fn new(gamma_range: (f64, f64), t_range: (u32, u32), dt: f64) -> Result<Self> {
        let h = Self {
            gamma_range,
            t_range,
            dt,
        };
        h.validate()?;
        Ok(h)
    }

    /// A degenerate range that always uses exactly `(gamma, t)`.
    pub fn pinned(gamma: f64, t: u32, dt: f64) -> Result<Self> {
        Self::new((gamma, gamma), (t, t), dt)
    }

    pub fn validate(&self) -> Result<()> {
        let (g0, g1) = self.gamma_range;
        if !(g0 > 0.0 && g1 < 1.0 && g0 <= g1) {
            return invalid(format!("gamma range [{g0}, {g1}] must satisfy 0 < min <= max < 1"));
        }
        let (t0, t1) = self.t_range;
        if t0 == 0 || t0 > t1 {
            return invalid(format!("t range [{t0}, {t1}] must satisfy 1 <= min <= max"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return invalid(format!("dt {} must be positive", self.dt));
        }
        Ok(())
    }

    /// Draws `(gamma, t)`: `t` uniform over the integers in range, `gamma` uniform
    /// on the real interval.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, u32) {
        let t = rng.random_range(self.t_range.0..=self.t_range.1);
        let (g0, g1) = self.gamma_range;
        let gamma = g0 + (g1 - g0) * rng.random::<f64>();
        (gamma, t)
    }

    /// Midpoint-rule nodes over the gamma range.
    pub fn gamma_nodes(&self, count: usize) -> Vec<f64> {
        let (g0, g1) = self.gamma_range;
        (0..count)
            .map(|k| g0 + (k as f64 + 0.5) * (g1 - g0) / count as f64)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProposalKernel {
    Local,
    Uniform,
    Quantum(QuantumHyper),
}

impl ProposalKernel {
    pub fn quantum_default() -> Self {
        Self::Quantum(QuantumHyper::default())
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Local => "local",
            Self::Uniform => "uniform",
            Self::Quantum(_) => "quantum",
        }
    }

    pub fn is_quantum(&self) -> bool {
        matches!(self, Self::Quantum(_))
    }
}

/// A copy of `s` with one uniformly chosen spin negated.
pub fn propose_local<R: Rng + ?Sized>(s: &SpinConfiguration, rng: &mut R) -> SpinConfiguration {
    s.flipped(rng.random_range(0..s.len()))
}

pub fn propose_uniform<R: Rng + ?Sized>(n: usize, rng: &mut R) -> SpinConfiguration {
    SpinConfiguration::random(n, rng)
}

/// One quantum proposal: draw `(t, gamma)`, evolve `|s>`, measure once.
///
/// Builds a fresh [`Evolver`] per call; use [`Proposer`] when proposing repeatedly
/// on the same instance.
pub fn propose_quantum<R: Rng + ?Sized>(
    s: &SpinConfiguration,
    instance: &SkInstance,
    kernel: &ProposalKernel,
    rng: &mut R,
) -> Result<SpinConfiguration> {
    if !kernel.is_quantum() {
        return invalid(format!("propose_quantum called with the {} kernel", kernel.label()));
    }
    if s.len() != instance.n() {
        return invalid(format!("configuration has {} spins, instance has {}", s.len(), instance.n()));
    }
    let mut proposer = Proposer::new(instance, *kernel)?;
    match proposer.propose(s, rng) {
        Move::Jump(next) => Ok(next),
        Move::Flip(_) => unreachable!("quantum kernel never proposes a single flip"),
    }
}

/// A proposed move, either a single flip or an arbitrary new configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum Move {
    Flip(usize),
    Jump(SpinConfiguration),
}

#[derive(Debug, Clone)]
struct QuantumContext {
    hyper: QuantumHyper,
    alpha: f64,
    evolver: Evolver,
    scratch: QuantumState,
}

/// Kernel bound to an instance, with any precomputation the kernel needs.
#[derive(Debug, Clone)]
pub struct Proposer {
    n: usize,
    kernel: ProposalKernel,
    quantum: Option<Box<QuantumContext>>,
}

impl Proposer {
    pub fn new(instance: &SkInstance, kernel: ProposalKernel) -> Result<Self> {
        let quantum = match kernel {
            ProposalKernel::Quantum(hyper) => {
                hyper.validate()?;
                let evolver = Evolver::new(instance)?;
                let scratch = evolver.blank_state();
                Some(Box::new(QuantumContext {
                    hyper,
                    alpha: compute_alpha(instance)?,
                    evolver,
                    scratch,
                }))
            }
            _ => None,
        };
        Ok(Self {
            n: instance.n(),
            kernel,
            quantum,
        })
    }

    pub fn kernel(&self) -> &ProposalKernel {
        &self.kernel
    }

    pub fn propose<R: Rng + ?Sized>(&mut self, s: &SpinConfiguration, rng: &mut R) -> Move {
        match &mut self.quantum {
            None => match self.kernel {
                ProposalKernel::Local => Move::Flip(rng.random_range(0..self.n)),
                _ => Move::Jump(propose_uniform(self.n, rng)),
            },
            Some(ctx) => {
                let (gamma, t) = ctx.hyper.draw(rng);
                let params = EvolutionParams {
                    gamma,
                    steps: t,
                    dt: ctx.hyper.dt,
                    alpha: ctx.alpha,
                };
                let index = ctx.evolver.propose_index(&mut ctx.scratch, s.index(), &params, rng);
                Move::Jump(SpinConfiguration::from_index(self.n, index).expect("index within range"))
            }
        }
    }
}

/// The exact `2^n x 2^n` proposal matrix, row `s` holding `Q(. | s)`.
///
/// The quantum kernel averages outcome distributions over every integer `t` in
/// range and over `gamma_nodes` midpoint nodes for gamma.
pub fn exact_proposal_matrix(instance: &SkInstance, kernel: &ProposalKernel, gamma_nodes: usize) -> Result<DMatrix<f64>> {
    let n = instance.n();
    if gamma_nodes == 0 {
        return invalid("gamma_nodes must be at least 1");
    }
    let cap = if kernel.is_quantum() {
        MAX_EXACT_QUANTUM_SPINS
    } else {
        MAX_EXACT_SPINS
    };
    if n > cap {
        return Err(Error::Unsupported(format!(
            "exact {} proposal matrix needs n <= {cap}, got {n}",
            kernel.label()
        )));
    }
    let size = 1usize << n;
    match kernel {
        ProposalKernel::Local => {
            let mut q = DMatrix::zeros(size, size);
            for s in 0..size {
                for j in 0..n {
                    q[(s, s ^ (1 << j))] = 1.0 / n as f64;
                }
            }
            Ok(q)
        }
        ProposalKernel::Uniform => Ok(DMatrix::from_element(size, size, 1.0 / size as f64)),
        ProposalKernel::Quantum(hyper) => {
            hyper.validate()?;
            let alpha = compute_alpha(instance)?;
            let mut evolver = Evolver::new(instance)?;
            let (t_min, t_max) = hyper.t_range;
            let weight = 1.0 / ((t_max - t_min + 1) as f64 * gamma_nodes as f64);
            let mut rows = vec![0.0; size * size];
            let mut state = evolver.blank_state();
            for gamma in hyper.gamma_nodes(gamma_nodes) {
                let params = EvolutionParams {
                    gamma,
                    steps: 1,
                    dt: hyper.dt,
                    alpha,
                };
                evolver.prepare(&params);
                for (s, row) in rows.chunks_exact_mut(size).enumerate() {
                    state.reset_to_basis(s);
                    for step in 1..=t_max {
                        evolver.step(&mut state, &params);
                        if step >= t_min {
                            for (acc, a) in row.iter_mut().zip(state.amplitudes()) {
                                *acc += weight * a.norm_sqr();
                            }
                        }
                    }
                }
            }
            Ok(DMatrix::from_row_slice(size, size, &rows))
        }
    }
}
