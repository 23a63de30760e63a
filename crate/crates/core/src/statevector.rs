//! Dense statevector simulation of the quantum proposal circuit.
//!
//! The proposal unitary is a first-order Trotterization of real-time evolution under
//!
//! ```text
//! H = gamma * sum_j X_j + (1 - gamma) * alpha * f(Z)
//! ```
//!
//! where `f` is the spin-glass objective evaluated on the computational basis. One
//! Trotter step applies the diagonal problem phase and then the transverse mixer;
//! `steps` repetitions are applied to the prepared basis state. With this ordering
//! the step unitary `W = M P` satisfies `W^T = P W P^-1` (the mixer is complex
//! symmetric, the phase diagonal), so `|<a|W^t|b>| = |<b|W^t|a>|` holds exactly.

use crate::error::{invalid, Error, Result};
use crate::ising::{SkInstance, SpinConfiguration};
use num_complex::Complex64;
use rand::Rng;

/// Largest qubit count simulated densely.
pub const MAX_QUBITS: usize = 14;

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    n: usize,
    amplitudes: Vec<Complex64>,
}

impl QuantumState {
    pub fn from_amplitudes(n: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        if n > MAX_QUBITS {
            return Err(Error::Unsupported(format!("{n} qubits exceeds the dense cap of {MAX_QUBITS}")));
        }
        if amplitudes.len() != 1 << n {
            return invalid(format!("{} amplitudes for {n} qubits", amplitudes.len()));
        }
        Ok(Self { n, amplitudes })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub(crate) fn reset_to_basis(&mut self, index: usize) {
        self.amplitudes.fill(Complex64::new(0.0, 0.0));
        self.amplitudes[index] = Complex64::new(1.0, 0.0);
    }
}

/// Hyperparameters of one proposal evolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolutionParams {
    pub gamma: f64,
    pub steps: u32,
    pub dt: f64,
    pub alpha: f64,
}

impl EvolutionParams {
    /// Validated constructor: `0 < gamma < 1`, `steps >= 1`, `dt > 0`, `alpha > 0`.
    pub fn new(gamma: f64, steps: u32, dt: f64, alpha: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return invalid(format!("gamma {gamma} outside (0, 1)"));
        }
        Self::with_closed_gamma(gamma, steps, dt, alpha)
    }

    /// Like [`EvolutionParams::new`] but admits the endpoints `gamma = 0` and
    /// `gamma = 1`, which reduce the evolution to a pure phase or a pure mixer.
    pub fn with_closed_gamma(gamma: f64, steps: u32, dt: f64, alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return invalid(format!("gamma {gamma} outside [0, 1]"));
        }
        if steps == 0 {
            return invalid("steps must be at least 1");
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return invalid(format!("dt {dt} must be positive"));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return invalid(format!("alpha {alpha} must be positive"));
        }
        Ok(Self {
            gamma,
            steps,
            dt,
            alpha,
        })
    }
}

/// Normalisation of the problem term: `sqrt(n) / sqrt(sum quadratic^2 + sum linear^2)`.
pub fn compute_alpha(instance: &SkInstance) -> Result<f64> {
    let linear: f64 = instance.linear().iter().map(|v| v * v).sum();
    let quadratic: f64 = instance.quadratic_entries().iter().map(|&(_, _, v)| v * v).sum();
    let norm = (linear + quadratic).sqrt();
    if norm == 0.0 {
        return invalid("alpha is undefined for an all-zero instance");
    }
    Ok((instance.n() as f64).sqrt() / norm)
}

pub fn basis_state(s: &SpinConfiguration) -> QuantumState {
    let n = s.len();
    assert!(n <= MAX_QUBITS, "{n} qubits exceeds the dense cap of {MAX_QUBITS}");
    let mut state = QuantumState {
        n,
        amplitudes: vec![Complex64::new(0.0, 0.0); 1 << n],
    };
    state.reset_to_basis(s.index());
    state
}

/// Multiplies amplitude `z` by `exp(-i dt (1 - gamma) alpha f(z))`.
pub fn apply_problem_phase(state: &mut QuantumState, instance: &SkInstance, params: &EvolutionParams) -> Result<()> {
    if state.n != instance.n() {
        return invalid(format!("state has {} qubits, instance has {} spins", state.n, instance.n()));
    }
    let energies = instance.energy_table()?;
    let phases = phase_factors(&energies, params);
    apply_diagonal(state, &phases);
    Ok(())
}

/// Applies `exp(-i dt gamma X_j)` to every qubit.
pub fn apply_mixer_layer(state: &mut QuantumState, params: &EvolutionParams) {
    let theta = params.gamma * params.dt;
    apply_mixer(&mut state.amplitudes, state.n, theta.cos(), theta.sin());
}

/// Evolves `|s>` through `params.steps` Trotter steps (phase, then mixer).
pub fn trotter_evolve(s: &SpinConfiguration, instance: &SkInstance, params: &EvolutionParams) -> Result<QuantumState> {
    if s.len() != instance.n() {
        return invalid(format!("configuration has {} spins, instance has {}", s.len(), instance.n()));
    }
    if instance.n() > MAX_QUBITS {
        return Err(Error::Unsupported(format!("{} qubits exceeds the dense cap of {MAX_QUBITS}", instance.n())));
    }
    let mut evolver = Evolver::new(instance)?;
    let mut state = basis_state(s);
    evolver.evolve_in_place(&mut state, params);
    Ok(state)
}

pub fn outcome_distribution(state: &QuantumState) -> Vec<f64> {
    state.amplitudes.iter().map(|a| a.norm_sqr()).collect()
}

/// Draws one computational-basis outcome by inverse CDF on a single uniform.
pub fn sample_measurement<R: Rng + ?Sized>(state: &QuantumState, rng: &mut R) -> SpinConfiguration {
    let index = sample_index(&state.amplitudes, rng.random::<f64>());
    SpinConfiguration::from_index(state.n, index).expect("index within range")
}

fn sample_index(amplitudes: &[Complex64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last_nonzero = 0;
    for (z, a) in amplitudes.iter().enumerate() {
        let p = a.norm_sqr();
        if p > 0.0 {
            last_nonzero = z;
            acc += p;
            if u < acc {
                return z;
            }
        }
    }
    // Rounding left the cumulative sum just below u.
    last_nonzero
}

pub(crate) fn phase_factors(energies: &[f64], params: &EvolutionParams) -> Vec<Complex64> {
    let scale = -params.dt * (1.0 - params.gamma) * params.alpha;
    energies.iter().map(|&e| Complex64::from_polar(1.0, scale * e)).collect()
}

fn apply_diagonal(state: &mut QuantumState, phases: &[Complex64]) {
    for (a, p) in state.amplitudes.iter_mut().zip(phases) {
        *a *= p;
    }
}

fn apply_mixer(amps: &mut [Complex64], n: usize, c: f64, s: f64) {
    for j in 0..n {
        let stride = 1usize << j;
        for block in amps.chunks_exact_mut(stride << 1) {
            let (lo, hi) = block.split_at_mut(stride);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                // [c, -i s; -i s, c]
                *a = Complex64::new(c * x.re + s * y.im, c * x.im - s * y.re);
                *b = Complex64::new(c * y.re + s * x.im, c * y.im - s * x.re);
            }
        }
    }
}

/// Reusable evolution context for one instance: caches the energy table and scratch
/// space so repeated proposals avoid reallocating.
#[derive(Debug, Clone)]
pub struct Evolver {
    n: usize,
    energies: Vec<f64>,
    phases: Vec<Complex64>,
}

impl Evolver {
    pub fn new(instance: &SkInstance) -> Result<Self> {
        if instance.n() > MAX_QUBITS {
            return Err(Error::Unsupported(format!(
                "{} qubits exceeds the dense cap of {MAX_QUBITS}",
                instance.n()
            )));
        }
        let energies = instance.energy_table()?;
        Ok(Self {
            n: instance.n(),
            phases: vec![Complex64::new(1.0, 0.0); energies.len()],
            energies,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Recomputes the cached phase factors for `params`.
    pub fn prepare(&mut self, params: &EvolutionParams) {
        let scale = -params.dt * (1.0 - params.gamma) * params.alpha;
        for (p, &e) in self.phases.iter_mut().zip(&self.energies) {
            *p = Complex64::from_polar(1.0, scale * e);
        }
    }

    /// One Trotter step with the phases from the last [`Evolver::prepare`].
    pub fn step(&self, state: &mut QuantumState, params: &EvolutionParams) {
        debug_assert_eq!(state.n, self.n);
        apply_diagonal(state, &self.phases);
        apply_mixer_layer(state, params);
    }

    pub fn evolve_in_place(&mut self, state: &mut QuantumState, params: &EvolutionParams) {
        self.prepare(params);
        for _ in 0..params.steps {
            self.step(state, params);
        }
    }

    /// Prepares `|index>`, evolves it, and samples one outcome index.
    pub fn propose_index<R: Rng + ?Sized>(
        &mut self,
        state: &mut QuantumState,
        index: usize,
        params: &EvolutionParams,
        rng: &mut R,
    ) -> usize {
        state.reset_to_basis(index);
        self.evolve_in_place(state, params);
        sample_index(&state.amplitudes, rng.random::<f64>())
    }

    pub fn blank_state(&self) -> QuantumState {
        QuantumState {
            n: self.n,
            amplitudes: vec![Complex64::new(0.0, 0.0); 1 << self.n],
        }
    }
}
