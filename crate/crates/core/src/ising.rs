//! Sherrington-Kirkpatrick instances, spin configurations and exact ground states.
//!
//! The objective is
//!
//! ```text
//! f(s) = - sum_i linear[i] s_i - sum_{i<j} quadratic[i][j] s_i s_j
//! ```
//!
//! `linear` holds the per-spin fields and `quadratic` the pairwise couplings. The
//! same names are used for the problem part of the quantum proposal Hamiltonian.
//!
//! Configurations are indexed little-endian: bit `j` of the index is 0 when spin
//! `j` is `+1`, so index 0 is the all-up configuration. This matches `Z|0> = +|0>`
//! and lets the statevector module use `energy(decode(z))` as its diagonal.

use crate::error::{invalid, Error, Result};
use crate::rng::{NormalSampler, INSTANCE_GENERATOR};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Largest spin count accepted by [`generate_sk`].
pub const MAX_SPINS: usize = 30;

/// Largest spin count for exhaustive ground-state enumeration.
pub const MAX_ENUMERATION_SPINS: usize = 24;

/// A configuration of `n` Ising spins, each `+1` or `-1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpinConfiguration {
    spins: Vec<i8>,
    index: usize,
}

impl SpinConfiguration {
    pub fn from_spins(spins: Vec<i8>) -> Result<Self> {
        if spins.len() > MAX_SPINS {
            return invalid(format!("{} spins exceeds the cap of {MAX_SPINS}", spins.len()));
        }
        let mut index = 0usize;
        for (j, &s) in spins.iter().enumerate() {
            match s {
                1 => {}
                -1 => index |= 1 << j,
                other => return invalid(format!("spin {j} has value {other}, expected +1 or -1")),
            }
        }
        Ok(Self { spins, index })
    }

    /// Decodes a canonical index into `n` spins.
    pub fn from_index(n: usize, index: usize) -> Result<Self> {
        if n > MAX_SPINS {
            return invalid(format!("{n} spins exceeds the cap of {MAX_SPINS}"));
        }
        if index >> n != 0 {
            return invalid(format!("index {index} out of range for {n} spins"));
        }
        let spins = (0..n)
            .map(|j| if index >> j & 1 == 0 { 1 } else { -1 })
            .collect();
        Ok(Self { spins, index })
    }

    pub fn all_up(n: usize) -> Self {
        Self {
            spins: vec![1; n],
            index: 0,
        }
    }

    /// A uniformly random configuration.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let spins = (0..n)
            .map(|_| if rng.random::<bool>() { 1 } else { -1 })
            .collect();
        Self::from_spins(spins).expect("random spins are valid")
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    pub fn spin(&self, j: usize) -> i8 {
        self.spins[j]
    }

    pub fn index(&self) -> usize {
        self.index
    }

    /// Negates spin `j` in place.
    pub fn flip(&mut self, j: usize) {
        self.spins[j] = -self.spins[j];
        self.index ^= 1 << j;
    }

    pub fn flipped(&self, j: usize) -> Self {
        let mut out = self.clone();
        out.flip(j);
        out
    }

    pub fn hamming_distance(&self, other: &Self) -> u32 {
        (self.index ^ other.index).count_ones()
    }
}

/// A fully connected second-order spin glass.
#[derive(Debug, Clone, PartialEq)]
pub struct SkInstance {
    n: usize,
    seed: u64,
    linear: Vec<f64>,
    /// Dense symmetric `n x n` coupling matrix with a zero diagonal.
    couplings: Vec<f64>,
}

impl SkInstance {
    /// Builds an instance from explicit coefficients.
    ///
    /// `pairs` lists `(i, j, value)` with `i < j`; every unlisted pair is zero.
    pub fn from_coefficients(linear: Vec<f64>, pairs: &[(usize, usize, f64)], seed: u64) -> Result<Self> {
        let n = linear.len();
        if n == 0 || n > MAX_SPINS {
            return invalid(format!("spin count {n} outside 1..={MAX_SPINS}"));
        }
        if linear.iter().any(|v| !v.is_finite()) {
            return invalid("non-finite linear coefficient");
        }
        let mut couplings = vec![0.0; n * n];
        for &(i, j, v) in pairs {
            if i >= j || j >= n {
                return invalid(format!("coupling ({i}, {j}) is not strictly upper triangular for n = {n}"));
            }
            if !v.is_finite() {
                return invalid(format!("non-finite coupling ({i}, {j})"));
            }
            couplings[i * n + j] = v;
            couplings[j * n + i] = v;
        }
        Ok(Self {
            n,
            seed,
            linear,
            couplings,
        })
    }

    /// An instance with every coefficient zero.
    pub fn zero(n: usize) -> Result<Self> {
        Self::from_coefficients(vec![0.0; n], &[], 0)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn linear(&self) -> &[f64] {
        &self.linear
    }

    /// Coupling between spins `i` and `j` for `i != j` (symmetric access).
    pub fn quadratic(&self, i: usize, j: usize) -> f64 {
        self.couplings[i * self.n + j]
    }

    /// The strictly upper-triangular couplings in row-major order.
    pub fn quadratic_entries(&self) -> Vec<(usize, usize, f64)> {
        let n = self.n;
        let mut out = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                out.push((i, j, self.couplings[i * n + j]));
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.linear.iter().all(|&v| v == 0.0) && self.couplings.iter().all(|&v| v == 0.0)
    }

    fn check_dimension(&self, s: &SpinConfiguration) -> Result<()> {
        if s.len() != self.n {
            return invalid(format!("configuration has {} spins, instance has {}", s.len(), self.n));
        }
        Ok(())
    }

    /// Field felt by spin `j`: `linear[j] + sum_{i != j} quadratic[j][i] s_i`.
    fn local_field(&self, s: &[i8], j: usize) -> f64 {
        let row = &self.couplings[j * self.n..(j + 1) * self.n];
        let coupled: f64 = row.iter().zip(s).map(|(&c, &si)| c * si as f64).sum();
        self.linear[j] + coupled
    }

    /// Energies of all `2^n` configurations indexed canonically.
    ///
    /// Walks the configurations in Gray-code order with O(n) updates, then
    /// re-evaluates exactly every 1024 steps to bound drift.
    pub fn energy_table(&self) -> Result<Vec<f64>> {
        if self.n > MAX_ENUMERATION_SPINS {
            return Err(Error::Unsupported(format!(
                "energy table needs n <= {MAX_ENUMERATION_SPINS}, got {}",
                self.n
            )));
        }
        let size = 1usize << self.n;
        let mut table = vec![0.0; size];
        let mut s = SpinConfiguration::all_up(self.n);
        let mut e = self.energy_unchecked(&s);
        table[0] = e;
        for k in 1..size {
            let j = k.trailing_zeros() as usize;
            e += self.delta_unchecked(&s, j);
            s.flip(j);
            if k % 1024 == 0 {
                e = self.energy_unchecked(&s);
            }
            table[s.index()] = e;
        }
        Ok(table)
    }

    fn energy_unchecked(&self, s: &SpinConfiguration) -> f64 {
        let n = self.n;
        let sp = s.spins();
        let mut total = 0.0;
        for i in 0..n {
            let si = sp[i] as f64;
            total -= self.linear[i] * si;
            let row = &self.couplings[i * n..(i + 1) * n];
            for j in i + 1..n {
                total -= row[j] * si * sp[j] as f64;
            }
        }
        total
    }

    fn delta_unchecked(&self, s: &SpinConfiguration, flip: usize) -> f64 {
        2.0 * s.spin(flip) as f64 * self.local_field(s.spins(), flip)
    }
}

/// Draws an instance with every coefficient i.i.d. standard normal.
///
/// Coefficients come from [`NormalSampler`] seeded with `seed`: first the `n`
/// linear terms, then the couplings `(0,1), (0,2), ..., (n-2,n-1)` in row-major
/// upper-triangular order.
pub fn generate_sk(n: usize, seed: u64) -> Result<SkInstance> {
    if n == 0 || n > MAX_SPINS {
        return invalid(format!("spin count {n} outside 1..={MAX_SPINS}"));
    }
    let mut normal = NormalSampler::new(seed);
    let linear: Vec<f64> = (0..n).map(|_| normal.sample()).collect();
    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            pairs.push((i, j, normal.sample()));
        }
    }
    SkInstance::from_coefficients(linear, &pairs, seed)
}

pub fn energy(instance: &SkInstance, s: &SpinConfiguration) -> Result<f64> {
    instance.check_dimension(s)?;
    Ok(instance.energy_unchecked(s))
}

/// `energy(s with spin flip negated) - energy(s)` in O(n).
pub fn energy_delta(instance: &SkInstance, s: &SpinConfiguration, flip: usize) -> Result<f64> {
    instance.check_dimension(s)?;
    if flip >= instance.n {
        return invalid(format!("spin index {flip} out of range for n = {}", instance.n));
    }
    Ok(instance.delta_unchecked(s, flip))
}

/// Exhaustive minimum of the objective; ties go to the smallest index.
pub fn ground_state(instance: &SkInstance) -> Result<(SpinConfiguration, f64)> {
    let table = instance.energy_table()?;
    let min = table.iter().copied().fold(f64::INFINITY, f64::min);
    let scale = 1.0 + min.abs();
    // Gray-code accumulation is not bit-exact, so near-ties are re-scored exactly.
    let mut best: Option<(SpinConfiguration, f64)> = None;
    for (idx, &e) in table.iter().enumerate() {
        if e <= min + 1e-9 * scale {
            let s = SpinConfiguration::from_index(instance.n, idx)?;
            let exact = instance.energy_unchecked(&s);
            match &best {
                Some((_, b)) if exact >= *b - 1e-12 * scale => {}
                _ => best = Some((s, exact)),
            }
        }
    }
    Ok(best.expect("at least one configuration exists"))
}

/// On-disk form of an instance: a JSON document with shortest round-trip floats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub format: String,
    pub generator: String,
    pub n: usize,
    pub seed: u64,
    pub linear: Vec<f64>,
    pub quadratic: Vec<(usize, usize, f64)>,
}

pub const INSTANCE_FORMAT: &str = "qeopt-sk-instance/1";

impl InstanceFile {
    pub fn from_instance(instance: &SkInstance) -> Self {
        Self {
            format: INSTANCE_FORMAT.to_string(),
            generator: INSTANCE_GENERATOR.to_string(),
            n: instance.n,
            seed: instance.seed,
            linear: instance.linear.clone(),
            quadratic: instance.quadratic_entries(),
        }
    }

    pub fn into_instance(self) -> Result<SkInstance> {
        if self.format != INSTANCE_FORMAT {
            return invalid(format!("unknown instance format {:?}", self.format));
        }
        if self.linear.len() != self.n {
            return invalid(format!("n = {} but {} linear terms", self.n, self.linear.len()));
        }
        SkInstance::from_coefficients(self.linear, &self.quadratic, self.seed)
    }
}

impl SkInstance {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&InstanceFile::from_instance(self)).expect("instance serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: InstanceFile =
            serde_json::from_str(text).map_err(|e| Error::InvalidArgument(format!("instance file: {e}")))?;
        file.into_instance()
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_json())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}
