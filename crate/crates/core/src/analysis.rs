//! Exact small-system diagnostics and the effort metrics used to compare methods.
//!
//! Transition matrices are dense `2^n x 2^n`, so everything here is limited to
//! roughly a dozen spins.

use crate::error::{invalid, Error, Result};
use crate::ising::SkInstance;
use crate::proposal::{exact_proposal_matrix, ProposalKernel};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

/// Target probability of finding the ground state across repeats.
pub const TARGET_P: f64 = 0.99;

/// Default accuracy for thermalization bounds.
pub const DEFAULT_EPSILON: f64 = 0.01;

/// Largest spin count for Boltzmann vectors.
pub const MAX_BOLTZMANN_SPINS: usize = 20;

/// Largest spin count for dense spectral analysis.
pub const MAX_SPECTRAL_SPINS: usize = 12;

/// Largest spin count for minimum-gap scans over a schedule.
pub const MAX_DELTA_MIN_SPINS: usize = 10;

const STOCHASTIC_TOLERANCE: f64 = 1e-9;

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// `mu(s) = exp(-f(s)/T) / Z`, computed with the minimum energy shifted out.
pub fn boltzmann(instance: &SkInstance, temperature: f64) -> Result<Vec<f64>> {
    if !(temperature > 0.0) {
        return invalid(format!("temperature {temperature} must be positive"));
    }
    if instance.n() > MAX_BOLTZMANN_SPINS {
        return Err(Error::Unsupported(format!(
            "Boltzmann vector needs n <= {MAX_BOLTZMANN_SPINS}, got {}",
            instance.n()
        )));
    }
    Ok(boltzmann_from_energies(&instance.energy_table()?, temperature))
}

fn boltzmann_from_energies(energies: &[f64], temperature: f64) -> Vec<f64> {
    let min = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let mut w: Vec<f64> = energies.iter().map(|&e| (-(e - min) / temperature).exp()).collect();
    let z: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= z);
    w
}

/// A Metropolis-Hastings transition matrix at one temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    pub entries: DMatrix<f64>,
    pub temperature: f64,
    pub kernel: String,
    energies: Vec<f64>,
}

impl TransitionMatrix {
    /// Wraps an arbitrary matrix for spectral checks; `energies` defines the
    /// reference measure used for symmetrization.
    pub fn from_parts(entries: DMatrix<f64>, temperature: f64, kernel: impl Into<String>, energies: Vec<f64>) -> Result<Self> {
        if !entries.is_square() || entries.nrows() != energies.len() {
            return invalid("matrix must be square and match the energy vector");
        }
        if !(temperature > 0.0) {
            return invalid(format!("temperature {temperature} must be positive"));
        }
        Ok(Self {
            entries,
            temperature,
            kernel: kernel.into(),
            energies,
        })
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// The stationary distribution `mu` at this matrix's temperature.
    pub fn stationary(&self) -> Vec<f64> {
        boltzmann_from_energies(&self.energies, self.temperature)
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }
}

/// `P(s'|s) = Q(s'|s) min(1, exp(-(f(s') - f(s))/T))` off the diagonal; the
/// diagonal takes the rejected mass.
pub fn transition_matrix(
    instance: &SkInstance,
    proposal: &DMatrix<f64>,
    temperature: f64,
    kernel: impl Into<String>,
) -> Result<TransitionMatrix> {
    if !(temperature > 0.0) {
        return invalid(format!("temperature {temperature} must be positive"));
    }
    let size = 1usize << instance.n();
    if proposal.nrows() != size || proposal.ncols() != size {
        return invalid(format!("proposal matrix is {}x{}, expected {size}x{size}", proposal.nrows(), proposal.ncols()));
    }
    check_stochastic(proposal)?;
    for r in 0..size {
        for c in r + 1..size {
            if (proposal[(r, c)] - proposal[(c, r)]).abs() > 1e-9 {
                return invalid(format!(
                    "proposal matrix is not symmetric at ({r}, {c}); the Metropolis rule would be wrong"
                ));
            }
        }
    }
    let energies = instance.energy_table()?;
    let mut p = DMatrix::zeros(size, size);
    for r in 0..size {
        let mut moved = 0.0;
        for c in 0..size {
            if c == r {
                continue;
            }
            let a = mh_factor(energies[c] - energies[r], temperature);
            let v = proposal[(r, c)] * a;
            p[(r, c)] = v;
            moved += v;
        }
        p[(r, r)] = 1.0 - moved;
    }
    TransitionMatrix::from_parts(p, temperature, kernel, energies)
}

fn mh_factor(delta: f64, temperature: f64) -> f64 {
    if delta <= 0.0 {
        1.0
    } else {
        (-delta / temperature).exp()
    }
}

fn check_stochastic(m: &DMatrix<f64>) -> Result<()> {
    for (r, row) in m.row_iter().enumerate() {
        if row.iter().any(|&v| v < -STOCHASTIC_TOLERANCE || !v.is_finite()) {
            return invalid(format!("row {r} has a negative or non-finite entry"));
        }
        let sum = row.sum();
        if (sum - 1.0).abs() > STOCHASTIC_TOLERANCE {
            return invalid(format!("row {r} sums to {sum}"));
        }
    }
    Ok(())
}

/// Real spectrum of `P` via the similar symmetric matrix `D^{1/2} P D^{-1/2}`,
/// `D = diag(mu)`, sorted in decreasing order.
///
/// Entries are formed in log space, `exp(ln P_ij + (ln mu_i - ln mu_j) / 2)`, so
/// low temperatures do not overflow.
pub fn spectrum(p: &TransitionMatrix) -> Result<Vec<f64>> {
    let size = p.dim();
    if size > 1 << MAX_SPECTRAL_SPINS {
        return Err(Error::Unsupported(format!("spectral analysis needs at most 2^{MAX_SPECTRAL_SPINS} states")));
    }
    check_stochastic(&p.entries)?;
    let log_mu: Vec<f64> = p.energies.iter().map(|&e| -e / p.temperature).collect();
    let mut s = DMatrix::zeros(size, size);
    for r in 0..size {
        for c in 0..size {
            let v = p.entries[(r, c)];
            if v > 0.0 {
                s[(r, c)] = (v.ln() + 0.5 * (log_mu[r] - log_mu[c])).exp();
            }
        }
    }
    let sym = (&s + s.transpose()) * 0.5;
    let mut eig: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    Ok(eig)
}

/// `1 - max |lambda|` over all eigenvalues except the single eigenvalue 1.
pub fn spectral_gap(p: &TransitionMatrix) -> Result<f64> {
    let eig = spectrum(p)?;
    Ok(gap_from_spectrum(&eig))
}

fn gap_from_spectrum(eig: &[f64]) -> f64 {
    let unit = eig
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - 1.0).abs().total_cmp(&(b.1 - 1.0).abs()))
        .map(|(i, _)| i)
        .expect("non-empty spectrum");
    let slem = eig
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != unit)
        .map(|(_, v)| v.abs())
        .fold(0.0, f64::max);
    (1.0 - slem).clamp(0.0, 1.0)
}

/// Bounds on the mixing time for accuracy `epsilon`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThermalizationBounds {
    Bounded { lower: f64, upper: f64 },
    /// A zero gap: the chain need not converge.
    Unbounded,
}

/// `(1/delta - 1) ln(1/(2 eps)) <= tau <= (1/delta) ln(1/(eps min_s mu(s)))`.
pub fn thermalization_bounds(delta: f64, mu: &[f64], epsilon: f64) -> Result<ThermalizationBounds> {
    if !(0.0..=1.0).contains(&delta) {
        return invalid(format!("spectral gap {delta} outside [0, 1]"));
    }
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return invalid(format!("epsilon {epsilon} outside (0, 1/2)"));
    }
    check_distribution(mu)?;
    if delta == 0.0 {
        return Ok(ThermalizationBounds::Unbounded);
    }
    let mu_min = mu.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(ThermalizationBounds::Bounded {
        lower: (1.0 / delta - 1.0) * (1.0 / (2.0 * epsilon)).ln(),
        upper: (1.0 / delta) * (1.0 / (epsilon * mu_min)).ln(),
    })
}

fn check_distribution(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return invalid("empty distribution");
    }
    if p.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return invalid("distribution has a negative or non-finite entry");
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return invalid(format!("distribution sums to {sum}"));
    }
    Ok(())
}

/// Smallest spectral gap across a set of temperatures.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaMin {
    pub delta: f64,
    pub temperature: f64,
    pub per_temperature: Vec<(f64, f64)>,
}

/// Minimum spectral gap over the given schedule temperatures.
///
/// The proposal matrix is built once and reused at every temperature.
pub fn delta_min(instance: &SkInstance, kernel: &ProposalKernel, temperatures: &[f64], gamma_nodes: usize) -> Result<DeltaMin> {
    if instance.n() > MAX_DELTA_MIN_SPINS {
        return Err(Error::Unsupported(format!(
            "minimum-gap scans need n <= {MAX_DELTA_MIN_SPINS}, got {}",
            instance.n()
        )));
    }
    if temperatures.is_empty() {
        return invalid("no temperatures given");
    }
    let q = exact_proposal_matrix(instance, kernel, gamma_nodes)?;
    let mut per_temperature = Vec::with_capacity(temperatures.len());
    for &t in temperatures {
        let p = transition_matrix(instance, &q, t, kernel.label())?;
        per_temperature.push((t, spectral_gap(&p)?));
    }
    let &(temperature, delta) = per_temperature
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty");
    Ok(DeltaMin {
        delta,
        temperature,
        per_temperature,
    })
}

/// Sample success rate with a 95% Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessEstimate {
    pub successes: u64,
    pub trials: u64,
    pub p_s: f64,
    pub lower: f64,
    pub upper: f64,
    pub half_width: f64,
}

impl SuccessEstimate {
    pub fn from_counts(successes: u64, trials: u64) -> Result<Self> {
        if trials == 0 {
            return invalid("no outcomes");
        }
        if successes > trials {
            return invalid(format!("{successes} successes out of {trials} trials"));
        }
        let n = trials as f64;
        let p = successes as f64 / n;
        let z2 = Z95 * Z95;
        let denom = 1.0 + z2 / n;
        let centre = (p + z2 / (2.0 * n)) / denom;
        let half_width = Z95 / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
        Ok(Self {
            successes,
            trials,
            p_s: p,
            lower: if successes == 0 { 0.0 } else { (centre - half_width).max(0.0) },
            upper: if successes == trials { 1.0 } else { (centre + half_width).min(1.0) },
            half_width,
        })
    }
}

pub fn success_probability(outcomes: &[bool]) -> Result<SuccessEstimate> {
    let hits = outcomes.iter().filter(|&&b| b).count() as u64;
    SuccessEstimate::from_counts(hits, outcomes.len() as u64)
}

/// `R = ln(1 - p) / ln(1 - p_s)`, floored at one; infinite when `p_s = 0`.
pub fn repeats_needed(p_s: f64, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return invalid(format!("target probability {p} outside (0, 1)"));
    }
    if !(0.0..=1.0).contains(&p_s) {
        return invalid(format!("success probability {p_s} outside [0, 1]"));
    }
    if p_s == 0.0 {
        return Ok(f64::INFINITY);
    }
    if p_s == 1.0 {
        return Ok(1.0);
    }
    Ok(((-p).ln_1p() / (-p_s).ln_1p()).max(1.0))
}

/// Total proposals `M * ell * R`.
pub fn effort(ell: f64, repeats: f64, replicas: f64) -> f64 {
    replicas * ell * repeats
}

/// One point of an effort curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffortRecord {
    pub n: usize,
    pub method: String,
    pub ell: u64,
    pub replicas: u64,
    pub p_s: f64,
    pub half_width: f64,
    pub repeats: f64,
    pub effort: f64,
}

impl EffortRecord {
    pub fn new(n: usize, method: impl Into<String>, ell: u64, replicas: u64, estimate: &SuccessEstimate, p: f64) -> Result<Self> {
        let repeats = repeats_needed(estimate.p_s, p)?;
        Ok(Self {
            n,
            method: method.into(),
            ell,
            replicas,
            p_s: estimate.p_s,
            half_width: estimate.half_width,
            repeats,
            effort: effort(ell as f64, repeats, replicas as f64),
        })
    }

    pub fn is_finite(&self) -> bool {
        self.effort.is_finite()
    }
}

/// Fitted optimum of an effort sweep.
///
/// The fit is `effort ~ a + b x + c x^2` with `x = ln(ell)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalLength {
    pub ell_star: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Fitted effort at `ell_star`.
    pub effort_star: f64,
    /// Points used in the fit, sorted by `ell`.
    pub subset: Vec<(f64, f64)>,
}

impl OptimalLength {
    pub fn fitted(&self, ell: f64) -> f64 {
        let x = ell.ln();
        self.a + self.b * x + self.c * x * x
    }
}

const MIN_FIT_POINTS: usize = 5;

/// Fits a quadratic in `ln(ell)` through the low-effort part of a sweep.
///
/// The subset is every finite point with effort at most twice the minimum,
/// widened to the five lowest-effort points when that leaves fewer than five.
/// The vertex is clamped to the sweep's `ell` range; a non-convex fit returns
/// the subset endpoint with the lower fitted effort.
pub fn optimal_length(sweep: &[(f64, f64)]) -> Result<OptimalLength> {
    let mut finite: Vec<(f64, f64)> = sweep
        .iter()
        .copied()
        .filter(|&(l, e)| l > 0.0 && l.is_finite() && e.is_finite())
        .collect();
    if finite.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} finite effort points, need at least 3",
            finite.len()
        )));
    }
    finite.sort_by(|a, b| a.1.total_cmp(&b.1));
    let threshold = 2.0 * finite[0].1;
    let within = finite.iter().take_while(|p| p.1 <= threshold).count();
    let keep = within.max(MIN_FIT_POINTS.min(finite.len()));
    let mut subset: Vec<(f64, f64)> = finite[..keep].to_vec();
    subset.sort_by(|a, b| a.0.total_cmp(&b.0));

    let rows = subset.len();
    let design = DMatrix::from_fn(rows, 3, |r, c| subset[r].0.ln().powi(c as i32));
    let target = DVector::from_iterator(rows, subset.iter().map(|p| p.1));
    let svd = design.svd(true, true);
    let coef = svd
        .solve(&target, 1e-12)
        .map_err(|e| Error::InsufficientData(format!("least squares failed: {e}")))?;
    let (a, b, c) = (coef[0], coef[1], coef[2]);

    let ells = sweep.iter().map(|p| p.0).filter(|l| *l > 0.0 && l.is_finite());
    let lo = ells.clone().fold(f64::INFINITY, f64::min).ln();
    let hi = ells.fold(f64::NEG_INFINITY, f64::max).ln();
    let eval = |x: f64| a + b * x + c * x * x;
    let x_star = if c > 0.0 {
        (-b / (2.0 * c)).clamp(lo, hi)
    } else {
        let (x0, x1) = (subset[0].0.ln(), subset[rows - 1].0.ln());
        if eval(x0) <= eval(x1) {
            x0
        } else {
            x1
        }
    };
    Ok(OptimalLength {
        ell_star: x_star.exp(),
        a,
        b,
        c,
        effort_star: eval(x_star),
        subset,
    })
}

/// `1/2 sum |p_i - q_i|`.
pub fn tv_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return invalid(format!("distributions have lengths {} and {}", p.len(), q.len()));
    }
    check_distribution(p)?;
    check_distribution(q)?;
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}
