use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use qeopt::analysis::tv_distance;
use qeopt::ising::{generate_sk, SkInstance, SpinConfiguration};
use qeopt::proposal::{exact_proposal_matrix, ProposalKernel, Proposer, QuantumHyper, Move};
use qeopt::statevector::{compute_alpha, outcome_distribution, trotter_evolve, EvolutionParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// `H = (1 - gamma) alpha diag(f) + gamma sum_j X_j` as a dense real matrix.
fn hamiltonian(inst: &SkInstance, gamma: f64, alpha: f64) -> DMatrix<f64> {
    let n = inst.n();
    let size = 1 << n;
    let energies = inst.energy_table().unwrap();
    let mut h = DMatrix::zeros(size, size);
    for z in 0..size {
        h[(z, z)] = (1.0 - gamma) * alpha * energies[z];
        for j in 0..n {
            h[(z, z ^ (1 << j))] += gamma;
        }
    }
    h
}

/// `|exp(-i H time) e_start|^2` via the eigendecomposition of `H`.
fn exact_outcomes(inst: &SkInstance, gamma: f64, alpha: f64, time: f64, start: usize) -> Vec<f64> {
    let eig = SymmetricEigen::new(hamiltonian(inst, gamma, alpha));
    let v = &eig.eigenvectors;
    let size = v.nrows();
    let coeffs: Vec<Complex64> = (0..size)
        .map(|k| Complex64::from_polar(1.0, -eig.eigenvalues[k] * time) * v[(start, k)])
        .collect();
    (0..size)
        .map(|z| (0..size).map(|k| coeffs[k] * v[(z, k)]).sum::<Complex64>().norm_sqr())
        .collect()
}

#[test]
fn trotter_error_shrinks_with_step_size() {
    for seed in 0..5 {
        let inst = generate_sk(4, 100 + seed).unwrap();
        let alpha = compute_alpha(&inst).unwrap();
        let gamma = 0.4;
        let total = 4.0;
        let exact = exact_outcomes(&inst, gamma, alpha, total, 5);
        let s = SpinConfiguration::from_index(4, 5).unwrap();
        let errs: Vec<f64> = [5u32, 10, 20, 40]
            .iter()
            .map(|&steps| {
                let p = EvolutionParams::new(gamma, steps, total / steps as f64, alpha).unwrap();
                tv_distance(&outcome_distribution(&trotter_evolve(&s, &inst, &p).unwrap()), &exact).unwrap()
            })
            .collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "seed {seed}: {errs:?}");
    }
}

#[test]
fn pure_mixer_and_pure_phase_are_exact() {
    let inst = generate_sk(3, 4).unwrap();
    let alpha = compute_alpha(&inst).unwrap();
    let s = SpinConfiguration::from_index(3, 6).unwrap();
    for gamma in [0.0, 1.0] {
        let p = EvolutionParams::with_closed_gamma(gamma, 7, 0.3, alpha).unwrap();
        let got = outcome_distribution(&trotter_evolve(&s, &inst, &p).unwrap());
        let want = exact_outcomes(&inst, gamma, alpha, 2.1, 6);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn evolution_preserves_norm() {
    let inst = generate_sk(9, 2).unwrap();
    let alpha = compute_alpha(&inst).unwrap();
    let s = SpinConfiguration::from_index(9, 300).unwrap();
    let p = EvolutionParams::new(0.5, 20, 0.8, alpha).unwrap();
    let state = trotter_evolve(&s, &inst, &p).unwrap();
    assert!((state.norm_sqr() - 1.0).abs() < 1e-12);
}

#[test]
fn pinned_proposals_are_symmetric() {
    for n in 1..=5 {
        for seed in 0..2 {
            let inst = generate_sk(n, 40 + seed).unwrap();
            for gamma in [0.25, 0.425, 0.6] {
                for t in [2, 11, 20] {
                    let k = ProposalKernel::Quantum(QuantumHyper::pinned(gamma, t, 0.8).unwrap());
                    let q = exact_proposal_matrix(&inst, &k, 1).unwrap();
                    let asym = (&q - q.transpose()).abs().max();
                    assert!(asym < 1e-9, "n={n} gamma={gamma} t={t}: {asym}");
                }
            }
        }
    }
}

#[test]
fn averaged_matrix_is_doubly_stochastic() {
    let inst = generate_sk(5, 3).unwrap();
    let q = exact_proposal_matrix(&inst, &ProposalKernel::quantum_default(), 8).unwrap();
    for r in 0..32 {
        assert!((q.row(r).sum() - 1.0).abs() < 1e-12);
        assert!((q.column(r).sum() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn sampled_proposals_follow_pinned_distribution() {
    // chi-square goodness of fit over 32 outcomes
    let inst = generate_sk(5, 8).unwrap();
    let k = ProposalKernel::Quantum(QuantumHyper::pinned(0.45, 6, 0.8).unwrap());
    let q = exact_proposal_matrix(&inst, &k, 1).unwrap();
    let mut proposer = Proposer::new(&inst, k).unwrap();
    let s = SpinConfiguration::from_index(5, 13).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let draws = 100_000;
    let mut counts = vec![0u64; 32];
    for _ in 0..draws {
        let idx = match proposer.propose(&s, &mut rng) {
            Move::Jump(c) => c.index(),
            Move::Flip(j) => s.flipped(j).index(),
        };
        counts[idx] += 1;
    }
    let expected = DVector::from_iterator(32, q.row(13).iter().map(|p| p * draws as f64));
    let mut chi2 = 0.0;
    let mut dof = 0;
    let mut pooled = (0.0, 0.0);
    for z in 0..32 {
        if expected[z] >= 5.0 {
            chi2 += (counts[z] as f64 - expected[z]).powi(2) / expected[z];
            dof += 1;
        } else {
            pooled.0 += counts[z] as f64;
            pooled.1 += expected[z];
        }
    }
    if pooled.1 > 0.0 {
        chi2 += (pooled.0 - pooled.1).powi(2) / pooled.1.max(1e-12);
        dof += 1;
    }
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    let p_value = 1.0 - ChiSquared::new((dof - 1) as f64).unwrap().cdf(chi2);
    assert!(p_value > 1e-3, "chi2 = {chi2}, dof = {dof}, p = {p_value}");
}

#[test]
fn local_kernel_moves_one_spin() {
    let inst = generate_sk(6, 1).unwrap();
    let mut proposer = Proposer::new(&inst, ProposalKernel::Local).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let s = SpinConfiguration::random(6, &mut rng);
    let mut hits = [0u32; 6];
    for _ in 0..6000 {
        match proposer.propose(&s, &mut rng) {
            Move::Flip(j) => hits[j] += 1,
            Move::Jump(_) => panic!("local kernel jumped"),
        }
    }
    assert!(hits.iter().all(|&h| (800..1200).contains(&h)), "{hits:?}");
}
