use qeopt::analysis::{boltzmann, transition_matrix, tv_distance};
use qeopt::chain::{run_chain, RecordPolicy};
use qeopt::ising::{generate_sk, ground_state};
use qeopt::proposal::{exact_proposal_matrix, ProposalKernel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn kernels() -> [ProposalKernel; 3] {
    [ProposalKernel::Local, ProposalKernel::Uniform, ProposalKernel::quantum_default()]
}

#[test]
fn detailed_balance_and_stationarity() {
    for kernel in kernels() {
        for n in 2..=5 {
            for seed in 0..5 {
                let inst = generate_sk(n, 1000 * n as u64 + seed).unwrap();
                let q = exact_proposal_matrix(&inst, &kernel, 8).unwrap();
                for t in [0.1, 1.0, 10.0] {
                    let p = transition_matrix(&inst, &q, t, kernel.label()).unwrap();
                    let mu = boltzmann(&inst, t).unwrap();
                    let size = 1 << n;
                    for a in 0..size {
                        assert!((p.entries.row(a).sum() - 1.0).abs() < 1e-10);
                        for b in 0..size {
                            assert!(p.entries[(a, b)] >= 0.0);
                            let flow = p.entries[(a, b)] * mu[a] - p.entries[(b, a)] * mu[b];
                            assert!(flow.abs() < 1e-10, "{} n={n} T={t}", kernel.label());
                        }
                    }
                    for b in 0..size {
                        let inflow: f64 = (0..size).map(|a| mu[a] * p.entries[(a, b)]).sum();
                        assert!((inflow - mu[b]).abs() < 1e-10);
                    }
                }
            }
        }
    }
}

#[test]
fn local_chain_samples_boltzmann() {
    let inst = generate_sk(4, 21).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let steps = 1_000_000;
    let run = run_chain(&inst, &ProposalKernel::Local, 2.0, steps, &mut rng, RecordPolicy::EveryStep, None).unwrap();
    let mut hist = vec![0.0; 16];
    for idx in run.trajectory.unwrap() {
        hist[idx] += 1.0 / steps as f64;
    }
    let norm: f64 = hist.iter().sum();
    hist.iter_mut().for_each(|v| *v /= norm);
    let tv = tv_distance(&hist, &boltzmann(&inst, 2.0).unwrap()).unwrap();
    assert!(tv < 0.02, "tv = {tv}");
}

#[test]
fn quantum_chain_finds_lower_energies_when_cold() {
    let (mut quantum, mut local) = (0.0, 0.0);
    let count = 50;
    for seed in 0..count {
        let inst = generate_sk(4, 5000 + seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let start = qeopt::SpinConfiguration::random(4, &mut rng);
        let go = |kernel: ProposalKernel, rng_seed: u64| {
            let mut r = ChaCha8Rng::seed_from_u64(rng_seed);
            run_chain(&inst, &kernel, 0.1, 100_000, &mut r, RecordPolicy::Nothing, Some(start.clone()))
                .unwrap()
                .state
                .best_energy()
        };
        let (q, l) = (go(ProposalKernel::quantum_default(), seed + 1), go(ProposalKernel::Local, seed + 1));
        let (_, g) = ground_state(&inst).unwrap();
        assert!(q >= g - 1e-9 && l >= g - 1e-9);
        quantum += q;
        local += l;
    }
    assert!(quantum / count as f64 <= local / count as f64, "{quantum} vs {local}");
}
