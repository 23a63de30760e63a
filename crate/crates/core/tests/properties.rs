use proptest::prelude::*;
use qeopt::analysis::{effort, optimal_length, repeats_needed, tv_distance};
use qeopt::schedule::make_schedule;
use qeopt::tempering::{pt_swap_probability, swap_pairs_for};

fn normalized(v: Vec<f64>) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

proptest! {
    #[test]
    fn tv_is_a_bounded_symmetric_metric(a in prop::collection::vec(0.01f64..1.0, 8), b in prop::collection::vec(0.01f64..1.0, 8)) {
        let (p, q) = (normalized(a), normalized(b));
        let d = tv_distance(&p, &q).unwrap();
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert!((d - tv_distance(&q, &p).unwrap()).abs() < 1e-15);
        prop_assert!(tv_distance(&p, &p).unwrap() < 1e-15);
    }

    #[test]
    fn effort_decreases_with_success(p1 in 0.0f64..=1.0, p2 in 0.0f64..=1.0, ell in 1u64..1000, m in 1u64..8) {
        let (lo, hi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
        let e_lo = effort(ell as f64, repeats_needed(lo, 0.99).unwrap(), m as f64);
        let e_hi = effort(ell as f64, repeats_needed(hi, 0.99).unwrap(), m as f64);
        prop_assert!(e_hi <= e_lo);
        prop_assert!(repeats_needed(hi, 0.99).unwrap() >= 1.0);
    }

    #[test]
    fn schedules_hit_both_endpoints(hi in 0.5f64..100.0, ratio in 1.01f64..1000.0, len in 2usize..400) {
        let s = make_schedule(hi, hi / ratio, len).unwrap();
        prop_assert_eq!(s.values()[0], hi);
        prop_assert_eq!(s.values()[len - 1], hi / ratio);
        prop_assert!(s.is_strictly_decreasing());
    }

    #[test]
    fn swap_probability_in_unit_interval(ti in 0.01f64..100.0, tj in 0.01f64..100.0, fi in -50.0f64..50.0, fj in -50.0f64..50.0) {
        let p = pt_swap_probability(ti, tj, fi, fj).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!((p - pt_swap_probability(tj, ti, fj, fi).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn swap_epochs_alternate_and_are_disjoint(epoch in 1u64..1000, k in 1u64..20, m in 2usize..12) {
        let a = swap_pairs_for(epoch * k, k, m).unwrap();
        let b = swap_pairs_for((epoch + 1) * k, k, m).unwrap();
        let mut all: Vec<(usize, usize)> = a.iter().chain(&b).copied().collect();
        all.sort();
        let expected: Vec<(usize, usize)> = (0..m - 1).map(|i| (i, i + 1)).collect();
        prop_assert_eq!(all, expected);
        for w in a.windows(2) {
            prop_assert!(w[0].1 < w[1].0);
        }
    }

    #[test]
    fn fitted_optimum_stays_in_basin(vertex in 2.5f64..5.5, curv in 5.0f64..50.0, jitter in prop::collection::vec(-0.05f64..0.05, 20)) {
        let pts: Vec<(f64, f64)> = (0..20)
            .map(|k| {
                let ell = 5.0 * 1.3f64.powi(k);
                let x = ell.ln();
                (ell, (100.0 + curv * (x - vertex).powi(2)) * (1.0 + jitter[k as usize]))
            })
            .collect();
        let fit = optimal_length(&pts).unwrap();
        let x = fit.ell_star.ln();
        prop_assert!((x - vertex).abs() < 1.0, "x* = {x}, vertex = {vertex}");
    }
}

#[test]
fn wilson_interval_covers_synthetic_rate() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(30);
    let draws: Vec<bool> = (0..10_000).map(|_| rng.random::<f64>() < 0.3).collect();
    let est = qeopt::analysis::success_probability(&draws).unwrap();
    assert!((est.p_s - 0.3).abs() < 0.01);
    assert!(est.lower <= 0.3 && 0.3 <= est.upper);
    assert!(est.half_width < 0.01);
}
