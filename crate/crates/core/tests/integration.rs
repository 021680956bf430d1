use std::path::Path;

use aym_core::discretize::{compare, default_i_max, epi_binned_zero_min};
use aym_core::equilibrium::{
    enumerate_feasible, solve_boltzmann, solve_generalized, stirling_consistency, IntegerLadder,
};
use aym_core::fit::{fit_tail, TailDataset};
use aym_core::sampler::{goodness_of_fit, run_chains, ChainConfig};
use aym_core::verify::{verify, NumericsConfig};
use aym_core::{EconomyParams, EpiDistribution, Error, LadderRatio};
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[test]
fn params_json_round_trip() {
    let p = EconomyParams::new(vec![0.5, 1.0, 4.0], 12.0, 20.0, 0.5);
    let text = serde_json::to_string(&p).unwrap();
    assert!(text.contains("\"D\":20"));
    let back: EconomyParams = serde_json::from_str(&text).unwrap();
    assert_eq!(back, p);
}

#[test]
fn continuous_law_from_discrete_ratio() {
    // D/n = r a0 on the ladder, with the continuous law sharing the mean.
    let ratio = LadderRatio::ladder(135.0, 1.0).unwrap();
    let dist = EpiDistribution::new(135.0, 1.0).unwrap();
    let r = ratio.r.unwrap();
    let metrics = compare(r, default_i_max(r)).unwrap();
    assert!(metrics.tv_distance < 0.01);
    assert!((dist.tail(135.0) - (-1f64).exp()).abs() < 1e-15);
}

#[test]
fn zero_minimum_bins_match_the_tail() {
    let delta = 2.5;
    let r_tilde = 40.0;
    let dist = EpiDistribution::new(r_tilde * delta, 0.0).unwrap();
    for i in 1..=30u64 {
        let lo = (i - 1) as f64 * delta;
        let direct = dist.tail(lo) - dist.tail(lo + delta);
        let bin = epi_binned_zero_min(r_tilde, i).unwrap();
        assert!((bin - direct).abs() <= 1e-12 * direct);
    }
}

#[test]
fn sampler_agrees_with_enumeration_on_a_larger_instance() {
    let ladder = IntegerLadder::new(vec![1, 2, 3, 4, 5], 8, 20).unwrap();
    let exact = enumerate_feasible(&ladder, 10_000).unwrap();
    let config = ChainConfig {
        steps: 210_000,
        burn_in: 10_000,
        seed: 99,
        thin: 10,
    };
    let summary = run_chains(&ladder, &config, 2).unwrap();
    assert_eq!(summary.irreducible, Some(true));
    let gof = goodness_of_fit(&summary, &exact);
    let limit = ChiSquared::new(gof.degrees_of_freedom as f64).unwrap().inverse_cdf(0.999);
    assert!(gof.chi_square < limit, "{} >= {limit}", gof.chi_square);
}

#[test]
fn stirling_argmax_tracks_continuous_solution() {
    let params = EconomyParams::new(vec![1.0, 2.0, 3.0], 60.0, 100.0, 1.0);
    let report = stirling_consistency(&params, None, 100_000).unwrap();
    assert!(report.coincide, "{report:?}");
    assert!(!report.small_n_caveat);
    let solution = solve_boltzmann(&params, 1e-9).unwrap();
    for (real, int) in solution.occupations.iter().zip(report.exact_argmax.counts()) {
        assert!((real - *int as f64).abs() < 1.0);
    }
}

#[test]
fn generalized_solutions_conserve_constraints() {
    let params = EconomyParams::new(vec![1.0, 1.5, 2.5, 4.0], 50.0, 100.0, 0.0);
    for c in [-0.05, 0.0, 0.5, 1.0, 3.0] {
        let s = solve_generalized(&params, c, 1e-10).unwrap();
        assert!(s.max_residual() < 1e-10, "c={c}");
        assert!(s.occupations.iter().all(|n| *n > 0.0));
    }
    let saturated = solve_generalized(&params, -0.5, 1e-10);
    assert!(matches!(saturated, Err(Error::DomainViolation(_))));
}

#[test]
fn verification_report_is_consistent() {
    let dist = EpiDistribution::new(135.0, 1.0).unwrap();
    let report = verify(&dist, &NumericsConfig::default()).unwrap();
    let truth = report.fisher_expected;
    for form in [report.fisher_metric, report.fisher_statistical, report.fisher_kinematical] {
        assert!((form / truth - 1.0).abs() < 1e-3);
    }
    assert!((report.structural_q + truth).abs() < 1e-3 * truth);
    assert!((report.boundary_constant - 8.0 * dist.alpha * dist.alpha).abs() < 1e-10 * report.boundary_constant);
}

#[test]
fn shipped_fixture_fits_its_generator() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/synthetic_tail.csv");
    let data = TailDataset::load_csv(&path).unwrap();
    assert!(data.points.len() >= 20);
    let fixed = fit_tail(&data, Some(0.0)).unwrap();
    assert!((fixed.d_over_n / 135.0 - 1.0).abs() < 1e-3);
    let free = fit_tail(&data, None).unwrap();
    assert!(free.a0 < 1e-3 && (free.d_over_n / 135.0 - 1.0).abs() < 1e-3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn boltzmann_beta_sign_follows_demand(
        gaps in proptest::collection::vec(0.1f64..3.0, 2..7),
        frac in 0.02f64..0.98,
        n in 1.0f64..1e4,
    ) {
        let mut levels = Vec::new();
        let mut a = 0.0;
        for g in gaps {
            a += g;
            levels.push(a);
        }
        let (lo, hi) = (levels[0], *levels.last().unwrap());
        let mid = levels.iter().sum::<f64>() / levels.len() as f64;
        let mean = lo + frac * (hi - lo);
        let params = EconomyParams::new(levels, n, mean * n, 0.0);
        let s = solve_boltzmann(&params, 1e-8 * n.max(1.0)).unwrap();
        if mean < mid - 1e-9 {
            prop_assert!(s.multipliers.beta > 0.0);
        } else if mean > mid + 1e-9 {
            prop_assert!(s.multipliers.beta < 0.0);
        }
    }
}
