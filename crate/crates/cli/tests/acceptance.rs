//! Acceptance suite: one line per criterion, `PASS` or `FAIL` with the
//! measured quantities. Run with `--nocapture` to see the table.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use aym_core::discretize::{aym_ladder_pmf, compare, default_i_max, epi_binned_ladder};
use aym_core::equilibrium::{enumerate_feasible, solve_boltzmann, solve_generalized, IntegerLadder};
use aym_core::fit::{fit_tail, TailDataset};
use aym_core::quadrature::{integrate, QuadratureSettings};
use aym_core::sampler::{chain_rng, goodness_of_fit, run_chain, ChainConfig};
use aym_core::verify::{
    boundary_constant, boundary_identity, convergence_ratio, fisher_kinematical, fisher_metric_form, fisher_statistical,
    generating_equation_residual, recovered_qtilde, structural_principle, Derivatives, NumericsConfig,
};
use aym_core::{EconomyParams, EpiDistribution};
use num_bigint::BigUint;
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Exact ratios tv(10)/tv(100) and tv(100)/tv(1000), from a 30-digit
/// evaluation of both PMFs.
const TV_RATIO_10_100: f64 = 10.561_606_866_032_213;
const TV_RATIO_100_1000: f64 = 10.052_843_001_170_241;

const LAWS: [(f64, f64); 6] = [(2.0, 0.0), (135.0, 0.0), (1000.0, 0.0), (2.0, 1.0), (135.0, 1.0), (1000.0, 1.0)];

type Check = fn() -> Outcome;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn ladder_closed_form() -> Outcome {
    let start = Instant::now();
    let params = EconomyParams::ladder(1.0, 500, 1000.0, 2000.0);
    let solution = match solve_boltzmann(&params, 1e-9) {
        Ok(s) => s,
        Err(e) => return outcome(false, format!("solver error: {e}")),
    };
    let elapsed = start.elapsed();
    let worst = [500.0, 250.0, 125.0]
        .iter()
        .zip(&solution.occupations)
        .map(|(want, got)| rel(*got, *want))
        .fold(0.0, f64::max);
    outcome(
        worst < 1e-6 && elapsed < Duration::from_secs(1),
        format!("max relative error {worst:.3e}, {elapsed:.2?}"),
    )
}

fn enumeration_oracle() -> Outcome {
    let ladder = IntegerLadder::new(vec![1, 2, 3], 4, 8).expect("valid ladder");
    let e = match enumerate_feasible(&ladder, 1000) {
        Ok(e) => e,
        Err(err) => return outcome(false, format!("enumeration error: {err}")),
    };
    let mut pairs: Vec<(Vec<u64>, BigUint)> = e
        .states
        .iter()
        .map(|s| (s.occupation.counts().to_vec(), s.weight.clone()))
        .collect();
    pairs.sort();
    let expected = vec![
        (vec![0, 4, 0], BigUint::from(1u32)),
        (vec![1, 2, 1], BigUint::from(12u32)),
        (vec![2, 0, 2], BigUint::from(6u32)),
    ];
    let argmax = e.argmax_state().map(|s| s.occupation.counts().to_vec());
    outcome(
        pairs == expected && argmax == Some(vec![1, 2, 1]),
        format!("{} vectors, argmax {:?}", pairs.len(), argmax.unwrap_or_default()),
    )
}

fn sampler_correctness() -> Outcome {
    let start = Instant::now();
    let ladder = IntegerLadder::new(vec![1, 2, 3], 4, 8).expect("valid ladder");
    let config = ChainConfig {
        steps: 110_000,
        burn_in: 10_000,
        seed: 20240601,
        thin: 1,
    };
    let summary = match run_chain(&ladder, &config) {
        Ok(s) => s,
        Err(e) => return outcome(false, format!("sampler error: {e}")),
    };
    let elapsed = start.elapsed();
    let exact = enumerate_feasible(&ladder, 1000).expect("small instance");
    let gof = goodness_of_fit(&summary, &exact);
    let targets = [([0, 4, 0], 1.0 / 19.0), ([1, 2, 1], 12.0 / 19.0), ([2, 0, 2], 6.0 / 19.0)];
    let mut worst_z: f64 = 0.0;
    for (state, p) in targets {
        let visit = summary.visits.iter().find(|v| v.state.counts() == state);
        let z = match visit {
            Some(v) if v.std_error > 0.0 => (v.frequency - p).abs() / v.std_error,
            _ => f64::INFINITY,
        };
        worst_z = worst_z.max(z);
    }
    let limit = ChiSquared::new(gof.degrees_of_freedom as f64).expect("positive dof").inverse_cdf(0.99);
    outcome(
        summary.samples == 100_000 && worst_z < 3.0 && gof.chi_square < limit && elapsed < Duration::from_secs(10),
        format!(
            "{} samples, max |f-p|/se {worst_z:.2}, chi2 {:.3} < {limit:.3}, {elapsed:.2?}",
            summary.samples, gof.chi_square
        ),
    )
}

fn random_instance<R: Rng>(rng: &mut R) -> EconomyParams {
    let g = rng.random_range(2..=8);
    let mut levels = Vec::with_capacity(g);
    let mut a = rng.random_range(0.0..2.0);
    for _ in 0..g {
        a += rng.random_range(0.1..3.0);
        levels.push(a);
    }
    let n = rng.random_range(1..=500) as f64;
    let (lo, hi) = (levels[0], levels[g - 1]);
    let mean = lo + (hi - lo) * rng.random_range(0.05..0.95);
    EconomyParams::new(levels, n, mean * n, 0.0)
}

fn c_zero_reduction() -> Outcome {
    let tol = 1e-9;
    let mut rng = chain_rng(4, 0);
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let params = random_instance(&mut rng);
        let (b, g) = match (solve_boltzmann(&params, tol), solve_generalized(&params, 0.0, tol)) {
            (Ok(b), Ok(g)) => (b, g),
            (Err(e), _) | (_, Err(e)) => return outcome(false, format!("instance {k}: {e}")),
        };
        for (x, y) in b.occupations.iter().zip(&g.occupations) {
            worst = worst.max((x - y).abs());
        }
    }
    outcome(worst <= 10.0 * tol, format!("max componentwise gap {worst:.3e} on 20 instances"))
}

fn fisher_agreement() -> Outcome {
    let start = Instant::now();
    let cfg = NumericsConfig::default();
    let mut worst_truth: f64 = 0.0;
    let mut worst_pair: f64 = 0.0;
    for (m, a0) in LAWS {
        let d = EpiDistribution::new(m, a0).expect("valid law");
        let forms = [
            fisher_metric_form(&d, &cfg),
            fisher_kinematical(&d, &cfg),
            fisher_statistical(&d, &cfg),
        ];
        let forms: Vec<f64> = match forms.into_iter().collect::<Result<_, _>>() {
            Ok(f) => f,
            Err(e) => return outcome(false, format!("D/n={m}, a0={a0}: {e}")),
        };
        let truth = 1.0 / (d.gap() * d.gap());
        for (i, x) in forms.iter().enumerate() {
            worst_truth = worst_truth.max(rel(*x, truth));
            for y in &forms[i + 1..] {
                worst_pair = worst_pair.max(rel(*x, *y));
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst_truth < 1e-3 && worst_pair < 1e-3 && elapsed < Duration::from_secs(5),
        format!("max error vs 1/s^2 {worst_truth:.3e}, max pairwise {worst_pair:.3e}, {elapsed:.2?}"),
    )
}

fn structural_principle_check() -> Outcome {
    let cfg = NumericsConfig::default();
    let mut worst: f64 = 0.0;
    let mut worst_qtf: f64 = 0.0;
    for (m, a0) in LAWS {
        let d = EpiDistribution::new(m, a0).expect("valid law");
        let information = match fisher_metric_form(&d, &cfg) {
            Ok(i) => i,
            Err(e) => return outcome(false, format!("D/n={m}, a0={a0}: {e}")),
        };
        let residual = match structural_principle(&d, &cfg) {
            Ok((_, r)) => r,
            Err(e) => return outcome(false, format!("D/n={m}, a0={a0}: {e}")),
        };
        worst = worst.max(residual / information.abs());
        let (mean, spread) = recovered_qtilde(&d, &cfg);
        worst_qtf = worst_qtf.max(rel(mean, 2.0 * d.alpha * d.alpha)).max(spread);
    }
    outcome(
        worst < 1e-3 && worst_qtf < 1e-10,
        format!("max |I+Q|/|I| {worst:.3e}, max q~F deviation {worst_qtf:.3e}"),
    )
}

fn generating_equation() -> Outcome {
    let cfg = NumericsConfig::default();
    let mut ratios = Vec::new();
    let mut analytic: f64 = 0.0;
    for (m, a0) in LAWS {
        let d = EpiDistribution::new(m, a0).expect("valid law");
        // The default step sits at the round-off floor; the order is
        // measured where truncation error dominates.
        ratios.push(convergence_ratio(&d, &cfg, 0.05 * d.gap()));
        analytic = analytic.max(generating_equation_residual(&d, &cfg, Derivatives::Analytic));
    }
    let ok = ratios.iter().all(|r| (3.5..=4.5).contains(r)) && analytic == 0.0;
    let (lo, hi) = ratios
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| (lo.min(r), hi.max(r)));
    outcome(ok, format!("halving ratios in [{lo:.4}, {hi:.4}], analytic residual {analytic:e}"))
}

fn boundary_constant_check() -> Outcome {
    let cfg = NumericsConfig::default();
    let mut worst_constant: f64 = 0.0;
    let mut worst_identity: f64 = 0.0;
    for (m, a0) in LAWS {
        let d = EpiDistribution::new(m, a0).expect("valid law");
        worst_constant = worst_constant.max(rel(boundary_constant(&d), 8.0 * d.alpha * d.alpha));
        match boundary_identity(&d, &cfg) {
            Ok((lhs, rhs)) => worst_identity = worst_identity.max(rel(rhs, lhs)),
            Err(e) => return outcome(false, format!("D/n={m}, a0={a0}: {e}")),
        }
    }
    outcome(
        worst_constant < 1e-10 && worst_identity < 1e-8,
        format!("c_a vs 8 alpha^2 {worst_constant:.3e}, identity relative gap {worst_identity:.3e}"),
    )
}

fn first_order_agreement() -> Outcome {
    let mut tv = Vec::new();
    for r in [10.0, 100.0, 1000.0] {
        match compare(r, default_i_max(r)) {
            Ok(m) => tv.push(m.tv_distance),
            Err(e) => return outcome(false, format!("r={r}: {e}")),
        }
    }
    let (first, second) = (tv[0] / tv[1], tv[1] / tv[2]);
    let mut worst_norm: f64 = 0.0;
    for r in [2.0, 10.0, 100.0, 1000.0] {
        let upto = default_i_max(r);
        let epi: f64 = (1..=upto).map(|i| epi_binned_ladder(r, i).unwrap()).sum();
        let aym: f64 = (1..=upto).map(|i| aym_ladder_pmf(r, i).unwrap()).sum();
        worst_norm = worst_norm.max((epi - 1.0).abs()).max((aym - 1.0).abs());
    }
    let in_band = (8.0..=12.0).contains(&first) && (8.0..=12.0).contains(&second);
    let golden = rel(first, TV_RATIO_10_100) < 1e-9 && rel(second, TV_RATIO_100_1000) < 1e-9;
    outcome(
        in_band && golden && worst_norm < 1e-12,
        format!("ratios {first:.6} and {second:.6}, max |sum - 1| {worst_norm:.1e}"),
    )
}

fn binned_consistency() -> Outcome {
    let settings = QuadratureSettings::default();
    let a0 = 1.0;
    let mut worst: f64 = 0.0;
    for r in [2.0, 10.0, 100.0] {
        let d = EpiDistribution::new(r * a0, a0).expect("valid law");
        for i in 1..=50u64 {
            let lo = i as f64 * a0;
            let direct = match integrate(|a| d.pdf(a), lo, lo + a0, &settings) {
                Ok(v) => v.value,
                Err(e) => return outcome(false, format!("r={r}, i={i}: {e}")),
            };
            worst = worst.max(rel(epi_binned_ladder(r, i).unwrap(), direct));
        }
    }
    outcome(worst < 1e-12, format!("max relative gap {worst:.3e} over r in {{2, 10, 100}}, i <= 50"))
}

fn aym() -> Command {
    Command::new(env!("CARGO_BIN_EXE_aym"))
}

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/synthetic_tail.csv")
}

fn figure_machinery() -> Outcome {
    let cuts = [10.0, 50.0, 100.0, 200.0, 400.0, 800.0];
    let data = TailDataset::from_model(135.0, 0.0, &cuts, "synthetic").expect("valid model");
    let fitted = match fit_tail(&data, Some(0.0)) {
        Ok(f) => f.d_over_n,
        Err(e) => return outcome(false, format!("fit error: {e}")),
    };
    let out = aym()
        .args(["overlay", "--mean-demand", "100,135,170", "--a0", "0", "--grid", "135"])
        .env_remove("AYM_OUTPUT_DIR")
        .output()
        .expect("binary runs");
    let text = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = text.lines().collect();
    let header_ok = lines.first() == Some(&"a,p_gt_data,tail_100,tail_135,tail_170");
    let values: Vec<f64> = lines
        .get(1)
        .map(|l| l.split(',').skip(2).filter_map(|c| c.parse().ok()).collect())
        .unwrap_or_default();
    let expected = [(-1.35f64).exp(), (-1f64).exp(), (-135.0f64 / 170.0).exp()];
    let worst = if values.len() == 3 {
        values.iter().zip(&expected).map(|(v, e)| rel(*v, *e)).fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    outcome(
        rel(fitted, 135.0) < 1e-3 && out.status.success() && header_ok && worst < 1e-15,
        format!("refit D/n {fitted:.9}, overlay max relative error {worst:.1e}"),
    )
}

fn cli_determinism() -> Outcome {
    let dir = tempfile::tempdir().expect("temporary directory");
    let input = fixture();
    let input = input.to_str().expect("utf-8 path");
    let invocations: Vec<(&str, Vec<&str>)> = vec![
        ("solve", vec!["solve", "--levels", "1,2,3", "--n", "3", "--D", "6"]),
        ("generalized", vec!["generalized", "--levels", "1,2,3", "--n", "100", "--D", "180", "--c", "1"]),
        ("epi", vec!["epi", "--mean-demand", "135", "--a0", "0"]),
        ("verify", vec!["verify", "--mean-demand", "135", "--a0", "0"]),
        ("compare", vec!["compare", "--r", "10,100,1000"]),
        ("sample", vec!["sample", "--levels", "1,2,3", "--n", "4", "--D", "8", "--seed", "7", "--chains", "4"]),
        ("enumerate", vec!["enumerate", "--levels", "1,2,3", "--n", "4", "--D", "8", "--stirling"]),
        ("fit", vec!["fit", "--input", input]),
        ("overlay", vec!["overlay", "--input", input, "--mean-demand", "100,135,170"]),
    ];
    let mut failures = Vec::new();
    for (name, args) in &invocations {
        let mut outputs = Vec::new();
        for run in 0..2 {
            let path = dir.path().join(format!("{name}-{run}.out"));
            let status = aym()
                .args(args)
                .arg("--output")
                .arg(&path)
                .env_remove("AYM_OUTPUT_DIR")
                .status()
                .expect("binary runs");
            outputs.push(if status.success() { std::fs::read(&path).ok() } else { None });
        }
        match (&outputs[0], &outputs[1]) {
            (Some(a), Some(b)) if a == b && !a.is_empty() => {}
            _ => failures.push(*name),
        }
    }
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            format!("{} subcommands byte-identical across two runs", invocations.len())
        } else {
            format!("differing or failing: {}", failures.join(", "))
        },
    )
}

#[test]
fn acceptance_criteria() {
    let criteria: [(&str, Check); 12] = [
        ("ladder closed form", ladder_closed_form),
        ("enumeration oracle", enumeration_oracle),
        ("sampler correctness", sampler_correctness),
        ("c = 0 reduction", c_zero_reduction),
        ("Fisher three-form agreement", fisher_agreement),
        ("structural principle", structural_principle_check),
        ("generating equation", generating_equation),
        ("boundary constant", boundary_constant_check),
        ("first-order agreement", first_order_agreement),
        ("binned consistency", binned_consistency),
        ("tail fit and overlay", figure_machinery),
        ("CLI determinism", cli_determinism),
    ];
    let mut failed = Vec::new();
    for (k, (name, check)) in criteria.iter().enumerate() {
        let result = check();
        let status = if result.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} [{status}] {name}: {}", k + 1, result.detail);
        if !result.pass {
            failed.push(k + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
