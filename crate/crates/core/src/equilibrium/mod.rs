//! Most probable occupation vector under the worker-count and
//! aggregate-demand constraints.
//!
//! The Boltzmann branch `n_i = e^ν e^{−β a_i}` reduces to a single monotone
//! equation in β. The generalized branch `n_i = 1/(e^{−ν} e^{β a_i} − c)` is
//! solved by damped Newton in (ν, β), started from the Boltzmann solution.

mod enumerate;

pub use enumerate::{
    enumerate_feasible, exact_multinomial, log_multinomial_weight, stirling_consistency, Enumeration,
    IntegerLadder, LogFactorials, StirlingReport, WeightedState, DEFAULT_ENUMERATION_CAP,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::EconomyParams;

/// Iteration budget shared by the bracketing, bisection and Newton phases.
pub const MAX_ITERATIONS: usize = 200;

const BISECTION_TOL: f64 = 1e-8;
const NEWTON_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Multipliers {
    pub nu: f64,
    pub beta: f64,
    /// Zero for the pure Boltzmann solution.
    pub c: f64,
}

impl Multipliers {
    /// `1/(e^{−ν} e^{β a} − c)`, or `None` if the denominator is not positive.
    pub fn occupation(&self, a: f64) -> Option<f64> {
        let d = (self.beta * a - self.nu).exp() - self.c;
        (d > 0.0).then(|| 1.0 / d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSolution {
    #[serde(flatten)]
    pub multipliers: Multipliers,
    pub occupations: Vec<f64>,
    /// `(|Σ n_i − n|, |Σ a_i n_i − D|)`.
    pub residuals: (f64, f64),
    pub iterations: usize,
}

impl EquilibriumSolution {
    fn new(params: &EconomyParams, multipliers: Multipliers, occupations: Vec<f64>, iterations: usize) -> Self {
        let residuals = constraint_residuals(params, &occupations);
        Self {
            multipliers,
            occupations,
            residuals,
            iterations,
        }
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.0.max(self.residuals.1)
    }
}

pub fn constraint_residuals(params: &EconomyParams, occupations: &[f64]) -> (f64, f64) {
    let total: f64 = occupations.iter().sum();
    let output: f64 = occupations.iter().zip(&params.levels).map(|(n, a)| n * a).sum();
    ((total - params.n).abs(), (output - params.demand).abs())
}

/// Boltzmann weights `e^{−β(a_i − a_ref)}` with the reference level chosen so
/// every exponent is non-positive.
struct Moments {
    weights: Vec<f64>,
    sum: f64,
    mean: f64,
    variance: f64,
    reference: f64,
}

fn moments(levels: &[f64], beta: f64) -> Moments {
    let reference = if beta >= 0.0 {
        levels[0]
    } else {
        levels[levels.len() - 1]
    };
    let weights: Vec<f64> = levels.iter().map(|a| (-beta * (a - reference)).exp()).collect();
    let sum: f64 = weights.iter().sum();
    let mean = weights.iter().zip(levels).map(|(w, a)| w * a).sum::<f64>() / sum;
    let variance = weights
        .iter()
        .zip(levels)
        .map(|(w, a)| w * (a - mean) * (a - mean))
        .sum::<f64>()
        / sum;
    Moments {
        weights,
        sum,
        mean,
        variance,
        reference,
    }
}

/// Solves for the Boltzmann occupations `n_i = e^ν e^{−β a_i}`.
///
/// `tol` bounds both absolute constraint residuals of the returned solution.
pub fn solve_boltzmann(params: &EconomyParams, tol: f64) -> Result<EquilibriumSolution> {
    params.check()?;
    if params.is_boundary() {
        let (lower, upper) = params.feasible_interval();
        return Err(Error::InfeasibleDemand {
            demand: params.demand,
            lower,
            upper,
        });
    }
    let levels = &params.levels;
    let target = params.mean_demand();
    let excess = |beta: f64| moments(levels, beta).mean - target;
    let spread = levels[levels.len() - 1] - levels[0];
    let scale = target.abs().max(spread);

    let mut iterations = 0;
    let at_zero = excess(0.0);
    let (mut lo, mut hi) = (0.0, 0.0);
    if at_zero > 0.0 {
        // The mean falls as β grows.
        hi = 1.0 / spread;
        while excess(hi) > 0.0 {
            lo = hi;
            hi *= 2.0;
            iterations += 1;
            if iterations >= MAX_ITERATIONS || !hi.is_finite() {
                return Err(Error::NoConvergence {
                    iterations,
                    residual: excess(hi).abs(),
                });
            }
        }
    } else if at_zero < 0.0 {
        lo = -1.0 / spread;
        while excess(lo) < 0.0 {
            hi = lo;
            lo *= 2.0;
            iterations += 1;
            if iterations >= MAX_ITERATIONS || !lo.is_finite() {
                return Err(Error::NoConvergence {
                    iterations,
                    residual: excess(lo).abs(),
                });
            }
        }
    }

    let mut beta = 0.0;
    if at_zero != 0.0 {
        // Bisection: excess(lo) > 0 > excess(hi).
        loop {
            beta = 0.5 * (lo + hi);
            let f = excess(beta);
            if f.abs() <= BISECTION_TOL * scale || (hi - lo) <= BISECTION_TOL * beta.abs().max(1.0 / spread) {
                break;
            }
            if f > 0.0 {
                lo = beta;
            } else {
                hi = beta;
            }
            iterations += 1;
            if iterations >= MAX_ITERATIONS {
                return Err(Error::NoConvergence {
                    iterations,
                    residual: f.abs(),
                });
            }
        }
        // Newton polish, d(mean)/dβ = −variance; fall back to bisection if a
        // step leaves the bracket. Once inside NEWTON_TOL the polish keeps
        // going while it still halves the residual, since the demand
        // residual is n times larger than the mean residual.
        let mut previous = f64::INFINITY;
        loop {
            let m = moments(levels, beta);
            let f = m.mean - target;
            let converged = f.abs() <= NEWTON_TOL * scale;
            if f == 0.0 || (converged && (f.abs() > 0.5 * previous || iterations + 1 >= MAX_ITERATIONS)) {
                break;
            }
            previous = f.abs();
            if f > 0.0 {
                lo = beta;
            } else {
                hi = beta;
            }
            let step = f / m.variance;
            let next = beta + step;
            beta = if next > lo && next < hi && step.is_finite() {
                next
            } else {
                0.5 * (lo + hi)
            };
            iterations += 1;
            if iterations >= MAX_ITERATIONS {
                return Err(Error::NoConvergence {
                    iterations,
                    residual: f.abs(),
                });
            }
            if lo == hi {
                break;
            }
        }
    }

    let m = moments(levels, beta);
    // ν = ln(n / Σ e^{−β a_i}), with the reference shift undone.
    let nu = params.n.ln() - m.sum.ln() - beta * m.reference;
    let occupations = m.weights.iter().map(|w| params.n * w / m.sum).collect();
    let solution = EquilibriumSolution::new(params, Multipliers { nu, beta, c: 0.0 }, occupations, iterations);
    if solution.max_residual() >= tol {
        return Err(Error::NoConvergence {
            iterations,
            residual: solution.max_residual(),
        });
    }
    Ok(solution)
}

/// Most probable occupation of rung `i` on the unbounded ladder `a_i = i·a0`,
/// `n/(r−1) · ((r−1)/r)^i`.
pub fn closed_form_ladder(r: f64, n: f64, i: u64) -> Result<f64> {
    if !(r > 1.0) {
        return Err(Error::DomainError(format!("ladder ratio r = {r} must exceed 1")));
    }
    if i == 0 {
        return Err(Error::DomainError("ladder rungs start at i = 1".into()));
    }
    Ok(n / (r - 1.0) * ((r - 1.0) / r).powf(i as f64))
}

/// Large-`r` approximation `(1/r + 1/r²) e^{−i/r}` of the per-worker ladder
/// occupation.
pub fn ladder_limit_form(r: f64, i: u64) -> f64 {
    (1.0 / r + 1.0 / (r * r)) * (-(i as f64) / r).exp()
}

/// Solves for `n_i = 1/(e^{−ν} e^{β a_i} − c)` under both constraints.
pub fn solve_generalized(params: &EconomyParams, c: f64, tol: f64) -> Result<EquilibriumSolution> {
    if !c.is_finite() {
        return Err(Error::invalid("c", "must be finite"));
    }
    let start = solve_boltzmann(params, tol)?;
    let levels = &params.levels;
    if c < 0.0 {
        // Every occupation is below 1/|c|.
        let cap = 1.0 / -c;
        let max_workers = cap * levels.len() as f64;
        let max_output = cap * levels.iter().sum::<f64>();
        if params.n >= max_workers || params.demand >= max_output {
            return Err(Error::DomainViolation(format!(
                "with c = {c} each sector holds fewer than {cap} workers, so n = {} and D = {} are unreachable",
                params.n, params.demand
            )));
        }
    }

    let mut nu = start.multipliers.nu;
    let beta = start.multipliers.beta;
    if c > 0.0 && levels.iter().any(|&a| (beta * a - nu).exp() <= c) {
        // Lower ν until every denominator is at least c.
        let floor = levels.iter().map(|&a| beta * a).fold(f64::INFINITY, f64::min);
        nu = floor - (2.0 * c).ln();
    }
    newton(params, c, nu, beta, tol)
}

struct Evaluation {
    occupations: Vec<f64>,
    residual: [f64; 2],
    norm: f64,
}

fn evaluate(params: &EconomyParams, m: &Multipliers) -> Option<Evaluation> {
    let occupations: Option<Vec<f64>> = params.levels.iter().map(|&a| m.occupation(a)).collect();
    let occupations = occupations?;
    let total: f64 = occupations.iter().sum();
    let output: f64 = occupations.iter().zip(&params.levels).map(|(n, a)| n * a).sum();
    let residual = [total - params.n, output - params.demand];
    let norm = (residual[0] / params.n).hypot(residual[1] / params.demand);
    norm.is_finite().then_some(Evaluation {
        occupations,
        residual,
        norm,
    })
}

fn newton(params: &EconomyParams, c: f64, nu: f64, beta: f64, tol: f64) -> Result<EquilibriumSolution> {
    let mut m = Multipliers { nu, beta, c };
    let mut current = evaluate(params, &m)
        .ok_or_else(|| Error::DomainViolation("starting point has non-positive denominators".into()))?;

    for iteration in 0..MAX_ITERATIONS {
        if current.residual[0].abs() < tol && current.residual[1].abs() < tol {
            return Ok(EquilibriumSolution::new(params, m, current.occupations, iteration));
        }
        // ∂n_i/∂ν = n_i + c n_i², ∂n_i/∂β = −a_i (n_i + c n_i²).
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for (&n, &a) in current.occupations.iter().zip(&params.levels) {
            let w = n + c * n * n;
            s0 += w;
            s1 += a * w;
            s2 += a * a * w;
        }
        let det = s1 * s1 - s0 * s2;
        if det == 0.0 || !det.is_finite() {
            return Err(Error::NoConvergence {
                iterations: iteration,
                residual: current.norm,
            });
        }
        let [f0, f1] = current.residual;
        // J = [[s0, −s1], [s1, −s2]], solve J·δ = −F.
        let d_nu = (-f0 * -s2 - -s1 * -f1) / det;
        let d_beta = (s0 * -f1 - s1 * -f0) / det;

        let mut t = 1.0;
        let mut accepted = None;
        let mut any_positive = false;
        for _ in 0..60 {
            let trial = Multipliers {
                nu: m.nu + t * d_nu,
                beta: m.beta + t * d_beta,
                c,
            };
            if let Some(eval) = evaluate(params, &trial) {
                any_positive = true;
                if eval.norm < (1.0 - 1e-4 * t) * current.norm {
                    accepted = Some((trial, eval));
                    break;
                }
            }
            t *= 0.5;
        }
        match accepted {
            Some((trial, eval)) => {
                m = trial;
                current = eval;
            }
            None if !any_positive => {
                return Err(Error::DomainViolation(format!(
                    "every damped Newton step from (ν = {}, β = {}) makes a denominator non-positive",
                    m.nu, m.beta
                )));
            }
            None => {
                return Err(Error::NoConvergence {
                    iterations: iteration,
                    residual: current.norm,
                });
            }
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_ITERATIONS,
        residual: current.norm,
    })
}
