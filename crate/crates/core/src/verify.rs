//! Numerical checks of the information principles behind the continuous law.
//!
//! Two derivative conventions appear. Parameter derivatives `∂/∂θ` are taken
//! across the whole family `EpiDistribution::new(θ, a0)` at fixed `a`, with
//! the rate changing alongside θ. Displacement derivatives `d/dx` act on the
//! amplitude `q(x)` at fixed θ. Each identity is checked in the convention
//! where it holds exactly.
//!
//! The surface term `c_a` is checked through the integration-by-parts
//! identity `∫ q′² dx = c_a − ∫ q q″ dx`; a constant `c_a/2` integrated over
//! the unbounded support would diverge.

use serde::{Deserialize, Serialize};

use crate::epi::EpiDistribution;
use crate::error::Result;
use crate::quadrature::{integrate_decaying, QuadratureSettings};

/// Efficiency coefficient in `I + κQ = 0`; unity for this model.
pub const KAPPA: f64 = 1.0;

/// Integration domains extend this many decay lengths past the lower limit.
const QUADRATURE_WIDTHS: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumericsConfig {
    /// θ finite-difference step as a fraction of `D/n − a0`.
    pub fd_step_theta: f64,
    /// x finite-difference step as a fraction of `D/n − a0`.
    pub fd_step_x: f64,
    /// Relative quadrature tolerance.
    pub quadrature_tol: f64,
    pub grid_points: usize,
    /// Grid length in decay lengths, starting at `x_min`.
    pub grid_widths: f64,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        Self {
            fd_step_theta: 1e-4,
            fd_step_x: 1e-3,
            quadrature_tol: 1e-9,
            grid_points: 4001,
            grid_widths: 40.0,
        }
    }
}

impl NumericsConfig {
    pub fn check(&self) -> Result<()> {
        use crate::error::Error;
        if !(self.fd_step_theta > 0.0 && self.fd_step_x > 0.0) {
            return Err(Error::invalid("fd_step", "finite-difference steps must be positive"));
        }
        if !(self.quadrature_tol > 0.0) {
            return Err(Error::invalid("quadrature_tol", "must be positive"));
        }
        if self.grid_points < 2 || !(self.grid_widths >= 40.0) {
            return Err(Error::invalid("grid", "needs at least 2 points covering 40 decay lengths"));
        }
        Ok(())
    }

    /// Quadrature settings for an integral of magnitude `scale`. Integrands
    /// built from `order`-th finite differences carry round-off of about
    /// `ε/h^order`, below which no tolerance can be met.
    fn settings(&self, scale: f64, order: i32) -> QuadratureSettings {
        let floor = match order {
            0 => 0.0,
            k => 64.0 * f64::EPSILON / self.fd_step_theta.powi(k),
        };
        let tol = self.quadrature_tol.max(floor);
        QuadratureSettings {
            abs_tol: tol * scale,
            rel_tol: tol,
            max_subdivisions: 5000,
        }
    }

    fn grid(&self, dist: &EpiDistribution) -> impl Iterator<Item = f64> + '_ {
        let x_min = dist.x_min();
        let span = self.grid_widths * dist.gap();
        let last = (self.grid_points - 1) as f64;
        (0..self.grid_points).map(move |k| x_min + span * k as f64 / last)
    }
}

/// How amplitude derivatives in `x` are obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Derivatives {
    Analytic,
    /// Central differences with the given absolute step.
    FiniteDifference(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrincipleReport {
    pub mean_demand: f64,
    pub a0: f64,
    pub alpha: f64,
    /// Closed form `1/(D/n − a0)² = 4α²`.
    pub fisher_expected: f64,
    pub fisher_metric: f64,
    pub fisher_statistical: f64,
    pub fisher_kinematical: f64,
    pub structural_q: f64,
    /// `|I + Q|` with `I` the metric form.
    pub structural_residual: f64,
    /// `|∫ ∂²p/∂θ² da|`.
    pub regularity_residual: f64,
    pub epi_residual_pointwise: f64,
    pub generating_residual: f64,
    pub euler_lagrange_residual: f64,
    /// Mean of `2q″/q` over the grid.
    pub qtilde_value: f64,
    /// Standard deviation over mean of `2q″/q`.
    pub qtilde_spread: f64,
    pub boundary_constant: f64,
    /// `|∫ q′² − (c_a − ∫ q q″)|`.
    pub boundary_identity_residual: f64,
    pub kappa: f64,
}

/// Amplitude `q(a|θ) = 2√p(a|θ)` of a family member, continued as a pure
/// exponential so finite differences need no support clipping.
fn family_amplitude(theta: f64, a0: f64, a: f64) -> f64 {
    let s = theta - a0;
    2.0 / s.sqrt() * (-(a - a0) / (2.0 * s)).exp()
}

fn family_pdf(theta: f64, a0: f64, a: f64) -> f64 {
    let s = theta - a0;
    (-(a - a0) / s).exp() / s
}

/// Amplitude in displacement form, `2√(2α) e^{α(x_min − x)}`, for any `x`.
fn amplitude_ext(dist: &EpiDistribution, x: f64) -> f64 {
    2.0 * (2.0 * dist.alpha).sqrt() * (dist.alpha * (dist.x_min() - x)).exp()
}

fn theta_derivatives<F: Fn(f64) -> f64>(f: F, theta: f64, h: f64) -> (f64, f64, f64) {
    let (lo, mid, hi) = (f(theta - h), f(theta), f(theta + h));
    (mid, (hi - lo) / (2.0 * h), (hi - 2.0 * mid + lo) / (h * h))
}

fn integrate_a<F: Fn(f64) -> f64>(dist: &EpiDistribution, f: F, settings: &QuadratureSettings) -> Result<f64> {
    Ok(integrate_decaying(f, dist.a0, dist.gap(), QUADRATURE_WIDTHS, settings)?.value)
}

fn integrate_x<F: Fn(f64) -> f64>(dist: &EpiDistribution, f: F, settings: &QuadratureSettings) -> Result<f64> {
    Ok(integrate_decaying(f, dist.x_min(), dist.gap(), QUADRATURE_WIDTHS, settings)?.value)
}

/// `∫ (∂p/∂θ)²/p da`.
pub fn fisher_metric_form(dist: &EpiDistribution, cfg: &NumericsConfig) -> Result<f64> {
    let (theta, a0) = (dist.mean_demand, dist.a0);
    let h = cfg.fd_step_theta * dist.gap();
    let scale = 1.0 / (dist.gap() * dist.gap());
    integrate_a(
        dist,
        |a| {
            let (p, dp, _) = theta_derivatives(|t| family_pdf(t, a0, a), theta, h);
            dp * dp / p
        },
        &cfg.settings(scale, 1),
    )
}

/// `∫ (dq/dx)² dx` over `[x_min, ∞)`, with central differences in `x`.
pub fn fisher_kinematical(dist: &EpiDistribution, cfg: &NumericsConfig) -> Result<f64> {
    let h = cfg.fd_step_x * dist.gap();
    let scale = 1.0 / (dist.gap() * dist.gap());
    integrate_x(
        dist,
        |x| {
            let dq = (amplitude_ext(dist, x + h) - amplitude_ext(dist, x - h)) / (2.0 * h);
            dq * dq
        },
        &cfg.settings(scale, 0),
    )
}

/// `−∫ q ∂²q/∂θ² da`.
pub fn fisher_statistical(dist: &EpiDistribution, cfg: &NumericsConfig) -> Result<f64> {
    let (theta, a0) = (dist.mean_demand, dist.a0);
    let h = cfg.fd_step_theta * dist.gap();
    let scale = 1.0 / (dist.gap() * dist.gap());
    integrate_a(
        dist,
        |a| {
            let (q, _, d2q) = theta_derivatives(|t| family_amplitude(t, a0, a), theta, h);
            -q * d2q
        },
        &cfg.settings(scale, 2),
    )
}

/// `|∫ ∂²p/∂θ² da|`, zero when the support does not move with θ.
pub fn regularity_residual(dist: &EpiDistribution, cfg: &NumericsConfig) -> Result<f64> {
    let (theta, a0) = (dist.mean_demand, dist.a0);
    let h = cfg.fd_step_theta * dist.gap();
    let scale = 1.0 / (dist.gap() * dist.gap());
    let v = integrate_a(
        dist,
        |a| theta_derivatives(|t| family_pdf(t, a0, a), theta, h).2,
        &cfg.settings(scale, 2),
    )?;
    Ok(v.abs())
}

/// Structural information `Q = ½ ∫ (q ∂²θq − (∂θq)²) da` and `|I + Q|`.
pub fn structural_principle(dist: &EpiDistribution, cfg: &NumericsConfig) -> Result<(f64, f64)> {
    let (theta, a0) = (dist.mean_demand, dist.a0);
    let h = cfg.fd_step_theta * dist.gap();
    let scale = 1.0 / (dist.gap() * dist.gap());
    let q_value = integrate_a(
        dist,
        |a| {
            let (q, dq, d2q) = theta_derivatives(|t| family_amplitude(t, a0, a), theta, h);
            0.5 * (q * d2q - dq * dq)
        },
        &cfg.settings(scale, 2),
    )?;
    let information = fisher_metric_form(dist, cfg)?;
    Ok((q_value, (information + KAPPA * q_value).abs()))
}

fn second_derivative<F: Fn(f64) -> f64>(q: &F, x: f64, mode: Derivatives, alpha: f64) -> f64 {
    match mode {
        Derivatives::Analytic => alpha * alpha * q(x),
        Derivatives::FiniteDifference(h) => (q(x + h) - 2.0 * q(x) + q(x - h)) / (h * h),
    }
}

/// `max |k_a|` over the grid, with `k_a = −½ q q″ + ¼ q² q̃F` and `q̃F = 2α²`.
pub fn pointwise_information_density(dist: &EpiDistribution, cfg: &NumericsConfig, mode: Derivatives) -> f64 {
    let q = |x: f64| amplitude_ext(dist, x);
    let qtf = 2.0 * dist.alpha * dist.alpha;
    cfg.grid(dist)
        .map(|x| {
            let qx = q(x);
            let d2q = second_derivative(&q, x, mode, dist.alpha);
            (-0.5 * qx * d2q + 0.25 * qx * qx * qtf).abs()
        })
        .fold(0.0, f64::max)
}

/// `max |q″ − α² q|` over the grid.
pub fn generating_equation_residual(dist: &EpiDistribution, cfg: &NumericsConfig, mode: Derivatives) -> f64 {
    let q = |x: f64| amplitude_ext(dist, x);
    let a2 = dist.alpha * dist.alpha;
    cfg.grid(dist)
        .map(|x| (second_derivative(&q, x, mode, dist.alpha) - a2 * q(x)).abs())
        .fold(0.0, f64::max)
}

/// `max |q″ − ½ d(½ q² q̃F)/dq|` over the grid for an arbitrary trial
/// amplitude, with `q̃F = 2α²` held constant in `q`. Second derivatives use
/// central differences with step `h`.
pub fn euler_lagrange_residual_of<F: Fn(f64) -> f64>(dist: &EpiDistribution, cfg: &NumericsConfig, q: F, h: f64) -> f64 {
    let qtf = 2.0 * dist.alpha * dist.alpha;
    cfg.grid(dist)
        .map(|x| {
            let qx = q(x);
            let lhs = (q(x + h) - 2.0 * qx + q(x - h)) / (h * h);
            // d(½ q² q̃F)/dq = q q̃F
            let rhs = 0.5 * (qx * qtf);
            (lhs - rhs).abs()
        })
        .fold(0.0, f64::max)
}

/// Euler–Lagrange residual at the solution amplitude.
pub fn euler_lagrange_residual(dist: &EpiDistribution, cfg: &NumericsConfig) -> f64 {
    let h = cfg.fd_step_x * dist.gap();
    euler_lagrange_residual_of(dist, cfg, |x| amplitude_ext(dist, x), h)
}

/// `(mean, stddev/mean)` of `q̃F = 2q″/q` over the grid, analytic derivatives.
pub fn recovered_qtilde(dist: &EpiDistribution, cfg: &NumericsConfig) -> (f64, f64) {
    let values: Vec<f64> = cfg
        .grid(dist)
        .map(|x| {
            let q = amplitude_ext(dist, x);
            2.0 * (dist.alpha * dist.alpha * q) / q
        })
        .collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt() / mean)
}

/// Surface term `q(∞)q′(∞) − q(x_min)q′(x_min)`; the term at infinity is
/// evaluated at the far end of the quadrature domain.
pub fn boundary_constant(dist: &EpiDistribution) -> f64 {
    let x_min = dist.x_min();
    let x_far = x_min + QUADRATURE_WIDTHS * dist.gap();
    let qq = |x: f64| {
        let q = amplitude_ext(dist, x);
        q * (-dist.alpha * q)
    };
    qq(x_far) - qq(x_min)
}

/// `(∫ q′² dx, c_a − ∫ q q″ dx)` by quadrature with analytic derivatives.
pub fn boundary_identity(dist: &EpiDistribution, cfg: &NumericsConfig) -> Result<(f64, f64)> {
    let scale = 1.0 / (dist.gap() * dist.gap());
    let settings = cfg.settings(scale, 0);
    let a = dist.alpha;
    let lhs = integrate_x(dist, |x| (a * amplitude_ext(dist, x)).powi(2), &settings)?;
    let cross = integrate_x(dist, |x| a * a * amplitude_ext(dist, x).powi(2), &settings)?;
    Ok((lhs, boundary_constant(dist) - cross))
}

/// `residual(h)/residual(h/2)` of the finite-difference generating equation;
/// about 4 for a second-order scheme.
pub fn convergence_ratio(dist: &EpiDistribution, cfg: &NumericsConfig, h: f64) -> f64 {
    generating_equation_residual(dist, cfg, Derivatives::FiniteDifference(h))
        / generating_equation_residual(dist, cfg, Derivatives::FiniteDifference(0.5 * h))
}

pub fn verify(dist: &EpiDistribution, cfg: &NumericsConfig) -> Result<PrincipleReport> {
    cfg.check()?;
    let fisher_metric = fisher_metric_form(dist, cfg)?;
    let fisher_statistical = fisher_statistical(dist, cfg)?;
    let fisher_kinematical = fisher_kinematical(dist, cfg)?;
    let (structural_q, structural_residual) = structural_principle(dist, cfg)?;
    let regularity_residual = regularity_residual(dist, cfg)?;
    let h = cfg.fd_step_x * dist.gap();
    let (qtilde_value, qtilde_spread) = recovered_qtilde(dist, cfg);
    let (lhs, rhs) = boundary_identity(dist, cfg)?;
    Ok(PrincipleReport {
        mean_demand: dist.mean_demand,
        a0: dist.a0,
        alpha: dist.alpha,
        fisher_expected: 1.0 / (dist.gap() * dist.gap()),
        fisher_metric,
        fisher_statistical,
        fisher_kinematical,
        structural_q,
        structural_residual,
        regularity_residual,
        epi_residual_pointwise: pointwise_information_density(dist, cfg, Derivatives::FiniteDifference(h)),
        generating_residual: generating_equation_residual(dist, cfg, Derivatives::FiniteDifference(h)),
        euler_lagrange_residual: euler_lagrange_residual(dist, cfg),
        qtilde_value,
        qtilde_spread,
        boundary_constant: boundary_constant(dist),
        boundary_identity_residual: (lhs - rhs).abs(),
        kappa: KAPPA,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(m: f64, a0: f64) -> EpiDistribution {
        EpiDistribution::new(m, a0).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn metric_form_matches_closed_form() {
        let cfg = NumericsConfig::default();
        let i = fisher_metric_form(&dist(135.0, 0.0), &cfg).unwrap();
        assert!(rel(i, 5.486_968_449_931_413e-5) < 1e-4, "{i}");
        let i = fisher_metric_form(&dist(2.0, 1.0), &cfg).unwrap();
        assert!(rel(i, 1.0) < 1e-4);
    }

    #[test]
    fn metric_form_scale_covariance() {
        let cfg = NumericsConfig::default();
        let base = fisher_metric_form(&dist(2.0, 0.0), &cfg).unwrap();
        for k in [3.0, 10.0, 70.0] {
            let scaled = fisher_metric_form(&dist(2.0 * k, 0.0), &cfg).unwrap();
            assert!(rel(scaled, base / (k * k)) < 1e-8);
        }
    }

    #[test]
    fn kinematical_form() {
        let cfg = NumericsConfig::default();
        for (m, a0, expected) in [(135.0, 0.0, 1.0 / 135f64.powi(2)), (2.0, 1.0, 1.0)] {
            let d = dist(m, a0);
            let i = fisher_kinematical(&d, &cfg).unwrap();
            assert!(rel(i, expected) < 1e-6, "{i}");
            assert!(rel(i, fisher_metric_form(&d, &cfg).unwrap()) < 1e-4);
        }
    }

    #[test]
    fn statistical_form_and_regularity() {
        let cfg = NumericsConfig::default();
        for (m, a0, expected) in [(135.0, 0.0, 1.0 / 135f64.powi(2)), (2.0, 1.0, 1.0)] {
            let d = dist(m, a0);
            let i = fisher_statistical(&d, &cfg).unwrap();
            assert!(rel(i, expected) < 1e-3, "{i}");
            assert!(regularity_residual(&d, &cfg).unwrap() < 1e-6 * expected.max(1.0));
        }
    }

    #[test]
    fn structural_information_cancels_fisher() {
        let cfg = NumericsConfig::default();
        let (q, res) = structural_principle(&dist(135.0, 0.0), &cfg).unwrap();
        assert!(rel(q, -1.0 / 135f64.powi(2)) < 1e-3);
        assert!(res < 1e-3 / 135f64.powi(2));
        let (q, _) = structural_principle(&dist(2.0, 1.0), &cfg).unwrap();
        assert!(rel(q, -1.0) < 1e-3);
    }

    #[test]
    fn pointwise_density_vanishes() {
        let cfg = NumericsConfig::default();
        for d in [dist(135.0, 0.0), dist(2.0, 1.0)] {
            assert!(pointwise_information_density(&d, &cfg, Derivatives::Analytic) < 1e-12);
        }
        // Step halving quarters the finite-difference residual.
        let d = dist(135.0, 0.0);
        let h = 0.05 * d.gap();
        let r1 = pointwise_information_density(&d, &cfg, Derivatives::FiniteDifference(h));
        let r2 = pointwise_information_density(&d, &cfg, Derivatives::FiniteDifference(h / 2.0));
        assert!((3.5..=4.5).contains(&(r1 / r2)), "{}", r1 / r2);
    }

    #[test]
    fn generating_equation() {
        let cfg = NumericsConfig::default();
        for d in [dist(135.0, 0.0), dist(2.0, 1.0)] {
            assert_eq!(generating_equation_residual(&d, &cfg, Derivatives::Analytic), 0.0);
            let h = 1e-3 * d.gap();
            let r = generating_equation_residual(&d, &cfg, Derivatives::FiniteDifference(h));
            let q_max = 2.0 * (2.0 * d.alpha).sqrt();
            assert!(r < 1e-6 * q_max);
            let ratio = convergence_ratio(&d, &cfg, 0.05 * d.gap());
            assert!((3.5..=4.5).contains(&ratio), "{ratio}");
        }
    }

    #[test]
    fn euler_lagrange_matches_generating_residual() {
        let cfg = NumericsConfig::default();
        for d in [dist(135.0, 0.0), dist(2.0, 1.0)] {
            let h = cfg.fd_step_x * d.gap();
            let el = euler_lagrange_residual(&d, &cfg);
            let gen = generating_equation_residual(&d, &cfg, Derivatives::FiniteDifference(h));
            assert!((el - gen).abs() <= 1e-9 * gen, "{el} {gen}");
        }
    }

    #[test]
    fn euler_lagrange_detects_perturbation_linearly() {
        let cfg = NumericsConfig::default();
        let d = dist(135.0, 0.0);
        let h = 0.01 * d.gap();
        let eps = |e: f64| {
            euler_lagrange_residual_of(&d, &cfg, |x| amplitude_ext(&d, x) * (1.0 + e * (x - d.x_min()) / d.gap()), h)
        };
        let ratio = eps(2e-3) / eps(1e-3);
        assert!((ratio - 2.0).abs() < 0.05, "{ratio}");
    }

    #[test]
    fn qtilde_is_constant() {
        let cfg = NumericsConfig::default();
        for d in [dist(135.0, 0.0), dist(2.0, 1.0), dist(1000.0, 1.0)] {
            let (mean, spread) = recovered_qtilde(&d, &cfg);
            assert!(spread < 1e-8);
            assert!(rel(mean, 2.0 * d.alpha * d.alpha) < 1e-10);
        }
    }

    #[test]
    fn boundary_values() {
        let cfg = NumericsConfig::default();
        let d = dist(135.0, 0.0);
        assert!(rel(boundary_constant(&d), 1.097_393_689_986_282_6e-4) < 1e-10);
        assert!(rel(boundary_constant(&dist(2.0, 1.0)), 2.0) < 1e-10);
        let (lhs, rhs) = boundary_identity(&d, &cfg).unwrap();
        let four_alpha2 = 4.0 * d.alpha * d.alpha;
        assert!(rel(lhs, four_alpha2) < 1e-9);
        assert!(rel(rhs, four_alpha2) < 1e-9);
    }

    #[test]
    fn report_residuals_are_non_negative() {
        let r = verify(&dist(135.0, 0.0), &NumericsConfig::default()).unwrap();
        for v in [
            r.structural_residual,
            r.regularity_residual,
            r.epi_residual_pointwise,
            r.generating_residual,
            r.euler_lagrange_residual,
            r.boundary_identity_residual,
        ] {
            assert!(v >= 0.0);
        }
        assert_eq!(r.kappa, 1.0);
    }
}
