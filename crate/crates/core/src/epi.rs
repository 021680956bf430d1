//! The continuous productivity law: a shifted exponential on `[a0, ∞)` with
//! mean `D/n`, together with its probability amplitude.
//!
//! Amplitudes follow the `p = q²/4` convention, so `∫ q² = 4`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::g17;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpiDistribution {
    /// Expected productivity `D/n`.
    pub mean_demand: f64,
    /// Minimal productivity.
    pub a0: f64,
    /// Rate parameter with `2α = 1/(D/n − a0)`.
    pub alpha: f64,
}

/// Additive fluctuation `x_a = a − D/n`, bounded below by `a0 − D/n`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Displacement(f64);

impl Displacement {
    pub fn new(dist: &EpiDistribution, x: f64) -> Result<Self> {
        if x < dist.x_min() || x.is_nan() {
            return Err(Error::DomainError(format!(
                "displacement {x} lies below the support minimum {}",
                dist.x_min()
            )));
        }
        Ok(Self(x))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl EpiDistribution {
    pub fn new(mean_demand: f64, a0: f64) -> Result<Self> {
        if !(a0.is_finite() && a0 >= 0.0) {
            return Err(Error::invalid("a0", "minimal productivity must be finite and non-negative"));
        }
        if !(mean_demand.is_finite() && mean_demand > a0) {
            return Err(Error::DomainError(format!(
                "mean demand {mean_demand} must exceed the minimal productivity {a0}"
            )));
        }
        Ok(Self {
            mean_demand,
            a0,
            alpha: 0.5 / (mean_demand - a0),
        })
    }

    /// `D/n − a0`, the decay length of the density.
    pub fn gap(&self) -> f64 {
        self.mean_demand - self.a0
    }

    /// Lower end of the displacement support, `a0 − D/n`.
    pub fn x_min(&self) -> f64 {
        self.a0 - self.mean_demand
    }

    pub fn pdf(&self, a: f64) -> f64 {
        if a < self.a0 {
            return 0.0;
        }
        let s = self.gap();
        (-(a - self.a0) / s).exp() / s
    }

    /// `P(A > a)`.
    pub fn tail(&self, a: f64) -> f64 {
        if a < self.a0 {
            return 1.0;
        }
        (-(a - self.a0) / self.gap()).exp()
    }

    /// Positive branch of the amplitude, `2 s^{−1/2} exp(−(x + s)/(2s))` with
    /// `s = D/n − a0`.
    pub fn amplitude(&self, x: Displacement) -> f64 {
        self.amplitude_raw(x.0)
    }

    /// Amplitude without the support check; zero below `x_min`.
    pub(crate) fn amplitude_raw(&self, x: f64) -> f64 {
        if x < self.x_min() {
            return 0.0;
        }
        let s = self.gap();
        2.0 / s.sqrt() * (-(x + s) / (2.0 * s)).exp()
    }

    /// `d^k q/dx^k = (−α)^k q` inside the support.
    pub fn amplitude_derivative(&self, x: Displacement, order: u32) -> f64 {
        (-self.alpha).powi(order as i32) * self.amplitude(x)
    }

    /// `(mean, variance)`.
    pub fn moments(&self) -> (f64, f64) {
        (self.mean_demand, self.gap() * self.gap())
    }

    /// Inverse of the tail: the productivity `a` with `P(A > a) = u`.
    pub fn from_uniform(&self, u: f64) -> f64 {
        self.a0 - self.gap() * u.ln()
    }

    /// `count` inverse-transform variates.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Vec<f64> {
        (0..count)
            .map(|_| {
                // random() is in [0, 1); flip it to (0, 1].
                let u = 1.0 - rng.random::<f64>();
                self.from_uniform(u)
            })
            .collect()
    }

    /// CSV with columns `a,pdf,tail` over `grid`.
    pub fn curve_csv(&self, grid: &[f64]) -> String {
        let mut out = String::from("a,pdf,tail\n");
        for &a in grid {
            out.push_str(&format!("{},{},{}\n", g17(a), g17(self.pdf(a)), g17(self.tail(a))));
        }
        out
    }
}
