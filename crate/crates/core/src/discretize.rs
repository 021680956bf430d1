//! Binning the continuous law onto a sector ladder and comparing it with the
//! discrete Boltzmann occupation probabilities.
//!
//! Ladder bins are `[i·a0, (i+1)·a0)` for `i ≥ 1`; zero-minimum bins are
//! `[(i−1)·δa, i·δa)`. The off-by-one between the two conventions is
//! intentional and follows the integration limits of each case.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::g17;

/// Both PMFs are summed until they fall below this value.
pub const TRUNCATION_THRESHOLD: f64 = 1e-15;

fn check_ratio(r: f64) -> Result<()> {
    if !(r > 1.0) || !r.is_finite() {
        return Err(Error::DomainError(format!("ladder ratio r = {r} must exceed 1")));
    }
    Ok(())
}

/// Mass of the continuous law on `[i·a0, (i+1)·a0)` when `D/n = r·a0`:
/// `(1 − e^{−1/(r−1)}) e^{−(i−1)/(r−1)}`.
pub fn epi_binned_ladder(r: f64, i: u64) -> Result<f64> {
    check_ratio(r)?;
    if i == 0 {
        return Err(Error::DomainError("ladder bins start at i = 1".into()));
    }
    let k = 1.0 / (r - 1.0);
    Ok(-(-k).exp_m1() * (-((i - 1) as f64) * k).exp())
}

/// Mass on `[(i−1)·δa, i·δa)` for `a0 = 0` and `D/n = r̃·δa`:
/// `(e^{1/r̃} − 1) e^{−i/r̃}`.
pub fn epi_binned_zero_min(r_tilde: f64, i: u64) -> Result<f64> {
    if !(r_tilde > 0.0) || !r_tilde.is_finite() {
        return Err(Error::DomainError(format!("r_tilde = {r_tilde} must be positive")));
    }
    if i == 0 {
        return Err(Error::DomainError("bins start at i = 1".into()));
    }
    let k = 1.0 / r_tilde;
    Ok(k.exp_m1() * (-(i as f64) * k).exp())
}

/// Probability that a worker sits on rung `i` of the Boltzmann ladder,
/// `(1/(r−1)) ((r−1)/r)^i`.
pub fn aym_ladder_pmf(r: f64, i: u64) -> Result<f64> {
    check_ratio(r)?;
    if i == 0 {
        return Err(Error::DomainError("ladder rungs start at i = 1".into()));
    }
    // ((r−1)/r)^i = exp(i·ln(1 − 1/r))
    Ok((i as f64 * (-1.0 / r).ln_1p()).exp() / (r - 1.0))
}

/// Large-ratio approximations of the binned continuous law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Asymptotic {
    /// `(1/r + 1/(2r²)) (e^{−i/r} + 1/r)`, ladder bins.
    Ladder,
    /// `(1/r̃ + 1/(2r̃²)) e^{−i/r̃}`, zero-minimum bins.
    ZeroMinimum,
}

pub fn asymptotic_form(kind: Asymptotic, ratio: f64, i: u64) -> f64 {
    let lead = 1.0 / ratio + 0.5 / (ratio * ratio);
    let decay = (-(i as f64) / ratio).exp();
    match kind {
        Asymptotic::Ladder => lead * (decay + 1.0 / ratio),
        Asymptotic::ZeroMinimum => lead * decay,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonMetrics {
    pub r: f64,
    /// `½ Σ |P_epi(i) − P_aym(i)|` over the summed range.
    pub tv_distance: f64,
    pub max_abs: f64,
    /// Over sectors with `P_aym(i) ≥ 1e−12`.
    pub max_rel: f64,
    /// Last rung included in the sums.
    pub truncation_index: u64,
    /// Mass beyond `truncation_index`, from the closed-form geometric tails.
    pub discarded_epi: f64,
    pub discarded_aym: f64,
}

/// Compares the binned continuous law with the Boltzmann ladder PMF, summing
/// until both fall below [`TRUNCATION_THRESHOLD`] or `i_max` is reached.
pub fn compare(r: f64, i_max: u64) -> Result<ComparisonMetrics> {
    check_ratio(r)?;
    let mut tv = 0.0;
    let mut max_abs: f64 = 0.0;
    let mut max_rel: f64 = 0.0;
    let mut last = 0;
    for i in 1..=i_max.max(1) {
        let epi = epi_binned_ladder(r, i)?;
        let aym = aym_ladder_pmf(r, i)?;
        let diff = (epi - aym).abs();
        tv += diff;
        max_abs = max_abs.max(diff);
        if aym >= 1e-12 {
            max_rel = max_rel.max(diff / aym);
        }
        last = i;
        if epi < TRUNCATION_THRESHOLD && aym < TRUNCATION_THRESHOLD {
            break;
        }
    }
    // Tail masses beyond `last`: e^{−last/(r−1)} and ((r−1)/r)^last.
    let discarded_epi = (-(last as f64) / (r - 1.0)).exp();
    let discarded_aym = (last as f64 * (-1.0 / r).ln_1p()).exp();
    Ok(ComparisonMetrics {
        r,
        tv_distance: 0.5 * tv,
        max_abs,
        max_rel,
        truncation_index: last,
        discarded_epi,
        discarded_aym,
    })
}

/// Default cap on the rung index for [`compare`] sweeps.
pub fn default_i_max(r: f64) -> u64 {
    // ln(1e15) ≈ 34.5 decay lengths, with margin.
    ((40.0 * r).ceil() as u64).max(1000)
}

/// CSV with columns `r,tv,max_abs,max_rel`, rows sorted by `r`.
pub fn sweep_csv(metrics: &[ComparisonMetrics]) -> String {
    let mut rows: Vec<&ComparisonMetrics> = metrics.iter().collect();
    rows.sort_by(|a, b| a.r.total_cmp(&b.r));
    let mut out = String::from("r,tv,max_abs,max_rel\n");
    for m in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            g17(m.r),
            g17(m.tv_distance),
            g17(m.max_abs),
            g17(m.max_rel)
        ));
    }
    out
}
