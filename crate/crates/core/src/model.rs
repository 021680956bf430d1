//! Domain types shared by the discrete and continuous formulations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An economy with `g` productivity sectors, a worker count and an exogenous
/// aggregate demand.
///
/// Field names on the wire are `levels`, `n`, `D` and `a0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EconomyParams {
    /// Sector productivity levels `a_i`, strictly increasing.
    pub levels: Vec<f64>,
    /// Number of workers. Integral in discrete paths.
    pub n: f64,
    /// Aggregate demand, in productivity × workers.
    #[serde(rename = "D")]
    pub demand: f64,
    /// Minimal productivity.
    #[serde(default)]
    pub a0: f64,
}

impl EconomyParams {
    pub fn new(levels: Vec<f64>, n: f64, demand: f64, a0: f64) -> Self {
        Self {
            levels,
            n,
            demand,
            a0,
        }
    }

    /// Ladder `a_i = i·a0` for `i = 1..=g`.
    pub fn ladder(a0: f64, g: usize, n: f64, demand: f64) -> Self {
        let levels = (1..=g).map(|i| i as f64 * a0).collect();
        Self::new(levels, n, demand, a0)
    }

    pub fn sectors(&self) -> usize {
        self.levels.len()
    }

    pub fn mean_demand(&self) -> f64 {
        self.demand / self.n
    }

    /// Demand bounds `[min·n, max·n]`.
    pub fn feasible_interval(&self) -> (f64, f64) {
        let lo = self.levels.first().copied().unwrap_or(f64::NAN);
        let hi = self.levels.last().copied().unwrap_or(f64::NAN);
        (lo * self.n, hi * self.n)
    }

    /// True when `D` sits on either end of the feasible interval.
    pub fn is_boundary(&self) -> bool {
        let (lo, hi) = self.feasible_interval();
        self.demand == lo || self.demand == hi
    }

    /// Worker count as an exact integer, for paths that need one.
    pub fn worker_count(&self) -> Result<u64> {
        integral(self.n).ok_or_else(|| Error::invalid("n", format!("{} is not a whole number", self.n)))
    }

    pub fn validate(self) -> Result<Self> {
        self.check()?;
        Ok(self)
    }

    pub fn check(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::EmptyLadder);
        }
        if let Some(index) = self.levels.iter().position(|a| !a.is_finite()) {
            return Err(Error::invalid("levels", format!("level {index} is not finite")));
        }
        if let Some(index) = self.levels.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::NonMonotoneLevels { index: index + 1 });
        }
        if self.levels[0] < 0.0 {
            return Err(Error::invalid("levels", "productivity must be non-negative"));
        }
        if !(self.n.is_finite() && self.n > 0.0) {
            return Err(Error::invalid("n", "worker count must be positive"));
        }
        if !(self.demand.is_finite() && self.demand > 0.0) {
            return Err(Error::invalid("D", "aggregate demand must be positive"));
        }
        if !(self.a0.is_finite() && self.a0 >= 0.0) {
            return Err(Error::invalid("a0", "minimal productivity must be non-negative"));
        }
        let (lower, upper) = self.feasible_interval();
        if self.demand < lower || self.demand > upper {
            return Err(Error::InfeasibleDemand {
                demand: self.demand,
                lower,
                upper,
            });
        }
        Ok(())
    }
}

pub(crate) fn integral(x: f64) -> Option<u64> {
    (x.is_finite() && x >= 0.0 && x.fract() == 0.0 && x < 2f64.powi(63)).then_some(x as u64)
}

/// Integer allocation of workers across sectors.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OccupationVector(Vec<u64>);

impl OccupationVector {
    /// Wraps `counts`, checking they add up to the declared worker count.
    pub fn new(counts: Vec<u64>, declared_total: u64) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total != declared_total {
            return Err(Error::invalid(
                "counts",
                format!("counts sum to {total}, expected {declared_total}"),
            ));
        }
        Ok(Self(counts))
    }

    pub fn counts(&self) -> &[u64] {
        &self.0
    }

    pub fn into_counts(self) -> Vec<u64> {
        self.0
    }

    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }

    /// `Z = Σ a_i n_i`.
    pub fn output(&self, levels: &[f64]) -> f64 {
        self.0.iter().zip(levels).map(|(&n, &a)| n as f64 * a).sum()
    }

    /// Output of each sector, `z_i = a_i n_i`.
    pub fn sector_outputs(&self, levels: &[f64]) -> Vec<f64> {
        self.0.iter().zip(levels).map(|(&n, &a)| n as f64 * a).collect()
    }

    /// Counts joined with `;`, the per-state key used in CSV dumps.
    pub fn key(&self) -> String {
        let parts: Vec<String> = self.0.iter().map(u64::to_string).collect();
        parts.join(";")
    }
}

impl From<OccupationVector> for Vec<u64> {
    fn from(v: OccupationVector) -> Self {
        v.0
    }
}

/// Dimensionless demand-per-worker ratios used when binning the continuous
/// law onto a sector ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderRatio {
    /// `(D/n)/a0` for the ladder with sector width `a0`.
    pub r: Option<f64>,
    /// `(D/n)/δa` for the zero-minimum binning.
    pub r_tilde: Option<f64>,
    /// Bin width of the zero-minimum binning.
    pub bin_width: Option<f64>,
}

impl LadderRatio {
    pub fn ladder(mean_demand: f64, a0: f64) -> Result<Self> {
        if !(a0 > 0.0) {
            return Err(Error::invalid("a0", "ladder ratio needs a0 > 0"));
        }
        let r = mean_demand / a0;
        if !(r > 1.0) {
            return Err(Error::DomainError(format!("ladder ratio r = {r} must exceed 1")));
        }
        Ok(Self {
            r: Some(r),
            r_tilde: None,
            bin_width: None,
        })
    }

    pub fn zero_minimum(mean_demand: f64, bin_width: f64) -> Result<Self> {
        if !(bin_width > 0.0) {
            return Err(Error::invalid("bin_width", "must be positive"));
        }
        let r_tilde = mean_demand / bin_width;
        if !(r_tilde > 0.0) {
            return Err(Error::DomainError(format!("r_tilde = {r_tilde} must be positive")));
        }
        Ok(Self {
            r: None,
            r_tilde: Some(r_tilde),
            bin_width: Some(bin_width),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_mean_demand_is_valid() {
        let p = EconomyParams::new(vec![1.0, 2.0, 3.0], 3.0, 6.0, 1.0);
        assert_eq!(p.clone().validate().unwrap(), p);
    }

    #[test]
    fn demand_above_hull_is_infeasible() {
        let p = EconomyParams::new(vec![1.0, 2.0, 3.0], 3.0, 10.0, 1.0);
        assert!(matches!(p.validate(), Err(Error::InfeasibleDemand { .. })));
    }

    #[test]
    fn unordered_levels_are_rejected() {
        let p = EconomyParams::new(vec![2.0, 1.0, 3.0], 3.0, 6.0, 1.0);
        assert!(matches!(p.validate(), Err(Error::NonMonotoneLevels { index: 1 })));
        let p = EconomyParams::new(vec![1.0, 1.0], 3.0, 3.0, 1.0);
        assert!(matches!(p.validate(), Err(Error::NonMonotoneLevels { .. })));
    }

    #[test]
    fn empty_ladder() {
        let p = EconomyParams::new(vec![], 3.0, 6.0, 1.0);
        assert!(matches!(p.validate(), Err(Error::EmptyLadder)));
    }

    #[test]
    fn boundary_demand_is_valid() {
        let p = EconomyParams::new(vec![1.0, 2.0], 2.0, 4.0, 1.0);
        assert!(p.is_boundary());
        p.validate().unwrap();
    }

    #[test]
    fn json_field_names() {
        let p = EconomyParams::new(vec![1.0, 2.0, 3.0], 3.0, 6.0, 1.0);
        let v: serde_json::Value = serde_json::to_value(&p).unwrap();
        assert_eq!(v["D"], 6.0);
        assert_eq!(v["n"], 3.0);
        assert_eq!(v["a0"], 1.0);
        let back: EconomyParams = serde_json::from_value(v).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn occupation_totals() {
        let v = OccupationVector::new(vec![1, 2, 1], 4).unwrap();
        assert_eq!(v.output(&[1.0, 2.0, 3.0]), 8.0);
        assert_eq!(v.key(), "1;2;1");
        assert!(OccupationVector::new(vec![1, 2, 1], 5).is_err());
    }

    #[test]
    fn ladder_ratio_domain() {
        assert_eq!(LadderRatio::ladder(2.0, 1.0).unwrap().r, Some(2.0));
        assert!(LadderRatio::ladder(1.0, 1.0).is_err());
        assert_eq!(LadderRatio::zero_minimum(10.0, 0.5).unwrap().r_tilde, Some(20.0));
    }

    proptest::proptest! {
        #[test]
        fn validate_is_idempotent(
            mut levels in proptest::collection::vec(0.0f64..100.0, 1..6),
            n in 0.5f64..50.0,
            t in 0.0f64..1.0,
        ) {
            levels.sort_by(f64::total_cmp);
            levels.dedup();
            let d = n * (levels[0] + t * (levels[levels.len() - 1] - levels[0]));
            let p = EconomyParams::new(levels, n, d.max(1e-9), 0.0);
            match p.clone().validate() {
                Ok(v) => proptest::prop_assert_eq!(v.clone().validate().unwrap(), v),
                Err(_) => proptest::prop_assert!(p.validate().is_err()),
            }
        }

        #[test]
        fn occupation_sum_is_exact(counts in proptest::collection::vec(0u64..1_000_000, 0..10)) {
            let total = counts.iter().sum();
            let v = OccupationVector::new(counts, total).unwrap();
            proptest::prop_assert_eq!(v.total(), total);
        }
    }
}
