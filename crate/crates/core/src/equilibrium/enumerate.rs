//! Exact small-instance oracles: multinomial weights and exhaustive
//! enumeration of the integer constraint surface.

use std::ops::ControlFlow;

use num_bigint::BigUint;
use serde::{Serialize, Serializer};

use super::solve_boltzmann;
use crate::error::{Error, Result};
use crate::model::{integral, EconomyParams, OccupationVector};

pub const DEFAULT_ENUMERATION_CAP: usize = 1_000_000;

/// Below this worker count the Stirling approximation is not trusted.
const STIRLING_MIN_WORKERS: u64 = 20;

/// Table of `ln k!` built by summing `ln j`.
#[derive(Debug, Clone)]
pub struct LogFactorials(Vec<f64>);

impl LogFactorials {
    pub fn new(max: u64) -> Self {
        let mut table = Vec::with_capacity(max as usize + 1);
        table.push(0.0);
        let mut acc = 0.0;
        for k in 1..=max {
            acc += (k as f64).ln();
            table.push(acc);
        }
        Self(table)
    }

    pub fn ln_factorial(&self, k: u64) -> f64 {
        self.0[k as usize]
    }

    /// `ln(n!/∏ n_i!)` with `n = Σ n_i`.
    pub fn ln_multinomial(&self, counts: &[u64]) -> f64 {
        let n: u64 = counts.iter().sum();
        self.ln_factorial(n) - counts.iter().map(|&k| self.ln_factorial(k)).sum::<f64>()
    }
}

/// `ln(n!/∏ n_i!)`. The constant `p^n` factor of the occupation law is
/// omitted since it is common to every vector with the same `n`.
pub fn log_multinomial_weight(occupation: &OccupationVector) -> f64 {
    LogFactorials::new(occupation.total()).ln_multinomial(occupation.counts())
}

/// `n!/∏ n_i!` as an exact integer, built from a product of binomials.
pub fn exact_multinomial(counts: &[u64]) -> BigUint {
    let mut result = BigUint::from(1u32);
    let mut remaining: u64 = counts.iter().sum();
    for &k in counts {
        // C(remaining, k), exact at each step of the running product.
        let mut binom = BigUint::from(1u32);
        for j in 0..k {
            binom *= remaining - j;
            binom /= j + 1;
        }
        result *= binom;
        remaining -= k;
    }
    result
}

/// A ladder whose levels and demand are integer multiples of `unit`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegerLadder {
    pub units: Vec<u64>,
    pub workers: u64,
    pub demand: u64,
    pub unit: f64,
}

impl IntegerLadder {
    pub fn new(units: Vec<u64>, workers: u64, demand: u64) -> Result<Self> {
        if units.is_empty() {
            return Err(Error::EmptyLadder);
        }
        if let Some(i) = units.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::NonMonotoneLevels { index: i + 1 });
        }
        Ok(Self {
            units,
            workers,
            demand,
            unit: 1.0,
        })
    }

    /// Expresses `params` in multiples of `unit`, defaulting to `a0` (or 1 when
    /// `a0 = 0`).
    pub fn from_params(params: &EconomyParams, unit: Option<f64>) -> Result<Self> {
        params.check()?;
        let unit = unit.unwrap_or(if params.a0 > 0.0 { params.a0 } else { 1.0 });
        if !(unit > 0.0) {
            return Err(Error::invalid("unit", "must be positive"));
        }
        let to_units = |x: f64| {
            let q = x / unit;
            let rounded = q.round();
            ((q - rounded).abs() <= 1e-9 * rounded.max(1.0))
                .then(|| integral(rounded))
                .flatten()
        };
        let units: Option<Vec<u64>> = params.levels.iter().map(|&a| to_units(a)).collect();
        let units = units.ok_or(Error::NonIntegerLadder { unit })?;
        let demand = to_units(params.demand).ok_or(Error::NonIntegerLadder { unit })?;
        let workers = params.worker_count()?;
        let mut ladder = Self::new(units, workers, demand)?;
        ladder.unit = unit;
        Ok(ladder)
    }

    pub fn sectors(&self) -> usize {
        self.units.len()
    }

    pub fn is_feasible(&self, counts: &[u64]) -> bool {
        counts.len() == self.units.len()
            && counts.iter().sum::<u64>() == self.workers
            && counts.iter().zip(&self.units).map(|(&n, &u)| n * u).sum::<u64>() == self.demand
    }

    /// Depth-first walk over every feasible vector in lexicographic order.
    pub(crate) fn walk<B>(&self, mut visit: impl FnMut(&[u64]) -> ControlFlow<B>) -> ControlFlow<B> {
        let mut counts = vec![0u64; self.units.len()];
        self.walk_from(0, self.workers, self.demand, &mut counts, &mut visit)
    }

    fn walk_from<B>(
        &self,
        sector: usize,
        workers: u64,
        demand: u64,
        counts: &mut [u64],
        visit: &mut impl FnMut(&[u64]) -> ControlFlow<B>,
    ) -> ControlFlow<B> {
        let last = self.units.len() - 1;
        let lowest = u128::from(self.units[sector]) * u128::from(workers);
        let highest = u128::from(self.units[last]) * u128::from(workers);
        let demand_wide = u128::from(demand);
        if demand_wide < lowest || demand_wide > highest {
            return ControlFlow::Continue(());
        }
        if sector == last {
            counts[sector] = workers;
            let out = visit(counts);
            counts[sector] = 0;
            return out;
        }
        let unit = self.units[sector];
        for k in 0..=workers {
            let used = u128::from(k) * u128::from(unit);
            if used > demand_wide {
                break;
            }
            counts[sector] = k;
            self.walk_from(sector + 1, workers - k, demand - used as u64, counts, visit)?;
        }
        counts[sector] = 0;
        ControlFlow::Continue(())
    }

    /// Lexicographically first feasible vector.
    pub fn first_feasible(&self) -> Option<Vec<u64>> {
        match self.walk(|c| ControlFlow::Break(c.to_vec())) {
            ControlFlow::Break(v) => Some(v),
            ControlFlow::Continue(()) => None,
        }
    }

    /// Number of feasible vectors, or `None` once it exceeds `cap`.
    pub fn count_feasible(&self, cap: usize) -> Option<usize> {
        let mut count = 0usize;
        match self.walk(|_| {
            count += 1;
            if count > cap {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        }) {
            ControlFlow::Break(()) => None,
            ControlFlow::Continue(()) => Some(count),
        }
    }
}

fn as_decimal<S: Serializer>(w: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&w.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightedState {
    pub occupation: OccupationVector,
    pub log_weight: f64,
    #[serde(serialize_with = "as_decimal")]
    pub weight: BigUint,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Enumeration {
    /// All feasible vectors in lexicographic order.
    pub states: Vec<WeightedState>,
    /// Index into `states` of the heaviest vector (ties go to the
    /// lexicographically smallest).
    pub argmax: Option<usize>,
}

impl Enumeration {
    pub fn argmax_state(&self) -> Option<&WeightedState> {
        self.argmax.map(|i| &self.states[i])
    }

    pub fn total_weight(&self) -> BigUint {
        self.states.iter().map(|s| &s.weight).sum()
    }
}

/// Lists every integer vector with `Σ n_i = n` and `Σ u_i n_i = D`.
pub fn enumerate_feasible(ladder: &IntegerLadder, cap: usize) -> Result<Enumeration> {
    let table = LogFactorials::new(ladder.workers);
    let mut states = Vec::new();
    let flow = ladder.walk(|counts| {
        if states.len() == cap {
            return ControlFlow::Break(());
        }
        states.push(WeightedState {
            occupation: OccupationVector::new(counts.to_vec(), ladder.workers).expect("walk conserves workers"),
            log_weight: table.ln_multinomial(counts),
            weight: exact_multinomial(counts),
        });
        ControlFlow::Continue(())
    });
    if flow.is_break() {
        return Err(Error::InstanceTooLarge { cap });
    }
    let mut argmax: Option<usize> = None;
    for (i, s) in states.iter().enumerate() {
        // States arrive in lexicographic order, so strict > keeps the first.
        if argmax.is_none_or(|j| s.weight > states[j].weight) {
            argmax = Some(i);
        }
    }
    Ok(Enumeration { states, argmax })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StirlingReport {
    pub exact_argmax: OccupationVector,
    pub continuous: Vec<f64>,
    /// Feasible vector nearest to `continuous` in L1.
    pub projected: OccupationVector,
    pub l1_distance: f64,
    pub coincide: bool,
    pub max_log_weight: f64,
    pub projected_log_weight: f64,
    pub log_weight_gap: f64,
    /// `log_weight_gap / max_log_weight`, zero when the maximum is zero.
    pub relative_gap: f64,
    /// Set when `n` is too small for the Stirling approximation.
    pub small_n_caveat: bool,
}

/// Compares the exact argmax with the real-valued Boltzmann solution
/// projected onto the feasible integer set.
pub fn stirling_consistency(params: &EconomyParams, unit: Option<f64>, cap: usize) -> Result<StirlingReport> {
    let ladder = IntegerLadder::from_params(params, unit)?;
    let enumeration = enumerate_feasible(&ladder, cap)?;
    let best = enumeration.argmax_state().ok_or(Error::NoFeasibleState)?.clone();
    let tol = 1e-9 * params.demand.max(params.n).max(1.0);
    let continuous = solve_boltzmann(params, tol)?.occupations;

    let l1 = |s: &WeightedState| -> f64 {
        s.occupation
            .counts()
            .iter()
            .zip(&continuous)
            .map(|(&k, x)| (k as f64 - x).abs())
            .sum()
    };
    let mut nearest = &enumeration.states[0];
    let mut nearest_distance = l1(nearest);
    for s in &enumeration.states[1..] {
        let d = l1(s);
        if d < nearest_distance {
            nearest = s;
            nearest_distance = d;
        }
    }
    let gap = best.log_weight - nearest.log_weight;
    Ok(StirlingReport {
        coincide: nearest.occupation == best.occupation,
        exact_argmax: best.occupation.clone(),
        continuous: continuous.clone(),
        projected: nearest.occupation.clone(),
        l1_distance: nearest_distance,
        max_log_weight: best.log_weight,
        projected_log_weight: nearest.log_weight,
        log_weight_gap: gap,
        relative_gap: if best.log_weight > 0.0 { gap / best.log_weight } else { 0.0 },
        small_n_caveat: ladder.workers < STIRLING_MIN_WORKERS,
    })
}
