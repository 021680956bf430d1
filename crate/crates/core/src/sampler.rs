//! Metropolis sampling of occupation vectors on the constraint surface.
//!
//! The target is the multinomial weight `n!/∏ n_i!` restricted to vectors
//! with the prescribed worker count and output. Proposals move one worker up
//! and another down by the same productivity step, so both totals are
//! conserved exactly.

use std::collections::{BTreeMap, HashMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{Enumeration, IntegerLadder, LogFactorials};
use crate::error::{Error, Result};
use crate::model::OccupationVector;

/// Identifier of the generator driving every chain.
pub const RNG_ALGORITHM: &str = "chacha8/rand_chacha-0.9";

/// Instances with more feasible vectors than this skip the connectivity check.
pub const CONNECTIVITY_CHECK_LIMIT: usize = 100_000;

const BATCHES: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub steps: u64,
    pub burn_in: u64,
    pub seed: u64,
    pub thin: u64,
}

impl ChainConfig {
    pub fn check(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::invalid("steps", "must be positive"));
        }
        if self.thin == 0 {
            return Err(Error::invalid("thin", "must be positive"));
        }
        if self.burn_in >= self.steps {
            return Err(Error::invalid("burn_in", "must be smaller than steps"));
        }
        Ok(())
    }

    /// Number of states recorded after burn-in and thinning.
    pub fn recorded(&self) -> u64 {
        (self.steps - self.burn_in).div_ceil(self.thin)
    }
}

/// Seeded generator for chain `stream` of a run.
pub fn chain_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One worker moves `up_from → up_to` while another moves
/// `down_from → down_to`, with equal and opposite changes in productivity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairMove {
    pub up_from: usize,
    pub up_to: usize,
    pub down_from: usize,
    pub down_to: usize,
}

impl PairMove {
    pub fn apply(&self, counts: &mut [u64]) {
        counts[self.up_from] -= 1;
        counts[self.down_from] -= 1;
        counts[self.up_to] += 1;
        counts[self.down_to] += 1;
    }
}

/// All non-trivial conserving moves out of `counts`.
pub fn pair_moves(counts: &[u64], units: &[u64]) -> Vec<PairMove> {
    let mut moves = Vec::new();
    let g = units.len();
    for up_from in 0..g {
        if counts[up_from] == 0 {
            continue;
        }
        for up_to in up_from + 1..g {
            let step = units[up_to] - units[up_from];
            for down_from in 0..g {
                let available = counts[down_from] - u64::from(down_from == up_from);
                if available == 0 || units[down_from] < step {
                    continue;
                }
                let Ok(down_to) = units.binary_search(&(units[down_from] - step)) else {
                    continue;
                };
                // Swapping the two workers' sectors changes nothing.
                if up_to == down_from && down_to == up_from {
                    continue;
                }
                moves.push(PairMove {
                    up_from,
                    up_to,
                    down_from,
                    down_to,
                });
            }
        }
    }
    moves
}

/// Picks a conserving move uniformly from the feasible set and applies it;
/// returns `state` unchanged when no move exists.
pub fn propose_pair_move<R: Rng + ?Sized>(state: &OccupationVector, units: &[u64], rng: &mut R) -> OccupationVector {
    let moves = pair_moves(state.counts(), units);
    if moves.is_empty() {
        return state.clone();
    }
    let mut counts = state.counts().to_vec();
    moves[rng.random_range(0..moves.len())].apply(&mut counts);
    let total = state.total();
    OccupationVector::new(counts, total).expect("pair moves conserve workers")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVisit {
    pub state: OccupationVector,
    pub count: u64,
    pub frequency: f64,
    /// Batch-means standard error of `frequency`.
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub rng: String,
    pub seed: u64,
    pub steps: u64,
    pub samples: u64,
    pub accepted: u64,
    pub acceptance_rate: f64,
    pub mean_occupation: Vec<f64>,
    /// Visited states in lexicographic order.
    pub visits: Vec<StateVisit>,
    /// `Some` when the move graph was checked by enumeration.
    pub irreducible: Option<bool>,
    pub warnings: Vec<String>,
}

impl SampleSummary {
    pub fn frequency(&self, counts: &[u64]) -> f64 {
        self.visits
            .binary_search_by(|v| v.state.counts().cmp(counts))
            .map(|i| self.visits[i].frequency)
            .unwrap_or(0.0)
    }

    /// Pools two summaries, weighting by sample count. Standard errors are
    /// combined as for independent estimates.
    pub fn merge(&self, other: &SampleSummary) -> SampleSummary {
        let samples = self.samples + other.samples;
        let (wa, wb) = (
            self.samples as f64 / samples as f64,
            other.samples as f64 / samples as f64,
        );
        let mut pooled: BTreeMap<OccupationVector, (u64, f64)> = BTreeMap::new();
        for (v, w) in self.visits.iter().map(|v| (v, wa)).chain(other.visits.iter().map(|v| (v, wb))) {
            let e = pooled.entry(v.state.clone()).or_insert((0, 0.0));
            e.0 += v.count;
            e.1 += (w * v.std_error).powi(2);
        }
        let visits = pooled
            .into_iter()
            .map(|(state, (count, var))| StateVisit {
                state,
                count,
                frequency: count as f64 / samples as f64,
                std_error: var.sqrt(),
            })
            .collect();
        let steps = self.steps + other.steps;
        let accepted = self.accepted + other.accepted;
        let irreducible = match (self.irreducible, other.irreducible) {
            (Some(a), Some(b)) => Some(a && b),
            _ => None,
        };
        let mut warnings = self.warnings.clone();
        for w in &other.warnings {
            if !warnings.contains(w) {
                warnings.push(w.clone());
            }
        }
        SampleSummary {
            rng: self.rng.clone(),
            seed: self.seed,
            steps,
            samples,
            accepted,
            acceptance_rate: accepted as f64 / steps as f64,
            mean_occupation: self
                .mean_occupation
                .iter()
                .zip(&other.mean_occupation)
                .map(|(a, b)| wa * a + wb * b)
                .collect(),
            visits,
            irreducible,
            warnings,
        }
    }

    /// Per-state CSV with columns `state,frequency`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("state,frequency\n");
        for v in &self.visits {
            out.push_str(&v.state.key());
            out.push(',');
            out.push_str(&crate::format::g17(v.frequency));
            out.push('\n');
        }
        out
    }
}

/// Breadth-first check that the move graph over the feasible set is
/// connected. `None` when the set is too large to enumerate.
pub fn check_irreducible(ladder: &IntegerLadder, limit: usize) -> Option<bool> {
    let total = ladder.count_feasible(limit)?;
    let start = ladder.first_feasible()?;
    let mut seen: HashMap<Vec<u64>, ()> = HashMap::new();
    let mut queue = VecDeque::new();
    seen.insert(start.clone(), ());
    queue.push_back(start);
    while let Some(state) = queue.pop_front() {
        for m in pair_moves(&state, &ladder.units) {
            let mut next = state.clone();
            m.apply(&mut next);
            if !seen.contains_key(&next) {
                seen.insert(next.clone(), ());
                queue.push_back(next);
            }
        }
    }
    Some(seen.len() == total)
}

/// Adds `extra` into `into`, summing counts of repeated ids.
fn merge_counts(into: &mut Vec<(usize, u64)>, extra: Vec<(usize, u64)>) {
    for (id, c) in extra {
        match into.iter_mut().find(|(j, _)| *j == id) {
            Some(entry) => entry.1 += c,
            None => into.push((id, c)),
        }
    }
}

fn chain(ladder: &IntegerLadder, config: &ChainConfig, stream: u64, irreducible: Option<bool>) -> Result<SampleSummary> {
    config.check()?;
    let mut state = ladder.first_feasible().ok_or(Error::NoFeasibleState)?;
    let table = LogFactorials::new(ladder.workers);
    let mut rng = chain_rng(config.seed, stream);

    let mut moves = pair_moves(&state, &ladder.units);
    let mut log_weight = table.ln_multinomial(&state);

    let recorded = config.recorded();
    let batch_len = recorded.div_ceil(BATCHES as u64).max(1);
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut counts: Vec<u64> = Vec::new();
    let mut batches: Vec<Vec<(usize, u64)>> = Vec::new();
    let mut batch: HashMap<usize, u64> = HashMap::new();
    let mut in_batch = 0u64;
    let mut occupation_sum = vec![0f64; ladder.sectors()];
    let mut accepted = 0u64;
    let mut samples = 0u64;

    for step in 0..config.steps {
        if !moves.is_empty() {
            let m = moves[rng.random_range(0..moves.len())];
            let mut candidate = state.clone();
            m.apply(&mut candidate);
            let candidate_moves = pair_moves(&candidate, &ladder.units);
            let candidate_weight = table.ln_multinomial(&candidate);
            // Reverse proposal is 1/M(y) against 1/M(x) forward.
            let log_ratio = candidate_weight - log_weight + (moves.len() as f64).ln()
                - (candidate_moves.len() as f64).ln();
            if log_ratio >= 0.0 || rng.random::<f64>() < log_ratio.exp() {
                state = candidate;
                moves = candidate_moves;
                log_weight = candidate_weight;
                accepted += 1;
            }
        }
        debug_assert!(ladder.is_feasible(&state));

        if step >= config.burn_in && (step - config.burn_in).is_multiple_of(config.thin) {
            let next = index.len();
            let id = *index.entry(state.clone()).or_insert(next);
            if id == counts.len() {
                counts.push(0);
            }
            counts[id] += 1;
            *batch.entry(id).or_insert(0) += 1;
            for (acc, &n) in occupation_sum.iter_mut().zip(&state) {
                *acc += n as f64;
            }
            samples += 1;
            in_batch += 1;
            if in_batch == batch_len {
                batches.push(batch.drain().collect());
                in_batch = 0;
            }
        }
    }
    // A short trailing batch would bias the spread; fold it into the last one.
    if in_batch > 0 {
        let tail: Vec<(usize, u64)> = batch.drain().collect();
        match batches.last_mut() {
            Some(last) => merge_counts(last, tail),
            None => batches.push(tail),
        }
    }

    let mut states: Vec<(Vec<u64>, usize)> = index.into_iter().collect();
    states.sort();
    let mut batch_freqs = vec![vec![0f64; batches.len()]; counts.len()];
    for (b, entries) in batches.iter().enumerate() {
        let size: u64 = entries.iter().map(|(_, c)| c).sum();
        for &(id, c) in entries {
            batch_freqs[id][b] += c as f64 / size as f64;
        }
    }
    let visits = states
        .into_iter()
        .map(|(state, id)| {
            let frequency = counts[id] as f64 / samples as f64;
            let b = batch_freqs[id].len();
            let std_error = if b > 1 {
                let mean = batch_freqs[id].iter().sum::<f64>() / b as f64;
                let var = batch_freqs[id].iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (b - 1) as f64;
                (var / b as f64).sqrt()
            } else {
                0.0
            };
            StateVisit {
                state: OccupationVector::new(state, ladder.workers).expect("visited states are feasible"),
                count: counts[id],
                frequency,
                std_error,
            }
        })
        .collect();

    let mut warnings = Vec::new();
    match irreducible {
        None => warnings.push("irreducibility not checked: feasible set too large to enumerate".to_string()),
        Some(false) => warnings.push("move graph is not connected: frequencies cover one component only".to_string()),
        Some(true) => {}
    }
    Ok(SampleSummary {
        rng: RNG_ALGORITHM.to_string(),
        seed: config.seed,
        steps: config.steps,
        samples,
        accepted,
        acceptance_rate: accepted as f64 / config.steps as f64,
        mean_occupation: occupation_sum.iter().map(|s| s / samples as f64).collect(),
        visits,
        irreducible,
        warnings,
    })
}

/// Runs one chain started at the lexicographically first feasible vector.
pub fn run_chain(ladder: &IntegerLadder, config: &ChainConfig) -> Result<SampleSummary> {
    if ladder.first_feasible().is_none() {
        return Err(Error::NoFeasibleState);
    }
    let irreducible = check_irreducible(ladder, CONNECTIVITY_CHECK_LIMIT);
    chain(ladder, config, 0, irreducible)
}

/// Runs `chains` independent chains on separate generator streams of the same
/// seed, concurrently, and merges them in stream order.
pub fn run_chains(ladder: &IntegerLadder, config: &ChainConfig, chains: u64) -> Result<SampleSummary> {
    if chains == 0 {
        return Err(Error::invalid("chains", "must be positive"));
    }
    if ladder.first_feasible().is_none() {
        return Err(Error::NoFeasibleState);
    }
    let irreducible = check_irreducible(ladder, CONNECTIVITY_CHECK_LIMIT);
    let results: Vec<Result<SampleSummary>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..chains)
            .map(|s| scope.spawn(move || chain(ladder, config, s, irreducible)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("chain thread panicked")).collect()
    });
    let mut iter = results.into_iter();
    let mut merged = iter.next().expect("at least one chain")?;
    for r in iter {
        merged = merged.merge(&r?);
    }
    Ok(merged)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoodnessOfFit {
    /// Pearson statistic of the visit counts against the exact law.
    pub chi_square: f64,
    pub degrees_of_freedom: usize,
    /// Largest `|f − π|/se` with the binomial standard error `√(π(1−π)/N)`.
    pub max_z: f64,
    pub expected: Vec<f64>,
}

/// Compares sampled frequencies with the exact normalized weights.
pub fn goodness_of_fit(summary: &SampleSummary, exact: &Enumeration) -> GoodnessOfFit {
    let total: f64 = exact.states.iter().map(|s| s.log_weight).fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = exact.states.iter().map(|s| (s.log_weight - total).exp()).collect();
    let norm: f64 = weights.iter().sum();
    let n = summary.samples as f64;
    let mut chi_square = 0.0;
    let mut max_z: f64 = 0.0;
    let mut expected = Vec::with_capacity(weights.len());
    for (s, w) in exact.states.iter().zip(&weights) {
        let p = w / norm;
        expected.push(p);
        let f = summary.frequency(s.occupation.counts());
        chi_square += n * (f - p).powi(2) / p;
        let se = (p * (1.0 - p) / n).sqrt();
        if se > 0.0 {
            max_z = max_z.max((f - p).abs() / se);
        }
    }
    GoodnessOfFit {
        chi_square,
        degrees_of_freedom: exact.states.len().saturating_sub(1),
        max_z,
        expected,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::enumerate_feasible;

    fn occ(c: &[u64]) -> OccupationVector {
        OccupationVector::new(c.to_vec(), c.iter().sum()).unwrap()
    }

    fn targets(state: &[u64], units: &[u64]) -> Vec<Vec<u64>> {
        let mut out: Vec<Vec<u64>> = pair_moves(state, units)
            .into_iter()
            .map(|m| {
                let mut c = state.to_vec();
                m.apply(&mut c);
                c
            })
            .collect();
        out.sort();
        out.dedup();
        out
    }

    #[test]
    fn moves_from_center_state() {
        assert_eq!(targets(&[1, 2, 1], &[1, 2, 3]), vec![vec![0, 4, 0], vec![2, 0, 2]]);
    }

    #[test]
    fn unique_move_from_concentrated_state() {
        assert_eq!(targets(&[0, 2, 0], &[1, 2, 3]), vec![vec![1, 0, 1]]);
    }

    #[test]
    fn stuck_state_is_returned() {
        let mut rng = chain_rng(1, 0);
        let s = occ(&[0, 2]);
        assert_eq!(propose_pair_move(&s, &[1, 2], &mut rng), s);
    }

    #[test]
    fn proposals_conserve_totals() {
        let units = [1, 2, 3, 5, 8];
        let mut rng = chain_rng(7, 0);
        let mut s = occ(&[3, 1, 4, 1, 5]);
        let output = |c: &[u64]| c.iter().zip(&units).map(|(n, u)| n * u).sum::<u64>();
        let z = output(s.counts());
        for _ in 0..1000 {
            s = propose_pair_move(&s, &units, &mut rng);
            assert_eq!(s.total(), 14);
            assert_eq!(output(s.counts()), z);
        }
    }

    #[test]
    fn move_counts_are_symmetric() {
        // The reverse of every move is a move, so m(x→y) = m(y→x).
        let ladder = IntegerLadder::new(vec![1, 2, 3, 4], 6, 14).unwrap();
        let e = enumerate_feasible(&ladder, 10_000).unwrap();
        for s in &e.states {
            let x = s.occupation.counts();
            for m in pair_moves(x, &ladder.units) {
                let mut y = x.to_vec();
                m.apply(&mut y);
                let forward = pair_moves(x, &ladder.units)
                    .iter()
                    .filter(|m2| {
                        let mut z = x.to_vec();
                        m2.apply(&mut z);
                        z == y
                    })
                    .count();
                let backward = pair_moves(&y, &ladder.units)
                    .iter()
                    .filter(|m2| {
                        let mut z = y.clone();
                        m2.apply(&mut z);
                        z == x
                    })
                    .count();
                assert_eq!(forward, backward);
            }
        }
    }

    #[test]
    fn single_state_chain() {
        let ladder = IntegerLadder::new(vec![1, 2], 2, 4).unwrap();
        let config = ChainConfig {
            steps: 100,
            burn_in: 10,
            seed: 3,
            thin: 1,
        };
        let s = run_chain(&ladder, &config).unwrap();
        assert_eq!(s.visits.len(), 1);
        assert_eq!(s.visits[0].frequency, 1.0);
        assert_eq!(s.irreducible, Some(true));
    }

    #[test]
    fn empty_constraint_set() {
        let ladder = IntegerLadder::new(vec![2, 4], 2, 5).unwrap();
        let config = ChainConfig {
            steps: 10,
            burn_in: 0,
            seed: 0,
            thin: 1,
        };
        assert!(matches!(run_chain(&ladder, &config), Err(Error::NoFeasibleState)));
    }

    #[test]
    fn config_validation() {
        let bad = ChainConfig {
            steps: 10,
            burn_in: 10,
            seed: 0,
            thin: 1,
        };
        assert!(bad.check().is_err());
        let good = ChainConfig { burn_in: 2, thin: 3, ..bad };
        assert_eq!(good.recorded(), 3);
    }

    #[test]
    fn chains_are_deterministic() {
        let ladder = IntegerLadder::new(vec![1, 2, 3, 4], 8, 20).unwrap();
        let config = ChainConfig {
            steps: 5000,
            burn_in: 500,
            seed: 42,
            thin: 2,
        };
        let a = run_chain(&ladder, &config).unwrap();
        let b = run_chain(&ladder, &config).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let sum: f64 = a.visits.iter().map(|v| v.frequency).sum();
        assert!((sum - 1.0).abs() < 1e-12);
        let pooled = run_chains(&ladder, &config, 3).unwrap();
        let again = run_chains(&ladder, &config, 3).unwrap();
        assert_eq!(pooled, again);
        assert_eq!(pooled.samples, 3 * a.samples);
    }

    #[test]
    fn disconnected_move_graph_is_flagged() {
        // {2,3,3} and {1,1,6} share no conserving pair move.
        let ladder = IntegerLadder::new(vec![1, 2, 3, 6], 3, 8).unwrap();
        assert_eq!(check_irreducible(&ladder, 1000), Some(false));
        assert_eq!(targets(&[0, 1, 2, 0], &ladder.units), Vec::<Vec<u64>>::new());
        let config = ChainConfig {
            steps: 100,
            burn_in: 0,
            seed: 1,
            thin: 1,
        };
        let s = run_chain(&ladder, &config).unwrap();
        assert_eq!(s.irreducible, Some(false));
        assert_eq!(s.warnings.len(), 1);
    }

    #[test]
    fn small_instances_are_connected() {
        for (units, n, d) in [(vec![1, 2, 3], 4, 8), (vec![1, 2, 3, 4], 6, 14), (vec![1, 2, 3], 100, 200)] {
            let ladder = IntegerLadder::new(units, n, d).unwrap();
            assert_eq!(check_irreducible(&ladder, 10_000), Some(true));
        }
    }
}
