//! Exhaustive maximum-likelihood decoding over all K-subsets.
//!
//! The likelihood of a candidate set depends on the outcome only through a
//! handful of per-test counts (see [`TestCounts`]). Both the scalar
//! [`log_likelihood`] and the bit-parallel scan in [`ml_decode`] reduce to the
//! same counts and share one scoring function, so equal counts always give
//! bit-identical scores and ties are detected by exact comparison.

use crate::combinatorics::choose;
use crate::error::{Error, Result};
use crate::model::{Codebook, DefectiveSet, NoiseModel, OutcomeVector};
use rayon::prelude::*;

/// Default cap on the number of candidate sets a decode may cover.
pub const DEFAULT_BUDGET: u128 = 100_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    /// First maximizer in lexicographic order.
    pub best_set: DefectiveSet,
    /// `log2 P(Y^T | X_S)` of `best_set`; `-inf` when every set is impossible.
    pub log_likelihood: f64,
    /// Another set attains the same finite maximum.
    pub tie: bool,
    /// The first set after `best_set` that attains the maximum.
    pub tied_with: Option<DefectiveSet>,
    /// Candidate sets scored explicitly. Sets containing an item that
    /// appears in a negative test are skipped when the channel makes them
    /// impossible.
    pub n_evaluated: u64,
}

impl DecodeResult {
    /// A trial errs when the decoder picks a wrong set or cannot separate
    /// the maximizer from another set.
    pub fn is_error(&self, truth: &DefectiveSet) -> bool {
        self.tie || self.best_set != *truth
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodeOptions {
    pub budget: u128,
    /// Split the scan into contiguous lexicographic ranges run on the
    /// current rayon pool. The result does not depend on this flag.
    pub parallel: bool,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        DecodeOptions {
            budget: DEFAULT_BUDGET,
            parallel: false,
        }
    }
}

/// Sufficient statistics of `(candidate, outcome)`. `c` is the number of
/// candidate items in a test.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TestCounts {
    /// Tests with `c = 0`, `Y = 1`.
    pub empty_positive: u64,
    /// Tests with `c = 0`, `Y = 0`.
    pub empty_negative: u64,
    /// Tests with `c > 0`, `Y = 0`.
    pub covered_negative: u64,
    /// Sum of `c` over tests with `Y = 0`.
    pub weight_negative: u64,
    /// `positive_by_count[c]` = tests with `Y = 1` holding exactly `c`
    /// candidate items, for `c ≥ 1` (index 0 unused).
    pub positive_by_count: Vec<u64>,
}

/// `count · log2(prob)`, with zero counts contributing nothing.
fn weighted_log(count: u64, log_prob: f64) -> f64 {
    if count == 0 {
        0.0
    } else {
        count as f64 * log_prob
    }
}

/// Per-channel log-probability tables.
#[derive(Debug, Clone)]
struct Scorer {
    noise: NoiseModel,
    /// `log2(1 - u^c)` for `c = 0..=K` under dilution.
    positive_log: Vec<f64>,
}

impl Scorer {
    fn new(noise: NoiseModel, k: usize) -> Self {
        let positive_log = match noise {
            NoiseModel::Dilution { u } => (0..=k).map(|c| (1.0 - u.powi(c as i32)).log2()).collect(),
            _ => Vec::new(),
        };
        Scorer { noise, positive_log }
    }

    fn score(&self, c: &TestCounts) -> f64 {
        match self.noise {
            NoiseModel::NoiseFree => {
                if c.empty_positive > 0 || c.covered_negative > 0 {
                    f64::NEG_INFINITY
                } else {
                    0.0
                }
            }
            NoiseModel::Additive { q } => {
                if c.covered_negative > 0 {
                    return f64::NEG_INFINITY;
                }
                weighted_log(c.empty_positive, q.log2()) + weighted_log(c.empty_negative, (1.0 - q).log2())
            }
            NoiseModel::Dilution { u } => {
                if c.empty_positive > 0 {
                    return f64::NEG_INFINITY;
                }
                let mut total = weighted_log(c.weight_negative, u.log2());
                for (count, &lp) in c.positive_by_count.iter().zip(&self.positive_log).skip(1) {
                    total += weighted_log(*count, lp);
                }
                total
            }
        }
    }
}

fn check_outcome(codebook: &Codebook, outcome: &OutcomeVector) -> Result<()> {
    if outcome.n_tests() != codebook.n_tests() {
        return Err(Error::param(
            "outcome",
            format!(
                "has {} tests, codebook has {}",
                outcome.n_tests(),
                codebook.n_tests()
            ),
        ));
    }
    Ok(())
}

/// Counts computed test by test, without bit tricks.
pub fn test_counts(
    codebook: &Codebook,
    candidate: &DefectiveSet,
    outcome: &OutcomeVector,
) -> Result<TestCounts> {
    candidate.check_against(codebook)?;
    check_outcome(codebook, outcome)?;
    let mut counts = TestCounts {
        positive_by_count: vec![0; candidate.k() + 1],
        ..TestCounts::default()
    };
    for t in 0..codebook.n_tests() {
        let c = candidate
            .indices()
            .iter()
            .filter(|&&i| codebook.bit(i, t))
            .count();
        match (c, outcome.bit(t)) {
            (0, true) => counts.empty_positive += 1,
            (0, false) => counts.empty_negative += 1,
            (c, true) => counts.positive_by_count[c] += 1,
            (c, false) => {
                counts.covered_negative += 1;
                counts.weight_negative += c as u64;
            }
        }
    }
    Ok(counts)
}

/// `log2 P(Y^T | X_S)` for one candidate set under the memoryless channel.
pub fn log_likelihood(
    codebook: &Codebook,
    candidate: &DefectiveSet,
    outcome: &OutcomeVector,
    noise: &NoiseModel,
) -> Result<f64> {
    noise.validate()?;
    let counts = test_counts(codebook, candidate, outcome)?;
    Ok(Scorer::new(*noise, candidate.k()).score(&counts))
}

/// Number of missed defectives: `|truth \ decoded|`.
pub fn miss_distance(truth: &DefectiveSet, decoded: &DefectiveSet) -> Result<usize> {
    if truth.k() != decoded.k() {
        return Err(Error::param(
            "decoded",
            format!("has {} items, truth has {}", decoded.k(), truth.k()),
        ));
    }
    Ok(truth.indices().iter().filter(|&&i| !decoded.contains(i)).count())
}

/// Running maximum over a lexicographic range of candidates.
#[derive(Debug, Clone)]
struct Best {
    ll: f64,
    set: Option<Vec<usize>>,
    tied_with: Option<Vec<usize>>,
    evaluated: u64,
}

impl Best {
    fn empty() -> Self {
        Best {
            ll: f64::NEG_INFINITY,
            set: None,
            tied_with: None,
            evaluated: 0,
        }
    }

    fn offer(&mut self, ll: f64, set: &[usize]) {
        self.evaluated += 1;
        if ll > self.ll {
            self.ll = ll;
            self.set = Some(set.to_vec());
            self.tied_with = None;
        } else if ll == self.ll && ll.is_finite() && self.tied_with.is_none() {
            self.tied_with = Some(set.to_vec());
        }
    }

    /// Combines with a range that comes later in lexicographic order.
    fn then(mut self, later: Best) -> Best {
        self.evaluated += later.evaluated;
        if later.ll > self.ll {
            Best {
                evaluated: self.evaluated,
                ..later
            }
        } else {
            if later.ll == self.ll && later.ll.is_finite() && self.tied_with.is_none() {
                self.tied_with = later.set;
            }
            self
        }
    }
}

/// Depth-first walk over K-subsets of `pool` with per-depth accumulators.
struct Scan<'a> {
    codebook: &'a Codebook,
    outcome: &'a [u64],
    tail: Vec<u64>,
    pool: &'a [usize],
    k: usize,
    scorer: &'a Scorer,
    planes: usize,
    chosen: Vec<usize>,
    /// OR of the chosen rows, one slot of `W` words per depth.
    or_stack: Vec<u64>,
    /// Bit-sliced per-test counts (dilution only), `planes * W` per depth.
    count_stack: Vec<u64>,
    /// Running `weight_negative` per depth.
    weight_stack: Vec<u64>,
    best: Best,
}

impl<'a> Scan<'a> {
    fn new(
        codebook: &'a Codebook,
        outcome: &'a OutcomeVector,
        pool: &'a [usize],
        k: usize,
        scorer: &'a Scorer,
    ) -> Self {
        let w = codebook.words_per_row();
        let planes = if matches!(scorer.noise, NoiseModel::Dilution { .. }) {
            (usize::BITS - k.leading_zeros()) as usize
        } else {
            0
        };
        Scan {
            codebook,
            outcome: outcome.words(),
            tail: (0..w).map(|j| outcome.tail_mask(j)).collect(),
            pool,
            k,
            scorer,
            planes,
            chosen: Vec::with_capacity(k),
            or_stack: vec![0; (k + 1) * w],
            count_stack: vec![0; (k + 1) * w * planes],
            weight_stack: vec![0; k + 1],
            best: Best::empty(),
        }
    }

    /// Pushes `item` at depth `d` (0-based), deriving level `d + 1`.
    fn push(&mut self, d: usize, item: usize) {
        let w = self.codebook.words_per_row();
        let row = self.codebook.row(item);
        let (prev, next) = self.or_stack.split_at_mut((d + 1) * w);
        let prev = &prev[d * w..];
        for j in 0..w {
            next[j] = prev[j] | row[j];
        }
        if self.planes > 0 {
            let stride = w * self.planes;
            let (prev, next) = self.count_stack.split_at_mut((d + 1) * stride);
            let prev = &prev[d * stride..];
            for j in 0..w {
                let mut carry = row[j];
                for b in 0..self.planes {
                    let cur = prev[b * w + j];
                    next[b * w + j] = cur ^ carry;
                    carry &= cur;
                }
            }
            let neg: u64 = (0..w)
                .map(|j| (row[j] & !self.outcome[j]).count_ones() as u64)
                .sum();
            self.weight_stack[d + 1] = self.weight_stack[d] + neg;
        }
        self.chosen.push(item);
    }

    fn leaf_counts(&self) -> TestCounts {
        let w = self.codebook.words_per_row();
        let or = &self.or_stack[self.k * w..(self.k + 1) * w];
        let mut counts = TestCounts {
            positive_by_count: vec![0; if self.planes > 0 { self.k + 1 } else { 0 }],
            weight_negative: self.weight_stack[self.k],
            ..TestCounts::default()
        };
        let n_tests = self.codebook.n_tests() as u64;
        let mut union = 0u64;
        for ((&o, &y), &tail) in or.iter().zip(self.outcome).zip(&self.tail) {
            counts.empty_positive += (!o & y & tail).count_ones() as u64;
            counts.covered_negative += (o & !y).count_ones() as u64;
            union += (o | y).count_ones() as u64;
        }
        counts.empty_negative = n_tests - union;
        if self.planes > 0 {
            let stride = w * self.planes;
            let planes = &self.count_stack[self.k * stride..(self.k + 1) * stride];
            for j in 0..w {
                let y = self.outcome[j];
                if y == 0 {
                    continue;
                }
                for c in 1..=self.k {
                    let mut m = y;
                    for b in 0..self.planes {
                        let plane = planes[b * w + j];
                        m &= if c >> b & 1 == 1 { plane } else { !plane };
                    }
                    counts.positive_by_count[c] += m.count_ones() as u64;
                }
            }
        }
        counts
    }

    /// Visits every completion of the current prefix using pool positions
    /// from `from` onwards.
    fn walk(&mut self, from: usize) {
        let d = self.chosen.len();
        if d == self.k {
            let ll = self.scorer.score(&self.leaf_counts());
            self.best.offer(ll, &self.chosen);
            return;
        }
        let last_start = self.pool.len() - (self.k - d);
        for pos in from..=last_start {
            self.push(d, self.pool[pos]);
            self.walk(pos + 1);
            self.chosen.pop();
        }
    }
}

/// Maximum-likelihood decode with default options.
pub fn ml_decode(
    codebook: &Codebook,
    outcome: &OutcomeVector,
    k: usize,
    noise: &NoiseModel,
) -> Result<DecodeResult> {
    ml_decode_with(codebook, outcome, k, noise, &DecodeOptions::default())
}

/// Scans all K-subsets in lexicographic order and returns the first
/// maximizer of the likelihood.
pub fn ml_decode_with(
    codebook: &Codebook,
    outcome: &OutcomeVector,
    k: usize,
    noise: &NoiseModel,
    options: &DecodeOptions,
) -> Result<DecodeResult> {
    noise.validate()?;
    check_outcome(codebook, outcome)?;
    let n = codebook.n_items();
    if k == 0 || k > n {
        return Err(Error::param("K", format!("must lie in 1..={n}, got {k}")));
    }
    let required = choose(n as u64, k as u64);
    if required > options.budget {
        return Err(Error::Capacity {
            what: "ML decoding",
            required,
            budget: options.budget,
        });
    }

    let pool: Vec<usize> = if noise.positive_pools_are_reliable() {
        let y = outcome.words();
        (0..n)
            .filter(|&i| codebook.row(i).iter().zip(y).all(|(r, y)| r & !y == 0))
            .collect()
    } else {
        (0..n).collect()
    };
    let scorer = Scorer::new(*noise, k);

    let best = if pool.len() < k {
        Best::empty()
    } else if options.parallel && k > 1 {
        let starts = pool.len() - k + 1;
        let parts: Vec<Best> = (0..starts)
            .into_par_iter()
            .map(|first| {
                let mut scan = Scan::new(codebook, outcome, &pool, k, &scorer);
                scan.push(0, pool[first]);
                scan.walk(first + 1);
                scan.best
            })
            .collect();
        parts.into_iter().fold(Best::empty(), Best::then)
    } else {
        let mut scan = Scan::new(codebook, outcome, &pool, k, &scorer);
        scan.walk(0);
        scan.best
    };

    let best_set = DefectiveSet::from_sorted(best.set.unwrap_or_else(|| (0..k).collect()));
    Ok(DecodeResult {
        best_set,
        log_likelihood: best.ll,
        tie: best.tied_with.is_some(),
        tied_with: best.tied_with.map(DefectiveSet::from_sorted),
        n_evaluated: best.evaluated,
    })
}

/// Every candidate set with its log-likelihood, in lexicographic order.
/// Intended for debugging small instances.
pub fn decode_trace(
    codebook: &Codebook,
    outcome: &OutcomeVector,
    k: usize,
    noise: &NoiseModel,
    budget: u128,
) -> Result<Vec<(DefectiveSet, f64)>> {
    let n = codebook.n_items();
    if k == 0 || k > n {
        return Err(Error::param("K", format!("must lie in 1..={n}, got {k}")));
    }
    let required = choose(n as u64, k as u64);
    if required > budget {
        return Err(Error::Capacity {
            what: "decode trace",
            required,
            budget,
        });
    }
    crate::combinatorics::Subsets::new(n, k)
        .map(|idx| {
            let set = DefectiveSet::from_sorted(idx);
            let ll = log_likelihood(codebook, &set, outcome, noise)?;
            Ok((set, ll))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::noiseless_outcome;

    fn set(ix: &[usize], n: usize) -> DefectiveSet {
        DefectiveSet::new(ix.to_vec(), n).unwrap()
    }

    #[test]
    fn true_set_has_probability_one_without_noise() {
        let cb = Codebook::generate(12, 40, 0.3, 4).unwrap();
        let truth = set(&[2, 7], 12);
        let y = noiseless_outcome(&cb, &truth).unwrap();
        assert_eq!(
            log_likelihood(&cb, &truth, &y, &NoiseModel::NoiseFree).unwrap(),
            0.0
        );
    }

    #[test]
    fn additive_hand_product() {
        // Rows never cover either test, so the OR bits are (0, 0).
        let cb = Codebook::from_rows(&[[0u8, 0], [1, 1]]).unwrap();
        let y = OutcomeVector::from_bits(&[1, 0]).unwrap();
        let ll = log_likelihood(&cb, &set(&[0], 2), &y, &NoiseModel::Additive { q: 0.25 }).unwrap();
        assert!((ll - (0.25f64.log2() + 0.75f64.log2())).abs() < 1e-15);
    }

    #[test]
    fn dilution_positive_with_two_present() {
        let cb = Codebook::from_rows(&[[1u8], [1], [0]]).unwrap();
        let y = OutcomeVector::from_bits(&[1]).unwrap();
        let ll = log_likelihood(&cb, &set(&[0, 1], 3), &y, &NoiseModel::Dilution { u: 0.5 }).unwrap();
        assert!((ll - 0.75f64.log2()).abs() < 1e-15);
    }

    #[test]
    fn dilution_impossible_and_negative_cases() {
        let cb = Codebook::from_rows(&[[1u8, 0], [0, 0]]).unwrap();
        let noise = NoiseModel::Dilution { u: 0.5 };
        // c = 0 yet positive
        let y = OutcomeVector::from_bits(&[0, 1]).unwrap();
        assert_eq!(
            log_likelihood(&cb, &set(&[0], 2), &y, &noise).unwrap(),
            f64::NEG_INFINITY
        );
        // c = 1, negative: one dilution
        let y = OutcomeVector::from_bits(&[0, 0]).unwrap();
        assert_eq!(log_likelihood(&cb, &set(&[0], 2), &y, &noise).unwrap(), -1.0);
        assert_eq!(log_likelihood(&cb, &set(&[1], 2), &y, &noise).unwrap(), 0.0);
    }

    #[test]
    fn mismatched_outcome_is_rejected() {
        let cb = Codebook::generate(4, 10, 0.5, 1).unwrap();
        let y = OutcomeVector::zeros(9);
        assert!(log_likelihood(&cb, &set(&[0], 4), &y, &NoiseModel::NoiseFree).is_err());
        assert!(ml_decode(&cb, &y, 1, &NoiseModel::NoiseFree).is_err());
    }

    #[test]
    fn unique_singleton() {
        let cb = Codebook::from_rows(&[
            [1u8, 0, 0, 0, 1],
            [0, 1, 0, 0, 1],
            [0, 0, 1, 0, 1],
            [0, 0, 0, 1, 1],
            [1, 1, 0, 0, 0],
        ])
        .unwrap();
        let y = OutcomeVector::from_bits(&[0, 0, 0, 1, 1]).unwrap();
        let r = ml_decode(&cb, &y, 1, &NoiseModel::NoiseFree).unwrap();
        assert_eq!(r.best_set, set(&[3], 5));
        assert!(!r.tie);
        assert!(!r.is_error(&set(&[3], 5)));
    }

    #[test]
    fn identical_rows_tie() {
        let cb = Codebook::from_rows(&[[1u8, 0, 1], [0, 1, 1], [1, 0, 1]]).unwrap();
        let truth = set(&[0], 3);
        let y = noiseless_outcome(&cb, &truth).unwrap();
        let r = ml_decode(&cb, &y, 1, &NoiseModel::NoiseFree).unwrap();
        assert_eq!(r.best_set, truth);
        assert!(r.tie);
        assert_eq!(r.tied_with, Some(set(&[2], 3)));
        assert!(r.is_error(&truth));
    }

    #[test]
    fn all_impossible_returns_first_set_without_tie() {
        let cb = Codebook::from_rows(&[[1u8, 0], [1, 0], [1, 0]]).unwrap();
        let y = OutcomeVector::from_bits(&[0, 1]).unwrap();
        let r = ml_decode(&cb, &y, 2, &NoiseModel::NoiseFree).unwrap();
        assert_eq!(r.best_set, set(&[0, 1], 3));
        assert_eq!(r.log_likelihood, f64::NEG_INFINITY);
        assert!(!r.tie);
    }

    #[test]
    fn budget_is_enforced() {
        let cb = Codebook::generate(40, 8, 0.5, 1).unwrap();
        let y = OutcomeVector::zeros(8);
        let opts = DecodeOptions {
            budget: 1000,
            parallel: false,
        };
        match ml_decode_with(&cb, &y, 3, &NoiseModel::NoiseFree, &opts) {
            Err(Error::Capacity { required, .. }) => assert_eq!(required, 9880),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn miss_distance_cases() {
        let a = set(&[1, 2, 3], 10);
        assert_eq!(miss_distance(&a, &a).unwrap(), 0);
        assert_eq!(miss_distance(&a, &set(&[4, 5, 6], 10)).unwrap(), 3);
        assert_eq!(miss_distance(&a, &set(&[2, 3, 9], 10)).unwrap(), 1);
        assert!(miss_distance(&a, &set(&[2], 10)).is_err());
    }

    #[test]
    fn parallel_scan_matches_serial() {
        for seed in 0..20 {
            let cb = Codebook::generate(11, 12, 0.4, seed).unwrap();
            let truth = set(&[1, 4, 8], 11);
            for noise in [
                NoiseModel::NoiseFree,
                NoiseModel::Additive { q: 0.2 },
                NoiseModel::Dilution { u: 0.3 },
            ] {
                let y = crate::model::apply_channel(&cb, &truth, &noise, seed + 100).unwrap();
                let serial = ml_decode(&cb, &y, 3, &noise).unwrap();
                let par = ml_decode_with(
                    &cb,
                    &y,
                    3,
                    &noise,
                    &DecodeOptions {
                        parallel: true,
                        ..DecodeOptions::default()
                    },
                )
                .unwrap();
                assert_eq!(serial, par);
            }
        }
    }

    #[test]
    fn zero_tests_tie_everything() {
        let cb = Codebook::draw(5, 0, 0.5, 1);
        let y = OutcomeVector::zeros(0);
        let r = ml_decode(&cb, &y, 2, &NoiseModel::NoiseFree).unwrap();
        assert!(r.tie);
        assert_eq!(r.log_likelihood, 0.0);
    }

    #[test]
    fn trace_lists_every_set() {
        let cb = Codebook::generate(6, 10, 0.5, 3).unwrap();
        let y = noiseless_outcome(&cb, &set(&[1, 2], 6)).unwrap();
        let trace = decode_trace(&cb, &y, 2, &NoiseModel::NoiseFree, DEFAULT_BUDGET).unwrap();
        assert_eq!(trace.len(), 15);
        assert!(trace.iter().any(|(s, ll)| *s == set(&[1, 2], 6) && *ll == 0.0));
    }
}
