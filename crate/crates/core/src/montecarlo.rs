//! Monte Carlo estimation of decoding error probabilities.
//!
//! Trial `j` of a run with master seed `s` draws its codebook seed, noise
//! seed and defective set from ChaCha stream `j` under key `s`. Trials are
//! therefore independent of each other and of the thread schedule, and the
//! aggregate is an integer count, so every estimate is reproducible bit for
//! bit at any thread count.
//!
//! The same master seed at two test counts gives nested codebooks (bit
//! `(i, t)` depends only on `(seed, i, t)`), which is what the minimal-T
//! search relies on for common random numbers across probes.

use crate::combinatorics::{choose, Subsets};
use crate::decoder::{miss_distance, ml_decode_with, DecodeOptions, DecodeResult, DEFAULT_BUDGET};
use crate::error::{Error, Result};
use crate::model::{apply_channel, Codebook, DefectiveSet, NoiseModel};
use crate::stats::error_interval;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

/// One experimental configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub n_items: usize,
    pub k: usize,
    pub n_tests: usize,
    pub p: f64,
    pub noise: NoiseModel,
}

impl Scenario {
    pub fn new(n_items: usize, k: usize, n_tests: usize, p: f64, noise: NoiseModel) -> Result<Self> {
        if n_items == 0 {
            return Err(Error::param("N", "must be at least 1"));
        }
        if k == 0 || k > n_items {
            return Err(Error::param("K", format!("must lie in 1..={n_items}, got {k}")));
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::domain("p", p, "(0, 1)"));
        }
        noise.validate()?;
        Ok(Scenario {
            n_items,
            k,
            n_tests,
            p,
            noise,
        })
    }

    pub fn with_tests(self, n_tests: usize) -> Self {
        Scenario { n_tests, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Criterion {
    /// Any wrong or ambiguous decode is an error.
    Average,
    /// Maximum conditional error over all defective sets of one codebook.
    WorstCase,
    /// Error only when more than `alpha · K` defectives are missed.
    Partial { alpha: f64 },
}

impl Criterion {
    pub fn name(&self) -> &'static str {
        match self {
            Criterion::Average => "avg",
            Criterion::WorstCase => "worst",
            Criterion::Partial { .. } => "partial",
        }
    }

    pub fn alpha(&self) -> Option<f64> {
        match *self {
            Criterion::Partial { alpha } => Some(alpha),
            _ => None,
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Criterion::Partial { alpha } => write!(f, "partial(alpha={alpha})"),
            other => f.write_str(other.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorEstimate {
    pub criterion: Criterion,
    pub scenario: Scenario,
    pub seed: u64,
    pub trials: u64,
    pub errors: u64,
    pub p_hat: f64,
    /// Half-width of the 95% interval (Clopper–Pearson below 5 errors).
    pub ci_half_width: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
}

impl ErrorEstimate {
    pub fn new(criterion: Criterion, scenario: Scenario, seed: u64, trials: u64, errors: u64) -> Self {
        let ci = error_interval(errors, trials);
        ErrorEstimate {
            criterion,
            scenario,
            seed,
            trials,
            errors,
            p_hat: errors as f64 / trials as f64,
            ci_half_width: ci.half_width,
            ci_lower: ci.lower,
            ci_upper: ci.upper,
        }
    }
}

/// A single simulated trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub truth: DefectiveSet,
    pub decode: DecodeResult,
}

impl TrialOutcome {
    /// Size of the error event: how many items separate the truth from the
    /// set the decoder could not rule out. `None` for a correct decode.
    pub fn error_distance(&self) -> Option<usize> {
        if !self.decode.is_error(&self.truth) {
            return None;
        }
        let rival = if self.decode.best_set != self.truth {
            &self.decode.best_set
        } else {
            self.decode.tied_with.as_ref().expect("tie recorded")
        };
        Some(miss_distance(&self.truth, rival).expect("same cardinality"))
    }

    pub fn misses(&self) -> usize {
        miss_distance(&self.truth, &self.decode.best_set).expect("same cardinality")
    }
}

/// Per-trial randomness derived from the master seed.
#[derive(Debug, Clone)]
pub struct TrialSeeds {
    pub codebook: u64,
    pub noise: u64,
    pub truth: DefectiveSet,
}

pub fn trial_seeds(master_seed: u64, trial: u64, n_items: usize, k: usize) -> TrialSeeds {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial);
    let codebook = rng.next_u64();
    let noise = rng.next_u64();
    let mut truth = rand::seq::index::sample(&mut rng, n_items, k).into_vec();
    truth.sort_unstable();
    TrialSeeds {
        codebook,
        noise,
        truth: DefectiveSet::from_sorted(truth),
    }
}

/// Empirical distribution of the error-event size.
#[derive(Debug, Clone, PartialEq)]
pub struct PeiProfile {
    pub scenario: Scenario,
    pub seed: u64,
    pub trials: u64,
    /// `counts[i - 1]` = trials whose error event has size `i`.
    pub counts: Vec<u64>,
}

impl PeiProfile {
    /// `(i, p_hat_i)` for `i = 1..=K`.
    pub fn rates(&self) -> Vec<(usize, f64)> {
        self.counts
            .iter()
            .enumerate()
            .map(|(j, &c)| (j + 1, c as f64 / self.trials as f64))
            .collect()
    }

    pub fn total_rate(&self) -> f64 {
        self.counts.iter().sum::<u64>() as f64 / self.trials as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorstCaseReport {
    /// `errors / trials` of the worst defective set.
    pub estimate: ErrorEstimate,
    pub lambda_max: f64,
    /// First defective set (lexicographically) attaining `lambda_max`.
    pub worst_set: DefectiveSet,
    pub sets_evaluated: u64,
    /// Defective sets with no observed error.
    pub zero_error_sets: u64,
}

/// Refinement policy of the minimal-T search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SearchOptions {
    /// Stop bisecting as soon as a probe cannot be separated from the target
    /// by its confidence interval.
    pub halt_on_ambiguity: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimalTResult {
    pub target_error: f64,
    /// Smallest probed T whose estimate meets the target, if any.
    pub t_star: Option<usize>,
    /// Every probe, sorted by T.
    pub probed: Vec<(usize, ErrorEstimate)>,
    /// Distance from `t_star` to the failing probe below it.
    pub resolution: usize,
    /// The estimate at `t_star` or just below lies within its confidence
    /// interval of the target.
    pub ambiguous: bool,
}

impl MinimalTResult {
    pub fn estimate_at(&self, t: usize) -> Option<&ErrorEstimate> {
        self.probed.iter().find(|(pt, _)| *pt == t).map(|(_, e)| e)
    }
}

/// Expands `start:stop:step` (inclusive of `stop` when it lands on the grid).
pub fn parse_t_grid(spec: &str) -> Result<Vec<usize>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::param("t-grid", format!("expected start:stop:step, got `{spec}`"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let nums: Vec<usize> = parts
        .iter()
        .map(|s| s.trim().parse::<usize>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let (start, stop, step) = (nums[0], nums[1], nums[2]);
    if step == 0 || stop < start {
        return Err(Error::param("t-grid", "needs step > 0 and stop >= start"));
    }
    Ok((start..=stop).step_by(step).collect())
}

fn check_grid(grid: &[usize]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::param("t-grid", "must not be empty"));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param("t-grid", "must be strictly increasing"));
    }
    Ok(())
}

/// Runs trials on a dedicated thread pool (or the global one).
#[derive(Debug, Clone)]
pub struct Harness {
    pool: Option<Arc<ThreadPool>>,
    budget: u128,
}

impl Default for Harness {
    fn default() -> Self {
        Harness {
            pool: None,
            budget: DEFAULT_BUDGET,
        }
    }
}

impl Harness {
    /// `threads = 0` uses rayon's global pool.
    pub fn with_threads(threads: usize) -> Result<Self> {
        if threads == 0 {
            return Ok(Harness::default());
        }
        let pool = ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::param("threads", e.to_string()))?;
        Ok(Harness {
            pool: Some(Arc::new(pool)),
            budget: DEFAULT_BUDGET,
        })
    }

    pub fn with_budget(mut self, budget: u128) -> Self {
        self.budget = budget;
        self
    }

    fn install<R: Send>(&self, job: impl FnOnce() -> R + Send) -> R {
        match &self.pool {
            Some(pool) => pool.install(job),
            None => job(),
        }
    }

    fn check_budget(&self, n: usize, k: usize) -> Result<()> {
        let required = choose(n as u64, k as u64);
        if required > self.budget {
            return Err(Error::Capacity {
                what: "ML decoding",
                required,
                budget: self.budget,
            });
        }
        Ok(())
    }

    fn decode_options(&self) -> DecodeOptions {
        DecodeOptions {
            budget: self.budget,
            parallel: false,
        }
    }

    /// One trial: fresh codebook, uniform defective set, noise, ML decode.
    pub fn run_trial(&self, scenario: &Scenario, master_seed: u64, trial: u64) -> Result<TrialOutcome> {
        let seeds = trial_seeds(master_seed, trial, scenario.n_items, scenario.k);
        let codebook = Codebook::draw(scenario.n_items, scenario.n_tests, scenario.p, seeds.codebook);
        let outcome = apply_channel(&codebook, &seeds.truth, &scenario.noise, seeds.noise)?;
        let decode = ml_decode_with(
            &codebook,
            &outcome,
            scenario.k,
            &scenario.noise,
            &self.decode_options(),
        )?;
        Ok(TrialOutcome {
            truth: seeds.truth,
            decode,
        })
    }

    /// All trials of a run, in trial order.
    pub fn run_trials(
        &self,
        scenario: &Scenario,
        trials: u64,
        master_seed: u64,
    ) -> Result<Vec<TrialOutcome>> {
        if trials == 0 {
            return Err(Error::param("trials", "must be at least 1"));
        }
        Scenario::new(
            scenario.n_items,
            scenario.k,
            scenario.n_tests,
            scenario.p,
            scenario.noise,
        )?;
        self.check_budget(scenario.n_items, scenario.k)?;
        self.install(|| {
            (0..trials)
                .into_par_iter()
                .map(|j| self.run_trial(scenario, master_seed, j))
                .collect()
        })
    }

    fn count_errors(
        &self,
        scenario: &Scenario,
        trials: u64,
        master_seed: u64,
        erred: impl Fn(&TrialOutcome) -> bool + Sync,
    ) -> Result<u64> {
        let outcomes = self.run_trials(scenario, trials, master_seed)?;
        Ok(outcomes.iter().filter(|o| erred(o)).count() as u64)
    }

    /// Error rate averaged over codebooks and defective sets.
    pub fn estimate_average_error(
        &self,
        scenario: &Scenario,
        trials: u64,
        master_seed: u64,
    ) -> Result<ErrorEstimate> {
        let errors = self.count_errors(scenario, trials, master_seed, |o| o.decode.is_error(&o.truth))?;
        Ok(ErrorEstimate::new(
            Criterion::Average,
            *scenario,
            master_seed,
            trials,
            errors,
        ))
    }

    /// Error rate when up to `alpha · K` misses are tolerated. The decoded
    /// set is the lexicographic maximizer; a tie alone is not an error.
    pub fn estimate_partial_error(
        &self,
        scenario: &Scenario,
        alpha: f64,
        trials: u64,
        master_seed: u64,
    ) -> Result<ErrorEstimate> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::domain("alpha", alpha, "(0, 1)"));
        }
        let threshold = alpha * scenario.k as f64;
        let errors = self.count_errors(scenario, trials, master_seed, |o| o.misses() as f64 > threshold)?;
        Ok(ErrorEstimate::new(
            Criterion::Partial { alpha },
            *scenario,
            master_seed,
            trials,
            errors,
        ))
    }

    /// Histogram of error-event sizes normalized by the number of trials.
    pub fn empirical_pei_profile(
        &self,
        scenario: &Scenario,
        trials: u64,
        master_seed: u64,
    ) -> Result<PeiProfile> {
        let outcomes = self.run_trials(scenario, trials, master_seed)?;
        let mut counts = vec![0u64; scenario.k];
        for i in outcomes.iter().filter_map(TrialOutcome::error_distance) {
            counts[i - 1] += 1;
        }
        Ok(PeiProfile {
            scenario: *scenario,
            seed: master_seed,
            trials,
            counts,
        })
    }

    /// For a fixed codebook, takes every K-subset as the truth. Without
    /// noise each conditional error is exactly 0 or 1; otherwise it is
    /// estimated from `trials_per_set` noise draws seeded from the codebook
    /// seed.
    pub fn estimate_worstcase_error(
        &self,
        codebook: &Codebook,
        k: usize,
        noise: &NoiseModel,
        trials_per_set: u64,
    ) -> Result<WorstCaseReport> {
        let n = codebook.n_items();
        let scenario = Scenario::new(n, k, codebook.n_tests(), codebook.p(), *noise)?;
        self.check_budget(n, k)?;
        let trials = if matches!(noise, NoiseModel::NoiseFree) {
            1
        } else if trials_per_set == 0 {
            return Err(Error::param("trials", "must be at least 1"));
        } else {
            trials_per_set
        };
        let sets: Vec<Vec<usize>> = Subsets::new(n, k).collect();
        let options = self.decode_options();
        let per_set: Vec<u64> = self.install(|| {
            sets.par_iter()
                .enumerate()
                .map(|(index, idx)| {
                    let truth = DefectiveSet::from_sorted(idx.clone());
                    let mut stream = ChaCha8Rng::seed_from_u64(codebook.seed());
                    stream.set_stream(index as u64);
                    let mut errors = 0;
                    for _ in 0..trials {
                        let outcome = apply_channel(codebook, &truth, noise, stream.next_u64())?;
                        let decode = ml_decode_with(codebook, &outcome, k, noise, &options)?;
                        errors += decode.is_error(&truth) as u64;
                    }
                    Ok(errors)
                })
                .collect::<Result<Vec<u64>>>()
        })?;
        let (mut worst, mut worst_errors) = (0, 0);
        for (j, &e) in per_set.iter().enumerate() {
            if e > worst_errors {
                worst = j;
                worst_errors = e;
            }
        }
        let estimate = ErrorEstimate::new(
            Criterion::WorstCase,
            scenario,
            codebook.seed(),
            trials,
            worst_errors,
        );
        Ok(WorstCaseReport {
            lambda_max: estimate.p_hat,
            estimate,
            worst_set: DefectiveSet::from_sorted(sets[worst].clone()),
            sets_evaluated: sets.len() as u64,
            zero_error_sets: per_set.iter().filter(|&&e| e == 0).count() as u64,
        })
    }

    /// Smallest T on `t_grid` whose average error meets `target_error`,
    /// refined by bisection inside the first passing grid interval.
    pub fn find_minimal_t(
        &self,
        scenario: &Scenario,
        target_error: f64,
        trials: u64,
        t_grid: &[usize],
        master_seed: u64,
        options: SearchOptions,
    ) -> Result<MinimalTResult> {
        check_grid(t_grid)?;
        if !(0.0..=1.0).contains(&target_error) {
            return Err(Error::domain("target", target_error, "[0, 1]"));
        }
        let mut probes: BTreeMap<usize, ErrorEstimate> = BTreeMap::new();
        let mut probe = |t: usize| -> Result<ErrorEstimate> {
            if let Some(e) = probes.get(&t) {
                return Ok(e.clone());
            }
            let e = self.estimate_average_error(&scenario.with_tests(t), trials, master_seed)?;
            probes.insert(t, e.clone());
            Ok(e)
        };
        let near = |e: &ErrorEstimate| (e.p_hat - target_error).abs() <= e.ci_half_width;

        let mut first_pass = None;
        for (j, &t) in t_grid.iter().enumerate() {
            if probe(t)?.p_hat <= target_error {
                first_pass = Some(j);
                break;
            }
        }
        let grid_step = t_grid.windows(2).map(|w| w[1] - w[0]).min().unwrap_or(1);

        let (t_star, resolution, ambiguous) = match first_pass {
            None => (None, grid_step, false),
            Some(0) => {
                let e = probe(t_grid[0])?;
                (Some(t_grid[0]), grid_step, near(&e))
            }
            Some(j) => {
                let (mut lo, mut hi) = (t_grid[j - 1], t_grid[j]);
                let mut halted = false;
                while hi - lo > 1 {
                    let mid = lo + (hi - lo) / 2;
                    let e = probe(mid)?;
                    if options.halt_on_ambiguity && near(&e) {
                        halted = true;
                        if e.p_hat <= target_error {
                            hi = mid;
                        } else {
                            lo = mid;
                        }
                        break;
                    }
                    if e.p_hat <= target_error {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                let ambiguous = halted || near(&probe(hi)?) || near(&probe(lo)?);
                (Some(hi), hi - lo, ambiguous)
            }
        };
        Ok(MinimalTResult {
            target_error,
            t_star,
            probed: probes.into_iter().collect(),
            resolution,
            ambiguous,
        })
    }
}

pub fn estimate_average_error(
    n_items: usize,
    k: usize,
    n_tests: usize,
    p: f64,
    noise: &NoiseModel,
    trials: u64,
    master_seed: u64,
) -> Result<ErrorEstimate> {
    let scenario = Scenario::new(n_items, k, n_tests, p, *noise)?;
    Harness::default().estimate_average_error(&scenario, trials, master_seed)
}

#[allow(clippy::too_many_arguments)]
pub fn estimate_partial_error(
    n_items: usize,
    k: usize,
    n_tests: usize,
    p: f64,
    noise: &NoiseModel,
    alpha: f64,
    trials: u64,
    master_seed: u64,
) -> Result<ErrorEstimate> {
    let scenario = Scenario::new(n_items, k, n_tests, p, *noise)?;
    Harness::default().estimate_partial_error(&scenario, alpha, trials, master_seed)
}

pub fn estimate_worstcase_error(
    codebook: &Codebook,
    k: usize,
    noise: &NoiseModel,
    trials_per_set: u64,
) -> Result<WorstCaseReport> {
    Harness::default().estimate_worstcase_error(codebook, k, noise, trials_per_set)
}

pub fn empirical_pei_profile(
    n_items: usize,
    k: usize,
    n_tests: usize,
    p: f64,
    noise: &NoiseModel,
    trials: u64,
    master_seed: u64,
) -> Result<PeiProfile> {
    let scenario = Scenario::new(n_items, k, n_tests, p, *noise)?;
    Harness::default().empirical_pei_profile(&scenario, trials, master_seed)
}

#[allow(clippy::too_many_arguments)]
pub fn find_minimal_t(
    n_items: usize,
    k: usize,
    p: f64,
    noise: &NoiseModel,
    target_error: f64,
    trials: u64,
    t_grid: &[usize],
    master_seed: u64,
) -> Result<MinimalTResult> {
    let scenario = Scenario::new(n_items, k, 0, p, *noise)?;
    Harness::default().find_minimal_t(
        &scenario,
        target_error,
        trials,
        t_grid,
        master_seed,
        SearchOptions::default(),
    )
}
