//! Acceptance suite shared by the `accept` command and the `acceptance` test
//! target. Each check returns a verdict plus the numbers behind it instead of
//! panicking, so a single failure does not hide the others.

use crate::bounds::{
    achievable_tests, fano_lower_bound, gallager_e0, mi_bruteforce, mutual_information, pei_upper_bound,
};
use crate::model::{Codebook, NoiseModel};
use crate::montecarlo::{Harness, MinimalTResult, Scenario, SearchOptions};
use crate::report::{estimate_row, minimal_t_rows, profile_rows, to_csv};
use crate::stats::binomial_sigma;
use crate::Result;
use std::fmt;
use std::time::{Duration, Instant};

/// Master seed of every Monte Carlo criterion.
pub const SEED: u64 = 0x6a09_e667;

const MC_TRIALS: u64 = 2000;
const SCALING_TARGET: f64 = 0.1;
const BOUND_SIZES: [usize; 3] = [100, 1000, 10_000];

#[derive(Debug, Clone)]
pub struct Verdict {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
    /// Expected desk runtime.
    pub budget: Duration,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} criterion {:>2} {}: {} [{:.1}s, budget {}s]",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.elapsed.as_secs_f64(),
            self.budget.as_secs()
        )
    }
}

/// Channels of the analytic grid.
pub fn channel_grid() -> Vec<NoiseModel> {
    let mut channels = vec![NoiseModel::NoiseFree];
    channels.extend([0.1, 0.3, 0.7].map(|q| NoiseModel::Additive { q }));
    channels.extend([0.1, 0.3, 0.7].map(|u| NoiseModel::Dilution { u }));
    channels
}

/// `(K, p)` pairs of the analytic grid: `K ∈ 2..=max_k`, `p ∈ {0.1, 1/K, 0.5}`.
pub fn design_grid(max_k: usize) -> Vec<(usize, f64)> {
    (2..=max_k)
        .flat_map(|k| [0.1, 1.0 / k as f64, 0.5].map(|p| (k, p)))
        .collect()
}

struct Check {
    passed: bool,
    detail: String,
}

fn timed(id: u8, name: &'static str, budget_secs: u64, run: impl FnOnce() -> Result<Check>) -> Verdict {
    let start = Instant::now();
    let check = run().unwrap_or_else(|e| Check {
        passed: false,
        detail: format!("error: {e}"),
    });
    Verdict {
        id,
        name,
        passed: check.passed,
        detail: check.detail,
        elapsed: start.elapsed(),
        budget: Duration::from_secs(budget_secs),
    }
}

pub fn oracle_equivalence() -> Verdict {
    timed(1, "oracle equivalence", 10, || {
        let (mut worst, mut cases) = (0.0f64, 0);
        for (k, p) in design_grid(10) {
            for noise in channel_grid() {
                for i in 1..=k {
                    let closed = mutual_information(k, i, p, &noise)?;
                    let brute = mi_bruteforce(k, i, p, &noise)?;
                    worst = worst.max((closed - brute).abs());
                    cases += 1;
                }
            }
        }
        Ok(Check {
            passed: worst <= 1e-9,
            detail: format!("max |closed - brute| = {worst:.3e} bits over {cases} cases (tol 1e-9)"),
        })
    })
}

pub fn exponent_slope() -> Verdict {
    timed(2, "E0 slope at rho=0", 30, || {
        const DELTA: f64 = 1e-5;
        let (mut worst, mut cases) = (0.0f64, 0);
        for (k, p) in design_grid(8) {
            for noise in channel_grid() {
                for i in 1..=k {
                    let slope =
                        (gallager_e0(k, i, p, &noise, DELTA)? - gallager_e0(k, i, p, &noise, 0.0)?) / DELTA;
                    let mi = mutual_information(k, i, p, &noise)?;
                    worst = worst.max((slope - mi).abs() / mi);
                    cases += 1;
                }
            }
        }
        Ok(Check {
            passed: worst <= 1e-3,
            detail: format!("max relative error {worst:.3e} over {cases} cases (tol 1e-3)"),
        })
    })
}

pub fn bound_dominance(harness: &Harness) -> Verdict {
    timed(3, "P(E_i) bound dominance", 120, || {
        const TRIALS: u64 = 5000;
        let (n, k, p) = (30, 3, 1.0 / 3.0);
        let mut violations = Vec::new();
        let mut tightest = f64::INFINITY;
        for noise in [NoiseModel::NoiseFree, NoiseModel::Additive { q: 0.1 }] {
            for t in [50, 100, 150] {
                let scenario = Scenario::new(n, k, t, p, noise)?;
                let profile = harness.empirical_pei_profile(&scenario, TRIALS, SEED)?;
                for (i, rate) in profile.rates() {
                    let bound = pei_upper_bound(n, k, i, t, p, &noise)?;
                    let allowed = bound + 3.0 * binomial_sigma(bound.min(1.0), TRIALS);
                    tightest = tightest.min(allowed - rate);
                    if rate > allowed {
                        violations.push(format!("{noise} T={t} i={i}: {rate} > {allowed:.3e}"));
                    }
                }
            }
        }
        Ok(Check {
            passed: violations.is_empty(),
            detail: if violations.is_empty() {
                format!("18 cells, smallest margin {tightest:.3e}")
            } else {
                violations.join("; ")
            },
        })
    })
}

pub fn bound_ordering() -> Verdict {
    timed(4, "Fano <= achievable", 5, || {
        let (mut violations, mut cases) = (0, 0);
        for n in BOUND_SIZES {
            for (k, p) in design_grid(10) {
                for noise in channel_grid() {
                    let lower = fano_lower_bound(n, k, p, &noise)?.bound_tests;
                    let upper = achievable_tests(n, k, p, &noise)?.bound_tests;
                    violations += (lower > upper) as usize;
                    cases += 1;
                }
            }
        }
        Ok(Check {
            passed: violations == 0,
            detail: format!("{violations} violations over {cases} configurations"),
        })
    })
}

fn scaling_grid() -> Vec<usize> {
    (4..=240).step_by(4).collect()
}

fn minimal_t(harness: &Harness, n: usize, k: usize, noise: NoiseModel) -> Result<MinimalTResult> {
    let scenario = Scenario::new(n, k, 0, 1.0 / k as f64, noise)?;
    harness.find_minimal_t(
        &scenario,
        SCALING_TARGET,
        MC_TRIALS,
        &scaling_grid(),
        SEED,
        SearchOptions::default(),
    )
}

fn t_star(harness: &Harness, n: usize, k: usize, noise: NoiseModel) -> Result<usize> {
    minimal_t(harness, n, k, noise)?
        .t_star
        .ok_or_else(|| crate::Error::param("t-grid", format!("target not reached for N={n} K={k} {noise}")))
}

pub fn noise_free_scaling(harness: &Harness) -> Verdict {
    timed(5, "noise-free scaling", 600, || {
        let small = t_star(harness, 64, 2, NoiseModel::NoiseFree)?;
        let large = t_star(harness, 256, 2, NoiseModel::NoiseFree)?;
        let more = t_star(harness, 64, 4, NoiseModel::NoiseFree)?;
        let ratio = large as f64 / small as f64;
        Ok(Check {
            passed: (1.0..=1.9).contains(&ratio) && more > small,
            detail: format!(
                "t*(256,2)={large} t*(64,2)={small} ratio {ratio:.3} (want [1.0, 1.9]); t*(64,4)={more}"
            ),
        })
    })
}

pub fn additive_degradation(harness: &Harness) -> Verdict {
    timed(6, "additive degradation", 600, || {
        let ts = [0.0, 0.25, 0.5]
            .map(|q| t_star(harness, 64, 2, NoiseModel::Additive { q }))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let ratio = ts[2] as f64 / ts[0] as f64;
        let monotone = ts.windows(2).all(|w| w[0] <= w[1]);
        Ok(Check {
            passed: monotone && (1.3..=3.5).contains(&ratio),
            detail: format!("t*(q=0,0.25,0.5) = {ts:?}, ratio {ratio:.3} (want [1.3, 3.5])"),
        })
    })
}

pub fn dilution_severity(harness: &Harness) -> Verdict {
    timed(7, "dilution at least as severe as additive", 600, || {
        let mut notes = Vec::new();
        let mut passed = true;
        for v in [0.25, 0.5] {
            let dil = t_star(harness, 64, 2, NoiseModel::Dilution { u: v })?;
            let add = t_star(harness, 64, 2, NoiseModel::Additive { q: v })?;
            passed &= dil >= add;
            notes.push(format!("v={v}: t*(dil)={dil} t*(add)={add}"));
        }
        let (mut violations, mut cases) = (0, 0);
        let mut example = None;
        for n in BOUND_SIZES {
            for (k, p) in design_grid(10) {
                for v in [0.1, 0.25, 0.3, 0.5, 0.7] {
                    let dil = achievable_tests(n, k, p, &NoiseModel::Dilution { u: v })?.bound_tests;
                    let add = achievable_tests(n, k, p, &NoiseModel::Additive { q: v })?.bound_tests;
                    cases += 1;
                    if dil < add {
                        violations += 1;
                        example.get_or_insert(format!("N={n} K={k} p={p:.3} v={v}: {dil:.1} < {add:.1}"));
                    }
                }
            }
        }
        passed &= violations == 0;
        notes.push(format!("analytic violations {violations}/{cases}"));
        if let Some(e) = example {
            notes.push(format!("first: {e}"));
        }
        Ok(Check {
            passed,
            detail: notes.join("; "),
        })
    })
}

pub fn partial_reconstruction(harness: &Harness) -> Verdict {
    timed(8, "partial reconstruction", 300, || {
        let (n, k, p) = (24, 4, 0.25);
        // first T whose average error lands in 0.3 ± 0.05
        let mut chosen = None;
        for t in 20..=48 {
            let scenario = Scenario::new(n, k, t, p, NoiseModel::NoiseFree)?;
            let avg = harness.estimate_average_error(&scenario, MC_TRIALS, SEED)?;
            if (avg.p_hat - 0.3).abs() <= 0.05 {
                chosen = Some((scenario, avg));
                break;
            }
        }
        let Some((scenario, avg)) = chosen else {
            return Ok(Check {
                passed: false,
                detail: "no T in 20..=48 has average error within 0.3 ± 0.05".into(),
            });
        };
        let partial = [0.25, 0.5, 0.75]
            .map(|alpha| harness.estimate_partial_error(&scenario, alpha, MC_TRIALS, SEED))
            .into_iter()
            .map(|e| e.map(|e| e.p_hat))
            .collect::<Result<Vec<_>>>()?;
        let monotone = partial.windows(2).all(|w| w[1] <= w[0]);
        Ok(Check {
            passed: partial[1] < avg.p_hat && monotone,
            detail: format!(
                "T={} avg {:.4}; partial(0.25,0.5,0.75) = {:?}",
                scenario.n_tests, avg.p_hat, partial
            ),
        })
    })
}

pub fn worst_case_exactness(harness: &Harness) -> Verdict {
    timed(9, "worst-case exactness", 60, || {
        const SEEDS: u64 = 20;
        let (mut exact, mut zero, mut sets_ok) = (true, 0, true);
        for seed in 0..SEEDS {
            let codebook = Codebook::generate(10, 96, 0.5, SEED + seed)?;
            let report = harness.estimate_worstcase_error(&codebook, 2, &NoiseModel::NoiseFree, 1)?;
            exact &= report.lambda_max == 0.0 || report.lambda_max == 1.0;
            sets_ok &= report.sets_evaluated == 45;
            zero += (report.lambda_max == 0.0) as u64;
        }
        Ok(Check {
            passed: exact && sets_ok,
            detail: format!(
                "lambda_max in {{0,1}} for all {SEEDS} codebooks over 45 sets; fraction with lambda_max=0: {:.2}",
                zero as f64 / SEEDS as f64
            ),
        })
    })
}

/// Every estimator serialized to CSV under one thread pool size.
fn estimator_csv(harness: &Harness) -> Result<String> {
    let scenario = Scenario::new(16, 2, 14, 0.5, NoiseModel::Dilution { u: 0.2 })?;
    let additive = Scenario::new(16, 2, 14, 0.5, NoiseModel::Additive { q: 0.1 })?;
    let mut out = String::new();
    out += &to_csv(&[
        estimate_row(&harness.estimate_average_error(&scenario, 400, SEED)?),
        estimate_row(&harness.estimate_partial_error(&scenario, 0.5, 400, SEED)?),
        estimate_row(&harness.estimate_average_error(&additive, 400, SEED)?),
    ]);
    out += &to_csv(&profile_rows(
        &harness.empirical_pei_profile(&additive, 400, SEED)?,
    ));
    let codebook = Codebook::generate(10, 20, 0.3, SEED)?;
    let worst = harness.estimate_worstcase_error(&codebook, 2, &NoiseModel::Additive { q: 0.1 }, 20)?;
    out += &to_csv(&[estimate_row(&worst.estimate)]);
    out += &worst.worst_set.to_string();
    let search = harness.find_minimal_t(
        &Scenario::new(16, 2, 0, 0.5, NoiseModel::NoiseFree)?,
        0.2,
        300,
        &[4, 12, 20, 28],
        SEED,
        SearchOptions::default(),
    )?;
    out += &to_csv(&minimal_t_rows(&search));
    Ok(out)
}

pub fn determinism() -> Verdict {
    timed(10, "determinism across thread counts", 60, || {
        let reference = estimator_csv(&Harness::with_threads(1)?)?;
        let mut mismatches = Vec::new();
        for threads in [1, 2, 4, 0] {
            if estimator_csv(&Harness::with_threads(threads)?)? != reference {
                mismatches.push(threads);
            }
        }
        Ok(Check {
            passed: mismatches.is_empty(),
            detail: if mismatches.is_empty() {
                format!(
                    "{} CSV bytes identical for threads 1, 2, 4 and auto",
                    reference.len()
                )
            } else {
                format!("output differs with threads {mismatches:?}")
            },
        })
    })
}

/// Runs criteria in order; `only` restricts to the listed ids.
pub fn run(harness: &Harness, only: &[u8], mut report: impl FnMut(&Verdict)) -> Vec<Verdict> {
    let selected = |id: u8| only.is_empty() || only.contains(&id);
    let mut verdicts = Vec::new();
    let mut push = |v: Verdict| {
        report(&v);
        verdicts.push(v);
    };
    if selected(1) {
        push(oracle_equivalence());
    }
    if selected(2) {
        push(exponent_slope());
    }
    if selected(3) {
        push(bound_dominance(harness));
    }
    if selected(4) {
        push(bound_ordering());
    }
    if selected(5) {
        push(noise_free_scaling(harness));
    }
    if selected(6) {
        push(additive_degradation(harness));
    }
    if selected(7) {
        push(dilution_severity(harness));
    }
    if selected(8) {
        push(partial_reconstruction(harness));
    }
    if selected(9) {
        push(worst_case_exactness(harness));
    }
    if selected(10) {
        push(determinism());
    }
    verdicts
}
