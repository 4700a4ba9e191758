//! Information-theoretic bounds on the number of tests.
//!
//! Both test-count bounds take the form `max_i numerator(i) / I_i`, where
//! `I_i` is the per-test mutual information of the partition with `i`
//! misidentified items:
//!
//! * achievable: `numerator(i) = log2[K · C(N-K, i) · C(K, i)]`,
//! * Fano lower bound: `numerator(i) = log2 C(N-K+i, i)`.

mod entropy;
mod exponent;
mod mutual_info;

pub use entropy::binary_entropy;
pub use exponent::{
    exponent_curve, gallager_e0, pei_exponent, pei_upper_bound, ExponentCurve, PeiBound, RHO_GRID_POINTS,
};
pub use mutual_info::{
    mi_additive, mi_bruteforce, mi_dilution, mi_full_set_bruteforce, mi_noise_free, mutual_information,
    ENUMERATION_CAP,
};

use crate::combinatorics::log2_choose;
use crate::error::{Error, Result};
use crate::model::NoiseModel;
use std::f64::consts::LN_2;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    Achievable,
    FanoLower,
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundKind::Achievable => "achievable",
            BoundKind::FanoLower => "fano",
        })
    }
}

/// One partition class of the bound.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundEntry {
    pub i: usize,
    pub numerator_bits: f64,
    pub mutual_info_bits: f64,
    /// `numerator_bits / mutual_info_bits`; `+inf` when the channel carries
    /// no information about this partition.
    pub ratio_tests: f64,
    pub zero_information: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub kind: BoundKind,
    pub n: usize,
    pub k: usize,
    pub p: f64,
    pub channel: NoiseModel,
    pub per_i: Vec<BoundEntry>,
    pub bound_tests: f64,
    /// Smallest `i` attaining `bound_tests`.
    pub argmax_i: usize,
    /// Every numerator is zero, so the (asymptotic) bound says nothing.
    pub degenerate: bool,
}

impl BoundReport {
    /// True when some partition has zero mutual information.
    pub fn is_infinite(&self) -> bool {
        self.bound_tests.is_infinite()
    }
}

fn check_sizes(n: usize, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::param("K", "must be at least 1"));
    }
    if k >= n {
        return Err(Error::param("K", format!("must be below N = {n}, got {k}")));
    }
    Ok(())
}

fn build_report(
    kind: BoundKind,
    n: usize,
    k: usize,
    p: f64,
    noise: &NoiseModel,
    numerator: impl Fn(usize) -> f64,
) -> Result<BoundReport> {
    check_sizes(n, k)?;
    noise.validate()?;
    let mut per_i = Vec::with_capacity(k);
    for i in 1..=k {
        let mi = mutual_information(k, i, p, noise)?;
        let num = numerator(i);
        let zero_information = mi <= 0.0;
        let ratio_tests = if zero_information { f64::INFINITY } else { num / mi };
        per_i.push(BoundEntry {
            i,
            numerator_bits: num,
            mutual_info_bits: mi,
            ratio_tests,
            zero_information,
        });
    }
    let mut best = &per_i[0];
    for entry in &per_i[1..] {
        if entry.ratio_tests > best.ratio_tests {
            best = entry;
        }
    }
    let (bound_tests, argmax_i) = (best.ratio_tests, best.i);
    let degenerate = per_i.iter().all(|e| e.numerator_bits <= 0.0);
    Ok(BoundReport {
        kind,
        n,
        k,
        p,
        channel: *noise,
        per_i,
        bound_tests,
        argmax_i,
        degenerate,
    })
}

/// Number of tests sufficient for vanishing average error:
/// `max_i log2[K C(N-K,i) C(K,i)] / I_i`.
pub fn achievable_tests(n: usize, k: usize, p: f64, noise: &NoiseModel) -> Result<BoundReport> {
    build_report(BoundKind::Achievable, n, k, p, noise, |i| {
        (k as f64).log2() + log2_choose((n - k) as u64, i as u64) + log2_choose(k as u64, i as u64)
    })
}

/// Fano lower bound: `max_i log2 C(N-K+i, i) / I_i`.
pub fn fano_lower_bound(n: usize, k: usize, p: f64, noise: &NoiseModel) -> Result<BoundReport> {
    build_report(BoundKind::FanoLower, n, k, p, noise, |i| {
        log2_choose((n - k + i) as u64, i as u64)
    })
}

/// Which denominator the additive converse uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConverseForm {
    /// `2(1-q) + q ln(1/q)`, the value the mutual-information upper bound
    /// actually produces.
    #[default]
    Derived,
    /// `2(1-q) + ln(1/q)`, the form quoted in the theorem statement.
    Stated,
}

/// Order-of-growth witness for the number of tests any decoder needs under
/// additive noise:
///
/// ```text
/// K log2(N/K) / [ (1/ln 2) (1 - 1/K)^K (2(1-q) + q ln(1/q)) ]
/// ```
///
/// `O(1/K²)` remainders are dropped, so this is not a sharp constant. Needs
/// `K ≥ 2`, since `(1 - 1/K)^K` vanishes at `K = 1`.
pub fn additive_converse(n: usize, k: usize, q: f64, form: ConverseForm) -> Result<f64> {
    check_sizes(n, k)?;
    if k < 2 {
        return Err(Error::param("K", "the converse needs K >= 2"));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::domain("q", q, "(0, 1)"));
    }
    let kf = k as f64;
    let spread = match form {
        ConverseForm::Derived => 2.0 * (1.0 - q) + q * (1.0 / q).ln(),
        ConverseForm::Stated => 2.0 * (1.0 - q) + (1.0 / q).ln(),
    };
    let info = (1.0 - 1.0 / kf).powf(kf) * spread / LN_2;
    Ok(kf * (n as f64 / kf).log2() / info)
}
