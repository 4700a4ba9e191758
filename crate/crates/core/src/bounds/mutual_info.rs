//! Per-test mutual information `I(X_{S1}; X_{S2}, Y)` between `i` codeword
//! columns of the defective set and the remaining `K - i` columns plus the
//! outcome.
//!
//! Codeword columns are i.i.d., so `I(X_{S1}; X_{S2}, Y) = I(X_{S1}; Y | X_{S2})
//! = H(Y | X_{S2}) - H(Y | X_S)`, and the value depends only on the sizes of
//! the two parts. The closed forms below are checked against
//! [`mi_bruteforce`], which enumerates every input pattern.

use super::entropy::{h2, plogp};
use crate::combinatorics::binomial_pmf;
use crate::error::{Error, Result};
use crate::model::NoiseModel;

/// Largest `K` accepted by the enumerating routines (2^K input patterns).
pub const ENUMERATION_CAP: usize = 20;

pub(crate) fn check_partition(k: usize, i: usize, p: f64) -> Result<()> {
    if k == 0 {
        return Err(Error::param("K", "must be at least 1"));
    }
    if i == 0 || i > k {
        return Err(Error::param("i", format!("must lie in 1..={k}, got {i}")));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain("p", p, "(0, 1)"));
    }
    Ok(())
}

pub(crate) fn check_enumerable(k: usize) -> Result<()> {
    if k > ENUMERATION_CAP {
        return Err(Error::Capacity {
            what: "input enumeration",
            required: 1u128 << k.min(127),
            budget: 1u128 << ENUMERATION_CAP,
        });
    }
    Ok(())
}

/// `Q(x) = p^w (1-p)^(n-w)` for every `x ∈ {0,1}^n`, indexed by bit mask.
pub(crate) fn pattern_probs(n: usize, p: f64) -> Vec<f64> {
    (0..1usize << n)
        .map(|mask| {
            let w = mask.count_ones() as i32;
            p.powi(w) * (1.0 - p).powi(n as i32 - w)
        })
        .collect()
}

/// Exact mutual information by enumerating all `x1 ∈ {0,1}^i`,
/// `x2 ∈ {0,1}^(K-i)` and `y ∈ {0,1}`.
pub fn mi_bruteforce(k: usize, i: usize, p: f64, noise: &NoiseModel) -> Result<f64> {
    check_partition(k, i, p)?;
    check_enumerable(k)?;
    noise.validate()?;
    let q1 = pattern_probs(i, p);
    let q2 = pattern_probs(k - i, p);
    let mut info = 0.0;
    for (x2, &q_x2) in q2.iter().enumerate() {
        let w2 = x2.count_ones() as usize;
        let p1_given_x2: f64 = q1
            .iter()
            .enumerate()
            .map(|(x1, &q_x1)| q_x1 * noise.prob_positive(w2 + x1.count_ones() as usize))
            .sum();
        let marginal = [1.0 - p1_given_x2, p1_given_x2];
        for (x1, &q_x1) in q1.iter().enumerate() {
            let p1 = noise.prob_positive(w2 + x1.count_ones() as usize);
            for (y, py) in [1.0 - p1, p1].into_iter().enumerate() {
                if py > 0.0 {
                    info += q_x2 * q_x1 * py * (py / marginal[y]).log2();
                }
            }
        }
    }
    Ok(info)
}

/// Noise-free channel: `(1-p)^(K-i) H((1-p)^i)`.
pub fn mi_noise_free(k: usize, i: usize, p: f64) -> Result<f64> {
    check_partition(k, i, p)?;
    Ok(noise_free_unchecked(k, i, p))
}

fn noise_free_unchecked(k: usize, i: usize, p: f64) -> f64 {
    let miss = 1.0 - p;
    miss.powi((k - i) as i32) * h2(miss.powi(i as i32))
}

/// Additive channel: `(1-p)^(K-i) [H((1-p)^i (1-q)) - (1-p)^i H(q)]`.
pub fn mi_additive(k: usize, i: usize, p: f64, q: f64) -> Result<f64> {
    check_partition(k, i, p)?;
    NoiseModel::additive(q)?;
    if q == 0.0 {
        return Ok(noise_free_unchecked(k, i, p));
    }
    let miss = 1.0 - p;
    let part = miss.powi(i as i32);
    let value = miss.powi((k - i) as i32) * (h2(part * (1.0 - q)) - part * h2(q));
    Ok(value.max(0.0))
}

/// Dilution channel with general `p`:
///
/// ```text
/// H(Y|X_S2) = Σ_{j=0}^{K-i} B(j; K-i, p) H(u^j (1 - p(1-u))^i)
/// H(Y|X_S)  = Σ_{j=0}^{K}   B(j; K,   p) H(u^j)
/// ```
///
/// where `B` is the binomial mass and the arguments of `H` are the
/// probabilities of a negative test.
pub fn mi_dilution(k: usize, i: usize, p: f64, u: f64) -> Result<f64> {
    check_partition(k, i, p)?;
    NoiseModel::dilution(u)?;
    if u == 0.0 {
        return Ok(noise_free_unchecked(k, i, p));
    }
    let negative_from_s1 = ((1.0 - p) + p * u).powi(i as i32);
    let rest = (k - i) as u64;
    let h_given_s2: f64 = (0..=rest)
        .map(|j| binomial_pmf(rest, j, p) * h2(u.powi(j as i32) * negative_from_s1))
        .sum();
    let h_given_s: f64 = (0..=k as u64)
        .map(|j| binomial_pmf(k as u64, j, p) * h2(u.powi(j as i32)))
        .sum();
    Ok((h_given_s2 - h_given_s).max(0.0))
}

/// Closed-form mutual information for `noise`.
pub fn mutual_information(k: usize, i: usize, p: f64, noise: &NoiseModel) -> Result<f64> {
    match *noise {
        NoiseModel::NoiseFree => mi_noise_free(k, i, p),
        NoiseModel::Additive { q } => mi_additive(k, i, p, q),
        NoiseModel::Dilution { u } => mi_dilution(k, i, p, u),
    }
}

/// `I(X_S; Y)` for the whole defective set by enumeration, i.e. the `i = K`
/// partition computed without conditioning.
pub fn mi_full_set_bruteforce(k: usize, p: f64, noise: &NoiseModel) -> Result<f64> {
    check_partition(k, k, p)?;
    check_enumerable(k)?;
    noise.validate()?;
    let q = pattern_probs(k, p);
    let py1: f64 = q
        .iter()
        .enumerate()
        .map(|(x, &qx)| qx * noise.prob_positive(x.count_ones() as usize))
        .sum();
    let h_y = plogp(py1) + plogp(1.0 - py1);
    let h_y_given_x: f64 = q
        .iter()
        .enumerate()
        .map(|(x, &qx)| qx * h2(noise.prob_positive(x.count_ones() as usize)))
        .sum();
    Ok(h_y - h_y_given_x)
}
