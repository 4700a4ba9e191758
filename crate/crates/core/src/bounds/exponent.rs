//! Random-coding exponent of the error event `E_i` (a set that differs from
//! the truth in exactly `i` items is at least as likely as the truth).
//!
//! ```text
//! E0(ρ) = -log2 Σ_y Σ_{x2} [ Σ_{x1} Q(x1) P(y, x2 | x1)^{1/(1+ρ)} ]^{1+ρ}
//! P(E_i) ≤ 2^{-T (E0(ρ) - ρ log2[C(N-K, i) C(K, i)] / T)},   0 ≤ ρ ≤ 1
//! ```
//!
//! with `P(y, x2 | x1) = Q(x2) P(y | x1, x2)`. The slope of `E0` at `ρ = 0`
//! is the per-test mutual information.

use super::mutual_info::{check_enumerable, check_partition};
use crate::combinatorics::{choose, log2_choose};
use crate::error::{Error, Result};
use crate::model::NoiseModel;

/// Number of points in the uniform ρ grid searched by [`pei_upper_bound`].
pub const RHO_GRID_POINTS: usize = 101;

const GOLDEN_ITERATIONS: usize = 80;

/// `E0(ρ)` in bits.
///
/// Input patterns are enumerated by weight class: `P(y | x1, x2)` depends
/// only on the total weight, so every pattern of the same weights contributes
/// the same term and is counted with its multiplicity.
pub fn gallager_e0(k: usize, i: usize, p: f64, noise: &NoiseModel, rho: f64) -> Result<f64> {
    check_partition(k, i, p)?;
    check_enumerable(k)?;
    noise.validate()?;
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::domain("rho", rho, "[0, 1]"));
    }
    if rho == 0.0 {
        // The bracket collapses to a sum of probabilities.
        return Ok(0.0);
    }
    Ok(-e0_sum(k, i, p, noise, rho).log2())
}

fn e0_sum(k: usize, i: usize, p: f64, noise: &NoiseModel, rho: f64) -> f64 {
    let s = 1.0 / (1.0 + rho);
    let rest = k - i;
    let pattern = |n: usize, w: usize| p.powi(w as i32) * (1.0 - p).powi((n - w) as i32);
    let mut total = 0.0;
    for w2 in 0..=rest {
        let q2 = pattern(rest, w2);
        let mult2 = choose(rest as u64, w2 as u64) as f64;
        for y in [false, true] {
            let inner: f64 = (0..=i)
                .map(|w1| {
                    let p1 = noise.prob_positive(w1 + w2);
                    let py = if y { p1 } else { 1.0 - p1 };
                    let joint = q2 * py;
                    if joint <= 0.0 {
                        return 0.0;
                    }
                    choose(i as u64, w1 as u64) as f64 * pattern(i, w1) * joint.powf(s)
                })
                .sum();
            if inner > 0.0 {
                total += mult2 * inner.powf(1.0 + rho);
            }
        }
    }
    total
}

/// `E0` sampled on a ρ grid for one partition size and channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentCurve {
    pub k: usize,
    pub i: usize,
    pub p: f64,
    pub channel: NoiseModel,
    pub rho_grid: Vec<f64>,
    pub e0_values: Vec<f64>,
}

pub fn exponent_curve(
    k: usize,
    i: usize,
    p: f64,
    noise: &NoiseModel,
    rho_grid: &[f64],
) -> Result<ExponentCurve> {
    let e0_values = rho_grid
        .iter()
        .map(|&rho| gallager_e0(k, i, p, noise, rho))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExponentCurve {
        k,
        i,
        p,
        channel: *noise,
        rho_grid: rho_grid.to_vec(),
        e0_values,
    })
}

/// Optimized exponent of the `P(E_i)` bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeiBound {
    /// `min_ρ [ρ log2 C(N-K,i) C(K,i) - T E0(ρ)]`, never above zero.
    pub log2_bound: f64,
    pub rho: f64,
}

impl PeiBound {
    pub fn probability(&self) -> f64 {
        self.log2_bound.exp2().min(1.0)
    }
}

/// Minimizes the bound exponent over a 101-point ρ grid, then refines the
/// best bracket by golden-section search (the exponent is convex in ρ).
pub fn pei_exponent(n: usize, k: usize, i: usize, t: usize, p: f64, noise: &NoiseModel) -> Result<PeiBound> {
    check_partition(k, i, p)?;
    check_enumerable(k)?;
    noise.validate()?;
    if k >= n {
        return Err(Error::param("K", format!("must be below N = {n}")));
    }
    if i > n - k {
        // No candidate set differs from the truth in i items.
        return Ok(PeiBound {
            log2_bound: f64::NEG_INFINITY,
            rho: 1.0,
        });
    }
    let log_count = log2_choose((n - k) as u64, i as u64) + log2_choose(k as u64, i as u64);
    let objective = |rho: f64| -> f64 {
        if rho == 0.0 {
            return 0.0;
        }
        rho * log_count + t as f64 * e0_sum(k, i, p, noise, rho).log2()
    };

    let step = 1.0 / (RHO_GRID_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..RHO_GRID_POINTS).map(|j| objective(j as f64 * step)).collect();
    let (best_j, &best_val) = grid
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("grid is non-empty");

    let mut lo = best_j.saturating_sub(1) as f64 * step;
    let mut hi = (best_j + 1).min(RHO_GRID_POINTS - 1) as f64 * step;
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - ratio * (hi - lo);
    let mut b = lo + ratio * (hi - lo);
    let (mut fa, mut fb) = (objective(a), objective(b));
    for _ in 0..GOLDEN_ITERATIONS {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - ratio * (hi - lo);
            fa = objective(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + ratio * (hi - lo);
            fb = objective(b);
        }
    }
    let (rho, val) = if fa <= fb { (a, fa) } else { (b, fb) };
    let (rho, val) = if val < best_val {
        (rho, val)
    } else {
        (best_j as f64 * step, best_val)
    };
    Ok(PeiBound {
        log2_bound: val.min(0.0),
        rho,
    })
}

/// Upper bound on `P(E_i)` averaged over codebooks, clamped to 1.
pub fn pei_upper_bound(n: usize, k: usize, i: usize, t: usize, p: f64, noise: &NoiseModel) -> Result<f64> {
    Ok(pei_exponent(n, k, i, t, p, noise)?.probability())
}
