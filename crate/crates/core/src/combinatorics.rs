//! Binomial coefficients in the log domain and lexicographic subset walks.

use statrs::function::gamma::ln_gamma;
use std::f64::consts::LN_2;

/// Below this many factors the log-binomial is summed term by term, which
/// avoids the cancellation of two huge `ln Γ` values when `n` is large and
/// `k` is small.
const DIRECT_SUM_LIMIT: u64 = 1 << 20;

/// Natural log of `C(n, k)`; `-inf` when `k > n`.
pub fn ln_choose(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    if k == 0 {
        return 0.0;
    }
    if k <= DIRECT_SUM_LIMIT {
        // ln C(n,k) = sum_{j=1}^{k} ln((n - k + j) / j)
        let base = (n - k) as f64;
        return (1..=k).map(|j| (base / j as f64).ln_1p()).sum();
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Base-2 log of `C(n, k)`.
pub fn log2_choose(n: u64, k: u64) -> f64 {
    ln_choose(n, k) / LN_2
}

/// Exact `C(n, k)`, saturating at `u128::MAX`.
pub fn choose(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for j in 0..k {
        // acc * (n - j) / (j + 1) stays integral at every step
        let num = (n - j) as u128;
        match acc.checked_mul(num) {
            Some(v) => acc = v / (j as u128 + 1),
            None => {
                let g = gcd(acc, j as u128 + 1);
                let (a, d) = (acc / g, (j as u128 + 1) / g);
                match a.checked_mul(num / d) {
                    Some(v) if num.is_multiple_of(d) => acc = v,
                    _ => return u128::MAX,
                }
            }
        }
    }
    acc
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Probability mass `C(n, j) p^j (1-p)^(n-j)` evaluated in the log domain.
pub fn binomial_pmf(n: u64, j: u64, p: f64) -> f64 {
    if j > n {
        return 0.0;
    }
    let ln_p = if j == 0 { 0.0 } else { j as f64 * p.ln() };
    let ln_q = if j == n {
        0.0
    } else {
        (n - j) as f64 * (-p).ln_1p()
    };
    (ln_choose(n, j) + ln_p + ln_q).exp()
}

/// Lexicographic iterator over the K-subsets of `0..n`, yielding sorted
/// index vectors.
#[derive(Debug, Clone)]
pub struct Subsets {
    n: usize,
    current: Vec<usize>,
    done: bool,
}

impl Subsets {
    pub fn new(n: usize, k: usize) -> Self {
        Subsets {
            n,
            current: (0..k).collect(),
            done: k > n,
        }
    }
}

impl Iterator for Subsets {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.current.clone();
        let k = self.current.len();
        // rightmost position that can still advance
        let mut pos = k;
        while pos > 0 {
            pos -= 1;
            if self.current[pos] < self.n - k + pos {
                self.current[pos] += 1;
                for j in pos + 1..k {
                    self.current[j] = self.current[j - 1] + 1;
                }
                return Some(out);
            }
        }
        self.done = true;
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_binomials_are_exact() {
        assert_eq!(choose(5, 2), 10);
        assert_eq!(choose(30, 3), 4060);
        assert_eq!(choose(10, 0), 1);
        assert_eq!(choose(3, 5), 0);
        assert_eq!(choose(66, 33), 7219428434016265740);
    }

    #[test]
    fn choose_saturates() {
        assert_eq!(choose(1_000, 500), u128::MAX);
    }

    #[test]
    fn log_choose_edges() {
        assert_eq!(ln_choose(7, 0), 0.0);
        assert_eq!(ln_choose(7, 7), 0.0);
        assert_eq!(ln_choose(3, 4), f64::NEG_INFINITY);
        assert!((log2_choose(100, 1) - 100f64.log2()).abs() < 1e-13);
    }

    #[test]
    fn huge_n_small_k_keeps_relative_accuracy() {
        let n = 1_000_000_000u64;
        let want = (n as f64).log2();
        let got = log2_choose(n, 1);
        assert!(((got - want) / want).abs() < 1e-12);
    }

    #[test]
    fn subsets_in_lexicographic_order() {
        let all: Vec<_> = Subsets::new(4, 2).collect();
        assert_eq!(
            all,
            vec![
                vec![0, 1],
                vec![0, 2],
                vec![0, 3],
                vec![1, 2],
                vec![1, 3],
                vec![2, 3]
            ]
        );
        assert_eq!(Subsets::new(3, 0).count(), 1);
        assert_eq!(Subsets::new(2, 3).count(), 0);
        assert_eq!(Subsets::new(12, 3).count(), 220);
    }

    #[test]
    fn pmf_sums_to_one() {
        let total: f64 = (0..=25).map(|j| binomial_pmf(25, j, 0.17)).sum();
        assert!((total - 1.0).abs() < 1e-13);
    }
}
