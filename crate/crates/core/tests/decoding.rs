//! The bit-packed ML scan against a plain reference: every K-subset scored
//! test by test from per-test probabilities, then sorted.

use gt_lab::combinatorics::Subsets;
use gt_lab::decoder::{decode_trace, log_likelihood, ml_decode, ml_decode_with, DecodeOptions};
use gt_lab::model::apply_channel;
use gt_lab::{Codebook, DefectiveSet, NoiseModel, OutcomeVector};
use proptest::prelude::*;

fn p_positive(noise: &NoiseModel, c: usize) -> f64 {
    match *noise {
        NoiseModel::NoiseFree => (c > 0) as u8 as f64,
        NoiseModel::Additive { q } => {
            if c > 0 {
                1.0
            } else {
                q
            }
        }
        NoiseModel::Dilution { u } => 1.0 - u.powi(c as i32),
    }
}

fn reference_ll(c: &Codebook, set: &[usize], y: &OutcomeVector, noise: &NoiseModel) -> f64 {
    let mut prob = 1.0f64;
    let mut ll = 0.0;
    for t in 0..c.n_tests() {
        let w = set.iter().filter(|&&i| c.bit(i, t)).count();
        let p1 = p_positive(noise, w);
        let pt = if y.bit(t) { p1 } else { 1.0 - p1 };
        prob *= pt;
        ll += pt.log2();
    }
    if prob == 0.0 {
        f64::NEG_INFINITY
    } else {
        ll
    }
}

struct Reference {
    /// `(ll, set)` sorted by decreasing likelihood, then lexicographically.
    ranked: Vec<(f64, Vec<usize>)>,
}

impl Reference {
    fn new(c: &Codebook, y: &OutcomeVector, k: usize, noise: &NoiseModel) -> Self {
        let mut ranked: Vec<(f64, Vec<usize>)> = Subsets::new(c.n_items(), k)
            .map(|s| (reference_ll(c, &s, y, noise), s))
            .collect();
        ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then_with(|| a.1.cmp(&b.1)));
        Reference { ranked }
    }

    /// Sets within `tol` of the best finite score, in lexicographic order.
    fn maximizers(&self, tol: f64) -> Vec<Vec<usize>> {
        let top = self.ranked[0].0;
        if top == f64::NEG_INFINITY {
            return Vec::new();
        }
        let mut sets: Vec<Vec<usize>> = self
            .ranked
            .iter()
            .take_while(|(ll, _)| top - ll <= tol)
            .map(|(_, s)| s.clone())
            .collect();
        sets.sort();
        sets
    }
}

fn check_against_reference(
    c: &Codebook,
    y: &OutcomeVector,
    k: usize,
    noise: &NoiseModel,
) -> Result<(), TestCaseError> {
    let reference = Reference::new(c, y, k, noise);
    let tops = reference.maximizers(1e-9);
    for parallel in [false, true] {
        let options = DecodeOptions {
            parallel,
            ..DecodeOptions::default()
        };
        let got = ml_decode_with(c, y, k, noise, &options).unwrap();
        if tops.is_empty() {
            prop_assert_eq!(got.log_likelihood, f64::NEG_INFINITY);
            prop_assert!(!got.tie);
            continue;
        }
        prop_assert_eq!(got.best_set.indices(), &tops[0][..]);
        prop_assert!((got.log_likelihood - reference.ranked[0].0).abs() < 1e-9);
        prop_assert_eq!(got.tie, tops.len() > 1);
        if let Some(rival) = &got.tied_with {
            prop_assert_eq!(rival.indices(), &tops[1][..]);
        }
    }
    Ok(())
}

#[test]
fn additive_decode_matches_ranked_list_of_all_pairs() {
    let noise = NoiseModel::Additive { q: 0.2 };
    let mut checked = 0;
    for seed in 0..20u64 {
        let c = Codebook::generate(12, 10, 0.3, 1000 + seed).unwrap();
        let truth = DefectiveSet::new(vec![(seed % 12) as usize, ((seed * 5 + 3) % 12) as usize], 12);
        let Ok(truth) = truth else { continue };
        let y = apply_channel(&c, &truth, &noise, seed).unwrap();
        let reference = Reference::new(&c, &y, 2, &noise);
        assert_eq!(reference.ranked.len(), 66);
        let got = ml_decode(&c, &y, 2, &noise).unwrap();
        let tops = reference.maximizers(1e-9);
        assert_eq!(got.best_set.indices(), &tops[0][..], "seed {seed}");
        assert_eq!(got.tie, tops.len() > 1, "seed {seed}");
        // the trace reproduces every one of the 66 scores
        let trace = decode_trace(&c, &y, 2, &noise, u128::MAX).unwrap();
        for (set, ll) in &trace {
            let want = reference_ll(&c, set.indices(), &y, &noise);
            assert!(ll == &want || (ll - want).abs() < 1e-9);
        }
        checked += 1;
    }
    assert!(checked >= 15);
}

#[test]
fn true_set_is_never_impossible_under_noise() {
    for seed in 0..50u64 {
        let c = Codebook::generate(15, 30, 0.3, seed).unwrap();
        let truth = DefectiveSet::new(vec![2, 7, 11], 15).unwrap();
        for noise in [NoiseModel::Additive { q: 0.3 }, NoiseModel::Dilution { u: 0.4 }] {
            let y = apply_channel(&c, &truth, &noise, seed ^ 0xabc).unwrap();
            assert!(log_likelihood(&c, &truth, &y, &noise).unwrap().is_finite());
        }
        let y = apply_channel(&c, &truth, &NoiseModel::NoiseFree, 0).unwrap();
        assert_eq!(
            log_likelihood(&c, &truth, &y, &NoiseModel::NoiseFree).unwrap(),
            0.0
        );
        let d = ml_decode(&c, &y, 3, &NoiseModel::NoiseFree).unwrap();
        assert_eq!(d.log_likelihood, 0.0);
        if d.is_error(&truth) {
            // only another zero-cost set can beat or tie the truth
            assert!(d.tie || d.best_set.indices() < truth.indices());
        }
    }
}

fn noise_strategy() -> impl Strategy<Value = NoiseModel> {
    prop_oneof![
        Just(NoiseModel::NoiseFree),
        (0.0..1.0f64).prop_map(|q| NoiseModel::Additive { q }),
        (0.0..1.0f64).prop_map(|u| NoiseModel::Dilution { u }),
        Just(NoiseModel::Dilution { u: 0.0 }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn matches_scalar_reference(n in 2usize..=12, k_pick in 1usize..=3, t in 1usize..=40, p in 0.1..0.6f64,
                                seed in any::<u64>(), noise_seed in any::<u64>(), noise in noise_strategy(),
                                truth_seed in any::<u64>()) {
        let k = k_pick.min(n);
        let c = Codebook::generate(n, t, p, seed).unwrap();
        let truth = gt_lab::montecarlo::trial_seeds(truth_seed, 0, n, k).truth;
        let y = apply_channel(&c, &truth, &noise, noise_seed).unwrap();
        check_against_reference(&c, &y, k, &noise)?;
    }

    #[test]
    fn arbitrary_outcomes_match_reference(n in 2usize..=10, k in 1usize..=3, t in 1usize..=20,
                                          seed in any::<u64>(), bits in prop::collection::vec(0u8..=1, 20),
                                          noise in noise_strategy()) {
        // outcomes not produced by any channel exercise the -inf paths
        let k = k.min(n);
        let c = Codebook::generate(n, t, 0.35, seed).unwrap();
        let y = OutcomeVector::from_bits(&bits[..t]).unwrap();
        check_against_reference(&c, &y, k, &noise)?;
    }

    #[test]
    fn relabelling_items_relabels_the_decode(n in 3usize..=12, k in 1usize..=3, t in 4usize..=40,
                                             seed in any::<u64>(), noise_seed in any::<u64>(),
                                             perm in Just((0..12usize).collect::<Vec<_>>()).prop_shuffle(),
                                             noise in noise_strategy()) {
        let k = k.min(n - 1);
        let perm: Vec<usize> = perm.into_iter().filter(|&i| i < n).collect();
        let c = Codebook::generate(n, t, 0.3, seed).unwrap();
        let truth = gt_lab::montecarlo::trial_seeds(seed, 1, n, k).truth;
        let y = apply_channel(&c, &truth, &noise, noise_seed).unwrap();
        let d = ml_decode(&c, &y, k, &noise).unwrap();
        prop_assume!(!d.tie && d.log_likelihood.is_finite());

        // item i of the original is item perm[i] of the relabelled codebook
        let mut rows = vec![vec![0u8; t]; n];
        for i in 0..n {
            for (s, cell) in rows[perm[i]].iter_mut().enumerate() {
                *cell = c.bit(i, s) as u8;
            }
        }
        let relabelled = Codebook::from_rows(&rows).unwrap();
        let d2 = ml_decode(&relabelled, &y, k, &noise).unwrap();
        let want = DefectiveSet::new(d.best_set.indices().iter().map(|&i| perm[i]).collect(), n).unwrap();
        prop_assert!(!d2.tie);
        prop_assert_eq!(d2.best_set, want);
        prop_assert_eq!(d2.log_likelihood, d.log_likelihood);
    }
}
