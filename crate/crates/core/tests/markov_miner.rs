mod common;

use std::collections::BTreeMap;

use num_rational::Ratio;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use webprefetch::markov_miner::{
    count_sequences, dynamic_threshold, maximal_rules, mine_rules, MiningParams,
};
use webprefetch::{Counts, PageId};

fn random_sequences(seed: u64, n: usize, alphabet: u32) -> Vec<Vec<PageId>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let len = rng.gen_range(1..=8);
            common::random_pages(&mut rng, alphabet, len)
        })
        .collect()
}

fn counts_of(seqs: &[Vec<PageId>], max_len: usize) -> Counts {
    count_sequences(seqs.iter().map(Vec::as_slice), max_len).unwrap()
}

#[test]
fn counts_match_quadratic_scan() {
    let seqs = random_sequences(50, 50, 5);
    let counts = counts_of(&seqs, 4);
    let mut total = 0;
    for (pattern, c) in counts.iter() {
        assert_eq!(c, common::naive_count(&seqs, pattern), "{pattern:?}");
        total += 1;
    }
    // every window present in the data shows up, nothing else does
    let mut windows = std::collections::BTreeSet::new();
    for s in &seqs {
        for i in 0..s.len() {
            for j in i + 1..=(i + 4).min(s.len()) {
                windows.insert(s[i..j].to_vec());
            }
        }
    }
    assert_eq!(total, windows.len());
}

#[test]
fn threshold_matches_oracle() {
    for seed in 0..30 {
        let seqs = random_sequences(seed, 30, 4);
        let counts = counts_of(&seqs, 10);
        assert_eq!(
            dynamic_threshold(&counts),
            common::brute_force_threshold(&seqs)
        );
    }
}

#[test]
fn mining_matches_brute_force() {
    for seed in 0..40 {
        let seqs = random_sequences(seed, 25, 4);
        let mut params = MiningParams::new(Ratio::new(1, 3), 2);
        params.max_order = 2;
        params.max_tail = 2;
        let counts = counts_of(&seqs, params.pattern_len());
        let got = mine_rules(&counts, &params).unwrap();
        let want = common::brute_force_rules(&seqs, 4, 2, 2, params.cutoff, 2);
        assert_eq!(got, want, "seed {seed}");
    }
}

#[test]
fn single_step_confidences_sum_to_at_most_one() {
    let seqs = random_sequences(8, 60, 5);
    let counts = counts_of(&seqs, 2);
    let mut params = MiningParams::new(Ratio::new(1, 1000), 1);
    params.max_order = 1;
    params.max_tail = 1;
    let rules = mine_rules(&counts, &params).unwrap();
    let mut sums: BTreeMap<Vec<PageId>, Ratio<u64>> = BTreeMap::new();
    for r in &rules {
        *sums
            .entry(r.head.clone())
            .or_insert_with(|| Ratio::from_integer(0)) += r.confidence;
    }
    for (head, sum) in sums {
        assert!(sum <= Ratio::from_integer(1), "{head:?} sums to {sum}");
        // the missing mass is the share of occurrences that end a sequence
        let ends = seqs.iter().filter(|s| s.last() == Some(&head[0])).count() as u64;
        let occ = common::naive_count(&seqs, &head);
        assert_eq!(sum, Ratio::new(occ - ends, occ));
    }
}

#[test]
fn results_do_not_depend_on_input_order() {
    let mut seqs = random_sequences(99, 40, 5);
    let params = MiningParams::new(Ratio::new(1, 2), 1);
    let a = mine_rules(&counts_of(&seqs, params.pattern_len()), &params).unwrap();
    seqs.reverse();
    let b = mine_rules(&counts_of(&seqs, params.pattern_len()), &params).unwrap();
    assert_eq!(a, b);
}

proptest! {
    #[test]
    fn higher_cutoff_gives_subset(
        seed in any::<u64>(),
        lo in 1u64..10,
        step in 0u64..10,
    ) {
        let seqs = random_sequences(seed, 15, 4);
        let counts = counts_of(&seqs, 5);
        let loose = mine_rules(&counts, &MiningParams::new(Ratio::new(lo, 10), 1)).unwrap();
        let hi = (lo + step).min(10);
        let strict = mine_rules(&counts, &MiningParams::new(Ratio::new(hi, 10), 1)).unwrap();
        for r in &strict {
            prop_assert!(loose.binary_search(r).is_ok());
        }
    }

    #[test]
    fn mined_rules_are_well_formed(seed in any::<u64>()) {
        let seqs = random_sequences(seed, 15, 4);
        let params = MiningParams::new(Ratio::new(1, 4), 1);
        let counts = counts_of(&seqs, params.pattern_len());
        let rules = mine_rules(&counts, &params).unwrap();
        for r in &rules {
            prop_assert!(r.is_valid());
            prop_assert!(r.order() <= params.max_order && r.tail.len() <= params.max_tail);
            prop_assert!(r.confidence >= params.cutoff);
        }
        for w in rules.windows(2) {
            prop_assert!(w[0] < w[1]);
        }
        let kept = maximal_rules(&rules);
        for r in &kept {
            prop_assert!(rules.binary_search(r).is_ok());
        }
    }
}
