#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};
use std::net::IpAddr;

use chrono::{DateTime, FixedOffset, TimeZone};
use num_rational::Ratio;
use rand::Rng;
use webprefetch::log_ingest::LogRecord;
use webprefetch::markov_miner::MarkovRule;
use webprefetch::roughset::{InformationSystem, SessionSet};
use webprefetch::{PageId, Rule};

pub const EPOCH: i64 = 1_268_388_000;

pub fn at(secs: i64) -> DateTime<FixedOffset> {
    FixedOffset::east_opt(0)
        .unwrap()
        .timestamp_opt(EPOCH + secs, 0)
        .unwrap()
}

pub fn record(ip: IpAddr, secs: i64, resource: &str, bytes: u64) -> LogRecord {
    LogRecord {
        client_ip: ip,
        timestamp: at(secs),
        method: "GET".into(),
        resource: resource.into(),
        protocol: Some("HTTP/1.0".into()),
        status: 200,
        bytes,
    }
}

pub fn random_pages<R: Rng>(rng: &mut R, alphabet: u32, len: usize) -> Vec<PageId> {
    (0..len)
        .map(|_| PageId(rng.gen_range(0..alphabet)))
        .collect()
}

/// Occurrences of `pattern` as a contiguous run, found by sliding over every
/// start position of every sequence.
pub fn naive_count(sequences: &[Vec<PageId>], pattern: &[PageId]) -> u64 {
    let mut n = 0;
    for seq in sequences {
        if seq.len() < pattern.len() {
            continue;
        }
        for i in 0..=seq.len() - pattern.len() {
            if (0..pattern.len()).all(|j| seq[i + j] == pattern[j]) {
                n += 1;
            }
        }
    }
    n
}

/// Every rule over `alphabet` with the given limits, built by enumerating all
/// head/tail combinations and counting each one from scratch.
pub fn brute_force_rules(
    sequences: &[Vec<PageId>],
    alphabet: u32,
    max_order: usize,
    max_tail: usize,
    cutoff: Ratio<u64>,
    min_support: u64,
) -> Vec<Rule> {
    fn words(alphabet: u32, len: usize) -> Vec<Vec<PageId>> {
        let mut out = vec![Vec::new()];
        for _ in 0..len {
            out = out
                .into_iter()
                .flat_map(|w| {
                    (0..alphabet).map(move |p| {
                        let mut w = w.clone();
                        w.push(PageId(p));
                        w
                    })
                })
                .collect();
        }
        out
    }

    let mut rules = Vec::new();
    for hl in 1..=max_order {
        for head in words(alphabet, hl) {
            let head_count = naive_count(sequences, &head);
            if head_count == 0 {
                continue;
            }
            for tl in 1..=max_tail {
                for tail in words(alphabet, tl) {
                    let joined: Vec<_> = head.iter().chain(&tail).copied().collect();
                    let support = naive_count(sequences, &joined);
                    if support == 0 || support < min_support {
                        continue;
                    }
                    let confidence = Ratio::new(support, head_count);
                    if confidence >= cutoff {
                        rules.push(MarkovRule {
                            head: head.clone(),
                            tail,
                            support,
                            confidence,
                        });
                    }
                }
            }
        }
    }
    rules.sort();
    rules
}

/// Half the largest count over all runs of length >= 2 present in the data.
pub fn brute_force_threshold(sequences: &[Vec<PageId>]) -> u64 {
    let mut best = 0;
    for seq in sequences {
        for i in 0..seq.len() {
            for j in i + 2..=seq.len() {
                best = best.max(naive_count(sequences, &seq[i..j]));
            }
        }
    }
    (best / 2).max(1)
}

/// Page names that exercise the escaping: separators, percent signs,
/// spaces, non-ASCII.
pub fn awkward_name<R: Rng>(rng: &mut R) -> String {
    const PIECES: &[&str] = &[
        "a", "b", "/", "%", "|", ",", " ", "é", "%7C", "x.html", "?", "\t", "ü/",
    ];
    let n = rng.gen_range(1..=5);
    (0..n)
        .map(|_| PIECES[rng.gen_range(0..PIECES.len())])
        .collect()
}

pub fn random_rule<R: Rng>(rng: &mut R, alphabet: u32) -> Rule {
    let head_len = rng.gen_range(1..=3);
    let tail_len = rng.gen_range(1..=2);
    let head_count = rng.gen_range(1..=1000u64);
    let support = rng.gen_range(1..=head_count);
    MarkovRule {
        head: random_pages(rng, alphabet, head_len),
        tail: random_pages(rng, alphabet, tail_len),
        support,
        confidence: Ratio::new(support, head_count),
    }
}

/// Hit count of a plain per-client LRU cache over `trace` in time order,
/// computed with a vector per client.
pub fn lru_baseline_hits(trace: &[LogRecord], capacity: usize) -> u64 {
    let mut order: Vec<&LogRecord> = trace.iter().collect();
    order.sort_by_key(|r| r.timestamp);
    let mut caches: HashMap<IpAddr, Vec<&str>> = Default::default();
    let mut hits = 0;
    for r in order {
        let c = caches.entry(r.client_ip).or_default();
        if let Some(i) = c.iter().position(|p| *p == r.resource) {
            hits += 1;
            c.remove(i);
        } else if c.len() == capacity {
            c.remove(0);
        }
        c.push(&r.resource);
    }
    hits
}

/// Blocks built by comparing every pair of objects on `attrs`.
pub fn brute_partition(system: &InformationSystem, attrs: &[usize]) -> Vec<BTreeSet<usize>> {
    let n = system.universe_len();
    let same = |x: usize, y: usize| {
        attrs
            .iter()
            .all(|&a| system.value(x, a) == system.value(y, a))
    };
    let mut blocks: Vec<BTreeSet<usize>> = Vec::new();
    for x in 0..n {
        let block: BTreeSet<usize> = (0..n).filter(|&y| same(x, y)).collect();
        if !blocks.contains(&block) {
            blocks.push(block);
        }
    }
    blocks
}

pub fn brute_lower_upper(
    blocks: &[BTreeSet<usize>],
    target: &SessionSet,
) -> (SessionSet, SessionSet) {
    let mut lower = SessionSet::new();
    let mut upper = SessionSet::new();
    for b in blocks {
        if b.is_subset(target) {
            lower.extend(b);
        }
        if !b.is_disjoint(target) {
            upper.extend(b);
        }
    }
    (lower, upper)
}
