//! Contiguous-subsequence counting and k-order Markov rule mining.
//!
//! A rule `p1..pn => q1..qm` is emitted when the joined sequence was seen at
//! least `k` times and `count(p1..pn q1..qm) / count(p1..pn)` reaches the
//! confidence cut-off. Counts and confidences are exact integers and ratios.

use std::collections::{BTreeSet, HashMap};

use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::intern::PageId;
use crate::num::Count;
use crate::sessionizer::Session;

/// Occurrence counts of every contiguous page sequence up to `max_len`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SequenceCounts<C: Count> {
    counts: HashMap<Vec<PageId>, C>,
    max_len: usize,
}

impl<C: Count> SequenceCounts<C> {
    pub fn new(max_len: usize) -> Self {
        Self {
            counts: HashMap::new(),
            max_len,
        }
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn get(&self, pattern: &[PageId]) -> C {
        self.counts.get(pattern).copied().unwrap_or_else(C::zero)
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[PageId], C)> + '_ {
        self.counts.iter().map(|(k, &v)| (k.as_slice(), v))
    }

    /// Adds every contiguous window of `pages` up to `max_len`, overlapping
    /// occurrences included.
    pub fn add_sequence(&mut self, pages: &[PageId]) {
        for start in 0..pages.len() {
            let end_max = (start + self.max_len).min(pages.len());
            for end in start + 1..=end_max {
                let slot = self
                    .counts
                    .entry(pages[start..end].to_vec())
                    .or_insert_with(C::zero);
                *slot = *slot + C::one();
            }
        }
    }

    /// Sums another table into this one. Both must use the same `max_len`.
    pub fn merge(&mut self, other: &SequenceCounts<C>) {
        debug_assert_eq!(self.max_len, other.max_len);
        for (k, &v) in &other.counts {
            let slot = self.counts.entry(k.clone()).or_insert_with(C::zero);
            *slot = *slot + v;
        }
    }
}

/// Counts contiguous subsequences of each page sequence.
pub fn count_sequences<'a, C, I>(sequences: I, max_len: usize) -> Result<SequenceCounts<C>>
where
    C: Count,
    I: IntoIterator<Item = &'a [PageId]>,
{
    if max_len < 2 {
        return Err(Error::Config(format!(
            "max pattern length must be >= 2, got {max_len}"
        )));
    }
    let mut counts = SequenceCounts::new(max_len);
    for seq in sequences {
        counts.add_sequence(seq);
    }
    Ok(counts)
}

/// [`count_sequences`] over the visit pages of each session.
pub fn count_sessions<C: Count>(sessions: &[Session], max_len: usize) -> Result<SequenceCounts<C>> {
    let pages: Vec<Vec<PageId>> = sessions.iter().map(|s| s.pages().collect()).collect();
    count_sequences(pages.iter().map(Vec::as_slice), max_len)
}

/// Minimum support: half the highest count among patterns of length two or
/// more, rounded down, never below one.
pub fn dynamic_threshold<C: Count>(counts: &SequenceCounts<C>) -> C {
    let two = C::one() + C::one();
    let f_max = counts
        .iter()
        .filter(|(p, _)| p.len() >= 2)
        .map(|(_, c)| c)
        .max()
        .unwrap_or_else(C::zero);
    (f_max / two).max(C::one())
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MarkovRule<C: Count> {
    pub head: Vec<PageId>,
    pub tail: Vec<PageId>,
    /// Occurrences of `head` followed by `tail`.
    pub support: C,
    pub confidence: Ratio<C>,
}

impl<C: Count> MarkovRule<C> {
    pub fn order(&self) -> usize {
        self.head.len()
    }

    /// `head` followed by `tail`.
    pub fn sequence(&self) -> impl Iterator<Item = PageId> + '_ {
        self.head.iter().chain(self.tail.iter()).copied()
    }

    pub fn sequence_len(&self) -> usize {
        self.head.len() + self.tail.len()
    }

    pub fn is_valid(&self) -> bool {
        !self.head.is_empty()
            && !self.tail.is_empty()
            && !self.support.is_zero()
            && !self.confidence.numer().is_zero()
            && self.confidence <= Ratio::from_integer(C::one())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MiningParams<C: Count> {
    /// Confidence cut-off in `(0, 1]`.
    pub cutoff: Ratio<C>,
    /// Minimum support.
    pub min_support: C,
    pub max_order: usize,
    pub max_tail: usize,
}

impl<C: Count> MiningParams<C> {
    pub fn new(cutoff: Ratio<C>, min_support: C) -> Self {
        Self {
            cutoff,
            min_support,
            max_order: 3,
            max_tail: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cutoff.numer().is_zero() || self.cutoff > Ratio::from_integer(C::one()) {
            return Err(Error::InvalidCutoff(format!(
                "{}/{}",
                self.cutoff.numer(),
                self.cutoff.denom()
            )));
        }
        if self.min_support.is_zero() {
            return Err(Error::Config("minimum support must be >= 1".into()));
        }
        if self.max_order == 0 || self.max_tail == 0 {
            return Err(Error::Config("max_order and max_tail must be >= 1".into()));
        }
        Ok(())
    }

    /// Longest pattern the counts must cover for these parameters.
    pub fn pattern_len(&self) -> usize {
        (self.max_order + self.max_tail).max(2)
    }
}

/// `count(head ++ tail) / count(head)`.
pub fn rule_confidence<C: Count>(
    head: &[PageId],
    tail: &[PageId],
    counts: &SequenceCounts<C>,
) -> Result<Ratio<C>> {
    let head_count = counts.get(head);
    if head.is_empty() || head_count.is_zero() {
        return Err(Error::UnseenHead);
    }
    let joined: Vec<PageId> = head.iter().chain(tail).copied().collect();
    Ok(Ratio::new(counts.get(&joined), head_count))
}

/// Emits every rule allowed by `params`, sorted by `(head, tail)`.
///
/// Heads and tails longer than the counted pattern length are never
/// produced, so `counts` should be built with at least
/// [`MiningParams::pattern_len`].
pub fn mine_rules<C: Count>(
    counts: &SequenceCounts<C>,
    params: &MiningParams<C>,
) -> Result<Vec<MarkovRule<C>>> {
    params.validate()?;
    let mut rules = Vec::new();
    for (pattern, support) in counts.iter() {
        if pattern.len() < 2 || support < params.min_support {
            continue;
        }
        for split in 1..pattern.len() {
            let (head, tail) = pattern.split_at(split);
            if head.len() > params.max_order || tail.len() > params.max_tail {
                continue;
            }
            let confidence = Ratio::new(support, counts.get(head));
            if confidence >= params.cutoff {
                rules.push(MarkovRule {
                    head: head.to_vec(),
                    tail: tail.to_vec(),
                    support,
                    confidence,
                });
            }
        }
    }
    rules.sort();
    Ok(rules)
}

/// Keeps only rules whose full sequence is not a contiguous part of another
/// rule's full sequence, and for each surviving sequence only the split with
/// the shortest head.
///
/// This collapses chains like `A => B`, `B => C`, `A => B, C` and
/// `A, B => C` into the single rule `A => B, C`.
pub fn maximal_rules<C: Count>(rules: &[MarkovRule<C>]) -> Vec<MarkovRule<C>> {
    let sequences: BTreeSet<Vec<PageId>> = rules.iter().map(|r| r.sequence().collect()).collect();
    let is_covered = |seq: &[PageId]| {
        sequences
            .iter()
            .any(|other| other.len() > seq.len() && other.windows(seq.len()).any(|w| w == seq))
    };

    let mut best: HashMap<Vec<PageId>, &MarkovRule<C>> = HashMap::new();
    for rule in rules {
        let seq: Vec<PageId> = rule.sequence().collect();
        if is_covered(&seq) {
            continue;
        }
        best.entry(seq)
            .and_modify(|cur| {
                if (rule.head.len(), &rule.head) < (cur.head.len(), &cur.head) {
                    *cur = rule;
                }
            })
            .or_insert(rule);
    }
    let mut out: Vec<MarkovRule<C>> = best.into_values().cloned().collect();
    out.sort();
    out
}
