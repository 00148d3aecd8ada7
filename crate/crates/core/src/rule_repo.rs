//! Indexed rule storage and the canonical rule file format.
//!
//! A rule file has one rule per line:
//!
//! ```text
//! /u2|/u12,/u18|4|1/1
//! ```
//!
//! i.e. `head|tail|support|num/den`, with pages comma-separated and `%`, `,`,
//! `|` and control characters percent-encoded inside page names. Lines are
//! sorted bytewise, so equal rule sets always serialize to equal bytes.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::io::{BufRead, Write};

use num_rational::Ratio;
use percent_encoding::{percent_decode_str, utf8_percent_encode, AsciiSet, CONTROLS};

use crate::error::{Error, Result};
use crate::intern::{Interner, PageId};
use crate::markov_miner::MarkovRule;
use crate::num::{parse_ratio, Count};

const PAGE_ESCAPE: &AsciiSet = &CONTROLS.add(b'%').add(b',').add(b'|');

pub type RuleId = usize;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RuleRepository<C: Count> {
    rules: Vec<MarkovRule<C>>,
    by_key: HashMap<(Vec<PageId>, Vec<PageId>), RuleId>,
    head_index: HashMap<Vec<PageId>, Vec<RuleId>>,
    containment_index: HashMap<PageId, Vec<RuleId>>,
}

impl<C: Count> Default for RuleRepository<C> {
    fn default() -> Self {
        Self {
            rules: Vec::new(),
            by_key: HashMap::new(),
            head_index: HashMap::new(),
            containment_index: HashMap::new(),
        }
    }
}

/// Lookup order: higher confidence first, then higher support, then the
/// smaller tail.
pub fn priority_order<C: Count>(a: &MarkovRule<C>, b: &MarkovRule<C>) -> Ordering {
    b.confidence
        .cmp(&a.confidence)
        .then(b.support.cmp(&a.support))
        .then_with(|| a.tail.cmp(&b.tail))
        .then_with(|| a.head.cmp(&b.head))
}

impl<C: Count> RuleRepository<C> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_rules(rules: impl IntoIterator<Item = MarkovRule<C>>) -> Self {
        let mut repo = Self::new();
        for r in rules {
            repo.insert(r);
        }
        repo
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn rules(&self) -> &[MarkovRule<C>] {
        &self.rules
    }

    pub fn get(&self, id: RuleId) -> Option<&MarkovRule<C>> {
        self.rules.get(id)
    }

    pub fn id_of(&self, head: &[PageId], tail: &[PageId]) -> Option<RuleId> {
        self.by_key.get(&(head.to_vec(), tail.to_vec())).copied()
    }

    /// Longest head stored.
    pub fn max_order(&self) -> usize {
        self.rules.iter().map(|r| r.head.len()).max().unwrap_or(0)
    }

    /// Adds a rule. A rule with the same head and tail is replaced only if
    /// the new one has higher support.
    pub fn insert(&mut self, rule: MarkovRule<C>) -> RuleId {
        debug_assert!(rule.is_valid());
        let key = (rule.head.clone(), rule.tail.clone());
        if let Some(&id) = self.by_key.get(&key) {
            if rule.support > self.rules[id].support {
                self.rules[id] = rule;
            }
            return id;
        }
        let id = self.rules.len();
        self.index(id, &rule);
        self.by_key.insert(key, id);
        self.rules.push(rule);
        id
    }

    fn index(&mut self, id: RuleId, rule: &MarkovRule<C>) {
        self.head_index
            .entry(rule.head.clone())
            .or_default()
            .push(id);
        let seq: Vec<PageId> = rule.sequence().collect();
        let mut seen = Vec::new();
        for &page in &seq[..seq.len() - 1] {
            if !seen.contains(&page) {
                seen.push(page);
                self.containment_index.entry(page).or_default().push(id);
            }
        }
    }

    /// Whether rebuilding the indices from the stored rules reproduces them.
    pub fn indices_consistent(&self) -> bool {
        let mut fresh = Self::new();
        for (id, rule) in self.rules.iter().enumerate() {
            fresh.index(id, rule);
            fresh
                .by_key
                .insert((rule.head.clone(), rule.tail.clone()), id);
        }
        fresh.head_index == self.head_index
            && fresh.containment_index == self.containment_index
            && fresh.by_key == self.by_key
    }

    fn sorted(&self, ids: Option<&Vec<RuleId>>) -> Vec<&MarkovRule<C>> {
        let mut out: Vec<&MarkovRule<C>> = ids
            .map(|ids| ids.iter().map(|&i| &self.rules[i]).collect())
            .unwrap_or_default();
        out.sort_by(|a, b| priority_order(a, b));
        out
    }

    /// Rules whose head equals `head` exactly, in [`priority_order`].
    pub fn lookup_by_head(&self, head: &[PageId]) -> Vec<&MarkovRule<C>> {
        self.sorted(self.head_index.get(head))
    }

    /// Tries the suffixes of `recent` from longest (at most `max_order`) to a
    /// single page and returns the first non-empty head match.
    pub fn match_window(
        &self,
        recent: &[PageId],
        max_order: usize,
    ) -> Option<(usize, Vec<&MarkovRule<C>>)> {
        let longest = max_order.min(recent.len());
        (1..=longest).rev().find_map(|len| {
            let found = self.lookup_by_head(&recent[recent.len() - len..]);
            (!found.is_empty()).then_some((len, found))
        })
    }

    /// Rules whose full sequence contains `page` anywhere but the last slot,
    /// in [`priority_order`].
    pub fn scan_containing(&self, page: PageId) -> Vec<&MarkovRule<C>> {
        self.sorted(self.containment_index.get(&page))
    }

    /// Canonical text form.
    pub fn to_canonical(&self, interner: &Interner) -> String {
        render_rules(&self.rules, interner)
    }

    pub fn save<W: Write>(&self, mut sink: W, interner: &Interner) -> Result<()> {
        sink.write_all(self.to_canonical(interner).as_bytes())?;
        Ok(())
    }

    /// Reads a rule file, interning page names into `interner`.
    pub fn load<R: BufRead>(source: R, interner: &mut Interner) -> Result<Self> {
        let mut repo = Self::new();
        for (idx, line) in source.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let rule = parse_rule_line(&line, interner).map_err(|reason| Error::RuleParse {
                line: idx + 1,
                reason,
            })?;
            repo.insert(rule);
        }
        Ok(repo)
    }
}

fn render_pages(pages: &[PageId], interner: &Interner) -> String {
    pages
        .iter()
        .map(|&p| utf8_percent_encode(interner.resolve(p), PAGE_ESCAPE).to_string())
        .collect::<Vec<_>>()
        .join(",")
}

pub fn render_rule<C: Count>(rule: &MarkovRule<C>, interner: &Interner) -> String {
    format!(
        "{}|{}|{}|{}/{}",
        render_pages(&rule.head, interner),
        render_pages(&rule.tail, interner),
        rule.support,
        rule.confidence.numer(),
        rule.confidence.denom()
    )
}

/// Canonical serialization: one line per rule, sorted bytewise.
pub fn render_rules<C: Count>(rules: &[MarkovRule<C>], interner: &Interner) -> String {
    let mut lines: Vec<String> = rules.iter().map(|r| render_rule(r, interner)).collect();
    lines.sort();
    lines.dedup();
    let mut out = lines.join("\n");
    if !out.is_empty() {
        out.push('\n');
    }
    out
}

fn parse_pages(field: &str, interner: &mut Interner) -> std::result::Result<Vec<PageId>, String> {
    if field.is_empty() {
        return Err("empty page list".into());
    }
    field
        .split(',')
        .map(|p| {
            if p.is_empty() {
                return Err("empty page name".to_string());
            }
            let decoded = percent_decode_str(p)
                .decode_utf8()
                .map_err(|_| format!("page {p:?} is not valid UTF-8 once decoded"))?;
            Ok(interner.intern(&decoded))
        })
        .collect()
}

pub fn parse_rule_line<C: Count>(
    line: &str,
    interner: &mut Interner,
) -> std::result::Result<MarkovRule<C>, String> {
    let fields: Vec<&str> = line.split('|').collect();
    if fields.len() != 4 {
        return Err(format!(
            "expected 4 '|'-separated fields, got {}",
            fields.len()
        ));
    }
    let head = parse_pages(fields[0], interner)?;
    let tail = parse_pages(fields[1], interner)?;
    let support: C = fields[2]
        .parse()
        .map_err(|_| format!("invalid support {:?}", fields[2]))?;
    let confidence: Ratio<C> =
        parse_ratio(fields[3]).ok_or_else(|| format!("invalid confidence {:?}", fields[3]))?;
    let rule = MarkovRule {
        head,
        tail,
        support,
        confidence,
    };
    if !rule.is_valid() {
        return Err("support must be positive and confidence in (0, 1]".into());
    }
    Ok(rule)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn four_rules(interner: &mut Interner) -> RuleRepository<u64> {
        let text = "/u3|/u37|1|1/1\n/u2|/u12,/u18|1|1/1\n/u1|/u23,/u33|1|1/1\n/u17|/u21|1|1/1\n";
        RuleRepository::load(text.as_bytes(), interner).unwrap()
    }

    fn rule(head: &[u32], tail: &[u32], support: u64, conf: (u64, u64)) -> MarkovRule<u64> {
        MarkovRule {
            head: head.iter().map(|&p| PageId(p)).collect(),
            tail: tail.iter().map(|&p| PageId(p)).collect(),
            support,
            confidence: Ratio::new(conf.0, conf.1),
        }
    }

    #[test]
    fn insert_and_lookup() {
        let mut repo = RuleRepository::new();
        repo.insert(rule(&[0], &[1], 2, (1, 1)));
        let found = repo.lookup_by_head(&[PageId(0)]);
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].tail, vec![PageId(1)]);
        repo.insert(rule(&[0], &[1], 2, (1, 1)));
        assert_eq!(repo.len(), 1);
        repo.insert(rule(&[0], &[1], 5, (1, 2)));
        assert_eq!(repo.len(), 1);
        assert_eq!(repo.rules()[0].support, 5);
        repo.insert(rule(&[0], &[1], 3, (1, 1)));
        assert_eq!(repo.rules()[0].support, 5);
        assert!(repo.indices_consistent());
    }

    #[test]
    fn four_rule_lookups() {
        let mut it = Interner::new();
        let repo = four_rules(&mut it);
        assert_eq!(repo.len(), 4);
        let u2 = repo.lookup_by_head(&[it.get("/u2").unwrap()]);
        assert_eq!(u2.len(), 1);
        assert_eq!(
            u2[0].tail,
            vec![it.get("/u12").unwrap(), it.get("/u18").unwrap()]
        );
        let u3 = repo.lookup_by_head(&[it.get("/u3").unwrap()]);
        assert_eq!(u3[0].tail, vec![it.get("/u37").unwrap()]);
        let u99 = it.intern("/u99");
        assert!(repo.lookup_by_head(&[u99]).is_empty());
        assert_eq!(repo.max_order(), 1);
    }

    #[test]
    fn lookup_order() {
        let repo = RuleRepository::from_rules([
            rule(&[0], &[3], 1, (1, 3)),
            rule(&[0], &[2], 3, (1, 3)),
            rule(&[0], &[1], 2, (2, 3)),
            rule(&[0], &[4], 3, (1, 3)),
        ]);
        let tails: Vec<u32> = repo
            .lookup_by_head(&[PageId(0)])
            .iter()
            .map(|r| r.tail[0].0)
            .collect();
        assert_eq!(tails, vec![1, 2, 4, 3]);
    }

    #[test]
    fn containment_excludes_last_position() {
        // A => Y, X, Z
        let repo = RuleRepository::from_rules([rule(&[0], &[1, 2, 3], 1, (1, 1))]);
        assert_eq!(repo.scan_containing(PageId(2)).len(), 1);
        assert!(repo.scan_containing(PageId(3)).is_empty());
        let last = RuleRepository::from_rules([rule(&[0], &[2], 1, (1, 1))]);
        assert!(last.scan_containing(PageId(2)).is_empty());
        assert_eq!(last.scan_containing(PageId(0)).len(), 1);
    }

    #[test]
    fn window_prefers_longest_suffix() {
        let repo = RuleRepository::from_rules([
            rule(&[1], &[5], 1, (1, 1)),
            rule(&[0, 1], &[6], 1, (1, 1)),
        ]);
        let (len, rules) = repo.match_window(&[0, 1].map(PageId), 3).unwrap();
        assert_eq!(len, 2);
        assert_eq!(rules[0].tail, vec![PageId(6)]);
        let (len, rules) = repo.match_window(&[2, 1].map(PageId), 3).unwrap();
        assert_eq!(len, 1);
        assert_eq!(rules[0].tail, vec![PageId(5)]);
        assert!(repo.match_window(&[PageId(1)], 0).is_none());
        assert!(repo.match_window(&[PageId(9)], 3).is_none());
    }

    #[test]
    fn canonical_round_trip() {
        let mut it = Interner::new();
        let repo = four_rules(&mut it);
        let text = repo.to_canonical(&it);
        assert_eq!(
            text,
            "/u17|/u21|1|1/1\n/u1|/u23,/u33|1|1/1\n/u2|/u12,/u18|1|1/1\n/u3|/u37|1|1/1\n"
        );
        let mut it2 = Interner::new();
        let back = RuleRepository::<u64>::load(text.as_bytes(), &mut it2).unwrap();
        assert_eq!(back.to_canonical(&it2), text);
        assert!(back.indices_consistent());

        let empty = RuleRepository::<u64>::new();
        assert_eq!(empty.to_canonical(&it), "");
        assert!(RuleRepository::<u64>::load(&b""[..], &mut it)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn escaped_page_names() {
        let mut it = Interner::new();
        let a = it.intern("/a,b|c%d");
        let b = it.intern("/x");
        let repo = RuleRepository::from_rules([MarkovRule {
            head: vec![a],
            tail: vec![b],
            support: 1u64,
            confidence: Ratio::new(1, 2),
        }]);
        let text = repo.to_canonical(&it);
        assert_eq!(text, "/a%2Cb%7Cc%25d|/x|1|1/2\n");
        let mut it2 = Interner::new();
        let back = RuleRepository::<u64>::load(text.as_bytes(), &mut it2).unwrap();
        assert_eq!(it2.resolve(back.rules()[0].head[0]), "/a,b|c%d");
    }

    #[test]
    fn malformed_lines() {
        let mut it = Interner::new();
        for (text, line) in [
            ("/a|/b|1|1/1\n/a|/b|1\n", 2),
            ("/a||1|1/1\n", 1),
            ("/a|/b|x|1/1\n", 1),
            ("/a|/b|1|3/2\n", 1),
            ("/a|/b|0|1/1\n", 1),
            ("/a|/b|1|1/0\n", 1),
            ("/a|/b,,/c|1|1/1\n", 1),
        ] {
            let err = RuleRepository::<u64>::load(text.as_bytes(), &mut it).unwrap_err();
            match err {
                Error::RuleParse { line: l, .. } => assert_eq!(l, line, "{text}"),
                other => panic!("unexpected {other}"),
            }
        }
    }
}
