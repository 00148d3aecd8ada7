//! Group-client agents.
//!
//! Each request is matched against the agent's active rule sequence. A
//! request that continues the sequence extends the hint list with the pages
//! that follow it; any other request clears the hints and looks for a new
//! rule whose head matches the most recent requests, longest suffix first.
//! If nothing matches, the request is handed to the (simulated) crawler.
//! After every request the hint list is loaded into an LRU cache.

use std::collections::{HashMap, VecDeque};
use std::net::IpAddr;

use indexmap::IndexMap;
use ipnet::IpNet;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intern::PageId;
use crate::markov_miner::MarkovRule;
use crate::num::Count;
use crate::rule_repo::{priority_order, RuleId, RuleRepository};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AgentParams {
    pub hint_capacity: usize,
    /// Recent-request window; raised to the repository's longest head.
    pub window: usize,
}

impl Default for AgentParams {
    fn default() -> Self {
        Self {
            hint_capacity: 8,
            window: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupClientConfig {
    pub group_id: String,
    pub ip_ranges: Vec<IpNet>,
    #[serde(default = "default_hint_capacity")]
    pub hint_capacity: usize,
    #[serde(default = "default_window")]
    pub window: usize,
}

fn default_hint_capacity() -> usize {
    AgentParams::default().hint_capacity
}

fn default_window() -> usize {
    AgentParams::default().window
}

impl GroupClientConfig {
    pub fn new(group_id: impl Into<String>, ip_ranges: Vec<IpNet>) -> Self {
        Self {
            group_id: group_id.into(),
            ip_ranges,
            hint_capacity: default_hint_capacity(),
            window: default_window(),
        }
    }

    pub fn agent(&self) -> AgentParams {
        AgentParams {
            hint_capacity: self.hint_capacity,
            window: self.window,
        }
    }
}

/// Validated set of groups with pairwise disjoint address ranges.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GroupTable {
    groups: Vec<GroupClientConfig>,
}

fn overlaps(a: &IpNet, b: &IpNet) -> bool {
    a.contains(&b.network()) || b.contains(&a.network())
}

impl GroupTable {
    pub fn new(groups: Vec<GroupClientConfig>) -> Result<Self> {
        for (i, g) in groups.iter().enumerate() {
            if g.ip_ranges.is_empty() {
                return Err(Error::Config(format!(
                    "group {:?} has no ip ranges",
                    g.group_id
                )));
            }
            if g.hint_capacity == 0 || g.window == 0 {
                return Err(Error::Config(format!(
                    "group {:?}: hint_capacity and window must be >= 1",
                    g.group_id
                )));
            }
            if groups[..i].iter().any(|o| o.group_id == g.group_id) {
                return Err(Error::Config(format!(
                    "duplicate group id {:?}",
                    g.group_id
                )));
            }
            for other in &groups[..i] {
                for a in &g.ip_ranges {
                    if let Some(b) = other.ip_ranges.iter().find(|b| overlaps(a, b)) {
                        return Err(Error::OverlappingRanges(a.to_string(), b.to_string()));
                    }
                }
            }
        }
        Ok(Self { groups })
    }

    pub fn groups(&self) -> &[GroupClientConfig] {
        &self.groups
    }

    pub fn ip_match(&self, ip: IpAddr) -> Option<&GroupClientConfig> {
        self.groups
            .iter()
            .find(|g| g.ip_ranges.iter().any(|net| net.contains(&ip)))
    }
}

/// The group whose ranges contain `ip`, if any.
pub fn ip_match(ip: IpAddr, groups: &GroupTable) -> Option<&str> {
    groups.ip_match(ip).map(|g| g.group_id.as_str())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Hint<C: Count> {
    pub page: PageId,
    pub rule: RuleId,
    pub priority: Ratio<C>,
}

/// Pages scheduled for prefetching, highest priority first, no duplicates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HintList<C: Count> {
    entries: Vec<Hint<C>>,
    capacity: usize,
}

impl<C: Count> HintList<C> {
    pub fn new(capacity: usize) -> Self {
        Self {
            entries: Vec::new(),
            capacity,
        }
    }

    pub fn entries(&self) -> &[Hint<C>] {
        &self.entries
    }

    pub fn pages(&self) -> impl Iterator<Item = PageId> + '_ {
        self.entries.iter().map(|h| h.page)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn contains(&self, page: PageId) -> bool {
        self.entries.iter().any(|h| h.page == page)
    }

    /// Adds `page`, or raises its priority if already present. Entries past
    /// capacity are dropped from the low end.
    pub fn offer(&mut self, page: PageId, rule: RuleId, priority: Ratio<C>) {
        if let Some(pos) = self.entries.iter().position(|h| h.page == page) {
            if self.entries[pos].priority >= priority {
                return;
            }
            self.entries.remove(pos);
        }
        let at = self.entries.partition_point(|h| h.priority >= priority);
        if at >= self.capacity {
            return;
        }
        self.entries.insert(
            at,
            Hint {
                page,
                rule,
                priority,
            },
        );
        self.entries.truncate(self.capacity);
    }

    pub fn remove(&mut self, page: PageId) {
        self.entries.retain(|h| h.page != page);
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CacheEntry {
    pub prefetched: bool,
    pub used: bool,
    pub bytes: u64,
}

impl CacheEntry {
    pub fn wasted(&self) -> bool {
        self.prefetched && !self.used
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Access {
    Hit { prefetched: bool, first_use: bool },
    Miss,
}

impl Access {
    pub fn is_hit(&self) -> bool {
        matches!(self, Access::Hit { .. })
    }
}

/// Entry-count bounded LRU cache. Front is least recently used.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CacheModel {
    capacity: usize,
    resident: IndexMap<PageId, CacheEntry>,
}

impl CacheModel {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "cache capacity must be positive");
        Self {
            capacity,
            resident: IndexMap::with_capacity(capacity + 1),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.resident.len()
    }

    pub fn is_empty(&self) -> bool {
        self.resident.is_empty()
    }

    pub fn contains(&self, page: PageId) -> bool {
        self.resident.contains_key(&page)
    }

    pub fn entry(&self, page: PageId) -> Option<&CacheEntry> {
        self.resident.get(&page)
    }

    /// Pages from least to most recently used.
    pub fn lru_order(&self) -> impl Iterator<Item = (PageId, &CacheEntry)> + '_ {
        self.resident.iter().map(|(&p, e)| (p, e))
    }

    fn touch(&mut self, page: PageId) -> Option<&mut CacheEntry> {
        let idx = self.resident.get_index_of(&page)?;
        let last = self.resident.len() - 1;
        self.resident.move_index(idx, last);
        self.resident.get_index_mut(last).map(|(_, e)| e)
    }

    /// Demand access. A hit marks the entry used and refreshes it.
    pub fn access(&mut self, page: PageId) -> Access {
        match self.touch(page) {
            Some(entry) => {
                let first_use = entry.prefetched && !entry.used;
                entry.used = true;
                Access::Hit {
                    prefetched: entry.prefetched,
                    first_use,
                }
            }
            None => Access::Miss,
        }
    }

    /// Inserts `page` as most recently used, evicting the LRU entry if full.
    /// Refreshes an already-resident page instead.
    pub fn insert(&mut self, page: PageId, entry: CacheEntry) -> Option<(PageId, CacheEntry)> {
        if self.touch(page).is_some() {
            return None;
        }
        let evicted = if self.resident.len() >= self.capacity {
            self.resident.shift_remove_index(0)
        } else {
            None
        };
        self.resident.insert(page, entry);
        evicted
    }

    /// Bytes of prefetched entries still resident and never used.
    pub fn unused_prefetched_bytes(&self) -> u64 {
        self.resident
            .values()
            .filter(|e| e.wasted())
            .map(|e| e.bytes)
            .sum()
    }
}

/// Last-seen object size per page.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SizeTable {
    sizes: HashMap<PageId, u64>,
    default: u64,
}

impl SizeTable {
    pub fn new(default: u64) -> Self {
        Self {
            sizes: HashMap::new(),
            default,
        }
    }

    pub fn observe(&mut self, page: PageId, bytes: u64) {
        self.sizes.insert(page, bytes);
    }

    pub fn size(&self, page: PageId) -> u64 {
        self.sizes.get(&page).copied().unwrap_or(self.default)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LoadOutcome {
    /// Pages newly brought into the cache.
    pub loaded: Vec<PageId>,
    pub bytes_prefetched: u64,
    /// Prefetched entries evicted before they were ever used.
    pub evicted_unused: Vec<(PageId, u64)>,
}

/// Loads hints into the cache in priority order.
///
/// At most `capacity` hints are considered per call so that a load never
/// evicts its own pages; resident pages are refreshed without being counted.
pub fn page_load<C: Count>(
    cache: &mut CacheModel,
    hints: &HintList<C>,
    sizes: &SizeTable,
) -> LoadOutcome {
    let mut out = LoadOutcome::default();
    for page in hints.pages().take(cache.capacity()) {
        if cache.touch(page).is_some() {
            continue;
        }
        let bytes = sizes.size(page);
        let entry = CacheEntry {
            prefetched: true,
            used: false,
            bytes,
        };
        if let Some((p, e)) = cache.insert(page, entry) {
            if e.wasted() {
                out.evicted_unused.push((p, e.bytes));
            }
        }
        out.loaded.push(page);
        out.bytes_prefetched += bytes;
    }
    out
}

/// Picks the highest-confidence rule; ties go to higher support, then the
/// smaller tail.
pub fn resolve_conflict<'a, C: Count>(
    candidates: &[&'a MarkovRule<C>],
) -> Option<&'a MarkovRule<C>> {
    candidates
        .iter()
        .copied()
        .min_by(|a, b| priority_order(a, b))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActiveSequence {
    pub rule: RuleId,
    /// Full rule sequence, head then tail.
    pub pages: Vec<PageId>,
    /// Index of the last page the client requested.
    pub cursor: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepOutcome {
    /// The request was the next page of the active sequence.
    Continued,
    /// A new rule was activated from the recent-request window.
    Matched { rule: RuleId, suffix_len: usize },
    /// No sequence continued and no rule head matched.
    NoMatch,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Actions {
    pub access: Access,
    pub outcome: StepOutcome,
    pub prefetch: LoadOutcome,
    /// Demand-fetched entries evicted while holding unused prefetched data.
    pub demand_evicted_unused: Option<(PageId, u64)>,
    pub crawl_request: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AgentState<C: Count> {
    recent: VecDeque<PageId>,
    window: usize,
    hints: HintList<C>,
    active: Option<ActiveSequence>,
}

impl<C: Count> AgentState<C> {
    pub fn new(params: AgentParams, repo: &RuleRepository<C>) -> Self {
        let window = params.window.max(repo.max_order()).max(1);
        Self {
            recent: VecDeque::with_capacity(window),
            window,
            hints: HintList::new(params.hint_capacity),
            active: None,
        }
    }

    pub fn hints(&self) -> &HintList<C> {
        &self.hints
    }

    pub fn active(&self) -> Option<&ActiveSequence> {
        self.active.as_ref()
    }

    pub fn recent(&self) -> impl Iterator<Item = PageId> + '_ {
        self.recent.iter().copied()
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// Forgets everything, e.g. at a session boundary.
    pub fn reset(&mut self) {
        self.recent.clear();
        self.hints.clear();
        self.active = None;
    }

    fn push_recent(&mut self, page: PageId) {
        if self.recent.len() == self.window {
            self.recent.pop_front();
        }
        self.recent.push_back(page);
    }

    /// Processes one demand request and loads the resulting hints.
    pub fn on_request(
        &mut self,
        page: PageId,
        repo: &RuleRepository<C>,
        cache: &mut CacheModel,
        sizes: &SizeTable,
    ) -> Actions {
        let access = cache.access(page);
        let mut demand_evicted_unused = None;
        if !access.is_hit() {
            let entry = CacheEntry {
                prefetched: false,
                used: true,
                bytes: sizes.size(page),
            };
            if let Some((p, e)) = cache.insert(page, entry) {
                if e.wasted() {
                    demand_evicted_unused = Some((p, e.bytes));
                }
            }
        }

        self.push_recent(page);
        self.hints.remove(page);

        let continues = self
            .active
            .as_ref()
            .is_some_and(|a| a.pages.get(a.cursor + 1) == Some(&page));

        let outcome = if continues {
            let active = self.active.as_mut().expect("checked above");
            active.cursor += 1;
            let rule = active.rule;
            let priority = repo.rules()[rule].confidence;
            for &next in &active.pages[active.cursor + 1..] {
                self.hints.offer(next, rule, priority);
            }
            if active.cursor + 1 == active.pages.len() {
                // sequence finished; chain into the next rule if one matches
                self.active = None;
                self.activate(repo);
            }
            StepOutcome::Continued
        } else {
            self.hints.clear();
            self.active = None;
            match self.activate(repo) {
                Some((rule, suffix_len)) => StepOutcome::Matched { rule, suffix_len },
                None => StepOutcome::NoMatch,
            }
        };

        let prefetch = page_load(cache, &self.hints, sizes);
        Actions {
            access,
            outcome,
            prefetch,
            demand_evicted_unused,
            crawl_request: outcome == StepOutcome::NoMatch,
        }
    }

    /// Looks up the recent window, follows the best rule and fills hints
    /// with its tail plus whatever follows each tail page in other rules.
    fn activate(&mut self, repo: &RuleRepository<C>) -> Option<(RuleId, usize)> {
        let recent: Vec<PageId> = self.recent.iter().copied().collect();
        let (suffix_len, candidates) = repo.match_window(&recent, self.window)?;
        let chosen = resolve_conflict(&candidates)?;
        let id = repo
            .id_of(&chosen.head, &chosen.tail)
            .expect("rule comes from this repository");

        for &page in &chosen.tail {
            self.hints.offer(page, id, chosen.confidence);
        }
        for &x in &chosen.tail {
            for other in repo.scan_containing(x) {
                let other_id = repo
                    .id_of(&other.head, &other.tail)
                    .expect("rule comes from this repository");
                let seq: Vec<PageId> = other.sequence().collect();
                if let Some(pos) = seq.iter().position(|&p| p == x) {
                    for &next in &seq[pos + 1..] {
                        self.hints.offer(next, other_id, other.confidence);
                    }
                }
            }
        }

        self.active = Some(ActiveSequence {
            rule: id,
            pages: chosen.sequence().collect(),
            cursor: chosen.head.len() - 1,
        });
        Some((id, suffix_len))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intern::Interner;

    fn net(s: &str) -> IpNet {
        s.parse().unwrap()
    }

    fn group(id: &str, ranges: &[&str]) -> GroupClientConfig {
        GroupClientConfig::new(id, ranges.iter().map(|r| net(r)).collect())
    }

    #[test]
    fn ip_matching() {
        let table = GroupTable::new(vec![
            group("G", &["10.1.0.0/16"]),
            group("H", &["192.168.0.0/24", "2001:db8::/32"]),
        ])
        .unwrap();
        assert_eq!(ip_match("10.1.2.3".parse().unwrap(), &table), Some("G"));
        assert_eq!(ip_match("2001:db8::1".parse().unwrap(), &table), Some("H"));
        assert_eq!(ip_match("10.2.0.1".parse().unwrap(), &table), None);
    }

    #[test]
    fn group_validation() {
        let overlap = GroupTable::new(vec![
            group("G", &["10.0.0.0/8"]),
            group("H", &["10.1.0.0/16"]),
        ]);
        assert!(matches!(overlap, Err(Error::OverlappingRanges(_, _))));
        assert!(GroupTable::new(vec![group("G", &[])]).is_err());
        assert!(GroupTable::new(vec![
            group("G", &["10.0.0.0/8"]),
            group("G", &["11.0.0.0/8"])
        ])
        .is_err());
    }

    #[test]
    fn hint_list_ordering_and_capacity() {
        let mut h = HintList::<u64>::new(3);
        h.offer(PageId(1), 0, Ratio::new(1, 2));
        h.offer(PageId(2), 0, Ratio::new(3, 4));
        h.offer(PageId(3), 0, Ratio::new(1, 2));
        h.offer(PageId(4), 0, Ratio::new(1, 4));
        let pages: Vec<u32> = h.pages().map(|p| p.0).collect();
        assert_eq!(pages, vec![2, 1, 3]);
        h.offer(PageId(3), 1, Ratio::from_integer(1));
        let pages: Vec<u32> = h.pages().map(|p| p.0).collect();
        assert_eq!(pages, vec![3, 2, 1]);
        h.offer(PageId(2), 1, Ratio::new(1, 8));
        assert_eq!(h.entries()[1].priority, Ratio::new(3, 4));
        h.remove(PageId(2));
        assert_eq!(h.len(), 2);
    }

    #[test]
    fn page_load_respects_capacity() {
        let mut cache = CacheModel::new(2);
        let mut hints = HintList::<u64>::new(8);
        for p in [1, 2, 3] {
            hints.offer(PageId(p), 0, Ratio::from_integer(1));
        }
        let out = page_load(&mut cache, &hints, &SizeTable::new(10));
        assert_eq!(out.loaded, vec![PageId(1), PageId(2)]);
        assert_eq!(out.bytes_prefetched, 20);
        assert!(cache.contains(PageId(1)) && cache.contains(PageId(2)));
        assert!(!cache.contains(PageId(3)));
    }

    #[test]
    fn page_load_refreshes_resident() {
        let mut cache = CacheModel::new(2);
        cache.insert(
            PageId(1),
            CacheEntry {
                prefetched: false,
                used: true,
                bytes: 5,
            },
        );
        cache.insert(
            PageId(2),
            CacheEntry {
                prefetched: false,
                used: true,
                bytes: 5,
            },
        );
        let mut hints = HintList::<u64>::new(8);
        hints.offer(PageId(1), 0, Ratio::from_integer(1));
        let out = page_load(&mut cache, &hints, &SizeTable::new(10));
        assert!(out.loaded.is_empty());
        assert_eq!(out.bytes_prefetched, 0);
        let order: Vec<u32> = cache.lru_order().map(|(p, _)| p.0).collect();
        assert_eq!(order, vec![2, 1]);
        assert!(!cache.entry(PageId(1)).unwrap().prefetched);
    }

    #[test]
    fn cache_flags() {
        let mut cache = CacheModel::new(1);
        cache.insert(
            PageId(1),
            CacheEntry {
                prefetched: true,
                used: false,
                bytes: 7,
            },
        );
        assert_eq!(cache.unused_prefetched_bytes(), 7);
        assert_eq!(
            cache.access(PageId(1)),
            Access::Hit {
                prefetched: true,
                first_use: true
            }
        );
        assert_eq!(
            cache.access(PageId(1)),
            Access::Hit {
                prefetched: true,
                first_use: false
            }
        );
        assert_eq!(cache.unused_prefetched_bytes(), 0);
        let evicted = cache.insert(
            PageId(2),
            CacheEntry {
                prefetched: true,
                used: false,
                bytes: 1,
            },
        );
        assert_eq!(evicted.map(|(p, e)| (p, e.used)), Some((PageId(1), true)));
        assert_eq!(cache.access(PageId(1)), Access::Miss);
    }

    fn rule(head: &[PageId], tail: &[PageId], support: u64, conf: (u64, u64)) -> MarkovRule<u64> {
        MarkovRule {
            head: head.to_vec(),
            tail: tail.to_vec(),
            support,
            confidence: Ratio::new(conf.0, conf.1),
        }
    }

    #[test]
    fn conflict_resolution() {
        let b = rule(&[PageId(0)], &[PageId(1)], 2, (2, 3));
        let c = rule(&[PageId(0)], &[PageId(2)], 1, (1, 3));
        assert_eq!(resolve_conflict(&[&c, &b]), Some(&b));
        assert_eq!(resolve_conflict(&[&c]), Some(&c));
        let five = rule(&[PageId(0)], &[PageId(3)], 5, (1, 2));
        let three = rule(&[PageId(0)], &[PageId(1)], 3, (1, 2));
        assert_eq!(resolve_conflict(&[&three, &five]), Some(&five));
        assert_eq!(resolve_conflict::<u64>(&[]), None);
    }

    fn four_rules() -> (Interner, RuleRepository<u64>) {
        let mut it = Interner::new();
        let text = "/u3|/u37|1|1/1\n/u2|/u12,/u18|1|1/1\n/u1|/u23,/u33|1|1/1\n/u17|/u21|1|1/1\n";
        let repo = RuleRepository::load(text.as_bytes(), &mut it).unwrap();
        (it, repo)
    }

    #[test]
    fn u3_then_u37_hits() {
        let (it, repo) = four_rules();
        let mut agent = AgentState::new(AgentParams::default(), &repo);
        let mut cache = CacheModel::new(4);
        let sizes = SizeTable::new(100);
        let u3 = it.get("/u3").unwrap();
        let u37 = it.get("/u37").unwrap();

        let a = agent.on_request(u3, &repo, &mut cache, &sizes);
        assert_eq!(a.access, Access::Miss);
        assert!(matches!(
            a.outcome,
            StepOutcome::Matched { suffix_len: 1, .. }
        ));
        assert_eq!(a.prefetch.loaded, vec![u37]);
        assert_eq!(agent.hints().pages().collect::<Vec<_>>(), vec![u37]);

        let b = agent.on_request(u37, &repo, &mut cache, &sizes);
        assert_eq!(
            b.access,
            Access::Hit {
                prefetched: true,
                first_use: true
            }
        );
        assert_eq!(b.outcome, StepOutcome::Continued);
        assert!(!b.crawl_request);
    }

    #[test]
    fn following_a_sequence() {
        // A => Y, X, Z
        let (a, y, x, z) = (PageId(0), PageId(1), PageId(2), PageId(3));
        let repo = RuleRepository::from_rules([rule(&[a], &[y, x, z], 3, (1, 1))]);
        let mut agent = AgentState::new(AgentParams::default(), &repo);
        let mut cache = CacheModel::new(8);
        let sizes = SizeTable::new(1);
        agent.on_request(a, &repo, &mut cache, &sizes);
        agent.on_request(y, &repo, &mut cache, &sizes);
        let out = agent.on_request(x, &repo, &mut cache, &sizes);
        assert_eq!(out.outcome, StepOutcome::Continued);
        assert!(out.access.is_hit());
        assert_eq!(agent.hints().pages().collect::<Vec<_>>(), vec![z]);
        assert_eq!(agent.active().unwrap().cursor, 2);
    }

    #[test]
    fn containment_expansion() {
        let (a, x, b, z, w) = (PageId(0), PageId(1), PageId(2), PageId(3), PageId(4));
        let repo = RuleRepository::from_rules([
            rule(&[a], &[x], 2, (1, 1)),
            rule(&[b], &[x, z], 2, (1, 2)),
            rule(&[w], &[b], 2, (1, 2)),
        ]);
        let mut agent = AgentState::new(AgentParams::default(), &repo);
        let mut cache = CacheModel::new(8);
        agent.on_request(a, &repo, &mut cache, &SizeTable::new(1));
        assert_eq!(agent.hints().pages().collect::<Vec<_>>(), vec![x, z]);
    }

    #[test]
    fn unmatched_request_crawls() {
        let (_, repo) = four_rules();
        let mut agent = AgentState::new(AgentParams::default(), &repo);
        let mut cache = CacheModel::new(4);
        let out = agent.on_request(PageId(999), &repo, &mut cache, &SizeTable::new(1));
        assert_eq!(out.access, Access::Miss);
        assert_eq!(out.outcome, StepOutcome::NoMatch);
        assert!(out.crawl_request);
        assert!(agent.hints().is_empty());
        assert!(out.prefetch.loaded.is_empty());
    }

    #[test]
    fn break_clears_hints_then_rematches() {
        let (it, repo) = four_rules();
        let mut agent = AgentState::new(AgentParams::default(), &repo);
        let mut cache = CacheModel::new(8);
        let sizes = SizeTable::new(1);
        agent.on_request(it.get("/u2").unwrap(), &repo, &mut cache, &sizes);
        assert_eq!(agent.hints().len(), 2);
        let out = agent.on_request(it.get("/u17").unwrap(), &repo, &mut cache, &sizes);
        assert!(matches!(out.outcome, StepOutcome::Matched { .. }));
        assert_eq!(
            agent.hints().pages().collect::<Vec<_>>(),
            vec![it.get("/u21").unwrap()]
        );
        let out = agent.on_request(it.get("/u12").unwrap(), &repo, &mut cache, &sizes);
        assert_eq!(out.outcome, StepOutcome::NoMatch);
        assert!(agent.hints().is_empty());
        agent.reset();
        assert_eq!(agent.recent().count(), 0);
    }

    #[test]
    fn window_grows_to_max_order() {
        let repo = RuleRepository::from_rules([rule(
            &[PageId(0), PageId(1), PageId(2), PageId(3)],
            &[PageId(4)],
            1,
            (1, 1),
        )]);
        let agent = AgentState::new(
            AgentParams {
                hint_capacity: 2,
                window: 1,
            },
            &repo,
        );
        assert_eq!(agent.window(), 4);
    }
}
