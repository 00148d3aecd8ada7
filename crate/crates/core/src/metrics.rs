//! Trace replay, hit/precision/bandwidth accounting and result-listing
//! arithmetic.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::net::IpAddr;

use chrono::{DateTime, Duration, FixedOffset};
use num_integer::Integer;
use num_rational::Ratio;
use num_traits::PrimInt;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intern::{Interner, PageId};
use crate::log_ingest::LogRecord;
use crate::num::{ratio_to_f64, Count};
use crate::prefetch_agent::{
    Access, Actions, AgentParams, AgentState, CacheModel, GroupTable, SizeTable,
};
use crate::rule_repo::RuleRepository;
use crate::sessionizer::DEFAULT_GAP_SECS;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SimReport {
    pub requests: u64,
    pub hits: u64,
    pub prefetch_issued: u64,
    pub prefetch_used: u64,
    pub bytes_prefetched: u64,
    pub bytes_wasted: u64,
    pub crawl_requests: u64,
}

impl SimReport {
    /// `hits / requests`, zero for an empty replay.
    pub fn hit_rate(&self) -> Ratio<u64> {
        ratio_or_zero(self.hits, self.requests)
    }

    /// `prefetch_used / prefetch_issued`, zero when nothing was prefetched.
    pub fn precision(&self) -> Ratio<u64> {
        ratio_or_zero(self.prefetch_used, self.prefetch_issued)
    }

    pub fn merge(&mut self, other: &SimReport) {
        self.requests += other.requests;
        self.hits += other.hits;
        self.prefetch_issued += other.prefetch_issued;
        self.prefetch_used += other.prefetch_used;
        self.bytes_prefetched += other.bytes_prefetched;
        self.bytes_wasted += other.bytes_wasted;
        self.crawl_requests += other.crawl_requests;
    }

    fn record(&self) -> ReportRecord {
        let hit_rate = self.hit_rate();
        let precision = self.precision();
        ReportRecord {
            requests: self.requests,
            hits: self.hits,
            prefetch_issued: self.prefetch_issued,
            prefetch_used: self.prefetch_used,
            bytes_prefetched: self.bytes_prefetched,
            bytes_wasted: self.bytes_wasted,
            crawl_requests: self.crawl_requests,
            hit_rate: format!("{}/{}", hit_rate.numer(), hit_rate.denom()),
            precision: format!("{}/{}", precision.numer(), precision.denom()),
            hit_rate_value: ratio_to_f64(&hit_rate),
            precision_value: ratio_to_f64(&precision),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.record()).expect("report serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: ReportRecord = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("invalid report json: {e}")))?;
        let report = SimReport {
            requests: r.requests,
            hits: r.hits,
            prefetch_issued: r.prefetch_issued,
            prefetch_used: r.prefetch_used,
            bytes_prefetched: r.bytes_prefetched,
            bytes_wasted: r.bytes_wasted,
            crawl_requests: r.crawl_requests,
        };
        if !report.is_consistent() {
            return Err(Error::Config("report counters are inconsistent".into()));
        }
        Ok(report)
    }

    /// `metric,value` rows.
    pub fn to_csv(&self) -> String {
        let r = self.record();
        let mut out = String::from("metric,value\n");
        for (k, v) in [
            ("requests", r.requests.to_string()),
            ("hits", r.hits.to_string()),
            ("prefetch_issued", r.prefetch_issued.to_string()),
            ("prefetch_used", r.prefetch_used.to_string()),
            ("bytes_prefetched", r.bytes_prefetched.to_string()),
            ("bytes_wasted", r.bytes_wasted.to_string()),
            ("crawl_requests", r.crawl_requests.to_string()),
            ("hit_rate", r.hit_rate),
            ("precision", r.precision),
        ] {
            let _ = writeln!(out, "{k},{v}");
        }
        out
    }

    pub fn is_consistent(&self) -> bool {
        self.hits <= self.requests
            && self.prefetch_used <= self.prefetch_issued
            && self.bytes_wasted <= self.bytes_prefetched
    }
}

fn ratio_or_zero(num: u64, den: u64) -> Ratio<u64> {
    if den == 0 {
        Ratio::from_integer(0)
    } else {
        Ratio::new(num, den)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReportRecord {
    requests: u64,
    hits: u64,
    prefetch_issued: u64,
    prefetch_used: u64,
    bytes_prefetched: u64,
    bytes_wasted: u64,
    crawl_requests: u64,
    hit_rate: String,
    precision: String,
    hit_rate_value: f64,
    precision_value: f64,
}

/// Side-by-side table of a baseline and a prefetching replay.
pub fn render_comparison(baseline: &SimReport, prefetch: &SimReport) -> String {
    let pct = |r: Ratio<u64>| format!("{:.2}%", 100.0 * ratio_to_f64(&r));
    let rows = [
        (
            "requests",
            baseline.requests.to_string(),
            prefetch.requests.to_string(),
        ),
        ("hits", baseline.hits.to_string(), prefetch.hits.to_string()),
        (
            "hit rate",
            pct(baseline.hit_rate()),
            pct(prefetch.hit_rate()),
        ),
        (
            "prefetch issued",
            baseline.prefetch_issued.to_string(),
            prefetch.prefetch_issued.to_string(),
        ),
        (
            "prefetch used",
            baseline.prefetch_used.to_string(),
            prefetch.prefetch_used.to_string(),
        ),
        (
            "precision",
            pct(baseline.precision()),
            pct(prefetch.precision()),
        ),
        (
            "bytes prefetched",
            baseline.bytes_prefetched.to_string(),
            prefetch.bytes_prefetched.to_string(),
        ),
        (
            "bytes wasted",
            baseline.bytes_wasted.to_string(),
            prefetch.bytes_wasted.to_string(),
        ),
        (
            "crawl requests",
            baseline.crawl_requests.to_string(),
            prefetch.crawl_requests.to_string(),
        ),
    ];
    let mut out = format!("{:<18} {:>14} {:>14}\n", "metric", "baseline", "prefetch");
    for (name, b, p) in rows {
        let _ = writeln!(out, "{name:<18} {b:>14} {p:>14}");
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReplayConfig {
    pub cache_capacity: usize,
    pub prefetch_enabled: bool,
    /// Inactivity gap after which a client's agent state is reset.
    pub session_gap: Duration,
    /// Size charged for pages never seen in the trace.
    pub default_size: u64,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        Self {
            cache_capacity: 32,
            prefetch_enabled: true,
            session_gap: Duration::seconds(DEFAULT_GAP_SECS),
            default_size: 1024,
        }
    }
}

/// One processed request, as seen by a replay observer.
pub struct ReplayEvent<'a, C: Count> {
    pub index: usize,
    pub client: IpAddr,
    pub group: Option<&'a str>,
    pub page: PageId,
    pub access: Access,
    /// `None` when the request bypassed the agent.
    pub actions: Option<&'a Actions>,
    pub agent: Option<&'a AgentState<C>>,
    pub cache: &'a CacheModel,
}

struct Client<C: Count> {
    cache: CacheModel,
    agent: Option<(usize, AgentState<C>)>,
    last_at: Option<DateTime<FixedOffset>>,
}

/// Replays `trace` and reports the aggregate counters.
///
/// Every client address gets its own cache. Clients inside a group are
/// served by that group's agent parameters; other clients, or every client
/// when prefetching is disabled, see a plain LRU cache.
pub fn replay<C: Count>(
    trace: &[LogRecord],
    repo: &RuleRepository<C>,
    interner: &mut Interner,
    groups: &GroupTable,
    config: &ReplayConfig,
) -> SimReport {
    replay_observed(trace, repo, interner, groups, config, |_| {})
}

/// [`replay`] with a callback invoked after every request.
pub fn replay_observed<C: Count, F>(
    trace: &[LogRecord],
    repo: &RuleRepository<C>,
    interner: &mut Interner,
    groups: &GroupTable,
    config: &ReplayConfig,
    mut observer: F,
) -> SimReport
where
    F: FnMut(&ReplayEvent<'_, C>),
{
    let mut order: Vec<&LogRecord> = trace.iter().collect();
    order.sort_by_key(|r| r.timestamp);

    let mut report = SimReport::default();
    let mut sizes = SizeTable::new(config.default_size);
    let mut clients: HashMap<IpAddr, Client<C>> = HashMap::new();
    let mut client_order: Vec<IpAddr> = Vec::new();

    for (index, rec) in order.into_iter().enumerate() {
        let page = interner.intern(&rec.resource);
        sizes.observe(page, rec.bytes);
        report.requests += 1;

        let client = clients.entry(rec.client_ip).or_insert_with(|| {
            client_order.push(rec.client_ip);
            let agent = if config.prefetch_enabled {
                groups
                    .groups()
                    .iter()
                    .position(|g| g.ip_ranges.iter().any(|n| n.contains(&rec.client_ip)))
                    .map(|gi| {
                        let params: AgentParams = groups.groups()[gi].agent();
                        (gi, AgentState::new(params, repo))
                    })
            } else {
                None
            };
            Client {
                cache: CacheModel::new(config.cache_capacity),
                agent,
                last_at: None,
            }
        });

        if let (Some(prev), Some((_, agent))) = (client.last_at, client.agent.as_mut()) {
            if rec.timestamp - prev > config.session_gap {
                agent.reset();
            }
        }
        client.last_at = Some(rec.timestamp);

        match client.agent.as_mut() {
            Some((gi, agent)) => {
                let actions = agent.on_request(page, repo, &mut client.cache, &sizes);
                if actions.access.is_hit() {
                    report.hits += 1;
                }
                if let Access::Hit {
                    first_use: true, ..
                } = actions.access
                {
                    report.prefetch_used += 1;
                }
                report.prefetch_issued += actions.prefetch.loaded.len() as u64;
                report.bytes_prefetched += actions.prefetch.bytes_prefetched;
                report.bytes_wasted += actions
                    .prefetch
                    .evicted_unused
                    .iter()
                    .map(|(_, b)| b)
                    .sum::<u64>();
                if let Some((_, b)) = actions.demand_evicted_unused {
                    report.bytes_wasted += b;
                }
                if actions.crawl_request {
                    report.crawl_requests += 1;
                }
                observer(&ReplayEvent {
                    index,
                    client: rec.client_ip,
                    group: Some(groups.groups()[*gi].group_id.as_str()),
                    page,
                    access: actions.access,
                    actions: Some(&actions),
                    agent: Some(agent),
                    cache: &client.cache,
                });
            }
            None => {
                let access = client.cache.access(page);
                if access.is_hit() {
                    report.hits += 1;
                } else {
                    client.cache.insert(
                        page,
                        crate::prefetch_agent::CacheEntry {
                            prefetched: false,
                            used: true,
                            bytes: sizes.size(page),
                        },
                    );
                }
                observer(&ReplayEvent {
                    index,
                    client: rec.client_ip,
                    group: None,
                    page,
                    access,
                    actions: None,
                    agent: None,
                    cache: &client.cache,
                });
            }
        }
    }

    for ip in &client_order {
        report.bytes_wasted += clients[ip].cache.unused_prefetched_bytes();
    }
    report
}

/// Search area of a result at 1-based `position`: the position times the
/// result page it lands on.
pub fn search_area<T: PrimInt>(position: T, page_size: T) -> Result<T> {
    if position <= T::zero() || page_size <= T::zero() {
        return Err(Error::NonPositive);
    }
    Ok(position * result_page(position, page_size))
}

/// 1-based result page of `position`, i.e. `ceil(position / page_size)`.
pub fn result_page<T: PrimInt>(position: T, page_size: T) -> T {
    let q = position / page_size;
    if position % page_size == T::zero() {
        q
    } else {
        q + T::one()
    }
}

/// `sa_prime / sa` in lowest terms.
pub fn search_area_ratio<T: Integer + Clone>(sa_prime: T, sa: T) -> Result<Ratio<T>> {
    if sa.is_zero() {
        return Err(Error::ZeroArea);
    }
    Ok(Ratio::new(sa_prime, sa))
}

/// A ranked result listing; relevancy runs from `len` at the top down to 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelevanceListing {
    pub entries: Vec<(PageId, u32)>,
    pub page_size: u32,
}

impl RelevanceListing {
    pub fn new(pages: Vec<PageId>, page_size: u32) -> Self {
        let n = pages.len() as u32;
        Self {
            entries: pages
                .into_iter()
                .enumerate()
                .map(|(i, p)| (p, n - i as u32))
                .collect(),
            page_size,
        }
    }

    pub fn pages(&self) -> impl Iterator<Item = PageId> + '_ {
        self.entries.iter().map(|&(p, _)| p)
    }

    /// 1-based position of `page`.
    pub fn position(&self, page: PageId) -> Option<u32> {
        self.entries
            .iter()
            .position(|&(p, _)| p == page)
            .map(|i| i as u32 + 1)
    }

    pub fn page_number(&self, page: PageId) -> Option<u32> {
        self.position(page).map(|p| result_page(p, self.page_size))
    }

    pub fn relevancy(&self, page: PageId) -> Option<u32> {
        self.entries
            .iter()
            .find(|&&(p, _)| p == page)
            .map(|&(_, r)| r)
    }
}

/// Pages that rules predict after `accessed`, best rule first: tails of
/// rules headed by `accessed`, then whatever follows `accessed` inside
/// longer rule sequences.
pub fn successors<C: Count>(repo: &RuleRepository<C>, accessed: PageId) -> Vec<PageId> {
    let mut out: Vec<PageId> = Vec::new();
    let mut push = |p: PageId| {
        if p != accessed && !out.contains(&p) {
            out.push(p);
        }
    };
    for rule in repo.lookup_by_head(&[accessed]) {
        rule.tail.iter().copied().for_each(&mut push);
    }
    for rule in repo.scan_containing(accessed) {
        let seq: Vec<PageId> = rule.sequence().collect();
        if let Some(pos) = seq.iter().position(|&p| p == accessed) {
            seq[pos + 1..].iter().copied().for_each(&mut push);
        }
    }
    out
}

/// Moves the rule successors of `accessed` that rank below it to the slots
/// right after it, keeping everything else in order. Relevancy factors are
/// reassigned by the new positions.
pub fn reposition<C: Count>(
    listing: &RelevanceListing,
    repo: &RuleRepository<C>,
    accessed: PageId,
) -> Result<RelevanceListing> {
    let at = listing
        .entries
        .iter()
        .position(|&(p, _)| p == accessed)
        .ok_or(Error::NotInListing)?;
    let below: Vec<PageId> = listing.entries[at + 1..].iter().map(|&(p, _)| p).collect();
    let promoted: Vec<PageId> = successors(repo, accessed)
        .into_iter()
        .filter(|p| below.contains(p))
        .collect();

    let mut pages: Vec<PageId> = listing.entries[..=at].iter().map(|&(p, _)| p).collect();
    pages.extend(promoted.iter().copied());
    pages.extend(below.into_iter().filter(|p| !promoted.contains(p)));
    Ok(RelevanceListing::new(pages, listing.page_size))
}
