//! Rough-set filtering of sessions.
//!
//! Sessions form the universe of an information system whose attributes are
//! pages and whose values are dwell buckets. The indiscernibility partition
//! over a set of attributes groups sessions that look identical on those
//! pages; the lower approximation of a target set is then the union of the
//! blocks that lie entirely inside it.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::intern::{Interner, PageId};
use crate::sessionizer::{dwell_profile, Session};

pub type SessionId = usize;
pub type SessionSet = BTreeSet<SessionId>;

/// Dwell-time bucketing for page attributes.
///
/// `thresholds` must start at 0 and be strictly increasing. An unvisited page
/// has value 0; a visited page has value equal to the number of thresholds
/// its dwell reaches, so `[0, 60]` gives 1 for short visits and 2 for visits
/// of a minute or more.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bucketing {
    pub thresholds: Vec<u64>,
    /// Pages seen in fewer sessions than this are not attributes.
    pub min_page_support: usize,
}

impl Default for Bucketing {
    fn default() -> Self {
        Self {
            thresholds: vec![0, 60],
            min_page_support: 1,
        }
    }
}

impl Bucketing {
    pub fn validate(&self) -> Result<()> {
        let t = &self.thresholds;
        if t.len() < 2 || t[0] != 0 || t.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::DegenerateBucketing(t.clone()));
        }
        Ok(())
    }

    pub fn bucket(&self, dwell: Option<u64>) -> u8 {
        match dwell {
            None => 0,
            Some(d) => self.thresholds.iter().take_while(|&&t| d >= t).count() as u8,
        }
    }

    /// Number of distinct values an attribute may take.
    pub fn value_count(&self) -> usize {
        self.thresholds.len() + 1
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InformationSystem {
    /// Page each attribute column stands for.
    attributes: Vec<PageId>,
    /// `rows[session][attribute]`.
    rows: Vec<Vec<u8>>,
    value_count: usize,
}

impl InformationSystem {
    /// Builds a system from an explicit value table; used for small
    /// hand-made examples. Every row must have one value per attribute and
    /// every value must be below `value_count`.
    pub fn from_table(
        attributes: Vec<PageId>,
        rows: Vec<Vec<u8>>,
        value_count: usize,
    ) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::NoSessions);
        }
        for row in &rows {
            if row.len() != attributes.len() {
                return Err(Error::Config(
                    "row width does not match attribute count".into(),
                ));
            }
            if row.iter().any(|&v| v as usize >= value_count) {
                return Err(Error::Config("value outside the attribute domain".into()));
            }
        }
        Ok(Self {
            attributes,
            rows,
            value_count,
        })
    }

    pub fn universe_len(&self) -> usize {
        self.rows.len()
    }

    pub fn universe(&self) -> SessionSet {
        (0..self.rows.len()).collect()
    }

    pub fn attributes(&self) -> &[PageId] {
        &self.attributes
    }

    pub fn all_attributes(&self) -> Vec<usize> {
        (0..self.attributes.len()).collect()
    }

    pub fn value(&self, session: SessionId, attribute: usize) -> u8 {
        self.rows[session][attribute]
    }

    pub fn row(&self, session: SessionId) -> &[u8] {
        &self.rows[session]
    }

    pub fn value_count(&self) -> usize {
        self.value_count
    }

    /// CSV matrix with one row per session and one column per attribute.
    pub fn to_csv(&self, interner: &Interner) -> String {
        let mut out = String::from("session");
        for page in &self.attributes {
            out.push(',');
            out.push_str(&csv_field(interner.resolve(*page)));
        }
        out.push('\n');
        for (id, row) in self.rows.iter().enumerate() {
            let _ = write!(out, "{id}");
            for v in row {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Session ids are positions in `sessions`.
pub fn build_information_system(
    sessions: &[Session],
    bucketing: &Bucketing,
) -> Result<InformationSystem> {
    if sessions.is_empty() {
        return Err(Error::NoSessions);
    }
    bucketing.validate()?;

    let profiles: Vec<_> = sessions.iter().map(dwell_profile).collect();
    let mut support: HashMap<PageId, usize> = HashMap::new();
    for p in &profiles {
        for page in p.per_page.keys() {
            *support.entry(*page).or_default() += 1;
        }
    }
    let mut attributes: Vec<PageId> = support
        .into_iter()
        .filter(|&(_, n)| n >= bucketing.min_page_support)
        .map(|(page, _)| page)
        .collect();
    attributes.sort_unstable();

    let rows = profiles
        .iter()
        .map(|p| {
            attributes
                .iter()
                .map(|page| bucketing.bucket(p.per_page.get(page).copied()))
                .collect()
        })
        .collect();

    Ok(InformationSystem {
        attributes,
        rows,
        value_count: bucketing.value_count(),
    })
}

/// Disjoint blocks covering the universe, each sorted, ordered by their
/// smallest member.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    pub blocks: Vec<Vec<SessionId>>,
}

impl Partition {
    pub fn block_of(&self, session: SessionId) -> Option<&[SessionId]> {
        self.blocks
            .iter()
            .find(|b| b.binary_search(&session).is_ok())
            .map(Vec::as_slice)
    }

    fn universe(&self) -> SessionSet {
        self.blocks.iter().flatten().copied().collect()
    }
}

pub fn indiscernibility_partition(
    system: &InformationSystem,
    attributes: &[usize],
) -> Result<Partition> {
    if attributes.is_empty() {
        return Err(Error::EmptyAttributeSubset);
    }
    if let Some(&bad) = attributes.iter().find(|&&a| a >= system.attributes.len()) {
        return Err(Error::UnknownAttribute(bad));
    }

    let mut index: HashMap<Vec<u8>, usize> = HashMap::new();
    let mut blocks: Vec<Vec<SessionId>> = Vec::new();
    for (id, row) in system.rows.iter().enumerate() {
        let key: Vec<u8> = attributes.iter().map(|&a| row[a]).collect();
        let slot = *index.entry(key).or_insert_with(|| {
            blocks.push(Vec::new());
            blocks.len() - 1
        });
        blocks[slot].push(id);
    }
    Ok(Partition { blocks })
}

fn check_target(partition: &Partition, target: &SessionSet) -> Result<()> {
    let universe = partition.universe();
    match target.iter().find(|s| !universe.contains(s)) {
        Some(&s) => Err(Error::TargetOutsideUniverse(s)),
        None => Ok(()),
    }
}

pub fn lower_approximation(partition: &Partition, target: &SessionSet) -> Result<SessionSet> {
    check_target(partition, target)?;
    Ok(partition
        .blocks
        .iter()
        .filter(|b| b.iter().all(|s| target.contains(s)))
        .flatten()
        .copied()
        .collect())
}

pub fn upper_approximation(partition: &Partition, target: &SessionSet) -> Result<SessionSet> {
    check_target(partition, target)?;
    Ok(partition
        .blocks
        .iter()
        .filter(|b| b.iter().any(|s| target.contains(s)))
        .flatten()
        .copied()
        .collect())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Approximations {
    pub lower: SessionSet,
    pub upper: SessionSet,
    pub boundary: SessionSet,
}

pub fn approximate(partition: &Partition, target: &SessionSet) -> Result<Approximations> {
    let lower = lower_approximation(partition, target)?;
    let upper = upper_approximation(partition, target)?;
    let boundary = upper.difference(&lower).copied().collect();
    Ok(Approximations {
        lower,
        upper,
        boundary,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TargetRule {
    /// Sessions whose total dwell reaches this quantile of the total-dwell
    /// distribution form the target set. Must be in `[0, 1]`.
    pub dwell_quantile: f64,
}

impl Default for TargetRule {
    fn default() -> Self {
        Self {
            dwell_quantile: 0.5,
        }
    }
}

impl TargetRule {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.dwell_quantile) {
            return Err(Error::Config(format!(
                "dwell quantile {} is outside [0, 1]",
                self.dwell_quantile
            )));
        }
        Ok(())
    }
}

/// Nearest-rank quantile of `values`; `q = 0` is the minimum.
pub fn quantile(values: &[u64], q: f64) -> Option<u64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    let rank = (q * sorted.len() as f64).ceil() as usize;
    Some(sorted[rank.saturating_sub(1).min(sorted.len() - 1)])
}

#[derive(Clone, Debug)]
pub struct QualitySelection {
    pub sessions: Vec<Session>,
    pub target: SessionSet,
    pub approximations: Approximations,
    /// Set when the lower approximation was empty and the target set was
    /// returned instead.
    pub fallback: bool,
}

/// Keeps the sessions in the lower approximation of the high-dwell target
/// set under the partition over all attributes.
pub fn select_quality_sessions(
    sessions: &[Session],
    bucketing: &Bucketing,
    rule: &TargetRule,
) -> Result<QualitySelection> {
    rule.validate()?;
    let system = build_information_system(sessions, bucketing)?;
    let totals: Vec<u64> = sessions.iter().map(|s| dwell_profile(s).total).collect();
    let cut = quantile(&totals, rule.dwell_quantile).ok_or(Error::NoSessions)?;
    let target: SessionSet = totals
        .iter()
        .enumerate()
        .filter(|&(_, &t)| t >= cut)
        .map(|(i, _)| i)
        .collect();

    let approximations = if system.attributes.is_empty() {
        // no attributes: the whole universe is one block
        let whole = Partition {
            blocks: vec![(0..sessions.len()).collect()],
        };
        approximate(&whole, &target)?
    } else {
        let partition = indiscernibility_partition(&system, &system.all_attributes())?;
        approximate(&partition, &target)?
    };

    let fallback = approximations.lower.is_empty();
    let chosen = if fallback {
        &target
    } else {
        &approximations.lower
    };
    Ok(QualitySelection {
        sessions: chosen.iter().map(|&i| sessions[i].clone()).collect(),
        target,
        approximations,
        fallback,
    })
}
