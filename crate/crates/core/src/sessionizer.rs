//! Inactivity-timeout sessionization.
//!
//! Records are grouped by client address, stably sorted by time, and cut
//! wherever two consecutive requests are more than `gap` apart.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::io::BufRead;
use std::net::IpAddr;

use chrono::{DateTime, Duration, FixedOffset};
use percent_encoding::{percent_decode_str, utf8_percent_encode, AsciiSet, CONTROLS};

use crate::error::{Error, Result};
use crate::intern::{Interner, PageId};
use crate::log_ingest::LogRecord;

pub const DEFAULT_GAP_SECS: i64 = 30 * 60;
pub const DEFAULT_FINAL_DWELL_SECS: u64 = 30;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Visit {
    pub page: PageId,
    pub at: DateTime<FixedOffset>,
    /// Seconds until the next visit, or the configured default for the last one.
    pub dwell: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Session {
    pub user_key: IpAddr,
    pub visits: Vec<Visit>,
}

impl Session {
    pub fn start(&self) -> DateTime<FixedOffset> {
        self.visits[0].at
    }

    pub fn end(&self) -> DateTime<FixedOffset> {
        self.visits[self.visits.len() - 1].at
    }

    pub fn pages(&self) -> impl Iterator<Item = PageId> + '_ {
        self.visits.iter().map(|v| v.page)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SessionConfig {
    pub gap: Duration,
    pub final_dwell: u64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            gap: Duration::seconds(DEFAULT_GAP_SECS),
            final_dwell: DEFAULT_FINAL_DWELL_SECS,
        }
    }
}

/// Splits records into sessions, interning resources as it goes.
///
/// Output is ordered by `(user_key, start)`. Panics if `config.gap` is not
/// positive.
pub fn sessionize(
    records: &[LogRecord],
    config: SessionConfig,
    interner: &mut Interner,
) -> Vec<Session> {
    assert!(
        config.gap > Duration::zero(),
        "session gap must be positive"
    );

    let mut by_user: BTreeMap<IpAddr, Vec<&LogRecord>> = BTreeMap::new();
    for rec in records {
        by_user.entry(rec.client_ip).or_default().push(rec);
    }

    let mut sessions = Vec::new();
    for (user, mut recs) in by_user {
        recs.sort_by_key(|r| r.timestamp);
        let mut current: Vec<Visit> = Vec::new();
        for rec in recs {
            let page = interner.intern(&rec.resource);
            if let Some(prev) = current.last_mut() {
                let delta = rec.timestamp - prev.at;
                if delta > config.gap {
                    sessions.push(close(user, std::mem::take(&mut current), config));
                } else {
                    prev.dwell = delta.num_seconds().max(0) as u64;
                }
            }
            current.push(Visit {
                page,
                at: rec.timestamp,
                dwell: config.final_dwell,
            });
        }
        if !current.is_empty() {
            sessions.push(close(user, current, config));
        }
    }
    sessions
}

fn close(user_key: IpAddr, mut visits: Vec<Visit>, config: SessionConfig) -> Session {
    if let Some(last) = visits.last_mut() {
        last.dwell = config.final_dwell;
    }
    Session { user_key, visits }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DwellProfile {
    pub total: u64,
    pub per_page: BTreeMap<PageId, u64>,
}

pub fn dwell_profile(session: &Session) -> DwellProfile {
    let mut profile = DwellProfile::default();
    for v in &session.visits {
        profile.total += v.dwell;
        *profile.per_page.entry(v.page).or_default() += v.dwell;
    }
    profile
}

const DUMP_ESCAPE: &AsciiSet = &CONTROLS.add(b'%').add(b',').add(b':').add(b' ');

/// Renders sessions as tab-separated `user_key start end page:dwell,...` lines.
pub fn render_sessions(sessions: &[Session], interner: &Interner) -> String {
    let mut out = String::new();
    for s in sessions {
        let visits: Vec<String> = s
            .visits
            .iter()
            .map(|v| {
                format!(
                    "{}:{}",
                    utf8_percent_encode(interner.resolve(v.page), DUMP_ESCAPE),
                    v.dwell
                )
            })
            .collect();
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}",
            s.user_key,
            s.start().to_rfc3339(),
            s.end().to_rfc3339(),
            visits.join(",")
        );
    }
    out
}

/// Reads a dump written by [`render_sessions`].
///
/// Only the first and last visit timestamps are stored, so intermediate
/// timestamps are reconstructed from the dwell values.
pub fn parse_sessions<R: BufRead>(input: R, interner: &mut Interner) -> Result<Vec<Session>> {
    let mut sessions = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let err = |reason: String| Error::SessionParse {
            line: line_no,
            reason,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(err(format!(
                "expected 4 tab-separated fields, got {}",
                fields.len()
            )));
        }
        let user_key: IpAddr = fields[0]
            .parse()
            .map_err(|_| err(format!("invalid user key {:?}", fields[0])))?;
        let start = DateTime::parse_from_rfc3339(fields[1])
            .map_err(|e| err(format!("invalid start: {e}")))?;
        let mut at = start;
        let mut visits = Vec::new();
        for item in fields[3].split(',') {
            let (page, dwell) = item
                .rsplit_once(':')
                .ok_or_else(|| err(format!("visit {item:?} is not page:dwell")))?;
            let dwell: u64 = dwell
                .parse()
                .map_err(|_| err(format!("invalid dwell {dwell:?}")))?;
            let page = percent_decode_str(page).decode_utf8_lossy();
            if page.is_empty() {
                return Err(err("empty page".into()));
            }
            visits.push(Visit {
                page: interner.intern(&page),
                at,
                dwell,
            });
            at += Duration::seconds(dwell as i64);
        }
        let session = Session { user_key, visits };
        let end = DateTime::parse_from_rfc3339(fields[2])
            .map_err(|e| err(format!("invalid end: {e}")))?;
        if session.end() != end {
            return Err(err("end does not match the dwell sequence".into()));
        }
        sessions.push(session);
    }
    Ok(sessions)
}

/// Groups sessions by user, keeping their order.
pub fn by_user(sessions: &[Session]) -> HashMap<IpAddr, Vec<&Session>> {
    let mut map: HashMap<IpAddr, Vec<&Session>> = HashMap::new();
    for s in sessions {
        map.entry(s.user_key).or_default().push(s);
    }
    map
}
