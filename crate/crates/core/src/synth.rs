//! Seeded synthetic traces with planted navigation patterns.
//!
//! Each client repeatedly picks a planted pattern and walks it; after every
//! step it keeps following with probability `follow_prob`, otherwise it
//! jumps to a random page and picks a new pattern. Occasionally a client
//! goes idle for longer than the session gap.

use std::net::{IpAddr, Ipv4Addr};

use chrono::{DateTime, Duration, FixedOffset, TimeZone};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::log_ingest::LogRecord;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub seed: u64,
    pub requests: usize,
    pub clients: usize,
    /// First client address; clients take consecutive addresses.
    pub first_client: Ipv4Addr,
    pub pages: usize,
    pub patterns: usize,
    pub min_pattern_len: usize,
    pub max_pattern_len: usize,
    pub follow_prob: f64,
    /// Seconds between requests inside a session, inclusive range.
    pub min_think_secs: i64,
    pub max_think_secs: i64,
    /// Chance that a client goes idle after finishing a pattern walk.
    pub idle_prob: f64,
    pub idle_secs: i64,
    /// Chance that a page view is followed by an image request.
    pub asset_prob: f64,
    pub start_epoch_secs: i64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            requests: 5000,
            clients: 10,
            first_client: Ipv4Addr::new(10, 0, 0, 1),
            pages: 200,
            patterns: 20,
            min_pattern_len: 3,
            max_pattern_len: 5,
            follow_prob: 0.8,
            min_think_secs: 5,
            max_think_secs: 120,
            idle_prob: 0.05,
            idle_secs: 2 * 60 * 60,
            asset_prob: 0.0,
            start_epoch_secs: 1_268_388_000,
        }
    }
}

impl SynthConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SynthConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: &str| Err(Error::Config(m.to_string()));
        if self.clients == 0 {
            return err("clients must be >= 1");
        }
        if self.min_pattern_len < 2 || self.min_pattern_len > self.max_pattern_len {
            return err("pattern lengths must satisfy 2 <= min <= max");
        }
        if self.patterns == 0 || self.patterns * self.max_pattern_len > self.pages {
            return err("patterns must be >= 1 and fit into the page alphabet");
        }
        if !(0.0..=1.0).contains(&self.follow_prob)
            || !(0.0..=1.0).contains(&self.idle_prob)
            || !(0.0..=1.0).contains(&self.asset_prob)
        {
            return err("probabilities must be in [0, 1]");
        }
        if self.min_think_secs < 0 || self.min_think_secs > self.max_think_secs {
            return err("think times must satisfy 0 <= min <= max");
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SynthTrace {
    /// Page-view records (plus assets, if enabled) in timestamp order.
    pub records: Vec<LogRecord>,
    pub patterns: Vec<Vec<String>>,
}

pub fn page_name(i: usize) -> String {
    format!("/page{i:04}.html")
}

fn client_ip(cfg: &SynthConfig, i: usize) -> IpAddr {
    IpAddr::V4(Ipv4Addr::from(
        u32::from(cfg.first_client).wrapping_add(i as u32),
    ))
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthTrace> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut alphabet: Vec<usize> = (0..cfg.pages).collect();
    alphabet.shuffle(&mut rng);
    let mut next = 0;
    let patterns: Vec<Vec<usize>> = (0..cfg.patterns)
        .map(|_| {
            let len = rng.gen_range(cfg.min_pattern_len..=cfg.max_pattern_len);
            let p = alphabet[next..next + len].to_vec();
            next += len;
            p
        })
        .collect();

    let offset = FixedOffset::east_opt(0).expect("utc offset");
    let start: DateTime<FixedOffset> = offset
        .timestamp_opt(cfg.start_epoch_secs, 0)
        .single()
        .ok_or_else(|| Error::Config("start time out of range".into()))?;

    let per_client = cfg.requests / cfg.clients;
    let extra = cfg.requests % cfg.clients;
    let mut records = Vec::with_capacity(cfg.requests);

    for c in 0..cfg.clients {
        let quota = per_client + usize::from(c < extra);
        let ip = client_ip(cfg, c);
        let mut at = start + Duration::seconds(rng.gen_range(0..=cfg.max_think_secs));
        let mut emitted = 0;
        let mut emit = |page: String, at: DateTime<FixedOffset>, rng: &mut ChaCha8Rng| {
            records.push(LogRecord {
                client_ip: ip,
                timestamp: at,
                method: "GET".into(),
                resource: page,
                protocol: Some("HTTP/1.1".into()),
                status: 200,
                bytes: rng.gen_range(512..=16_384),
            });
        };

        while emitted < quota {
            let pattern = &patterns[rng.gen_range(0..patterns.len())];
            for (step, &page) in pattern.iter().enumerate() {
                if emitted == quota {
                    break;
                }
                let page = if step == 0 || rng.gen_bool(cfg.follow_prob) {
                    page
                } else {
                    // deviation: one random page, then a fresh pattern
                    let noise = rng.gen_range(0..cfg.pages);
                    emit(page_name(noise), at, &mut rng);
                    emitted += 1;
                    at += Duration::seconds(rng.gen_range(cfg.min_think_secs..=cfg.max_think_secs));
                    break;
                };
                emit(page_name(page), at, &mut rng);
                emitted += 1;
                if cfg.asset_prob > 0.0 && rng.gen_bool(cfg.asset_prob) {
                    emit(format!("/img/{page}.gif"), at, &mut rng);
                }
                at += Duration::seconds(rng.gen_range(cfg.min_think_secs..=cfg.max_think_secs));
            }
            if rng.gen_bool(cfg.idle_prob) {
                at += Duration::seconds(cfg.idle_secs);
            }
        }
    }
    records.sort_by_key(|r| r.timestamp);

    Ok(SynthTrace {
        records,
        patterns: patterns
            .into_iter()
            .map(|p| p.into_iter().map(page_name).collect())
            .collect(),
    })
}

/// Renders records as Common Log Format text.
pub fn render_log(records: &[LogRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&r.render());
        out.push('\n');
    }
    out
}
