//! Pipeline configuration file and the end-to-end stages built on it.
//!
//! ```toml
//! seed = 7
//!
//! [ingest]
//! log_format = "common"
//! ignore_suffixes = [".jpg", ".gif"]
//!
//! [mining]
//! cutoff = "1/2"
//! max_order = 3
//!
//! [sim]
//! cache_capacity = 32
//!
//! [[groups]]
//! group_id = "campus"
//! ip_ranges = ["10.0.0.0/16"]
//! hint_capacity = 8
//! window = 3
//! ```
//!
//! Unknown keys are rejected.

use std::collections::BTreeSet;
use std::io::BufRead;
use std::path::{Path, PathBuf};

use chrono::Duration;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intern::Interner;
use crate::log_ingest::{clean, parse_log, CleanConfig, LineDiagnostic, LogFormat, LogRecord};
use crate::markov_miner::{
    count_sessions, dynamic_threshold, maximal_rules, mine_rules, MiningParams,
};
use crate::metrics::ReplayConfig;
use crate::num::parse_ratio;
use crate::prefetch_agent::{GroupClientConfig, GroupTable};
use crate::roughset::{select_quality_sessions, Bucketing, TargetRule};
use crate::rule_repo::RuleRepository;
use crate::sessionizer::{
    sessionize, Session, SessionConfig, DEFAULT_FINAL_DWELL_SECS, DEFAULT_GAP_SECS,
};
use crate::{Repository, Rule};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    pub log: Option<PathBuf>,
    pub rules: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IngestSection {
    pub log_format: LogFormat,
    pub ignore_suffixes: BTreeSet<String>,
    pub keep_status_classes: BTreeSet<u16>,
    pub methods: BTreeSet<String>,
}

impl Default for IngestSection {
    fn default() -> Self {
        let clean = CleanConfig::default();
        Self {
            log_format: LogFormat::default(),
            ignore_suffixes: clean.ignore_suffixes,
            keep_status_classes: clean.keep_status_classes,
            methods: clean.methods,
        }
    }
}

impl IngestSection {
    pub fn clean_config(&self) -> CleanConfig {
        CleanConfig {
            ignore_suffixes: self.ignore_suffixes.clone(),
            keep_status_classes: self.keep_status_classes.clone(),
            methods: self.methods.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SessionSection {
    pub gap_secs: i64,
    pub final_dwell_secs: u64,
}

impl Default for SessionSection {
    fn default() -> Self {
        Self {
            gap_secs: DEFAULT_GAP_SECS,
            final_dwell_secs: DEFAULT_FINAL_DWELL_SECS,
        }
    }
}

impl SessionSection {
    pub fn session_config(&self) -> SessionConfig {
        SessionConfig {
            gap: Duration::seconds(self.gap_secs),
            final_dwell: self.final_dwell_secs,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RoughSetSection {
    pub thresholds: Vec<u64>,
    pub min_page_support: usize,
    pub dwell_quantile: f64,
}

impl Default for RoughSetSection {
    fn default() -> Self {
        let b = Bucketing::default();
        Self {
            thresholds: b.thresholds,
            min_page_support: b.min_page_support,
            dwell_quantile: TargetRule::default().dwell_quantile,
        }
    }
}

impl RoughSetSection {
    pub fn bucketing(&self) -> Bucketing {
        Bucketing {
            thresholds: self.thresholds.clone(),
            min_page_support: self.min_page_support,
        }
    }

    pub fn target(&self) -> TargetRule {
        TargetRule {
            dwell_quantile: self.dwell_quantile,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MiningSection {
    /// Confidence cut-off as `num/den`.
    pub cutoff: String,
    pub max_order: usize,
    pub max_tail: usize,
    /// Fixed minimum support; the dynamic threshold is used when unset.
    pub min_support: Option<u64>,
    /// Keep only maximal rule chains.
    pub maximal: bool,
}

impl Default for MiningSection {
    fn default() -> Self {
        Self {
            cutoff: "1/2".into(),
            max_order: 3,
            max_tail: 2,
            min_support: None,
            maximal: false,
        }
    }
}

impl MiningSection {
    pub fn cutoff(&self) -> Result<Ratio<u64>> {
        parse_ratio(&self.cutoff).ok_or_else(|| Error::InvalidCutoff(self.cutoff.clone()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub cache_capacity: usize,
    pub default_size: u64,
    pub prefetch: bool,
}

impl Default for SimSection {
    fn default() -> Self {
        let d = ReplayConfig::default();
        Self {
            cache_capacity: d.cache_capacity,
            default_size: d.default_size,
            prefetch: d.prefetch_enabled,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub paths: Paths,
    pub ingest: IngestSection,
    pub session: SessionSection,
    pub roughset: RoughSetSection,
    pub mining: MiningSection,
    pub sim: SimSection,
    pub groups: Vec<GroupClientConfig>,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.ingest.clean_config().validate()?;
        if self.session.gap_secs <= 0 {
            return Err(Error::Config("session gap must be positive".into()));
        }
        self.roughset.bucketing().validate()?;
        self.roughset.target().validate()?;
        self.mining_params(1)?.validate()?;
        if self.sim.cache_capacity == 0 {
            return Err(Error::Config("cache_capacity must be >= 1".into()));
        }
        self.group_table()?;
        Ok(())
    }

    pub fn group_table(&self) -> Result<GroupTable> {
        GroupTable::new(self.groups.clone())
    }

    pub fn mining_params(&self, min_support: u64) -> Result<MiningParams<u64>> {
        Ok(MiningParams {
            cutoff: self.mining.cutoff()?,
            min_support: self.mining.min_support.unwrap_or(min_support),
            max_order: self.mining.max_order,
            max_tail: self.mining.max_tail,
        })
    }

    pub fn replay_config(&self) -> ReplayConfig {
        ReplayConfig {
            cache_capacity: self.sim.cache_capacity,
            prefetch_enabled: self.sim.prefetch,
            session_gap: Duration::seconds(self.session.gap_secs),
            default_size: self.sim.default_size,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Ingested {
    pub records: Vec<LogRecord>,
    pub sessions: Vec<Session>,
    pub diagnostics: Vec<LineDiagnostic>,
}

/// Parses, cleans and sessionizes a log.
pub fn ingest<R: BufRead>(
    log: R,
    cfg: &PipelineConfig,
    interner: &mut Interner,
) -> Result<Ingested> {
    let parsed = parse_log(log, cfg.ingest.log_format)?;
    let records = clean(&parsed.records, &cfg.ingest.clean_config());
    let sessions = sessionize(&records, cfg.session.session_config(), interner);
    Ok(Ingested {
        records,
        sessions,
        diagnostics: parsed.diagnostics,
    })
}

#[derive(Clone, Debug)]
pub struct Mined {
    pub rules: Vec<Rule>,
    pub min_support: u64,
    pub quality_sessions: usize,
    /// The rough-set lower approximation was empty and the raw target set
    /// was mined instead.
    pub fallback: bool,
}

impl Mined {
    pub fn repository(&self) -> Repository {
        RuleRepository::from_rules(self.rules.iter().cloned())
    }
}

/// Quality-session selection followed by rule mining.
pub fn mine(sessions: &[Session], cfg: &PipelineConfig) -> Result<Mined> {
    if sessions.is_empty() {
        return Ok(Mined {
            rules: Vec::new(),
            min_support: 1,
            quality_sessions: 0,
            fallback: false,
        });
    }
    let selection =
        select_quality_sessions(sessions, &cfg.roughset.bucketing(), &cfg.roughset.target())?;
    let probe = cfg.mining_params(1)?;
    let counts = count_sessions::<u64>(&selection.sessions, probe.pattern_len())?;
    let k = dynamic_threshold(&counts);
    let params = cfg.mining_params(k)?;
    let mut rules = mine_rules(&counts, &params)?;
    if cfg.mining.maximal {
        rules = maximal_rules(&rules);
    }
    Ok(Mined {
        rules,
        min_support: params.min_support,
        quality_sessions: selection.sessions.len(),
        fallback: selection.fallback,
    })
}
