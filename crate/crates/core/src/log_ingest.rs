//! Access-log parsing and cleaning.
//!
//! Lines follow the NCSA Common Log Format:
//!
//! ```text
//! 10.0.0.1 - - [12/Mar/2010:10:00:00 +0000] "GET /a.html HTTP/1.0" 200 512
//! ```
//!
//! Combined-format lines (trailing quoted referrer and user agent) are
//! accepted and the extra fields ignored.

use std::collections::BTreeSet;
use std::fmt;
use std::io::BufRead;
use std::net::IpAddr;
use std::str::FromStr;
use std::sync::OnceLock;

use chrono::{DateTime, FixedOffset};
use percent_encoding::{percent_decode_str, utf8_percent_encode, AsciiSet, CONTROLS};
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CLF_TIMESTAMP: &str = "%d/%b/%Y:%H:%M:%S %z";

/// Characters that must be escaped when a normalized resource is written
/// back into a request line.
const RESOURCE_ESCAPE: &AsciiSet = &CONTROLS.add(b' ').add(b'"').add(b'%').add(b'?').add(b'#');

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogFormat {
    /// `host ident authuser [date] "request" status bytes`, trailing fields tolerated.
    #[default]
    Common,
    /// Common format followed by quoted referrer and user agent.
    Combined,
}

impl FromStr for LogFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "common" | "clf" => Ok(LogFormat::Common),
            "combined" => Ok(LogFormat::Combined),
            other => Err(Error::Config(format!("unknown log format {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LogRecord {
    pub client_ip: IpAddr,
    pub timestamp: DateTime<FixedOffset>,
    pub method: String,
    pub resource: String,
    pub protocol: Option<String>,
    pub status: u16,
    pub bytes: u64,
}

impl LogRecord {
    /// Renders the record as a Common Log Format line.
    pub fn render(&self) -> String {
        let target = utf8_percent_encode(&self.resource, RESOURCE_ESCAPE);
        let request = match &self.protocol {
            Some(p) => format!("{} {} {}", self.method, target, p),
            None => format!("{} {}", self.method, target),
        };
        format!(
            "{} - - [{}] \"{}\" {} {}",
            self.client_ip,
            self.timestamp.format(CLF_TIMESTAMP),
            request,
            self.status,
            self.bytes
        )
    }
}

/// Why a line was rejected.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LineDiagnostic {
    /// 1-based line number.
    pub line: usize,
    pub reason: String,
}

impl fmt::Display for LineDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.reason)
    }
}

#[derive(Clone, Debug, Default)]
pub struct ParseOutcome {
    pub records: Vec<LogRecord>,
    pub diagnostics: Vec<LineDiagnostic>,
}

fn clf_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r#"^(\S+) \S+ \S+ \[([^\]]*)\] "([^"]*)" (\S+) (\S+)(.*)$"#).unwrap()
    })
}

fn combined_tail_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r#"^ "[^"]*" "[^"]*"\s*$"#).unwrap())
}

/// Parses a single line. Leading and trailing whitespace is ignored.
pub fn parse_line(line: &str, format: LogFormat) -> std::result::Result<LogRecord, String> {
    let line = line.trim();
    let caps = clf_regex()
        .captures(line)
        .ok_or_else(|| "line does not match the common log format".to_string())?;

    let client_ip: IpAddr = caps[1]
        .parse()
        .map_err(|_| format!("invalid client address {:?}", &caps[1]))?;
    let timestamp = DateTime::parse_from_str(&caps[2], CLF_TIMESTAMP)
        .map_err(|e| format!("unparseable timestamp {:?}: {e}", &caps[2]))?;

    let mut request = caps[3].split_ascii_whitespace();
    let method = request
        .next()
        .ok_or_else(|| "missing request method".to_string())?
        .to_string();
    let target = request
        .next()
        .ok_or_else(|| "missing request target".to_string())?;
    let protocol = request.next().map(str::to_string);
    if request.next().is_some() {
        return Err("too many fields in request line".into());
    }

    let status: u16 = caps[4]
        .parse()
        .map_err(|_| format!("non-numeric status {:?}", &caps[4]))?;
    let bytes: u64 = match &caps[5] {
        "-" => 0,
        b => b
            .parse()
            .map_err(|_| format!("non-numeric byte count {b:?}"))?,
    };

    let rest = &caps[6];
    match format {
        LogFormat::Common => {}
        LogFormat::Combined => {
            if !combined_tail_regex().is_match(rest) {
                return Err("missing referrer/user-agent fields".into());
            }
        }
    }

    Ok(LogRecord {
        client_ip,
        timestamp,
        method,
        resource: normalize_resource(target),
        protocol,
        status,
        bytes,
    })
}

/// Parses every line of `input`. Well-formed lines become records in input
/// order; every other line yields a diagnostic.
///
/// Bytes that are not valid UTF-8 are replaced rather than rejected. Only
/// read failures abort the whole parse.
pub fn parse_log<R: BufRead>(mut input: R, format: LogFormat) -> Result<ParseOutcome> {
    let mut out = ParseOutcome::default();
    let mut buf = Vec::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        if input.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        line_no += 1;
        let line = String::from_utf8_lossy(&buf);
        match parse_line(&line, format) {
            Ok(rec) => out.records.push(rec),
            Err(reason) => out.diagnostics.push(LineDiagnostic {
                line: line_no,
                reason,
            }),
        }
    }
    Ok(out)
}

/// Normalizes a request target into a page identity.
///
/// Drops the scheme and host of absolute URLs, strips query and fragment,
/// percent-decodes once, collapses repeated slashes and lowercases.
pub fn normalize_resource(target: &str) -> String {
    let mut path = target;
    if let Some(idx) = path.find("://") {
        let after = &path[idx + 3..];
        path = after.find('/').map_or("/", |i| &after[i..]);
    }
    if let Some(idx) = path.find(['?', '#']) {
        path = &path[..idx];
    }
    let decoded = percent_decode_str(path).decode_utf8_lossy();

    let mut collapsed = String::with_capacity(decoded.len());
    let mut prev_slash = false;
    for ch in decoded.chars() {
        if ch == '/' {
            if prev_slash {
                continue;
            }
            prev_slash = true;
        } else {
            prev_slash = false;
        }
        collapsed.push(ch);
    }
    let lowered = collapsed.to_lowercase();
    if lowered.is_empty() {
        "/".to_string()
    } else {
        lowered
    }
}

/// Filter settings for [`clean`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CleanConfig {
    /// Lowercase suffixes (with the dot) of resources to drop.
    pub ignore_suffixes: BTreeSet<String>,
    /// Status classes to keep, as the hundreds digit (2 = 2xx).
    pub keep_status_classes: BTreeSet<u16>,
    /// Methods to keep; empty keeps every method.
    pub methods: BTreeSet<String>,
}

impl Default for CleanConfig {
    fn default() -> Self {
        Self {
            ignore_suffixes: [".jpg", ".jpeg", ".gif", ".png", ".css", ".js", ".ico"]
                .into_iter()
                .map(String::from)
                .collect(),
            keep_status_classes: [2, 3].into_iter().collect(),
            methods: ["GET".to_string()].into_iter().collect(),
        }
    }
}

impl CleanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ignore_suffixes.is_empty() {
            return Err(Error::Config("ignore_suffixes must not be empty".into()));
        }
        if let Some(c) = self
            .keep_status_classes
            .iter()
            .find(|&&c| !(1..=5).contains(&c))
        {
            return Err(Error::Config(format!("status class {c} is not in 1..=5")));
        }
        Ok(())
    }

    pub fn keeps(&self, rec: &LogRecord) -> bool {
        let last_segment = rec.resource.rsplit('/').next().unwrap_or("");
        let lowered = last_segment.to_lowercase();
        if self
            .ignore_suffixes
            .iter()
            .any(|s| lowered.ends_with(s.as_str()))
        {
            return false;
        }
        if !self.keep_status_classes.contains(&(rec.status / 100)) {
            return false;
        }
        self.methods.is_empty() || self.methods.contains(&rec.method)
    }
}

/// Keeps page views only, preserving order.
pub fn clean(records: &[LogRecord], config: &CleanConfig) -> Vec<LogRecord> {
    records
        .iter()
        .filter(|r| config.keeps(r))
        .cloned()
        .collect()
}
