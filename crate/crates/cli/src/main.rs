use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use webprefetch::config::{self, PipelineConfig};
use webprefetch::log_ingest::LogFormat;
use webprefetch::metrics::{render_comparison, replay, SimReport};
use webprefetch::prefetch_agent::{GroupClientConfig, GroupTable};
use webprefetch::sessionizer::{parse_sessions, render_sessions};
use webprefetch::synth::{self, SynthConfig};
use webprefetch::{Error, Interner, Repository};

#[derive(Parser)]
#[command(
    name = "webprefetch",
    version,
    about = "Mine navigation rules from access logs and replay them as a prefetching proxy"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse, clean and sessionize an access log.
    Ingest(IngestArgs),
    /// Mine prediction rules from a log or a session dump.
    Mine(MineArgs),
    /// Replay a log through the cache and prefetch agent.
    Simulate(SimulateArgs),
    /// Compare a baseline report with a prefetching one.
    Report(ReportArgs),
    /// Generate a synthetic access log with planted navigation patterns.
    Gen(GenArgs),
}

#[derive(Args)]
struct Common {
    /// Pipeline configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct LogInput {
    #[arg(long, value_parser = parse_format)]
    log_format: Option<LogFormat>,
    /// Resource suffixes to drop, e.g. `.gif,.css`. Replaces the configured list.
    #[arg(long, value_delimiter = ',')]
    ignore_suffixes: Option<Vec<String>>,
    /// Status classes to keep, e.g. `2,3`.
    #[arg(long, value_delimiter = ',')]
    keep_status: Option<Vec<u16>>,
    /// Fail on malformed log lines, and in `mine` on an empty quality
    /// session set.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct IngestArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    input: LogInput,
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long)]
    sessions_out: PathBuf,
    /// Write one `line<TAB>reason` entry per skipped log line.
    #[arg(long)]
    diagnostics_out: Option<PathBuf>,
    /// Session inactivity gap in seconds.
    #[arg(long)]
    gap_secs: Option<i64>,
}

#[derive(Args)]
struct MineArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    input: LogInput,
    #[arg(long, conflicts_with = "sessions")]
    log: Option<PathBuf>,
    /// Session dump written by `ingest`.
    #[arg(long)]
    sessions: Option<PathBuf>,
    #[arg(long)]
    rules_out: PathBuf,
    /// Confidence cut-off, e.g. `1/2`.
    #[arg(long)]
    cutoff: Option<String>,
    #[arg(long)]
    max_order: Option<usize>,
    #[arg(long)]
    max_tail: Option<usize>,
    /// Fixed minimum support instead of the dynamic threshold.
    #[arg(long)]
    min_support: Option<u64>,
    /// Keep only maximal rule chains.
    #[arg(long)]
    maximal: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    input: LogInput,
    /// Access log to replay.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    rules: Option<PathBuf>,
    #[arg(long, value_enum)]
    prefetch: Option<Switch>,
    #[arg(long)]
    cache_capacity: Option<usize>,
    /// JSON report destination.
    #[arg(long)]
    report_out: Option<PathBuf>,
    #[arg(long)]
    csv_out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    baseline: PathBuf,
    #[arg(long)]
    prefetch: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenArgs {
    /// Generator settings (TOML); flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    requests: Option<usize>,
    #[arg(long)]
    clients: Option<usize>,
    #[arg(long)]
    follow_prob: Option<f64>,
    #[arg(long)]
    out: PathBuf,
    /// Write the planted patterns, one comma-separated line each.
    #[arg(long)]
    patterns_out: Option<PathBuf>,
}

fn parse_format(s: &str) -> Result<LogFormat, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Exit status 1: unreadable or malformed input. Exit status 2: bad
/// configuration or parameters.
enum Failure {
    Input(anyhow::Error),
    Config(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_)
            | Error::DegenerateBucketing(_)
            | Error::InvalidCutoff(_)
            | Error::OverlappingRanges(..) => Failure::Config(e.into()),
            _ => Failure::Input(e.into()),
        }
    }
}

type Outcome<T = ()> = Result<T, Failure>;

fn input_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Input(e.into())
}

fn config_err(msg: impl std::fmt::Display) -> Failure {
    Failure::Config(anyhow!("{msg}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Mine(a) => mine(a),
        Command::Simulate(a) => simulate(a),
        Command::Report(a) => report(a),
        Command::Gen(a) => gen(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load_config(common: &Common) -> Outcome<PipelineConfig> {
    match &common.config {
        Some(path) => PipelineConfig::load(path).map_err(|e| match e {
            Error::File { .. } => Failure::Config(e.into()),
            other => other.into(),
        }),
        None => Ok(PipelineConfig::default()),
    }
}

fn pick_path(flag: Option<PathBuf>, configured: Option<PathBuf>, what: &str) -> Outcome<PathBuf> {
    flag.or(configured)
        .ok_or_else(|| config_err(format!("no {what} given (flag or config paths)")))
}

fn open(path: &Path) -> Outcome<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .with_context(|| format!("cannot open {}", path.display()))
        .map_err(input_err)
}

fn write_file(path: &Path, contents: &[u8]) -> Outcome {
    let mut out = File::create(path)
        .map(BufWriter::new)
        .with_context(|| format!("cannot create {}", path.display()))
        .map_err(input_err)?;
    out.write_all(contents)
        .and_then(|_| out.flush())
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(input_err)
}

fn apply_log_input(cfg: &mut PipelineConfig, input: &LogInput) {
    if let Some(f) = input.log_format {
        cfg.ingest.log_format = f;
    }
    if let Some(v) = &input.ignore_suffixes {
        cfg.ingest.ignore_suffixes = v.iter().cloned().collect();
    }
    if let Some(v) = &input.keep_status {
        cfg.ingest.keep_status_classes = v.iter().copied().collect();
    }
}

fn read_log(
    path: &Path,
    cfg: &PipelineConfig,
    strict: bool,
    interner: &mut Interner,
) -> Outcome<config::Ingested> {
    let ingested = config::ingest(open(path)?, cfg, interner)?;
    if strict {
        if let Some(d) = ingested.diagnostics.first() {
            return Err(input_err(anyhow!(
                "{}: line {}: {} ({} malformed lines)",
                path.display(),
                d.line,
                d.reason,
                ingested.diagnostics.len()
            )));
        }
    }
    Ok(ingested)
}

fn ingest(args: IngestArgs) -> Outcome {
    let mut cfg = load_config(&args.common)?;
    apply_log_input(&mut cfg, &args.input);
    if let Some(gap) = args.gap_secs {
        cfg.session.gap_secs = gap;
    }
    cfg.validate()?;
    let log = pick_path(args.log, cfg.paths.log.clone(), "log file")?;

    let mut interner = Interner::new();
    let ingested = read_log(&log, &cfg, args.input.strict, &mut interner)?;
    write_file(
        &args.sessions_out,
        render_sessions(&ingested.sessions, &interner).as_bytes(),
    )?;
    if let Some(path) = &args.diagnostics_out {
        let text: String = ingested
            .diagnostics
            .iter()
            .map(|d| format!("{}\t{}\n", d.line, d.reason))
            .collect();
        write_file(path, text.as_bytes())?;
    }
    eprintln!(
        "{} records kept, {} malformed lines, {} sessions",
        ingested.records.len(),
        ingested.diagnostics.len(),
        ingested.sessions.len()
    );
    Ok(())
}

fn mine(args: MineArgs) -> Outcome {
    let mut cfg = load_config(&args.common)?;
    apply_log_input(&mut cfg, &args.input);
    if let Some(c) = args.cutoff {
        cfg.mining.cutoff = c;
    }
    if let Some(n) = args.max_order {
        cfg.mining.max_order = n;
    }
    if let Some(n) = args.max_tail {
        cfg.mining.max_tail = n;
    }
    if args.min_support.is_some() {
        cfg.mining.min_support = args.min_support;
    }
    cfg.mining.maximal |= args.maximal;
    cfg.validate()?;

    let mut interner = Interner::new();
    let sessions = match args.sessions {
        Some(path) => parse_sessions(open(&path)?, &mut interner)?,
        None => {
            let log = pick_path(args.log, cfg.paths.log.clone(), "log or session file")?;
            read_log(&log, &cfg, args.input.strict, &mut interner)?.sessions
        }
    };
    let mined = config::mine(&sessions, &cfg)?;
    if mined.fallback {
        eprintln!("warning: no session lies wholly inside the high-dwell target set; mined the target set instead");
        if args.input.strict {
            return Err(input_err(anyhow!("empty quality session set")));
        }
    }
    let repo = mined.repository();
    let mut text = Vec::new();
    repo.save(&mut text, &interner)?;
    write_file(&args.rules_out, &text)?;
    eprintln!(
        "{} sessions, {} kept for mining{}, min support {}, {} rules",
        sessions.len(),
        mined.quality_sessions,
        if mined.fallback { " (fallback)" } else { "" },
        mined.min_support,
        repo.len()
    );
    Ok(())
}

fn simulate(args: SimulateArgs) -> Outcome {
    let mut cfg = load_config(&args.common)?;
    apply_log_input(&mut cfg, &args.input);
    if let Some(s) = args.prefetch {
        cfg.sim.prefetch = matches!(s, Switch::On);
    }
    if let Some(n) = args.cache_capacity {
        cfg.sim.cache_capacity = n;
    }
    cfg.validate()?;
    let trace = pick_path(args.trace, cfg.paths.log.clone(), "trace")?;
    let rules = pick_path(args.rules, cfg.paths.rules.clone(), "rule file")?;
    let report_out = pick_path(
        args.report_out,
        cfg.paths.report.clone(),
        "report destination",
    )?;

    let mut interner = Interner::new();
    let repo = Repository::load(open(&rules)?, &mut interner)
        .map_err(|e| input_err(anyhow::Error::from(e).context(rules.display().to_string())))?;
    let records = read_log(&trace, &cfg, args.input.strict, &mut interner)?.records;

    let groups = if cfg.groups.is_empty() {
        // no groups configured: every client is served by one agent group
        GroupTable::new(vec![GroupClientConfig::new(
            "default",
            vec!["0.0.0.0/0".parse().unwrap(), "::/0".parse().unwrap()],
        )])?
    } else {
        cfg.group_table()?
    };
    let report = replay(
        &records,
        &repo,
        &mut interner,
        &groups,
        &cfg.replay_config(),
    );

    write_file(&report_out, report.to_json().as_bytes())?;
    if let Some(path) = &args.csv_out {
        write_file(path, report.to_csv().as_bytes())?;
    }
    eprintln!(
        "{} requests, hit rate {}, precision {}",
        report.requests,
        report.hit_rate(),
        report.precision()
    );
    Ok(())
}

fn read_report(path: &Path) -> Outcome<SimReport> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(input_err)?;
    SimReport::from_json(&text)
        .map_err(|e| input_err(anyhow::Error::from(e).context(path.display().to_string())))
}

fn report(args: ReportArgs) -> Outcome {
    let baseline = read_report(&args.baseline)?;
    let prefetch = read_report(&args.prefetch)?;
    write_file(
        &args.out,
        render_comparison(&baseline, &prefetch).as_bytes(),
    )
}

fn gen(args: GenArgs) -> Outcome {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))
                .map_err(Failure::Config)?;
            SynthConfig::from_toml(&text)
                .with_context(|| path.display().to_string())
                .map_err(Failure::Config)?
        }
        None => SynthConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(n) = args.requests {
        cfg.requests = n;
    }
    if let Some(n) = args.clients {
        cfg.clients = n;
    }
    if let Some(p) = args.follow_prob {
        cfg.follow_prob = p;
    }
    let trace = synth::generate(&cfg)?;
    write_file(&args.out, synth::render_log(&trace.records).as_bytes())?;
    if let Some(path) = &args.patterns_out {
        let text: String = trace.patterns.iter().map(|p| p.join(",") + "\n").collect();
        write_file(path, text.as_bytes())?;
    }
    Ok(())
}
