//! Command-line front end. [`run`] does all the work and returns what the
//! binary should print, so it can be driven from tests.

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use chipsig_core::infer::{default_rules, load_rules, RuleTable};
use chipsig_core::kb::{self, KnowledgeBase};
use chipsig_core::report::{analyze, AnalysisError, AnalysisOptions, DEFAULT_TPP_THRESHOLD};
use chipsig_core::scalar::{format_decimal, is_positive, parse_decimal};
use chipsig_core::{Exact, TriMode};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

pub const EXIT_OK: i32 = 0;
pub const EXIT_SCAN_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NO_CANDIDATES: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "chipsig", version, about = "Infer training hardware from ML codebases")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Scan a source tree and report the accelerators it is consistent with.
    Scan(ScanArgs),
    /// Check a knowledge-base file and list its entries.
    Kb(KbArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Machine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Strict,
    Lenient,
}

impl From<Mode> for TriMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Strict => TriMode::Strict,
            Mode::Lenient => TriMode::Lenient,
        }
    }
}

#[derive(Debug, clap::Args)]
struct ScanArgs {
    root: PathBuf,
    /// Knowledge-base TOML (defaults to the bundled one).
    #[arg(long)]
    kb: Option<PathBuf>,
    /// Rule-table TOML (defaults to the bundled one).
    #[arg(long)]
    rules: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// TPP threshold as a decimal, e.g. 4800.
    #[arg(long)]
    tpp_threshold: Option<String>,
    /// Skip files larger than this many bytes.
    #[arg(long)]
    max_file_bytes: Option<u64>,
    /// Record the generation time in the report.
    #[arg(long)]
    timestamps: bool,
    /// TOML file with defaults for the options above.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
struct KbArgs {
    #[arg(long)]
    kb: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum NumberText {
    Text(String),
    Int(i64),
    Float(f64),
}

impl fmt::Display for NumberText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NumberText::Text(s) => f.write_str(s),
            NumberText::Int(i) => write!(f, "{i}"),
            NumberText::Float(x) => write!(f, "{x}"),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    kb: Option<PathBuf>,
    rules: Option<PathBuf>,
    mode: Option<String>,
    tpp_threshold: Option<NumberText>,
    max_file_bytes: Option<u64>,
}

/// What the process should print and return.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Self {
            code: EXIT_OK,
            stdout,
            stderr: String::new(),
        }
    }

    fn fail(code: i32, message: impl fmt::Display) -> Self {
        Self {
            code,
            stdout: String::new(),
            stderr: format!("error: {message}\n"),
        }
    }
}

fn read(path: &Path, what: &str) -> Result<String, Outcome> {
    std::fs::read_to_string(path)
        .map_err(|e| Outcome::fail(EXIT_USAGE, format!("cannot read {what} {}: {e}", path.display())))
}

fn load_kb_file(path: Option<&Path>) -> Result<KnowledgeBase, Outcome> {
    match path {
        None => Ok(kb::default_kb()),
        Some(p) => kb::load_kb(&read(p, "knowledge base")?)
            .map_err(|e| Outcome::fail(EXIT_USAGE, format!("knowledge base {}: {e}", p.display()))),
    }
}

fn load_rules_file(path: Option<&Path>) -> Result<RuleTable, Outcome> {
    match path {
        None => Ok(default_rules()),
        Some(p) => load_rules(&read(p, "rule table")?)
            .map_err(|e| Outcome::fail(EXIT_USAGE, format!("rule table {}: {e}", p.display()))),
    }
}

fn parse_threshold(text: &str) -> Result<Exact, Outcome> {
    let value = parse_decimal(text).map_err(|e| Outcome::fail(EXIT_USAGE, format!("--tpp-threshold: {e}")))?;
    if !is_positive(&value) {
        return Err(Outcome::fail(EXIT_USAGE, "--tpp-threshold must be positive"));
    }
    Ok(value)
}

fn load_config(path: &Path) -> Result<ConfigFile, Outcome> {
    let mut cfg: ConfigFile = toml::from_str(&read(path, "config")?)
        .map_err(|e| Outcome::fail(EXIT_USAGE, format!("config {}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    cfg.kb = cfg.kb.map(|p| base.join(p));
    cfg.rules = cfg.rules.map(|p| base.join(p));
    Ok(cfg)
}

fn scan(args: ScanArgs) -> Result<Outcome, Outcome> {
    let cfg = match &args.config {
        Some(p) => load_config(p)?,
        None => ConfigFile::default(),
    };
    let mode = match (args.mode, cfg.mode.as_deref()) {
        (Some(m), _) => m.into(),
        (None, Some(m)) => m
            .parse::<TriMode>()
            .map_err(|e| Outcome::fail(EXIT_USAGE, format!("config: {e}")))?,
        (None, None) => TriMode::Strict,
    };
    let threshold_text = args
        .tpp_threshold
        .clone()
        .or_else(|| cfg.tpp_threshold.as_ref().map(|t| t.to_string()))
        .unwrap_or_else(|| DEFAULT_TPP_THRESHOLD.to_string());

    let mut options = AnalysisOptions {
        kb: load_kb_file(args.kb.as_deref().or(cfg.kb.as_deref()))?,
        rules: load_rules_file(args.rules.as_deref().or(cfg.rules.as_deref()))?,
        mode,
        tpp_threshold: parse_threshold(&threshold_text)?,
        ..AnalysisOptions::default()
    };
    if let Some(max) = args.max_file_bytes.or(cfg.max_file_bytes) {
        options.limits.max_file_bytes = max;
    }
    if args.timestamps {
        options.generated_at = Some(chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true));
    }

    let report = analyze(&args.root, &options).map_err(|e| match e {
        AnalysisError::Scan(e) => Outcome::fail(EXIT_SCAN_FAILED, e),
        AnalysisError::Tpp(e) => Outcome::fail(EXIT_USAGE, e),
    })?;
    let stdout = match args.format {
        Format::Text => report.to_text(),
        Format::Machine => report.to_machine(),
    };
    let code = if report.candidates.ids.is_empty() {
        EXIT_NO_CANDIDATES
    } else {
        EXIT_OK
    };
    let stderr = if code == EXIT_NO_CANDIDATES {
        "no candidates remain; see CONFLICT lines\n".to_string()
    } else {
        String::new()
    };
    Ok(Outcome { code, stdout, stderr })
}

fn list_kb(args: KbArgs) -> Result<Outcome, Outcome> {
    let kb = load_kb_file(args.kb.as_deref())?;
    let mut out = format!("schema_version {}, {} entries\n", kb.schema_version, kb.len());
    for e in kb.entries() {
        let peak = e
            .throughputs
            .iter()
            .filter(|t| !t.sparse)
            .map(|t| format!("{} {}", t.precision, format_decimal(&t.peak)))
            .collect::<Vec<_>>()
            .join(", ");
        out.push_str(&format!(
            "{:<10} {:<8} {:<12} datacenter={} bfloat16={} gpudirect_rdma={}  [{}]\n",
            e.id,
            e.vendor.as_str(),
            e.architecture,
            e.datacenter,
            e.bfloat16,
            e.gpudirect_rdma,
            peak
        ));
    }
    Ok(Outcome::ok(out))
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                Outcome {
                    code: EXIT_USAGE,
                    stdout: String::new(),
                    stderr: text,
                }
            } else {
                Outcome::ok(text)
            };
        }
    };
    let result = match cli.command {
        Command::Scan(args) => scan(args),
        Command::Kb(args) => list_kb(args),
    };
    result.unwrap_or_else(|e| e)
}
