//! Scan reports: assembly, a deterministic text rendering, and a
//! versioned JSON form that parses back to an equal [`ScanReport`].

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extract::{scan_tree, MentionVocabulary, ScanError, ScanLimits, ScanOptions};
use crate::infer::{
    self, CapabilityConstraint, Conflict, CorroborationNote, EnvironmentAssessment, RuleTable, TraceRecord,
    UndocumentedFlag,
};
use crate::kb::{Field, KnowledgeBase, TriMode};
use crate::scalar::{self, Exact};
use crate::signal::{Location, ScanStats, Signal, SignalKind, SignalSet};
use crate::tpp::{classify_entry, TppClassification, TppError};

/// Version of the JSON report layout.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Threshold used when none is configured. Operators are expected to set
/// the value that applies to them.
pub const DEFAULT_TPP_THRESHOLD: &str = "4800";

pub const TOOL_NAME: &str = "chipsig";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VersionInfo {
    pub schema: u32,
    pub tool: String,
    pub kb_schema: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignalSection {
    pub stats: ScanStats,
    pub items: Vec<Signal>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSection {
    pub mode: TriMode,
    pub ids: Vec<String>,
    pub undocumented: Vec<UndocumentedFlag>,
    pub conflicts: Vec<Conflict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TppSection {
    #[serde(with = "scalar::as_string")]
    pub threshold: Exact,
    pub rows: Vec<TppClassification<Exact>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorroborationStatus {
    Consistent,
    Inconsistent,
    /// The mention names nothing in the knowledge base.
    Unknown,
}

/// How a hardware mention compares with the candidate set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corroboration {
    pub mention: String,
    pub location: Location,
    pub status: CorroborationStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eliminated_by: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub version: VersionInfo,
    pub root: String,
    pub signals: SignalSection,
    pub constraints: Vec<CapabilityConstraint>,
    pub candidates: CandidateSection,
    pub trace: Vec<TraceRecord>,
    pub environment: EnvironmentAssessment,
    pub tpp: TppSection,
    pub corroborations: Vec<Corroboration>,
    pub notes: Vec<CorroborationNote>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Scan(#[from] ScanError),
    #[error(transparent)]
    Tpp(#[from] TppError),
}

/// Everything [`analyze`] needs besides the root.
#[derive(Debug, Clone)]
pub struct AnalysisOptions {
    pub kb: KnowledgeBase,
    pub rules: RuleTable,
    pub mode: TriMode,
    pub tpp_threshold: Exact,
    pub limits: ScanLimits,
    pub generated_at: Option<String>,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            kb: crate::kb::default_kb(),
            rules: infer::default_rules(),
            mode: TriMode::Strict,
            tpp_threshold: scalar::parse_decimal(DEFAULT_TPP_THRESHOLD).expect("default threshold"),
            limits: ScanLimits::default(),
            generated_at: None,
        }
    }
}

/// Scans `root` and builds the full report.
pub fn analyze(root: &Path, options: &AnalysisOptions) -> Result<ScanReport, AnalysisError> {
    let mut scan = ScanOptions::new(MentionVocabulary::from_kb(&options.kb));
    scan.limits = options.limits;
    let signals = scan_tree(root, &scan)?;
    let name = root
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| root.display().to_string());
    Ok(ScanReport::build(&name, &signals, options)?)
}

fn driver_caveat_applies(kb: &KnowledgeBase, trace: &[TraceRecord]) -> bool {
    trace.iter().any(|t| {
        t.requirement.field == Field::GpudirectRdma && kb.get(&t.eliminated).is_some_and(|e| e.consumer_market)
    })
}

impl ScanReport {
    pub fn build(root: &str, signals: &SignalSet, options: &AnalysisOptions) -> Result<Self, TppError> {
        let kb = &options.kb;
        let (derivation, result) = infer::infer(kb, signals, &options.rules, options.mode);

        let mut rows = Vec::new();
        for id in &result.candidates {
            if let Some(spec) = kb.get(id) {
                rows.push(classify_entry(spec, &options.tpp_threshold)?);
            }
        }

        let corroborations: Vec<Corroboration> = signals
            .of_kind(SignalKind::HardwareMention)
            .map(|s| {
                let eliminated_by = result
                    .trace
                    .iter()
                    .find(|t| t.eliminated == s.value)
                    .map(|t| t.rule_id.clone());
                let status = if result.candidates.contains(&s.value) {
                    CorroborationStatus::Consistent
                } else if eliminated_by.is_some() {
                    CorroborationStatus::Inconsistent
                } else {
                    CorroborationStatus::Unknown
                };
                Corroboration {
                    mention: s.value.clone(),
                    location: s.location.clone(),
                    status,
                    eliminated_by,
                }
            })
            .collect();

        let mut warnings = Vec::new();
        if signals.is_empty() {
            warnings.push("no signals extracted; every knowledge-base entry remains a candidate".to_string());
        }
        if signals.stats.parse_errors > 0 {
            warnings.push(format!(
                "{} structured config file(s) could not be parsed and contributed no signals",
                signals.stats.parse_errors
            ));
        }
        if result.candidates.is_empty() && !kb.is_empty() {
            warnings.push("no knowledge-base entry is consistent with all constraints".to_string());
        }
        for c in corroborations.iter().filter(|c| c.status == CorroborationStatus::Inconsistent) {
            warnings.push(format!(
                "documentation names `{}` at {} but code signals exclude it",
                c.mention, c.location
            ));
        }
        if driver_caveat_applies(kb, &result.trace) {
            warnings.push(
                "consumer parts were excluded on GPUDirect RDMA support; that support is gated by the driver \
                 and modified drivers can enable peer-to-peer on some of them"
                    .to_string(),
            );
        }

        Ok(ScanReport {
            version: VersionInfo {
                schema: REPORT_SCHEMA_VERSION,
                tool: format!("{TOOL_NAME} {}", env!("CARGO_PKG_VERSION")),
                kb_schema: kb.schema_version,
                generated_at: options.generated_at.clone(),
            },
            root: root.to_string(),
            signals: SignalSection {
                stats: signals.stats,
                items: signals.signals().to_vec(),
            },
            constraints: derivation.constraints,
            candidates: CandidateSection {
                mode: result.mode,
                ids: result.candidates,
                undocumented: result.undocumented,
                conflicts: result.conflicts,
            },
            trace: result.trace,
            environment: result.environment,
            tpp: TppSection {
                threshold: options.tpp_threshold,
                rows,
            },
            corroborations,
            notes: derivation.notes,
            warnings,
        })
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_machine(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("report serializes");
        out.push('\n');
        out
    }

    pub fn from_machine(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_text(&self) -> String {
        let mut o = String::new();
        let stats = &self.signals.stats;
        let _ = writeln!(o, "{} report for {}", TOOL_NAME, self.root);
        if let Some(at) = &self.version.generated_at {
            let _ = writeln!(o, "generated {at}");
        }
        let _ = writeln!(
            o,
            "files scanned {}, skipped {}, parse errors {}",
            stats.files_scanned, stats.files_skipped, stats.parse_errors
        );

        let _ = writeln!(o, "\nSIGNALS ({})", self.signals.items.len());
        for s in &self.signals.items {
            let _ = writeln!(o, "  {}  {}({})  [{}]", s.location, s.kind, s.value, s.tier);
        }

        let _ = writeln!(o, "\nCONSTRAINTS ({})", self.constraints.len());
        for c in &self.constraints {
            let _ = writeln!(o, "  {}  [{}]", c.requirement, c.rule_id);
            for r in &c.derived_from {
                let _ = writeln!(o, "    from {r}");
            }
        }

        let _ = writeln!(o, "\nCANDIDATES ({} mode)", self.candidates.mode);
        if self.candidates.ids.is_empty() {
            let _ = writeln!(o, "  none");
        } else {
            let _ = writeln!(o, "  consistent with: {}", self.candidates.ids.join(", "));
        }
        for f in &self.candidates.undocumented {
            let _ = writeln!(o, "  {}: {} undocumented, admitted by lenient mode [{}]", f.id, f.field, f.rule_id);
        }
        for c in &self.candidates.conflicts {
            let parts: Vec<String> = c
                .constraints
                .iter()
                .map(|l| format!("{} [{}]", l.requirement, l.rule_id))
                .collect();
            let _ = writeln!(o, "  CONFLICT: {}", parts.join(" vs "));
        }

        let _ = writeln!(o, "\nTRACE");
        for t in &self.trace {
            let _ = write!(o, "  ELIMINATED: {} by {} ({})", t.eliminated, t.rule_id, t.requirement);
            if !t.also_violates.is_empty() {
                let _ = write!(o, "; also {}", t.also_violates.join(", "));
            }
            o.push('\n');
        }

        let env = &self.environment;
        let _ = writeln!(o, "\nENVIRONMENT");
        let _ = writeln!(o, "  datacenter_class: {}", env.datacenter_class);
        let _ = writeln!(o, "  multi_node: {}", env.multi_node);
        let _ = writeln!(o, "  on_prem_likely: {}", env.on_prem_likely);
        let gpn = env.gpus_per_node.map_or_else(|| "unknown".to_string(), |n| n.to_string());
        let _ = writeln!(o, "  gpus_per_node: {gpn}");
        for r in &env.rationale {
            let _ = writeln!(o, "    because {r}");
        }

        let _ = writeln!(o, "\nTPP (threshold {})", scalar::format_decimal(&self.tpp.threshold));
        for row in &self.tpp.rows {
            let max = row
                .max_tpp
                .as_ref()
                .map_or_else(|| "n/a".to_string(), scalar::format_decimal);
            let mode = row.max_mode.map_or_else(|| "-".to_string(), |m| m.to_string());
            let status = serde_json::to_value(row.status).expect("status serializes");
            let _ = writeln!(o, "  {}  max {} ({})  {}", row.id, max, mode, status.as_str().unwrap_or_default());
            for m in &row.per_mode {
                let acc = m
                    .accumulate_mode
                    .as_ref()
                    .map(|a| format!(", {a} accumulate"))
                    .unwrap_or_default();
                let _ = writeln!(o, "    {}{}: {}", m.precision, acc, scalar::format_decimal(&m.tpp));
            }
        }

        let _ = writeln!(o, "\nCORROBORATION");
        for c in &self.corroborations {
            let verdict = match (c.status, &c.eliminated_by) {
                (CorroborationStatus::Consistent, _) => "CONSISTENT".to_string(),
                (CorroborationStatus::Inconsistent, Some(rule)) => format!("INCONSISTENT (eliminated by {rule})"),
                (CorroborationStatus::Inconsistent, None) => "INCONSISTENT".to_string(),
                (CorroborationStatus::Unknown, _) => "UNKNOWN".to_string(),
            };
            let _ = writeln!(o, "  {}  {}  {}", c.location, c.mention, verdict);
        }

        let _ = writeln!(o, "\nWARNINGS");
        for w in &self.warnings {
            let _ = writeln!(o, "  {w}");
        }
        o
    }
}
