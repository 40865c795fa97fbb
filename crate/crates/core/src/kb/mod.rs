//! Accelerator knowledge base: a versioned, human-editable TOML file of
//! [`GpuSpec`] entries with tri-state capability flags.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{self, Exact};

pub mod query;

pub use query::{query, Clause, ClauseOp, Field, Outcome, Predicate, PredicateError, TriMode};

/// Knowledge-base schema this build reads and writes.
pub const KB_SCHEMA_VERSION: u32 = 1;

/// The knowledge base shipped with the tool.
pub const DEFAULT_KB_TOML: &str = include_str!("../../data/default_kb.toml");

/// A capability that is documented present, documented absent, or not documented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tri {
    Yes,
    No,
    Undocumented,
}

impl Tri {
    pub fn as_str(self) -> &'static str {
        match self {
            Tri::Yes => "yes",
            Tri::No => "no",
            Tri::Undocumented => "undocumented",
        }
    }

    pub fn parse(s: &str) -> Option<Tri> {
        match s.to_ascii_lowercase().as_str() {
            "yes" | "true" => Some(Tri::Yes),
            "no" | "false" => Some(Tri::No),
            "undocumented" => Some(Tri::Undocumented),
            _ => None,
        }
    }
}

impl fmt::Display for Tri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Vendor {
    Nvidia,
    Amd,
    Other,
}

impl Vendor {
    pub fn as_str(self) -> &'static str {
        match self {
            Vendor::Nvidia => "nvidia",
            Vendor::Amd => "amd",
            Vendor::Other => "other",
        }
    }

    pub fn parse(s: &str) -> Option<Vendor> {
        match s.to_ascii_lowercase().as_str() {
            "nvidia" => Some(Vendor::Nvidia),
            "amd" => Some(Vendor::Amd),
            "other" => Some(Vendor::Other),
            _ => None,
        }
    }
}

/// Operand precision of a throughput figure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    Fp32,
    Tf32,
    Fp16,
    Bf16,
    Int8,
    Int4,
}

impl Precision {
    /// Bit length used in the TPP formula.
    pub fn bit_length(self) -> u32 {
        match self {
            Precision::Fp32 | Precision::Tf32 => 32,
            Precision::Fp16 | Precision::Bf16 => 16,
            Precision::Int8 => 8,
            Precision::Int4 => 4,
        }
    }

    pub fn is_integer(self) -> bool {
        matches!(self, Precision::Int8 | Precision::Int4)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Precision::Fp32 => "fp32",
            Precision::Tf32 => "tf32",
            Precision::Fp16 => "fp16",
            Precision::Bf16 => "bf16",
            Precision::Int8 => "int8",
            Precision::Int4 => "int4",
        }
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ThroughputUnit {
    #[serde(rename = "TFLOPS")]
    Tflops,
    #[serde(rename = "TOPS")]
    Tops,
}

/// A vendor peak figure. Dense unless `sparse` is set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThroughputEntry {
    pub precision: Precision,
    pub unit: ThroughputUnit,
    #[serde(with = "scalar::as_number")]
    pub peak: Exact,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accumulate_mode: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub sparse: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GpuSpec {
    pub id: String,
    pub display_name: String,
    pub vendor: Vendor,
    pub architecture: String,
    pub datacenter: Tri,
    pub bfloat16: Tri,
    pub gpudirect_rdma: Tri,
    pub nvlink: Tri,
    pub vram_gib: Vec<u32>,
    #[serde(default)]
    pub throughputs: Vec<ThroughputEntry>,
    #[serde(default)]
    pub consumer_market: bool,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub notes: String,
}

impl GpuSpec {
    /// NCCL only drives NVIDIA devices.
    pub fn nccl_compatible(&self) -> Tri {
        match self.vendor {
            Vendor::Nvidia => Tri::Yes,
            Vendor::Amd | Vendor::Other => Tri::No,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeBase {
    pub schema_version: u32,
    pub entries: Vec<GpuSpec>,
    #[serde(default)]
    pub aliases: BTreeMap<String, String>,
}

impl KnowledgeBase {
    pub fn entries(&self) -> &[GpuSpec] {
        &self.entries
    }

    pub fn aliases(&self) -> &BTreeMap<String, String> {
        &self.aliases
    }

    pub fn get(&self, id: &str) -> Option<&GpuSpec> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.id.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("knowledge base serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub entry: Option<String>,
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.entry {
            Some(id) => write!(f, "entry `{id}` field `{}`: {}", self.field, self.message),
            None => write!(f, "field `{}`: {}", self.field, self.message),
        }
    }
}

/// Invariant violations; empty when the knowledge base is valid.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, entry: Option<&str>, field: &str, message: impl Into<String>) {
        self.violations.push(Violation {
            entry: entry.map(str::to_string),
            field: field.to_string(),
            message: message.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum KbError {
    #[error("knowledge base is not valid TOML: {0}")]
    Parse(String),
    #[error("knowledge base schema_version {found} is not supported (expected {supported})")]
    SchemaVersion { found: u32, supported: u32 },
    #[error("duplicate knowledge-base id `{0}`")]
    DuplicateId(String),
    #[error("alias `{alias}` points at unknown id `{target}`")]
    DanglingAlias { alias: String, target: String },
    #[error("knowledge base failed validation:\n{0}")]
    Invalid(ValidationReport),
}

fn is_slug(id: &str) -> bool {
    !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' || c == '-')
}

/// Checks every type invariant of every entry.
pub fn validate_kb(kb: &KnowledgeBase) -> ValidationReport {
    let mut report = ValidationReport::default();
    if kb.schema_version != KB_SCHEMA_VERSION {
        report.push(
            None,
            "schema_version",
            format!("is {}, expected {KB_SCHEMA_VERSION}", kb.schema_version),
        );
    }
    let mut seen = BTreeSet::new();
    for e in &kb.entries {
        let id = Some(e.id.as_str());
        if !is_slug(&e.id) {
            report.push(id, "id", "must be a non-empty lowercase slug");
        }
        if !seen.insert(e.id.as_str()) {
            report.push(id, "id", "duplicate id");
        }
        if e.vram_gib.is_empty() {
            report.push(id, "vram_gib", "must list at least one capacity");
        }
        if e.vram_gib.contains(&0) {
            report.push(id, "vram_gib", "capacities must be > 0");
        }
        for t in &e.throughputs {
            if !scalar::is_positive(&t.peak) {
                report.push(
                    id,
                    "throughputs",
                    format!("{} peak {} must be > 0", t.precision, scalar::format_decimal(&t.peak)),
                );
            }
            let expected = if t.precision.is_integer() {
                ThroughputUnit::Tops
            } else {
                ThroughputUnit::Tflops
            };
            if t.unit != expected {
                report.push(
                    id,
                    "throughputs",
                    format!("{} must be measured in {:?}", t.precision, expected),
                );
            }
        }
    }
    for (alias, target) in &kb.aliases {
        if alias.trim().is_empty() {
            report.push(None, "aliases", "empty alias");
        }
        if !seen.contains(target.as_str()) {
            report.push(None, "aliases", format!("alias `{alias}` points at unknown id `{target}`"));
        }
    }
    report
}

/// Parses and validates a knowledge-base document. Entries come back in id order.
pub fn load_kb(source: &str) -> Result<KnowledgeBase, KbError> {
    #[derive(Deserialize)]
    struct Header {
        schema_version: u32,
    }
    let header: Header = toml::from_str(source).map_err(|e| KbError::Parse(e.to_string()))?;
    if header.schema_version != KB_SCHEMA_VERSION {
        return Err(KbError::SchemaVersion {
            found: header.schema_version,
            supported: KB_SCHEMA_VERSION,
        });
    }
    let mut kb: KnowledgeBase = toml::from_str(source).map_err(|e| KbError::Parse(e.to_string()))?;
    let mut seen = BTreeSet::new();
    for e in &kb.entries {
        if !seen.insert(e.id.clone()) {
            return Err(KbError::DuplicateId(e.id.clone()));
        }
    }
    for (alias, target) in &kb.aliases {
        if !seen.contains(target) {
            return Err(KbError::DanglingAlias {
                alias: alias.clone(),
                target: target.clone(),
            });
        }
    }
    let report = validate_kb(&kb);
    if !report.is_empty() {
        return Err(KbError::Invalid(report));
    }
    kb.entries.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(kb)
}

/// The bundled knowledge base.
pub fn default_kb() -> KnowledgeBase {
    load_kb(DEFAULT_KB_TOML).expect("bundled knowledge base is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINI: &str = r#"
schema_version = 1

[[entries]]
id = "a100"
display_name = "NVIDIA A100"
vendor = "nvidia"
architecture = "ampere"
datacenter = "yes"
bfloat16 = "yes"
gpudirect_rdma = "yes"
nvlink = "yes"
vram_gib = [40, 80]

[[entries.throughputs]]
precision = "int8"
unit = "TOPS"
peak = 624

[aliases]
"nvidia a100" = "a100"
"#;

    #[test]
    fn loads_minimal_document() {
        let kb = load_kb(MINI).unwrap();
        assert_eq!(kb.len(), 1);
        assert_eq!(kb.entries[0].throughputs[0].peak, Exact::from_integer(624));
        assert!(validate_kb(&kb).is_empty());
    }

    #[test]
    fn duplicate_id_is_rejected() {
        let doubled = MINI.replace("[aliases]", &format!("{}\n[aliases]", &MINI[MINI.find("[[entries]]").unwrap()..MINI.find("[aliases]").unwrap()]));
        match load_kb(&doubled) {
            Err(KbError::DuplicateId(id)) => assert_eq!(id, "a100"),
            other => panic!("expected duplicate id, got {other:?}"),
        }
    }

    #[test]
    fn schema_mismatch_is_versioned_error() {
        let src = MINI.replace("schema_version = 1", "schema_version = 7");
        assert!(matches!(
            load_kb(&src),
            Err(KbError::SchemaVersion { found: 7, supported: 1 })
        ));
    }

    #[test]
    fn dangling_alias() {
        let src = MINI.replace("\"nvidia a100\" = \"a100\"", "\"nvidia a100\" = \"a999\"");
        assert!(matches!(load_kb(&src), Err(KbError::DanglingAlias { .. })));
    }

    #[test]
    fn empty_vram_is_one_violation() {
        let mut kb = load_kb(MINI).unwrap();
        kb.entries[0].vram_gib.clear();
        let report = validate_kb(&kb);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].entry.as_deref(), Some("a100"));
        assert_eq!(report.violations[0].field, "vram_gib");
    }

    #[test]
    fn negative_peak_is_one_violation() {
        let mut kb = load_kb(MINI).unwrap();
        kb.entries[0].throughputs[0].peak = Exact::from_integer(-1);
        assert_eq!(validate_kb(&kb).violations.len(), 1);
    }

    #[test]
    fn unit_must_match_precision() {
        let mut kb = load_kb(MINI).unwrap();
        kb.entries[0].throughputs[0].unit = ThroughputUnit::Tflops;
        assert_eq!(validate_kb(&kb).violations.len(), 1);
    }
}
