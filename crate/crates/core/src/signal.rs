use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// What a signal says about the training setup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    CommBackend,
    DtypeConfig,
    ZeroStage,
    RdmaEnv,
    IbEnv,
    IbTuningEnv,
    GpusPerNode,
    GradAccum,
    HardwareMention,
}

impl SignalKind {
    pub const ALL: [SignalKind; 9] = [
        SignalKind::CommBackend,
        SignalKind::DtypeConfig,
        SignalKind::ZeroStage,
        SignalKind::RdmaEnv,
        SignalKind::IbEnv,
        SignalKind::IbTuningEnv,
        SignalKind::GpusPerNode,
        SignalKind::GradAccum,
        SignalKind::HardwareMention,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SignalKind::CommBackend => "comm_backend",
            SignalKind::DtypeConfig => "dtype_config",
            SignalKind::ZeroStage => "zero_stage",
            SignalKind::RdmaEnv => "rdma_env",
            SignalKind::IbEnv => "ib_env",
            SignalKind::IbTuningEnv => "ib_tuning_env",
            SignalKind::GpusPerNode => "gpus_per_node",
            SignalKind::GradAccum => "grad_accum",
            SignalKind::HardwareMention => "hardware_mention",
        }
    }
}

impl fmt::Display for SignalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SignalKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SignalKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown signal kind `{s}`"))
    }
}

/// Evidence strength. Ordered `Prose < Config < Executable`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Prose,
    Config,
    Executable,
}

impl Tier {
    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Prose => "prose",
            Tier::Config => "config",
            Tier::Executable => "executable",
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A `(path, line)` pair. Paths are relative to the scan root and use `/`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Location {
    pub path: String,
    pub line: u32,
}

impl Location {
    pub fn new(path: impl Into<String>, line: u32) -> Self {
        Self {
            path: path.into(),
            line: line.max(1),
        }
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.path, self.line)
    }
}

/// One extracted fact.
///
/// `surface` is the text the extractor matched on the located line; it is
/// kept for reviewers and is not part of the signal's identity.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Signal {
    pub kind: SignalKind,
    pub value: String,
    pub tier: Tier,
    pub location: Location,
    pub surface: String,
}

impl Signal {
    pub fn new(
        kind: SignalKind,
        value: impl Into<String>,
        tier: Tier,
        location: Location,
        surface: impl Into<String>,
    ) -> Self {
        Self {
            kind,
            value: value.into(),
            tier,
            location,
            surface: surface.into(),
        }
    }

    /// Stable reference used by constraints and traces.
    pub fn reference(&self) -> SignalRef {
        SignalRef {
            kind: self.kind,
            value: self.value.clone(),
            location: self.location.clone(),
        }
    }

    fn sort_key(&self) -> (&str, u32, SignalKind, &str, Tier, &str) {
        (
            &self.location.path,
            self.location.line,
            self.kind,
            &self.value,
            self.tier,
            &self.surface,
        )
    }
}

impl fmt::Display for Signal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}) @ {}", self.kind, self.value, self.location)
    }
}

/// Identity of a signal: `(kind, value, location)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SignalRef {
    pub kind: SignalKind,
    pub value: String,
    pub location: Location,
}

impl fmt::Display for SignalRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}) @ {}", self.kind, self.value, self.location)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanStats {
    pub files_scanned: u64,
    pub files_skipped: u64,
    pub parse_errors: u64,
}

impl ScanStats {
    pub fn merge(self, other: ScanStats) -> ScanStats {
        ScanStats {
            files_scanned: self.files_scanned + other.files_scanned,
            files_skipped: self.files_skipped + other.files_skipped,
            parse_errors: self.parse_errors + other.parse_errors,
        }
    }
}

/// Signals in canonical order with duplicates collapsed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignalSet {
    signals: Vec<Signal>,
    pub stats: ScanStats,
}

impl SignalSet {
    pub fn new(signals: impl IntoIterator<Item = Signal>, stats: ScanStats) -> Self {
        let mut signals: Vec<Signal> = signals.into_iter().collect();
        signals.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        signals.dedup_by(|b, a| a.kind == b.kind && a.value == b.value && a.location == b.location);
        Self { signals, stats }
    }

    pub fn from_signals(signals: impl IntoIterator<Item = Signal>) -> Self {
        Self::new(signals, ScanStats::default())
    }

    pub fn signals(&self) -> &[Signal] {
        &self.signals
    }

    pub fn len(&self) -> usize {
        self.signals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signals.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Signal> {
        self.signals.iter()
    }

    pub fn of_kind(&self, kind: SignalKind) -> impl Iterator<Item = &Signal> {
        self.signals.iter().filter(move |s| s.kind == kind)
    }

    pub fn contains_ref(&self, r: &SignalRef) -> bool {
        self.signals
            .iter()
            .any(|s| s.kind == r.kind && s.value == r.value && s.location == r.location)
    }
}

impl<'a> IntoIterator for &'a SignalSet {
    type Item = &'a Signal;
    type IntoIter = std::slice::Iter<'a, Signal>;

    fn into_iter(self) -> Self::IntoIter {
        self.signals.iter()
    }
}
