//! Static analysis of ML training codebases for hardware provenance.
//!
//! [`extract`] turns a source tree into a canonical [`SignalSet`];
//! [`infer`] maps signals to capability constraints and filters the
//! accelerator [`kb`]; [`tpp`] scores entries against an ECCN 3A090
//! threshold; [`report`] assembles and renders the result.

pub mod extract;
pub mod infer;
pub mod kb;
pub mod report;
pub mod scalar;
pub mod signal;
pub mod tpp;

pub use extract::{scan_tree, ScanError, ScanLimits, ScanOptions};
pub use infer::{infer, CapabilityConstraint, InferenceResult, RuleTable};
pub use kb::{default_kb, load_kb, GpuSpec, KnowledgeBase, Tri, TriMode};
pub use report::{analyze, AnalysisError, AnalysisOptions, ScanReport};
pub use scalar::{Exact, Scalar};
pub use signal::{Signal, SignalKind, SignalRef, SignalSet, Tier};
pub use tpp::{classify_entry, compute_tpp, TppClassification, TppError, TppInput, TppStatus};

pub type ExactTppInput = TppInput<Exact>;
pub type ExactTpp = TppClassification<Exact>;
pub type FloatTppInput = TppInput<f64>;
pub type FloatTpp = TppClassification<f64>;
pub type SingleTpp = TppClassification<f32>;
