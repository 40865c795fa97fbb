//! Signals to constraints to candidates.

pub mod eliminate;
pub mod environment;
pub mod rules;

pub use eliminate::{eliminate, Conflict, ConstraintLabel, InferenceResult, TraceRecord, UndocumentedFlag};
pub use environment::{classify_environment, EnvironmentAssessment};
pub use rules::{
    default_rules, load_rules, signals_to_constraints, CapabilityConstraint, ClauseTemplate, CorroborationNote,
    Derivation, Rule, RuleTable, RuleTableError, SignalMatcher,
};

use crate::kb::{KnowledgeBase, TriMode};
use crate::signal::SignalSet;

/// Runs the rule table, eliminates, and classifies the environment.
pub fn infer(kb: &KnowledgeBase, signals: &SignalSet, rules: &RuleTable, mode: TriMode) -> (Derivation, InferenceResult) {
    let derivation = signals_to_constraints(signals, rules);
    let mut result = eliminate(kb, &derivation.constraints, mode);
    result.environment = classify_environment(signals);
    (derivation, result)
}
