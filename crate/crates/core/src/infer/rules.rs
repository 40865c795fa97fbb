//! Rule table: data that turns signals into capability constraints.
//!
//! ```toml
//! schema_version = 1
//!
//! [[rules]]
//! rule_id = "nccl-requires-nvidia"
//! min_tier = "config"            # weakest tier allowed to eliminate
//! requires = ["vendor = nvidia"] # clauses over knowledge-base fields
//! [[rules.when]]                 # every matcher must be satisfied
//! kind = "comm_backend"
//! value = "nccl"
//! ```
//!
//! A matcher may instead name an environment variable (`name = "nccl_net_gdr_level"`)
//! and list `except_values` that do not count. A clause value of `{value}`
//! is replaced by the value of the signal matching the first matcher, and
//! the rule is instantiated once per distinct such value.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extract::catalog;
use crate::kb::{Clause, ClauseOp, Field, PredicateError};
use crate::signal::{Signal, SignalKind, SignalRef, SignalSet, Tier};

pub const RULES_SCHEMA_VERSION: u32 = 1;

pub const DEFAULT_RULES_TOML: &str = include_str!("../../data/default_rules.toml");

const VALUE_PLACEHOLDER: &str = "{value}";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalMatcher {
    pub kind: SignalKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
    /// For `name=value` environment signals: the variable name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub except_values: Vec<String>,
}

impl SignalMatcher {
    pub fn matches(&self, signal: &Signal) -> bool {
        if signal.kind != self.kind {
            return false;
        }
        if let Some(v) = &self.value {
            if !signal.value.eq_ignore_ascii_case(v) {
                return false;
            }
        }
        let own_value = if self.name.is_some() {
            catalog::env_value(&signal.value)
        } else {
            signal.value.as_str()
        };
        if let Some(n) = &self.name {
            if !catalog::env_name(&signal.value).eq_ignore_ascii_case(n) {
                return false;
            }
        }
        !self
            .except_values
            .iter()
            .any(|x| x.eq_ignore_ascii_case(own_value))
    }
}

/// `field op value` text, possibly with a `{value}` placeholder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ClauseTemplate {
    text: String,
    field: Field,
    op: ClauseOp,
    value: String,
}

impl ClauseTemplate {
    pub fn parse(text: &str) -> Result<Self, PredicateError> {
        let clause_like = text.replace(VALUE_PLACEHOLDER, "");
        let op_at = clause_like
            .find(['=', '!', '>', '<'])
            .ok_or_else(|| PredicateError::Syntax(text.to_string()))?;
        let field: Field = text[..op_at].trim().parse()?;
        let rest = &text[op_at..];
        let op_len = rest.chars().take_while(|c| matches!(c, '=' | '!' | '>' | '<')).count();
        let op: ClauseOp = rest[..op_len].parse()?;
        let value = rest[op_len..].trim().to_string();
        if !value.contains(VALUE_PLACEHOLDER) {
            Clause::new(field, op, &value)?;
        }
        Ok(Self {
            text: text.to_string(),
            field,
            op,
            value,
        })
    }

    pub fn is_templated(&self) -> bool {
        self.value.contains(VALUE_PLACEHOLDER)
    }

    pub fn instantiate(&self, signal_value: &str) -> Result<Clause, PredicateError> {
        Clause::new(self.field, self.op, &self.value.replace(VALUE_PLACEHOLDER, signal_value))
    }
}

impl TryFrom<String> for ClauseTemplate {
    type Error = PredicateError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        ClauseTemplate::parse(&s)
    }
}

impl From<ClauseTemplate> for String {
    fn from(t: ClauseTemplate) -> Self {
        t.text
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rule {
    pub rule_id: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub min_tier: Tier,
    pub when: Vec<SignalMatcher>,
    pub requires: Vec<ClauseTemplate>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleTable {
    pub schema_version: u32,
    pub rules: Vec<Rule>,
}

#[derive(Debug, Error)]
pub enum RuleTableError {
    #[error("rule table is not valid: {0}")]
    Parse(String),
    #[error("rule table schema_version {found} is not supported (expected {supported})")]
    SchemaVersion { found: u32, supported: u32 },
    #[error("duplicate rule_id `{0}`")]
    DuplicateRule(String),
    #[error("rule `{0}` has no `when` matchers")]
    EmptyPattern(String),
    #[error("rule `{0}` has no `requires` clauses")]
    EmptyRequirement(String),
}

pub fn load_rules(source: &str) -> Result<RuleTable, RuleTableError> {
    #[derive(Deserialize)]
    struct Header {
        schema_version: u32,
    }
    let header: Header = toml::from_str(source).map_err(|e| RuleTableError::Parse(e.to_string()))?;
    if header.schema_version != RULES_SCHEMA_VERSION {
        return Err(RuleTableError::SchemaVersion {
            found: header.schema_version,
            supported: RULES_SCHEMA_VERSION,
        });
    }
    let table: RuleTable = toml::from_str(source).map_err(|e| RuleTableError::Parse(e.to_string()))?;
    let mut seen = BTreeSet::new();
    for rule in &table.rules {
        if !seen.insert(rule.rule_id.as_str()) {
            return Err(RuleTableError::DuplicateRule(rule.rule_id.clone()));
        }
        if rule.when.is_empty() {
            return Err(RuleTableError::EmptyPattern(rule.rule_id.clone()));
        }
        if rule.requires.is_empty() {
            return Err(RuleTableError::EmptyRequirement(rule.rule_id.clone()));
        }
    }
    Ok(table)
}

pub fn default_rules() -> RuleTable {
    load_rules(DEFAULT_RULES_TOML).expect("bundled rule table is valid")
}

/// A requirement on knowledge-base entries, with the evidence behind it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapabilityConstraint {
    pub rule_id: String,
    pub requirement: Clause,
    pub derived_from: Vec<SignalRef>,
}

/// Evidence that matched a rule but is too weak to eliminate anything.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorroborationNote {
    pub rule_id: String,
    pub signals: Vec<SignalRef>,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Derivation {
    pub constraints: Vec<CapabilityConstraint>,
    pub notes: Vec<CorroborationNote>,
}

fn refs<'a>(signals: impl IntoIterator<Item = &'a Signal>) -> Vec<SignalRef> {
    let set: BTreeSet<SignalRef> = signals.into_iter().map(Signal::reference).collect();
    set.into_iter().collect()
}

fn evaluate_rule(rule: &Rule, pool: &[&Signal], out: &mut Derivation, instance_value: Option<&str>) {
    let matched: Vec<Vec<&Signal>> = rule
        .when
        .iter()
        .map(|m| pool.iter().copied().filter(|s| m.matches(s)).collect())
        .collect();
    if matched.iter().any(Vec::is_empty) {
        return;
    }
    let eligible: Vec<Vec<&Signal>> = matched
        .iter()
        .map(|group| group.iter().copied().filter(|s| s.tier >= rule.min_tier).collect())
        .collect();
    if eligible.iter().any(Vec::is_empty) {
        let weak = matched
            .iter()
            .flatten()
            .copied()
            .filter(|s| s.tier < rule.min_tier);
        out.notes.push(CorroborationNote {
            rule_id: rule.rule_id.clone(),
            signals: refs(weak),
            reason: format!("evidence below minimum tier `{}`", rule.min_tier),
        });
        return;
    }
    let derived_from = refs(eligible.iter().flatten().copied());
    for template in &rule.requires {
        let clause = match (template.is_templated(), instance_value) {
            (true, Some(v)) => template.instantiate(v),
            (true, None) => continue,
            (false, _) => template.instantiate(""),
        };
        // A placeholder value the field cannot take (e.g. an unknown id) is not a requirement.
        let Ok(requirement) = clause else { continue };
        out.constraints.push(CapabilityConstraint {
            rule_id: rule.rule_id.clone(),
            requirement,
            derived_from: derived_from.clone(),
        });
    }
}

/// Applies the rule table in order. Output order depends only on the rule
/// table and the canonical signal order.
pub fn signals_to_constraints(signals: &SignalSet, rules: &RuleTable) -> Derivation {
    let mut out = Derivation::default();
    let all: Vec<&Signal> = signals.iter().collect();
    for rule in &rules.rules {
        if rule.requires.iter().any(ClauseTemplate::is_templated) {
            let mut by_value: BTreeMap<String, Vec<&Signal>> = BTreeMap::new();
            for s in all.iter().copied().filter(|s| rule.when[0].matches(s)) {
                by_value.entry(s.value.to_ascii_lowercase()).or_default().push(s);
            }
            for (value, firsts) in by_value {
                let pool: Vec<&Signal> = all
                    .iter()
                    .copied()
                    .filter(|s| !rule.when[0].matches(s) || firsts.contains(s))
                    .collect();
                evaluate_rule(rule, &pool, &mut out, Some(&value));
            }
        } else {
            evaluate_rule(rule, &all, &mut out, None);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::Location;

    fn sig(kind: SignalKind, value: &str, tier: Tier) -> Signal {
        Signal::new(kind, value, tier, Location::new("f", 1), value)
    }

    #[test]
    fn nccl_implies_nvidia() {
        let set = SignalSet::from_signals([sig(SignalKind::CommBackend, "nccl", Tier::Executable)]);
        let d = signals_to_constraints(&set, &default_rules());
        let got: Vec<String> = d.constraints.iter().map(|c| c.requirement.to_string()).collect();
        assert_eq!(got, vec!["vendor = nvidia"]);
        assert!(d.notes.is_empty());
    }

    #[test]
    fn empty_set_no_constraints() {
        let d = signals_to_constraints(&SignalSet::default(), &default_rules());
        assert!(d.constraints.is_empty() && d.notes.is_empty());
    }

    #[test]
    fn prose_mention_is_a_note_only() {
        let set = SignalSet::from_signals([sig(SignalKind::HardwareMention, "h20", Tier::Prose)]);
        let d = signals_to_constraints(&set, &default_rules());
        assert!(d.constraints.is_empty());
        assert_eq!(d.notes.len(), 1);
        assert_eq!(d.notes[0].signals[0].value, "h20");
    }

    #[test]
    fn gdr_level_yields_two_clauses() {
        let set = SignalSet::from_signals([sig(SignalKind::RdmaEnv, "nccl_net_gdr_level=2", Tier::Executable)]);
        let d = signals_to_constraints(&set, &default_rules());
        let got: Vec<String> = d.constraints.iter().map(|c| c.requirement.to_string()).collect();
        assert_eq!(got, vec!["gpudirect_rdma = yes", "datacenter = yes"]);
    }

    #[test]
    fn gdr_level_loc_does_not_fire() {
        for v in ["nccl_net_gdr_level=0", "nccl_net_gdr_level=loc"] {
            let set = SignalSet::from_signals([sig(SignalKind::RdmaEnv, v, Tier::Executable)]);
            assert!(signals_to_constraints(&set, &default_rules()).constraints.is_empty(), "{v}");
        }
    }

    #[test]
    fn unknown_field_in_rule_is_load_error() {
        let src = "schema_version = 1\n[[rules]]\nrule_id = \"x\"\nmin_tier = \"config\"\nrequires = [\"warp_size = 32\"]\n[[rules.when]]\nkind = \"comm_backend\"\n";
        let err = load_rules(src).unwrap_err();
        assert!(err.to_string().contains("warp_size"), "{err}");
    }

    #[test]
    fn unknown_signal_kind_is_load_error() {
        let src = "schema_version = 1\n[[rules]]\nrule_id = \"x\"\nmin_tier = \"config\"\nrequires = [\"vendor = nvidia\"]\n[[rules.when]]\nkind = \"cuda_graphs\"\n";
        assert!(matches!(load_rules(src), Err(RuleTableError::Parse(_))));
    }

    #[test]
    fn duplicate_rule_id() {
        let rule = "[[rules]]\nrule_id = \"x\"\nmin_tier = \"config\"\nrequires = [\"vendor = nvidia\"]\n[[rules.when]]\nkind = \"comm_backend\"\n";
        let src = format!("schema_version = 1\n{rule}{rule}");
        assert!(matches!(load_rules(&src), Err(RuleTableError::DuplicateRule(_))));
    }
}
