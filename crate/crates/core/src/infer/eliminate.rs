//! Candidate elimination with a per-entry trace.

use serde::{Deserialize, Serialize};

use super::environment::EnvironmentAssessment;
use super::rules::CapabilityConstraint;
use crate::kb::{Clause, KnowledgeBase, Outcome, TriMode};
use crate::signal::SignalRef;

/// Why one entry left the candidate set.
///
/// Attribution goes to the first failing constraint in rule-table order;
/// other rules the entry also fails are listed in `also_violates`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub eliminated: String,
    pub rule_id: String,
    pub requirement: Clause,
    pub derived_from: Vec<SignalRef>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub also_violates: Vec<String>,
}

/// A surviving candidate that passed a clause only on undocumented data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UndocumentedFlag {
    pub id: String,
    pub field: String,
    pub rule_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintLabel {
    pub rule_id: String,
    pub requirement: Clause,
}

impl From<&CapabilityConstraint> for ConstraintLabel {
    fn from(c: &CapabilityConstraint) -> Self {
        Self {
            rule_id: c.rule_id.clone(),
            requirement: c.requirement.clone(),
        }
    }
}

/// A minimal set of constraints no entry satisfies together: one
/// constraint on its own, or a pair that are each satisfiable alone.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conflict {
    pub constraints: Vec<ConstraintLabel>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InferenceResult {
    pub mode: TriMode,
    pub candidates: Vec<String>,
    pub undocumented: Vec<UndocumentedFlag>,
    pub trace: Vec<TraceRecord>,
    pub conflicts: Vec<Conflict>,
    pub environment: EnvironmentAssessment,
}

fn satisfies(kb: &KnowledgeBase, cs: &[&CapabilityConstraint], mode: TriMode) -> bool {
    kb.entries()
        .iter()
        .any(|e| cs.iter().all(|c| c.requirement.evaluate(e, mode).passed()))
}

fn conflicts(kb: &KnowledgeBase, constraints: &[CapabilityConstraint], mode: TriMode) -> Vec<Conflict> {
    let alone: Vec<bool> = constraints.iter().map(|c| satisfies(kb, &[c], mode)).collect();
    let mut out = Vec::new();
    for (i, c) in constraints.iter().enumerate() {
        if !alone[i] {
            out.push(Conflict {
                constraints: vec![c.into()],
            });
        }
    }
    for i in 0..constraints.len() {
        for j in i + 1..constraints.len() {
            if alone[i] && alone[j] && !satisfies(kb, &[&constraints[i], &constraints[j]], mode) {
                let pair = Conflict {
                    constraints: vec![(&constraints[i]).into(), (&constraints[j]).into()],
                };
                if !out.contains(&pair) {
                    out.push(pair);
                }
            }
        }
    }
    out
}

/// Filters the knowledge base by every constraint.
///
/// `environment` is left unassessed; [`super::infer`] fills it in.
pub fn eliminate(kb: &KnowledgeBase, constraints: &[CapabilityConstraint], mode: TriMode) -> InferenceResult {
    let mut entries: Vec<_> = kb.entries().iter().collect();
    entries.sort_by(|a, b| a.id.cmp(&b.id));

    let mut candidates = Vec::new();
    let mut undocumented = Vec::new();
    let mut trace = Vec::new();
    for entry in entries {
        let outcomes: Vec<Outcome> = constraints
            .iter()
            .map(|c| c.requirement.evaluate(entry, mode))
            .collect();
        let mut failing = constraints
            .iter()
            .zip(&outcomes)
            .filter(|(_, o)| !o.passed())
            .map(|(c, _)| c);
        match failing.next() {
            None => {
                candidates.push(entry.id.clone());
                for (c, o) in constraints.iter().zip(&outcomes) {
                    let flag = UndocumentedFlag {
                        id: entry.id.clone(),
                        field: c.requirement.field.to_string(),
                        rule_id: c.rule_id.clone(),
                    };
                    if *o == Outcome::PassUndocumented && !undocumented.contains(&flag) {
                        undocumented.push(flag);
                    }
                }
            }
            Some(first) => {
                let mut also: Vec<String> = Vec::new();
                for c in failing {
                    if c.rule_id != first.rule_id && !also.contains(&c.rule_id) {
                        also.push(c.rule_id.clone());
                    }
                }
                trace.push(TraceRecord {
                    eliminated: entry.id.clone(),
                    rule_id: first.rule_id.clone(),
                    requirement: first.requirement.clone(),
                    derived_from: first.derived_from.clone(),
                    also_violates: also,
                });
            }
        }
    }
    let conflicts = if candidates.is_empty() && !constraints.is_empty() && !kb.is_empty() {
        conflicts(kb, constraints, mode)
    } else {
        Vec::new()
    };
    InferenceResult {
        mode,
        candidates,
        undocumented,
        trace,
        conflicts,
        environment: EnvironmentAssessment::unassessed(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::default_kb;

    fn constraint(rule: &str, clause: &str) -> CapabilityConstraint {
        CapabilityConstraint {
            rule_id: rule.into(),
            requirement: clause.parse().unwrap(),
            derived_from: Vec::new(),
        }
    }

    #[test]
    fn no_constraints_keeps_everything() {
        let kb = default_kb();
        let r = eliminate(&kb, &[], TriMode::Strict);
        assert_eq!(r.candidates.len(), kb.len());
        assert!(r.trace.is_empty());
    }

    #[test]
    fn one_trace_record_per_eliminated_entry() {
        let kb = default_kb();
        let cs = [constraint("a", "vendor = nvidia"), constraint("b", "bfloat16 = yes")];
        let r = eliminate(&kb, &cs, TriMode::Strict);
        assert_eq!(r.candidates.len() + r.trace.len(), kb.len());
        let mi = r.trace.iter().find(|t| t.eliminated == "mi300x").unwrap();
        assert_eq!(mi.rule_id, "a");
        let v = r.trace.iter().find(|t| t.eliminated == "v100").unwrap();
        assert_eq!(v.rule_id, "b");
    }

    #[test]
    fn lenient_flags_undocumented() {
        let kb = default_kb();
        let cs = [constraint("rdma", "gpudirect_rdma = yes")];
        let strict = eliminate(&kb, &cs, TriMode::Strict);
        let lenient = eliminate(&kb, &cs, TriMode::Lenient);
        assert!(!strict.candidates.contains(&"a40".to_string()));
        assert!(lenient.candidates.contains(&"a40".to_string()));
        assert!(lenient.undocumented.iter().any(|f| f.id == "a40" && f.field == "gpudirect_rdma"));
    }

    #[test]
    fn contradictory_pair_is_reported() {
        let kb = default_kb();
        let cs = [constraint("a", "vendor = amd"), constraint("b", "nccl_compatible = yes")];
        let r = eliminate(&kb, &cs, TriMode::Strict);
        assert!(r.candidates.is_empty());
        assert_eq!(r.conflicts.len(), 1);
        assert_eq!(r.conflicts[0].constraints.len(), 2);
    }

    #[test]
    fn unsatisfiable_single_constraint() {
        let kb = default_kb();
        let r = eliminate(&kb, &[constraint("a", "id = tpu_v5")], TriMode::Strict);
        assert_eq!(r.conflicts.len(), 1);
        assert_eq!(r.conflicts[0].constraints.len(), 1);
    }
}
