//! Capability predicates over [`GpuSpec`] and the filtering primitive.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{GpuSpec, KnowledgeBase, Tri, Vendor};

/// How `Undocumented` is treated when a clause requires a definite value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriMode {
    /// Undocumented fails.
    #[default]
    Strict,
    /// Undocumented passes, flagged.
    Lenient,
}

impl TriMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TriMode::Strict => "strict",
            TriMode::Lenient => "lenient",
        }
    }
}

impl FromStr for TriMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "strict" => Ok(TriMode::Strict),
            "lenient" => Ok(TriMode::Lenient),
            other => Err(format!("unknown mode `{other}` (expected strict or lenient)")),
        }
    }
}

impl fmt::Display for TriMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Queryable field of a [`GpuSpec`]. `nccl_compatible` is derived from the vendor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Field {
    Id,
    Vendor,
    Architecture,
    Datacenter,
    Bfloat16,
    GpudirectRdma,
    Nvlink,
    NcclCompatible,
    ConsumerMarket,
    VramGib,
}

impl Field {
    pub const ALL: [Field; 10] = [
        Field::Id,
        Field::Vendor,
        Field::Architecture,
        Field::Datacenter,
        Field::Bfloat16,
        Field::GpudirectRdma,
        Field::Nvlink,
        Field::NcclCompatible,
        Field::ConsumerMarket,
        Field::VramGib,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Field::Id => "id",
            Field::Vendor => "vendor",
            Field::Architecture => "architecture",
            Field::Datacenter => "datacenter",
            Field::Bfloat16 => "bfloat16",
            Field::GpudirectRdma => "gpudirect_rdma",
            Field::Nvlink => "nvlink",
            Field::NcclCompatible => "nccl_compatible",
            Field::ConsumerMarket => "consumer_market",
            Field::VramGib => "vram_gib",
        }
    }

    pub fn is_tri(self) -> bool {
        matches!(
            self,
            Field::Datacenter | Field::Bfloat16 | Field::GpudirectRdma | Field::Nvlink | Field::NcclCompatible
        )
    }

    fn tri_of(self, spec: &GpuSpec) -> Option<Tri> {
        Some(match self {
            Field::Datacenter => spec.datacenter,
            Field::Bfloat16 => spec.bfloat16,
            Field::GpudirectRdma => spec.gpudirect_rdma,
            Field::Nvlink => spec.nvlink,
            Field::NcclCompatible => spec.nccl_compatible(),
            _ => return None,
        })
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Field {
    type Err = PredicateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Field::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| PredicateError::UnknownField(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClauseOp {
    Eq,
    Ne,
    Ge,
    Le,
}

impl ClauseOp {
    pub fn as_str(self) -> &'static str {
        match self {
            ClauseOp::Eq => "=",
            ClauseOp::Ne => "!=",
            ClauseOp::Ge => ">=",
            ClauseOp::Le => "<=",
        }
    }
}

impl FromStr for ClauseOp {
    type Err = PredicateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "=" | "==" => Ok(ClauseOp::Eq),
            "!=" => Ok(ClauseOp::Ne),
            ">=" => Ok(ClauseOp::Ge),
            "<=" => Ok(ClauseOp::Le),
            other => Err(PredicateError::UnknownOperator(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PredicateError {
    #[error("unknown field `{0}`")]
    UnknownField(String),
    #[error("unknown operator `{0}`")]
    UnknownOperator(String),
    #[error("field `{field}` cannot take value `{value}`")]
    BadValue { field: String, value: String },
    #[error("operator `{op}` is not supported on field `{field}`")]
    BadOperator { field: String, op: String },
    #[error("cannot parse clause `{0}` (expected `field op value`)")]
    Syntax(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Operand {
    Tri(Tri),
    Vendor(Vendor),
    Bool(bool),
    Number(u32),
    Text(String),
}

/// One `field op value` requirement.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Clause {
    pub field: Field,
    pub op: ClauseOp,
    operand: Operand,
}

/// Result of testing a clause against one entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    /// Passed only because lenient mode admitted an undocumented capability.
    PassUndocumented,
    Fail,
}

impl Outcome {
    pub fn passed(self) -> bool {
        !matches!(self, Outcome::Fail)
    }
}

impl Clause {
    pub fn new(field: Field, op: ClauseOp, value: &str) -> Result<Self, PredicateError> {
        let bad_value = || PredicateError::BadValue {
            field: field.to_string(),
            value: value.to_string(),
        };
        let value = value.trim();
        let operand = match field {
            f if f.is_tri() => Operand::Tri(Tri::parse(value).ok_or_else(bad_value)?),
            Field::Vendor => Operand::Vendor(Vendor::parse(value).ok_or_else(bad_value)?),
            Field::ConsumerMarket => Operand::Bool(match value {
                "true" | "yes" => true,
                "false" | "no" => false,
                _ => return Err(bad_value()),
            }),
            Field::VramGib => Operand::Number(value.parse().map_err(|_| bad_value())?),
            _ => {
                if value.is_empty() {
                    return Err(bad_value());
                }
                Operand::Text(value.to_ascii_lowercase())
            }
        };
        if matches!(op, ClauseOp::Ge | ClauseOp::Le) && field != Field::VramGib {
            return Err(PredicateError::BadOperator {
                field: field.to_string(),
                op: op.as_str().to_string(),
            });
        }
        Ok(Self { field, op, operand })
    }

    /// Shorthand for `field = value`.
    pub fn eq(field: Field, value: &str) -> Result<Self, PredicateError> {
        Self::new(field, ClauseOp::Eq, value)
    }

    pub fn value_text(&self) -> String {
        match &self.operand {
            Operand::Tri(t) => t.as_str().to_string(),
            Operand::Vendor(v) => v.as_str().to_string(),
            Operand::Bool(b) => b.to_string(),
            Operand::Number(n) => n.to_string(),
            Operand::Text(s) => s.clone(),
        }
    }

    pub fn evaluate(&self, spec: &GpuSpec, mode: TriMode) -> Outcome {
        let verdict = |ok: bool| if ok { Outcome::Pass } else { Outcome::Fail };
        match (&self.operand, self.op) {
            (Operand::Tri(want), op) => {
                let have = self.field.tri_of(spec).unwrap_or(Tri::Undocumented);
                match op {
                    ClauseOp::Ne => verdict(have != *want),
                    _ if have == *want => Outcome::Pass,
                    _ if have == Tri::Undocumented
                        && *want != Tri::Undocumented
                        && mode == TriMode::Lenient =>
                    {
                        Outcome::PassUndocumented
                    }
                    _ => Outcome::Fail,
                }
            }
            (Operand::Vendor(v), ClauseOp::Ne) => verdict(spec.vendor != *v),
            (Operand::Vendor(v), _) => verdict(spec.vendor == *v),
            (Operand::Bool(b), ClauseOp::Ne) => verdict(spec.consumer_market != *b),
            (Operand::Bool(b), _) => verdict(spec.consumer_market == *b),
            (Operand::Number(n), op) => verdict(match op {
                ClauseOp::Eq => spec.vram_gib.contains(n),
                ClauseOp::Ne => !spec.vram_gib.contains(n),
                ClauseOp::Ge => spec.vram_gib.iter().any(|v| v >= n),
                ClauseOp::Le => spec.vram_gib.iter().any(|v| v <= n),
            }),
            (Operand::Text(s), op) => {
                let have = match self.field {
                    Field::Id => spec.id.to_ascii_lowercase(),
                    _ => spec.architecture.to_ascii_lowercase(),
                };
                verdict((have == *s) == (op != ClauseOp::Ne))
            }
        }
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.field, self.op.as_str(), self.value_text())
    }
}

impl FromStr for Clause {
    type Err = PredicateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let op_at = s
            .find(['=', '!', '>', '<'])
            .ok_or_else(|| PredicateError::Syntax(s.to_string()))?;
        let field: Field = s[..op_at].trim().parse()?;
        let rest = &s[op_at..];
        let op_len = rest.chars().take_while(|c| matches!(c, '=' | '!' | '>' | '<')).count();
        let op: ClauseOp = rest[..op_len].parse()?;
        Clause::new(field, op, &rest[op_len..])
    }
}

impl Serialize for Clause {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Clause {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A conjunction of clauses under one [`TriMode`]. Empty means "everything".
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Predicate {
    pub clauses: Vec<Clause>,
    pub mode: TriMode,
}

impl Predicate {
    pub fn new(clauses: Vec<Clause>, mode: TriMode) -> Self {
        Self { clauses, mode }
    }

    pub fn parse(clauses: &[&str], mode: TriMode) -> Result<Self, PredicateError> {
        let clauses = clauses.iter().map(|c| c.parse()).collect::<Result<_, _>>()?;
        Ok(Self { clauses, mode })
    }

    pub fn matches(&self, spec: &GpuSpec) -> bool {
        self.clauses.iter().all(|c| c.evaluate(spec, self.mode).passed())
    }
}

/// Entries satisfying `predicate`, in id order.
pub fn query<'kb>(kb: &'kb KnowledgeBase, predicate: &Predicate) -> Vec<&'kb GpuSpec> {
    let mut hits: Vec<&GpuSpec> = kb.entries().iter().filter(|e| predicate.matches(e)).collect();
    hits.sort_by(|a, b| a.id.cmp(&b.id));
    hits
}
