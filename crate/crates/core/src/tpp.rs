//! Total Processing Performance for ECCN 3A090.
//!
//! `TPP = 2 × MacTOPS × bit_length`, where a multiply-accumulate counts as
//! two operations, so `MacTOPS = peak / 2` for a peak quoted in TFLOPS or
//! TOPS. The result is the highest TPP over all dense precision modes.

use std::cmp::Ordering;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::kb::{GpuSpec, Precision};
use crate::scalar::Scalar;

/// Bit lengths TPP is defined for.
pub const SUPPORTED_BIT_LENGTHS: [u32; 5] = [4, 8, 16, 32, 64];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TppError {
    #[error("MacTOPS must be positive")]
    NonPositiveMactops,
    #[error("bit length {0} is not one of 4, 8, 16, 32, 64")]
    UnsupportedBitLength(u32),
    #[error("threshold must be positive")]
    NonPositiveThreshold,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TppInput<S> {
    pub mactops: S,
    pub bit_length: u32,
}

pub fn compute_tpp<S: Scalar>(input: &TppInput<S>) -> Result<S, TppError> {
    if input.mactops <= S::zero() {
        return Err(TppError::NonPositiveMactops);
    }
    if !SUPPORTED_BIT_LENGTHS.contains(&input.bit_length) {
        return Err(TppError::UnsupportedBitLength(input.bit_length));
    }
    let two = S::one() + S::one();
    let bits = S::from_u32(input.bit_length).ok_or(TppError::UnsupportedBitLength(input.bit_length))?;
    Ok(two * input.mactops.clone() * bits)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TppStatus {
    AboveThreshold,
    BelowThreshold,
    NoThroughputData,
}

fn ser_scalar<S: Scalar, Z: Serializer>(v: &S, z: Z) -> Result<Z::Ok, Z::Error> {
    z.serialize_str(&v.render())
}

fn de_scalar<'de, S: Scalar, D: Deserializer<'de>>(d: D) -> Result<S, D::Error> {
    let text = String::deserialize(d)?;
    S::parse_text(&text).ok_or_else(|| D::Error::custom(format!("invalid number `{text}`")))
}

fn ser_opt<S: Scalar, Z: Serializer>(v: &Option<S>, z: Z) -> Result<Z::Ok, Z::Error> {
    match v {
        Some(v) => z.serialize_some(&v.render()),
        None => z.serialize_none(),
    }
}

fn de_opt<'de, S: Scalar, D: Deserializer<'de>>(d: D) -> Result<Option<S>, D::Error> {
    match Option::<String>::deserialize(d)? {
        Some(text) => S::parse_text(&text)
            .map(Some)
            .ok_or_else(|| D::Error::custom(format!("invalid number `{text}`"))),
        None => Ok(None),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "S: Scalar", deserialize = "S: Scalar"))]
pub struct TppRow<S> {
    pub precision: Precision,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accumulate_mode: Option<String>,
    #[serde(serialize_with = "ser_scalar", deserialize_with = "de_scalar")]
    pub tpp: S,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "S: Scalar", deserialize = "S: Scalar"))]
pub struct TppClassification<S> {
    pub id: String,
    pub per_mode: Vec<TppRow<S>>,
    #[serde(serialize_with = "ser_opt", deserialize_with = "de_opt")]
    pub max_tpp: Option<S>,
    pub max_mode: Option<Precision>,
    #[serde(serialize_with = "ser_scalar", deserialize_with = "de_scalar")]
    pub threshold: S,
    pub status: TppStatus,
}

/// TPP of every dense throughput figure of `spec`, and the maximum against
/// `threshold`. Ties for the maximum keep the earlier precision in
/// `fp32, tf32, fp16, bf16, int8, int4` order.
pub fn classify_entry<S: Scalar>(spec: &GpuSpec, threshold: &S) -> Result<TppClassification<S>, TppError> {
    if *threshold <= S::zero() {
        return Err(TppError::NonPositiveThreshold);
    }
    let two = S::one() + S::one();
    let mut dense: Vec<_> = spec.throughputs.iter().filter(|t| !t.sparse).collect();
    dense.sort_by_key(|t| t.precision);

    let mut per_mode = Vec::with_capacity(dense.len());
    for t in dense {
        let input = TppInput {
            mactops: S::from_exact(&t.peak) / two.clone(),
            bit_length: t.precision.bit_length(),
        };
        per_mode.push(TppRow {
            precision: t.precision,
            accumulate_mode: t.accumulate_mode.clone(),
            tpp: compute_tpp(&input)?,
        });
    }

    let mut best: Option<&TppRow<S>> = None;
    for row in &per_mode {
        if best.is_none_or(|b| row.tpp.partial_cmp(&b.tpp) == Some(Ordering::Greater)) {
            best = Some(row);
        }
    }
    let max_tpp = best.map(|b| b.tpp.clone());
    let max_mode = best.map(|b| b.precision);
    let status = match &max_tpp {
        None => TppStatus::NoThroughputData,
        Some(m) if *m >= *threshold => TppStatus::AboveThreshold,
        Some(_) => TppStatus::BelowThreshold,
    };
    Ok(TppClassification {
        id: spec.id.clone(),
        per_mode,
        max_tpp,
        max_mode,
        threshold: threshold.clone(),
        status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::default_kb;
    use crate::scalar::{parse_decimal, Exact};
    use proptest::prelude::*;

    fn dec(s: &str) -> Exact {
        parse_decimal(s).unwrap()
    }

    #[test]
    fn rtx4090_fp16() {
        let tpp = compute_tpp(&TppInput {
            mactops: dec("330.3") / Exact::from_integer(2),
            bit_length: 16,
        })
        .unwrap();
        assert_eq!(tpp, dec("5284.8"));
    }

    #[test]
    fn domain_errors() {
        let zero = TppInput {
            mactops: Exact::from_integer(0),
            bit_length: 16,
        };
        assert_eq!(compute_tpp(&zero), Err(TppError::NonPositiveMactops));
        let odd = TppInput {
            mactops: Exact::from_integer(1),
            bit_length: 12,
        };
        assert_eq!(compute_tpp(&odd), Err(TppError::UnsupportedBitLength(12)));
    }

    #[test]
    fn bundled_entries() {
        let kb = default_kb();
        let threshold = dec("4800");
        let c = classify_entry(kb.get("rtx4090").unwrap(), &threshold).unwrap();
        assert_eq!(c.max_tpp, Some(dec("5284.8")));
        assert_eq!(c.max_mode, Some(Precision::Fp16));
        assert_eq!(c.status, TppStatus::AboveThreshold);
        let c = classify_entry(kb.get("a100").unwrap(), &threshold).unwrap();
        assert_eq!(c.max_tpp, Some(dec("4992")));
        assert_eq!(c.status, TppStatus::AboveThreshold);
        let c = classify_entry(kb.get("h20").unwrap(), &threshold).unwrap();
        assert_eq!(c.max_tpp, Some(dec("2368")));
        assert_eq!(c.status, TppStatus::BelowThreshold);
        let c = classify_entry(kb.get("h100").unwrap(), &threshold).unwrap();
        assert_eq!(c.max_tpp, Some(dec("15832")));
    }

    #[test]
    fn at_threshold_is_above() {
        let kb = default_kb();
        let c = classify_entry(kb.get("a100").unwrap(), &dec("4992")).unwrap();
        assert_eq!(c.status, TppStatus::AboveThreshold);
        let c = classify_entry(kb.get("a100").unwrap(), &dec("4992.000001")).unwrap();
        assert_eq!(c.status, TppStatus::BelowThreshold);
    }

    #[test]
    fn float_agrees_with_exact() {
        let kb = default_kb();
        for e in kb.entries() {
            let x = classify_entry(e, &dec("4800")).unwrap();
            let f = classify_entry(e, &4800.0f64).unwrap();
            assert_eq!(x.status, f.status, "{}", e.id);
            if let (Some(a), Some(b)) = (x.max_tpp, f.max_tpp) {
                let a = crate::scalar::exact_to_f64(&a);
                assert!((a - b).abs() <= 1e-9 * a, "{}", e.id);
            }
        }
    }

    #[test]
    fn machine_form_round_trips() {
        let kb = default_kb();
        let c = classify_entry(kb.get("rtx4090").unwrap(), &dec("4800")).unwrap();
        let json = serde_json::to_string(&c).unwrap();
        assert!(json.contains("\"5284.8\""));
        let back: TppClassification<Exact> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, c);
    }

    proptest! {
        #[test]
        fn linear_in_mactops(m in 1i64..1_000_000, k in 1i64..1000, bits in prop::sample::select(SUPPORTED_BIT_LENGTHS.to_vec())) {
            let base = TppInput { mactops: Exact::new(m as i128, 10), bit_length: bits };
            let scaled = TppInput { mactops: base.mactops * Exact::from_integer(k as i128), bit_length: bits };
            prop_assert_eq!(compute_tpp(&scaled).unwrap(), compute_tpp(&base).unwrap() * Exact::from_integer(k as i128));
        }

        #[test]
        fn linear_in_bits(m in 1i64..1_000_000) {
            let at = |b| compute_tpp(&TppInput { mactops: Exact::new(m as i128, 100), bit_length: b }).unwrap();
            prop_assert_eq!(at(16) * Exact::from_integer(2), at(32));
            prop_assert_eq!(at(4) * Exact::from_integer(16), at(64));
        }

        #[test]
        fn raising_threshold_never_promotes(idx in 0usize..14, lo in 1i64..20_000, extra in 0i64..20_000) {
            let kb = default_kb();
            let spec = &kb.entries()[idx % kb.len()];
            let a = classify_entry(spec, &Exact::from_integer(lo as i128)).unwrap();
            let b = classify_entry(spec, &Exact::from_integer((lo + extra) as i128)).unwrap();
            if a.status == TppStatus::BelowThreshold {
                prop_assert_eq!(b.status, TppStatus::BelowThreshold);
            }
        }
    }
}
