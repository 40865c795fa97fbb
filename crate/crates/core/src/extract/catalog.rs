//! The signal catalog: which names, keys and flags carry hardware
//! provenance, and how their values are normalized.
//!
//! Normalization table:
//!
//! | surface                                            | normalized  |
//! |----------------------------------------------------|-------------|
//! | `bf16`, `bfloat16`, `bf16-mixed`, `bf16-true`      | `bfloat16`  |
//! | `fp16`, `float16`, `half`, `16`, `16-mixed`        | `float16`   |
//! | `fp32`, `float32`, `32`, `32-true`                 | `float32`   |
//! | `NCCL`, `nccl` (any case)                          | `nccl`      |
//!
//! A `torch.` / `jnp.` / `np.` / `tf.` module prefix is dropped before lookup.

use crate::signal::{Signal, SignalKind};

/// Maps a dtype spelling onto its canonical name.
pub fn normalize_dtype(token: &str) -> Option<&'static str> {
    let t = token.trim().trim_matches(|c| c == '"' || c == '\'').to_ascii_lowercase();
    let t = ["torch.", "jnp.", "np.", "tf.", "jax.numpy."]
        .iter()
        .find_map(|p| t.strip_prefix(p))
        .unwrap_or(&t);
    match t.replace('_', "-").as_str() {
        "bf16" | "bfloat16" | "bf16-mixed" | "bf16-true" => Some("bfloat16"),
        "fp16" | "float16" | "half" | "16" | "16-mixed" | "fp16-mixed" => Some("float16"),
        "fp32" | "float32" | "32" | "32-true" => Some("float32"),
        _ => None,
    }
}

/// Distributed communication backends worth recording.
pub fn normalize_backend(token: &str) -> Option<&'static str> {
    let t = token.trim().trim_matches(|c| c == '"' || c == '\'').to_ascii_lowercase();
    match t.as_str() {
        "nccl" => Some("nccl"),
        "gloo" => Some("gloo"),
        "mpi" => Some("mpi"),
        "hccl" => Some("hccl"),
        _ => None,
    }
}

/// What a configuration key, command-line flag or keyword argument carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeyRole {
    /// Value names a precision.
    Dtype,
    /// Boolean switch that enables the given precision.
    PrecisionSwitch(&'static str),
    Backend,
    ZeroStage,
    GradAccum,
    GpusPerNode,
}

/// Lowercases a key and folds `-` into `_`, dropping leading dashes.
pub fn normalize_key(key: &str) -> String {
    key.trim_start_matches('-').to_ascii_lowercase().replace('-', "_")
}

/// Role of a (normalized) key, flag or keyword-argument name.
pub fn key_role(normalized: &str) -> Option<KeyRole> {
    Some(match normalized {
        "bf16" | "bfloat16" => KeyRole::PrecisionSwitch("bfloat16"),
        "fp16" | "float16" => KeyRole::PrecisionSwitch("float16"),
        "dtype" | "torch_dtype" | "mixed_precision" | "precision" | "compute_dtype"
        | "param_dtype" | "model_dtype" | "bnb_4bit_compute_dtype" | "amp_dtype" => KeyRole::Dtype,
        "backend" | "dist_backend" | "ddp_backend" | "distributed_backend"
        | "communication_backend_name" => KeyRole::Backend,
        "zero_stage" | "zero_optimization_stage" => KeyRole::ZeroStage,
        "gradient_accumulation_steps" | "grad_accum_steps" | "gradient_accumulation"
        | "accumulate_grad_batches" | "grad_accumulation_steps" => KeyRole::GradAccum,
        "nproc_per_node" | "num_gpus" | "gpus_per_node" | "num_gpus_per_node"
        | "n_gpus_per_node" | "ngpus_per_node" => KeyRole::GpusPerNode,
        _ => return None,
    })
}

/// Interprets `value` under `role`, yielding the signal it implies.
///
/// `PrecisionSwitch` roles are handled by the caller, which knows how
/// booleans are spelled in its dialect.
pub fn interpret(role: KeyRole, value: &str) -> Option<(SignalKind, String)> {
    let v = value.trim().trim_matches(|c| c == '"' || c == '\'');
    match role {
        KeyRole::Dtype => normalize_dtype(v).map(|d| (SignalKind::DtypeConfig, d.to_string())),
        KeyRole::PrecisionSwitch(_) => None,
        KeyRole::Backend => normalize_backend(v).map(|b| (SignalKind::CommBackend, b.to_string())),
        KeyRole::ZeroStage => match v.parse::<u8>() {
            Ok(n) if n <= 3 => Some((SignalKind::ZeroStage, n.to_string())),
            _ => None,
        },
        // A single step is no accumulation at all.
        KeyRole::GradAccum => match v.parse::<u64>() {
            Ok(n) if n > 1 => Some((SignalKind::GradAccum, n.to_string())),
            _ => None,
        },
        KeyRole::GpusPerNode => match v.parse::<u32>() {
            Ok(n) if n >= 1 => Some((SignalKind::GpusPerNode, n.to_string())),
            _ => None,
        },
    }
}

/// Shell-style truthiness for switch values.
pub fn is_truthy(value: &str) -> bool {
    matches!(
        value.trim().trim_matches(|c| c == '"' || c == '\'').to_ascii_lowercase().as_str(),
        "true" | "1" | "yes" | "on"
    )
}

/// Classifies an environment variable assignment.
///
/// Returns the signals the assignment yields; any `NCCL_*` variable also
/// yields `CommBackend(nccl)` because only NCCL reads them.
pub fn classify_env(name: &str, value: &str) -> Vec<(SignalKind, String)> {
    let upper = name.to_ascii_uppercase();
    let mut out = Vec::new();
    let pair = || format!("{}={}", upper.to_ascii_lowercase(), value.trim().to_ascii_lowercase());

    let kind = match upper.as_str() {
        "NCCL_NET_GDR_LEVEL" | "NCCL_NET_GDR_READ" | "NCCL_P2P_DISABLE" | "NCCL_IB_CUDA_SUPPORT"
        | "NCCL_P2P_LEVEL" => Some(SignalKind::RdmaEnv),
        "NCCL_IB_DISABLE" | "NCCL_IB_HCA" | "NCCL_IB_GID_INDEX" => Some(SignalKind::IbEnv),
        "NCCL_IB_TIMEOUT" | "NCCL_IB_TC" | "NCCL_IB_SL" | "NCCL_IB_RETRY_CNT"
        | "NCCL_IB_QPS_PER_CONNECTION" => Some(SignalKind::IbTuningEnv),
        _ => None,
    };
    if let Some(kind) = kind {
        out.push((kind, pair()));
    }

    let role = match upper.as_str() {
        "GPUS_PER_NODE" | "NPROC_PER_NODE" | "NUM_GPUS_PER_NODE" | "NGPUS_PER_NODE"
        | "N_GPUS_PER_NODE" | "HOST_GPU_NUM" | "GPU_NUM_PER_NODE" => Some(KeyRole::GpusPerNode),
        "GRADIENT_ACCUMULATION_STEPS" | "GRAD_ACCUM_STEPS" | "ACCUMULATE_GRAD_BATCHES" => {
            Some(KeyRole::GradAccum)
        }
        "ZERO_STAGE" => Some(KeyRole::ZeroStage),
        "DIST_BACKEND" | "DISTRIBUTED_BACKEND" | "TORCH_DISTRIBUTED_BACKEND" => Some(KeyRole::Backend),
        "MIXED_PRECISION" | "DTYPE" | "TORCH_DTYPE" | "PRECISION" => Some(KeyRole::Dtype),
        _ => None,
    };
    if let Some(found) = role.and_then(|r| interpret(r, value)) {
        out.push(found);
    }

    if upper.starts_with("NCCL_") {
        out.push((SignalKind::CommBackend, "nccl".to_string()));
    }
    out
}

/// Name part of an `name=value` env signal value.
pub fn env_name(value: &str) -> &str {
    value.split_once('=').map_or(value, |(n, _)| n)
}

/// Value part of an `name=value` env signal value.
pub fn env_value(value: &str) -> &str {
    value.split_once('=').map_or("", |(_, v)| v)
}

/// Drops GPUDirect level signals from a file that also sets
/// `NCCL_P2P_DISABLE` to a truthy value: with peer-to-peer off the level
/// setting has no effect.
pub fn fold_p2p_disabled(signals: &mut Vec<Signal>) {
    let disabled = signals.iter().any(|s| {
        s.kind == SignalKind::RdmaEnv && env_name(&s.value) == "nccl_p2p_disable" && is_truthy(env_value(&s.value))
    });
    if disabled {
        signals.retain(|s| !(s.kind == SignalKind::RdmaEnv && env_name(&s.value) == "nccl_net_gdr_level"));
    }
}
