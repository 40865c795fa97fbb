//! Training-environment classification from network configuration.

use serde::{Deserialize, Serialize};

use crate::extract::catalog::{env_name, env_value, is_truthy};
use crate::kb::Tri;
use crate::signal::{Signal, SignalKind, SignalRef, SignalSet, Tier};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvironmentAssessment {
    pub datacenter_class: Tri,
    pub multi_node: Tri,
    pub on_prem_likely: Tri,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gpus_per_node: Option<u32>,
    pub rationale: Vec<SignalRef>,
}

impl EnvironmentAssessment {
    /// Nothing known.
    pub fn unassessed() -> Self {
        Self {
            datacenter_class: Tri::Undocumented,
            multi_node: Tri::Undocumented,
            on_prem_likely: Tri::Undocumented,
            gpus_per_node: None,
            rationale: Vec::new(),
        }
    }
}

/// True when the assignment switches the feature off rather than on.
fn is_disabling(signal: &Signal) -> bool {
    let name = env_name(&signal.value);
    let value = env_value(&signal.value);
    match name {
        "nccl_ib_disable" | "nccl_p2p_disable" => is_truthy(value),
        "nccl_ib_cuda_support" => !is_truthy(value),
        "nccl_net_gdr_level" => matches!(value, "0" | "loc"),
        _ => false,
    }
}

fn gdr_reaches_network(signal: &Signal) -> bool {
    if env_name(&signal.value) != "nccl_net_gdr_level" {
        return false;
    }
    let value = env_value(&signal.value);
    match value.parse::<u32>() {
        Ok(n) => n >= 2,
        Err(_) => matches!(value, "pxb" | "phb" | "sys"),
    }
}

fn strong(signal: &&Signal) -> bool {
    signal.tier >= Tier::Config
}

/// Classifies the environment from `RdmaEnv`, `IbEnv`, `IbTuningEnv` and
/// `GpusPerNode` signals. Every `Yes` cites its evidence in `rationale`;
/// with no such evidence every field is `Undocumented`.
pub fn classify_environment(signals: &SignalSet) -> EnvironmentAssessment {
    let mut out = EnvironmentAssessment::unassessed();
    let cite = |s: &Signal, out: &mut EnvironmentAssessment| {
        let r = s.reference();
        if !out.rationale.contains(&r) {
            out.rationale.push(r);
        }
    };

    let enabling: Vec<&Signal> = signals
        .iter()
        .filter(strong)
        .filter(|s| matches!(s.kind, SignalKind::RdmaEnv | SignalKind::IbEnv) && !is_disabling(s))
        .collect();
    if !enabling.is_empty() {
        out.datacenter_class = Tri::Yes;
        for s in &enabling {
            cite(s, &mut out);
        }
    }

    let ib: Vec<&Signal> = enabling.iter().copied().filter(|s| s.kind == SignalKind::IbEnv).collect();
    let fabric: Vec<&Signal> = enabling
        .iter()
        .copied()
        .filter(|s| env_name(&s.value) == "nccl_ib_hca" || gdr_reaches_network(s))
        .collect();
    if !ib.is_empty() && !fabric.is_empty() {
        out.multi_node = Tri::Yes;
    }

    let tuning: Vec<&Signal> = signals
        .iter()
        .filter(strong)
        .filter(|s| s.kind == SignalKind::IbTuningEnv)
        .collect();
    if !tuning.is_empty() {
        out.on_prem_likely = Tri::Yes;
        for s in tuning {
            cite(s, &mut out);
        }
    }

    let per_node = signals
        .of_kind(SignalKind::GpusPerNode)
        .filter(strong)
        .filter_map(|s| s.value.parse::<u32>().ok().map(|n| (s, n)))
        .max_by(|(a, n), (b, m)| a.tier.cmp(&b.tier).then(n.cmp(m)));
    if let Some((s, n)) = per_node {
        out.gpus_per_node = Some(n);
        cite(s, &mut out);
    }
    out.rationale.sort();
    out
}
