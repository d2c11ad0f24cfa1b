use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{BenchmarkSpec, Capability};

/// Capability → ordered member benchmarks. Each benchmark belongs to exactly
/// one capability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CapabilityTaxonomy {
    members: BTreeMap<Capability, Vec<String>>,
}

impl Default for CapabilityTaxonomy {
    /// The twelve-benchmark grouping used by the reference leaderboard.
    fn default() -> Self {
        let groups: [(Capability, &[&str]); 6] = [
            (Capability::Faithfulness, &["L_CiteEval"]),
            (Capability::General, &["LEval", "RULER", "LongBench"]),
            (
                Capability::Reasoning,
                &["BABILong", "Counting-Stars", "LVEval", "LongBench_v2"],
            ),
            (Capability::Retrieval, &["NIAH", "InfiniteBench"]),
            (Capability::Generation, &["LongWriter"]),
            (Capability::Specialization, &["LIBRA"]),
        ];
        Self {
            members: groups
                .into_iter()
                .map(|(c, ids)| (c, ids.iter().map(|s| s.to_string()).collect()))
                .collect(),
        }
    }
}

impl CapabilityTaxonomy {
    /// Builds a taxonomy, rejecting benchmarks listed under more than one
    /// capability and unknown capabilities.
    pub fn new(members: BTreeMap<Capability, Vec<String>>) -> Result<Self, String> {
        let mut seen = BTreeSet::new();
        for (cap, ids) in &members {
            if !cap.is_known() {
                return Err(format!("unknown capability '{cap}'"));
            }
            for id in ids {
                if !seen.insert(id.as_str()) {
                    return Err(format!("benchmark '{id}' appears in more than one capability"));
                }
            }
        }
        let members = members.into_iter().filter(|(_, v)| !v.is_empty()).collect();
        Ok(Self { members })
    }

    /// Groups the given specs by their declared capability, preserving order.
    pub fn from_specs<'a>(specs: impl IntoIterator<Item = &'a BenchmarkSpec>) -> Result<Self, String> {
        let mut members: BTreeMap<Capability, Vec<String>> = BTreeMap::new();
        for s in specs {
            members.entry(s.capability.clone()).or_default().push(s.id.clone());
        }
        Self::new(members)
    }

    pub fn capabilities(&self) -> impl Iterator<Item = (&Capability, &[String])> {
        self.members.iter().map(|(c, v)| (c, v.as_slice()))
    }

    pub fn members(&self, cap: &Capability) -> &[String] {
        self.members.get(cap).map(Vec::as_slice).unwrap_or(&[])
    }

    /// All member benchmarks in capability order, then member order.
    pub fn benchmark_order(&self) -> Vec<&str> {
        self.members.values().flatten().map(String::as_str).collect()
    }

    pub fn capability_of(&self, benchmark_id: &str) -> Option<&Capability> {
        self.members
            .iter()
            .find(|(_, ids)| ids.iter().any(|i| i == benchmark_id))
            .map(|(c, _)| c)
    }

    pub fn len(&self) -> usize {
        self.members.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
