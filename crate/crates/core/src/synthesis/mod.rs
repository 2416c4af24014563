//! Scripted priors: an exploratory corpus, its clustering, and policies that
//! turn clusters into priors of varying quality.

mod cluster;
mod corpus;
mod policy;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use cluster::{adjusted_rand_index, cluster_corpus, ward_labels, Cluster, ClusterCorpus};
pub use corpus::{generate_corpus, load_or_generate, Corpus, CorpusEntry, CorpusOptions};
pub use policy::{draw_prior, scripted_source, Draw, PolicyPlan, PolicySource};

/// How informative a scripted prior is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Expert,
    Advanced,
    Local,
    Adversarial,
}

impl Policy {
    pub const ALL: [Policy; 4] = [Policy::Expert, Policy::Advanced, Policy::Local, Policy::Adversarial];

    pub fn name(self) -> &'static str {
        match self {
            Policy::Expert => "expert",
            Policy::Advanced => "advanced",
            Policy::Local => "local",
            Policy::Adversarial => "adversarial",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Policy::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown policy `{s}`"))
    }
}
