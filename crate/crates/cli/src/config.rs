//! Run configuration: the embedded defaults, optionally overridden by a
//! user TOML file, then by command-line flags. Unknown keys are rejected so
//! typos fail loudly instead of silently keeping a default.

use std::path::Path;

use duotrace::rollout::RolloutConfig;
use duotrace::{BranchConfig, CuratorConfig, KeywordLexicon, RewardConfig};
use serde::{Deserialize, Serialize};

/// Bundled defaults, kept in sync with the library defaults by a test.
pub const DEFAULT_CONFIG: &str = include_str!("../config/default.toml");

/// Token-budget profile selected with `--stage`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Stage {
    /// 8192-token budget; requires branching disabled.
    #[value(name = "8k")]
    Short,
    /// 16384-token budget.
    #[value(name = "16k")]
    Long,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub reward: RewardSection,
    pub branch: BranchSection,
    pub rollout: RolloutSection,
    pub curator: CuratorSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardSection {
    pub beta: f64,
    pub keywords: Vec<String>,
}

impl Default for RewardSection {
    fn default() -> Self {
        let defaults = RewardConfig::default();
        Self {
            beta: defaults.beta,
            keywords: defaults.lexicon.keywords,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BranchSection {
    pub alpha: f64,
    pub k: usize,
    pub delta_cap: f64,
    pub refresh_h0: bool,
}

impl Default for BranchSection {
    fn default() -> Self {
        let defaults = BranchConfig::default();
        Self {
            alpha: defaults.alpha,
            k: defaults.k,
            delta_cap: defaults.delta_cap,
            refresh_h0: defaults.refresh_h0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RolloutSection {
    pub max_tokens: usize,
    pub max_branches: usize,
    pub edr_enabled: bool,
}

impl Default for RolloutSection {
    fn default() -> Self {
        let defaults = RolloutConfig::default();
        Self {
            max_tokens: defaults.max_tokens,
            max_branches: defaults.max_branches,
            edr_enabled: defaults.edr_enabled,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CuratorSection {
    /// Fixed entropy threshold for hard labeling; omit to derive one per
    /// corpus from the percentile below.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entropy_threshold: Option<f64>,
    pub auto_threshold_percentile: f64,
    pub filter_by_answer: bool,
}

impl Default for CuratorSection {
    fn default() -> Self {
        let defaults = CuratorConfig::default();
        Self {
            entropy_threshold: defaults.entropy_threshold,
            auto_threshold_percentile: defaults.auto_threshold_percentile,
            filter_by_answer: defaults.filter_by_answer,
        }
    }
}

impl RunConfig {
    /// Defaults, or the user file parsed over them when a path is given.
    pub fn load(path: Option<&Path>) -> Result<Self, String> {
        match path {
            None => toml::from_str(DEFAULT_CONFIG).map_err(|e| format!("embedded defaults: {e}")),
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
                toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
            }
        }
    }

    /// Applies the token-budget profile. The short stage runs plain linear
    /// decoding, so it refuses a config that still enables branching.
    pub fn apply_stage(&mut self, stage: Stage) -> Result<(), String> {
        match stage {
            Stage::Short => {
                if self.rollout.edr_enabled {
                    return Err(
                        "the 8k stage runs without entropy-guided branching; \
                         set rollout.edr_enabled = false or use --stage 16k"
                            .into(),
                    );
                }
                self.rollout.max_tokens = 8192;
            }
            Stage::Long => self.rollout.max_tokens = 16384,
        }
        Ok(())
    }

    pub fn lexicon(&self) -> KeywordLexicon {
        KeywordLexicon::new(self.reward.keywords.clone())
    }

    pub fn reward_config(&self) -> Result<RewardConfig, String> {
        let config = RewardConfig::default()
            .with_beta(self.reward.beta)
            .with_lexicon(self.lexicon());
        config.validate().map_err(|e| e.to_string())?;
        Ok(config)
    }

    pub fn branch_config(&self) -> Result<BranchConfig, String> {
        let config = BranchConfig {
            alpha: self.branch.alpha,
            k: self.branch.k,
            delta_cap: self.branch.delta_cap,
            refresh_h0: self.branch.refresh_h0,
        };
        config.validate().map_err(|e| e.to_string())?;
        Ok(config)
    }

    pub fn rollout_config(&self, seed: u64) -> Result<RolloutConfig, String> {
        let config = RolloutConfig {
            branch: self.branch_config()?,
            max_tokens: self.rollout.max_tokens,
            max_branches: self.rollout.max_branches,
            edr_enabled: self.rollout.edr_enabled,
            seed,
        };
        config.validate().map_err(|e| e.to_string())?;
        Ok(config)
    }

    pub fn curator_config(&self) -> Result<CuratorConfig, String> {
        let mut config = CuratorConfig::default().with_lexicon(self.lexicon());
        config.entropy_threshold = self.curator.entropy_threshold;
        config.auto_threshold_percentile = self.curator.auto_threshold_percentile;
        config.filter_by_answer = self.curator.filter_by_answer;
        config.validate().map_err(|e| e.to_string())?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}
