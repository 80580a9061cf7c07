//! Toolkit for hybrid fast/slow reasoning traces.
//!
//! A trace interleaves cheap "easy" reasoning units with reflective "hard"
//! units inside a single `<think>` block, followed by a final answer. The
//! crate provides:
//!
//! * [`trace`]: parsing, validation, and canonical rendering of the tagged
//!   trace format, plus per-mode token ratios.
//! * [`reward`]: the four-factor multiplicative reward (format, accuracy,
//!   unit semantics, mode control) and group-normalized advantages.
//! * [`entropy`]: Shannon entropy over token distributions, per-unit entropy
//!   windows, and the normalized-delta branch probability.
//! * [`rollout`]: entropy-guided branching rollouts over a pluggable
//!   generator oracle, with deterministic seeded forking.
//! * [`curator`]: turns plain chain-of-thought corpora into labeled,
//!   selectively compressed hybrid traces.
//! * [`metrics`]: pass@1 accuracy and the accuracy-efficiency score (AES)
//!   report over per-method benchmark results.
//!
//! Batch entry points are data-parallel when the `parallel` feature (on by
//! default) is enabled, and fall back to sequential iteration otherwise.
//! Results are identical either way.

pub mod curator;
pub mod entropy;
pub mod jsonl;
pub mod metrics;
pub mod oracle;
mod par;
pub mod reward;
pub mod rewriter;
pub mod rollout;
pub mod trace;

pub use curator::{curate_corpus, CurationReport, CuratorConfig, DatasetRecord, SourceRecord};
pub use entropy::{
    analyze_trace_entropy, branch_probability, normalized_entropy_delta, token_entropy,
    unit_entropy_stats, BranchConfig, EntropyError, TokenEvent, TraceEntropyReport,
    UnitEntropyStats,
};
pub use metrics::{
    aes, build_report, pass_at_1, token_reduction_pct, AesReport, MethodResult, MetricsError,
};
pub use oracle::{GeneratorOracle, HttpOracle, OracleError, ScriptedOracle};
pub use reward::{
    accuracy_reward, format_reward, group_advantages, mode_control_reward, total_reward,
    unit_semantic_reward, AnswerMatcher, GroupSample, KeywordLexicon, RewardBreakdown,
    RewardConfig, RewardError,
};
pub use rewriter::{HttpRewriter, MockRewriter, RewriterClient, RewriterError};
pub use rollout::{
    run_rollout, run_rollout_batch, select_best, BranchEvent, RolloutConfig, RolloutError,
    RolloutNode, RolloutTree,
};
pub use trace::{
    mode_token_ratios, parse_trace, render_trace, whitespace_token_count, HybridTrace,
    ParseReport, ReasoningMode, ReasoningUnit, TraceError, Violation, ViolationCode,
};
