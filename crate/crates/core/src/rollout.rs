//! Entropy-guided branching rollouts.
//!
//! A rollout grows a tree of completions over a [`GeneratorOracle`]. The
//! root generates linearly; whenever the decoded stream closes an easy unit
//! and opens a hard one, the engine compares the recent entropy against the
//! baseline `h0` (measured over the first `k` tokens of the first hard
//! unit), converts the rise into a branch probability, and with that
//! probability forks a sibling branch that re-enters generation at the
//! transition with the `<hard>` opening already in context. The transition
//! that defines `h0` never branches.
//!
//! Determinism: every node draws from its own counter-based rng stream
//! (`ChaCha8` seeded by the config seed, stream = node id), fork ids are
//! allocated in (parent id, event order), and nodes of a level generate
//! independently. The resulting tree is byte-identical across re-runs and
//! thread counts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::entropy::{branch_probability, normalized_entropy_delta, BranchConfig, TokenEvent};
use crate::oracle::GeneratorOracle;
use crate::par;
use crate::reward::{total_reward, GroupSample, RewardBreakdown, RewardConfig};
use crate::trace::{parse_trace, scan_tags, ParseReport, ReasoningMode, Tag};

/// Longest tag literal (`</think>`); bounds the rescan window for tags that
/// straddle token boundaries.
const MAX_TAG_LEN: usize = 8;

#[derive(Debug, Error)]
pub enum RolloutError {
    #[error("oracle failure at node {node_id}: {message}")]
    OracleFailure { node_id: usize, message: String },
    #[error("token budget must be positive")]
    BudgetZero,
    #[error("prompt is empty")]
    EmptyPrompt,
    #[error("invalid rollout config: {0}")]
    InvalidConfig(String),
    #[error("tree has no complete node")]
    NoCompleteNode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutConfig {
    pub branch: BranchConfig,
    /// Per-node token budget, counting the shared prefix.
    pub max_tokens: usize,
    /// Cap on total tree size, counting the root.
    pub max_branches: usize,
    /// When false the engine runs exactly one linear completion.
    pub edr_enabled: bool,
    pub seed: u64,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        Self {
            branch: BranchConfig::default(),
            max_tokens: 16384,
            max_branches: 4,
            edr_enabled: true,
            seed: 0,
        }
    }
}

impl RolloutConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_max_tokens(mut self, max_tokens: usize) -> Self {
        self.max_tokens = max_tokens;
        self
    }

    pub fn with_max_branches(mut self, max_branches: usize) -> Self {
        self.max_branches = max_branches;
        self
    }

    pub fn with_edr_enabled(mut self, edr_enabled: bool) -> Self {
        self.edr_enabled = edr_enabled;
        self
    }

    pub fn validate(&self) -> Result<(), RolloutError> {
        self.branch
            .validate()
            .map_err(|e| RolloutError::InvalidConfig(e.to_string()))?;
        if self.max_tokens == 0 {
            return Err(RolloutError::BudgetZero);
        }
        if self.max_branches == 0 {
            return Err(RolloutError::InvalidConfig(
                "max_branches must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// One branch of the tree. `tokens` holds the full sequence including the
/// prefix shared with the parent; `fork_offset` is the token count of that
/// prefix (0 for the root).
#[derive(Debug, Clone, Serialize)]
pub struct RolloutNode {
    pub node_id: usize,
    pub parent_id: Option<usize>,
    pub fork_offset: usize,
    pub tokens: Vec<TokenEvent>,
    /// True when generation ended at an oracle terminal rather than the
    /// token budget.
    pub complete: bool,
    pub trace: Option<ParseReport>,
}

impl RolloutNode {
    pub fn decoded_text(&self) -> String {
        self.tokens.iter().map(|t| t.token_text.as_str()).collect()
    }
}

/// One branch decision. `branched` records the Bernoulli draw; whether a
/// node was actually materialized additionally depends on `max_branches`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchEvent {
    pub node_id: usize,
    /// Token count at the transition; equals the fork offset of any child
    /// materialized from this event.
    pub token_offset: usize,
    pub delta_h: f64,
    pub sp: f64,
    pub branched: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RolloutTree {
    pub nodes: Vec<RolloutNode>,
    /// Baseline entropy measured at the first hard unit, when one appeared.
    pub h0: Option<f64>,
    pub branch_events: Vec<BranchEvent>,
}

#[derive(Debug, Clone)]
enum H0State {
    Unset,
    Collecting(Vec<f64>),
    Ready(f64),
}

/// Generation state carried by a branch; forked children clone it at the
/// transition point.
#[derive(Debug, Clone)]
struct GenState {
    tokens: Vec<TokenEvent>,
    texts: Vec<String>,
    decoded: String,
    tag_scan_pos: usize,
    in_unit: Option<ReasoningMode>,
    last_closed: Option<ReasoningMode>,
    hard_seen: bool,
    h0: H0State,
    first_h0: Option<f64>,
}

impl GenState {
    fn new() -> Self {
        Self {
            tokens: Vec::new(),
            texts: Vec::new(),
            decoded: String::new(),
            tag_scan_pos: 0,
            in_unit: None,
            last_closed: None,
            hard_seen: false,
            h0: H0State::Unset,
            first_h0: None,
        }
    }

    fn finalize_h0(&mut self, fallback: f64) {
        if let H0State::Collecting(values) = &self.h0 {
            let h0 = if values.is_empty() {
                fallback
            } else {
                values.iter().sum::<f64>() / values.len() as f64
            };
            self.h0 = H0State::Ready(h0);
            if self.first_h0.is_none() {
                self.first_h0 = Some(h0);
            }
        }
    }
}

struct NodeOutcome {
    state: GenState,
    complete: bool,
    forks: Vec<GenState>,
    fork_offsets: Vec<usize>,
    events: Vec<BranchEvent>,
}

fn mean_tail_entropy(tokens: &[TokenEvent], k: usize) -> f64 {
    let w = k.max(1).min(tokens.len());
    let tail = &tokens[tokens.len() - w..];
    tail.iter().map(|t| t.entropy_nats).sum::<f64>() / w as f64
}

/// Floors `pos` to a char boundary; tag offsets are ASCII but token text
/// in between may not be.
fn floor_boundary(text: &str, mut pos: usize) -> usize {
    while pos > 0 && !text.is_char_boundary(pos) {
        pos -= 1;
    }
    pos
}

fn generate_node<O: GeneratorOracle + ?Sized>(
    oracle: &O,
    prompt: &[String],
    config: &RolloutConfig,
    node_id: usize,
    mut state: GenState,
) -> Result<NodeOutcome, RolloutError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(node_id as u64);

    let mut forks = Vec::new();
    let mut fork_offsets = Vec::new();
    let mut events = Vec::new();
    let complete;

    loop {
        if oracle.is_terminal(prompt, &state.texts) {
            complete = true;
            break;
        }
        if state.tokens.len() >= config.max_tokens {
            complete = false;
            break;
        }
        let (token_text, probs) = oracle
            .step(prompt, &state.texts, &mut rng)
            .map_err(|e| RolloutError::OracleFailure {
                node_id,
                message: e.to_string(),
            })?;
        let event =
            TokenEvent::new(token_text, probs).map_err(|e| RolloutError::OracleFailure {
                node_id,
                message: e.to_string(),
            })?;
        let entropy = event.entropy_nats;
        state.texts.push(event.token_text.clone());
        state.decoded.push_str(&event.token_text);
        state.tokens.push(event);

        // Tags newly completed by this token (they may straddle tokens).
        let scan_from = state.tag_scan_pos;
        let found: Vec<(Tag, usize)> = scan_tags(&state.decoded[scan_from..])
            .into_iter()
            .map(|(tag, off)| (tag, scan_from + off))
            .collect();
        let structural = !found.is_empty();
        let mut last_end = scan_from;
        for (tag, offset) in &found {
            last_end = offset + tag.literal().len();
            match tag {
                Tag::ThinkOpen => {}
                Tag::EasyOpen => {
                    state.in_unit = Some(ReasoningMode::Easy);
                    state.last_closed = None;
                }
                Tag::EasyClose => {
                    state.in_unit = None;
                    state.last_closed = Some(ReasoningMode::Easy);
                }
                Tag::HardClose => {
                    state.in_unit = None;
                    state.last_closed = Some(ReasoningMode::Hard);
                    state.finalize_h0(entropy);
                }
                Tag::ThinkClose => {
                    state.in_unit = None;
                    state.finalize_h0(entropy);
                }
                Tag::HardOpen => {
                    let transition = state.last_closed == Some(ReasoningMode::Easy);
                    let first_hard = !state.hard_seen;
                    state.hard_seen = true;

                    let mut branched = false;
                    if config.edr_enabled && transition {
                        if let H0State::Ready(h0) = state.h0 {
                            let h_current = mean_tail_entropy(&state.tokens, config.branch.k);
                            let delta_h = normalized_entropy_delta(h_current, h0, &config.branch);
                            let sp = branch_probability(delta_h, &config.branch);
                            branched = rng.gen::<f64>() < sp;
                            events.push(BranchEvent {
                                node_id,
                                token_offset: state.tokens.len(),
                                delta_h,
                                sp,
                                branched,
                            });
                        }
                    }

                    state.in_unit = Some(ReasoningMode::Hard);
                    state.last_closed = None;
                    if first_hard {
                        if matches!(state.h0, H0State::Unset) {
                            state.h0 = H0State::Collecting(Vec::new());
                        }
                    } else if config.branch.refresh_h0 && matches!(state.h0, H0State::Ready(_)) {
                        state.h0 = H0State::Collecting(Vec::new());
                    }
                    if branched {
                        // The child must not rescan the tag that spawned it.
                        let mut child = state.clone();
                        child.tag_scan_pos = child.tag_scan_pos.max(last_end);
                        fork_offsets.push(state.tokens.len());
                        forks.push(child);
                    }
                }
            }
        }
        let window = floor_boundary(
            &state.decoded,
            state.decoded.len().saturating_sub(MAX_TAG_LEN - 1),
        );
        state.tag_scan_pos = state.tag_scan_pos.max(last_end).max(window);

        // Content tokens inside the first hard unit feed the h0 baseline.
        if !structural {
            if let (Some(ReasoningMode::Hard), H0State::Collecting(values)) =
                (state.in_unit, &mut state.h0)
            {
                values.push(entropy);
                if values.len() >= config.branch.k {
                    state.finalize_h0(entropy);
                }
            }
        }
    }

    Ok(NodeOutcome {
        state,
        complete,
        forks,
        fork_offsets,
        events,
    })
}

/// Runs one rollout tree to completion. Within a level, branches generate
/// in parallel (under the `parallel` feature); fork ids are allocated in
/// deterministic order after each level, capped by `max_branches`.
pub fn run_rollout<O: GeneratorOracle + Sync + ?Sized>(
    oracle: &O,
    prompt: &[String],
    config: &RolloutConfig,
) -> Result<RolloutTree, RolloutError> {
    config.validate()?;
    if prompt.is_empty() {
        return Err(RolloutError::EmptyPrompt);
    }

    let mut nodes: Vec<RolloutNode> = Vec::new();
    let mut branch_events: Vec<BranchEvent> = Vec::new();
    let mut h0: Option<f64> = None;
    let mut next_id = 1usize;
    let mut total = 1usize;
    let mut level: Vec<(usize, Option<usize>, usize, GenState)> =
        vec![(0, None, 0, GenState::new())];

    while !level.is_empty() {
        let results = par::map_vec(level, |(id, parent, fork_offset, state)| {
            let outcome = generate_node(oracle, prompt, config, id, state);
            (id, parent, fork_offset, outcome)
        });
        let mut next_level = Vec::new();
        for (id, parent, fork_offset, outcome) in results {
            let outcome = outcome?;
            if h0.is_none() {
                h0 = outcome.state.first_h0;
            }
            branch_events.extend(outcome.events);
            nodes.push(RolloutNode {
                node_id: id,
                parent_id: parent,
                fork_offset,
                trace: Some(parse_trace(&outcome.state.decoded)),
                tokens: outcome.state.tokens,
                complete: outcome.complete,
            });
            for (child_state, child_offset) in
                outcome.forks.into_iter().zip(outcome.fork_offsets)
            {
                if total >= config.max_branches {
                    break;
                }
                total += 1;
                next_level.push((next_id, Some(id), child_offset, child_state));
                next_id += 1;
            }
        }
        level = next_level;
    }

    nodes.sort_by_key(|n| n.node_id);
    Ok(RolloutTree {
        nodes,
        h0,
        branch_events,
    })
}

/// Runs many independently-seeded rollouts against one oracle, in parallel
/// under the `parallel` feature. Output order matches `configs`.
pub fn run_rollout_batch<O: GeneratorOracle + Sync + ?Sized>(
    oracle: &O,
    prompt: &[String],
    configs: &[RolloutConfig],
) -> Result<Vec<RolloutTree>, RolloutError> {
    let results = par::map_vec(configs.to_vec(), |config| {
        run_rollout(oracle, prompt, &config)
    });
    results.into_iter().collect()
}

fn score_complete_nodes(
    tree: &RolloutTree,
    gold_answer: &str,
    config: &RewardConfig,
) -> Vec<(usize, usize, RewardBreakdown)> {
    let complete: Vec<&RolloutNode> = tree.nodes.iter().filter(|n| n.complete).collect();
    if complete.is_empty() {
        return Vec::new();
    }
    let samples: Vec<GroupSample> = complete
        .iter()
        .map(|n| GroupSample::evaluate(&n.decoded_text(), gold_answer, config))
        .collect();
    (0..samples.len())
        .map(|i| {
            let breakdown = total_reward(&samples, i, config).expect("index in range");
            (complete[i].node_id, complete[i].tokens.len(), breakdown)
        })
        .collect()
}

/// Picks the complete node with the highest total reward, breaking ties by
/// fewer tokens and then lower node id. The tree is scored as one group, so
/// the mode-control factor sees all complete branches together.
pub fn select_best(
    tree: &RolloutTree,
    gold_answer: &str,
    config: &RewardConfig,
) -> Result<(usize, RewardBreakdown), RolloutError> {
    let scored = score_complete_nodes(tree, gold_answer, config);
    scored
        .into_iter()
        .max_by(|(id_a, len_a, a), (id_b, len_b, b)| {
            a.total
                .partial_cmp(&b.total)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(len_b.cmp(len_a))
                .then(id_b.cmp(id_a))
        })
        .map(|(id, _, breakdown)| (id, breakdown))
        .ok_or(RolloutError::NoCompleteNode)
}

/// Serializable view of a tree with decoded texts and optional rewards.
#[derive(Debug, Clone, Serialize)]
pub struct TreeDump {
    pub h0: Option<f64>,
    pub branch_events: Vec<BranchEvent>,
    pub nodes: Vec<NodeDump>,
    pub best: Option<BestPick>,
}

#[derive(Debug, Clone, Serialize)]
pub struct NodeDump {
    pub node_id: usize,
    pub parent_id: Option<usize>,
    pub fork_offset: usize,
    pub token_count: usize,
    pub complete: bool,
    pub parse_ok: bool,
    pub text: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reward: Option<RewardBreakdown>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BestPick {
    pub node_id: usize,
    pub reward: RewardBreakdown,
}

/// Renders a tree for JSON output. With a gold answer, complete nodes carry
/// their reward breakdown and the best pick is included.
pub fn dump_tree(tree: &RolloutTree, gold_answer: Option<&str>, config: &RewardConfig) -> TreeDump {
    let scored = gold_answer
        .map(|gold| score_complete_nodes(tree, gold, config))
        .unwrap_or_default();
    let reward_of = |id: usize| {
        scored
            .iter()
            .find(|(node_id, _, _)| *node_id == id)
            .map(|(_, _, b)| *b)
    };
    let best = gold_answer.and_then(|gold| {
        select_best(tree, gold, config)
            .ok()
            .map(|(node_id, reward)| BestPick { node_id, reward })
    });
    TreeDump {
        h0: tree.h0,
        branch_events: tree.branch_events.clone(),
        nodes: tree
            .nodes
            .iter()
            .map(|n| NodeDump {
                node_id: n.node_id,
                parent_id: n.parent_id,
                fork_offset: n.fork_offset,
                token_count: n.tokens.len(),
                complete: n.complete,
                parse_ok: n.trace.as_ref().map(|r| r.ok).unwrap_or(false),
                text: n.decoded_text(),
                reward: reward_of(n.node_id),
            })
            .collect(),
        best,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::ScriptedOracle;

    fn uniform(token: &str) -> (String, Vec<f64>) {
        (format!("{token} "), vec![0.5, 0.5])
    }

    fn onehot(token: &str) -> (String, Vec<f64>) {
        (format!("{token} "), vec![1.0])
    }

    fn prompt() -> Vec<String> {
        vec!["solve".to_string()]
    }

    /// think, one easy unit, answer: no hard unit at all.
    fn linear_script() -> ScriptedOracle {
        ScriptedOracle::from_pairs(vec![
            uniform("<think>"),
            uniform("<easy>"),
            uniform("a"),
            uniform("</easy>"),
            uniform("</think>"),
            ("42".to_string(), vec![0.5, 0.5]),
        ])
        .unwrap()
    }

    /// First hard unit has zero entropy (defines h0 = 0), so the second
    /// easy-to-hard transition sees a saturated delta and sp = 1.
    fn certain_branch_script() -> ScriptedOracle {
        ScriptedOracle::from_pairs(vec![
            uniform("<think>"),
            uniform("<easy>"),
            uniform("a"),
            uniform("</easy>"),
            uniform("<hard>"),
            onehot("Wait"),
            uniform("</hard>"),
            uniform("<easy>"),
            uniform("b"),
            uniform("</easy>"),
            uniform("<hard>"),
            uniform("Wait"),
            uniform("</hard>"),
            uniform("</think>"),
            ("42".to_string(), vec![0.5, 0.5]),
        ])
        .unwrap()
    }

    /// Constant entropy everywhere: every post-baseline transition has
    /// delta = 0 and sp = alpha.
    fn flat_script() -> ScriptedOracle {
        ScriptedOracle::from_pairs(vec![
            uniform("<think>"),
            uniform("<easy>"),
            uniform("a"),
            uniform("</easy>"),
            uniform("<hard>"),
            uniform("Wait"),
            uniform("</hard>"),
            uniform("<easy>"),
            uniform("b"),
            uniform("</easy>"),
            uniform("<hard>"),
            uniform("Wait"),
            uniform("</hard>"),
            uniform("</think>"),
            ("42".to_string(), vec![0.5, 0.5]),
        ])
        .unwrap()
    }

    fn config() -> RolloutConfig {
        RolloutConfig {
            branch: BranchConfig::default().with_k(2),
            max_tokens: 64,
            max_branches: 2,
            edr_enabled: true,
            seed: 11,
        }
    }

    #[test]
    fn linear_rollout_yields_single_complete_node() {
        let tree = run_rollout(&linear_script(), &prompt(), &config()).unwrap();
        assert_eq!(tree.nodes.len(), 1);
        assert!(tree.nodes[0].complete);
        assert!(tree.branch_events.is_empty());
        assert_eq!(tree.h0, None);
        assert!(tree.nodes[0].trace.as_ref().unwrap().ok);
    }

    #[test]
    fn saturated_delta_forces_a_branch() {
        let tree = run_rollout(&certain_branch_script(), &prompt(), &config()).unwrap();
        assert_eq!(tree.h0, Some(0.0));
        assert_eq!(tree.nodes.len(), 2);
        assert_eq!(tree.branch_events.len(), 1);

        let event = &tree.branch_events[0];
        assert_eq!(event.node_id, 0);
        assert_eq!(event.delta_h, 0.5);
        assert_eq!(event.sp, 1.0);
        assert!(event.branched);
        assert_eq!(event.token_offset, 11);

        let root = &tree.nodes[0];
        let child = &tree.nodes[1];
        assert_eq!(child.parent_id, Some(0));
        assert_eq!(child.fork_offset, 11);
        assert!(root.complete && child.complete);

        // Prefix sharing: identical bytes up to the fork, and a scripted
        // oracle replays the identical suffix as well.
        let prefix: String = root.tokens[..child.fork_offset]
            .iter()
            .map(|t| t.token_text.as_str())
            .collect();
        assert!(child.decoded_text().starts_with(&prefix));
        assert_eq!(child.decoded_text(), root.decoded_text());
        assert!(root.trace.as_ref().unwrap().ok);
    }

    #[test]
    fn flat_entropy_draws_at_alpha() {
        let mut hits = 0usize;
        let runs = 500usize;
        for seed in 0..runs {
            let cfg = config().with_seed(seed as u64).with_max_branches(1);
            let tree = run_rollout(&flat_script(), &prompt(), &cfg).unwrap();
            assert_eq!(tree.branch_events.len(), 1);
            let event = &tree.branch_events[0];
            assert_eq!(event.delta_h, 0.0);
            assert_eq!(event.sp, 0.5);
            if event.branched {
                hits += 1;
            }
        }
        let rate = hits as f64 / runs as f64;
        assert!((0.40..=0.60).contains(&rate), "rate {rate}");
    }

    #[test]
    fn disabling_branching_runs_one_linear_completion() {
        let cfg = config().with_edr_enabled(false);
        let tree = run_rollout(&certain_branch_script(), &prompt(), &cfg).unwrap();
        assert_eq!(tree.nodes.len(), 1);
        assert!(tree.branch_events.is_empty());
    }

    #[test]
    fn refreshing_h0_tracks_the_latest_hard_unit() {
        let script = ScriptedOracle::from_pairs(vec![
            uniform("<think>"),
            uniform("<easy>"),
            uniform("a"),
            uniform("</easy>"),
            uniform("<hard>"),
            onehot("Wait"),
            uniform("</hard>"),
            uniform("<easy>"),
            uniform("b"),
            uniform("</easy>"),
            uniform("<hard>"),
            uniform("Wait"),
            uniform("</hard>"),
            uniform("<easy>"),
            uniform("c"),
            uniform("</easy>"),
            uniform("<hard>"),
            uniform("Wait"),
            uniform("</hard>"),
            uniform("</think>"),
            ("42".to_string(), vec![0.5, 0.5]),
        ])
        .unwrap();

        let mut cfg = config().with_max_branches(1);
        let tree = run_rollout(&script, &prompt(), &cfg).unwrap();
        assert_eq!(tree.branch_events.len(), 2);
        assert_eq!(tree.branch_events[0].sp, 1.0);
        // Without refresh, h0 stays at 0 and the third transition saturates.
        assert_eq!(tree.branch_events[1].sp, 1.0);

        cfg.branch.refresh_h0 = true;
        let tree = run_rollout(&script, &prompt(), &cfg).unwrap();
        assert_eq!(tree.branch_events[0].sp, 1.0);
        // With refresh, h0 was re-measured in the flat second hard unit, so
        // the third transition sees no rise.
        assert_eq!(tree.branch_events[1].delta_h, 0.0);
        assert_eq!(tree.branch_events[1].sp, 0.5);
        assert_eq!(tree.h0, Some(0.0));
    }

    #[test]
    fn budget_truncates_and_marks_incomplete() {
        let cfg = config().with_max_tokens(3);
        let tree = run_rollout(&linear_script(), &prompt(), &cfg).unwrap();
        assert_eq!(tree.nodes[0].tokens.len(), 3);
        assert!(!tree.nodes[0].complete);
        assert!(!tree.nodes[0].trace.as_ref().unwrap().ok);

        assert!(matches!(
            run_rollout(&linear_script(), &prompt(), &config().with_max_tokens(0)),
            Err(RolloutError::BudgetZero)
        ));
        assert!(matches!(
            run_rollout(&linear_script(), &[], &config()),
            Err(RolloutError::EmptyPrompt)
        ));
    }

    #[test]
    fn rollout_is_deterministic_for_a_fixed_seed() {
        let cfg = config();
        let a = run_rollout(&certain_branch_script(), &prompt(), &cfg).unwrap();
        let b = run_rollout(&certain_branch_script(), &prompt(), &cfg).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn batch_matches_individual_runs() {
        let configs: Vec<RolloutConfig> = (0..8).map(|s| config().with_seed(s)).collect();
        let batch = run_rollout_batch(&flat_script(), &prompt(), &configs).unwrap();
        for (cfg, tree) in configs.iter().zip(&batch) {
            let single = run_rollout(&flat_script(), &prompt(), cfg).unwrap();
            assert_eq!(
                serde_json::to_string(tree).unwrap(),
                serde_json::to_string(&single).unwrap()
            );
        }
    }

    fn tok(text: &str) -> TokenEvent {
        TokenEvent {
            token_text: text.to_string(),
            probs: vec![1.0],
            entropy_nats: 0.0,
        }
    }

    fn hand_node(node_id: usize, text_chunks: &[&str], complete: bool) -> RolloutNode {
        let tokens: Vec<TokenEvent> = text_chunks.iter().map(|c| tok(c)).collect();
        let decoded: String = text_chunks.concat();
        RolloutNode {
            node_id,
            parent_id: None,
            fork_offset: 0,
            tokens,
            complete,
            trace: Some(parse_trace(&decoded)),
        }
    }

    #[test]
    fn select_best_prefers_reward_then_brevity_then_id() {
        let good = ["<think> <easy> a b c </easy> ", "</think> 4"];
        let good_short = ["<think> <easy> a </easy> </think> 4"];
        let wrong = ["<think> <easy> a </easy> </think> 5"];
        let config = RewardConfig::default();

        // Higher reward wins regardless of size.
        let tree = RolloutTree {
            nodes: vec![
                hand_node(0, &wrong, true),
                hand_node(1, &good, true),
            ],
            h0: None,
            branch_events: vec![],
        };
        let (best, breakdown) = select_best(&tree, "4", &config).unwrap();
        assert_eq!(best, 1);
        assert!(breakdown.total > 0.0);

        // Equal rewards: fewer tokens wins.
        let tree = RolloutTree {
            nodes: vec![hand_node(0, &good, true), hand_node(1, &good_short, true)],
            h0: None,
            branch_events: vec![],
        };
        assert_eq!(select_best(&tree, "4", &config).unwrap().0, 1);

        // Fully tied: lower node id wins.
        let tree = RolloutTree {
            nodes: vec![hand_node(0, &good, true), hand_node(1, &good, true)],
            h0: None,
            branch_events: vec![],
        };
        assert_eq!(select_best(&tree, "4", &config).unwrap().0, 0);

        // Incomplete nodes never win; none complete is an error.
        let tree = RolloutTree {
            nodes: vec![hand_node(0, &good, false)],
            h0: None,
            branch_events: vec![],
        };
        assert!(matches!(
            select_best(&tree, "4", &config),
            Err(RolloutError::NoCompleteNode)
        ));
    }

    #[test]
    fn dump_carries_rewards_and_best_pick() {
        let tree = run_rollout(&certain_branch_script(), &prompt(), &config()).unwrap();
        let dump = dump_tree(&tree, Some("42"), &RewardConfig::default());
        assert_eq!(dump.nodes.len(), 2);
        assert!(dump.nodes.iter().all(|n| n.reward.is_some()));
        assert!(dump.best.is_some());
        assert_eq!(dump.branch_events.len(), 1);

        let bare = dump_tree(&tree, None, &RewardConfig::default());
        assert!(bare.nodes.iter().all(|n| n.reward.is_none()));
        assert!(bare.best.is_none());
    }
}
