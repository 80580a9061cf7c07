//! Four-factor multiplicative reward over hybrid traces.
//!
//! `total = r_format * r_accuracy * r_unit * r_mode` where the first three
//! factors are hard 0/1 gates (well-formed, answer correct, every unit
//! semantically consistent with its mode) and the mode-control factor blends
//! a floor `beta` with a difficulty-aware preference: groups that mostly
//! solve the problem are nudged toward easy reasoning, groups that mostly
//! fail are nudged toward hard reasoning. The total is therefore either 0 or
//! in `[beta, 1]`.
//!
//! Advantages are group-normalized with the population standard deviation,
//! matching the usual group-relative policy-optimization setup.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par;
use crate::trace::{
    mode_token_ratios, parse_trace, whitespace_token_count, HybridTrace, ParseReport,
    ReasoningMode,
};

/// Degenerate-group cutoff for advantage whitening.
const STD_EPSILON: f64 = 1e-8;
/// Relative tolerance for numeric answer equality.
const NUMERIC_REL_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum RewardError {
    #[error("empty sample group")]
    EmptyGroup,
    #[error("group of {0} samples is too small for advantages (need at least 2)")]
    GroupTooSmall(usize),
    #[error("sample index {index} out of range for group of {len}")]
    SampleIndexOutOfRange { index: usize, len: usize },
    #[error("invalid reward config: {0}")]
    InvalidConfig(String),
}

/// Reflection-marker vocabulary and its matching policy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordLexicon {
    pub keywords: Vec<String>,
    /// Match whole words (split on non-alphanumeric) rather than substrings.
    pub whole_word: bool,
    pub case_sensitive: bool,
}

impl Default for KeywordLexicon {
    fn default() -> Self {
        Self {
            keywords: vec!["Wait".into(), "However".into(), "Alternatively".into()],
            whole_word: true,
            case_sensitive: true,
        }
    }
}

impl KeywordLexicon {
    pub fn new<I: IntoIterator<Item = S>, S: Into<String>>(keywords: I) -> Self {
        Self {
            keywords: keywords.into_iter().map(Into::into).collect(),
            ..Self::default()
        }
    }

    fn word_matches(&self, word: &str, keyword: &str) -> bool {
        if self.case_sensitive {
            word == keyword
        } else {
            word.eq_ignore_ascii_case(keyword)
        }
    }

    /// True when `word` equals one of the keywords under the case policy.
    pub fn matches_word(&self, word: &str) -> bool {
        self.keywords.iter().any(|k| self.word_matches(word, k))
    }

    /// True when `text` contains at least one keyword under both policies.
    pub fn contains_keyword(&self, text: &str) -> bool {
        if self.whole_word {
            text.split(|c: char| !c.is_alphanumeric())
                .filter(|w| !w.is_empty())
                .any(|w| self.matches_word(w))
        } else if self.case_sensitive {
            self.keywords.iter().any(|k| text.contains(k.as_str()))
        } else {
            let lower = text.to_lowercase();
            self.keywords
                .iter()
                .any(|k| lower.contains(&k.to_lowercase()))
        }
    }
}

/// Policy for deciding answer equivalence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnswerMatcher {
    /// Normalized string equality with a numeric fallback: integers,
    /// decimals, and `a/b` fractions compare at 1e-9 relative tolerance.
    ExactNumeric,
    /// Normalized string equality only.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    /// Mode-control floor; total reward for a valid trace never drops below it.
    pub beta: f64,
    pub lexicon: KeywordLexicon,
    pub matcher: AnswerMatcher,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            beta: 0.7,
            lexicon: KeywordLexicon::default(),
            matcher: AnswerMatcher::ExactNumeric,
        }
    }
}

impl RewardConfig {
    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_lexicon(mut self, lexicon: KeywordLexicon) -> Self {
        self.lexicon = lexicon;
        self
    }

    pub fn validate(&self) -> Result<(), RewardError> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(RewardError::InvalidConfig(format!(
                "beta must lie in [0, 1], got {}",
                self.beta
            )));
        }
        if self.lexicon.keywords.is_empty() {
            return Err(RewardError::InvalidConfig("empty keyword lexicon".into()));
        }
        Ok(())
    }
}

/// One rollout inside a scoring group. When the trace fails to parse,
/// `correct` is false and both mode ratios are zero.
#[derive(Debug, Clone, Serialize)]
pub struct GroupSample {
    pub trace_text: String,
    pub gold_answer: String,
    pub parse: ParseReport,
    pub correct: bool,
    pub p_easy: f64,
    pub p_hard: f64,
}

impl GroupSample {
    pub fn evaluate(trace_text: &str, gold_answer: &str, config: &RewardConfig) -> Self {
        Self::evaluate_with_counter(trace_text, gold_answer, config, whitespace_token_count)
    }

    pub fn evaluate_with_counter<F>(
        trace_text: &str,
        gold_answer: &str,
        config: &RewardConfig,
        token_counter: F,
    ) -> Self
    where
        F: Fn(&str) -> usize,
    {
        let parse = parse_trace(trace_text);
        let (correct, p_easy, p_hard) = match &parse.trace {
            Some(trace) => {
                let correct = accuracy_reward(&trace.answer, gold_answer, config.matcher) == 1.0;
                let (pe, ph) = mode_token_ratios(trace, token_counter);
                (correct, pe, ph)
            }
            None => (false, 0.0, 0.0),
        };
        Self {
            trace_text: trace_text.to_string(),
            gold_answer: gold_answer.to_string(),
            parse,
            correct,
            p_easy,
            p_hard,
        }
    }
}

/// All four factors plus their product.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_format: f64,
    pub r_accuracy: f64,
    pub r_unit: f64,
    pub r_mode: f64,
    pub total: f64,
}

/// 1 when the trace parses cleanly, else 0.
pub fn format_reward(parse: &ParseReport) -> f64 {
    if parse.ok {
        1.0
    } else {
        0.0
    }
}

fn find_last_boxed(s: &str) -> Option<&str> {
    const MARKER: &str = "\\boxed{";
    let start = s.rfind(MARKER)?;
    let inner_start = start + MARKER.len();
    let mut depth = 1usize;
    for (i, c) in s[inner_start..].char_indices() {
        match c {
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&s[inner_start..inner_start + i]);
                }
            }
            _ => {}
        }
    }
    None
}

/// Strips a `\boxed{...}` wrapper (the last one, if several), trims, and
/// collapses whitespace runs to single spaces.
pub fn normalize_answer(s: &str) -> String {
    let core = find_last_boxed(s).unwrap_or(s);
    core.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn parse_decimal(s: &str) -> Option<f64> {
    let t = s.trim();
    let t = t.strip_prefix('+').unwrap_or(t);
    if t.is_empty() || !t.chars().all(|c| "0123456789+-.eE".contains(c)) {
        return None;
    }
    let v: f64 = t.parse().ok()?;
    v.is_finite().then_some(v)
}

fn parse_numeric(s: &str) -> Option<f64> {
    if let Some((num, den)) = s.split_once('/') {
        let n = parse_decimal(num)?;
        let d = parse_decimal(den)?;
        if d == 0.0 {
            return None;
        }
        return Some(n / d);
    }
    parse_decimal(s)
}

/// 1 when predicted and gold answers are equivalent under `matcher`, else 0.
pub fn accuracy_reward(predicted: &str, gold: &str, matcher: AnswerMatcher) -> f64 {
    let p = normalize_answer(predicted);
    let g = normalize_answer(gold);
    if p == g {
        return 1.0;
    }
    if matcher == AnswerMatcher::ExactNumeric {
        if let (Some(a), Some(b)) = (parse_numeric(&p), parse_numeric(&g)) {
            let tol = NUMERIC_REL_TOL * a.abs().max(b.abs()).max(1.0);
            if (a - b).abs() <= tol {
                return 1.0;
            }
        }
    }
    0.0
}

/// 1 when every unit is semantically consistent with its mode: easy units
/// contain no lexicon keyword, hard units contain at least one. Else 0.
pub fn unit_semantic_reward(trace: &HybridTrace, lexicon: &KeywordLexicon) -> f64 {
    let consistent = trace.units.iter().all(|u| {
        let has = lexicon.contains_keyword(&u.text);
        match u.mode {
            ReasoningMode::Easy => !has,
            ReasoningMode::Hard => has,
        }
    });
    if consistent {
        1.0
    } else {
        0.0
    }
}

/// Difficulty-aware mode preference for one sample:
/// `beta + (1 - beta) * (d * p_easy + (1 - d) * p_hard)` with
/// `d = n_correct / n` over the whole group. Always lies in `[beta, 1]`.
pub fn mode_control_reward(
    group: &[GroupSample],
    sample_index: usize,
    config: &RewardConfig,
) -> Result<f64, RewardError> {
    if group.is_empty() {
        return Err(RewardError::EmptyGroup);
    }
    if sample_index >= group.len() {
        return Err(RewardError::SampleIndexOutOfRange {
            index: sample_index,
            len: group.len(),
        });
    }
    let n_pass = group.iter().filter(|s| s.correct).count();
    let d = n_pass as f64 / group.len() as f64;
    let sample = &group[sample_index];
    Ok(config.beta + (1.0 - config.beta) * (d * sample.p_easy + (1.0 - d) * sample.p_hard))
}

/// Combines all four factors for one sample of a group.
pub fn total_reward(
    group: &[GroupSample],
    sample_index: usize,
    config: &RewardConfig,
) -> Result<RewardBreakdown, RewardError> {
    let r_mode = mode_control_reward(group, sample_index, config)?;
    let sample = &group[sample_index];
    let r_format = format_reward(&sample.parse);
    let r_accuracy = if sample.correct { 1.0 } else { 0.0 };
    let r_unit = sample
        .parse
        .trace
        .as_ref()
        .map(|t| unit_semantic_reward(t, &config.lexicon))
        .unwrap_or(0.0);
    let total = r_format * r_accuracy * r_unit * r_mode;
    Ok(RewardBreakdown {
        r_format,
        r_accuracy,
        r_unit,
        r_mode,
        total,
    })
}

/// Whitens rewards within a group using the population standard deviation.
/// A group with (near-)zero spread yields all-zero advantages rather than
/// amplified noise.
pub fn group_advantages(rewards: &[f64]) -> Result<Vec<f64>, RewardError> {
    if rewards.len() < 2 {
        return Err(RewardError::GroupTooSmall(rewards.len()));
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if std < STD_EPSILON {
        return Ok(vec![0.0; rewards.len()]);
    }
    Ok(rewards.iter().map(|r| (r - mean) / std).collect())
}

/// One line of batch scoring input.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub trace_text: String,
    pub gold_answer: String,
    pub group_id: serde_json::Value,
}

/// One line of batch scoring output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub group_id: serde_json::Value,
    pub index: usize,
    pub r_format: f64,
    pub r_accuracy: f64,
    pub r_unit: f64,
    pub r_mode: f64,
    pub total: f64,
    pub advantage: f64,
}

fn group_key(value: &serde_json::Value) -> String {
    match value {
        serde_json::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Scores a batch of requests grouped by `group_id` (groups keep their
/// first-appearance order, samples their input order). Groups are scored in
/// parallel under the `parallel` feature. A singleton group cannot be
/// whitened, so its advantage is reported as 0.
pub fn score_groups(requests: &[ScoreRequest], config: &RewardConfig) -> Vec<ScoreRecord> {
    let mut order: Vec<(serde_json::Value, Vec<usize>)> = Vec::new();
    let mut slots: std::collections::HashMap<String, usize> = std::collections::HashMap::new();
    for (i, req) in requests.iter().enumerate() {
        let key = group_key(&req.group_id);
        let slot = *slots.entry(key).or_insert_with(|| {
            order.push((req.group_id.clone(), Vec::new()));
            order.len() - 1
        });
        order[slot].1.push(i);
    }

    let groups = par::map_vec(order, |(group_id, members)| {
        let samples: Vec<GroupSample> = members
            .iter()
            .map(|&i| GroupSample::evaluate(&requests[i].trace_text, &requests[i].gold_answer, config))
            .collect();
        let breakdowns: Vec<RewardBreakdown> = (0..samples.len())
            .map(|i| total_reward(&samples, i, config).expect("index in range"))
            .collect();
        let totals: Vec<f64> = breakdowns.iter().map(|b| b.total).collect();
        let advantages = if totals.len() < 2 {
            vec![0.0; totals.len()]
        } else {
            group_advantages(&totals).expect("len checked")
        };
        breakdowns
            .into_iter()
            .zip(advantages)
            .enumerate()
            .map(|(index, (b, advantage))| ScoreRecord {
                group_id: group_id.clone(),
                index,
                r_format: b.r_format,
                r_accuracy: b.r_accuracy,
                r_unit: b.r_unit,
                r_mode: b.r_mode,
                total: b.total,
                advantage,
            })
            .collect::<Vec<_>>()
    });
    groups.into_iter().flatten().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::BigRational;
    use proptest::prelude::*;
    use std::str::FromStr;

    fn sample(correct: bool, p_easy: f64, p_hard: f64) -> GroupSample {
        GroupSample {
            trace_text: String::new(),
            gold_answer: String::new(),
            parse: parse_trace("<think> <easy> a </easy> </think> 1"),
            correct,
            p_easy,
            p_hard,
        }
    }

    #[test]
    fn format_reward_gates_on_parse() {
        assert_eq!(
            format_reward(&parse_trace("<think> <easy> a </easy> </think> 4")),
            1.0
        );
        assert_eq!(
            format_reward(&parse_trace("<think> <easy> a </easy> </think>")),
            0.0
        );
        assert_eq!(format_reward(&parse_trace("plain text")), 0.0);
    }

    #[test]
    fn accuracy_strips_boxed_and_whitespace() {
        let m = AnswerMatcher::ExactNumeric;
        assert_eq!(accuracy_reward("\\boxed{42}", "42", m), 1.0);
        assert_eq!(accuracy_reward("  x  =  2 ", "x = 2", m), 1.0);
        assert_eq!(accuracy_reward("41", "42", m), 0.0);
        assert_eq!(accuracy_reward("\\boxed{\\frac{1}{2}}", "\\frac{1}{2}", m), 1.0);
    }

    /// Independent rational-arithmetic check for the decimal/fraction pair,
    /// then the production path must agree.
    #[test]
    fn accuracy_numeric_fallback_matches_rational_oracle() {
        let half_decimal = BigRational::from_str("50/100").unwrap();
        let half_fraction = BigRational::from_str("1/2").unwrap();
        assert_eq!(half_decimal, half_fraction);
        assert_eq!(accuracy_reward("0.50", "1/2", AnswerMatcher::ExactNumeric), 1.0);

        let third = BigRational::from_str("1/3").unwrap();
        let approx = BigRational::from_str("3333/10000").unwrap();
        assert_ne!(third, approx);
        assert_eq!(accuracy_reward("0.3333", "1/3", AnswerMatcher::ExactNumeric), 0.0);
    }

    #[test]
    fn accuracy_exact_only_has_no_numeric_fallback() {
        assert_eq!(accuracy_reward("0.50", "1/2", AnswerMatcher::Exact), 0.0);
        assert_eq!(accuracy_reward("1/2", "1/2", AnswerMatcher::Exact), 1.0);
    }

    #[test]
    fn unit_semantics_follow_mode_rules() {
        let lex = KeywordLexicon::default();
        let good = parse_trace(
            "<think> <easy> add the terms </easy> <hard> Wait, check again </hard> </think> 4",
        )
        .trace
        .unwrap();
        assert_eq!(unit_semantic_reward(&good, &lex), 1.0);

        let keyword_in_easy = parse_trace(
            "<think> <easy> However the sum is 4 </easy> </think> 4",
        )
        .trace
        .unwrap();
        assert_eq!(unit_semantic_reward(&keyword_in_easy, &lex), 0.0);

        let hard_without_keyword =
            parse_trace("<think> <hard> just grinding </hard> </think> 4")
                .trace
                .unwrap();
        assert_eq!(unit_semantic_reward(&hard_without_keyword, &lex), 0.0);
    }

    #[test]
    fn keyword_matching_is_whole_word_and_case_sensitive() {
        let lex = KeywordLexicon::default();
        assert!(lex.contains_keyword("Wait, that is wrong"));
        assert!(lex.contains_keyword("check (However) this"));
        assert!(!lex.contains_keyword("waiting for results"));
        assert!(!lex.contains_keyword("the Waits family"));
        assert!(!lex.contains_keyword("wait a second"));

        let substring = KeywordLexicon {
            whole_word: false,
            ..KeywordLexicon::default()
        };
        assert!(substring.contains_keyword("HoweverX"));

        let insensitive = KeywordLexicon {
            case_sensitive: false,
            ..KeywordLexicon::default()
        };
        assert!(insensitive.contains_keyword("wait a second"));
    }

    #[test]
    fn mode_control_worked_values_hold_exactly() {
        let config = RewardConfig::default();

        // Everyone correct, trace entirely easy.
        let group = vec![sample(true, 1.0, 0.0), sample(true, 1.0, 0.0)];
        assert_eq!(mode_control_reward(&group, 0, &config).unwrap(), 1.0);

        // Everyone wrong, trace entirely hard.
        let group = vec![sample(false, 0.0, 1.0), sample(false, 0.0, 1.0)];
        assert_eq!(mode_control_reward(&group, 0, &config).unwrap(), 1.0);

        // Half the group correct, 60/40 easy/hard split.
        let group = vec![sample(true, 0.6, 0.4), sample(false, 0.5, 0.5)];
        assert_eq!(mode_control_reward(&group, 0, &config).unwrap(), 0.85);
    }

    #[test]
    fn mode_control_stays_in_floor_band() {
        let config = RewardConfig::default();
        // Malformed sample: ratios zeroed, reward sits exactly at the floor.
        let group = vec![sample(false, 0.0, 0.0), sample(true, 1.0, 0.0)];
        assert_eq!(mode_control_reward(&group, 0, &config).unwrap(), config.beta);
    }

    #[test]
    fn mode_control_rejects_bad_inputs() {
        let config = RewardConfig::default();
        assert!(matches!(
            mode_control_reward(&[], 0, &config),
            Err(RewardError::EmptyGroup)
        ));
        let group = vec![sample(true, 1.0, 0.0)];
        assert!(matches!(
            mode_control_reward(&group, 3, &config),
            Err(RewardError::SampleIndexOutOfRange { .. })
        ));
    }

    #[test]
    fn total_reward_gates_to_zero() {
        let config = RewardConfig::default();
        let malformed = GroupSample::evaluate("not a trace", "4", &config);
        let fine = GroupSample::evaluate(
            "<think> <easy> sum is 4 </easy> </think> 4",
            "4",
            &config,
        );
        let group = vec![malformed, fine];

        let b0 = total_reward(&group, 0, &config).unwrap();
        assert_eq!(b0.total, 0.0);
        assert_eq!(b0.r_format, 0.0);
        assert!(b0.r_mode >= config.beta);

        let b1 = total_reward(&group, 1, &config).unwrap();
        assert!(b1.total >= config.beta && b1.total <= 1.0);
        assert_eq!(b1.r_format * b1.r_accuracy * b1.r_unit * b1.r_mode, b1.total);
    }

    #[test]
    fn wrong_answer_zeroes_total() {
        let config = RewardConfig::default();
        let s = GroupSample::evaluate("<think> <easy> a </easy> </think> 5", "4", &config);
        let group = vec![s.clone(), s];
        let b = total_reward(&group, 0, &config).unwrap();
        assert_eq!(b.r_accuracy, 0.0);
        assert_eq!(b.total, 0.0);
    }

    #[test]
    fn advantages_whiten_to_unit_scale() {
        assert_eq!(group_advantages(&[0.0, 1.0]).unwrap(), vec![-1.0, 1.0]);
        assert_eq!(group_advantages(&[1.0, 1.0, 1.0]).unwrap(), vec![0.0, 0.0, 0.0]);
        assert!(matches!(
            group_advantages(&[]),
            Err(RewardError::GroupTooSmall(0))
        ));
        assert!(matches!(
            group_advantages(&[0.5]),
            Err(RewardError::GroupTooSmall(1))
        ));
    }

    #[test]
    fn config_validation() {
        assert!(RewardConfig::default().validate().is_ok());
        assert!(RewardConfig::default().with_beta(1.5).validate().is_err());
        let empty = RewardConfig::default().with_lexicon(KeywordLexicon::new(Vec::<String>::new()));
        assert!(empty.validate().is_err());
    }

    #[test]
    fn score_groups_orders_and_pads_singletons() {
        let config = RewardConfig::default();
        let requests = vec![
            ScoreRequest {
                trace_text: "<think> <easy> sum </easy> </think> 4".into(),
                gold_answer: "4".into(),
                group_id: serde_json::json!("g1"),
            },
            ScoreRequest {
                trace_text: "<think> <easy> sum </easy> </think> 5".into(),
                gold_answer: "4".into(),
                group_id: serde_json::json!("g1"),
            },
            ScoreRequest {
                trace_text: "<think> <easy> lone </easy> </think> 9".into(),
                gold_answer: "9".into(),
                group_id: serde_json::json!("g2"),
            },
        ];
        let records = score_groups(&requests, &config);
        assert_eq!(records.len(), 3);
        assert_eq!(records[0].group_id, serde_json::json!("g1"));
        assert_eq!(records[0].index, 0);
        assert_eq!(records[1].index, 1);
        assert!(records[0].advantage > 0.0 && records[1].advantage < 0.0);
        assert_eq!(records[2].group_id, serde_json::json!("g2"));
        assert_eq!(records[2].advantage, 0.0);
    }

    proptest! {
        #[test]
        fn prop_advantages_have_zero_mean_unit_std(
            rewards in proptest::collection::vec(0.0f64..1.0, 2..32)
        ) {
            let adv = group_advantages(&rewards).unwrap();
            if adv.iter().any(|a| *a != 0.0) {
                let n = adv.len() as f64;
                let mean = adv.iter().sum::<f64>() / n;
                let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
                prop_assert!(mean.abs() < 1e-9);
                prop_assert!((var.sqrt() - 1.0).abs() < 1e-9);
            }
        }

        #[test]
        fn prop_total_is_zero_or_in_floor_band(
            correct in proptest::collection::vec(any::<bool>(), 2..9),
            ratios in proptest::collection::vec(0.0f64..=1.0, 2..9),
        ) {
            let config = RewardConfig::default();
            let n = correct.len().min(ratios.len());
            let group: Vec<GroupSample> = (0..n)
                .map(|i| sample(correct[i], ratios[i], 1.0 - ratios[i]))
                .collect();
            for i in 0..n {
                let b = total_reward(&group, i, &config).unwrap();
                prop_assert!(b.total == 0.0 || (config.beta..=1.0).contains(&b.total));
                prop_assert!((config.beta..=1.0).contains(&b.r_mode));
            }
        }

        #[test]
        fn prop_mode_control_monotone_in_pass_rate(
            p_easy in 0.0f64..=1.0,
            flips in 1usize..6,
        ) {
            // With p_easy > p_hard, making more of the group correct can
            // only raise the sample's mode reward, and vice versa.
            let config = RewardConfig::default();
            let p_hard = 1.0 - p_easy;
            let total = 8usize;
            let mut last: Option<f64> = None;
            for pass in 0..=flips.min(total - 1) {
                let group: Vec<GroupSample> = (0..total)
                    .map(|i| sample(i < pass, p_easy, p_hard))
                    .collect();
                let r = mode_control_reward(&group, total - 1, &config).unwrap();
                if let Some(prev) = last {
                    if p_easy > p_hard {
                        prop_assert!(r >= prev - 1e-12);
                    } else if p_easy < p_hard {
                        prop_assert!(r <= prev + 1e-12);
                    }
                }
                last = Some(r);
            }
        }
    }
}
