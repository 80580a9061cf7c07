//! Parsing and rendering of the hybrid reasoning-trace format.
//!
//! A trace is plain text of the shape
//!
//! ```text
//! <think> <easy> u1 </easy> <hard> u2 </hard> ... </think> answer
//! ```
//!
//! with one or more tagged units in any mode order inside a single
//! `<think>` block and a non-empty answer after `</think>`. The five tag
//! strings are literal ASCII markers, not markup: there is no nesting, no
//! attributes, and whitespace between tags carries no meaning.
//!
//! [`parse_trace`] is total: any input produces a [`ParseReport`] listing
//! violations with byte offsets, never an error or panic.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

pub const TAG_THINK_OPEN: &str = "<think>";
pub const TAG_THINK_CLOSE: &str = "</think>";
pub const TAG_EASY_OPEN: &str = "<easy>";
pub const TAG_EASY_CLOSE: &str = "</easy>";
pub const TAG_HARD_OPEN: &str = "<hard>";
pub const TAG_HARD_CLOSE: &str = "</hard>";

/// All tag literals, used to reject tag strings embedded in unit text.
pub const TAG_LITERALS: [&str; 6] = [
    TAG_THINK_OPEN,
    TAG_THINK_CLOSE,
    TAG_EASY_OPEN,
    TAG_EASY_CLOSE,
    TAG_HARD_OPEN,
    TAG_HARD_CLOSE,
];

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("invalid trace: {0}")]
    InvalidTrace(String),
}

/// Reasoning register of a single unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReasoningMode {
    /// Concise, low-effort reasoning with no reflection markers.
    Easy,
    /// Deliberate reasoning that carries at least one reflection marker.
    Hard,
}

impl fmt::Display for ReasoningMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReasoningMode::Easy => write!(f, "easy"),
            ReasoningMode::Hard => write!(f, "hard"),
        }
    }
}

impl ReasoningMode {
    fn open_tag(self) -> &'static str {
        match self {
            ReasoningMode::Easy => TAG_EASY_OPEN,
            ReasoningMode::Hard => TAG_HARD_OPEN,
        }
    }

    fn close_tag(self) -> &'static str {
        match self {
            ReasoningMode::Easy => TAG_EASY_CLOSE,
            ReasoningMode::Hard => TAG_HARD_CLOSE,
        }
    }
}

/// One tagged span of reasoning. `text` is trimmed and contains no tag
/// literals; `index` is the unit's position in the trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasoningUnit {
    pub mode: ReasoningMode,
    pub text: String,
    pub index: usize,
}

/// A fully parsed trace: ordered units plus the final answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridTrace {
    pub units: Vec<ReasoningUnit>,
    pub answer: String,
    /// Token length of the original response, when the caller knows it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_length_tokens: Option<usize>,
}

/// Everything that can be wrong with a trace string.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationCode {
    /// No `<think>` tag anywhere in the input.
    MissingThink,
    /// An opened tag was never closed before `</think>` or end of input.
    UnclosedTag,
    /// An opening tag appeared while a block was already open, or a
    /// duplicate `<think>` appeared.
    NestedTag,
    /// A unit (or the whole think block) has no content.
    EmptyUnit,
    /// Non-whitespace text outside any unit block.
    TextOutsideUnits,
    /// Nothing after `</think>`.
    MissingAnswer,
    /// A closing tag that does not match the open block.
    TagMismatch,
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ViolationCode::MissingThink => "MISSING_THINK",
            ViolationCode::UnclosedTag => "UNCLOSED_TAG",
            ViolationCode::NestedTag => "NESTED_TAG",
            ViolationCode::EmptyUnit => "EMPTY_UNIT",
            ViolationCode::TextOutsideUnits => "TEXT_OUTSIDE_UNITS",
            ViolationCode::MissingAnswer => "MISSING_ANSWER",
            ViolationCode::TagMismatch => "TAG_MISMATCH",
        };
        write!(f, "{name}")
    }
}

/// One grammar violation, anchored to a byte offset in the input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub offset: usize,
    pub message: String,
}

/// Result of [`parse_trace`]. `ok` holds exactly when `trace` is present and
/// `violations` is empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseReport {
    pub ok: bool,
    pub trace: Option<HybridTrace>,
    pub violations: Vec<Violation>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Tag {
    ThinkOpen,
    ThinkClose,
    EasyOpen,
    EasyClose,
    HardOpen,
    HardClose,
}

impl Tag {
    pub(crate) fn literal(self) -> &'static str {
        match self {
            Tag::ThinkOpen => TAG_THINK_OPEN,
            Tag::ThinkClose => TAG_THINK_CLOSE,
            Tag::EasyOpen => TAG_EASY_OPEN,
            Tag::EasyClose => TAG_EASY_CLOSE,
            Tag::HardOpen => TAG_HARD_OPEN,
            Tag::HardClose => TAG_HARD_CLOSE,
        }
    }
}

/// Finds every tag occurrence as `(tag, byte offset)`. Tags are ASCII and no
/// literal is a prefix of another, so a left-to-right byte scan is exact.
pub(crate) fn scan_tags(text: &str) -> Vec<(Tag, usize)> {
    const CANDIDATES: [Tag; 6] = [
        Tag::ThinkOpen,
        Tag::ThinkClose,
        Tag::EasyOpen,
        Tag::EasyClose,
        Tag::HardOpen,
        Tag::HardClose,
    ];
    let bytes = text.as_bytes();
    let mut found = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'<' {
            if let Some(tag) = CANDIDATES
                .iter()
                .copied()
                .find(|t| bytes[i..].starts_with(t.literal().as_bytes()))
            {
                found.push((tag, i));
                i += tag.literal().len();
                continue;
            }
        }
        i += 1;
    }
    found
}

fn first_non_ws_offset(text: &str, start: usize) -> Option<usize> {
    text[start..]
        .char_indices()
        .find(|(_, c)| !c.is_whitespace())
        .map(|(i, _)| start + i)
}

#[derive(Debug)]
enum State {
    BeforeThink,
    InThink {
        think_open: usize,
    },
    InUnit {
        think_open: usize,
        mode: ReasoningMode,
        open_offset: usize,
        content_start: usize,
    },
    AfterThink {
        answer_start: usize,
    },
}

/// Parses `text` into a [`ParseReport`]. Total over arbitrary input: every
/// structural problem becomes a [`Violation`], and a [`HybridTrace`] is
/// returned only when there are none.
pub fn parse_trace(text: &str) -> ParseReport {
    let mut violations: Vec<Violation> = Vec::new();
    let mut units: Vec<ReasoningUnit> = Vec::new();

    if !text.contains(TAG_THINK_OPEN) {
        violations.push(Violation {
            code: ViolationCode::MissingThink,
            offset: 0,
            message: "no <think> block".into(),
        });
        return ParseReport {
            ok: false,
            trace: None,
            violations,
        };
    }

    let push = |violations: &mut Vec<Violation>, code, offset, message: &str| {
        violations.push(Violation {
            code,
            offset,
            message: message.to_string(),
        });
    };

    let tags = scan_tags(text);
    let mut state = State::BeforeThink;
    let mut cursor = 0usize;
    let mut answer = String::new();

    for (tag, offset) in tags {
        // Interstitial text between the previous tag and this one.
        let gap_start = cursor;
        cursor = offset + tag.literal().len();
        match state {
            State::BeforeThink => {
                if let Some(at) = first_non_ws_offset(&text[..offset], gap_start) {
                    push(
                        &mut violations,
                        ViolationCode::TextOutsideUnits,
                        at,
                        "text before <think>",
                    );
                }
                match tag {
                    Tag::ThinkOpen => state = State::InThink { think_open: offset },
                    _ => push(
                        &mut violations,
                        ViolationCode::TagMismatch,
                        offset,
                        "tag before <think>",
                    ),
                }
            }
            State::InThink { think_open } => {
                if let Some(at) = first_non_ws_offset(&text[..offset], gap_start) {
                    push(
                        &mut violations,
                        ViolationCode::TextOutsideUnits,
                        at,
                        "text inside <think> but outside any unit",
                    );
                }
                match tag {
                    Tag::EasyOpen | Tag::HardOpen => {
                        let mode = if tag == Tag::EasyOpen {
                            ReasoningMode::Easy
                        } else {
                            ReasoningMode::Hard
                        };
                        state = State::InUnit {
                            think_open,
                            mode,
                            open_offset: offset,
                            content_start: cursor,
                        };
                    }
                    Tag::ThinkOpen => push(
                        &mut violations,
                        ViolationCode::NestedTag,
                        offset,
                        "duplicate <think>",
                    ),
                    Tag::EasyClose | Tag::HardClose => push(
                        &mut violations,
                        ViolationCode::TagMismatch,
                        offset,
                        "closing tag without an open unit",
                    ),
                    Tag::ThinkClose => {
                        if units.is_empty() {
                            push(
                                &mut violations,
                                ViolationCode::EmptyUnit,
                                think_open,
                                "think block contains no reasoning units",
                            );
                        }
                        state = State::AfterThink {
                            answer_start: cursor,
                        };
                    }
                }
            }
            State::InUnit {
                think_open,
                mode,
                open_offset,
                content_start,
            } => match tag {
                Tag::EasyClose | Tag::HardClose => {
                    let closes = if tag == Tag::EasyClose {
                        ReasoningMode::Easy
                    } else {
                        ReasoningMode::Hard
                    };
                    if closes == mode {
                        let content = text[content_start..offset].trim();
                        if content.is_empty() {
                            push(
                                &mut violations,
                                ViolationCode::EmptyUnit,
                                open_offset,
                                "unit has no content",
                            );
                        } else {
                            units.push(ReasoningUnit {
                                mode,
                                text: content.to_string(),
                                index: units.len(),
                            });
                        }
                    } else {
                        push(
                            &mut violations,
                            ViolationCode::TagMismatch,
                            offset,
                            &format!("expected {}, found {}", mode.close_tag(), tag.literal()),
                        );
                    }
                    state = State::InThink { think_open };
                }
                Tag::EasyOpen | Tag::HardOpen | Tag::ThinkOpen => {
                    push(
                        &mut violations,
                        ViolationCode::NestedTag,
                        offset,
                        &format!("{} inside an open unit", tag.literal()),
                    );
                }
                Tag::ThinkClose => {
                    push(
                        &mut violations,
                        ViolationCode::UnclosedTag,
                        open_offset,
                        &format!("{} not closed before </think>", mode.open_tag()),
                    );
                    state = State::AfterThink {
                        answer_start: cursor,
                    };
                }
            },
            State::AfterThink { .. } => match tag {
                Tag::ThinkOpen => push(
                    &mut violations,
                    ViolationCode::NestedTag,
                    offset,
                    "duplicate <think>",
                ),
                Tag::ThinkClose => push(
                    &mut violations,
                    ViolationCode::TagMismatch,
                    offset,
                    "duplicate </think>",
                ),
                // Unit tag strings after </think> are plain answer text.
                _ => {}
            },
        }
    }

    match state {
        State::BeforeThink => {
            // Unreachable in practice: a <think> literal was found above.
            push(
                &mut violations,
                ViolationCode::MissingThink,
                0,
                "no <think> block",
            );
        }
        State::InThink { think_open } => {
            push(
                &mut violations,
                ViolationCode::UnclosedTag,
                think_open,
                "<think> never closed",
            );
        }
        State::InUnit {
            think_open,
            mode,
            open_offset,
            ..
        } => {
            push(
                &mut violations,
                ViolationCode::UnclosedTag,
                open_offset,
                &format!("{} never closed", mode.open_tag()),
            );
            push(
                &mut violations,
                ViolationCode::UnclosedTag,
                think_open,
                "<think> never closed",
            );
        }
        State::AfterThink { answer_start } => {
            let tail = text[answer_start..].trim();
            if tail.is_empty() {
                push(
                    &mut violations,
                    ViolationCode::MissingAnswer,
                    answer_start,
                    "no answer after </think>",
                );
            } else {
                answer = tail.to_string();
            }
        }
    }

    let ok = violations.is_empty();
    ParseReport {
        ok,
        trace: ok.then_some(HybridTrace {
            units,
            answer,
            raw_length_tokens: None,
        }),
        violations,
    }
}

fn validate_trace(trace: &HybridTrace) -> Result<(), TraceError> {
    if trace.units.is_empty() {
        return Err(TraceError::InvalidTrace("trace has no units".into()));
    }
    for (i, unit) in trace.units.iter().enumerate() {
        if unit.index != i {
            return Err(TraceError::InvalidTrace(format!(
                "unit at position {i} carries index {}",
                unit.index
            )));
        }
        if unit.text.trim().is_empty() {
            return Err(TraceError::InvalidTrace(format!("unit {i} is empty")));
        }
        if let Some(tag) = TAG_LITERALS.iter().find(|t| unit.text.contains(*t)) {
            return Err(TraceError::InvalidTrace(format!(
                "unit {i} contains tag literal {tag}"
            )));
        }
    }
    if trace.answer.trim().is_empty() {
        return Err(TraceError::InvalidTrace("answer is empty".into()));
    }
    // Think tags in the answer would change meaning on reparse; unit tag
    // strings after </think> are harmless answer text.
    for tag in [TAG_THINK_OPEN, TAG_THINK_CLOSE] {
        if trace.answer.contains(tag) {
            return Err(TraceError::InvalidTrace(format!(
                "answer contains tag literal {tag}"
            )));
        }
    }
    Ok(())
}

/// Renders the canonical serialization: tags separated by single spaces,
/// answer after `</think>`. Parsing the result yields `trace` back (with
/// unit texts trimmed).
pub fn render_trace(trace: &HybridTrace) -> Result<String, TraceError> {
    validate_trace(trace)?;
    let mut out = String::from(TAG_THINK_OPEN);
    for unit in &trace.units {
        out.push(' ');
        out.push_str(unit.mode.open_tag());
        out.push(' ');
        out.push_str(&unit.text);
        out.push(' ');
        out.push_str(unit.mode.close_tag());
    }
    out.push(' ');
    out.push_str(TAG_THINK_CLOSE);
    out.push(' ');
    out.push_str(&trace.answer);
    Ok(out)
}

/// Counts whitespace-separated words; the default token counter.
pub fn whitespace_token_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Fraction of unit-content tokens in easy vs hard units, as
/// `(p_easy, p_hard)`. Tag markers and the answer are not counted. Sums to
/// 1 for any trace with at least one unit and a counter that is >= 1 on
/// non-empty text; an all-empty count yields `(0.0, 0.0)`.
pub fn mode_token_ratios<F>(trace: &HybridTrace, token_counter: F) -> (f64, f64)
where
    F: Fn(&str) -> usize,
{
    let mut easy = 0usize;
    let mut hard = 0usize;
    for unit in &trace.units {
        let n = token_counter(&unit.text);
        match unit.mode {
            ReasoningMode::Easy => easy += n,
            ReasoningMode::Hard => hard += n,
        }
    }
    let total = easy + hard;
    if total == 0 {
        return (0.0, 0.0);
    }
    (easy as f64 / total as f64, hard as f64 / total as f64)
}
