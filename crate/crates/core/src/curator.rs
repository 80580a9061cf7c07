//! Builds hybrid-trace training data from plain chain-of-thought corpora.
//!
//! The pipeline per record: segment the chain of thought into candidate
//! units (paragraphs, with reflection-keyword sentences starting fresh
//! units), label each unit easy or hard (keyword hit, or mean token entropy
//! above a threshold when an aligned entropy trace is present), compress
//! easy units through a [`RewriterClient`], merge adjacent same-mode units,
//! and emit a tagged trace that round-trips through the parser. The corpus
//! driver adds an automatic entropy threshold (a percentile of all unit
//! means, computed in a first pass) and a summary report.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par;
use crate::reward::{accuracy_reward, AnswerMatcher, KeywordLexicon};
use crate::rewriter::{RewriterClient, SHORTEN_TEMPLATE};
use crate::trace::{
    mode_token_ratios, parse_trace, render_trace, whitespace_token_count, HybridTrace,
    ReasoningMode, ReasoningUnit, TAG_LITERALS,
};

#[derive(Debug, Error)]
pub enum CuratorError {
    #[error("unit count mismatch: {labels} labels for {units} units")]
    LengthMismatch { labels: usize, units: usize },
    #[error("invalid curator config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One input record: a problem, its untagged chain of thought, and the gold
/// answer. `entropy_trace` optionally carries `(token, entropy)` pairs whose
/// token texts must concatenate exactly to `cot`; misaligned traces are
/// ignored (and counted) rather than failing the record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SourceRecord {
    #[serde(default)]
    pub id: Option<String>,
    pub problem: String,
    pub cot: String,
    pub answer: String,
    #[serde(default)]
    pub entropy_trace: Option<Vec<(String, f64)>>,
}

/// Per-unit bookkeeping kept in the emitted record, aligned with the
/// pre-merge segmentation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UnitCompressionStat {
    pub mode: ReasoningMode,
    pub original_tokens: usize,
    pub compressed_tokens: usize,
    /// True when the rewrite was discarded (empty, longer, contained tag
    /// literals, or introduced reflection keywords).
    pub compression_rejected: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub source_id: Option<String>,
    pub units: Vec<UnitCompressionStat>,
}

/// One emitted training record with a parseable tagged trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub problem: String,
    pub trace_text: String,
    pub answer: String,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CuratorConfig {
    pub lexicon: KeywordLexicon,
    /// Fixed entropy threshold for hard labeling. When absent it is derived
    /// per corpus as a percentile of unit mean entropies.
    pub entropy_threshold: Option<f64>,
    pub auto_threshold_percentile: f64,
    /// Skip records whose chain of thought does not end in the gold answer.
    pub filter_by_answer: bool,
    pub matcher: AnswerMatcher,
    pub shorten_template: String,
}

impl Default for CuratorConfig {
    fn default() -> Self {
        Self {
            lexicon: KeywordLexicon::default(),
            entropy_threshold: None,
            auto_threshold_percentile: 75.0,
            filter_by_answer: false,
            matcher: AnswerMatcher::ExactNumeric,
            shorten_template: SHORTEN_TEMPLATE.to_string(),
        }
    }
}

impl CuratorConfig {
    pub fn with_lexicon(mut self, lexicon: KeywordLexicon) -> Self {
        self.lexicon = lexicon;
        self
    }

    pub fn with_entropy_threshold(mut self, threshold: f64) -> Self {
        self.entropy_threshold = Some(threshold);
        self
    }

    pub fn with_filter_by_answer(mut self, filter: bool) -> Self {
        self.filter_by_answer = filter;
        self
    }

    pub fn validate(&self) -> Result<(), CuratorError> {
        if self.lexicon.keywords.is_empty() {
            return Err(CuratorError::InvalidConfig("empty keyword lexicon".into()));
        }
        if !(0.0..=100.0).contains(&self.auto_threshold_percentile)
            || self.auto_threshold_percentile == 0.0
        {
            return Err(CuratorError::InvalidConfig(format!(
                "auto_threshold_percentile must lie in (0, 100], got {}",
                self.auto_threshold_percentile
            )));
        }
        if let Some(t) = self.entropy_threshold {
            if !t.is_finite() {
                return Err(CuratorError::InvalidConfig(format!(
                    "entropy_threshold must be finite, got {t}"
                )));
            }
        }
        if !self.shorten_template.contains("{{unit}}") {
            return Err(CuratorError::InvalidConfig(
                "shorten_template is missing the {{unit}} slot".into(),
            ));
        }
        Ok(())
    }
}

/// Corpus-level summary returned by [`curate_corpus`].
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CurationReport {
    /// Records written to the output.
    pub processed: usize,
    pub skipped_bad_json: usize,
    pub skipped_empty_fields: usize,
    pub skipped_answer_mismatch: usize,
    pub skipped_client_error: usize,
    pub skipped_invalid_trace: usize,
    /// Records whose entropy trace did not concatenate to the chain of
    /// thought and was ignored.
    pub misaligned_entropy: usize,
    /// Threshold actually used for entropy labeling, fixed or derived.
    pub entropy_threshold: Option<f64>,
    /// Pre-merge unit counts.
    pub easy_units: usize,
    pub hard_units: usize,
    pub easy_original_tokens: usize,
    pub easy_compressed_tokens: usize,
    pub compression_rejected_units: usize,
    /// Aggregate easy-token reduction, in percent of original easy tokens.
    pub easy_reduction_pct: f64,
    /// Merged units whose text disagrees with their label under the keyword
    /// rule (possible when entropy labeling marks a keyword-free unit hard).
    pub semantic_inconsistent: usize,
    /// Distribution of per-record hard-token ratios over ten equal bins.
    pub p_hard_histogram: [usize; 10],
}

fn normalize_ws(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn contains_tag_literal(text: &str) -> bool {
    TAG_LITERALS.iter().any(|t| text.contains(t))
}

/// Byte spans of blank-line-separated paragraphs, trailing whitespace
/// excluded.
fn paragraph_spans(cot: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut open: Option<usize> = None;
    let mut last_end = 0usize;
    let mut cursor = 0usize;
    for line in cot.split_inclusive('\n') {
        let line_start = cursor;
        cursor += line.len();
        if line.trim().is_empty() {
            if let Some(start) = open.take() {
                spans.push((start, last_end));
            }
        } else {
            if open.is_none() {
                open = Some(line_start);
            }
            last_end = line_start + line.trim_end().len();
        }
    }
    if let Some(start) = open {
        spans.push((start, last_end));
    }
    spans
}

/// Sentence spans within `text`, offset by `base`. A sentence ends at `.`,
/// `!`, or `?` only when followed by whitespace or the end of the text.
fn sentence_spans(text: &str, base: usize) -> Vec<(usize, usize)> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut start = 0usize;
    for i in 0..bytes.len() {
        let ends = matches!(bytes[i], b'.' | b'!' | b'?')
            && (i + 1 >= bytes.len() || bytes[i + 1].is_ascii_whitespace());
        if ends {
            out.push((base + start, base + i + 1));
            start = i + 1;
        }
    }
    if start < text.len() {
        out.push((base + start, base + text.len()));
    }
    out
}

fn starts_with_keyword(sentence: &str, lexicon: &KeywordLexicon) -> bool {
    let first: String = sentence
        .trim_start()
        .chars()
        .take_while(|c| c.is_alphanumeric())
        .collect();
    !first.is_empty() && lexicon.matches_word(&first)
}

/// Byte spans of candidate units: paragraph boundaries always split;
/// within a paragraph, a sentence starting with a reflection keyword opens
/// a new unit.
fn segment_spans(cot: &str, lexicon: &KeywordLexicon) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (p_start, p_end) in paragraph_spans(cot) {
        let mut group: Option<(usize, usize)> = None;
        for (s_start, s_end) in sentence_spans(&cot[p_start..p_end], p_start) {
            let sentence = &cot[s_start..s_end];
            if sentence.trim().is_empty() {
                if let Some((_, end)) = &mut group {
                    *end = s_end;
                }
                continue;
            }
            match &mut group {
                Some(span) if starts_with_keyword(sentence, lexicon) => {
                    out.push(*span);
                    *span = (s_start, s_end);
                }
                Some((_, end)) => *end = s_end,
                None => group = Some((s_start, s_end)),
            }
        }
        if let Some(span) = group {
            out.push(span);
        }
    }
    out
}

fn segmented(cot: &str, lexicon: &KeywordLexicon) -> (Vec<(usize, usize)>, Vec<String>) {
    segment_spans(cot, lexicon)
        .into_iter()
        .map(|(s, e)| ((s, e), normalize_ws(&cot[s..e])))
        .filter(|(_, text)| !text.is_empty())
        .unzip()
}

/// Splits a chain of thought into whitespace-normalized candidate units.
pub fn segment_cot(cot: &str, lexicon: &KeywordLexicon) -> Vec<String> {
    segmented(cot, lexicon).1
}

/// Maps `(token, entropy)` pairs to byte spans, verifying that the token
/// texts concatenate exactly to `cot`.
fn aligned_token_spans(cot: &str, pairs: &[(String, f64)]) -> Option<Vec<(usize, usize, f64)>> {
    let mut pos = 0usize;
    let mut out = Vec::with_capacity(pairs.len());
    for (token, entropy) in pairs {
        let end = pos + token.len();
        if cot.as_bytes().get(pos..end) != Some(token.as_bytes()) {
            return None;
        }
        out.push((pos, end, *entropy));
        pos = end;
    }
    (pos == cot.len()).then_some(out)
}

/// Mean token entropy per unit span; `None` for spans no token overlaps.
fn segment_entropies(
    spans: &[(usize, usize)],
    tokens: &[(usize, usize, f64)],
) -> Vec<Option<f64>> {
    spans
        .iter()
        .map(|&(start, end)| {
            let mut sum = 0.0;
            let mut count = 0usize;
            for &(t_start, t_end, entropy) in tokens {
                if t_start < end && t_end > start {
                    sum += entropy;
                    count += 1;
                }
            }
            (count > 0).then(|| sum / count as f64)
        })
        .collect()
}

/// Labels each unit: hard when it contains a reflection keyword, or when
/// its mean entropy exceeds the threshold (both optional inputs present).
pub fn label_units(
    unit_texts: &[String],
    unit_entropies: Option<&[Option<f64>]>,
    threshold: Option<f64>,
    lexicon: &KeywordLexicon,
) -> Vec<ReasoningMode> {
    unit_texts
        .iter()
        .enumerate()
        .map(|(i, text)| {
            let by_keyword = lexicon.contains_keyword(text);
            let by_entropy = match (
                threshold,
                unit_entropies.and_then(|e| e.get(i).copied().flatten()),
            ) {
                (Some(t), Some(h)) => h > t,
                _ => false,
            };
            if by_keyword || by_entropy {
                ReasoningMode::Hard
            } else {
                ReasoningMode::Easy
            }
        })
        .collect()
}

/// Joins adjacent same-mode units with a single space.
pub fn merge_adjacent_units(
    units: Vec<(ReasoningMode, String)>,
) -> Vec<(ReasoningMode, String)> {
    let mut out: Vec<(ReasoningMode, String)> = Vec::new();
    for (mode, text) in units {
        match out.last_mut() {
            Some((last_mode, last_text)) if *last_mode == mode => {
                last_text.push(' ');
                last_text.push_str(&text);
            }
            _ => out.push((mode, text)),
        }
    }
    out
}

/// Assembles labeled units into a trace, merging adjacent same-mode units.
pub fn annotate(
    texts: &[String],
    modes: &[ReasoningMode],
    answer: &str,
) -> Result<HybridTrace, CuratorError> {
    if texts.len() != modes.len() {
        return Err(CuratorError::LengthMismatch {
            labels: modes.len(),
            units: texts.len(),
        });
    }
    let merged = merge_adjacent_units(
        modes
            .iter()
            .copied()
            .zip(texts.iter().cloned())
            .collect(),
    );
    let units = merged
        .into_iter()
        .enumerate()
        .map(|(index, (mode, text))| ReasoningUnit { mode, text, index })
        .collect();
    Ok(HybridTrace {
        units,
        answer: answer.trim().to_string(),
        raw_length_tokens: None,
    })
}

fn nearest_rank_percentile(values: &mut Vec<f64>, percentile: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = values.len();
    let rank = ((percentile / 100.0) * n as f64).ceil() as usize;
    Some(values[rank.clamp(1, n) - 1])
}

enum Skip {
    EmptyFields,
    AnswerMismatch,
    ClientError,
    InvalidTrace,
}

struct RecordFlags {
    misaligned_entropy: bool,
    semantic_inconsistent: usize,
    p_hard: f64,
}

fn process_record(
    source: &SourceRecord,
    fallback_id: String,
    threshold: Option<f64>,
    client: &dyn RewriterClient,
    config: &CuratorConfig,
) -> Result<(DatasetRecord, Vec<UnitCompressionStat>, RecordFlags), Skip> {
    let problem = normalize_ws(&source.problem);
    let answer = source.answer.trim();
    if problem.is_empty() || source.cot.trim().is_empty() || answer.is_empty() {
        return Err(Skip::EmptyFields);
    }
    if config.filter_by_answer
        && accuracy_reward(&source.cot, answer, config.matcher) != 1.0
    {
        return Err(Skip::AnswerMismatch);
    }

    let (spans, texts) = segmented(&source.cot, &config.lexicon);
    if texts.is_empty() {
        return Err(Skip::EmptyFields);
    }

    let mut misaligned_entropy = false;
    let entropies: Option<Vec<Option<f64>>> = match &source.entropy_trace {
        Some(pairs) => match aligned_token_spans(&source.cot, pairs) {
            Some(tokens) => Some(segment_entropies(&spans, &tokens)),
            None => {
                misaligned_entropy = true;
                None
            }
        },
        None => None,
    };
    let modes = label_units(&texts, entropies.as_deref(), threshold, &config.lexicon);

    let mut stats = Vec::with_capacity(texts.len());
    let mut final_texts = Vec::with_capacity(texts.len());
    for (text, mode) in texts.iter().zip(&modes) {
        let original_tokens = whitespace_token_count(text);
        let (final_text, compressed_tokens, rejected) = match mode {
            ReasoningMode::Hard => (text.clone(), original_tokens, false),
            ReasoningMode::Easy => {
                let rewritten = client
                    .shorten(text, &config.shorten_template)
                    .map_err(|_| Skip::ClientError)?;
                let candidate = normalize_ws(&rewritten);
                let tokens = whitespace_token_count(&candidate);
                let valid = !candidate.is_empty()
                    && tokens <= original_tokens
                    && !contains_tag_literal(&candidate)
                    && !config.lexicon.contains_keyword(&candidate);
                if valid {
                    (candidate, tokens, false)
                } else {
                    (text.clone(), original_tokens, true)
                }
            }
        };
        stats.push(UnitCompressionStat {
            mode: *mode,
            original_tokens,
            compressed_tokens,
            compression_rejected: rejected,
        });
        final_texts.push(final_text);
    }

    let trace = annotate(&final_texts, &modes, answer).map_err(|_| Skip::InvalidTrace)?;
    let semantic_inconsistent = trace
        .units
        .iter()
        .filter(|unit| {
            let has_keyword = config.lexicon.contains_keyword(&unit.text);
            match unit.mode {
                ReasoningMode::Hard => !has_keyword,
                ReasoningMode::Easy => has_keyword,
            }
        })
        .count();
    let (_, p_hard) = mode_token_ratios(&trace, whitespace_token_count);
    let trace_text = render_trace(&trace).map_err(|_| Skip::InvalidTrace)?;
    if !parse_trace(&trace_text).ok {
        return Err(Skip::InvalidTrace);
    }

    let record = DatasetRecord {
        id: source.id.clone().unwrap_or(fallback_id),
        problem,
        trace_text,
        answer: answer.to_string(),
        provenance: Provenance {
            source_id: source.id.clone(),
            units: stats.clone(),
        },
    };
    Ok((
        record,
        stats,
        RecordFlags {
            misaligned_entropy,
            semantic_inconsistent,
            p_hard,
        },
    ))
}

/// Curates a JSONL corpus of [`SourceRecord`]s into a JSONL dataset of
/// [`DatasetRecord`]s, returning a summary report. Records are processed
/// in parallel (under the `parallel` feature) in input order; malformed or
/// unusable records are skipped and counted, so one bad line never aborts
/// the run.
pub fn curate_corpus(
    input: impl AsRef<Path>,
    output: impl AsRef<Path>,
    client: &dyn RewriterClient,
    config: &CuratorConfig,
) -> Result<CurationReport, CuratorError> {
    config.validate()?;

    let reader = BufReader::new(File::open(input)?);
    let mut report = CurationReport::default();
    let mut records: Vec<(usize, SourceRecord)> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<SourceRecord>(&line) {
            Ok(record) => records.push((idx + 1, record)),
            Err(_) => report.skipped_bad_json += 1,
        }
    }

    let threshold = match config.entropy_threshold {
        Some(t) => Some(t),
        None => {
            let mut pool: Vec<f64> = Vec::new();
            for (_, record) in &records {
                if let Some(pairs) = &record.entropy_trace {
                    if let Some(tokens) = aligned_token_spans(&record.cot, pairs) {
                        let (spans, _) = segmented(&record.cot, &config.lexicon);
                        pool.extend(
                            segment_entropies(&spans, &tokens).into_iter().flatten(),
                        );
                    }
                }
            }
            nearest_rank_percentile(&mut pool, config.auto_threshold_percentile)
        }
    };
    report.entropy_threshold = threshold;

    let outcomes = par::map_vec(records, |(line_no, source)| {
        process_record(
            &source,
            format!("record-{line_no}"),
            threshold,
            client,
            config,
        )
    });

    let mut writer = BufWriter::new(File::create(output)?);
    for outcome in outcomes {
        match outcome {
            Ok((record, stats, flags)) => {
                serde_json::to_writer(&mut writer, &record)
                    .map_err(|e| std::io::Error::new(std::io::ErrorKind::Other, e))?;
                writer.write_all(b"\n")?;
                report.processed += 1;
                if flags.misaligned_entropy {
                    report.misaligned_entropy += 1;
                }
                report.semantic_inconsistent += flags.semantic_inconsistent;
                let bin = ((flags.p_hard * 10.0).floor() as usize).min(9);
                report.p_hard_histogram[bin] += 1;
                for stat in stats {
                    match stat.mode {
                        ReasoningMode::Easy => {
                            report.easy_units += 1;
                            report.easy_original_tokens += stat.original_tokens;
                            report.easy_compressed_tokens += stat.compressed_tokens;
                            if stat.compression_rejected {
                                report.compression_rejected_units += 1;
                            }
                        }
                        ReasoningMode::Hard => report.hard_units += 1,
                    }
                }
            }
            Err(Skip::EmptyFields) => report.skipped_empty_fields += 1,
            Err(Skip::AnswerMismatch) => report.skipped_answer_mismatch += 1,
            Err(Skip::ClientError) => report.skipped_client_error += 1,
            Err(Skip::InvalidTrace) => report.skipped_invalid_trace += 1,
        }
    }
    writer.flush()?;

    if report.easy_original_tokens > 0 {
        report.easy_reduction_pct = 100.0
            * (report.easy_original_tokens - report.easy_compressed_tokens) as f64
            / report.easy_original_tokens as f64;
    }
    Ok(report)
}
