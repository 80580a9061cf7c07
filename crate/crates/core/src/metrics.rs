//! Accuracy and efficiency metrics for method comparisons.
//!
//! The central quantity is an accuracy-efficiency score that combines the
//! relative token saving against a baseline with the relative accuracy
//! change, weighting accuracy drops harder than gains. A report assembles
//! per-benchmark scores and per-method averages from flat result rows and
//! renders them as an aligned table; stored values keep full precision and
//! only the display rounds.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Weight on relative accuracy change when accuracy does not drop.
pub const AES_GAIN_WEIGHT: f64 = 3.0;
/// Weight on relative accuracy change when accuracy drops.
pub const AES_LOSS_WEIGHT: f64 = 5.0;
/// Expected completions per problem for the pass@1 estimator.
pub const DEFAULT_SAMPLES_PER_PROBLEM: usize = 16;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("problem {problem} has {got} samples, expected {expected}")]
    SampleCountMismatch {
        problem: String,
        expected: usize,
        got: usize,
    },
    #[error("{0} must be positive and finite for relative comparison")]
    DivisionDomain(String),
    #[error("no `{baseline}` row for benchmark `{benchmark}`")]
    MissingBaseline { baseline: String, benchmark: String },
    #[error("no samples given")]
    Empty,
}

/// One completion of one problem.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleResult {
    pub problem_id: String,
    pub correct: bool,
}

/// Mean per-sample accuracy, requiring exactly `samples_per_problem`
/// completions for every problem. Returns a fraction in [0, 1].
pub fn pass_at_1(
    samples: &[SampleResult],
    samples_per_problem: usize,
) -> Result<f64, MetricsError> {
    if samples.is_empty() || samples_per_problem == 0 {
        return Err(MetricsError::Empty);
    }
    let mut order: Vec<&str> = Vec::new();
    let mut counts: HashMap<&str, (usize, usize)> = HashMap::new();
    for sample in samples {
        let entry = counts.entry(sample.problem_id.as_str()).or_insert_with(|| {
            order.push(sample.problem_id.as_str());
            (0, 0)
        });
        entry.0 += 1;
        if sample.correct {
            entry.1 += 1;
        }
    }
    let mut total = 0.0;
    for problem in &order {
        let (got, correct) = counts[problem];
        if got != samples_per_problem {
            return Err(MetricsError::SampleCountMismatch {
                problem: problem.to_string(),
                expected: samples_per_problem,
                got,
            });
        }
        total += correct as f64 / got as f64;
    }
    Ok(total / order.len() as f64)
}

fn check_positive(value: f64, name: &str) -> Result<(), MetricsError> {
    if !value.is_finite() || value <= 0.0 {
        return Err(MetricsError::DivisionDomain(name.to_string()));
    }
    Ok(())
}

/// Token saving relative to the baseline, in percent.
pub fn token_reduction_pct(mean_tokens: f64, baseline_mean_tokens: f64) -> Result<f64, MetricsError> {
    check_positive(baseline_mean_tokens, "baseline mean tokens")?;
    if !mean_tokens.is_finite() {
        return Err(MetricsError::DivisionDomain("mean tokens".into()));
    }
    Ok(100.0 * (baseline_mean_tokens - mean_tokens) / baseline_mean_tokens)
}

/// Accuracy-efficiency score with explicit accuracy weights.
pub fn aes_weighted(
    accuracy_pct: f64,
    mean_tokens: f64,
    baseline_accuracy_pct: f64,
    baseline_mean_tokens: f64,
    gain_weight: f64,
    loss_weight: f64,
) -> Result<f64, MetricsError> {
    check_positive(baseline_accuracy_pct, "baseline accuracy")?;
    check_positive(baseline_mean_tokens, "baseline mean tokens")?;
    if !accuracy_pct.is_finite() || !mean_tokens.is_finite() {
        return Err(MetricsError::DivisionDomain("result values".into()));
    }
    let token_term = (baseline_mean_tokens - mean_tokens) / baseline_mean_tokens;
    let accuracy_delta = (accuracy_pct - baseline_accuracy_pct) / baseline_accuracy_pct;
    let weight = if accuracy_pct >= baseline_accuracy_pct {
        gain_weight
    } else {
        loss_weight
    };
    Ok(token_term + weight * accuracy_delta)
}

/// Accuracy-efficiency score with the standard weights: token saving plus
/// 3x relative accuracy gain, or minus 5x relative accuracy loss.
pub fn aes(
    accuracy_pct: f64,
    mean_tokens: f64,
    baseline_accuracy_pct: f64,
    baseline_mean_tokens: f64,
) -> Result<f64, MetricsError> {
    aes_weighted(
        accuracy_pct,
        mean_tokens,
        baseline_accuracy_pct,
        baseline_mean_tokens,
        AES_GAIN_WEIGHT,
        AES_LOSS_WEIGHT,
    )
}

/// One aggregated row: a method's accuracy and mean completion tokens on
/// one benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub benchmark: String,
    pub method: String,
    pub accuracy_pct: f64,
    pub mean_tokens: f64,
}

/// One scored cell of the report, full precision.
#[derive(Debug, Clone, Serialize)]
pub struct AesCell {
    pub benchmark: String,
    pub accuracy_pct: f64,
    pub mean_tokens: f64,
    pub reduction_pct: f64,
    pub aes: f64,
}

/// One method's scored cells, aligned with [`AesReport::benchmarks`];
/// missing benchmarks stay `None` and are excluded from the average.
#[derive(Debug, Clone, Serialize)]
pub struct MethodReport {
    pub method: String,
    pub cells: Vec<Option<AesCell>>,
    pub average_aes: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AesReport {
    pub baseline_method: String,
    pub benchmarks: Vec<String>,
    /// Baseline rows aligned with `benchmarks`.
    pub baselines: Vec<MethodResult>,
    pub methods: Vec<MethodReport>,
}

/// Scores every non-baseline row against the baseline row of the same
/// benchmark. Benchmarks and methods keep first-appearance order; a
/// non-baseline row on a benchmark without a baseline row is an error,
/// and duplicate rows keep the first occurrence.
pub fn build_report(
    results: &[MethodResult],
    baseline_method: &str,
) -> Result<AesReport, MetricsError> {
    if results.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut benchmarks: Vec<String> = Vec::new();
    let mut methods: Vec<String> = Vec::new();
    let mut baselines: HashMap<&str, &MethodResult> = HashMap::new();
    let mut cells: HashMap<(&str, &str), &MethodResult> = HashMap::new();
    for row in results {
        if !benchmarks.contains(&row.benchmark) {
            benchmarks.push(row.benchmark.clone());
        }
        if row.method == baseline_method {
            baselines.entry(row.benchmark.as_str()).or_insert(row);
        } else {
            if !methods.contains(&row.method) {
                methods.push(row.method.clone());
            }
            cells
                .entry((row.method.as_str(), row.benchmark.as_str()))
                .or_insert(row);
        }
    }

    let mut baseline_rows = Vec::with_capacity(benchmarks.len());
    for benchmark in &benchmarks {
        match baselines.get(benchmark.as_str()) {
            Some(row) => baseline_rows.push((*row).clone()),
            None => {
                // A benchmark carried only by non-baseline rows cannot be
                // scored; one carried by the baseline alone is fine.
                return Err(MetricsError::MissingBaseline {
                    baseline: baseline_method.to_string(),
                    benchmark: benchmark.clone(),
                });
            }
        }
    }

    let mut method_reports = Vec::with_capacity(methods.len());
    for method in &methods {
        let mut row_cells = Vec::with_capacity(benchmarks.len());
        let mut sum = 0.0;
        let mut count = 0usize;
        for (benchmark, baseline) in benchmarks.iter().zip(&baseline_rows) {
            match cells.get(&(method.as_str(), benchmark.as_str())) {
                Some(row) => {
                    let reduction_pct =
                        token_reduction_pct(row.mean_tokens, baseline.mean_tokens)?;
                    let score = aes(
                        row.accuracy_pct,
                        row.mean_tokens,
                        baseline.accuracy_pct,
                        baseline.mean_tokens,
                    )?;
                    sum += score;
                    count += 1;
                    row_cells.push(Some(AesCell {
                        benchmark: benchmark.clone(),
                        accuracy_pct: row.accuracy_pct,
                        mean_tokens: row.mean_tokens,
                        reduction_pct,
                        aes: score,
                    }));
                }
                None => row_cells.push(None),
            }
        }
        method_reports.push(MethodReport {
            method: method.clone(),
            cells: row_cells,
            average_aes: (count > 0).then(|| sum / count as f64),
        });
    }

    Ok(AesReport {
        baseline_method: baseline_method.to_string(),
        benchmarks,
        baselines: baseline_rows,
        methods: method_reports,
    })
}

impl fmt::Display for AesReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name_width = self
            .methods
            .iter()
            .map(|m| m.method.len())
            .chain(std::iter::once(self.baseline_method.len()))
            .max()
            .unwrap_or(6)
            .max(6);
        writeln!(
            f,
            "{:<bw$}  {:<nw$}  {:>6}  {:>8}  {:>6}  {:>6}",
            "benchmark",
            "method",
            "acc%",
            "tokens",
            "red%",
            "AES",
            bw = self.benchmark_width(),
            nw = name_width,
        )?;
        for (i, benchmark) in self.benchmarks.iter().enumerate() {
            let base = &self.baselines[i];
            writeln!(
                f,
                "{:<bw$}  {:<nw$}  {:>6.1}  {:>8.0}  {:>6}  {:>6}",
                benchmark,
                self.baseline_method,
                base.accuracy_pct,
                base.mean_tokens,
                "-",
                "-",
                bw = self.benchmark_width(),
                nw = name_width,
            )?;
            for method in &self.methods {
                if let Some(cell) = &method.cells[i] {
                    writeln!(
                        f,
                        "{:<bw$}  {:<nw$}  {:>6.1}  {:>8.0}  {:>6.1}  {:>6.2}",
                        benchmark,
                        method.method,
                        cell.accuracy_pct,
                        cell.mean_tokens,
                        cell.reduction_pct,
                        cell.aes,
                        bw = self.benchmark_width(),
                        nw = name_width,
                    )?;
                }
            }
        }
        writeln!(f)?;
        writeln!(f, "average AES over covered benchmarks:")?;
        for method in &self.methods {
            match method.average_aes {
                Some(avg) => writeln!(f, "{:<nw$}  {:>6.2}", method.method, avg, nw = name_width)?,
                None => writeln!(f, "{:<nw$}  {:>6}", method.method, "-", nw = name_width)?,
            }
        }
        Ok(())
    }
}

impl AesReport {
    fn benchmark_width(&self) -> usize {
        self.benchmarks
            .iter()
            .map(|b| b.len())
            .max()
            .unwrap_or(9)
            .max(9)
    }
}

/// One raw completion row, before aggregation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleRow {
    pub benchmark: String,
    pub method: String,
    pub problem_id: String,
    pub correct: bool,
    pub tokens: f64,
}

/// Folds raw per-completion rows into [`MethodResult`]s: accuracy from
/// [`pass_at_1`] (scaled to percent) and mean tokens over all completions.
/// Groups keep first-appearance order.
pub fn aggregate_samples(
    rows: &[SampleRow],
    samples_per_problem: usize,
) -> Result<Vec<MethodResult>, MetricsError> {
    if rows.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut order: Vec<(String, String)> = Vec::new();
    let mut groups: HashMap<(String, String), Vec<&SampleRow>> = HashMap::new();
    for row in rows {
        let key = (row.benchmark.clone(), row.method.clone());
        groups.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            Vec::new()
        });
        groups
            .get_mut(&(row.benchmark.clone(), row.method.clone()))
            .expect("group exists")
            .push(row);
    }
    let mut out = Vec::with_capacity(order.len());
    for key in order {
        let rows = &groups[&key];
        let samples: Vec<SampleResult> = rows
            .iter()
            .map(|r| SampleResult {
                problem_id: r.problem_id.clone(),
                correct: r.correct,
            })
            .collect();
        let accuracy = pass_at_1(&samples, samples_per_problem)?;
        let mean_tokens = rows.iter().map(|r| r.tokens).sum::<f64>() / rows.len() as f64;
        out.push(MethodResult {
            benchmark: key.0,
            method: key.1,
            accuracy_pct: accuracy * 100.0,
            mean_tokens,
        });
    }
    Ok(out)
}
