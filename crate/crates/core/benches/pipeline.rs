//! Benchmarks of the batch entry points against explicit sequential loops.
//!
//! The library's batch functions fan out with rayon when the default
//! `parallel` feature is on; each group here pits one of them against a
//! plain sequential loop over the same inputs, so the speedup (or overhead
//! on small inputs) is visible directly. Re-running the suite with
//! `--no-default-features` measures the sequential fallback as a baseline.

use criterion::{criterion_group, criterion_main, Criterion};

use duotrace::curator::{curate_corpus, CuratorConfig};
use duotrace::oracle::ScriptedOracle;
use duotrace::reward::{group_advantages, score_groups, GroupSample, ScoreRequest};
use duotrace::rewriter::MockRewriter;
use duotrace::rollout::{run_rollout, run_rollout_batch, RolloutConfig};
use duotrace::trace::parse_trace;
use duotrace::RewardConfig;

fn synthetic_trace(i: usize) -> String {
    format!(
        "<think> <easy> compute {i} plus {} directly. </easy> \
         <hard> Wait, double-check the carry for case {i}. </hard> \
         <easy> so the sum is {}. </easy> </think> {}",
        i + 1,
        2 * i + 1,
        2 * i + 1
    )
}

fn score_requests(groups: usize, per_group: usize) -> Vec<ScoreRequest> {
    (0..groups * per_group)
        .map(|i| ScoreRequest {
            trace_text: synthetic_trace(i),
            gold_answer: (2 * i + 1).to_string(),
            group_id: serde_json::Value::from((i / per_group) as u64),
        })
        .collect()
}

/// The same computation as `score_groups`, written as a plain loop.
fn score_sequential(requests: &[ScoreRequest], config: &RewardConfig) -> Vec<f64> {
    let mut out = Vec::with_capacity(requests.len());
    let mut start = 0;
    while start < requests.len() {
        let group_id = &requests[start].group_id;
        let mut end = start;
        while end < requests.len() && &requests[end].group_id == group_id {
            end += 1;
        }
        let samples: Vec<GroupSample> = requests[start..end]
            .iter()
            .map(|r| GroupSample::evaluate(&r.trace_text, &r.gold_answer, config))
            .collect();
        let rewards: Vec<f64> = (0..samples.len())
            .map(|i| {
                duotrace::total_reward(&samples, i, config)
                    .expect("index in range")
                    .total
            })
            .collect();
        let advantages = if rewards.len() >= 2 {
            group_advantages(&rewards).expect("group large enough")
        } else {
            vec![0.0; rewards.len()]
        };
        out.extend(advantages);
        start = end;
    }
    out
}

fn bench_scoring(c: &mut Criterion) {
    let requests = score_requests(64, 8);
    let config = RewardConfig::default();
    let mut group = c.benchmark_group("reward_scoring_512");
    group.bench_function("batch", |b| b.iter(|| score_groups(&requests, &config)));
    group.bench_function("sequential_loop", |b| {
        b.iter(|| score_sequential(&requests, &config))
    });
    group.finish();
}

fn bench_parsing(c: &mut Criterion) {
    let traces: Vec<String> = (0..1000).map(synthetic_trace).collect();
    let config = RewardConfig::default();
    let requests: Vec<ScoreRequest> = traces
        .iter()
        .enumerate()
        .map(|(i, t)| ScoreRequest {
            trace_text: t.clone(),
            gold_answer: "0".into(),
            group_id: serde_json::Value::from(i as u64),
        })
        .collect();
    let mut group = c.benchmark_group("parse_1000");
    // Singleton groups make scoring almost pure parse work.
    group.bench_function("batch", |b| b.iter(|| score_groups(&requests, &config)));
    group.bench_function("sequential_loop", |b| {
        b.iter(|| traces.iter().map(|t| parse_trace(t).ok).filter(|ok| *ok).count())
    });
    group.finish();
}

fn flat_script() -> ScriptedOracle {
    let mut rows: Vec<(String, Vec<f64>)> = vec![
        ("<think> ".into(), vec![0.5, 0.5]),
        ("<easy> ".into(), vec![0.5, 0.5]),
    ];
    for i in 0..20 {
        rows.push((format!("step{i} "), vec![0.5, 0.5]));
    }
    rows.extend([
        ("</easy> ".into(), vec![0.5, 0.5]),
        ("<hard> ".into(), vec![0.5, 0.5]),
        ("Wait ".into(), vec![0.5, 0.5]),
        ("</hard> ".into(), vec![0.5, 0.5]),
        ("<easy> ".into(), vec![0.5, 0.5]),
        ("more ".into(), vec![0.5, 0.5]),
        ("</easy> ".into(), vec![0.5, 0.5]),
        ("<hard> ".into(), vec![0.5, 0.5]),
        ("check ".into(), vec![0.5, 0.5]),
        ("</hard> ".into(), vec![0.5, 0.5]),
        ("</think> ".into(), vec![0.5, 0.5]),
        ("42".into(), vec![0.5, 0.5]),
    ]);
    ScriptedOracle::from_pairs(rows).expect("valid script")
}

fn bench_rollout(c: &mut Criterion) {
    let oracle = flat_script();
    let prompt = vec!["solve".to_string()];
    let configs: Vec<RolloutConfig> = (0..32)
        .map(|seed| RolloutConfig::default().with_seed(seed).with_max_tokens(64))
        .collect();
    let mut group = c.benchmark_group("rollout_32_trees");
    group.bench_function("batch", |b| {
        b.iter(|| run_rollout_batch(&oracle, &prompt, &configs).expect("rollout"))
    });
    group.bench_function("sequential_loop", |b| {
        b.iter(|| {
            configs
                .iter()
                .map(|cfg| run_rollout(&oracle, &prompt, cfg).expect("rollout"))
                .collect::<Vec<_>>()
        })
    });
    group.finish();
}

fn bench_curation(c: &mut Criterion) {
    let dir = tempfile::tempdir().expect("tempdir");
    let input = dir.path().join("corpus.jsonl");
    let lines: Vec<String> = (0..128)
        .map(|i| {
            format!(
                r#"{{"problem": "p{i}", "cot": "Let me think about it. x = {i}.\n\nWait, verify {i}. fine.", "answer": "{i}"}}"#
            )
        })
        .collect();
    std::fs::write(&input, lines.join("\n")).expect("write corpus");
    let client = MockRewriter::new();
    let config = CuratorConfig::default();

    let mut group = c.benchmark_group("curate_128_records");
    group.bench_function("batch", |b| {
        b.iter(|| {
            let output = dir.path().join("out.jsonl");
            curate_corpus(&input, &output, &client, &config).expect("curate")
        })
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_scoring,
    bench_parsing,
    bench_rollout,
    bench_curation
);
criterion_main!(benches);
