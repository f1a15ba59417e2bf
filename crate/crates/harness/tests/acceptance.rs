//! Acceptance checks. Each test prints one `[n] name: PASS|FAIL detail` line
//! and then asserts. Run with `--nocapture` to see the lines.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use peer_eval::backend::{BackendPool, BackendSpec};
use peer_eval::config::{AutoExamPolicy, RunConfig};
use peer_eval::exam::run_exam;
use peer_eval::pipeline::{self, Run, RECORDS};
use peer_eval::store::read_records;
use peer_eval::synthetic::{run_scenario, GoldMode, Scenario, ScenarioRun, SyntheticSpec};
use peer_eval_core::bias::{pg_matrix, pg_significance, Alternative, PgOrientation};
use peer_eval_core::chair::{aggregate_pairwise, aggregate_pointwise};
use peer_eval_core::exam::{build_exam, compute_weight, qualify, ReviewerProfile, WeightScheme, DEFAULT_CLAMP_EPS};
use peer_eval_core::jobs::{build_jobs_for, ReviewJob, ReviewRecord};
use peer_eval_core::judgment::ParsedJudgment;
use peer_eval_core::metrics::{kendall_tau_b, spearman};
use peer_eval_core::scripted::{prompt_rng, scripted_judge, GoldHint, ScriptedConfig, ScriptedJob};
use peer_eval_core::{Choice, PromptSetting, TiePolicy, Verdict};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn verdict_line(n: u32, name: &str, pass: bool, detail: &str) {
    println!("[{n}] {name}: {} {detail}", if pass { "PASS" } else { "FAIL" });
}

fn profile(id: &str, weight: f64, setting: PromptSetting) -> ReviewerProfile {
    ReviewerProfile {
        reviewer_id: id.into(),
        setting,
        exam_agreement: None,
        weight,
        passed: true,
        mu: None,
        sigma: None,
        auto_exam_consistency: None,
    }
}

// ---------------------------------------------------------------- 1

fn oracle_tau_b(x: &[f64], y: &[f64]) -> Option<f64> {
    let (mut c, mut d, mut only_x, mut only_y) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let dx = (x[i] - x[j]).signum() * f64::from(x[i] != x[j]);
            let dy = (y[i] - y[j]).signum() * f64::from(y[i] != y[j]);
            if dx == 0.0 && dy == 0.0 {
                continue;
            } else if dx == 0.0 {
                only_x += 1.0;
            } else if dy == 0.0 {
                only_y += 1.0;
            } else if dx == dy {
                c += 1.0;
            } else {
                d += 1.0;
            }
        }
    }
    let denom: f64 = ((c + d + only_x) * (c + d + only_y)).sqrt();
    (denom > 0.0).then(|| (c - d) / denom)
}

fn oracle_spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    // Average rank: 1 + (#smaller) + (#equal - 1) / 2.
    let ranks = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .map(|a| {
                let smaller = v.iter().filter(|b| *b < a).count() as f64;
                let equal = v.iter().filter(|b| *b == a).count() as f64;
                1.0 + smaller + (equal - 1.0) / 2.0
            })
            .collect()
    };
    let (rx, ry) = (ranks(x), ranks(y));
    let n = rx.len() as f64;
    let (sx, sy): (f64, f64) = (rx.iter().sum(), ry.iter().sum());
    let sxy: f64 = rx.iter().zip(&ry).map(|(a, b)| a * b).sum();
    let sxx: f64 = rx.iter().map(|a| a * a).sum();
    let syy: f64 = ry.iter().map(|b| b * b).sum();
    let cov = n * sxy - sx * sy;
    let vx = n * sxx - sx * sx;
    let vy = n * syy - sy * sy;
    (vx > 0.0 && vy > 0.0).then(|| cov / (vx * vy).sqrt())
}

#[test]
fn c1_metric_oracles() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst, mut mismatches, mut tied_cases) = (0.0f64, 0, 0);
    for _ in 0..1000 {
        let n = rng.random_range(2..=8);
        // Small value ranges force ties on most vectors.
        let span = rng.random_range(1..=6);
        let x: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..=span))).collect();
        let y: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..=span))).collect();
        if BTreeSet::from_iter(x.iter().map(|v| *v as i64)).len() < n {
            tied_cases += 1;
        }
        for (lib, oracle) in [
            (kendall_tau_b(&x, &y).ok(), oracle_tau_b(&x, &y)),
            (spearman(&x, &y).ok(), oracle_spearman(&x, &y)),
        ] {
            match (lib, oracle) {
                (Some(a), Some(b)) => worst = worst.max((a - b).abs()),
                (None, None) => {}
                _ => mismatches += 1,
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = worst <= 1e-12 && mismatches == 0 && elapsed < Duration::from_secs(5);
    verdict_line(
        1,
        "metric oracles",
        pass,
        &format!("max |diff| {worst:.1e}, {mismatches} definedness mismatches, {tied_cases} tied vectors, {elapsed:.2?}"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 2

fn rating_record(reviewer: &str, task: &str, ev: &str, judgment: ParsedJudgment) -> ReviewRecord {
    ReviewRecord {
        job: ReviewJob::new(PromptSetting::Point100, task, vec![ev.into()], reviewer),
        judgment,
        latency: 0.0,
        attempt_count: 1,
    }
}

/// `R_x` straight from the formula, for samples keyed `task/evaluatee`.
fn oracle_pointwise(records: &[ReviewRecord], weights: &BTreeMap<String, f64>) -> BTreeMap<String, f64> {
    let mut by_reviewer: BTreeMap<&str, Vec<(String, f64)>> = BTreeMap::new();
    for r in records {
        if let Some(v) = r.judgment.rating {
            by_reviewer
                .entry(&r.job.reviewer_id)
                .or_default()
                .push((format!("{}/{}", r.job.task_id, r.job.subject_ids[0]), f64::from(v)));
        }
    }
    let mut num: BTreeMap<String, f64> = BTreeMap::new();
    let mut den: BTreeMap<String, f64> = BTreeMap::new();
    for (reviewer, rated) in by_reviewer {
        let n = rated.len() as f64;
        let mean = rated.iter().map(|(_, v)| v).sum::<f64>() / n;
        let sd = (rated.iter().map(|(_, v)| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        let w = weights[reviewer];
        for (key, v) in rated {
            let z = if sd > 0.0 { (v - mean) / sd } else { 0.0 };
            *num.entry(key.clone()).or_default() += w * z;
            *den.entry(key).or_default() += w;
        }
    }
    num.into_iter().map(|(k, v)| (k.clone(), v / den[&k])).collect()
}

#[test]
fn c2_aggregation_algebra() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let reviewers: Vec<String> = (0..5).map(|i| format!("r{i}")).collect();
    let (mut affine_worst, mut oracle_worst, mut verdict_changes, mut stores) = (0.0f64, 0.0f64, 0, 0);

    for round in 0..3 {
        // Pointwise: 5 reviewers x 400 tasks x 5 evaluatees = 10,000 records.
        let weights: BTreeMap<String, f64> = reviewers
            .iter()
            .map(|r| (r.clone(), rng.random_range(0.05..3.0)))
            .collect();
        let mut records = Vec::with_capacity(10_000);
        for t in 0..400 {
            for e in 0..5 {
                for r in &reviewers {
                    // Ratings 0..=31 keep 3r+7 on the 0..=100 scale; a few answers are unparseable.
                    let judgment = if rng.random_bool(0.02) {
                        ParsedJudgment::unparseable("no idea")
                    } else {
                        let v = rng.random_range(0..=31u8);
                        ParsedJudgment::rating(v, v.to_string())
                    };
                    records.push(rating_record(r, &format!("t{t}"), &format!("e{e}"), judgment));
                }
            }
        }
        let profiles: Vec<ReviewerProfile> = reviewers
            .iter()
            .map(|r| profile(r, weights[r], PromptSetting::Point100))
            .collect();
        let base = aggregate_pointwise(&records, &profiles, PromptSetting::Point100).unwrap();
        let target = &reviewers[round % reviewers.len()];
        let shifted: Vec<ReviewRecord> = records
            .iter()
            .map(|r| {
                let mut r = r.clone();
                if &r.job.reviewer_id == target {
                    if let Some(v) = r.judgment.rating {
                        r.judgment = ParsedJudgment::rating(3 * v + 7, "");
                    }
                }
                r
            })
            .collect();
        let moved = aggregate_pointwise(&shifted, &profiles, PromptSetting::Point100).unwrap();
        assert_eq!(base.scores.len(), moved.scores.len());
        for (a, b) in base.scores.iter().zip(&moved.scores) {
            affine_worst = affine_worst.max((a.score.unwrap() - b.score.unwrap()).abs());
        }
        let oracle = oracle_pointwise(&records, &weights);
        for s in &base.scores {
            let key = format!("{}/{}", s.task_id, s.subject_ids[0]);
            oracle_worst = oracle_worst.max((s.score.unwrap() - oracle[&key]).abs());
        }
        stores += 1;

        // Pairwise: 5 reviewers x 100 tasks x Perm(5, 2) = 10,000 records.
        let mut votes = Vec::with_capacity(10_000);
        for t in 0..100 {
            for a in 0..5 {
                for b in 0..5 {
                    if a == b {
                        continue;
                    }
                    for r in &reviewers {
                        let c = if rng.random_bool(0.5) { Choice::One } else { Choice::Two };
                        votes.push(ReviewRecord {
                            job: ReviewJob::new(
                                PromptSetting::Pairwise,
                                &format!("t{t}"),
                                vec![format!("e{a}"), format!("e{b}")],
                                r,
                            ),
                            judgment: ParsedJudgment::preference(c, c.as_str()),
                            latency: 0.0,
                            attempt_count: 1,
                        });
                    }
                }
            }
        }
        // Random weights, then equal weights where exact ties are common.
        for equal in [false, true] {
            let w = |r: &String| if equal { 1.0 } else { weights[r] };
            let one: Vec<ReviewerProfile> = reviewers
                .iter()
                .map(|r| profile(r, w(r), PromptSetting::Pairwise))
                .collect();
            let ten: Vec<ReviewerProfile> = reviewers
                .iter()
                .map(|r| profile(r, 10.0 * w(r), PromptSetting::Pairwise))
                .collect();
            let a = aggregate_pairwise(&votes, &one).unwrap();
            let b = aggregate_pairwise(&votes, &ten).unwrap();
            assert_eq!(a.len(), 2000);
            verdict_changes += a.iter().zip(&b).filter(|(x, y)| x.verdict != y.verdict).count();
            stores += 1;
        }
    }
    let elapsed = start.elapsed();
    let pass = affine_worst <= 1e-9 && oracle_worst <= 1e-9 && verdict_changes == 0 && elapsed < Duration::from_secs(5);
    verdict_line(
        2,
        "aggregation algebra",
        pass,
        &format!(
            "{stores} stores of 10,000 records; affine max |dR| {affine_worst:.1e}, formula max |dR| {oracle_worst:.1e}, \
             {verdict_changes} verdict changes under x10 weights, {elapsed:.2?}"
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 3

/// Maximum-posterior verdict from likelihood products under a uniform prior.
fn map_rule(accuracies: &[f64], votes: &[Choice]) -> Verdict {
    let (mut first, mut second) = (1.0f64, 1.0f64);
    for (p, v) in accuracies.iter().zip(votes) {
        if *v == Choice::One {
            first *= p;
            second *= 1.0 - p;
        } else {
            first *= 1.0 - p;
            second *= p;
        }
    }
    if (first - second).abs() <= 1e-12 * first.max(second) {
        Verdict::Tie
    } else if first > second {
        Verdict::First
    } else {
        Verdict::Second
    }
}

#[test]
fn c3_bayes_consistency() {
    let accuracies = [0.9, 0.6, 0.6];
    let ids = ["r0", "r1", "r2"];
    let profiles: Vec<ReviewerProfile> = ids
        .iter()
        .zip(accuracies)
        .map(|(id, p)| profile(id, compute_weight(p, WeightScheme::LogOdds, DEFAULT_CLAMP_EPS), PromptSetting::Pairwise))
        .collect();

    // Every vote pattern, enumerated.
    let mut pattern_mismatches = 0;
    for bits in 0..8u32 {
        let votes: Vec<Choice> = (0..3)
            .map(|i| if bits >> i & 1 == 1 { Choice::Two } else { Choice::One })
            .collect();
        let records: Vec<ReviewRecord> = ids
            .iter()
            .zip(&votes)
            .map(|(id, c)| ReviewRecord {
                job: ReviewJob::new(PromptSetting::Pairwise, "t", vec!["a".into(), "b".into()], id),
                judgment: ParsedJudgment::preference(*c, c.as_str()),
                latency: 0.0,
                attempt_count: 1,
            })
            .collect();
        let chair = aggregate_pairwise(&records, &profiles).unwrap()[0].verdict.unwrap();
        if chair != map_rule(&accuracies, &votes) {
            pattern_mismatches += 1;
        }
    }

    // The same reviewers as scripted judges over 2,000 samples.
    let configs: Vec<ScriptedConfig> = accuracies
        .iter()
        .enumerate()
        .map(|(i, p)| ScriptedConfig::new(*p, 100 + i as u64))
        .collect();
    let subjects = vec!["a".to_string(), "b".to_string()];
    let mut records = Vec::new();
    let mut observed: BTreeMap<String, Vec<Choice>> = BTreeMap::new();
    for t in 0..2000 {
        let task = format!("t{t}");
        let gold = if t % 2 == 0 { Verdict::First } else { Verdict::Second };
        let job = ScriptedJob {
            task_id: &task,
            setting: PromptSetting::Pairwise,
            subject_ids: &subjects,
            gold: Some(GoldHint::Preference(gold)),
        };
        for (id, config) in ids.iter().zip(&configs) {
            let judgment = scripted_judge(config, &job, &mut prompt_rng(config.seed, &task));
            observed.entry(task.clone()).or_default().push(judgment.preference.unwrap());
            records.push(ReviewRecord {
                job: ReviewJob::new(PromptSetting::Pairwise, &task, subjects.clone(), id),
                judgment,
                latency: 0.0,
                attempt_count: 1,
            });
        }
    }
    let scores = aggregate_pairwise(&records, &profiles).unwrap();
    let sample_mismatches = scores
        .iter()
        .filter(|s| s.verdict.unwrap() != map_rule(&accuracies, &observed[&s.task_id]))
        .count();
    let patterns_seen: BTreeSet<&Vec<Choice>> = observed.values().collect();

    let pass = pattern_mismatches == 0 && sample_mismatches == 0;
    verdict_line(
        3,
        "Bayes-consistent vote",
        pass,
        &format!(
            "8/8 patterns checked ({pattern_mismatches} mismatches); scripted run: {} samples, {} distinct patterns, \
             {sample_mismatches} mismatches",
            scores.len(),
            patterns_seen.len()
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 4

#[test]
fn c4_exam_calibration() {
    let start = Instant::now();
    let seed = 42;
    let mut spec = SyntheticSpec::new(&[("q1", 3.0), ("q2", 3.0)], 1000, seed);
    spec.gold = GoldMode::Preferences;
    let corpus = spec.corpus().unwrap();
    let paper = build_exam(&corpus, &["q1".into(), "q2".into()], PromptSetting::Pairwise).unwrap();
    let accuracies = [("c90", 0.9), ("c80", 0.8), ("c70", 0.7), ("c60", 0.6), ("c55", 0.55)];
    let specs: Vec<BackendSpec> = accuracies
        .iter()
        .enumerate()
        .map(|(i, (id, p))| BackendSpec::scripted(*id, ScriptedConfig::new(*p, i as u64 + 1)))
        .collect();
    let pool = BackendPool::from_specs(&specs, seed, None).unwrap();
    let ids: Vec<String> = accuracies.iter().map(|(id, _)| id.to_string()).collect();
    let results = run_exam(&paper, &corpus, &ids, &pool, TiePolicy::Half, 8).unwrap();
    let profiles = qualify(&results, PromptSetting::Pairwise, 0.60, WeightScheme::LogOdds, DEFAULT_CLAMP_EPS);
    let elapsed = start.elapsed();

    let worst = results
        .iter()
        .zip(&accuracies)
        .map(|(r, (_, p))| (r.agreement - p).abs())
        .fold(0.0, f64::max);
    let filtered: Vec<&str> = profiles
        .iter()
        .filter(|p| !p.passed)
        .map(|p| p.reviewer_id.as_str())
        .collect();
    let pass = paper.items.len() == 2000 && worst <= 0.03 && filtered == ["c55"] && elapsed < Duration::from_secs(10);
    let recovered: Vec<String> = results
        .iter()
        .map(|r| format!("{}={:.4}", r.reviewer_id, r.agreement))
        .collect();
    verdict_line(
        4,
        "exam calibration",
        pass,
        &format!(
            "{} items, seed {seed}; {}; max |p_l - p| {worst:.4}; filtered {filtered:?}; {elapsed:.2?}",
            paper.items.len(),
            recovered.join(" ")
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 5 and 8

const PLANTED: [(&str, f64); 5] = [("m1", 4.0), ("m2", 3.5), ("m3", 3.0), ("m4", 2.5), ("m5", 2.0)];
const GOOD: [(&str, f64); 5] = [("r65", 0.65), ("r70", 0.70), ("r75", 0.75), ("r80", 0.80), ("r90", 0.90)];
// Candidates the exam is there to keep out.
const WEAK: [(&str, f64); 3] = [("w50", 0.50), ("w45", 0.45), ("w40", 0.40)];

fn ordering_scenario(seed: u64) -> Scenario {
    let candidates = GOOD
        .iter()
        .chain(&WEAK)
        .enumerate()
        .map(|(i, (id, p))| (id.to_string(), ScriptedConfig::new(*p, i as u64 + 1)))
        .collect();
    Scenario {
        corpus: SyntheticSpec::new(&PLANTED, 500, seed),
        candidates,
        questioners: vec!["m1".into(), "m3".into(), "m5".into()],
        setting: PromptSetting::Pairwise,
        exam_tasks: Some(200),
        tie_policy: TiePolicy::Half,
        seed,
        workers: 8,
    }
}

struct Sweep {
    runs: Vec<(u64, ScenarioRun)>,
    elapsed: Duration,
}

fn sweep() -> &'static Sweep {
    static SWEEP: OnceLock<Sweep> = OnceLock::new();
    SWEEP.get_or_init(|| {
        let start = Instant::now();
        let runs = (1..=10)
            .map(|seed| (seed, run_scenario(&ordering_scenario(seed)).unwrap()))
            .collect();
        Sweep {
            runs,
            elapsed: start.elapsed(),
        }
    })
}

#[test]
fn c5_end_to_end_ordering() {
    let sweep = sweep();
    let planted: Vec<String> = PLANTED.iter().map(|(id, _)| id.to_string()).collect();
    let mut ok_seeds = 0;
    let mut lines = Vec::new();
    for (seed, run) in &sweep.runs {
        let profiles = run.profiles(0.60, WeightScheme::LogOdds);
        let passed: Vec<&str> = profiles
            .iter()
            .filter(|p| p.passed)
            .map(|p| p.reviewer_id.as_str())
            .collect();
        let board = run.leaderboard(&profiles).unwrap();
        let order: Vec<String> = board.entries.iter().map(|e| e.evaluatee_id.clone()).collect();
        let chair = run.chair_metrics(&profiles).unwrap().agreement.unwrap();
        let best = passed
            .iter()
            .map(|id| run.reviewer_metrics(id).metrics.agreement.unwrap())
            .fold(f64::MIN, f64::max);
        let good = order == planted && chair > best;
        ok_seeds += usize::from(good);
        lines.push(format!(
            "seed {seed}: {} reviewers, A {chair:.4} vs best single {best:.4}, order {}",
            passed.len(),
            if order == planted { "ok" } else { "WRONG" }
        ));
    }
    let elapsed = sweep.elapsed;
    let pass = ok_seeds == 10 && elapsed < Duration::from_secs(60);
    verdict_line(
        5,
        "end-to-end ordering",
        pass,
        &format!("{ok_seeds}/10 seeds; 500 tasks; runs took {elapsed:.2?}"),
    );
    for l in lines {
        println!("    {l}");
    }
    assert!(pass);
}

#[test]
fn c8_robustness_sweep() {
    let sweep = sweep();
    let variants = [
        ("xi=0.60 log-odds", 0.60, WeightScheme::LogOdds),
        ("xi=0.55 log-odds", 0.55, WeightScheme::LogOdds),
        ("xi=0.60 uniform", 0.60, WeightScheme::Uniform),
        ("xi=0 uniform", 0.0, WeightScheme::Uniform),
    ];
    let means: Vec<f64> = variants
        .iter()
        .map(|(_, xi, scheme)| {
            let total: f64 = sweep
                .runs
                .iter()
                .map(|(_, run)| run.chair_metrics(&run.profiles(*xi, *scheme)).unwrap().agreement.unwrap())
                .sum();
            total / sweep.runs.len() as f64
        })
        .collect();
    let base = means[0];
    let pass = (means[1] - base).abs() < 0.03 && (means[2] - base).abs() < 0.03 && base - means[3] > 0.01;
    let shown: Vec<String> = variants
        .iter()
        .zip(&means)
        .map(|((name, ..), a)| format!("{name} {a:.4}"))
        .collect();
    verdict_line(
        8,
        "robustness sweep",
        pass,
        &format!("mean A over 10 seeds: {}", shown.join(", ")),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 6

#[test]
fn c6_bias_detection() {
    let models = [("e1", 3.8), ("e2", 3.4), ("e3", 3.0), ("e4", 2.6), ("e5", 2.2)];
    let biased = "e3";
    let candidates = models
        .iter()
        .enumerate()
        .map(|(i, (id, _))| {
            let config = ScriptedConfig::new(0.75, 50 + i as u64);
            let config = if *id == biased { config.with_bias(*id, 0.5) } else { config };
            (id.to_string(), config)
        })
        .collect();
    let scenario = Scenario {
        corpus: SyntheticSpec::new(&models, 500, 42),
        candidates,
        questioners: Vec::new(),
        setting: PromptSetting::Pairwise,
        exam_tasks: None,
        tie_policy: TiePolicy::Half,
        seed: 42,
        workers: 8,
    };
    let run = run_scenario(&scenario).unwrap();
    let ids: Vec<String> = models.iter().map(|(id, _)| id.to_string()).collect();
    let matrix = pg_matrix(&run.records, &ids, PgOrientation::CanonicalIndex, Alternative::TwoSided);
    let row = matrix.row_values(biased);
    let test = pg_significance(&row, Alternative::TwoSided).unwrap();

    // Gaps between unbiased reviewers only.
    let mut clean = Vec::new();
    for (i, a) in ids.iter().enumerate() {
        for (j, b) in ids.iter().enumerate() {
            if i < j && a != biased && b != biased {
                clean.extend(matrix.pg[i][j]);
            }
        }
    }
    let n = clean.len() as f64;
    let mean = clean.iter().sum::<f64>() / n;
    let se = (clean.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() / n.sqrt();

    let pass = test.mean > 0.0 && test.p_value < 0.05;
    verdict_line(
        6,
        "bias detection",
        pass,
        &format!(
            "row of {biased}: {:?}, mean {:.4}, t {:.3}, p {:.2e}; unbiased pairs mean {mean:.4} (3 SE = {:.4})",
            row.iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>(),
            test.mean,
            test.t_statistic,
            test.p_value,
            3.0 * se
        ),
    );
    assert!(pass);
    assert!(mean.abs() <= 3.0 * se);
}

// ---------------------------------------------------------------- 7

#[test]
fn c7_counting_identities() {
    // Values quoted by the source for eleven evaluatees and 100 tasks.
    const POINTWISE: usize = 1_100;
    const PAIRWISE: usize = 11_000;
    let evaluatees: Vec<(String, f64)> = (1..=11).map(|i| (format!("llm{i:02}"), 1.0)).collect();
    let refs: Vec<(&str, f64)> = evaluatees.iter().map(|(id, q)| (id.as_str(), *q)).collect();
    let mut spec = SyntheticSpec::new(&refs, 100, 0);
    spec.gold = GoldMode::None;
    let corpus = spec.corpus().unwrap();
    let point = build_jobs_for(&corpus, &["reviewer"], PromptSetting::Point5).len();
    let pair = build_jobs_for(&corpus, &["reviewer"], PromptSetting::Pairwise).len();
    // Independent count: n outputs per task, n (n - 1) ordered pairs.
    let (n, tasks) = (11, 100);
    let pass = point == POINTWISE && pair == PAIRWISE && point == n * tasks && pair == n * (n - 1) * tasks;
    verdict_line(
        7,
        "counting identities",
        pass,
        &format!("{point} pointwise and {pair} pairwise jobs per reviewer"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 9

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.file_type().unwrap().is_file())
        .map(|e| (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap()))
        .collect()
}

#[test]
fn c9_determinism_and_resume() {
    let dir = tempfile::tempdir().unwrap();
    let models = [("a", 3.6), ("b", 3.2), ("c", 2.8), ("d", 2.4)];
    SyntheticSpec::new(&models, 40, 9).write_files(dir.path()).unwrap();
    let mut config = RunConfig::new(
        dir.path().join("tasks.jsonl"),
        models.iter().map(|(id, _)| id.to_string()).collect(),
        PromptSetting::Pairwise,
    );
    config.outputs = Some(dir.path().join("outputs.jsonl"));
    config.gold = Some(dir.path().join("gold.jsonl"));
    config.questioners = vec!["a".into(), "c".into(), "d".into()];
    config.auto_exam = AutoExamPolicy::WithExam;
    config.xi = 0.55;
    config.eta = 0.5;
    config.backends = models
        .iter()
        .enumerate()
        .map(|(i, (id, _))| {
            let c = ScriptedConfig::new(0.8 + 0.04 * i as f64, i as u64);
            BackendSpec::scripted(*id, if i == 0 { c.with_bias(*id, 0.3) } else { c })
        })
        .collect();
    config.seed = 1234;

    let run_into = |name: &str, workers: usize| {
        let mut c = config.clone();
        c.out_dir = dir.path().join(name);
        c.workers = workers;
        let run = Run::new(c).unwrap();
        assert!(!pipeline::run_all(&run, false).unwrap());
        run
    };
    let first = run_into("first", 8);
    let second = run_into("second", 3);
    let mut a = files(&first.config.out_dir);
    let mut b = files(&second.config.out_dir);
    // The manifest carries wall-clock timestamps.
    a.remove("manifest.json");
    b.remove("manifest.json");
    let differing: Vec<&String> = a.keys().filter(|k| a.get(*k) != b.get(*k)).collect();
    let identical = a.keys().eq(b.keys()) && differing.is_empty();
    let same_fingerprint = first.config.fingerprint() == second.config.fingerprint();

    // Interrupt the review stage: keep a prefix of the store and a torn line.
    let mut c = config.clone();
    c.out_dir = dir.path().join("resumed");
    let resumed = Run::new(c).unwrap();
    pipeline::cmd_exam(&resumed).unwrap();
    let full = pipeline::cmd_review(&resumed, false).unwrap();
    let store = resumed.config.artifact(RECORDS);
    let text = std::fs::read_to_string(&store).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let keep = lines.len() * 2 / 5;
    std::fs::write(&store, format!("{}\n{}", lines[..keep].join("\n"), &lines[keep][..lines[keep].len() / 3])).unwrap();
    let again = pipeline::cmd_review(&resumed, true).unwrap();
    let uninterrupted: BTreeSet<String> = read_records(&first.config.artifact(RECORDS))
        .unwrap()
        .iter()
        .map(|r| serde_json::to_string(r).unwrap())
        .collect();
    let after: BTreeSet<String> = read_records(&store)
        .unwrap()
        .iter()
        .map(|r| serde_json::to_string(r).unwrap())
        .collect();
    let resume_ok = after == uninterrupted && again.summary.skipped == keep && again.summary.executed == full.jobs - keep;

    let pass = identical && same_fingerprint && resume_ok;
    verdict_line(
        9,
        "determinism and resume",
        pass,
        &format!(
            "{} artifacts compared, differing {differing:?}; fingerprints equal: {same_fingerprint}; \
             resume kept {keep} of {} records, ran {}, set equal: {}",
            a.len(),
            full.jobs,
            again.summary.executed,
            after == uninterrupted
        ),
    );
    assert!(pass);
}
