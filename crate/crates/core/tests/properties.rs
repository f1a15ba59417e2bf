use std::collections::BTreeMap;

use peer_eval_core::bias::preference_gap;
use peer_eval_core::chair::{aggregate_pairwise, aggregate_pointwise, leaderboard, weighted_vote};
use peer_eval_core::corpus::{
    derive_gold_preferences, krippendorff_alpha, trim_extremes, AlphaMetric, Corpus, GoldLabel, GoldPreferences,
    GoldRecord, ModelOutput, Task, TaskKind,
};
use peer_eval_core::exam::{
    compute_weight, qualify, score_agreement, ExamItem, ExamPaper, ExamResult, ReviewerProfile, ScoredPair,
    WeightScheme,
};
use peer_eval_core::jobs::{build_jobs_for, ReviewJob, ReviewRecord};
use peer_eval_core::judgment::{parse_judgment, ParsedJudgment};
use peer_eval_core::metrics::{agreement, kendall_tau_b, spearman, PreferenceTable};
use peer_eval_core::prompt::render_prompt;
use peer_eval_core::{Choice, PromptSetting, TiePolicy, Verdict};
use proptest::prelude::*;

fn task(id: &str, kind: TaskKind) -> Task {
    Task {
        task_id: id.into(),
        instruction: "Summarize: {source}".into(),
        source: format!("source of {id}"),
        task_kind: kind,
    }
}

fn output(t: &str, e: &str, text: &str) -> ModelOutput {
    ModelOutput {
        task_id: t.into(),
        evaluatee_id: e.into(),
        text: text.into(),
        generation_meta: None,
    }
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

fn record(setting: PromptSetting, t: &str, subjects: &[&str], reviewer: &str, judgment: ParsedJudgment) -> ReviewRecord {
    ReviewRecord {
        job: ReviewJob::new(setting, t, subjects.iter().map(|s| s.to_string()).collect(), reviewer),
        judgment,
        latency: 0.0,
        attempt_count: 1,
    }
}

// Corpus of `scores.len()` tasks with pointwise gold; `scores[t][e]` for evaluatee `e{e}`.
fn gold_corpus(scores: &[Vec<u8>]) -> Corpus {
    let mut tasks = Vec::new();
    let mut outputs = Vec::new();
    let mut gold = Vec::new();
    for (t, row) in scores.iter().enumerate() {
        let tid = format!("t{t}");
        tasks.push(task(&tid, TaskKind::Summarization));
        for (e, s) in row.iter().enumerate() {
            let eid = format!("e{e}");
            outputs.push(output(&tid, &eid, "text"));
            gold.push(GoldLabel::Pointwise {
                task_id: tid.clone(),
                evaluatee_id: eid,
                score: *s,
                annotator_scores: None,
            });
        }
    }
    Corpus::new(tasks, outputs, gold).unwrap()
}

fn score_grid() -> impl Strategy<Value = Vec<Vec<u8>>> {
    (2usize..5).prop_flat_map(|k| prop::collection::vec(prop::collection::vec(1u8..=5, k), 1..6))
}

proptest! {
    #[test]
    fn derived_gold_is_antisymmetric(grid in score_grid()) {
        let corpus = gold_corpus(&grid);
        let prefs = GoldPreferences::from_labels(&derive_gold_preferences(&corpus));
        for (t, row) in grid.iter().enumerate() {
            let tid = format!("t{t}");
            for a in 0..row.len() {
                for b in 0..row.len() {
                    if a == b {
                        continue;
                    }
                    let (ea, eb) = (format!("e{a}"), format!("e{b}"));
                    let ab = prefs.get(&tid, &ea, &eb).unwrap();
                    prop_assert_eq!(ab, prefs.get(&tid, &eb, &ea).unwrap().flip());
                    prop_assert_eq!(ab, Verdict::from_scores(f64::from(row[a]), f64::from(row[b])));
                }
            }
        }
    }

    #[test]
    fn alpha_ignores_item_order(
        items in prop::collection::vec(prop::collection::vec(1u8..=5, 2..4), 2..10).prop_shuffle(),
        seed in any::<u64>(),
    ) {
        let units: Vec<Vec<f64>> = items.iter().map(|u| u.iter().map(|v| f64::from(*v)).collect()).collect();
        let mut permuted = units.clone();
        permuted.rotate_left((seed % units.len() as u64) as usize);
        permuted.reverse();
        for metric in [AlphaMetric::Nominal, AlphaMetric::Interval, AlphaMetric::Ordinal] {
            match (krippendorff_alpha(&units, metric), krippendorff_alpha(&permuted, metric)) {
                (Ok(a), Ok(b)) => prop_assert!((a - b).abs() < 1e-12),
                (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
            }
        }
    }

    #[test]
    fn interval_alpha_ignores_affine_rescaling(
        items in prop::collection::vec(prop::collection::vec(1u8..=5, 2..4), 2..10),
        scale in 0.1f64..10.0,
        shift in -50.0f64..50.0,
    ) {
        let units: Vec<Vec<f64>> = items.iter().map(|u| u.iter().map(|v| f64::from(*v)).collect()).collect();
        let moved: Vec<Vec<f64>> = units.iter().map(|u| u.iter().map(|v| scale * v + shift).collect()).collect();
        if let Ok(a) = krippendorff_alpha(&units, AlphaMetric::Interval) {
            let b = krippendorff_alpha(&moved, AlphaMetric::Interval).unwrap();
            prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b);
        }
    }

    #[test]
    fn trimming_drops_two_and_stays_in_range(v in prop::collection::vec(-100.0f64..100.0, 3..20)) {
        let kept = trim_extremes(&v).unwrap();
        prop_assert_eq!(kept.len(), v.len() - 2);
        let mean = kept.iter().sum::<f64>() / kept.len() as f64;
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(lo - 1e-12 <= mean && mean <= hi + 1e-12);
    }

    #[test]
    fn gold_labels_survive_persistence(
        pointwise in any::<bool>(),
        score in 1u8..=5,
        verdict in prop_oneof![Just(Verdict::First), Just(Verdict::Second), Just(Verdict::Tie)],
        annotations in prop::option::of(prop::collection::vec((-6i32..=6).prop_map(|v| f64::from(v) / 2.0), 1..6)),
    ) {
        let label = if pointwise {
            GoldLabel::Pointwise {
                task_id: "t/1".into(),
                evaluatee_id: "m\"x".into(),
                score,
                annotator_scores: annotations,
            }
        } else {
            GoldLabel::Preference {
                task_id: "t1".into(),
                first_id: "a".into(),
                second_id: "b".into(),
                verdict,
                annotator_scores: annotations,
            }
        };
        let line = serde_json::to_string(&GoldRecord::from(&label)).unwrap();
        let back: GoldRecord = serde_json::from_str(&line).unwrap();
        prop_assert_eq!(GoldLabel::try_from(back).unwrap(), label);
    }
}

fn any_text() -> impl Strategy<Value = String> {
    prop::string::string_regex("[a-zA-Z0-9 .,{}\\n-]{0,40}").unwrap()
}

fn any_setting() -> impl Strategy<Value = PromptSetting> {
    prop_oneof![
        Just(PromptSetting::Pairwise),
        Just(PromptSetting::Point5),
        Just(PromptSetting::Point100)
    ]
}

proptest! {
    #[test]
    fn prompts_are_pure(setting in any_setting(), source in any_text(), a in any_text(), b in any_text(), qa in any::<bool>()) {
        let mut t = task("t", if qa { TaskKind::Qa } else { TaskKind::Summarization });
        t.source = source;
        let (oa, ob) = (output("t", "a", &a), output("t", "b", &b));
        let outs: Vec<&ModelOutput> = if setting.is_pairwise() { vec![&oa, &ob] } else { vec![&oa] };
        let first = render_prompt(setting, &t, &outs).unwrap();
        prop_assert_eq!(first, render_prompt(setting, &t, &outs).unwrap());
    }

    #[test]
    fn echoed_answers_parse_back(
        setting in any_setting(),
        pick in any::<u8>(),
        wrapper in prop_oneof![Just("{}"), Just("{}."), Just("Output: {}"), Just("  {}\n"), Just("Score: {} points")],
    ) {
        if setting.is_pairwise() {
            let choice = if pick % 2 == 0 { Choice::One } else { Choice::Two };
            let raw = wrapper.replace("{}", choice.as_str());
            prop_assert_eq!(parse_judgment(&raw, setting).preference, Some(choice));
        } else {
            let (lo, hi) = setting.rating_range().unwrap();
            let value = lo + pick % (hi - lo + 1);
            let raw = wrapper.replace("{}", &value.to_string());
            prop_assert_eq!(parse_judgment(&raw, setting).rating, Some(value));
        }
    }

    #[test]
    fn parsed_ratings_stay_in_range(raw in ".{0,60}", setting in any_setting()) {
        let parsed = parse_judgment(&raw, setting);
        prop_assert!(parsed.matches_setting(setting));
        if let (Some(r), Some((lo, hi))) = (parsed.rating, setting.rating_range()) {
            prop_assert!(lo <= r && r <= hi);
        }
    }
}

fn verdict() -> impl Strategy<Value = Verdict> {
    prop_oneof![Just(Verdict::First), Just(Verdict::Second), Just(Verdict::Tie)]
}

fn answer() -> impl Strategy<Value = Option<Choice>> {
    prop_oneof![Just(None), Just(Some(Choice::One)), Just(Some(Choice::Two))]
}

fn to_judgment(a: Option<Choice>) -> ParsedJudgment {
    match a {
        Some(c) => ParsedJudgment::preference(c, c.as_str()),
        None => ParsedJudgment::unparseable("?"),
    }
}

proptest! {
    #[test]
    fn pairwise_exam_score_ignores_item_order(
        rows in prop::collection::vec((verdict(), answer()), 1..30),
        rotate in any::<usize>(),
    ) {
        prop_assume!(rows.iter().any(|(g, _)| *g != Verdict::Tie));
        let paper = |rows: &[(Verdict, Option<Choice>)]| ExamPaper {
            setting: PromptSetting::Pairwise,
            items: rows
                .iter()
                .enumerate()
                .map(|(i, (g, _))| ExamItem::Pairwise {
                    task_id: format!("t{i}"),
                    first_id: "a".into(),
                    second_id: "b".into(),
                    gold: *g,
                })
                .collect(),
            pairs: Vec::new(),
        };
        let answers = |rows: &[(Verdict, Option<Choice>)]| rows.iter().map(|(_, a)| to_judgment(*a)).collect::<Vec<_>>();
        let mut moved = rows.clone();
        moved.rotate_left(rotate % rows.len());
        moved.reverse();
        for policy in [TiePolicy::Half, TiePolicy::Zero, TiePolicy::Exact] {
            let a = score_agreement(&answers(&rows), &paper(&rows), policy).unwrap();
            let b = score_agreement(&answers(&moved), &paper(&moved), policy).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn pointwise_exam_score_ignores_item_order(
        ratings in prop::collection::vec(prop::option::of(1u8..=5), 2..10),
        gold in prop::collection::vec(1u8..=5, 10),
        rotate in any::<usize>(),
    ) {
        let n = ratings.len();
        let items: Vec<ExamItem> = (0..n)
            .map(|i| ExamItem::Pointwise { task_id: "t".into(), evaluatee_id: format!("e{i}"), gold_level: gold[i] })
            .collect();
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                pairs.push(ScoredPair {
                    first_item: i,
                    second_item: j,
                    gold: Verdict::from_scores(f64::from(gold[i]), f64::from(gold[j])),
                });
            }
        }
        prop_assume!(pairs.iter().any(|p| p.gold != Verdict::Tie));
        let answers: Vec<ParsedJudgment> = ratings
            .iter()
            .map(|r| r.map_or_else(|| ParsedJudgment::unparseable("?"), |v| ParsedJudgment::rating(v, "")))
            .collect();
        let exam = ExamPaper { setting: PromptSetting::Point5, items, pairs };

        // Item k of the permuted paper is item perm[k] of the original.
        let mut perm: Vec<usize> = (0..n).collect();
        perm.rotate_left(rotate % n);
        perm.reverse();
        let mut position = vec![0; n];
        for (k, &i) in perm.iter().enumerate() {
            position[i] = k;
        }
        let moved = ExamPaper {
            setting: PromptSetting::Point5,
            items: perm.iter().map(|&i| exam.items[i].clone()).collect(),
            pairs: exam
                .pairs
                .iter()
                .rev()
                .map(|p| ScoredPair { first_item: position[p.first_item], second_item: position[p.second_item], gold: p.gold })
                .collect(),
        };
        let moved_answers: Vec<ParsedJudgment> = perm.iter().map(|&i| answers[i].clone()).collect();
        let a = score_agreement(&answers, &exam, TiePolicy::Half).unwrap();
        let b = score_agreement(&moved_answers, &moved, TiePolicy::Half).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn log_odds_weight_is_monotone_and_odd(p in 0.02f64..0.98, q in 0.02f64..0.98) {
        let w = |x| compute_weight(x, WeightScheme::LogOdds, 0.02);
        if p < q {
            prop_assert!(w(p) < w(q));
        }
        prop_assert!((w(p) + w(1.0 - p)).abs() < 1e-12);
        prop_assert!(w(p).is_finite());
    }

    #[test]
    fn qualification_extremes(agreements in prop::collection::vec(0.0f64..=1.0, 1..8)) {
        let results: Vec<ExamResult> = agreements
            .iter()
            .enumerate()
            .map(|(i, a)| ExamResult { reviewer_id: format!("r{i}"), agreement: *a })
            .collect();
        let all = qualify(&results, PromptSetting::Pairwise, 0.0, WeightScheme::LogOdds, 0.02);
        prop_assert!(all.iter().all(|p| p.passed && p.weight.is_finite()));
        let none = qualify(&results, PromptSetting::Pairwise, 1.0 + 1e-9, WeightScheme::LogOdds, 0.02);
        prop_assert!(none.iter().all(|p| !p.passed && p.weight == 0.0));
    }
}

// Point100 ratings in 0..=31 so that 3r + 7 stays on the scale.
fn pointwise_store() -> impl Strategy<Value = Vec<ReviewRecord>> {
    (2usize..5, 1usize..6, 2usize..5).prop_flat_map(|(reviewers, tasks, evaluatees)| {
        prop::collection::vec(prop::option::of(0u8..=31), reviewers * tasks * evaluatees).prop_map(move |ratings| {
            let mut records = Vec::new();
            let mut it = ratings.into_iter();
            for r in 0..reviewers {
                for t in 0..tasks {
                    for e in 0..evaluatees {
                        let judgment = match it.next().unwrap() {
                            Some(v) => ParsedJudgment::rating(v, v.to_string()),
                            None => ParsedJudgment::unparseable("n/a"),
                        };
                        records.push(record(
                            PromptSetting::Point100,
                            &format!("t{t}"),
                            &[&format!("e{e}")],
                            &format!("r{r}"),
                            judgment,
                        ));
                    }
                }
            }
            records
        })
    })
}

fn pairwise_store() -> impl Strategy<Value = Vec<ReviewRecord>> {
    (1usize..6, 1usize..5).prop_flat_map(|(reviewers, tasks)| {
        prop::collection::vec(answer(), reviewers * tasks * 6).prop_map(move |answers| {
            let mut records = Vec::new();
            let mut it = answers.into_iter();
            let pairs = [("a", "b"), ("b", "a"), ("a", "c"), ("c", "a"), ("b", "c"), ("c", "b")];
            for r in 0..reviewers {
                for t in 0..tasks {
                    for (x, y) in pairs {
                        let j = to_judgment(it.next().unwrap());
                        records.push(record(PromptSetting::Pairwise, &format!("t{t}"), &[x, y], &format!("r{r}"), j));
                    }
                }
            }
            records
        })
    })
}

fn weights(n: usize, raw: &[f64], setting: PromptSetting) -> Vec<ReviewerProfile> {
    (0..n).map(|r| profile(&format!("r{r}"), raw[r % raw.len()], setting)).collect()
}

proptest! {
    #[test]
    fn pointwise_scores_ignore_affine_rater_shifts(store in pointwise_store(), raw in prop::collection::vec(0.1f64..5.0, 5)) {
        let profiles = weights(5, &raw, PromptSetting::Point100);
        let Ok(base) = aggregate_pointwise(&store, &profiles, PromptSetting::Point100) else {
            return Ok(());
        };
        let shifted: Vec<ReviewRecord> = store
            .iter()
            .cloned()
            .map(|mut r| {
                if r.job.reviewer_id == "r0" {
                    if let Some(v) = r.judgment.rating {
                        r.judgment = ParsedJudgment::rating(3 * v + 7, "");
                    }
                }
                r
            })
            .collect();
        let moved = aggregate_pointwise(&shifted, &profiles, PromptSetting::Point100).unwrap();
        prop_assert_eq!(base.scores.len(), moved.scores.len());
        for (a, b) in base.scores.iter().zip(&moved.scores) {
            prop_assert!((a.score.unwrap() - b.score.unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn scaling_every_weight_changes_nothing(
        points in pointwise_store(),
        pairs in pairwise_store(),
        raw in prop::collection::vec(0.1f64..5.0, 5),
        c in 0.01f64..100.0,
    ) {
        let scaled: Vec<f64> = raw.iter().map(|w| w * c).collect();
        if let Ok(a) = aggregate_pointwise(&points, &weights(5, &raw, PromptSetting::Point100), PromptSetting::Point100) {
            let b = aggregate_pointwise(&points, &weights(5, &scaled, PromptSetting::Point100), PromptSetting::Point100).unwrap();
            for (x, y) in a.scores.iter().zip(&b.scores) {
                prop_assert!((x.score.unwrap() - y.score.unwrap()).abs() < 1e-9);
            }
        }
        let a = aggregate_pairwise(&pairs, &weights(5, &raw, PromptSetting::Pairwise)).unwrap();
        let b = aggregate_pairwise(&pairs, &weights(5, &scaled, PromptSetting::Pairwise)).unwrap();
        let verdicts = |s: &[peer_eval_core::chair::AggregateScore]| s.iter().map(|x| x.verdict).collect::<Vec<_>>();
        prop_assert_eq!(verdicts(&a), verdicts(&b));
    }

    #[test]
    fn uniform_weights_are_majority_vote(pairs in pairwise_store()) {
        let scores = aggregate_pairwise(&pairs, &weights(5, &[1.0], PromptSetting::Pairwise)).unwrap();
        for s in &scores {
            let votes: Vec<Choice> = pairs
                .iter()
                .filter(|r| r.job.task_id == s.task_id && r.job.subject_ids == s.subject_ids)
                .filter_map(|r| r.judgment.preference)
                .collect();
            let ones = votes.iter().filter(|c| **c == Choice::One).count();
            let twos = votes.len() - ones;
            let majority = Verdict::from_scores(ones as f64, twos as f64);
            prop_assert_eq!(s.verdict, Some(majority));
        }
    }

    #[test]
    fn aggregation_ignores_record_order(
        points in pointwise_store().prop_shuffle(),
        pairs in pairwise_store(),
        seed in any::<usize>(),
    ) {
        let mut moved_points = points.clone();
        moved_points.reverse();
        let mut moved_pairs = pairs.clone();
        moved_pairs.rotate_left(seed % pairs.len());
        let profiles = weights(5, &[0.7, 1.3, 2.0], PromptSetting::Point100);
        prop_assert_eq!(
            aggregate_pointwise(&points, &profiles, PromptSetting::Point100),
            aggregate_pointwise(&moved_points, &profiles, PromptSetting::Point100)
        );
        let profiles = weights(5, &[0.7, 1.3, 2.0], PromptSetting::Pairwise);
        let a = aggregate_pairwise(&pairs, &profiles).unwrap();
        prop_assert_eq!(&a, &aggregate_pairwise(&moved_pairs, &profiles).unwrap());
        let board = leaderboard(&a, PromptSetting::Pairwise);
        prop_assert!(board.entries.windows(2).all(|w| w[0].score >= w[1].score && w[0].rank <= w[1].rank));
    }

    #[test]
    fn vote_ties_are_scale_free(n_one in 0u32..5, n_two in 0u32..5, c in 1e-6f64..1e6) {
        let votes = (0..n_one).map(|_| (Choice::One, c)).chain((0..n_two).map(|_| (Choice::Two, c)));
        prop_assert_eq!(weighted_vote(votes), Verdict::from_scores(f64::from(n_one), f64::from(n_two)));
    }
}

fn rank_input() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..12).prop_flat_map(|n| {
        (
            prop::collection::vec((-10i32..10).prop_map(f64::from), n),
            prop::collection::vec((-10i32..10).prop_map(f64::from), n),
        )
    })
}

proptest! {
    #[test]
    fn rank_correlations_symmetric_and_monotone((x, y) in rank_input()) {
        let bend = |v: &[f64]| v.iter().map(|a| a.exp() + a * a * a).collect::<Vec<f64>>();
        for f in [kendall_tau_b, spearman] {
            match f(&x, &y) {
                Ok(r) => {
                    prop_assert!((r - f(&y, &x).unwrap()).abs() < 1e-12);
                    prop_assert!((r - f(&bend(&x), &y).unwrap()).abs() < 1e-12);
                    prop_assert!((r - f(&x, &bend(&y)).unwrap()).abs() < 1e-12);
                }
                Err(_) => prop_assert!(f(&y, &x).is_err()),
            }
        }
    }

    #[test]
    fn agreement_is_bounded_and_self_agreement_is_one(rows in prop::collection::vec(verdict(), 1..20), other in prop::collection::vec(verdict(), 20)) {
        prop_assume!(rows.iter().any(|v| *v != Verdict::Tie));
        let mut labels = Vec::new();
        let mut table = PreferenceTable::default();
        let mut noisy = PreferenceTable::default();
        for (i, v) in rows.iter().enumerate() {
            let t = format!("t{i}");
            labels.push(GoldLabel::Preference {
                task_id: t.clone(),
                first_id: "a".into(),
                second_id: "b".into(),
                verdict: *v,
                annotator_scores: None,
            });
            table.insert(&t, "a", "b", *v);
            table.insert(&t, "b", "a", v.flip());
            noisy.insert(&t, "a", "b", other[i]);
        }
        let gold = GoldPreferences::from_labels(&labels);
        for policy in [TiePolicy::Half, TiePolicy::Zero, TiePolicy::Exact] {
            prop_assert_eq!(agreement(&table, &gold, policy).unwrap().agreement, 1.0);
            let a = agreement(&noisy, &gold, policy).unwrap().agreement;
            prop_assert!((0.0..=1.0).contains(&a));
        }
    }

    #[test]
    fn preference_gap_is_symmetric(
        by_i in prop::collection::vec((any::<bool>(), any::<bool>()), 1..20),
        by_j in prop::collection::vec((any::<bool>(), any::<bool>()), 1..20),
        pointwise in prop::collection::vec((1u8..=5, 1u8..=5, 1u8..=5, 1u8..=5), 1..20),
    ) {
        let choice = |b: bool| if b { Choice::One } else { Choice::Two };
        let mut records = Vec::new();
        for (reviewer, rows) in [("i", &by_i), ("j", &by_j)] {
            for (t, (fwd, rev)) in rows.iter().enumerate() {
                let t = format!("t{t}");
                records.push(record(PromptSetting::Pairwise, &t, &["i", "j"], reviewer, ParsedJudgment::preference(choice(*fwd), "")));
                records.push(record(PromptSetting::Pairwise, &t, &["j", "i"], reviewer, ParsedJudgment::preference(choice(*rev), "")));
            }
        }
        let a = preference_gap(&records, "i", "j").unwrap();
        prop_assert!((a - preference_gap(&records, "j", "i").unwrap()).abs() < 1e-12);

        let mut ratings = Vec::new();
        for (t, (ii, ij, ji, jj)) in pointwise.iter().enumerate() {
            let t = format!("t{t}");
            for (reviewer, subject, v) in [("i", "i", ii), ("i", "j", ij), ("j", "i", ji), ("j", "j", jj)] {
                ratings.push(record(PromptSetting::Point5, &t, &[subject], reviewer, ParsedJudgment::rating(*v, "")));
            }
        }
        match (preference_gap(&ratings, "i", "j"), preference_gap(&ratings, "j", "i")) {
            (Ok(x), Ok(y)) => prop_assert!((x - y).abs() < 1e-12),
            (x, y) => prop_assert_eq!(x.is_err(), y.is_err()),
        }
    }
}

fn id_part() -> impl Strategy<Value = String> {
    prop::string::string_regex("[ab/>%]{1,3}").unwrap()
}

proptest! {
    #[test]
    fn job_ids_collide_only_with_equal_fields(
        a in (id_part(), prop::collection::vec(id_part(), 1..=2), id_part()),
        b in (id_part(), prop::collection::vec(id_part(), 1..=2), id_part()),
    ) {
        let setting = |s: &Vec<String>| if s.len() == 2 { PromptSetting::Pairwise } else { PromptSetting::Point5 };
        let ja = ReviewJob::new(setting(&a.1), &a.0, a.1.clone(), &a.2);
        let jb = ReviewJob::new(setting(&b.1), &b.0, b.1.clone(), &b.2);
        prop_assert_eq!(ja.job_id == jb.job_id, a == b);
    }

    #[test]
    fn pairwise_jobs_close_under_reversal(tasks in 1usize..4, evaluatees in 2usize..5) {
        let mut ts = Vec::new();
        let mut outs = Vec::new();
        for t in 0..tasks {
            ts.push(task(&format!("t{t}"), TaskKind::Generic));
            for e in 0..evaluatees {
                outs.push(output(&format!("t{t}"), &format!("e{e}"), "x"));
            }
        }
        let corpus = Corpus::new(ts, outs, Vec::new()).unwrap();
        let jobs = build_jobs_for(&corpus, &["r1", "r2"], PromptSetting::Pairwise);
        prop_assert_eq!(&jobs, &build_jobs_for(&corpus, &["r1", "r2"], PromptSetting::Pairwise));
        let mut forward: BTreeMap<(String, Vec<String>, String), usize> = BTreeMap::new();
        for j in &jobs {
            prop_assert_ne!(&j.subject_ids[0], &j.subject_ids[1]);
            *forward.entry((j.task_id.clone(), j.subject_ids.clone(), j.reviewer_id.clone())).or_default() += 1;
        }
        for ((t, s, r), n) in &forward {
            let rev = vec![s[1].clone(), s[0].clone()];
            prop_assert_eq!(forward.get(&(t.clone(), rev, r.clone())), Some(n));
        }
    }
}
