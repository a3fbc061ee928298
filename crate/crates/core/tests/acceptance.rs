//! One PASS/FAIL line per acceptance criterion. Exits nonzero if any criterion fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dynrank::baselines::{cross_optimize_table, stat_depth, stat_div, stat_util, width_sweep};
use dynrank::gains::dynamic_utility_expected;
use dynrank::greedy::{approximation_bound, brute_force_optimal};
use dynrank::io::{load_corpus, LoadOptions};
use dynrank::learn::{predict_case, train, Termination, TrainJob};
use dynrank::synth::{gen_synthetic, SynthParams};
use dynrank::toy::toy_ranking;
use dynrank::usermodel::{truncated_metric, user_path};
use dynrank::{
    greedy_two_level, ConcaveGain, Document, DocumentId, GainSpec, GreedyOptions,
    IntentDistribution, JudgmentMatrix, QueryCase, Row, ShapeParams, TwoLevelRanking,
};

const TOY_TOL: f64 = 1e-9;
const TOY_TIME: Duration = Duration::from_secs(1);
const BOUND_INSTANCES: usize = 200;
const BOUND_TIME: Duration = Duration::from_secs(120);
const SUBMOD_TRIPLES: usize = 1000;
const SUBMOD_SLACK: f64 = 1e-9;
const MODULAR_INSTANCES: usize = 100;
const MODULAR_TOL: f64 = 1e-12;
const CROSSTAB_TOL: f64 = 1e-9;
const CROSSTAB_TIME: Duration = Duration::from_secs(60);
const ORDER_TOL: f64 = 1e-9;
const SSVM_EPSILON: f64 = 1e-3;
const SSVM_TRACE_TOL: f64 = 1e-9;
const SSVM_TRAIN_RATIO: f64 = 0.9;
const SSVM_TEST_RATIO: f64 = 0.75;
const SSVM_TIME: Duration = Duration::from_secs(300);

const GAINS: [&str; 5] = ["prec", "sqrt", "log", "sat1", "sat2"];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn toy_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/toy.corpus")
}

fn spec(g: &str) -> GainSpec {
    g.parse().expect("known gain")
}

/// Random case with `n` documents, up to four intents, grades in {0, 1, 2}.
fn random_case(rng: &mut ChaCha8Rng, n: usize) -> QueryCase {
    let m = rng.gen_range(1..=4);
    let docs = (0..n)
        .map(|d| Document::new(d, format!("d{}", d + 1)))
        .collect();
    let w: Vec<f64> = (0..m).map(|_| rng.gen_range(1..=9) as f64).collect();
    let z: f64 = w.iter().sum();
    let probs = w.iter().map(|x| x / z).collect();
    let labels = (1..=m).map(|t| format!("t{t}")).collect();
    let rows = (0..m)
        .map(|_| (0..n).map(|_| rng.gen_range(0..3) as f64).collect())
        .collect();
    QueryCase::new(
        "r",
        docs,
        IntentDistribution::new(labels, probs).unwrap(),
        JudgmentMatrix::from_rows(rows).unwrap(),
    )
    .unwrap()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let case = match load_corpus(&toy_path(), &LoadOptions::default()) {
        Ok(c) => c.into_iter().next().expect("one query"),
        Err(e) => return outcome(false, format!("toy corpus: {e}")),
    };
    let theta = toy_ranking();
    let ident = dynamic_utility_expected(&theta, &case, &spec("prec")).unwrap();
    let sat2 = dynamic_utility_expected(&theta, &case, &spec("sat2")).unwrap();
    let prec3 = truncated_metric(&theta, &case, &spec("prec"), 3).unwrap();
    let render = |t: usize| -> String {
        user_path(&theta, t, &case)
            .viewed
            .iter()
            .map(|&d| case.document(d).label.clone())
            .collect::<Vec<_>>()
            .join(" -> ")
    };
    let want_paths = [
        (2, "d7 -> d8 -> d9 -> d1 -> d4"),
        (3, "d7 -> d8 -> d9 -> d1 -> d4"),
        (0, "d7 -> d1 -> d2 -> d3 -> d4"),
        (1, "d7 -> d1 -> d4 -> d5 -> d6"),
    ];
    let paths_ok = want_paths.iter().all(|&(t, p)| render(t) == p);
    let elapsed = start.elapsed();
    let pass = (ident - 2.5).abs() <= TOY_TOL
        && (sat2 - 2.0).abs() <= TOY_TOL
        && (prec3 - 1.75).abs() <= TOY_TOL
        && paths_ok
        && elapsed < TOY_TIME;
    outcome(
        pass,
        format!(
            "IDENTITY {ident}, SAT2 {sat2}, PREC@3 {prec3}, paths {}, {elapsed:.2?}",
            if paths_ok { "match" } else { "differ" }
        ),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let bound = approximation_bound();
    let mut rng = ChaCha8Rng::seed_from_u64(20_110_702);
    let mut min_ratio = f64::INFINITY;
    let mut count = 0;
    let mut failures = 0;
    for _ in 0..BOUND_INSTANCES {
        let n = rng.gen_range(1..=7);
        let case = random_case(&mut rng, n);
        let shape = ShapeParams::new(rng.gen_range(1..=2), rng.gen_range(0..=1)).unwrap();
        for g in GAINS {
            let s = spec(g);
            let r = greedy_two_level(&case, &s, &shape, GreedyOptions::default()).unwrap();
            let gu = dynamic_utility_expected(&r, &case, &s).unwrap();
            let (_, best) = brute_force_optimal(&case, &s, &shape, u128::MAX).unwrap();
            count += 1;
            if best > 0.0 {
                let ratio = gu / best;
                min_ratio = min_ratio.min(ratio);
                if ratio < bound {
                    failures += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        failures == 0 && elapsed < BOUND_TIME,
        format!(
            "{count} instance/gain pairs, empirical min ratio {min_ratio:.6} (bound {bound:.4}), {elapsed:.2?}"
        ),
    )
}

fn value(case: &QueryCase, s: &GainSpec, rows: &[Row]) -> f64 {
    dynamic_utility_expected(&TwoLevelRanking::from_rows(rows.to_vec()), case, s).unwrap()
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for i in 0..SUBMOD_TRIPLES {
        let n = rng.gen_range(3..=10);
        let case = random_case(&mut rng, n);
        let s = spec(GAINS[i % GAINS.len()]);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let mut check = |fx: f64, fxu: f64, fy: f64, fyu: f64| {
            let dr = (fxu - fx) - (fyu - fy);
            let mono = (fyu - fy).min(fy - fx);
            worst = worst.min(dr).min(mono);
            if dr < -SUBMOD_SLACK || mono < -SUBMOD_SLACK {
                violations += 1;
            }
        };

        // Row sets: disjoint rows, X a random subset of Y, u a row outside Y.
        let mut rows = Vec::new();
        let mut it = perm.iter().copied();
        while let Some(h) = it.next() {
            let w = rng.gen_range(0..=2);
            let tail = it.by_ref().take(w).map(DocumentId).collect();
            rows.push(Row::with_tail(DocumentId(h), tail));
        }
        let u = rows.pop().expect("n >= 3");
        let y: Vec<Row> = rows.iter().filter(|_| rng.gen_bool(0.7)).cloned().collect();
        let x: Vec<Row> = y.iter().filter(|_| rng.gen_bool(0.5)).cloned().collect();
        let plus = |set: &[Row], r: &Row| {
            let mut v = set.to_vec();
            v.push(r.clone());
            v
        };
        check(
            value(&case, &s, &x),
            value(&case, &s, &plus(&x, &u)),
            value(&case, &s, &y),
            value(&case, &s, &plus(&y, &u)),
        );

        // Tail sets of one head.
        let head = DocumentId(perm[0]);
        let du = DocumentId(perm[n - 1]);
        let yt: Vec<DocumentId> = perm[1..n - 1]
            .iter()
            .copied()
            .filter(|_| rng.gen_bool(0.7))
            .map(DocumentId)
            .collect();
        let xt: Vec<DocumentId> = yt.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
        let tv = |tail: &[DocumentId]| value(&case, &s, &[Row::with_tail(head, tail.to_vec())]);
        let tplus = |tail: &[DocumentId]| {
            let mut v = tail.to_vec();
            v.push(du);
            v
        };
        check(tv(&xt), tv(&tplus(&xt)), tv(&yt), tv(&tplus(&yt)));
    }
    outcome(
        violations == 0,
        format!(
            "{} row-set and {} tail-set triples, {violations} violations, worst margin {worst:.3e}",
            SUBMOD_TRIPLES, SUBMOD_TRIPLES
        ),
    )
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let s = spec("prec");
    let mut mismatches = 0;
    let mut max_diff: f64 = 0.0;
    for _ in 0..MODULAR_INSTANCES {
        let n = rng.gen_range(1..=7);
        let case = random_case(&mut rng, n);
        let shape = ShapeParams::new(rng.gen_range(1..=4), 0).unwrap();
        let r = stat_depth(&case, shape.length()).unwrap();
        let su = dynamic_utility_expected(&r, &case, &s).unwrap();
        let (_, best) = brute_force_optimal(&case, &s, &shape, u128::MAX).unwrap();
        let d = (su - best).abs();
        max_diff = max_diff.max(d);
        if d > MODULAR_TOL {
            mismatches += 1;
        }
    }
    outcome(
        mismatches == 0,
        format!(
            "{MODULAR_INSTANCES} instances, {mismatches} mismatches, max |diff| {max_diff:.2e}"
        ),
    )
}

/// The multi-intent synthetic family used for the aggregate criteria.
fn synthetic_family() -> Vec<QueryCase> {
    gen_synthetic(&SynthParams {
        n_queries: 50,
        n_intents: 4,
        n_docs: 50,
        zipf_s: 1.0,
        overlap: 0.3,
        irrelevant: 0.0,
        seed: 2011,
        text: false,
    })
    .expect("valid parameters")
}

fn criterion_5(cases: &[QueryCase]) -> Outcome {
    let start = Instant::now();
    let shape = ShapeParams::new(5, 2).unwrap();
    let table = cross_optimize_table(cases, &shape, true).unwrap();
    let mut bad = Vec::new();
    for (m, row) in table.iter().enumerate() {
        for (o, &v) in row.iter().enumerate() {
            if v > row[m] + CROSSTAB_TOL {
                bad.push(format!("eval {m} opt {o}: {v:.6} > {:.6}", row[m]));
            }
        }
    }
    let elapsed = start.elapsed();
    let diag: Vec<String> = (0..4).map(|m| format!("{:.4}", table[m][m])).collect();
    outcome(
        bad.is_empty() && elapsed < CROSSTAB_TIME,
        format!(
            "{} queries, diagonal [{}], {} off-diagonal excesses{}, {elapsed:.2?}",
            cases.len(),
            diag.join(", "),
            bad.len(),
            if bad.is_empty() {
                String::new()
            } else {
                format!(" ({})", bad.join("; "))
            }
        ),
    )
}

fn criterion_6(cases: &[QueryCase]) -> Outcome {
    let shape = ShapeParams::new(5, 2).unwrap();
    let k = 5;
    let mut failures = Vec::new();
    let mut summary = Vec::new();
    for g in ConcaveGain::standard_four() {
        let s = GainSpec::new(g.clone());
        let mean = |f: &dyn Fn(&QueryCase) -> TwoLevelRanking| -> f64 {
            cases
                .iter()
                .map(|c| truncated_metric(&f(c), c, &s, k).unwrap())
                .sum::<f64>()
                / cases.len() as f64
        };
        let dy = mean(&|c| greedy_two_level(c, &s, &shape, GreedyOptions::default()).unwrap());
        let su = mean(&|c| stat_util(c, &s, shape.length()).unwrap());
        let sd = mean(&|c| stat_div(c, shape.length()).unwrap());
        if !(dy >= su - ORDER_TOL && su >= sd - ORDER_TOL) {
            failures.push(format!(
                "{g}: Dyn {dy:.4}, Stat-Util {su:.4}, Stat-Div {sd:.4}"
            ));
        }
        let sweep = width_sweep(cases, &s, 5, &[0, 1, 2, 3, 4], k, true).unwrap();
        let series: Vec<String> = sweep.iter().map(|(_, m)| format!("{m:.4}")).collect();
        if sweep.windows(2).any(|p| p[1].1 < p[0].1 - ORDER_TOL) {
            failures.push(format!(
                "{g} width series not monotone: {}",
                series.join(" ")
            ));
        }
        summary.push(format!(
            "{g} {dy:.3}/{su:.3}/{sd:.3} W[{}]",
            series.join(" ")
        ));
    }
    outcome(
        failures.is_empty(),
        format!(
            "{}{}",
            summary.join("; "),
            if failures.is_empty() {
                String::new()
            } else {
                format!(" FAILURES: {}", failures.join("; "))
            }
        ),
    )
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let params = SynthParams {
        n_queries: 10,
        n_intents: 4,
        n_docs: 20,
        seed: 77,
        ..Default::default()
    };
    let train_cases = gen_synthetic(&params).unwrap();
    let test_cases = gen_synthetic(&SynthParams { seed: 78, ..params }).unwrap();
    let s = spec("sqrt");
    let shape = ShapeParams::new(5, 2).unwrap();
    let mut job = TrainJob::from_cases(&train_cases, s.clone(), shape).unwrap();
    job.c = 0.01;
    job.epsilon = SSVM_EPSILON;
    let report = match train(&job) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("training failed: {e}")),
    };
    let ratio = |cases: &[QueryCase]| -> f64 {
        let mut pred = 0.0;
        let mut best = 0.0;
        for c in cases {
            let p = predict_case(&report.weights, c, &job.template, &s, &shape).unwrap();
            pred += dynamic_utility_expected(&p, c, &s).unwrap();
            let g = greedy_two_level(c, &s, &shape, GreedyOptions::default()).unwrap();
            best += dynamic_utility_expected(&g, c, &s).unwrap();
        }
        pred / best
    };
    let train_ratio = ratio(&train_cases);
    let test_ratio = ratio(&test_cases);
    let monotone = report
        .dual_objective_trace
        .windows(2)
        .all(|p| p[1] >= p[0] - SSVM_TRACE_TOL);
    let elapsed = start.elapsed();
    let tolerance = report.terminated_by == Termination::Tolerance;
    let pass = tolerance
        && report.max_working_set_violation <= SSVM_EPSILON
        && monotone
        && train_ratio >= SSVM_TRAIN_RATIO
        && test_ratio >= SSVM_TEST_RATIO
        && elapsed < SSVM_TIME;
    outcome(
        pass,
        format!(
            "terminated by {:?} after {} passes, {} constraints, max violation {:.2e}, trace {}, train ratio {train_ratio:.4}, held-out ratio {test_ratio:.4}, {elapsed:.2?}",
            report.terminated_by,
            report.dual_objective_trace.len() + 1,
            report.constraints.len(),
            report.max_working_set_violation,
            if monotone { "non-decreasing" } else { "DECREASES" },
        ),
    )
}

fn dynrank(args: &[&str]) -> (bool, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_dynrank"))
        .args(args)
        .output()
        .expect("spawn dynrank");
    (out.status.success(), out.stdout)
}

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    let toy = toy_path().to_str().unwrap().to_string();
    let theta = p("theta.txt");
    std::fs::write(&theta, "toy\td7:d8,d9 d1:d2,d3 d4:d5,d6\n").unwrap();
    let synth = p("synth.corpus");
    let gen = [
        "gen",
        "--n-queries",
        "12",
        "--n-intents",
        "3",
        "--n-docs",
        "15",
        "--seed",
        "5",
        "--out",
        &synth,
    ];
    if !dynrank(&gen).0 {
        return outcome(false, "gen failed");
    }

    let mut failures = Vec::new();
    let mut runs = 0;
    for mode in ["serial", "parallel"] {
        let extra: &[&str] = if mode == "parallel" {
            &["--parallel", "--threads", "4"]
        } else {
            &[]
        };
        let model = p(&format!("{mode}.model"));
        let gen_out = p(&format!("{mode}.gen.corpus"));
        let commands: Vec<Vec<&str>> = vec![
            vec!["gen", "--n-queries", "5", "--seed", "9", "--out", &gen_out],
            vec!["rank", "--corpus", &synth, "--g", "sqrt"],
            vec![
                "rank", "--corpus", &synth, "--method", "dyn-rand", "--seed", "3",
            ],
            vec![
                "evaluate",
                "--corpus",
                &toy,
                "--rankings",
                &theta,
                "--k",
                "3",
                "--g",
                "prec",
            ],
            vec!["evaluate", "--corpus", &synth, "--g", "sat2"],
            vec!["simulate", "--corpus", &synth],
            vec!["crosstab", "--corpus", &synth],
            vec!["compare", "--corpus", &synth, "--seed", "11"],
            vec!["sweep-width", "--corpus", &synth],
            vec![
                "train", "--corpus", &synth, "--C", "0.01", "--g", "sqrt", "--model", &model,
            ],
            vec!["predict", "--corpus", &synth, "--model", &model],
            vec![
                "oracle", "--corpus", &toy, "--g", "sat2", "--L", "2", "--W", "1",
            ],
        ];
        for cmd in commands {
            let flags = if cmd[0] == "gen" {
                &extra[extra.len().min(1)..]
            } else {
                extra
            };
            let args: Vec<&str> = cmd.iter().copied().chain(flags.iter().copied()).collect();
            let (ok1, out1) = dynrank(&args);
            let files1 = [&model, &gen_out].map(|f| std::fs::read(f).ok());
            let (ok2, out2) = dynrank(&args);
            let files2 = [&model, &gen_out].map(|f| std::fs::read(f).ok());
            runs += 2;
            if !(ok1 && ok2) {
                failures.push(format!("{mode} {}: nonzero exit", cmd[0]));
            } else if out1 != out2 || files1 != files2 {
                failures.push(format!("{mode} {}: outputs differ", cmd[0]));
            }
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "{runs} runs of 12 invocations covering all 10 subcommands, serial and parallel, {} nondeterministic{}",
            failures.len(),
            if failures.is_empty() {
                String::new()
            } else {
                format!(" ({})", failures.join("; "))
            }
        ),
    )
}

fn main() {
    let family = synthetic_family();
    let results = [
        ("toy-instance exactness", criterion_1()),
        ("approximation bound", criterion_2()),
        ("submodularity and monotonicity", criterion_3()),
        ("modular optimality", criterion_4()),
        (
            "cross-optimization diagonal dominance",
            criterion_5(&family),
        ),
        (
            "dynamic-vs-static ordering and width trend",
            criterion_6(&family),
        ),
        ("structural SVM contract", criterion_7()),
        ("CLI determinism", criterion_8()),
    ];
    let mut all = true;
    for (i, (name, r)) in results.iter().enumerate() {
        all &= r.pass;
        println!(
            "{} criterion {}: {name}: {}",
            if r.pass { "PASS" } else { "FAIL" },
            i + 1,
            r.detail
        );
    }
    if !all {
        std::process::exit(1);
    }
}
