use dynrank::features::FeatureTemplate;
use dynrank::gains::{dynamic_utility_expected, DynamicState, Extension};
use dynrank::greedy::{approximation_bound, brute_force_optimal};
use dynrank::io::{format_corpus, format_ranking, parse_corpus, parse_ranking, LoadOptions};
use dynrank::learn::{predict_case, Model};
use dynrank::ranking::validate_ranking;
use dynrank::{
    greedy_two_level, ConcaveGain, Document, DocumentId, GainSpec, GreedyOptions,
    IntentDistribution, JudgmentMatrix, Objective, QueryCase, Row, ShapeParams, TwoLevelRanking,
};
use proptest::collection::vec;
use proptest::prelude::*;

const GAINS: [&str; 5] = ["prec", "sqrt", "log", "sat1", "sat2"];

fn build_case(grades: Vec<Vec<u8>>, weights: Vec<u32>, text: Option<Vec<String>>) -> QueryCase {
    let n_docs = grades[0].len();
    let docs = (0..n_docs)
        .map(|d| {
            let doc = Document::new(d, format!("d{}", d + 1));
            match &text {
                Some(t) => doc.with_text(format!("title {d}"), t[d % t.len()].clone()),
                None => doc,
            }
        })
        .collect();
    let z: u32 = weights.iter().sum();
    let probs = weights.iter().map(|&w| w as f64 / z as f64).collect();
    let labels = (1..=grades.len()).map(|t| format!("t{t}")).collect();
    let intents = IntentDistribution::new(labels, probs).unwrap();
    let rows = grades
        .into_iter()
        .map(|r| r.into_iter().map(f64::from).collect())
        .collect();
    let judgments = JudgmentMatrix::from_rows(rows).unwrap();
    QueryCase::new("q", docs, intents, judgments).unwrap()
}

fn case_strategy(max_docs: usize) -> impl Strategy<Value = QueryCase> {
    (1..=max_docs, 1..=4usize)
        .prop_flat_map(|(n, m)| (vec(vec(0..3u8, n), m), vec(1..10u32, m)))
        .prop_map(|(g, w)| build_case(g, w, None))
}

fn shape_strategy() -> impl Strategy<Value = ShapeParams> {
    (1..=4usize, 0..=3usize).prop_map(|(l, w)| ShapeParams::new(l, w).unwrap())
}

fn gain_strategy() -> impl Strategy<Value = GainSpec> {
    (0..GAINS.len()).prop_map(|i| GAINS[i].parse().unwrap())
}

fn replay<'a>(state: &mut DynamicState<'a>, rows: &[Row]) -> f64 {
    for row in rows {
        let r = state.ranking().len();
        state.apply(Extension::NewRow(row.head)).unwrap();
        for &d in &row.tail {
            state
                .apply(Extension::AppendTail { row: r, doc: d })
                .unwrap();
        }
    }
    state.value()
}

fn rows_value(case: &QueryCase, spec: &GainSpec, rows: &[Row]) -> f64 {
    dynamic_utility_expected(&TwoLevelRanking::from_rows(rows.to_vec()), case, spec).unwrap()
}

/// Splits a permutation of the documents into rows with tails of length `widths[i]`.
fn rows_from(perm: &[usize], widths: &[usize]) -> Vec<Row> {
    let mut rows = Vec::new();
    let mut it = perm.iter().copied();
    for &w in widths {
        let Some(h) = it.next() else { break };
        let tail = it.by_ref().take(w).map(DocumentId).collect();
        rows.push(Row::with_tail(DocumentId(h), tail));
    }
    rows
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn greedy_output_is_valid_and_round_trips(case in case_strategy(9), shape in shape_strategy(), spec in gain_strategy()) {
        let r = greedy_two_level(&case, &spec, &shape, GreedyOptions::default()).unwrap();
        prop_assert!(validate_ranking(&r, &case, &shape).is_ok());
        prop_assert_eq!(r.n_documents(), case.n_docs().min(shape.length() * (shape.width() + 1)));
        let text = format_ranking(&r, &case).unwrap();
        prop_assert_eq!(parse_ranking(&text, &case).unwrap(), r);
    }

    #[test]
    fn incremental_cache_matches_direct_evaluation(case in case_strategy(9), shape in shape_strategy(), spec in gain_strategy()) {
        let r = greedy_two_level(&case, &spec, &shape, GreedyOptions::default()).unwrap();
        let obj = Objective::from_case(&case);
        let mut state = DynamicState::new(&obj, &spec);
        let v = replay(&mut state, &r.rows);
        let direct = dynamic_utility_expected(&r, &case, &spec).unwrap();
        prop_assert!((v - direct).abs() < 1e-9, "{} vs {}", v, direct);
    }

    #[test]
    fn lazy_plain_and_parallel_agree(case in case_strategy(9), shape in shape_strategy(), spec in gain_strategy(), soz in any::<bool>()) {
        let base = GreedyOptions { stop_on_zero: soz, ..Default::default() };
        let plain = greedy_two_level(&case, &spec, &shape, base).unwrap();
        let lazy = greedy_two_level(&case, &spec, &shape, GreedyOptions { lazy: true, ..base }).unwrap();
        let par = greedy_two_level(&case, &spec, &shape, GreedyOptions { parallel: true, ..base }).unwrap();
        prop_assert_eq!(&plain, &lazy);
        prop_assert_eq!(&plain, &par);
    }

    #[test]
    fn outer_iterations_never_lose_utility(case in case_strategy(9), shape in shape_strategy(), spec in gain_strategy()) {
        let r = greedy_two_level(&case, &spec, &shape, GreedyOptions::default()).unwrap();
        let mut prev = 0.0;
        for k in 1..=r.len() {
            let v = rows_value(&case, &spec, &r.rows[..k]);
            prop_assert!(v >= prev - 1e-12);
            prev = v;
        }
    }

    #[test]
    fn row_and_tail_sets_are_submodular(
        (case, perm, widths, split, extra) in (2..=8usize, 1..=3usize).prop_flat_map(|(n, m)| (
            vec(vec(0..3u8, n), m),
            vec(1..10u32, m),
            Just((0..n).collect::<Vec<usize>>()).prop_shuffle(),
            vec(0..=2usize, n),
            0..=n,
            0..=n,
        )).prop_map(|(g, w, perm, widths, split, extra)| (build_case(g, w, None), perm, widths, split, extra)),
        spec in gain_strategy(),
    ) {
        let rows = rows_from(&perm, &widths);
        prop_assume!(rows.len() >= 2);
        // Rows: X = first `a` rows, Y = all but the last, u = the last.
        let (u, y) = rows.split_last().unwrap();
        let a = split.min(y.len());
        let x = &y[..a];
        let with = |s: &[Row]| { let mut v = s.to_vec(); v.push(u.clone()); v };
        let gain_x = rows_value(&case, &spec, &with(x)) - rows_value(&case, &spec, x);
        let gain_y = rows_value(&case, &spec, &with(y)) - rows_value(&case, &spec, y);
        prop_assert!(gain_x >= gain_y - 1e-9);
        prop_assert!(gain_y >= -1e-9);

        // Tails of one head: X = first `a` tail docs, Y = first `b`, u = a later doc.
        let head = DocumentId(perm[0]);
        let rest: Vec<DocumentId> = perm[1..].iter().copied().map(DocumentId).collect();
        prop_assume!(!rest.is_empty());
        let b = extra.min(rest.len() - 1);
        let a = split.min(b);
        let du = rest[rest.len() - 1];
        let tv = |tail: &[DocumentId]| rows_value(&case, &spec, &[Row::with_tail(head, tail.to_vec())]);
        let plus = |tail: &[DocumentId]| { let mut v = tail.to_vec(); v.push(du); v };
        let gx = tv(&plus(&rest[..a])) - tv(&rest[..a]);
        let gy = tv(&plus(&rest[..b])) - tv(&rest[..b]);
        prop_assert!(gx >= gy - 1e-9);
        prop_assert!(gy >= -1e-9);
    }

    #[test]
    fn corpus_round_trip(
        case in (1..=6usize, 1..=3usize)
            .prop_flat_map(|(n, m)| (vec(vec(0..3u8, n), m), vec(1..10u32, m), vec("[a-z \\t\\n\\\\]{0,12}", 1..4)))
            .prop_map(|(g, w, t)| build_case(g, w, Some(t))),
    ) {
        let text = format_corpus(std::slice::from_ref(&case));
        let back = parse_corpus(&text, &LoadOptions::default()).unwrap();
        prop_assert_eq!(back, vec![case]);
    }

    #[test]
    fn greedy_within_bound_of_optimum(case in case_strategy(6), l in 1..=2usize, w in 0..=1usize, spec in gain_strategy()) {
        let shape = ShapeParams::new(l, w).unwrap();
        let g = greedy_two_level(&case, &spec, &shape, GreedyOptions::default()).unwrap();
        let gu = dynamic_utility_expected(&g, &case, &spec).unwrap();
        let (_, best) = brute_force_optimal(&case, &spec, &shape, u128::MAX).unwrap();
        prop_assert!(gu <= best + 1e-9);
        prop_assert!(gu >= approximation_bound() * best - 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn model_round_trip_preserves_predictions(flat in vec(-2.0f64..2.0, 43), seed in 0u64..1000) {
        let template = FeatureTemplate::default();
        prop_assume!(flat.len() == template.word_dim() + template.pair_dim());
        let weights = dynrank::features::WeightVector::from_flat(&flat, &template).unwrap();
        let model = Model::new(template.clone(), ConcaveGain::Sqrt, weights).unwrap();
        let back = Model::from_text(&model.to_text(), &template).unwrap();
        prop_assert_eq!(&back, &model);
        let cases = dynrank::synth::gen_synthetic(&dynrank::synth::SynthParams {
            n_queries: 2,
            n_docs: 8,
            seed,
            ..Default::default()
        }).unwrap();
        let spec = GainSpec::new(ConcaveGain::Sqrt);
        let shape = ShapeParams::new(3, 2).unwrap();
        for c in &cases {
            let a = predict_case(&model.weights, c, &template, &spec, &shape).unwrap();
            let b = predict_case(&back.weights, c, &template, &spec, &shape).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
