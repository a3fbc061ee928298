//! The nine-document, four-intent example instance used throughout the tests and docs.
//!
//! Documents `d1..d9` map to ids `0..8`, intents `t1..t4` to indices `0..3`.

use crate::ranking::{Document, IntentDistribution, JudgmentMatrix, QueryCase, TwoLevelRanking};

/// Intent-major relevance grades of the toy instance.
pub const TOY_GRADES: [[f64; 9]; 4] = [
    [1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0],
];

/// The toy instance with uniform intent probabilities.
pub fn toy_case() -> QueryCase {
    let docs = (0..9)
        .map(|i| Document::new(i, format!("d{}", i + 1)))
        .collect();
    let labels = (1..=4).map(|i| format!("t{i}")).collect();
    let intents = IntentDistribution::uniform(labels).expect("four intents");
    let judgments =
        JudgmentMatrix::from_rows(TOY_GRADES.iter().map(|r| r.to_vec()).collect()).expect("table");
    QueryCase::new("toy", docs, intents, judgments).expect("consistent toy case")
}

/// `d7 -> (d8, d9)`, `d1 -> (d2, d3)`, `d4 -> (d5, d6)`.
pub fn toy_ranking() -> TwoLevelRanking {
    TwoLevelRanking::from_indices(&[(6, &[7, 8]), (0, &[1, 2]), (3, &[4, 5])])
}

/// 1-based document names to ids.
pub fn d(n: usize) -> crate::ranking::DocumentId {
    crate::ranking::DocumentId(n - 1)
}
