//! Queries, intents, judgments and two-level rankings.
//!
//! A [`QueryCase`] bundles the candidate documents of one query with its intent distribution and
//! the graded judgment matrix `U(d|t)`. A [`TwoLevelRanking`] is an ordered list of rows, each a
//! head document followed by the tail shown when the head is expanded. A static ranking is the
//! special case where every tail is empty.

use std::fmt;

use crate::error::{Error, Result};

/// Tolerance on the probability mass of an [`IntentDistribution`].
pub const PROB_SUM_TOL: f64 = 1e-9;

/// Dense index of a document within its query's candidate list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DocumentId(pub usize);

impl DocumentId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for DocumentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A candidate document. Title and body may be empty for judgment-only data.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub id: DocumentId,
    /// External name used in files and reports.
    pub label: String,
    pub title: String,
    pub body: String,
}

impl Document {
    pub fn new(id: usize, label: impl Into<String>) -> Self {
        Document {
            id: DocumentId(id),
            label: label.into(),
            title: String::new(),
            body: String::new(),
        }
    }

    pub fn with_text(mut self, title: impl Into<String>, body: impl Into<String>) -> Self {
        self.title = title.into();
        self.body = body.into();
        self
    }

    pub fn has_text(&self) -> bool {
        !self.title.is_empty() || !self.body.is_empty()
    }
}

/// Distribution `P[t|q]` over the intents of a query. Intents are addressed by dense index.
#[derive(Debug, Clone, PartialEq)]
pub struct IntentDistribution {
    labels: Vec<String>,
    probs: Vec<f64>,
}

impl IntentDistribution {
    pub fn new(labels: Vec<String>, probs: Vec<f64>) -> Result<Self> {
        if labels.len() != probs.len() {
            return Err(Error::InvalidCase(format!(
                "{} intent labels but {} probabilities",
                labels.len(),
                probs.len()
            )));
        }
        if labels.is_empty() {
            return Err(Error::InvalidCase("query has no intents".into()));
        }
        for (label, &p) in labels.iter().zip(&probs) {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidCase(format!(
                    "intent {label} has invalid probability {p}"
                )));
            }
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::InvalidCase(format!(
                "intent probabilities sum to {total}, expected 1"
            )));
        }
        Ok(IntentDistribution { labels, probs })
    }

    pub fn uniform(labels: Vec<String>) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::InvalidCase("query has no intents".into()));
        }
        IntentDistribution::new(labels, vec![1.0 / n as f64; n])
    }

    /// Probability proportional to the number of documents with positive utility for each intent.
    pub fn proportional(labels: Vec<String>, judgments: &JudgmentMatrix) -> Result<Self> {
        if labels.len() != judgments.n_intents() {
            return Err(Error::InvalidCase(
                "intent labels do not match judgment rows".into(),
            ));
        }
        let counts: Vec<f64> = (0..judgments.n_intents())
            .map(|t| {
                (0..judgments.n_docs())
                    .filter(|&d| judgments.get(t, d) > 0.0)
                    .count() as f64
            })
            .collect();
        let total: f64 = counts.iter().sum();
        if total == 0.0 {
            return Err(Error::InvalidCase(
                "no relevant documents; proportional intent probabilities undefined".into(),
            ));
        }
        IntentDistribution::new(labels, counts.iter().map(|c| c / total).collect())
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn prob(&self, intent: usize) -> f64 {
        self.probs[intent]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn label(&self, intent: usize) -> &str {
        &self.labels[intent]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

/// Dense `|T| x |D|` matrix of nonnegative relevance grades `U(d|t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JudgmentMatrix {
    n_intents: usize,
    n_docs: usize,
    values: Vec<f64>,
}

impl JudgmentMatrix {
    pub fn zeros(n_intents: usize, n_docs: usize) -> Self {
        JudgmentMatrix {
            n_intents,
            n_docs,
            values: vec![0.0; n_intents * n_docs],
        }
    }

    /// Builds from intent-major rows.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_intents = rows.len();
        let n_docs = rows.first().map_or(0, Vec::len);
        let mut m = JudgmentMatrix::zeros(n_intents, n_docs);
        for (t, row) in rows.into_iter().enumerate() {
            if row.len() != n_docs {
                return Err(Error::InvalidCase(format!(
                    "judgment row {t} has {} entries, expected {n_docs}",
                    row.len()
                )));
            }
            for (d, u) in row.into_iter().enumerate() {
                m.set(t, d, u)?;
            }
        }
        Ok(m)
    }

    pub fn n_intents(&self) -> usize {
        self.n_intents
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn get(&self, intent: usize, doc: usize) -> f64 {
        self.values[intent * self.n_docs + doc]
    }

    pub fn set(&mut self, intent: usize, doc: usize, grade: f64) -> Result<()> {
        if !grade.is_finite() || grade < 0.0 {
            return Err(Error::InvalidCase(format!(
                "grade {grade} for intent {intent}, document {doc} is not a nonnegative number"
            )));
        }
        if intent >= self.n_intents || doc >= self.n_docs {
            return Err(Error::InvalidCase(format!(
                "judgment ({intent}, {doc}) outside {}x{} matrix",
                self.n_intents, self.n_docs
            )));
        }
        self.values[intent * self.n_docs + doc] = grade;
        Ok(())
    }

    /// Maps every positive grade to 1.
    pub fn binarized(&self) -> Self {
        JudgmentMatrix {
            n_intents: self.n_intents,
            n_docs: self.n_docs,
            values: self
                .values
                .iter()
                .map(|&u| if u > 0.0 { 1.0 } else { 0.0 })
                .collect(),
        }
    }

    pub fn is_binary(&self) -> bool {
        self.values.iter().all(|&u| u == 0.0 || u == 1.0)
    }
}

/// One query with its candidates, intents and judgments.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryCase {
    query_id: String,
    documents: Vec<Document>,
    intents: IntentDistribution,
    judgments: JudgmentMatrix,
}

impl QueryCase {
    pub fn new(
        query_id: impl Into<String>,
        documents: Vec<Document>,
        intents: IntentDistribution,
        judgments: JudgmentMatrix,
    ) -> Result<Self> {
        let query_id = query_id.into();
        if judgments.n_intents() != intents.len() || judgments.n_docs() != documents.len() {
            return Err(Error::InvalidCase(format!(
                "query {query_id}: judgments are {}x{} but case has {} intents and {} documents",
                judgments.n_intents(),
                judgments.n_docs(),
                intents.len(),
                documents.len()
            )));
        }
        for (i, d) in documents.iter().enumerate() {
            if d.id.0 != i {
                return Err(Error::InvalidCase(format!(
                    "query {query_id}: document at position {i} carries id {}",
                    d.id
                )));
            }
        }
        Ok(QueryCase {
            query_id,
            documents,
            intents,
            judgments,
        })
    }

    pub fn query_id(&self) -> &str {
        &self.query_id
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn document(&self, id: DocumentId) -> &Document {
        &self.documents[id.0]
    }

    pub fn n_docs(&self) -> usize {
        self.documents.len()
    }

    pub fn n_intents(&self) -> usize {
        self.intents.len()
    }

    pub fn intents(&self) -> &IntentDistribution {
        &self.intents
    }

    pub fn judgments(&self) -> &JudgmentMatrix {
        &self.judgments
    }

    pub fn utility(&self, intent: usize, doc: DocumentId) -> f64 {
        self.judgments.get(intent, doc.0)
    }

    pub fn has_text(&self) -> bool {
        self.documents.iter().all(Document::has_text)
    }

    /// Copy of this case with a different intent distribution.
    pub fn with_intents(&self, intents: IntentDistribution) -> Result<Self> {
        QueryCase::new(
            self.query_id.clone(),
            self.documents.clone(),
            intents,
            self.judgments.clone(),
        )
    }

    /// Copy of this case with judgments replaced by `judgments`.
    pub fn with_judgments(&self, judgments: JudgmentMatrix) -> Result<Self> {
        QueryCase::new(
            self.query_id.clone(),
            self.documents.clone(),
            self.intents.clone(),
            judgments,
        )
    }

    pub fn doc_by_label(&self, label: &str) -> Option<DocumentId> {
        self.documents
            .iter()
            .find(|d| d.label == label)
            .map(|d| d.id)
    }
}

/// Number of rows `L` and tail width `W`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShapeParams {
    length: usize,
    width: usize,
}

impl ShapeParams {
    pub fn new(length: usize, width: usize) -> Result<Self> {
        if length == 0 {
            return Err(Error::InvalidParameter(
                "ranking length L must be >= 1".into(),
            ));
        }
        Ok(ShapeParams { length, width })
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn with_width(self, width: usize) -> Self {
        ShapeParams { width, ..self }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Row {
    pub head: DocumentId,
    pub tail: Vec<DocumentId>,
}

impl Row {
    pub fn new(head: DocumentId) -> Self {
        Row {
            head,
            tail: Vec::new(),
        }
    }

    pub fn with_tail(head: DocumentId, tail: Vec<DocumentId>) -> Self {
        Row { head, tail }
    }

    /// Head followed by tail.
    pub fn docs(&self) -> impl Iterator<Item = DocumentId> + '_ {
        std::iter::once(self.head).chain(self.tail.iter().copied())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct TwoLevelRanking {
    pub rows: Vec<Row>,
}

impl TwoLevelRanking {
    pub fn new() -> Self {
        TwoLevelRanking::default()
    }

    pub fn from_rows(rows: Vec<Row>) -> Self {
        TwoLevelRanking { rows }
    }

    /// A static ranking: every document is a head with an empty tail.
    pub fn from_static(docs: &[DocumentId]) -> Self {
        TwoLevelRanking {
            rows: docs.iter().map(|&d| Row::new(d)).collect(),
        }
    }

    /// Builds from `(head, tail)` index pairs.
    pub fn from_indices(rows: &[(usize, &[usize])]) -> Self {
        TwoLevelRanking {
            rows: rows
                .iter()
                .map(|(h, t)| {
                    Row::with_tail(DocumentId(*h), t.iter().map(|&d| DocumentId(d)).collect())
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn heads(&self) -> impl Iterator<Item = DocumentId> + '_ {
        self.rows.iter().map(|r| r.head)
    }

    pub fn contains(&self, doc: DocumentId) -> bool {
        self.rows.iter().any(|r| r.docs().any(|d| d == doc))
    }

    pub fn n_documents(&self) -> usize {
        self.rows.iter().map(|r| 1 + r.tail.len()).sum()
    }
}

/// First structural rule a ranking breaks. Positions are `(row, slot)` with slot 0 the head and
/// slot `j >= 1` the `j`-th tail document.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Violation {
    #[error("{rows} rows exceed length limit {limit}")]
    TooManyRows { rows: usize, limit: usize },
    #[error("row {row} has {len} tail documents, width limit is {limit}")]
    TailTooWide {
        row: usize,
        len: usize,
        limit: usize,
    },
    #[error("document {doc} at row {row} slot {slot} is outside the {n_docs} candidates")]
    OutOfRange {
        row: usize,
        slot: usize,
        doc: usize,
        n_docs: usize,
    },
    #[error("document {doc} at row {row} slot {slot} appears more than once")]
    Duplicate { row: usize, slot: usize, doc: usize },
}

/// Checks row count, tail widths, id ranges and uniqueness, reporting the first violation found
/// in row-major order.
pub fn validate_ranking(
    ranking: &TwoLevelRanking,
    case: &QueryCase,
    shape: &ShapeParams,
) -> std::result::Result<(), Violation> {
    validate_structure(ranking, case.n_docs(), shape)
}

pub(crate) fn validate_structure(
    ranking: &TwoLevelRanking,
    n_docs: usize,
    shape: &ShapeParams,
) -> std::result::Result<(), Violation> {
    if ranking.len() > shape.length() {
        return Err(Violation::TooManyRows {
            rows: ranking.len(),
            limit: shape.length(),
        });
    }
    let mut seen = vec![false; n_docs];
    for (r, row) in ranking.rows.iter().enumerate() {
        if row.tail.len() > shape.width() {
            return Err(Violation::TailTooWide {
                row: r,
                len: row.tail.len(),
                limit: shape.width(),
            });
        }
        for (slot, doc) in row.docs().enumerate() {
            if doc.0 >= n_docs {
                return Err(Violation::OutOfRange {
                    row: r,
                    slot,
                    doc: doc.0,
                    n_docs,
                });
            }
            if seen[doc.0] {
                return Err(Violation::Duplicate {
                    row: r,
                    slot,
                    doc: doc.0,
                });
            }
            seen[doc.0] = true;
        }
    }
    Ok(())
}

/// Row-major traversal: each head followed by its tail.
pub fn flatten_static(ranking: &TwoLevelRanking) -> Vec<DocumentId> {
    ranking.rows.iter().flat_map(Row::docs).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toy;

    #[test]
    fn toy_ranking_validates() {
        let case = toy::toy_case();
        let shape = ShapeParams::new(3, 2).unwrap();
        assert_eq!(validate_ranking(&toy::toy_ranking(), &case, &shape), Ok(()));
    }

    #[test]
    fn duplicate_is_reported_with_position() {
        let case = toy::toy_case();
        let shape = ShapeParams::new(3, 2).unwrap();
        let r = TwoLevelRanking::from_indices(&[(0, &[1]), (1, &[2])]);
        assert_eq!(
            validate_ranking(&r, &case, &shape),
            Err(Violation::Duplicate {
                row: 1,
                slot: 0,
                doc: 1
            })
        );
    }

    #[test]
    fn wide_tail_rejected() {
        let case = toy::toy_case();
        let shape = ShapeParams::new(3, 2).unwrap();
        let r = TwoLevelRanking::from_indices(&[(0, &[1, 2, 3])]);
        assert!(matches!(
            validate_ranking(&r, &case, &shape),
            Err(Violation::TailTooWide {
                row: 0,
                len: 3,
                limit: 2
            })
        ));
    }

    #[test]
    fn too_many_rows_and_out_of_range() {
        let case = toy::toy_case();
        let shape = ShapeParams::new(1, 2).unwrap();
        let r = TwoLevelRanking::from_indices(&[(0, &[]), (1, &[])]);
        assert!(matches!(
            validate_ranking(&r, &case, &shape),
            Err(Violation::TooManyRows { rows: 2, limit: 1 })
        ));
        let r = TwoLevelRanking::from_indices(&[(0, &[9])]);
        assert!(matches!(
            validate_ranking(&r, &case, &shape),
            Err(Violation::OutOfRange { doc: 9, .. })
        ));
    }

    #[test]
    fn flatten_examples() {
        let r = TwoLevelRanking::from_indices(&[(7, &[8, 9]), (1, &[2, 3])]);
        let flat: Vec<usize> = flatten_static(&r).into_iter().map(|d| d.0).collect();
        assert_eq!(flat, vec![7, 8, 9, 1, 2, 3]);
        let r = TwoLevelRanking::from_indices(&[(0, &[]), (1, &[])]);
        assert_eq!(flatten_static(&r), vec![DocumentId(0), DocumentId(1)]);
        assert!(flatten_static(&TwoLevelRanking::new()).is_empty());
    }

    #[test]
    fn intent_distribution_checks() {
        let labels = vec!["a".to_string(), "b".to_string()];
        assert!(IntentDistribution::new(labels.clone(), vec![0.5, 0.6]).is_err());
        assert!(IntentDistribution::new(labels.clone(), vec![-0.1, 1.1]).is_err());
        assert!(IntentDistribution::new(labels.clone(), vec![0.25, 0.75]).is_ok());
    }

    #[test]
    fn proportional_probabilities_follow_relevant_counts() {
        let case = toy::toy_case();
        let p =
            IntentDistribution::proportional(case.intents().labels().to_vec(), case.judgments())
                .unwrap();
        let expect = [0.3, 0.3, 0.2, 0.2];
        for (a, b) in p.probs().iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn case_rejects_mismatched_judgments() {
        let docs = vec![Document::new(0, "a")];
        let intents = IntentDistribution::uniform(vec!["t".into()]).unwrap();
        let j = JudgmentMatrix::zeros(1, 2);
        assert!(QueryCase::new("q", docs, intents, j).is_err());
    }
}
