//! Text pipeline and the joint feature map of the learned discriminant.
//!
//! The discriminant of a ranking is
//!
//! `sum_v (w_words . phi_v) * U_g(ranking | v) + sum_{(h, d) in ranking} w_pairs . phi(h, d)`
//!
//! where words play the role of intents (a document has utility 1 for every word it contains),
//! `phi_v` are binary word-importance features and `phi(h, d)` binary head-tail similarity
//! features. Within-document features are lifted to the word level by OR over the candidate set:
//! "the word reaches frequency y% in at least one candidate".

pub mod porter;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gains::{GainSpec, Objective};
use crate::ranking::{Document, QueryCase, TwoLevelRanking};

static STOPWORDS_TXT: &str = include_str!("stopwords.txt");

fn stopwords() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| {
        STOPWORDS_TXT
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .collect()
    })
}

pub fn is_stopword(term: &str) -> bool {
    stopwords().contains(term)
}

/// Stemmed, lowercased, stopword-free terms of a document.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenizedDoc {
    /// Title and body terms together.
    pub tokens: Vec<String>,
    pub title_tokens: Vec<String>,
}

impl TokenizedDoc {
    pub fn from_document(doc: &Document) -> Self {
        let title_tokens = terms(&doc.title);
        let mut tokens = title_tokens.clone();
        tokens.extend(terms(&doc.body));
        TokenizedDoc {
            tokens,
            title_tokens,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

fn terms(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .filter(|t| !is_stopword(t))
        .map(|t| porter::stem(&t))
        .collect()
}

/// Tokenizes plain body text (no title).
pub fn tokenize(text: &str) -> TokenizedDoc {
    TokenizedDoc {
        tokens: terms(text),
        title_tokens: Vec::new(),
    }
}

/// Threshold grids of the feature templates. Percentages are in `[0, 100]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureTemplate {
    /// "appears in at least x% of the candidates".
    pub doc_freq: Vec<f64>,
    /// "appears in the title of at least x% of the candidates".
    pub title_doc_freq: Vec<f64>,
    /// "has within-document frequency of at least y% in some candidate".
    pub term_freq: Vec<f64>,
    /// TFIDF cosine bins "cosine >= c".
    pub cosine_bins: Vec<f64>,
    /// Within-document frequency levels for counting common words.
    pub common_word_freq: Vec<f64>,
    /// Bins "at least n common words".
    pub common_word_counts: Vec<usize>,
}

impl Default for FeatureTemplate {
    fn default() -> Self {
        FeatureTemplate {
            doc_freq: vec![5.0, 10.0, 25.0, 50.0],
            title_doc_freq: vec![5.0, 10.0, 25.0, 50.0],
            term_freq: vec![1.0, 2.0, 5.0, 10.0],
            cosine_bins: vec![0.1, 0.25, 0.5, 0.75],
            common_word_freq: vec![1.0, 2.0, 5.0],
            common_word_counts: vec![1, 3, 5],
        }
    }
}

impl FeatureTemplate {
    /// Parses the `key = [values]` configuration format; missing keys keep their defaults.
    pub fn from_config(text: &str) -> Result<Self> {
        let t: FeatureTemplate =
            toml::from_str(text).map_err(|e| Error::Features(format!("template: {e}")))?;
        t.validate()?;
        Ok(t)
    }

    pub fn to_config(&self) -> String {
        toml::to_string(self).expect("template serializes")
    }

    fn validate(&self) -> Result<()> {
        let sorted = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1]) && v.iter().all(|x| *x >= 0.0);
        if !(sorted(&self.doc_freq)
            && sorted(&self.title_doc_freq)
            && sorted(&self.term_freq)
            && sorted(&self.cosine_bins)
            && sorted(&self.common_word_freq)
            && self.common_word_counts.windows(2).all(|w| w[0] < w[1]))
        {
            return Err(Error::Features(
                "threshold grids must be nonnegative and strictly increasing".into(),
            ));
        }
        Ok(())
    }

    pub fn word_feature_names(&self) -> Vec<String> {
        let mut names = vec!["word:bias".to_string()];
        names.extend(self.doc_freq.iter().map(|x| format!("word:df>={x}%")));
        names.extend(
            self.title_doc_freq
                .iter()
                .map(|x| format!("word:title_df>={x}%")),
        );
        names.extend(self.term_freq.iter().map(|y| format!("word:tf>={y}%")));
        for x in &self.doc_freq {
            for y in &self.term_freq {
                names.push(format!("word:df>={x}%&tf>={y}%"));
            }
        }
        names
    }

    pub fn pair_feature_names(&self) -> Vec<String> {
        let mut names = vec!["pair:bias".to_string()];
        names.extend(self.cosine_bins.iter().map(|c| format!("pair:cos>={c}")));
        for x in &self.common_word_freq {
            for n in &self.common_word_counts {
                names.push(format!("pair:common@{x}%>={n}"));
            }
        }
        names
    }

    pub fn word_dim(&self) -> usize {
        1 + self.doc_freq.len()
            + self.title_doc_freq.len()
            + self.term_freq.len()
            + self.doc_freq.len() * self.term_freq.len()
    }

    pub fn pair_dim(&self) -> usize {
        1 + self.cosine_bins.len() + self.common_word_freq.len() * self.common_word_counts.len()
    }

    /// Hex digest identifying the feature layout; model files carry it.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for name in self
            .word_feature_names()
            .iter()
            .chain(&self.pair_feature_names())
        {
            h.update(name.as_bytes());
            h.update(b"\n");
        }
        h.finalize()[..8]
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Dense term index over a candidate set, in lexicographic term order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    terms: BTreeMap<String, usize>,
    by_index: Vec<String>,
}

impl Vocabulary {
    pub fn build(docs: &[TokenizedDoc]) -> Self {
        let mut sorted: Vec<&str> = docs
            .iter()
            .flat_map(|d| d.tokens.iter().map(String::as_str))
            .collect();
        sorted.sort_unstable();
        sorted.dedup();
        let by_index: Vec<String> = sorted.into_iter().map(String::from).collect();
        let terms = by_index
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocabulary { terms, by_index }
    }

    pub fn len(&self) -> usize {
        self.by_index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_index.is_empty()
    }

    pub fn index(&self, term: &str) -> Option<usize> {
        self.terms.get(term).copied()
    }

    pub fn term(&self, v: usize) -> &str {
        &self.by_index[v]
    }
}

/// 1 iff word `v` occurs in `doc`.
pub fn word_utility(doc: &TokenizedDoc, vocab: &Vocabulary, v: usize) -> f64 {
    let term = vocab.term(v);
    if doc.tokens.iter().any(|t| t == term) {
        1.0
    } else {
        0.0
    }
}

/// Word-level features `phi_v` plus the per-(word, document) frequency bits they aggregate.
#[derive(Debug, Clone, PartialEq)]
pub struct WordFeatureBank {
    dim: usize,
    /// `|V| x dim`, binary.
    word: Vec<Vec<f64>>,
    /// `within_doc[v][d]`: bit `k` set iff word `v` has frequency >= `term_freq[k]` in `d`.
    within_doc: Vec<Vec<u32>>,
}

impl WordFeatureBank {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn features(&self, v: usize) -> &[f64] {
        &self.word[v]
    }

    pub fn within_doc(&self, v: usize, d: usize, level: usize) -> bool {
        self.within_doc[v][d] & (1 << level) != 0
    }
}

/// Head-tail pair features `phi(h, d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairFeatureBank {
    n_docs: usize,
    dim: usize,
    data: Vec<f64>,
    cosine: Vec<f64>,
}

impl PairFeatureBank {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn features(&self, head: usize, tail: usize) -> &[f64] {
        let start = (head * self.n_docs + tail) * self.dim;
        &self.data[start..start + self.dim]
    }

    pub fn cosine(&self, a: usize, b: usize) -> f64 {
        self.cosine[a * self.n_docs + b]
    }
}

/// Per-term counts and lengths of tokenized documents.
fn term_counts(doc: &TokenizedDoc, vocab: &Vocabulary) -> HashMap<usize, usize> {
    let mut counts = HashMap::new();
    for t in &doc.tokens {
        if let Some(v) = vocab.index(t) {
            *counts.entry(v).or_insert(0) += 1;
        }
    }
    counts
}

fn tokenized(case: &QueryCase) -> Result<Vec<TokenizedDoc>> {
    if case.n_docs() == 0 {
        return Err(Error::Features("empty corpus".into()));
    }
    if !case.has_text() {
        return Err(Error::Features(format!(
            "query {}: every document needs text to build features",
            case.query_id()
        )));
    }
    Ok(case
        .documents()
        .iter()
        .map(TokenizedDoc::from_document)
        .collect())
}

/// Word features of a tokenized candidate set.
pub fn word_features_of(
    docs: &[TokenizedDoc],
    vocab: &Vocabulary,
    template: &FeatureTemplate,
) -> WordFeatureBank {
    let n = docs.len().max(1) as f64;
    let counts: Vec<HashMap<usize, usize>> = docs.iter().map(|d| term_counts(d, vocab)).collect();
    let mut df = vec![0usize; vocab.len()];
    let mut title_df = vec![0usize; vocab.len()];
    for (d, doc) in docs.iter().enumerate() {
        for &v in counts[d].keys() {
            df[v] += 1;
        }
        let titles: HashSet<usize> = doc
            .title_tokens
            .iter()
            .filter_map(|t| vocab.index(t))
            .collect();
        for v in titles {
            title_df[v] += 1;
        }
    }
    let mut within_doc = vec![vec![0u32; docs.len()]; vocab.len()];
    for (d, doc) in docs.iter().enumerate() {
        let len = doc.len() as f64;
        for (&v, &c) in &counts[d] {
            let pct = 100.0 * c as f64 / len;
            for (k, &y) in template.term_freq.iter().enumerate() {
                if pct >= y {
                    within_doc[v][d] |= 1 << k;
                }
            }
        }
    }
    let word = (0..vocab.len())
        .map(|v| {
            let df_pct = 100.0 * df[v] as f64 / n;
            let title_pct = 100.0 * title_df[v] as f64 / n;
            let any_tf: u32 = within_doc[v].iter().fold(0, |a, b| a | b);
            let bit = |b: bool| if b { 1.0 } else { 0.0 };
            let mut f = vec![1.0];
            f.extend(template.doc_freq.iter().map(|&x| bit(df_pct >= x)));
            f.extend(template.title_doc_freq.iter().map(|&x| bit(title_pct >= x)));
            f.extend((0..template.term_freq.len()).map(|k| bit(any_tf & (1 << k) != 0)));
            for &x in &template.doc_freq {
                for k in 0..template.term_freq.len() {
                    f.push(bit(df_pct >= x && any_tf & (1 << k) != 0));
                }
            }
            f
        })
        .collect();
    WordFeatureBank {
        dim: template.word_dim(),
        word,
        within_doc,
    }
}

pub fn build_word_features(
    case: &QueryCase,
    template: &FeatureTemplate,
) -> Result<WordFeatureBank> {
    let docs = tokenized(case)?;
    let vocab = Vocabulary::build(&docs);
    Ok(word_features_of(&docs, &vocab, template))
}

fn tfidf_vector<'a>(doc: &'a TokenizedDoc, idf: &impl Fn(&str) -> f64) -> BTreeMap<&'a str, f64> {
    let mut m: BTreeMap<&str, f64> = BTreeMap::new();
    for t in &doc.tokens {
        *m.entry(t.as_str()).or_insert(0.0) += 1.0;
    }
    let len = doc.len() as f64;
    m.values_mut().for_each(|c| *c /= len);
    for (t, x) in m.iter_mut() {
        *x *= idf(t);
    }
    m
}

/// Cosine of TFIDF vectors with `tf = count / length`.
pub fn tfidf_cosine(a: &TokenizedDoc, b: &TokenizedDoc, idf: impl Fn(&str) -> f64) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let (va, vb) = (tfidf_vector(a, &idf), tfidf_vector(b, &idf));
    let dot: f64 = va
        .iter()
        .filter_map(|(t, x)| vb.get(t).map(|y| x * y))
        .sum();
    let na: f64 = va.values().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = vb.values().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(0.0, 1.0)
    }
}

/// `x >= threshold` up to rounding of the computed value.
fn reaches(x: f64, threshold: f64) -> bool {
    x >= threshold - 1e-12
}

/// Pair features of a tokenized candidate set; IDF is `ln(|D| / df)` over the set.
pub fn pair_features_of(
    docs: &[TokenizedDoc],
    vocab: &Vocabulary,
    template: &FeatureTemplate,
) -> PairFeatureBank {
    let n = docs.len();
    let counts: Vec<HashMap<usize, usize>> = docs.iter().map(|d| term_counts(d, vocab)).collect();
    let mut df = vec![0usize; vocab.len()];
    for c in &counts {
        for &v in c.keys() {
            df[v] += 1;
        }
    }
    let idf = |t: &str| {
        vocab
            .index(t)
            .map_or(0.0, |v| (n as f64 / df[v] as f64).ln())
    };
    let dim = template.pair_dim();
    let mut data = vec![0.0; n * n * dim];
    let mut cosine = vec![0.0; n * n];
    for h in 0..n {
        for d in 0..n {
            if h == d {
                continue;
            }
            let cos = tfidf_cosine(&docs[h], &docs[d], idf);
            cosine[h * n + d] = cos;
            let f = &mut data[(h * n + d) * dim..(h * n + d + 1) * dim];
            if docs[h].is_empty() || docs[d].is_empty() {
                continue;
            }
            f[0] = 1.0;
            let mut k = 1;
            for &c in &template.cosine_bins {
                f[k] = if reaches(cos, c) { 1.0 } else { 0.0 };
                k += 1;
            }
            let (lh, ld) = (docs[h].len() as f64, docs[d].len() as f64);
            for &x in &template.common_word_freq {
                let common = counts[h]
                    .iter()
                    .filter(|(v, &ch)| {
                        100.0 * ch as f64 / lh >= x
                            && counts[d]
                                .get(v)
                                .is_some_and(|&cd| 100.0 * cd as f64 / ld >= x)
                    })
                    .count();
                for &m in &template.common_word_counts {
                    f[k] = if common >= m { 1.0 } else { 0.0 };
                    k += 1;
                }
            }
        }
    }
    PairFeatureBank {
        n_docs: n,
        dim,
        data,
        cosine,
    }
}

pub fn build_pair_features(
    case: &QueryCase,
    template: &FeatureTemplate,
) -> Result<PairFeatureBank> {
    let docs = tokenized(case)?;
    let vocab = Vocabulary::build(&docs);
    Ok(pair_features_of(&docs, &vocab, template))
}

/// Learned weights, one block per feature family.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub words: Vec<f64>,
    pub pairs: Vec<f64>,
}

impl WeightVector {
    pub fn zeros(template: &FeatureTemplate) -> Self {
        WeightVector {
            words: vec![0.0; template.word_dim()],
            pairs: vec![0.0; template.pair_dim()],
        }
    }

    /// Splits a flat `[words | pairs]` vector.
    pub fn from_flat(flat: &[f64], template: &FeatureTemplate) -> Result<Self> {
        let (wd, pd) = (template.word_dim(), template.pair_dim());
        if flat.len() != wd + pd {
            return Err(Error::DimensionMismatch {
                expected: wd + pd,
                got: flat.len(),
            });
        }
        Ok(WeightVector {
            words: flat[..wd].to_vec(),
            pairs: flat[wd..].to_vec(),
        })
    }

    pub fn flat(&self) -> Vec<f64> {
        self.words.iter().chain(&self.pairs).copied().collect()
    }

    pub fn dim(&self) -> usize {
        self.words.len() + self.pairs.len()
    }

    pub fn is_finite(&self) -> bool {
        self.flat().iter().all(|x| x.is_finite())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Everything the discriminant needs about one query's candidates.
#[derive(Debug, Clone)]
pub struct QueryFeatures {
    pub template: FeatureTemplate,
    pub docs: Vec<TokenizedDoc>,
    pub vocab: Vocabulary,
    pub words: WordFeatureBank,
    pub pairs: PairFeatureBank,
    /// Word-occurrence objective with unit weights: `U(d|v)` per word.
    occurrence: Objective,
}

impl QueryFeatures {
    pub fn build(case: &QueryCase, template: &FeatureTemplate) -> Result<Self> {
        let docs = tokenized(case)?;
        let vocab = Vocabulary::build(&docs);
        let words = word_features_of(&docs, &vocab, template);
        let pairs = pair_features_of(&docs, &vocab, template);
        let mut util = vec![vec![0.0; docs.len()]; vocab.len()];
        for (d, doc) in docs.iter().enumerate() {
            for t in &doc.tokens {
                util[vocab.index(t).expect("own term")][d] = 1.0;
            }
        }
        let occurrence = Objective::new(vec![1.0; vocab.len()], &util, docs.len())?;
        Ok(QueryFeatures {
            template: template.clone(),
            docs,
            vocab,
            words,
            pairs,
            occurrence,
        })
    }

    pub fn n_docs(&self) -> usize {
        self.docs.len()
    }

    pub fn dim(&self) -> usize {
        self.words.dim() + self.pairs.dim()
    }

    /// `U_g(ranking | v)` for every word.
    pub fn word_utilities(&self, ranking: &TwoLevelRanking, spec: &GainSpec) -> Result<Vec<f64>> {
        self.occurrence.component_utilities(ranking, spec)
    }

    /// `Psi(q, ranking)` as a flat `[words | pairs]` vector.
    pub fn joint_feature_vector(
        &self,
        ranking: &TwoLevelRanking,
        spec: &GainSpec,
    ) -> Result<Vec<f64>> {
        let mut psi = vec![0.0; self.dim()];
        let wd = self.words.dim();
        for (v, u) in self.word_utilities(ranking, spec)?.into_iter().enumerate() {
            if u != 0.0 {
                for (k, &f) in self.words.features(v).iter().enumerate() {
                    psi[k] += f * u;
                }
            }
        }
        for row in &ranking.rows {
            for d in &row.tail {
                for (k, &f) in self.pairs.features(row.head.0, d.0).iter().enumerate() {
                    psi[wd + k] += f;
                }
            }
        }
        Ok(psi)
    }

    /// Per-word score `w_words . phi_v`.
    pub fn word_scores(&self, w: &WeightVector) -> Vec<f64> {
        (0..self.vocab.len())
            .map(|v| dot(&w.words, self.words.features(v)))
            .collect()
    }

    /// The discriminant as a greedy objective. With `clamp`, word scores are floored at zero.
    pub fn objective(&self, w: &WeightVector, clamp: bool) -> Result<Objective> {
        self.check_dims(w)?;
        let mut scores = self.word_scores(w);
        if clamp {
            scores.iter_mut().for_each(|s| *s = s.max(0.0));
        }
        let n = self.n_docs();
        let util: Vec<Vec<f64>> = (0..self.vocab.len())
            .map(|v| (0..n).map(|d| self.occurrence.utility(v, d)).collect())
            .collect();
        let mut pair = vec![0.0; n * n];
        for h in 0..n {
            for d in 0..n {
                if h != d {
                    pair[h * n + d] = dot(&w.pairs, self.pairs.features(h, d));
                }
            }
        }
        Objective::new(scores, &util, n)?.with_pair_scores(pair)
    }

    fn check_dims(&self, w: &WeightVector) -> Result<()> {
        if w.words.len() != self.words.dim() || w.pairs.len() != self.pairs.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: w.dim(),
            });
        }
        Ok(())
    }
}

/// `w . Psi(q, ranking)`.
pub fn joint_feature_score(
    w: &WeightVector,
    features: &QueryFeatures,
    ranking: &TwoLevelRanking,
    spec: &GainSpec,
) -> Result<f64> {
    features.check_dims(w)?;
    let psi = features.joint_feature_vector(ranking, spec)?;
    Ok(dot(&w.flat(), &psi))
}
