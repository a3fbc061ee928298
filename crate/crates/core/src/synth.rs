//! Seeded synthetic ambiguous-query corpora.
//!
//! Intent probabilities follow a Zipf law `P[t] ~ 1 / (t + 1)^s`. Each relevant document has a
//! primary intent (the first `n_intents` relevant documents cover every intent once, the rest
//! are drawn from `P`) and, with probability `overlap`, one extra intent. A fraction of the
//! documents is relevant to no intent. Judgments are binary.
//!
//! With `text`, every intent owns three signature terms which occur repeatedly in the title and
//! body of its relevant documents; all documents also draw from a shared background vocabulary
//! and carry a few document-unique noise terms.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ranking::{Document, IntentDistribution, JudgmentMatrix, QueryCase};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub n_queries: usize,
    pub n_intents: usize,
    pub n_docs: usize,
    pub zipf_s: f64,
    pub overlap: f64,
    /// Fraction of documents relevant to no intent.
    pub irrelevant: f64,
    pub seed: u64,
    pub text: bool,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            n_queries: 50,
            n_intents: 4,
            n_docs: 20,
            zipf_s: 1.0,
            overlap: 0.3,
            irrelevant: 0.2,
            seed: 0,
            text: true,
        }
    }
}

const SIGNATURE_TERMS: usize = 3;
const BACKGROUND_TERMS: usize = 6;
const CONSONANTS: &[u8] = b"bdfgkmptvz";
const VOWELS: &[u8] = b"aou";

fn validate(p: &SynthParams) -> Result<()> {
    let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
    if p.n_queries == 0 {
        return bad("n_queries must be >= 1");
    }
    if p.n_docs == 0 {
        return bad("n_docs must be >= 1");
    }
    if p.n_intents == 0 {
        return bad("n_intents must be >= 1");
    }
    if !(p.zipf_s >= 0.0 && p.zipf_s.is_finite()) {
        return bad("zipf_s must be a nonnegative number");
    }
    if !(0.0..=1.0).contains(&p.overlap) {
        return bad("overlap must lie in [0, 1]");
    }
    if !(0.0..1.0).contains(&p.irrelevant) {
        return bad("irrelevant must lie in [0, 1)");
    }
    if p.text && p.n_intents * SIGNATURE_TERMS + BACKGROUND_TERMS > 9000 {
        return bad("too many intents for the synthetic vocabulary");
    }
    Ok(())
}

/// Zipf weights `1 / (t + 1)^s`, normalized.
pub fn zipf_weights(n: usize, s: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|t| 1.0 / ((t + 1) as f64).powf(s)).collect();
    let z: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / z).collect()
}

fn sample_index(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let r: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if r < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// Distinct consonant-vowel-consonant-vowel-consonant terms; all are their own stems.
fn distinct_terms(rng: &mut ChaCha8Rng, n: usize) -> Vec<String> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let t: String = (0..5)
            .map(|i| {
                let set = if i % 2 == 0 { CONSONANTS } else { VOWELS };
                set[rng.gen_range(0..set.len())] as char
            })
            .collect();
        if seen.insert(t.clone()) {
            out.push(t);
        }
    }
    out
}

pub fn gen_synthetic(params: &SynthParams) -> Result<Vec<QueryCase>> {
    validate(params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let probs = zipf_weights(params.n_intents, params.zipf_s);
    let width = params.n_queries.to_string().len().max(3);
    (0..params.n_queries)
        .map(|q| gen_query(&mut rng, params, &probs, format!("q{q:0width$}")))
        .collect()
}

fn gen_query(
    rng: &mut ChaCha8Rng,
    p: &SynthParams,
    probs: &[f64],
    query_id: String,
) -> Result<QueryCase> {
    let n = p.n_docs;
    let n_irrelevant = ((p.irrelevant * n as f64).floor() as usize).min(n - 1);
    let n_relevant = n - n_irrelevant;
    let mut judgments = JudgmentMatrix::zeros(p.n_intents, n);
    let mut doc_intents: Vec<Vec<usize>> = Vec::with_capacity(n);
    for d in 0..n {
        let mut ts = Vec::new();
        if d < n_relevant {
            let primary = if d < p.n_intents {
                d
            } else {
                sample_index(rng, probs)
            };
            ts.push(primary);
            if p.n_intents > 1 && rng.gen::<f64>() < p.overlap {
                let mut extra = rng.gen_range(0..p.n_intents - 1);
                if extra >= primary {
                    extra += 1;
                }
                ts.push(extra);
            }
        }
        doc_intents.push(ts);
    }
    doc_intents.shuffle(rng);

    let vocab = if p.text {
        distinct_terms(rng, p.n_intents * SIGNATURE_TERMS + BACKGROUND_TERMS)
    } else {
        Vec::new()
    };
    let mut documents = Vec::with_capacity(n);
    for (d, ts) in doc_intents.iter().enumerate() {
        for &t in ts {
            judgments.set(t, d, 1.0)?;
        }
        let mut doc = Document::new(d, format!("d{}", d + 1));
        if p.text {
            let (title, body) = doc_text(rng, &vocab, p.n_intents, ts, &query_id, d);
            doc = doc.with_text(title, body);
        }
        documents.push(doc);
    }
    let labels = (1..=p.n_intents).map(|t| format!("t{t}")).collect();
    let intents = IntentDistribution::new(labels, probs.to_vec())?;
    QueryCase::new(query_id, documents, intents, judgments)
}

fn doc_text(
    rng: &mut ChaCha8Rng,
    vocab: &[String],
    n_intents: usize,
    intents: &[usize],
    query_id: &str,
    d: usize,
) -> (String, String) {
    let signature = |t: usize| &vocab[t * SIGNATURE_TERMS..(t + 1) * SIGNATURE_TERMS];
    let background = &vocab[n_intents * SIGNATURE_TERMS..];
    let mut title = Vec::new();
    let mut body: Vec<String> = Vec::new();
    if let Some(&primary) = intents.first() {
        title.push(signature(primary)[0].clone());
    }
    title.push(background[rng.gen_range(0..background.len())].clone());
    for &t in intents {
        for term in signature(t) {
            for _ in 0..rng.gen_range(2..=3) {
                body.push(term.clone());
            }
        }
    }
    for term in background {
        if rng.gen::<f64>() < 0.9 {
            body.push(term.clone());
        }
    }
    for k in 0..rng.gen_range(3..=6) {
        body.push(format!("{query_id}x{d}n{k}"));
    }
    body.shuffle(rng);
    (title.join(" "), body.join(" "))
}
