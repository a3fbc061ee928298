//! Corpus, qrels and ranking file formats, and atomic output.
//!
//! A corpus file is a sequence of tab-separated records, one query per block:
//!
//! ```text
//! query   <id>
//! intent  <label>  [probability]
//! doc     <label>  [title  [body]]
//! judge   <doc-label>  <intent-label>  <grade>
//! end
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. Inside fields, `\t`, `\n` and `\\` are
//! escapes for tab, newline and backslash.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::ranking::{
    Document, DocumentId, IntentDistribution, JudgmentMatrix, QueryCase, Row, TwoLevelRanking,
    PROB_SUM_TOL,
};

/// Explicit probabilities must sum to one within this tolerance; they are then renormalized.
pub const FILE_PROB_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProbMode {
    /// Explicit when every intent lists a probability, proportional when none does.
    #[default]
    Auto,
    Explicit,
    /// Proportional to the number of relevant documents.
    Proportional,
    Uniform,
}

impl std::str::FromStr for ProbMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(ProbMode::Auto),
            "explicit" => Ok(ProbMode::Explicit),
            "proportional" => Ok(ProbMode::Proportional),
            "uniform" => Ok(ProbMode::Uniform),
            _ => Err(Error::InvalidParameter(format!(
                "unknown probability mode '{s}' (auto, explicit, proportional, uniform)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LoadOptions {
    /// Map every positive grade to 1.
    pub binarize: bool,
    pub prob_mode: ProbMode,
}

fn escape(field: &str) -> String {
    let mut out = String::with_capacity(field.len());
    for c in field.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(field: &str, line: usize) -> Result<String> {
    let mut out = String::with_capacity(field.len());
    let mut chars = field.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!(
                        "bad escape '\\{}'",
                        other.map(String::from).unwrap_or_default()
                    ),
                })
            }
        }
    }
    Ok(out)
}

#[derive(Default)]
struct Block {
    query_id: String,
    start: usize,
    intents: Vec<(String, Option<f64>)>,
    docs: Vec<(String, Option<(String, String)>)>,
    judgments: Vec<(usize, String, String, f64)>,
}

impl Block {
    fn finish(self, opts: &LoadOptions) -> Result<QueryCase> {
        let ctx = |message: String| Error::Parse {
            line: self.start,
            message: format!("query {}: {message}", self.query_id),
        };
        let mut intent_index = HashMap::new();
        for (i, (label, _)) in self.intents.iter().enumerate() {
            if intent_index.insert(label.as_str(), i).is_some() {
                return Err(ctx(format!("duplicate intent '{label}'")));
            }
        }
        let mut doc_index = HashMap::new();
        for (i, (label, _)) in self.docs.iter().enumerate() {
            if doc_index.insert(label.as_str(), i).is_some() {
                return Err(ctx(format!("duplicate document '{label}'")));
            }
        }
        let mut judgments = JudgmentMatrix::zeros(self.intents.len(), self.docs.len());
        for (line, doc, intent, grade) in &self.judgments {
            let err = |message: String| Error::Parse {
                line: *line,
                message,
            };
            let d = *doc_index
                .get(doc.as_str())
                .ok_or_else(|| err(format!("unknown document '{doc}'")))?;
            let t = *intent_index
                .get(intent.as_str())
                .ok_or_else(|| err(format!("unknown intent '{intent}'")))?;
            judgments
                .set(t, d, *grade)
                .map_err(|e| err(e.to_string()))?;
        }
        if opts.binarize {
            judgments = judgments.binarized();
        }
        let labels: Vec<String> = self.intents.iter().map(|(l, _)| l.clone()).collect();
        let given = self.intents.iter().filter(|(_, p)| p.is_some()).count();
        let mode = match opts.prob_mode {
            ProbMode::Auto if given == self.intents.len() && given > 0 => ProbMode::Explicit,
            ProbMode::Auto if given == 0 => ProbMode::Proportional,
            ProbMode::Auto => {
                return Err(ctx(
                    "either every intent or no intent must list a probability".into(),
                ))
            }
            m => m,
        };
        let intents = match mode {
            ProbMode::Explicit => {
                let probs: Vec<f64> = self
                    .intents
                    .iter()
                    .map(|(l, p)| p.ok_or_else(|| ctx(format!("intent '{l}' has no probability"))))
                    .collect::<Result<_>>()?;
                let sum: f64 = probs.iter().sum();
                if (sum - 1.0).abs() > FILE_PROB_TOL {
                    return Err(ctx(format!("intent probabilities sum to {sum}, not 1")));
                }
                let probs = if (sum - 1.0).abs() <= PROB_SUM_TOL {
                    probs
                } else {
                    probs.into_iter().map(|p| p / sum).collect()
                };
                IntentDistribution::new(labels, probs)
            }
            ProbMode::Proportional => IntentDistribution::proportional(labels, &judgments),
            ProbMode::Uniform => IntentDistribution::uniform(labels),
            ProbMode::Auto => unreachable!(),
        }
        .map_err(|e| ctx(e.to_string()))?;
        let documents = self
            .docs
            .into_iter()
            .enumerate()
            .map(|(i, (label, text))| match text {
                Some((t, b)) => Document::new(i, label).with_text(t, b),
                None => Document::new(i, label),
            })
            .collect();
        QueryCase::new(self.query_id.clone(), documents, intents, judgments)
            .map_err(|e| ctx(e.to_string()))
    }
}

fn parse_grade(field: &str, line: usize, what: &str) -> Result<f64> {
    let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("{what} '{field}' is not a number"),
    })?;
    if !v.is_finite() || v < 0.0 {
        return Err(Error::Parse {
            line,
            message: format!("{what} {v} must be a finite nonnegative number"),
        });
    }
    Ok(v)
}

pub fn parse_corpus(text: &str, opts: &LoadOptions) -> Result<Vec<QueryCase>> {
    let mut cases = Vec::new();
    let mut block: Option<Block> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        if raw.trim().is_empty() || raw.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').collect();
        let err = |message: String| Error::Parse { line, message };
        let arity = |lo: usize, hi: usize| {
            if fields.len() < lo || fields.len() > hi {
                Err(err(format!(
                    "'{}' record takes {} fields, found {}",
                    fields[0],
                    if lo == hi {
                        lo.to_string()
                    } else {
                        format!("{lo}-{hi}")
                    },
                    fields.len()
                )))
            } else {
                Ok(())
            }
        };
        match fields[0] {
            "query" => {
                arity(2, 2)?;
                if block.is_some() {
                    return Err(err("'query' before 'end' of the previous query".into()));
                }
                block = Some(Block {
                    query_id: unescape(fields[1], line)?,
                    start: line,
                    ..Default::default()
                });
            }
            "end" => {
                arity(1, 1)?;
                let b = block
                    .take()
                    .ok_or_else(|| err("'end' without 'query'".into()))?;
                cases.push(b.finish(opts)?);
            }
            kind @ ("intent" | "doc" | "judge") => {
                let b = block
                    .as_mut()
                    .ok_or_else(|| err(format!("'{kind}' outside a query block")))?;
                match kind {
                    "intent" => {
                        arity(2, 3)?;
                        let p = fields
                            .get(2)
                            .map(|f| parse_grade(f, line, "probability"))
                            .transpose()?;
                        b.intents.push((unescape(fields[1], line)?, p));
                    }
                    "doc" => {
                        arity(2, 4)?;
                        let text = if fields.len() > 2 {
                            let title = unescape(fields[2], line)?;
                            let body = fields.get(3).map(|f| unescape(f, line)).transpose()?;
                            Some((title, body.unwrap_or_default()))
                        } else {
                            None
                        };
                        b.docs.push((unescape(fields[1], line)?, text));
                    }
                    _ => {
                        arity(4, 4)?;
                        let grade = parse_grade(fields[3], line, "grade")?;
                        b.judgments.push((
                            line,
                            unescape(fields[1], line)?,
                            unescape(fields[2], line)?,
                            grade,
                        ));
                    }
                }
            }
            other => return Err(err(format!("unknown record type '{other}'"))),
        }
    }
    if let Some(b) = block {
        return Err(Error::Parse {
            line: b.start,
            message: format!("query {} is missing its 'end' record", b.query_id),
        });
    }
    Ok(cases)
}

pub fn load_corpus(path: &Path, opts: &LoadOptions) -> Result<Vec<QueryCase>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_corpus(&text, opts)
}

/// Serializes cases with explicit probabilities; loading the result with default options
/// yields equal cases.
pub fn format_corpus(cases: &[QueryCase]) -> String {
    let mut out = String::new();
    for case in cases {
        out.push_str(&format!("query\t{}\n", escape(case.query_id())));
        for t in 0..case.n_intents() {
            out.push_str(&format!(
                "intent\t{}\t{:?}\n",
                escape(case.intents().label(t)),
                case.intents().prob(t)
            ));
        }
        for doc in case.documents() {
            if doc.has_text() {
                out.push_str(&format!(
                    "doc\t{}\t{}\t{}\n",
                    escape(&doc.label),
                    escape(&doc.title),
                    escape(&doc.body)
                ));
            } else {
                out.push_str(&format!("doc\t{}\n", escape(&doc.label)));
            }
        }
        for d in 0..case.n_docs() {
            for t in 0..case.n_intents() {
                let g = case.judgments().get(t, d);
                if g != 0.0 {
                    out.push_str(&format!(
                        "judge\t{}\t{}\t{g:?}\n",
                        escape(&case.documents()[d].label),
                        escape(case.intents().label(t))
                    ));
                }
            }
        }
        out.push_str("end\n");
    }
    out
}

/// Imports `topic TAB intent TAB doc TAB grade` qrels. Queries, intents and documents keep
/// their order of first appearance; documents carry no text.
pub fn parse_qrels(text: &str, opts: &LoadOptions) -> Result<Vec<QueryCase>> {
    let mut order: Vec<String> = Vec::new();
    let mut blocks: HashMap<String, Block> = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() || raw.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                line,
                message: format!("expected 4 tab-separated fields, found {}", fields.len()),
            });
        }
        let (topic, intent, doc) = (fields[0], fields[1], fields[2]);
        let grade = parse_grade(fields[3], line, "grade")?;
        let b = blocks.entry(topic.to_string()).or_insert_with(|| {
            order.push(topic.to_string());
            Block {
                query_id: topic.to_string(),
                start: line,
                ..Default::default()
            }
        });
        if !b.intents.iter().any(|(l, _)| l == intent) {
            b.intents.push((intent.to_string(), None));
        }
        if !b.docs.iter().any(|(l, _)| l == doc) {
            b.docs.push((doc.to_string(), None));
        }
        b.judgments
            .push((line, doc.to_string(), intent.to_string(), grade));
    }
    // Repeated judgments of a pair keep the largest grade.
    order
        .into_iter()
        .map(|q| {
            let mut b = blocks.remove(&q).expect("recorded");
            let mut best: HashMap<(String, String), (usize, f64)> = HashMap::new();
            for (line, d, t, g) in b.judgments.drain(..) {
                let e = best.entry((d, t)).or_insert((line, g));
                e.1 = e.1.max(g);
            }
            let mut js: Vec<_> = best
                .into_iter()
                .map(|((d, t), (l, g))| (l, d, t, g))
                .collect();
            js.sort_by_key(|j| j.0);
            b.judgments = js;
            b.finish(opts)
        })
        .collect()
}

fn check_label(label: &str) -> Result<()> {
    if label.is_empty() || label.contains(|c: char| c == ':' || c == ',' || c.is_whitespace()) {
        return Err(Error::InvalidParameter(format!(
            "document label '{label}' cannot be written in a rankings file"
        )));
    }
    Ok(())
}

/// `head:tail,tail head:tail ...`; a head without tail is written alone.
pub fn format_ranking(ranking: &TwoLevelRanking, case: &QueryCase) -> Result<String> {
    let mut rows = Vec::with_capacity(ranking.len());
    for row in &ranking.rows {
        let label = |d: DocumentId| -> Result<&str> {
            let l = case
                .documents()
                .get(d.0)
                .map(|doc| doc.label.as_str())
                .ok_or_else(|| Error::InvalidParameter(format!("document {d} out of range")))?;
            check_label(l)?;
            Ok(l)
        };
        let mut s = label(row.head)?.to_string();
        if !row.tail.is_empty() {
            let tail: Vec<&str> = row.tail.iter().map(|&d| label(d)).collect::<Result<_>>()?;
            s.push(':');
            s.push_str(&tail.join(","));
        }
        rows.push(s);
    }
    Ok(rows.join(" "))
}

pub fn parse_ranking(text: &str, case: &QueryCase) -> Result<TwoLevelRanking> {
    let lookup = |l: &str| {
        case.doc_by_label(l).ok_or_else(|| {
            Error::InvalidParameter(format!("query {}: unknown document '{l}'", case.query_id()))
        })
    };
    let mut rows = Vec::new();
    for token in text.split_whitespace() {
        let (head, tail) = match token.split_once(':') {
            Some((h, t)) => (h, t),
            None => (token, ""),
        };
        let tail = tail
            .split(',')
            .filter(|s| !s.is_empty())
            .map(lookup)
            .collect::<Result<Vec<_>>>()?;
        rows.push(Row::with_tail(lookup(head)?, tail));
    }
    Ok(TwoLevelRanking::from_rows(rows))
}

/// Lines of `query_id TAB ranking`, in case order.
pub fn format_rankings(cases: &[QueryCase], rankings: &[TwoLevelRanking]) -> Result<String> {
    let mut out = String::new();
    for (case, r) in cases.iter().zip(rankings) {
        out.push_str(&format!(
            "{}\t{}\n",
            case.query_id(),
            format_ranking(r, case)?
        ));
    }
    Ok(out)
}

/// Rankings keyed by query id; every listed query must exist in `cases`.
pub fn parse_rankings(text: &str, cases: &[QueryCase]) -> Result<Vec<(usize, TwoLevelRanking)>> {
    let index: HashMap<&str, usize> = cases
        .iter()
        .enumerate()
        .map(|(i, c)| (c.query_id(), i))
        .collect();
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() || raw.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::Parse {
            line: i + 1,
            message,
        };
        let (q, r) = raw
            .split_once('\t')
            .ok_or_else(|| err("expected 'query_id<TAB>ranking'".into()))?;
        let &k = index
            .get(q)
            .ok_or_else(|| err(format!("unknown query '{q}'")))?;
        let ranking = parse_ranking(r, &cases[k]).map_err(|e| err(e.to_string()))?;
        out.push((k, ranking));
    }
    Ok(out)
}

/// Writes `contents` to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    tmp.write_all(contents.as_bytes())?;
    tmp.flush()?;
    tmp.persist(path)
        .map_err(|e| Error::Io(format!("{}: {}", path.display(), e.error)))?;
    Ok(())
}
