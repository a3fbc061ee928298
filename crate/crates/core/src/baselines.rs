//! Static and heuristic dynamic baselines, and the comparison harness.

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::{build_pair_features, FeatureTemplate};
use crate::gains::{dynamic_utility_expected, ConcaveGain, GainSpec};
use crate::greedy::{greedy_two_level, GreedyOptions};
use crate::ranking::{DocumentId, QueryCase, Row, ShapeParams, TwoLevelRanking};
use crate::usermodel::truncated_metric;

fn static_shape(length: usize) -> Result<ShapeParams> {
    ShapeParams::new(length, 0)
}

/// Coverage greedy: SAT(1) with no tails.
pub fn stat_div(case: &QueryCase, length: usize) -> Result<TwoLevelRanking> {
    let spec = GainSpec::new(ConcaveGain::saturate(1.0)?);
    greedy_two_level(
        case,
        &spec,
        &static_shape(length)?,
        GreedyOptions::default(),
    )
}

/// Expected-relevance ordering: identity gain with no tails. Exactly optimal.
pub fn stat_depth(case: &QueryCase, length: usize) -> Result<TwoLevelRanking> {
    let spec = GainSpec::new(ConcaveGain::Identity);
    greedy_two_level(
        case,
        &spec,
        &static_shape(length)?,
        GreedyOptions::default(),
    )
}

/// Static ranking optimizing the evaluation measure itself.
pub fn stat_util(case: &QueryCase, spec: &GainSpec, length: usize) -> Result<TwoLevelRanking> {
    greedy_two_level(case, spec, &static_shape(length)?, GreedyOptions::default())
}

/// A seeded random permutation; the first `L` documents become heads and the rest fill the
/// tails row by row.
pub fn dyn_rand(case: &QueryCase, shape: &ShapeParams, seed: u64) -> Result<TwoLevelRanking> {
    if case.n_docs() == 0 {
        return Err(Error::EmptyCandidates);
    }
    let mut order: Vec<usize> = (0..case.n_docs()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_rows = shape.length().min(order.len());
    let mut rows: Vec<Row> = order[..n_rows]
        .iter()
        .map(|&h| Row::new(DocumentId(h)))
        .collect();
    let mut rest = order[n_rows..].iter();
    'fill: for row in &mut rows {
        for _ in 0..shape.width() {
            match rest.next() {
                Some(&d) => row.tail.push(DocumentId(d)),
                None => break 'fill,
            }
        }
    }
    Ok(TwoLevelRanking::from_rows(rows))
}

/// Coverage-greedy heads; each tail takes the unused documents most TFIDF-similar to its head.
pub fn dyn_div(case: &QueryCase, shape: &ShapeParams) -> Result<TwoLevelRanking> {
    let heads = stat_div(case, shape.length())?;
    let pairs = build_pair_features(case, &FeatureTemplate::default())?;
    let n = case.n_docs();
    let mut used = vec![false; n];
    for h in heads.heads() {
        used[h.0] = true;
    }
    let mut rows = Vec::with_capacity(heads.len());
    for h in heads.heads() {
        let mut cands: Vec<usize> = (0..n).filter(|&d| !used[d]).collect();
        cands.sort_by(|&a, &b| {
            pairs
                .cosine(h.0, b)
                .total_cmp(&pairs.cosine(h.0, a))
                .then(a.cmp(&b))
        });
        let tail: Vec<DocumentId> = cands
            .into_iter()
            .take(shape.width())
            .map(DocumentId)
            .collect();
        for d in &tail {
            used[d.0] = true;
        }
        rows.push(Row::with_tail(h, tail));
    }
    Ok(TwoLevelRanking::from_rows(rows))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Dyn,
    StatUtil,
    StatDepth,
    StatDiv,
    DynRand,
    DynDiv,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Dyn,
        Method::StatUtil,
        Method::StatDepth,
        Method::StatDiv,
        Method::DynRand,
        Method::DynDiv,
    ];

    pub fn needs_text(self) -> bool {
        self == Method::DynDiv
    }

    /// The ranking this method produces for `case`, optimizing `spec` where applicable.
    pub fn rank(
        self,
        case: &QueryCase,
        spec: &GainSpec,
        shape: &ShapeParams,
        seed: u64,
    ) -> Result<TwoLevelRanking> {
        match self {
            Method::Dyn => greedy_two_level(case, spec, shape, GreedyOptions::default()),
            Method::StatUtil => stat_util(case, spec, shape.length()),
            Method::StatDepth => stat_depth(case, shape.length()),
            Method::StatDiv => stat_div(case, shape.length()),
            Method::DynRand => dyn_rand(case, shape, seed),
            Method::DynDiv => dyn_div(case, shape),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Dyn => "Dyn",
            Method::StatUtil => "Stat-Util",
            Method::StatDepth => "Stat-Depth",
            Method::StatDiv => "Stat-Div",
            Method::DynRand => "Dyn-Rand",
            Method::DynDiv => "Dyn-Div",
        })
    }
}

/// Per-query values collected in input order, then summed serially.
fn mean_over<F>(cases: &[QueryCase], parallel: bool, f: F) -> Result<f64>
where
    F: Fn(&QueryCase) -> Result<f64> + Sync,
{
    if cases.is_empty() {
        return Err(Error::InvalidParameter("no queries".into()));
    }
    let values: Vec<f64> = if parallel {
        cases.par_iter().map(&f).collect::<Result<_>>()?
    } else {
        cases.iter().map(&f).collect::<Result<_>>()?
    };
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// `table[e][o]`: mean expected utility, evaluated under gain `e`, of the greedy rankings
/// optimizing gain `o`, for `e, o` over PREC, SQRT, LOG, SAT2. Macro-averaged over queries.
pub fn cross_optimize_table(
    cases: &[QueryCase],
    shape: &ShapeParams,
    parallel: bool,
) -> Result<[[f64; 4]; 4]> {
    let gains = ConcaveGain::standard_four();
    let mut table = [[0.0; 4]; 4];
    for (i, opt) in gains.iter().enumerate() {
        let opt_spec = GainSpec::new(opt.clone());
        let per_query = |case: &QueryCase| -> Result<[f64; 4]> {
            let r = greedy_two_level(case, &opt_spec, shape, GreedyOptions::default())?;
            let mut row = [0.0; 4];
            for (j, ev) in gains.iter().enumerate() {
                row[j] = dynamic_utility_expected(&r, case, &GainSpec::new(ev.clone()))?;
            }
            Ok(row)
        };
        let rows: Vec<[f64; 4]> = if parallel {
            cases.par_iter().map(per_query).collect::<Result<_>>()?
        } else {
            cases.iter().map(per_query).collect::<Result<_>>()?
        };
        if rows.is_empty() {
            return Err(Error::InvalidParameter("no queries".into()));
        }
        for row in &rows {
            for (e, v) in row.iter().enumerate() {
                table[e][i] += v;
            }
        }
        for row in table.iter_mut() {
            row[i] /= rows.len() as f64;
        }
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub method: Method,
    /// Mean truncated metric at the cutoff.
    pub truncated: f64,
    /// Mean expected dynamic utility.
    pub utility: f64,
}

/// Mean metrics of every method under `spec`. Text-dependent methods are skipped unless every
/// query has text.
pub fn compare_report(
    cases: &[QueryCase],
    spec: &GainSpec,
    shape: &ShapeParams,
    k: usize,
    seed: u64,
    parallel: bool,
) -> Result<Vec<CompareRow>> {
    let has_text = cases.iter().all(QueryCase::has_text);
    let mut out = Vec::new();
    for method in Method::ALL {
        if method.needs_text() && !has_text {
            continue;
        }
        let pair = |case: &QueryCase| -> Result<(f64, f64)> {
            let r = method.rank(case, spec, shape, seed)?;
            Ok((
                truncated_metric(&r, case, spec, k)?,
                dynamic_utility_expected(&r, case, spec)?,
            ))
        };
        let truncated = mean_over(cases, parallel, |c| pair(c).map(|p| p.0))?;
        let utility = mean_over(cases, parallel, |c| pair(c).map(|p| p.1))?;
        out.push(CompareRow {
            method,
            truncated,
            utility,
        });
    }
    Ok(out)
}

/// Mean truncated metric at `k` of the greedy ranking for each width.
pub fn width_sweep(
    cases: &[QueryCase],
    spec: &GainSpec,
    length: usize,
    widths: &[usize],
    k: usize,
    parallel: bool,
) -> Result<Vec<(usize, f64)>> {
    widths
        .iter()
        .map(|&w| {
            let shape = ShapeParams::new(length, w)?;
            let m = mean_over(cases, parallel, |case| {
                let r = greedy_two_level(case, spec, &shape, GreedyOptions::default())?;
                truncated_metric(&r, case, spec, k)
            })?;
            Ok((w, m))
        })
        .collect()
}
