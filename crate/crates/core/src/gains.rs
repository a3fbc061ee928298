//! Concave gain functions, discount schedules and the static and dynamic utility measures.
//!
//! For an intent `t`, a static ranking `(d_1, .., d_k)` has utility `g(sum_i gamma_i U(d_i|t))`.
//! A two-level ranking adds, for each row `i`, the tail terms `gamma_ij U(d_i0|t) U(d_ij|t)`
//! inside `g`, so a tail only pays off for intents its head is relevant to. Expected utilities
//! average over `P[t|q]`.
//!
//! Judgments are used as given: with graded (non-binary) inputs the product `U(head) U(tail)`
//! may exceed either factor.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::ranking::{validate_structure, DocumentId, QueryCase, ShapeParams, TwoLevelRanking};

/// A piecewise-linear concave gain given by breakpoints and non-increasing slopes.
///
/// `slopes[k]` applies on `[breakpoints[k], breakpoints[k + 1])`; the last slope extends to
/// infinity. `breakpoints[0]` must be 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Tabulated {
    breakpoints: Vec<f64>,
    slopes: Vec<f64>,
}

impl Tabulated {
    pub fn new(breakpoints: Vec<f64>, slopes: Vec<f64>) -> Result<Self> {
        if breakpoints.is_empty() || breakpoints.len() != slopes.len() {
            return Err(Error::InvalidGain(
                "tabulated gain needs one slope per breakpoint".into(),
            ));
        }
        if breakpoints[0] != 0.0 {
            return Err(Error::InvalidGain("first breakpoint must be 0".into()));
        }
        if breakpoints
            .windows(2)
            .any(|w| w[0] >= w[1] || w[0].is_nan() || w[1].is_nan())
        {
            return Err(Error::InvalidGain(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        if slopes.iter().any(|s| !s.is_finite() || *s < 0.0)
            || slopes.windows(2).any(|w| w[1] > w[0])
        {
            return Err(Error::InvalidGain(
                "slopes must be nonnegative and non-increasing".into(),
            ));
        }
        Ok(Tabulated {
            breakpoints,
            slopes,
        })
    }

    fn eval(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.slopes.len() {
            let lo = self.breakpoints[k];
            if x <= lo {
                break;
            }
            let hi = self
                .breakpoints
                .get(k + 1)
                .copied()
                .unwrap_or(f64::INFINITY);
            acc += self.slopes[k] * (x.min(hi) - lo);
        }
        acc
    }
}

/// The diminishing-returns function `g`.
#[derive(Debug, Clone, PartialEq)]
pub enum ConcaveGain {
    /// `g(x) = x`, the modular PREC measure.
    Identity,
    /// `g(x) = sqrt(x)`.
    Sqrt,
    /// `g(x) = ln(1 + x)`.
    Log,
    /// `g(x) = min(x, k)`; `k = 1` is intent coverage, `k = 2` is SAT2.
    Saturate(f64),
    Tabulated(Tabulated),
}

impl ConcaveGain {
    pub fn saturate(k: f64) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::InvalidGain(format!(
                "saturation level must be positive, got {k}"
            )));
        }
        Ok(ConcaveGain::Saturate(k))
    }

    /// `g(x)`, rejecting negative arguments.
    pub fn apply(&self, x: f64) -> Result<f64> {
        if x < 0.0 || x.is_nan() {
            return Err(Error::NegativeArgument(x));
        }
        Ok(self.eval(x))
    }

    #[inline]
    pub(crate) fn eval(&self, x: f64) -> f64 {
        match self {
            ConcaveGain::Identity => x,
            ConcaveGain::Sqrt => x.sqrt(),
            ConcaveGain::Log => x.ln_1p(),
            ConcaveGain::Saturate(k) => x.min(*k),
            ConcaveGain::Tabulated(t) => t.eval(x),
        }
    }

    pub fn is_modular(&self) -> bool {
        matches!(self, ConcaveGain::Identity)
    }

    /// The four measures compared in cross-optimization tables, in table order.
    pub fn standard_four() -> [ConcaveGain; 4] {
        [
            ConcaveGain::Identity,
            ConcaveGain::Sqrt,
            ConcaveGain::Log,
            ConcaveGain::Saturate(2.0),
        ]
    }
}

impl fmt::Display for ConcaveGain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConcaveGain::Identity => write!(f, "prec"),
            ConcaveGain::Sqrt => write!(f, "sqrt"),
            ConcaveGain::Log => write!(f, "log"),
            ConcaveGain::Saturate(k) if *k == 1.0 => write!(f, "sat1"),
            ConcaveGain::Saturate(k) if *k == 2.0 => write!(f, "sat2"),
            ConcaveGain::Saturate(k) => write!(f, "sat:{k}"),
            ConcaveGain::Tabulated(_) => write!(f, "tabulated"),
        }
    }
}

impl FromStr for ConcaveGain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "prec" | "identity" => Ok(ConcaveGain::Identity),
            "sqrt" => Ok(ConcaveGain::Sqrt),
            "log" => Ok(ConcaveGain::Log),
            "sat1" => Ok(ConcaveGain::Saturate(1.0)),
            "sat2" => Ok(ConcaveGain::Saturate(2.0)),
            other => match other.strip_prefix("sat:") {
                Some(k) => {
                    let k: f64 = k
                        .parse()
                        .map_err(|_| Error::InvalidGain(format!("bad saturation level in {s}")))?;
                    ConcaveGain::saturate(k)
                }
                None => Err(Error::InvalidGain(format!(
                    "unknown gain {s}; expected prec, sqrt, log, sat1, sat2 or sat:<k>"
                ))),
            },
        }
    }
}

/// Positional discount factors `gamma_i` (first level) and `gamma_ij` (second level).
#[derive(Debug, Clone, PartialEq, Default)]
pub enum DiscountSchedule {
    /// Every factor is 1.
    #[default]
    Unit,
    Explicit {
        first_level: Vec<f64>,
        second_level: Vec<Vec<f64>>,
    },
}

impl DiscountSchedule {
    pub fn explicit(first_level: Vec<f64>, second_level: Vec<Vec<f64>>) -> Result<Self> {
        let ok = |v: &[f64]| {
            v.iter().all(|x| x.is_finite() && *x >= 0.0) && v.windows(2).all(|w| w[0] >= w[1])
        };
        if !ok(&first_level) {
            return Err(Error::InvalidGain(
                "first-level discounts must be nonnegative and non-increasing".into(),
            ));
        }
        if let Some(i) = second_level.iter().position(|row| !ok(row)) {
            return Err(Error::InvalidGain(format!(
                "second-level discounts of row {i} must be nonnegative and non-increasing"
            )));
        }
        Ok(DiscountSchedule::Explicit {
            first_level,
            second_level,
        })
    }

    pub fn is_unit(&self) -> bool {
        matches!(self, DiscountSchedule::Unit)
    }

    /// `gamma_i` for the 0-based row `i`.
    pub fn first(&self, row: usize) -> Result<f64> {
        match self {
            DiscountSchedule::Unit => Ok(1.0),
            DiscountSchedule::Explicit { first_level, .. } => first_level
                .get(row)
                .copied()
                .ok_or_else(|| Error::MissingDiscount(format!("first-level position {row}"))),
        }
    }

    /// `gamma_ij` for 0-based row `i` and 0-based tail slot `j`.
    pub fn second(&self, row: usize, slot: usize) -> Result<f64> {
        match self {
            DiscountSchedule::Unit => Ok(1.0),
            DiscountSchedule::Explicit { second_level, .. } => second_level
                .get(row)
                .and_then(|r| r.get(slot))
                .copied()
                .ok_or_else(|| {
                    Error::MissingDiscount(format!("second-level position ({row}, {slot})"))
                }),
        }
    }
}

/// A full performance measure: gain function plus discounts.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSpec {
    pub gain: ConcaveGain,
    pub discounts: DiscountSchedule,
}

impl GainSpec {
    pub fn new(gain: ConcaveGain) -> Self {
        GainSpec {
            gain,
            discounts: DiscountSchedule::Unit,
        }
    }

    pub fn with_discounts(gain: ConcaveGain, discounts: DiscountSchedule) -> Self {
        GainSpec { gain, discounts }
    }
}

impl FromStr for GainSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(GainSpec::new(s.parse()?))
    }
}

pub fn gain_apply(g: &ConcaveGain, x: f64) -> Result<f64> {
    g.apply(x)
}

/// `g(sum_i gamma_i U(d_i|t))` for a static ranking.
pub fn static_utility_intent(
    ranking: &[DocumentId],
    intent: usize,
    case: &QueryCase,
    spec: &GainSpec,
) -> Result<f64> {
    let mut sum = 0.0;
    for (i, &d) in ranking.iter().enumerate() {
        check_doc(d, case)?;
        sum += spec.discounts.first(i)? * case.utility(intent, d);
    }
    Ok(spec.gain.eval(sum))
}

pub fn static_utility_expected(
    ranking: &[DocumentId],
    case: &QueryCase,
    spec: &GainSpec,
) -> Result<f64> {
    let mut total = 0.0;
    for t in 0..case.n_intents() {
        total += case.intents().prob(t) * static_utility_intent(ranking, t, case, spec)?;
    }
    Ok(total)
}

fn check_doc(d: DocumentId, case: &QueryCase) -> Result<()> {
    if d.0 >= case.n_docs() {
        return Err(Error::InvalidParameter(format!(
            "document {d} outside the {} candidates",
            case.n_docs()
        )));
    }
    Ok(())
}

fn check_ranking(ranking: &TwoLevelRanking, n_docs: usize) -> Result<()> {
    let width = ranking.rows.iter().map(|r| r.tail.len()).max().unwrap_or(0);
    let shape = ShapeParams::new(ranking.len().max(1), width)?;
    validate_structure(ranking, n_docs, &shape)?;
    Ok(())
}

/// Per-intent utility of a two-level ranking.
pub fn dynamic_utility_intent(
    ranking: &TwoLevelRanking,
    intent: usize,
    case: &QueryCase,
    spec: &GainSpec,
) -> Result<f64> {
    check_ranking(ranking, case.n_docs())?;
    let mut sum = 0.0;
    for (i, row) in ranking.rows.iter().enumerate() {
        let uh = case.utility(intent, row.head);
        sum += spec.discounts.first(i)? * uh;
        for (j, &d) in row.tail.iter().enumerate() {
            sum += spec.discounts.second(i, j)? * uh * case.utility(intent, d);
        }
    }
    Ok(spec.gain.eval(sum))
}

pub fn dynamic_utility_expected(
    ranking: &TwoLevelRanking,
    case: &QueryCase,
    spec: &GainSpec,
) -> Result<f64> {
    let mut total = 0.0;
    for t in 0..case.n_intents() {
        total += case.intents().prob(t) * dynamic_utility_intent(ranking, t, case, spec)?;
    }
    Ok(total)
}

/// A weighted sum of per-component dynamic utilities plus an optional modular head-tail term:
///
/// `sum_c weight_c * g(S_c(ranking)) + sum_{(h, d) in ranking} pair(h, d)`
///
/// where `S_c` is the inner sum of the dynamic utility with component utilities `U(d|c)`.
/// With intents as components and `P[t|q]` as weights this is the expected dynamic utility;
/// with words as components and learned word scores it is the learned discriminant.
#[derive(Debug, Clone)]
pub struct Objective {
    n_docs: usize,
    weights: Vec<f64>,
    /// Component-major dense utilities, `dense[c * n_docs + d]`.
    dense: Vec<f64>,
    /// Nonzero `(component, utility)` pairs per document, in component order.
    by_doc: Vec<Vec<(usize, f64)>>,
    /// Row-major `pair[h * n_docs + d]`, score of tail `d` under head `h`.
    pair: Option<Vec<f64>>,
}

impl Objective {
    /// `utilities[c][d]` is the utility of document `d` for component `c`.
    pub fn new(weights: Vec<f64>, utilities: &[Vec<f64>], n_docs: usize) -> Result<Self> {
        if weights.len() != utilities.len() {
            return Err(Error::DimensionMismatch {
                expected: weights.len(),
                got: utilities.len(),
            });
        }
        let mut dense = Vec::with_capacity(weights.len() * n_docs);
        let mut by_doc = vec![Vec::new(); n_docs];
        for (c, row) in utilities.iter().enumerate() {
            if row.len() != n_docs {
                return Err(Error::DimensionMismatch {
                    expected: n_docs,
                    got: row.len(),
                });
            }
            for (d, &u) in row.iter().enumerate() {
                if !u.is_finite() || u < 0.0 {
                    return Err(Error::InvalidCase(format!(
                        "component {c} has invalid utility {u} for document {d}"
                    )));
                }
                if u != 0.0 {
                    by_doc[d].push((c, u));
                }
                dense.push(u);
            }
        }
        if let Some((c, w)) = weights.iter().enumerate().find(|(_, w)| !w.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "component {c} has non-finite weight {w}"
            )));
        }
        Ok(Objective {
            n_docs,
            weights,
            dense,
            by_doc,
            pair: None,
        })
    }

    /// Expected dynamic utility of `case`: intents weighted by `P[t|q]`.
    pub fn from_case(case: &QueryCase) -> Self {
        let rows: Vec<Vec<f64>> = (0..case.n_intents())
            .map(|t| {
                (0..case.n_docs())
                    .map(|d| case.judgments().get(t, d))
                    .collect()
            })
            .collect();
        Objective::new(case.intents().probs().to_vec(), &rows, case.n_docs())
            .expect("validated case")
    }

    /// Adds a modular head-tail score matrix (`pair[h][d]`).
    pub fn with_pair_scores(mut self, pair: Vec<f64>) -> Result<Self> {
        if pair.len() != self.n_docs * self.n_docs {
            return Err(Error::DimensionMismatch {
                expected: self.n_docs * self.n_docs,
                got: pair.len(),
            });
        }
        if pair.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidParameter("non-finite pair score".into()));
        }
        self.pair = Some(pair);
        Ok(self)
    }

    /// Appends components, e.g. a loss term over intents added to a word objective.
    pub fn extend(mut self, other: &Objective) -> Result<Self> {
        if other.n_docs != self.n_docs {
            return Err(Error::DimensionMismatch {
                expected: self.n_docs,
                got: other.n_docs,
            });
        }
        let offset = self.weights.len();
        self.weights.extend_from_slice(&other.weights);
        self.dense.extend_from_slice(&other.dense);
        for (d, list) in other.by_doc.iter().enumerate() {
            self.by_doc[d].extend(list.iter().map(|&(c, u)| (c + offset, u)));
        }
        if let Some(p) = &other.pair {
            match &mut self.pair {
                Some(mine) => mine.iter_mut().zip(p).for_each(|(a, b)| *a += b),
                None => self.pair = Some(p.clone()),
            }
        }
        Ok(self)
    }

    /// Multiplies every component weight and pair score by `factor`.
    pub fn scaled(mut self, factor: f64) -> Self {
        self.weights.iter_mut().for_each(|w| *w *= factor);
        if let Some(p) = &mut self.pair {
            p.iter_mut().for_each(|x| *x *= factor);
        }
        self
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn has_pair_scores(&self) -> bool {
        self.pair.is_some()
    }

    #[inline]
    pub(crate) fn utility(&self, component: usize, doc: usize) -> f64 {
        self.dense[component * self.n_docs + doc]
    }

    #[inline]
    pub(crate) fn doc_components(&self, doc: usize) -> &[(usize, f64)] {
        &self.by_doc[doc]
    }

    #[inline]
    pub(crate) fn pair_score(&self, head: usize, tail: usize) -> f64 {
        self.pair
            .as_ref()
            .map_or(0.0, |p| p[head * self.n_docs + tail])
    }

    /// True when every weight is nonnegative.
    pub fn is_monotone(&self) -> bool {
        self.weights.iter().all(|&w| w >= 0.0)
    }

    /// Inner sums `S_c` for every component.
    pub fn inner_sums(
        &self,
        ranking: &TwoLevelRanking,
        discounts: &DiscountSchedule,
    ) -> Result<Vec<f64>> {
        check_ranking(ranking, self.n_docs)?;
        let mut sums = vec![0.0; self.weights.len()];
        for (i, row) in ranking.rows.iter().enumerate() {
            let gh = discounts.first(i)?;
            let h = row.head.0;
            for &(c, u) in &self.by_doc[h] {
                sums[c] += gh * u;
            }
            for (j, &d) in row.tail.iter().enumerate() {
                let gt = discounts.second(i, j)?;
                for &(c, u) in &self.by_doc[d.0] {
                    let uh = self.utility(c, h);
                    if uh != 0.0 {
                        sums[c] += gt * uh * u;
                    }
                }
            }
        }
        Ok(sums)
    }

    /// Per-component `g(S_c)`, unweighted.
    pub fn component_utilities(
        &self,
        ranking: &TwoLevelRanking,
        spec: &GainSpec,
    ) -> Result<Vec<f64>> {
        Ok(self
            .inner_sums(ranking, &spec.discounts)?
            .into_iter()
            .map(|s| spec.gain.eval(s))
            .collect())
    }

    /// Sum of pair scores over realized head-tail pairs.
    pub fn pair_total(&self, ranking: &TwoLevelRanking) -> f64 {
        let mut total = 0.0;
        if self.pair.is_some() {
            for row in &ranking.rows {
                for d in &row.tail {
                    total += self.pair_score(row.head.0, d.0);
                }
            }
        }
        total
    }

    pub fn value(&self, ranking: &TwoLevelRanking, spec: &GainSpec) -> Result<f64> {
        let sums = self.inner_sums(ranking, &spec.discounts)?;
        let mut total = 0.0;
        for (c, s) in sums.into_iter().enumerate() {
            total += self.weights[c] * spec.gain.eval(s);
        }
        Ok(total + self.pair_total(ranking))
    }
}

/// One step of ranking construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extension {
    /// Append a new row with this head.
    NewRow(DocumentId),
    /// Append `doc` to the tail of row `row`.
    AppendTail { row: usize, doc: DocumentId },
}

/// A partial ranking together with the cached component inner sums, supporting incremental
/// marginal-gain queries.
#[derive(Debug, Clone)]
pub struct DynamicState<'a> {
    objective: &'a Objective,
    spec: &'a GainSpec,
    ranking: TwoLevelRanking,
    used: Vec<bool>,
    sums: Vec<f64>,
    value: f64,
}

impl<'a> DynamicState<'a> {
    pub fn new(objective: &'a Objective, spec: &'a GainSpec) -> Self {
        DynamicState {
            objective,
            spec,
            ranking: TwoLevelRanking::new(),
            used: vec![false; objective.n_docs],
            sums: vec![0.0; objective.n_components()],
            value: 0.0,
        }
    }

    pub fn ranking(&self) -> &TwoLevelRanking {
        &self.ranking
    }

    pub fn into_ranking(self) -> TwoLevelRanking {
        self.ranking
    }

    /// Objective value of the current ranking, accumulated from marginal gains.
    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn sums(&self) -> &[f64] {
        &self.sums
    }

    pub fn is_used(&self, doc: DocumentId) -> bool {
        self.used.get(doc.0).copied().unwrap_or(false)
    }

    fn check(&self, ext: Extension) -> Result<()> {
        let doc = match ext {
            Extension::NewRow(d) => d,
            Extension::AppendTail { row, doc } => {
                if row >= self.ranking.len() {
                    return Err(Error::InvalidParameter(format!(
                        "cannot extend row {row} of a ranking with {} rows",
                        self.ranking.len()
                    )));
                }
                doc
            }
        };
        if doc.0 >= self.objective.n_docs {
            return Err(Error::InvalidParameter(format!(
                "document {doc} outside the {} candidates",
                self.objective.n_docs
            )));
        }
        if self.used[doc.0] {
            return Err(Error::InvalidParameter(format!(
                "document {doc} is already in the ranking"
            )));
        }
        Ok(())
    }

    /// Change in objective value if `ext` were applied.
    pub fn marginal_gain(&self, ext: Extension) -> Result<f64> {
        self.check(ext)?;
        let g = &self.spec.gain;
        let obj = self.objective;
        let mut gain = 0.0;
        match ext {
            Extension::NewRow(d) => {
                let gamma = self.spec.discounts.first(self.ranking.len())?;
                for &(c, u) in obj.doc_components(d.0) {
                    let s = self.sums[c];
                    gain += obj.weights[c] * (g.eval(s + gamma * u) - g.eval(s));
                }
            }
            Extension::AppendTail { row, doc } => {
                let r = &self.ranking.rows[row];
                let gamma = self.spec.discounts.second(row, r.tail.len())?;
                let h = r.head.0;
                for &(c, u) in obj.doc_components(doc.0) {
                    let uh = obj.utility(c, h);
                    if uh != 0.0 {
                        let s = self.sums[c];
                        gain += obj.weights[c] * (g.eval(s + gamma * uh * u) - g.eval(s));
                    }
                }
                gain += obj.pair_score(h, doc.0);
            }
        }
        Ok(gain)
    }

    /// Applies `ext`, returning its marginal gain.
    pub fn apply(&mut self, ext: Extension) -> Result<f64> {
        let gain = self.marginal_gain(ext)?;
        let obj = self.objective;
        match ext {
            Extension::NewRow(d) => {
                let gamma = self.spec.discounts.first(self.ranking.len())?;
                for &(c, u) in obj.doc_components(d.0) {
                    self.sums[c] += gamma * u;
                }
                self.ranking.rows.push(crate::ranking::Row::new(d));
                self.used[d.0] = true;
            }
            Extension::AppendTail { row, doc } => {
                let r = &self.ranking.rows[row];
                let gamma = self.spec.discounts.second(row, r.tail.len())?;
                let h = r.head.0;
                for &(c, u) in obj.doc_components(doc.0) {
                    let uh = obj.utility(c, h);
                    if uh != 0.0 {
                        self.sums[c] += gamma * uh * u;
                    }
                }
                self.ranking.rows[row].tail.push(doc);
                self.used[doc.0] = true;
            }
        }
        self.value += gain;
        Ok(gain)
    }
}

/// Marginal gain in expected dynamic utility of extending `partial` by `ext`.
///
/// Builds a fresh cache from `partial`; loops that extend one ranking repeatedly should keep a
/// [`DynamicState`] instead.
pub fn marginal_gain(
    partial: &TwoLevelRanking,
    ext: Extension,
    case: &QueryCase,
    spec: &GainSpec,
) -> Result<f64> {
    let objective = Objective::from_case(case);
    let mut state = DynamicState::new(&objective, spec);
    replay(&mut state, partial)?;
    state.marginal_gain(ext)
}

/// Applies every row and tail of `ranking` to `state` in row-major order.
pub fn replay(state: &mut DynamicState<'_>, ranking: &TwoLevelRanking) -> Result<()> {
    let base = state.ranking.len();
    for (i, row) in ranking.rows.iter().enumerate() {
        state.apply(Extension::NewRow(row.head))?;
        for &d in &row.tail {
            state.apply(Extension::AppendTail {
                row: base + i,
                doc: d,
            })?;
        }
    }
    Ok(())
}
