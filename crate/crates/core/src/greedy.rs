//! Nested greedy construction of two-level rankings, and an exhaustive oracle.
//!
//! The outer loop appends one row per iteration. For every unused document it builds a
//! candidate row with that document as head, greedily appending the `W` tail documents of
//! largest marginal gain, and then keeps the candidate row of largest total gain. Every argmax
//! breaks ties towards the lowest document id, so serial, parallel and lazy runs agree exactly.
//!
//! For monotone submodular objectives (nonnegative weights, unit discounts) the result is within
//! a factor `1 - exp(-(1 - 1/e))` of the optimum.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gains::{GainSpec, Objective};
use crate::ranking::{DocumentId, QueryCase, Row, ShapeParams, TwoLevelRanking};

/// `1 - exp(-(1 - 1/e))`.
pub fn approximation_bound() -> f64 {
    1.0 - (-(1.0 - (-1.0f64).exp())).exp()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GreedyOptions {
    /// Stop a tail, or the whole ranking, once no extension has positive gain.
    pub stop_on_zero: bool,
    /// Lazy evaluation of candidate rows via upper bounds. Ignored (plain evaluation is used)
    /// unless the objective is monotone and discounts are unit.
    pub lazy: bool,
    /// Build the candidate rows of an outer iteration on the rayon pool.
    pub parallel: bool,
}

impl GreedyOptions {
    pub fn stop_on_zero() -> Self {
        GreedyOptions {
            stop_on_zero: true,
            ..Default::default()
        }
    }
}

/// Nested greedy maximization of the expected dynamic utility of `case`.
pub fn greedy_two_level(
    case: &QueryCase,
    spec: &GainSpec,
    shape: &ShapeParams,
    opts: GreedyOptions,
) -> Result<TwoLevelRanking> {
    if case.n_docs() == 0 {
        return Err(Error::EmptyCandidates);
    }
    let objective = Objective::from_case(case);
    greedy_objective(&objective, spec, shape, opts)
}

/// Nested greedy over a surrogate objective, e.g. learned word scores plus head-tail pair
/// scores. Component weights must be nonnegative.
pub fn greedy_with_scores(
    objective: &Objective,
    spec: &GainSpec,
    shape: &ShapeParams,
    opts: GreedyOptions,
) -> Result<TwoLevelRanking> {
    if let Some((component, &weight)) = objective
        .weights()
        .iter()
        .enumerate()
        .find(|(_, &w)| w < 0.0)
    {
        return Err(Error::NegativeWeight { component, weight });
    }
    greedy_objective(objective, spec, shape, opts)
}

/// Nested greedy over an arbitrary objective. No guarantee holds when weights are negative.
pub fn greedy_objective(
    objective: &Objective,
    spec: &GainSpec,
    shape: &ShapeParams,
    opts: GreedyOptions,
) -> Result<TwoLevelRanking> {
    if objective.n_docs() == 0 {
        return Err(Error::EmptyCandidates);
    }
    let mut engine = Engine::new(objective, spec, *shape, opts.stop_on_zero);
    let lazy = opts.lazy && objective.is_monotone() && spec.discounts.is_unit();
    let mut bounds: Vec<Option<f64>> = vec![None; objective.n_docs()];
    while engine.rows.len() < shape.length() {
        let best = if lazy {
            engine.best_row_lazy(&mut bounds)?
        } else {
            engine.best_row(opts.parallel)?
        };
        let Some(best) = best else { break };
        if opts.stop_on_zero && best.gain <= 0.0 {
            break;
        }
        engine.commit(best)?;
    }
    Ok(TwoLevelRanking::from_rows(engine.rows))
}

#[derive(Debug, Clone)]
struct CandidateRow {
    head: usize,
    tail: Vec<usize>,
    gain: f64,
    /// `(component, new inner sum)` for every component the row touches.
    updates: Vec<(usize, f64)>,
}

struct Engine<'a> {
    obj: &'a Objective,
    spec: &'a GainSpec,
    shape: ShapeParams,
    stop_on_zero: bool,
    sums: Vec<f64>,
    used: Vec<bool>,
    rows: Vec<Row>,
}

/// Per-thread scratch: component index to slot in the row-local arrays.
struct Scratch {
    slot: Vec<usize>,
}

impl Scratch {
    fn new(n_components: usize) -> Self {
        Scratch {
            slot: vec![usize::MAX; n_components],
        }
    }
}

impl<'a> Engine<'a> {
    fn new(obj: &'a Objective, spec: &'a GainSpec, shape: ShapeParams, stop_on_zero: bool) -> Self {
        Engine {
            obj,
            spec,
            shape,
            stop_on_zero,
            sums: vec![0.0; obj.n_components()],
            used: vec![false; obj.n_docs()],
            rows: Vec::new(),
        }
    }

    fn free_docs(&self) -> Vec<usize> {
        (0..self.obj.n_docs()).filter(|&d| !self.used[d]).collect()
    }

    /// Greedily completes the row headed by `head` against the current state.
    fn build_row(&self, head: usize, scratch: &mut Scratch) -> Result<CandidateRow> {
        let g = &self.spec.gain;
        let weights = self.obj.weights();
        let row_index = self.rows.len();
        let gamma_h = self.spec.discounts.first(row_index)?;

        let touched = self.obj.doc_components(head);
        let mut local: Vec<f64> = Vec::with_capacity(touched.len());
        let mut gain = 0.0;
        for (k, &(c, uh)) in touched.iter().enumerate() {
            let s = self.sums[c];
            let s2 = s + gamma_h * uh;
            gain += weights[c] * (g.eval(s2) - g.eval(s));
            local.push(s2);
            scratch.slot[c] = k;
        }

        let mut tail: Vec<usize> = Vec::new();
        let in_row = |d: usize, tail: &[usize]| d == head || tail.contains(&d);
        for j in 0..self.shape.width() {
            let gamma = self.spec.discounts.second(row_index, j)?;
            let mut best: Option<(usize, f64)> = None;
            for d in 0..self.obj.n_docs() {
                if self.used[d] || in_row(d, &tail) {
                    continue;
                }
                let delta = self.tail_gain(head, d, gamma, &local, touched, scratch);
                if best.is_none_or(|(_, b)| delta > b) {
                    best = Some((d, delta));
                }
            }
            let Some((d, delta)) = best else { break };
            if self.stop_on_zero && delta <= 0.0 {
                break;
            }
            for &(c, u) in self.obj.doc_components(d) {
                let k = scratch.slot[c];
                if k != usize::MAX {
                    local[k] += gamma * touched[k].1 * u;
                }
            }
            gain += delta;
            tail.push(d);
        }

        for &(c, _) in touched {
            scratch.slot[c] = usize::MAX;
        }
        let updates = touched
            .iter()
            .zip(local)
            .map(|(&(c, _), s)| (c, s))
            .collect();
        Ok(CandidateRow {
            head,
            tail,
            gain,
            updates,
        })
    }

    #[inline]
    fn tail_gain(
        &self,
        head: usize,
        d: usize,
        gamma: f64,
        local: &[f64],
        touched: &[(usize, f64)],
        scratch: &Scratch,
    ) -> f64 {
        let g = &self.spec.gain;
        let weights = self.obj.weights();
        let mut delta = 0.0;
        for &(c, u) in self.obj.doc_components(d) {
            let k = scratch.slot[c];
            if k != usize::MAX {
                let s = local[k];
                delta += weights[c] * (g.eval(s + gamma * touched[k].1 * u) - g.eval(s));
            }
        }
        delta + self.obj.pair_score(head, d)
    }

    /// Upper bound on the gain of any row headed by `head`, valid for this and every later
    /// state when the objective is monotone submodular: head gain plus the `W` largest
    /// nonnegative single-document tail gains.
    fn row_bound(&self, head: usize, scratch: &mut Scratch) -> f64 {
        let g = &self.spec.gain;
        let weights = self.obj.weights();
        let touched = self.obj.doc_components(head);
        let mut local = Vec::with_capacity(touched.len());
        let mut bound = 0.0;
        for (k, &(c, uh)) in touched.iter().enumerate() {
            let s = self.sums[c];
            bound += weights[c] * (g.eval(s + uh) - g.eval(s));
            local.push(s + uh);
            scratch.slot[c] = k;
        }
        let mut singles: Vec<f64> = (0..self.obj.n_docs())
            .filter(|&d| d != head && !self.used[d])
            .map(|d| {
                self.tail_gain(head, d, 1.0, &local, touched, scratch)
                    .max(0.0)
            })
            .collect();
        for &(c, _) in touched {
            scratch.slot[c] = usize::MAX;
        }
        singles.sort_by(|a, b| b.total_cmp(a));
        bound += singles.iter().take(self.shape.width()).sum::<f64>();
        bound + 1e-9 * (1.0 + bound.abs())
    }

    fn best_row(&self, parallel: bool) -> Result<Option<CandidateRow>> {
        let free = self.free_docs();
        let n_comp = self.obj.n_components();
        let rows: Vec<CandidateRow> = if parallel {
            free.par_iter()
                .map_init(
                    || Scratch::new(n_comp),
                    |scratch, &h| self.build_row(h, scratch),
                )
                .collect::<Result<_>>()?
        } else {
            let mut scratch = Scratch::new(n_comp);
            free.iter()
                .map(|&h| self.build_row(h, &mut scratch))
                .collect::<Result<_>>()?
        };
        let mut best: Option<CandidateRow> = None;
        for row in rows {
            if best.as_ref().is_none_or(|b| row.gain > b.gain) {
                best = Some(row);
            }
        }
        Ok(best)
    }

    fn best_row_lazy(&self, bounds: &mut [Option<f64>]) -> Result<Option<CandidateRow>> {
        let mut scratch = Scratch::new(self.obj.n_components());
        let mut heap = BinaryHeap::new();
        for h in self.free_docs() {
            let bound = match bounds[h] {
                Some(b) => b,
                None => {
                    let b = self.row_bound(h, &mut scratch);
                    bounds[h] = Some(b);
                    b
                }
            };
            heap.push(HeapEntry {
                key: bound,
                head: h,
                exact: None,
            });
        }
        while let Some(entry) = heap.pop() {
            match entry.exact {
                Some(row) => return Ok(Some(row)),
                None => {
                    let row = self.build_row(entry.head, &mut scratch)?;
                    bounds[entry.head] = Some(self.row_bound(entry.head, &mut scratch));
                    heap.push(HeapEntry {
                        key: row.gain,
                        head: entry.head,
                        exact: Some(row),
                    });
                }
            }
        }
        Ok(None)
    }

    fn commit(&mut self, row: CandidateRow) -> Result<()> {
        for &(c, s) in &row.updates {
            self.sums[c] = s;
        }
        self.used[row.head] = true;
        for &d in &row.tail {
            self.used[d] = true;
        }
        self.rows.push(Row::with_tail(
            DocumentId(row.head),
            row.tail.into_iter().map(DocumentId).collect(),
        ));
        Ok(())
    }
}

/// Max-heap order: larger key first, then lower head id.
struct HeapEntry {
    key: f64,
    head: usize,
    exact: Option<CandidateRow>,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key
            .total_cmp(&other.key)
            .then_with(|| other.head.cmp(&self.head))
    }
}

/// Default guard on the number of rankings [`brute_force_optimal`] will enumerate.
pub const DEFAULT_ENUMERATION_LIMIT: u128 = 10_000_000;

/// Number of complete rankings of `shape` over `n_docs` documents: positions are filled row by
/// row, each row taking a head and then up to `W` tail documents while documents remain.
pub fn count_rankings(n_docs: usize, shape: &ShapeParams) -> u128 {
    let positions = n_docs.min(shape.length().saturating_mul(shape.width() + 1));
    let mut count: u128 = 1;
    for k in 0..positions {
        count = count.saturating_mul((n_docs - k) as u128);
    }
    count
}

/// Exact maximizer of the expected dynamic utility over all complete rankings of `shape`.
/// The first maximizer in lexicographic enumeration order is returned.
pub fn brute_force_optimal(
    case: &QueryCase,
    spec: &GainSpec,
    shape: &ShapeParams,
    limit: u128,
) -> Result<(TwoLevelRanking, f64)> {
    if case.n_docs() == 0 {
        return Err(Error::EmptyCandidates);
    }
    brute_force_objective(&Objective::from_case(case), spec, shape, limit)
}

pub fn brute_force_objective(
    objective: &Objective,
    spec: &GainSpec,
    shape: &ShapeParams,
    limit: u128,
) -> Result<(TwoLevelRanking, f64)> {
    let n = objective.n_docs();
    let count = count_rankings(n, shape);
    if count > limit {
        return Err(Error::InstanceTooLarge { count, limit });
    }
    let positions = n.min(shape.length() * (shape.width() + 1));
    let mut search = Search {
        obj: objective,
        spec,
        width: shape.width(),
        positions,
        sums: vec![0.0; objective.n_components()],
        used: vec![false; n],
        rows: Vec::new(),
        pair: 0.0,
        best: None,
    };
    search.descend(0)?;
    let (rows, value) = search.best.expect("at least one ranking");
    Ok((TwoLevelRanking::from_rows(rows), value))
}

struct Search<'a> {
    obj: &'a Objective,
    spec: &'a GainSpec,
    width: usize,
    positions: usize,
    sums: Vec<f64>,
    used: Vec<bool>,
    rows: Vec<Row>,
    pair: f64,
    best: Option<(Vec<Row>, f64)>,
}

impl Search<'_> {
    fn descend(&mut self, filled: usize) -> Result<()> {
        if filled == self.positions {
            let mut value = self.pair;
            for (c, &s) in self.sums.iter().enumerate() {
                value += self.obj.weights()[c] * self.spec.gain.eval(s);
            }
            if self.best.as_ref().is_none_or(|(_, b)| value > *b) {
                self.best = Some((self.rows.clone(), value));
            }
            return Ok(());
        }
        let new_row = self.rows.last().is_none_or(|r| r.tail.len() == self.width);
        for d in 0..self.obj.n_docs() {
            if self.used[d] {
                continue;
            }
            self.used[d] = true;
            let mut delta: Vec<(usize, f64)> = Vec::new();
            let mut pair = 0.0;
            if new_row {
                let gamma = self.spec.discounts.first(self.rows.len())?;
                for &(c, u) in self.obj.doc_components(d) {
                    delta.push((c, gamma * u));
                }
                self.rows.push(Row::new(DocumentId(d)));
            } else {
                let i = self.rows.len() - 1;
                let row = &self.rows[i];
                let gamma = self.spec.discounts.second(i, row.tail.len())?;
                let h = row.head.0;
                for &(c, u) in self.obj.doc_components(d) {
                    let uh = self.obj.utility(c, h);
                    if uh != 0.0 {
                        delta.push((c, gamma * uh * u));
                    }
                }
                pair = self.obj.pair_score(h, d);
                self.rows[i].tail.push(DocumentId(d));
            }
            for &(c, x) in &delta {
                self.sums[c] += x;
            }
            self.pair += pair;
            self.descend(filled + 1)?;
            self.pair -= pair;
            for &(c, x) in &delta {
                self.sums[c] -= x;
            }
            if new_row {
                self.rows.pop();
            } else {
                self.rows.last_mut().expect("row").tail.pop();
            }
            self.used[d] = false;
        }
        Ok(())
    }
}
