//! Structural SVM learning of the ranking discriminant.
//!
//! Training follows the n-slack margin-rescaling cutting-plane method: each pass runs
//! loss-augmented inference on every example with the current weights, adds the constraints
//! that are violated by more than `epsilon` beyond the example's slack, and re-solves the
//! working-set dual with a warm start.

pub mod model;
pub mod qp;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::{FeatureTemplate, QueryFeatures, WeightVector};
use crate::gains::{dynamic_utility_expected, GainSpec, Objective};
use crate::greedy::{greedy_objective, greedy_two_level, greedy_with_scores, GreedyOptions};
use crate::ranking::{validate_ranking, QueryCase, ShapeParams, TwoLevelRanking};

pub use model::Model;
pub use qp::{solve_working_qp, Constraint, QpSolution};

pub const DEFAULT_EPSILON: f64 = 1e-3;
pub const DEFAULT_C_GRID: [f64; 5] = [1e-5, 1e-4, 1e-3, 1e-2, 1e-1];

#[derive(Debug, Clone)]
pub struct TrainExample {
    pub case: QueryCase,
    pub target: TwoLevelRanking,
}

#[derive(Debug, Clone)]
pub struct TrainJob {
    pub examples: Vec<TrainExample>,
    pub c: f64,
    pub epsilon: f64,
    pub max_iters: usize,
    pub spec: GainSpec,
    pub shape: ShapeParams,
    pub template: FeatureTemplate,
    /// Run loss-augmented inference for the examples of a pass on the rayon pool.
    pub parallel: bool,
}

impl TrainJob {
    pub fn new(examples: Vec<TrainExample>, spec: GainSpec, shape: ShapeParams) -> Self {
        TrainJob {
            examples,
            c: 0.01,
            epsilon: DEFAULT_EPSILON,
            max_iters: 100,
            spec,
            shape,
            template: FeatureTemplate::default(),
            parallel: false,
        }
    }

    /// Examples whose targets are the greedy rankings under the true judgments.
    pub fn from_cases(cases: &[QueryCase], spec: GainSpec, shape: ShapeParams) -> Result<Self> {
        let targets = make_targets(cases, &spec, &shape)?;
        let examples = cases
            .iter()
            .cloned()
            .zip(targets)
            .map(|(case, target)| TrainExample { case, target })
            .collect();
        Ok(TrainJob::new(examples, spec, shape))
    }

    fn validate(&self) -> Result<()> {
        if self.examples.is_empty() {
            return Err(Error::Training("no training examples".into()));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Training(format!(
                "C must be positive, got {}",
                self.c
            )));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::Training(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::Training("max_iters must be >= 1".into()));
        }
        for (i, ex) in self.examples.iter().enumerate() {
            validate_ranking(&ex.target, &ex.case, &self.shape)?;
            if dynamic_utility_expected(&ex.target, &ex.case, &self.spec)? <= 0.0 {
                return Err(Error::Training(format!(
                    "example {i} ({}): target has zero utility",
                    ex.case.query_id()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Tolerance,
    MaxIters,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub weights: WeightVector,
    /// Dual objective after each pass.
    pub dual_objective_trace: Vec<f64>,
    /// Working-set size after each pass.
    pub constraint_counts: Vec<usize>,
    pub terminated_by: Termination,
    pub slacks: Vec<f64>,
    /// Every working-set QP solve reached the KKT tolerance.
    pub qp_converged: bool,
    /// Largest `loss_k - w . dpsi_k - xi_i` over the final working set.
    pub max_working_set_violation: f64,
    pub constraints: Vec<Constraint>,
}

pub fn make_targets(
    cases: &[QueryCase],
    spec: &GainSpec,
    shape: &ShapeParams,
) -> Result<Vec<TwoLevelRanking>> {
    cases
        .iter()
        .map(|c| greedy_two_level(c, spec, shape, GreedyOptions::default()))
        .collect()
}

/// `1 - U(candidate) / U(target)`, clamped to `[0, 1]`.
pub fn loss(
    target: &TwoLevelRanking,
    candidate: &TwoLevelRanking,
    case: &QueryCase,
    spec: &GainSpec,
) -> Result<f64> {
    let ut = dynamic_utility_expected(target, case, spec)?;
    if ut <= 0.0 {
        return Err(Error::ZeroUtilityTarget);
    }
    let uc = dynamic_utility_expected(candidate, case, spec)?;
    Ok((1.0 - uc / ut).clamp(0.0, 1.0))
}

/// The intent objective `-scale * U(. | q) / U(target | q)`.
fn loss_objective(case: &QueryCase, target_utility: f64, scale: f64) -> Objective {
    Objective::from_case(case).scaled(-scale / target_utility)
}

/// Greedy search for the ranking maximizing `w . Psi + loss`. `loss_scale` multiplies the loss
/// term; 1 is the training setting.
pub fn loss_augmented_inference(
    w: &WeightVector,
    features: &QueryFeatures,
    case: &QueryCase,
    target: &TwoLevelRanking,
    spec: &GainSpec,
    shape: &ShapeParams,
    loss_scale: f64,
) -> Result<TwoLevelRanking> {
    let ut = dynamic_utility_expected(target, case, spec)?;
    if ut <= 0.0 {
        return Err(Error::ZeroUtilityTarget);
    }
    let objective = features
        .objective(w, false)?
        .extend(&loss_objective(case, ut, loss_scale))?;
    greedy_objective(&objective, spec, shape, GreedyOptions::default())
}

/// Greedy prediction under the learned discriminant. With `clamp`, negative word scores are
/// floored at zero so the objective stays monotone submodular.
pub fn predict(
    w: &WeightVector,
    features: &QueryFeatures,
    spec: &GainSpec,
    shape: &ShapeParams,
    clamp: bool,
    opts: GreedyOptions,
) -> Result<TwoLevelRanking> {
    let objective = features.objective(w, clamp)?;
    if clamp {
        greedy_with_scores(&objective, spec, shape, opts)
    } else {
        greedy_objective(&objective, spec, shape, opts)
    }
}

/// Prediction for a case, building its features from `template`.
pub fn predict_case(
    w: &WeightVector,
    case: &QueryCase,
    template: &FeatureTemplate,
    spec: &GainSpec,
    shape: &ShapeParams,
) -> Result<TwoLevelRanking> {
    let features = QueryFeatures::build(case, template)?;
    predict(w, &features, spec, shape, true, GreedyOptions::default())
}

struct Prepared {
    features: QueryFeatures,
    target_psi: Vec<f64>,
}

pub fn train(job: &TrainJob) -> Result<TrainReport> {
    job.validate()?;
    let n = job.examples.len();
    let prepared: Vec<Prepared> = job
        .examples
        .iter()
        .map(|ex| {
            let features = QueryFeatures::build(&ex.case, &job.template)?;
            let target_psi = features.joint_feature_vector(&ex.target, &job.spec)?;
            Ok(Prepared {
                features,
                target_psi,
            })
        })
        .collect::<Result<_>>()?;
    let dim = job.template.word_dim() + job.template.pair_dim();

    let mut constraints: Vec<Constraint> = Vec::new();
    let mut found: Vec<Vec<TwoLevelRanking>> = vec![Vec::new(); n];
    let mut solution = solve_working_qp(&constraints, job.c, n, dim, None)?;
    let mut trace = Vec::new();
    let mut counts = Vec::new();
    let mut qp_converged = true;
    let mut terminated_by = Termination::MaxIters;

    for iter in 0..job.max_iters {
        let w = WeightVector::from_flat(&solution.w, &job.template)?;
        let search = |i: usize| -> Result<Option<(Constraint, TwoLevelRanking)>> {
            let ex = &job.examples[i];
            let p = &prepared[i];
            let cand = loss_augmented_inference(
                &w,
                &p.features,
                &ex.case,
                &ex.target,
                &job.spec,
                &job.shape,
                1.0,
            )?;
            if found[i].contains(&cand) {
                return Ok(None);
            }
            let psi = p.features.joint_feature_vector(&cand, &job.spec)?;
            let delta_psi: Vec<f64> = p.target_psi.iter().zip(&psi).map(|(a, b)| a - b).collect();
            let l = loss(&ex.target, &cand, &ex.case, &job.spec)?;
            let margin: f64 = solution.w.iter().zip(&delta_psi).map(|(a, b)| a * b).sum();
            if l - margin > solution.slacks[i] + job.epsilon {
                let c = Constraint {
                    example: i,
                    delta_psi,
                    loss: l,
                };
                Ok(Some((c, cand)))
            } else {
                Ok(None)
            }
        };
        let results: Vec<Result<Option<(Constraint, TwoLevelRanking)>>> = if job.parallel {
            (0..n).into_par_iter().map(search).collect()
        } else {
            (0..n).map(search).collect()
        };
        let mut added = 0;
        for (i, r) in results.into_iter().enumerate() {
            let r = r.map_err(|e| Error::Training(format!("pass {iter}, example {i}: {e}")))?;
            if let Some((c, cand)) = r {
                found[i].push(cand);
                constraints.push(c);
                added += 1;
            }
        }
        if added == 0 {
            terminated_by = Termination::Tolerance;
            break;
        }
        solution = solve_working_qp(&constraints, job.c, n, dim, Some(&solution.alphas))
            .map_err(|e| Error::Training(format!("pass {iter}: {e}")))?;
        qp_converged &= solution.converged;
        trace.push(solution.dual_objective);
        counts.push(constraints.len());
    }

    let max_working_set_violation = constraints
        .iter()
        .map(|c| {
            let margin: f64 = solution
                .w
                .iter()
                .zip(&c.delta_psi)
                .map(|(a, b)| a * b)
                .sum();
            c.loss - margin - solution.slacks[c.example]
        })
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(TrainReport {
        weights: WeightVector::from_flat(&solution.w, &job.template)?,
        dual_objective_trace: trace,
        constraint_counts: counts,
        terminated_by,
        slacks: solution.slacks,
        qp_converged,
        max_working_set_violation,
        constraints,
    })
}

/// Example counts up to this use leave-one-query-out validation.
pub const LOO_MAX_EXAMPLES: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct CSelection {
    pub c: f64,
    /// `(C, mean validation utility ratio)` in grid order.
    pub scores: Vec<(f64, f64)>,
}

/// Validation folds as `(train, validation)` index lists: leave-one-out for small sets,
/// otherwise the last third of the examples validates a model trained on the rest.
pub fn validation_folds(n: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
    if n <= LOO_MAX_EXAMPLES {
        (0..n)
            .map(|v| ((0..n).filter(|&i| i != v).collect(), vec![v]))
            .collect()
    } else {
        let n_val = n.div_ceil(3);
        vec![((0..n - n_val).collect(), (n - n_val..n).collect())]
    }
}

/// Mean of predicted over target utility on `examples`, under the true judgments.
pub fn utility_ratio(
    w: &WeightVector,
    examples: &[TrainExample],
    template: &FeatureTemplate,
    spec: &GainSpec,
    shape: &ShapeParams,
) -> Result<f64> {
    let mut total = 0.0;
    for ex in examples {
        let p = predict_case(w, &ex.case, template, spec, shape)?;
        total += dynamic_utility_expected(&p, &ex.case, spec)?
            / dynamic_utility_expected(&ex.target, &ex.case, spec)?;
    }
    Ok(total / examples.len() as f64)
}

/// Picks the C of `grid` with the best mean validation utility; ties go to the smaller C.
pub fn select_c(job: &TrainJob, grid: &[f64]) -> Result<CSelection> {
    if grid.is_empty() {
        return Err(Error::Training("empty C grid".into()));
    }
    if job.examples.len() < 2 {
        return Err(Error::Training(
            "C selection needs at least two examples".into(),
        ));
    }
    let folds = validation_folds(job.examples.len());
    let mut scores = Vec::with_capacity(grid.len());
    for &c in grid {
        let mut sum = 0.0;
        let mut count = 0usize;
        for (train_idx, val_idx) in &folds {
            let mut sub = job.clone();
            sub.c = c;
            sub.examples = train_idx.iter().map(|&i| job.examples[i].clone()).collect();
            let report = train(&sub)?;
            let val: Vec<TrainExample> = val_idx.iter().map(|&i| job.examples[i].clone()).collect();
            sum += utility_ratio(&report.weights, &val, &job.template, &job.spec, &job.shape)?
                * val.len() as f64;
            count += val.len();
        }
        scores.push((c, sum / count as f64));
    }
    let best = scores
        .iter()
        .fold(None::<(f64, f64)>, |acc, &(c, s)| match acc {
            Some((bc, bs)) if bs > s || (bs == s && bc <= c) => Some((bc, bs)),
            _ => Some((c, s)),
        })
        .expect("nonempty grid");
    Ok(CSelection { c: best.0, scores })
}
