//! Working-set quadratic program of the n-slack structural SVM.
//!
//! Primal: `min 1/2 |w|^2 + C/n sum_i xi_i` subject to `w . dpsi_k >= loss_k - xi_i` for every
//! constraint `k` of example `i`. The solver works on the dual
//!
//! `max sum_k a_k loss_k - 1/2 |sum_k a_k dpsi_k|^2`,  `a >= 0`,  `sum_{k in i} a_k <= C/n`,
//!
//! with single-coordinate and same-group pairwise steps, each taken with an exact line search
//! along the direction of largest KKT violation, interleaved with Newton steps on the face of
//! currently positive multipliers. Every accepted step increases the dual.

use crate::error::{Error, Result};

/// Tolerance on the largest KKT violation at convergence.
pub const KKT_TOLERANCE: f64 = 1e-6;

const MAX_STEPS: usize = 200_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub example: usize,
    /// `Psi(target) - Psi(candidate)`.
    pub delta_psi: Vec<f64>,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub w: Vec<f64>,
    pub alphas: Vec<f64>,
    /// Per example, `max(0, max_k loss_k - w . dpsi_k)`.
    pub slacks: Vec<f64>,
    pub dual_objective: f64,
    pub max_violation: f64,
    pub converged: bool,
    pub steps: usize,
}

/// Solves the dual restricted to `constraints`. `warm` holds multipliers of a prefix of the
/// constraints from a previous solve; the remaining ones start at zero.
pub fn solve_working_qp(
    constraints: &[Constraint],
    c: f64,
    n_examples: usize,
    dim: usize,
    warm: Option<&[f64]>,
) -> Result<QpSolution> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Training(format!("C must be positive, got {c}")));
    }
    if n_examples == 0 {
        return Err(Error::Training("no examples".into()));
    }
    for (k, con) in constraints.iter().enumerate() {
        if con.example >= n_examples {
            return Err(Error::Training(format!(
                "constraint {k} references example {} of {n_examples}",
                con.example
            )));
        }
        if con.delta_psi.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: con.delta_psi.len(),
            });
        }
    }
    let budget = c / n_examples as f64;
    let m = constraints.len();
    let mut alphas = vec![0.0; m];
    if let Some(prev) = warm {
        for (a, &p) in alphas.iter_mut().zip(prev) {
            *a = p.max(0.0);
        }
    }
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n_examples];
    for (k, con) in constraints.iter().enumerate() {
        groups[con.example].push(k);
    }
    // Warm multipliers are feasible for the old budget; rescale if C changed.
    for g in &groups {
        let s: f64 = g.iter().map(|&k| alphas[k]).sum();
        if s > budget {
            g.iter().for_each(|&k| alphas[k] *= budget / s);
        }
    }

    let gram: Vec<Vec<f64>> = (0..m)
        .map(|k| {
            (0..m)
                .map(|l| dot(&constraints[k].delta_psi, &constraints[l].delta_psi))
                .collect()
        })
        .collect();
    let mut st = Dual {
        constraints,
        gram,
        groups,
        budget,
        alphas,
        w: vec![0.0; dim],
        grad: Vec::new(),
        value: 0.0,
    };
    st.recompute();

    let mut steps = 0;
    let mut max_violation;
    let mut since_face = 0;
    loop {
        let (violation, mv) = worst_move(&st.groups, &st.alphas, &st.grad, budget);
        max_violation = violation;
        if violation <= KKT_TOLERANCE || steps >= MAX_STEPS {
            break;
        }
        since_face += 1;
        let progressed = if since_face >= FACE_INTERVAL.max(m) {
            since_face = 0;
            st.face_step() || st.coordinate_step(mv)
        } else {
            st.coordinate_step(mv)
        };
        if !progressed {
            break;
        }
        steps += 1;
    }

    let slacks = st
        .groups
        .iter()
        .map(|g| g.iter().map(|&k| st.grad[k]).fold(0.0, f64::max))
        .collect();
    Ok(QpSolution {
        w: st.w,
        alphas: st.alphas,
        slacks,
        dual_objective: st.value,
        max_violation,
        converged: max_violation <= KKT_TOLERANCE,
        steps,
    })
}

/// Coordinate steps between two attempts at a Newton step on the current face.
const FACE_INTERVAL: usize = 20;

struct Dual<'a> {
    constraints: &'a [Constraint],
    gram: Vec<Vec<f64>>,
    groups: Vec<Vec<usize>>,
    budget: f64,
    alphas: Vec<f64>,
    w: Vec<f64>,
    /// `loss_k - w . dpsi_k`, the dual gradient.
    grad: Vec<f64>,
    value: f64,
}

impl Dual<'_> {
    fn recompute(&mut self) {
        self.w.iter_mut().for_each(|x| *x = 0.0);
        for (k, con) in self.constraints.iter().enumerate() {
            if self.alphas[k] != 0.0 {
                axpy(&mut self.w, self.alphas[k], &con.delta_psi);
            }
        }
        self.grad = self
            .constraints
            .iter()
            .map(|con| con.loss - dot(&self.w, &con.delta_psi))
            .collect();
        self.value = self.objective_at(&self.alphas);
    }

    fn objective_at(&self, alphas: &[f64]) -> f64 {
        let mut lin = 0.0;
        let mut w = vec![0.0; self.w.len()];
        for (k, con) in self.constraints.iter().enumerate() {
            if alphas[k] != 0.0 {
                lin += alphas[k] * con.loss;
                axpy(&mut w, alphas[k], &con.delta_psi);
            }
        }
        lin - 0.5 * dot(&w, &w)
    }

    /// Exact line search along one coordinate or a same-group pair.
    fn coordinate_step(&mut self, mv: Move) -> bool {
        let (up, down, limit) = match mv {
            Move::Up(k, room) => (Some(k), None, room),
            Move::Down(k) => (None, Some(k), self.alphas[k]),
            Move::Pair(j, k) => (Some(j), Some(k), self.alphas[k]),
        };
        let g = &self.gram;
        let (slope, curvature) = match (up, down) {
            (Some(j), Some(k)) => (
                self.grad[j] - self.grad[k],
                g[j][j] + g[k][k] - 2.0 * g[j][k],
            ),
            (Some(j), None) => (self.grad[j], g[j][j]),
            (None, Some(k)) => (-self.grad[k], g[k][k]),
            (None, None) => return false,
        };
        let t = if curvature > 1e-15 {
            (slope / curvature).min(limit)
        } else {
            limit
        };
        if t.is_nan() || t <= 0.0 {
            return false;
        }
        let m = self.alphas.len();
        if let Some(j) = up {
            self.alphas[j] += t;
            axpy(&mut self.w, t, &self.constraints[j].delta_psi);
            for l in 0..m {
                self.grad[l] -= t * self.gram[l][j];
            }
        }
        if let Some(k) = down {
            self.alphas[k] = (self.alphas[k] - t).max(0.0);
            axpy(&mut self.w, -t, &self.constraints[k].delta_psi);
            for l in 0..m {
                self.grad[l] += t * self.gram[l][k];
            }
        }
        self.value += t * slope - 0.5 * t * t * curvature;
        true
    }

    /// Moves towards the maximizer of the dual on the current face (positive multipliers free,
    /// saturated groups held at their budget), stopping at the feasible boundary. Accepted only
    /// if the dual increases.
    fn face_step(&mut self) -> bool {
        let free: Vec<usize> = (0..self.alphas.len())
            .filter(|&k| self.alphas[k] > 0.0)
            .collect();
        if free.is_empty() {
            return false;
        }
        let is_tight = |g: &Vec<usize>| {
            let used: f64 = g.iter().map(|&k| self.alphas[k]).sum();
            used >= self.budget * (1.0 - 1e-12) && g.iter().any(|&k| self.alphas[k] > 0.0)
        };
        let tight: Vec<&Vec<usize>> = self.groups.iter().filter(|g| is_tight(g)).collect();
        let (nf, nt) = (free.len(), tight.len());
        let size = nf + nt;
        let trace: f64 = free.iter().map(|&k| self.gram[k][k]).sum::<f64>() / nf as f64;
        let ridge = 1e-10 * trace.max(1e-12);
        let mut a = vec![vec![0.0; size + 1]; size];
        for (r, &k) in free.iter().enumerate() {
            for (c, &l) in free.iter().enumerate() {
                a[r][c] = self.gram[k][l];
            }
            a[r][r] += ridge;
            a[r][size] = self.constraints[k].loss;
        }
        for (t, g) in tight.iter().enumerate() {
            for (r, &k) in free.iter().enumerate() {
                if g.contains(&k) {
                    a[r][nf + t] = 1.0;
                    a[nf + t][r] = 1.0;
                }
            }
            a[nf + t][size] = self.budget;
        }
        let Some(sol) = solve_linear(a) else {
            return false;
        };
        let mut dir = vec![0.0; self.alphas.len()];
        for (r, &k) in free.iter().enumerate() {
            dir[k] = sol[r] - self.alphas[k];
        }
        let mut t_max: f64 = 1.0;
        for &k in &free {
            if dir[k] < 0.0 {
                t_max = t_max.min(self.alphas[k] / -dir[k]);
            }
        }
        for g in self.groups.iter().filter(|g| !is_tight(g)) {
            let used: f64 = g.iter().map(|&k| self.alphas[k]).sum();
            let rise: f64 = g.iter().map(|&k| dir[k]).sum();
            if rise > 0.0 {
                t_max = t_max.min(((self.budget - used) / rise).max(0.0));
            }
        }
        if t_max.is_nan() || t_max <= 0.0 {
            return false;
        }
        let cand: Vec<f64> = self
            .alphas
            .iter()
            .zip(&dir)
            .map(|(a, d)| (a + t_max * d).max(0.0))
            .collect();
        let value = self.objective_at(&cand);
        if value <= self.value {
            return false;
        }
        self.alphas = cand;
        self.recompute();
        true
    }
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
fn solve_linear(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let n = a.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, pivot);
        let (upper, lower) = a.split_at_mut(col + 1);
        let pivot_row = &upper[col];
        for row in lower.iter_mut() {
            let f = row[col] / pivot_row[col];
            if f != 0.0 {
                for (x, p) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                    *x -= f * p;
                }
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (a[r][n] - s) / a[r][r];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

enum Move {
    /// Increase `a_k` by at most the remaining budget.
    Up(usize, f64),
    Down(usize),
    /// Shift mass from the second multiplier to the first within a group.
    Pair(usize, usize),
}

fn worst_move(groups: &[Vec<usize>], alphas: &[f64], grad: &[f64], budget: f64) -> (f64, Move) {
    let mut best = (0.0, Move::Down(usize::MAX));
    for g in groups {
        if g.is_empty() {
            continue;
        }
        let used: f64 = g.iter().map(|&k| alphas[k]).sum();
        let room = (budget - used).max(0.0);
        let top = *g
            .iter()
            .max_by(|&&a, &&b| grad[a].total_cmp(&grad[b]).then(b.cmp(&a)))
            .expect("nonempty");
        if room > budget * 1e-12 && grad[top] > best.0 {
            best = (grad[top], Move::Up(top, room));
        }
        for &k in g {
            if alphas[k] <= 0.0 {
                continue;
            }
            if -grad[k] > best.0 {
                best = (-grad[k], Move::Down(k));
            }
            if top != k && grad[top] - grad[k] > best.0 {
                best = (grad[top] - grad[k], Move::Pair(top, k));
            }
        }
    }
    best
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += a * x);
}
