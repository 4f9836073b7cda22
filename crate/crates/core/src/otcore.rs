//! Cost matrices and entropic optimal transport between uniform empirical
//! measures, solved by Sinkhorn iteration on the dual potentials in the log
//! domain.

use crate::embedio::EmbeddingSequence;
use crate::error::OtError;

/// Dense row-major `rows x cols` cost matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl CostMatrix {
    /// Wraps arbitrary values. Finiteness is checked later by [`sinkhorn`].
    pub fn from_vec(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self, OtError> {
        if rows == 0 || cols == 0 || values.len() != rows * cols {
            return Err(OtError::ShapeMismatch {
                expected_rows: rows,
                expected_cols: cols,
                rows: values.len().checked_div(cols).unwrap_or(0),
                cols,
            });
        }
        Ok(CostMatrix { rows, cols, values })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Same matrix with `delta` added to every entry.
    pub fn shifted(&self, delta: f64) -> CostMatrix {
        CostMatrix {
            rows: self.rows,
            cols: self.cols,
            values: self.values.iter().map(|v| v + delta).collect(),
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `1 - cos(x, y)` clamped to `[0, 2]`. Both vectors must be nonzero.
pub fn cosine_distance(x: &[f64], y: &[f64]) -> f64 {
    (1.0 - dot(x, y) / (norm(x) * norm(y))).clamp(0.0, 2.0)
}

/// Pairwise cosine cost `c(x_i, y_j) = 1 - <x_i, y_j> / (|x_i| |y_j|)`.
pub fn cosine_cost(
    source: &EmbeddingSequence,
    target: &EmbeddingSequence,
) -> Result<CostMatrix, OtError> {
    if source.dim() != target.dim() {
        return Err(OtError::DimMismatch {
            left: source.dim(),
            right: target.dim(),
        });
    }
    let target_norms: Vec<f64> = target.frames().map(norm).collect();
    let mut values = Vec::with_capacity(source.len() * target.len());
    for x in source.frames() {
        let nx = norm(x);
        for (y, &ny) in target.frames().zip(&target_norms) {
            values.push((1.0 - dot(x, y) / (nx * ny)).clamp(0.0, 2.0));
        }
    }
    Ok(CostMatrix {
        rows: source.len(),
        cols: target.len(),
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornConfig {
    /// Entropic regularization strength.
    pub epsilon: f64,
    pub max_iters: usize,
    /// Stop once the L-infinity marginal violation is at or below this.
    pub tolerance: f64,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        SinkhornConfig {
            epsilon: 0.1,
            max_iters: 1000,
            tolerance: 1e-6,
        }
    }
}

impl SinkhornConfig {
    pub fn validate(&self) -> Result<(), OtError> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(OtError::InvalidEpsilon(self.epsilon));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(OtError::InvalidTolerance(self.tolerance));
        }
        if self.max_iters == 0 {
            return Err(OtError::ZeroIterations);
        }
        Ok(())
    }
}

/// Solver diagnostics carried alongside plans and projections.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornDiagnostics {
    pub iterations_used: usize,
    pub final_violation: f64,
    pub tolerance: f64,
}

impl SinkhornDiagnostics {
    pub fn converged(&self) -> bool {
        self.final_violation <= self.tolerance
    }
}

/// Entropic coupling between uniform measures on `rows` and `cols` points.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingPlan {
    rows: usize,
    cols: usize,
    gamma: Vec<f64>,
    pub row_marginal: Vec<f64>,
    pub col_marginal: Vec<f64>,
    pub iterations_used: usize,
    pub final_violation: f64,
    pub tolerance: f64,
}

impl CouplingPlan {
    /// Builds a plan from an explicit matrix. Marginals are set to uniform and
    /// the violation is measured against them; no iteration is performed.
    pub fn from_matrix(rows: usize, cols: usize, gamma: Vec<f64>) -> Result<Self, OtError> {
        if rows == 0 || cols == 0 || gamma.len() != rows * cols {
            return Err(OtError::ShapeMismatch {
                expected_rows: rows,
                expected_cols: cols,
                rows: gamma.len().checked_div(cols).unwrap_or(0),
                cols,
            });
        }
        let mut plan = CouplingPlan {
            rows,
            cols,
            gamma,
            row_marginal: vec![1.0 / rows as f64; rows],
            col_marginal: vec![1.0 / cols as f64; cols],
            iterations_used: 0,
            final_violation: 0.0,
            tolerance: f64::INFINITY,
        };
        plan.final_violation = plan.marginal_violation();
        Ok(plan)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.gamma[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.gamma[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.gamma
    }

    pub fn total_mass(&self) -> f64 {
        self.gamma.iter().sum()
    }

    /// Max absolute deviation of row and column sums from the marginals.
    pub fn marginal_violation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        let mut col_sums = vec![0.0; self.cols];
        for i in 0..self.rows {
            let row = self.row(i);
            worst = worst.max((row.iter().sum::<f64>() - self.row_marginal[i]).abs());
            for (acc, v) in col_sums.iter_mut().zip(row) {
                *acc += v;
            }
        }
        for (s, q) in col_sums.iter().zip(&self.col_marginal) {
            worst = worst.max((s - q).abs());
        }
        worst
    }

    pub fn diagnostics(&self) -> SinkhornDiagnostics {
        SinkhornDiagnostics {
            iterations_used: self.iterations_used,
            final_violation: self.final_violation,
            tolerance: self.tolerance,
        }
    }

    pub fn converged(&self) -> bool {
        self.diagnostics().converged()
    }
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// `(eps, tolerance)` stages, ending at the configured pair.
fn annealing_schedule(cost: &CostMatrix, config: &SinkhornConfig) -> Vec<(f64, f64)> {
    let (lo, hi) = cost
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let mut stages = Vec::new();
    let mut eps = hi - lo;
    while eps > config.epsilon {
        stages.push((eps, 10.0 * config.tolerance));
        eps *= 0.5;
    }
    stages.push((config.epsilon, config.tolerance));
    stages
}

/// Log-domain dual potentials and the running iteration count.
struct DualSolver {
    rows: usize,
    cols: usize,
    f: Vec<f64>,
    g: Vec<f64>,
    col_lse: Vec<f64>,
    iterations: usize,
}

impl DualSolver {
    fn new(rows: usize, cols: usize) -> Self {
        DualSolver {
            rows,
            cols,
            f: vec![0.0; rows],
            g: vec![0.0; cols],
            col_lse: vec![0.0; cols],
            iterations: 0,
        }
    }

    /// Iterates at fixed `eps` until the column violation is within
    /// `tolerance` (row sums are exact after each `f` update) or the budget
    /// runs out.
    fn run(&mut self, cost: &CostMatrix, eps: f64, tolerance: f64, max_iters: usize) {
        let (m, n) = (self.rows, self.cols);
        let log_a = -(m as f64).ln();
        let log_b = -(n as f64).ln();
        let b = 1.0 / n as f64;

        // -C / eps in both layouts so each half-step scans contiguous memory.
        let scaled: Vec<f64> = cost.values.iter().map(|c| -c / eps).collect();
        let mut scaled_t = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                scaled_t[j * m + i] = scaled[i * n + j];
            }
        }

        let mut stage_iters = 0;
        loop {
            for (j, lse) in self.col_lse.iter_mut().enumerate() {
                let col = &scaled_t[j * m..(j + 1) * m];
                *lse = log_sum_exp(col.iter().zip(&self.f).map(|(s, fi)| s + fi / eps));
            }
            if stage_iters > 0 {
                let violation = self
                    .g
                    .iter()
                    .zip(&self.col_lse)
                    .map(|(gj, l)| ((gj / eps + l).exp() - b).abs())
                    .fold(0.0, f64::max);
                if violation <= tolerance {
                    return;
                }
            }
            if self.iterations >= max_iters {
                return;
            }
            for (gj, l) in self.g.iter_mut().zip(&self.col_lse) {
                *gj = eps * (log_b - l);
            }
            for (i, fi) in self.f.iter_mut().enumerate() {
                let row = &scaled[i * n..(i + 1) * n];
                let lse = log_sum_exp(row.iter().zip(&self.g).map(|(s, gj)| s + gj / eps));
                *fi = eps * (log_a - lse);
            }
            self.iterations += 1;
            stage_iters += 1;
        }
    }
}

/// Entropic OT with uniform marginals `1/M` and `1/N`.
///
/// Alternates the dual updates
/// `g_j = eps * (ln b_j - LSE_i((f_i - C_ij) / eps))` and
/// `f_i = eps * (ln a_i - LSE_j((g_j - C_ij) / eps))`, so the plan
/// `exp((f_i + g_j - C_ij) / eps)` never forms the kernel `exp(-C / eps)`.
///
/// `eps` is annealed: it starts at the cost range and halves down to
/// `config.epsilon`, the potentials carried from stage to stage. Intermediate
/// stages stop at `10 * tolerance`; only the last stage must meet
/// `tolerance`. All stages share the `max_iters` budget, and the final stage
/// always gets at least one iteration. Hitting the budget is not an error:
/// the plan reports how far it got.
pub fn sinkhorn(cost: &CostMatrix, config: &SinkhornConfig) -> Result<CouplingPlan, OtError> {
    config.validate()?;
    if let Some(pos) = cost.values.iter().position(|v| !v.is_finite()) {
        return Err(OtError::NonFiniteCost {
            row: pos / cost.cols,
            col: pos % cost.cols,
        });
    }
    let (m, n) = (cost.rows, cost.cols);
    let mut solver = DualSolver::new(m, n);
    let schedule = annealing_schedule(cost, config);
    let last = schedule.len() - 1;
    for (stage, (eps, tolerance)) in schedule.into_iter().enumerate() {
        let budget = if stage == last {
            config.max_iters
        } else {
            config.max_iters - 1
        };
        solver.run(cost, eps, tolerance, budget);
    }
    let DualSolver {
        f, g, iterations, ..
    } = solver;
    let eps = config.epsilon;
    let a = 1.0 / m as f64;
    let scaled: Vec<f64> = cost.values.iter().map(|c| -c / eps).collect();

    let mut gamma = Vec::with_capacity(m * n);
    for (i, fi) in f.iter().enumerate() {
        let row = &scaled[i * n..(i + 1) * n];
        gamma.extend(
            row.iter()
                .zip(&g)
                .map(|(s, gj)| (s + (fi + gj) / eps).exp()),
        );
    }
    let mut plan = CouplingPlan {
        rows: m,
        cols: n,
        gamma,
        row_marginal: vec![a; m],
        col_marginal: vec![1.0 / n as f64; n],
        iterations_used: iterations,
        final_violation: 0.0,
        tolerance: config.tolerance,
    };
    plan.final_violation = plan.marginal_violation();
    Ok(plan)
}

/// Expected cost `sum_ij gamma_ij * c_ij` under the plan.
pub fn transport_cost(plan: &CouplingPlan, cost: &CostMatrix) -> Result<f64, OtError> {
    if plan.rows != cost.rows || plan.cols != cost.cols {
        return Err(OtError::ShapeMismatch {
            expected_rows: plan.rows,
            expected_cols: plan.cols,
            rows: cost.rows,
            cols: cost.cols,
        });
    }
    Ok(plan
        .gamma
        .iter()
        .zip(&cost.values)
        .map(|(g, c)| g * c)
        .sum())
}
