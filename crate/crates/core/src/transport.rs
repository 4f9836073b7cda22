//! Barycentric projection of a coupling onto target frames.
//!
//! The full map sends source frame `i` to `sum_j (gamma_ij / p_i) y_j`, the
//! conditional mean of the target given the source. The top-k map keeps the
//! `k` largest entries of row `i`, renormalizes them to sum to one, and
//! averages only those targets. With `k >= N` the two coincide.

use std::cmp::Ordering;

use crate::embedio::{EmbeddingSequence, TargetPool};
use crate::error::OtError;
use crate::otcore::{cosine_cost, sinkhorn, CouplingPlan, SinkhornConfig, SinkhornDiagnostics};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProjectionMode {
    Full,
    #[default]
    TopK,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProjectionConfig {
    pub k: usize,
    pub mode: ProjectionMode,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        ProjectionConfig {
            k: 5,
            mode: ProjectionMode::TopK,
        }
    }
}

impl ProjectionConfig {
    pub fn effective_k(&self, targets: usize) -> usize {
        match self.mode {
            ProjectionMode::Full => targets,
            ProjectionMode::TopK => self.k.min(targets),
        }
    }
}

/// Transported frames plus, for each, the targets and weights that built it.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportResult {
    pub transported: EmbeddingSequence,
    /// Per source frame: `(target_index, weight)`, weights descending for
    /// top-k, in target order for the full map.
    pub support: Vec<Vec<(usize, f64)>>,
    pub mode: ProjectionConfig,
    pub diagnostics: SinkhornDiagnostics,
}

fn check_shape(plan: &CouplingPlan, target: &EmbeddingSequence) -> Result<(), OtError> {
    if plan.cols() != target.len() {
        return Err(OtError::ShapeMismatch {
            expected_rows: plan.rows(),
            expected_cols: target.len(),
            rows: plan.rows(),
            cols: plan.cols(),
        });
    }
    Ok(())
}

fn combine(target: &EmbeddingSequence, weights: &[(usize, f64)], out: &mut Vec<f64>) {
    let start = out.len();
    out.resize(start + target.dim(), 0.0);
    let acc = &mut out[start..];
    for &(j, w) in weights {
        for (a, y) in acc.iter_mut().zip(target.frame(j)) {
            *a += w * y;
        }
    }
}

fn finish(
    plan: &CouplingPlan,
    target: &EmbeddingSequence,
    data: Vec<f64>,
    support: Vec<Vec<(usize, f64)>>,
    mode: ProjectionConfig,
) -> Result<TransportResult, OtError> {
    let transported = EmbeddingSequence::new(target.dim(), data, "transported")?;
    let transported = match target.frame_hop_ms {
        Some(hop) => transported.with_frame_hop_ms(hop),
        None => transported,
    };
    Ok(TransportResult {
        transported,
        support,
        mode,
        diagnostics: plan.diagnostics(),
    })
}

/// Full barycentric map with weights `gamma_ij / p_i`.
pub fn project_full(
    plan: &CouplingPlan,
    target: &EmbeddingSequence,
) -> Result<TransportResult, OtError> {
    check_shape(plan, target)?;
    let mut data = Vec::with_capacity(plan.rows() * target.dim());
    let mut support = Vec::with_capacity(plan.rows());
    for i in 0..plan.rows() {
        let p = plan.row_marginal[i];
        let weights: Vec<(usize, f64)> = plan
            .row(i)
            .iter()
            .enumerate()
            .map(|(j, g)| (j, g / p))
            .collect();
        combine(target, &weights, &mut data);
        support.push(weights);
    }
    let mode = ProjectionConfig {
        k: target.len(),
        mode: ProjectionMode::Full,
    };
    finish(plan, target, data, support, mode)
}

/// Indices of the `k` largest entries of `row`, largest first, ties by index.
pub(crate) fn top_k_indices(row: &[f64], k: usize) -> Vec<usize> {
    let by_weight = |&a: &usize, &b: &usize| match row[b].partial_cmp(&row[a]) {
        Some(Ordering::Equal) | None => a.cmp(&b),
        Some(o) => o,
    };
    let mut idx: Vec<usize> = (0..row.len()).collect();
    if k < idx.len() {
        idx.select_nth_unstable_by(k - 1, by_weight);
        idx.truncate(k);
    }
    idx.sort_by(by_weight);
    idx
}

/// Top-k barycentric map: per row, keep the `k` heaviest targets and
/// renormalize their weights to one.
pub fn project_topk(
    plan: &CouplingPlan,
    target: &EmbeddingSequence,
    config: &ProjectionConfig,
) -> Result<TransportResult, OtError> {
    if config.mode == ProjectionMode::Full {
        return project_full(plan, target);
    }
    check_shape(plan, target)?;
    if config.k == 0 {
        return Err(OtError::ZeroK);
    }
    let k = config.effective_k(target.len());
    let mut data = Vec::with_capacity(plan.rows() * target.dim());
    let mut support = Vec::with_capacity(plan.rows());
    for i in 0..plan.rows() {
        let row = plan.row(i);
        let chosen = top_k_indices(row, k);
        let mass: f64 = chosen.iter().map(|&j| row[j]).sum();
        if mass.is_nan() || mass <= 0.0 {
            return Err(OtError::ZeroRow { row: i });
        }
        let weights: Vec<(usize, f64)> = chosen.into_iter().map(|j| (j, row[j] / mass)).collect();
        combine(target, &weights, &mut data);
        support.push(weights);
    }
    finish(plan, target, data, support, *config)
}

/// Cosine cost, Sinkhorn, then projection onto the pool.
pub fn align(
    source: &EmbeddingSequence,
    pool: &TargetPool,
    sinkhorn_cfg: &SinkhornConfig,
    proj_cfg: &ProjectionConfig,
) -> Result<TransportResult, OtError> {
    if proj_cfg.k == 0 {
        return Err(OtError::ZeroK);
    }
    let cost = cosine_cost(source, &pool.sequence)?;
    let plan = sinkhorn(&cost, sinkhorn_cfg)?;
    let mut result = project_topk(&plan, &pool.sequence, proj_cfg)?;
    result.transported.source_id = format!("{}->{}", source.source_id, pool.sequence.source_id);
    result.transported.frame_hop_ms = source.frame_hop_ms.or(pool.sequence.frame_hop_ms);
    Ok(result)
}
