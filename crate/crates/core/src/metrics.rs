//! Detection and distribution metrics: equal error rate over labeled scores
//! and the Fréchet distance between Gaussian fits of embedding sets.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::embedio::{EmbeddingSequence, Label, ScoreSet};
use crate::error::OtError;
use crate::otcore::cosine_distance;

/// One operating point. A trial is accepted iff `score >= threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    /// Fraction of spoof trials accepted.
    pub far: f64,
    /// Fraction of bonafide trials rejected.
    pub frr: f64,
}

/// ROC points at every distinct score plus a final `+inf` point where
/// everything is rejected. Thresholds ascend, so `far` never increases and
/// `frr` never decreases along the curve.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
}

fn class_counts(scores: &ScoreSet) -> Result<(usize, usize), OtError> {
    if let Some(i) = scores.trials.iter().position(|t| !t.score.is_finite()) {
        return Err(OtError::NonFiniteScore(i));
    }
    let bona = scores.count(Label::Bonafide);
    let spoof = scores.trials.len() - bona;
    if bona == 0 {
        return Err(OtError::MissingClass("bonafide"));
    }
    if spoof == 0 {
        return Err(OtError::MissingClass("spoof"));
    }
    Ok((bona, spoof))
}

pub fn roc_curve(scores: &ScoreSet) -> Result<RocCurve, OtError> {
    let (n_bona, n_spoof) = class_counts(scores)?;
    let mut sorted: Vec<(f64, Label)> = scores.trials.iter().map(|t| (t.score, t.label)).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Walk upward; before each distinct score, count trials strictly below it.
    let mut points = Vec::new();
    let (mut bona_below, mut spoof_below) = (0usize, 0usize);
    let mut idx = 0;
    while idx < sorted.len() {
        let threshold = sorted[idx].0;
        points.push(RocPoint {
            threshold,
            far: (n_spoof - spoof_below) as f64 / n_spoof as f64,
            frr: bona_below as f64 / n_bona as f64,
        });
        while idx < sorted.len() && sorted[idx].0 == threshold {
            match sorted[idx].1 {
                Label::Bonafide => bona_below += 1,
                Label::Spoof => spoof_below += 1,
            }
            idx += 1;
        }
    }
    points.push(RocPoint {
        threshold: f64::INFINITY,
        far: 0.0,
        frr: 1.0,
    });
    Ok(RocCurve { points })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eer {
    /// Rate in `[0, 1]`.
    pub rate: f64,
    pub threshold: f64,
}

/// Equal error rate by threshold sweep.
///
/// Finds the first ROC point where `far - frr <= 0`. An exact zero is
/// returned as is; otherwise both rates are linearly interpolated between
/// that point and its predecessor, where they meet. The threshold is
/// interpolated the same way, except against the `+inf` sentinel where the
/// largest finite score is reported.
pub fn compute_eer(scores: &ScoreSet) -> Result<Eer, OtError> {
    let roc = roc_curve(scores)?;
    let pts = &roc.points;
    // pts[0] has frr = 0 and far = 1, so the sign change is never at index 0.
    let k = pts
        .iter()
        .position(|p| p.far - p.frr <= 0.0)
        .expect("sentinel point has far - frr = -1");
    let hi = pts[k];
    if hi.far == hi.frr {
        return Ok(Eer {
            rate: hi.far,
            threshold: hi.threshold,
        });
    }
    let lo = pts[k - 1];
    let d_lo = lo.far - lo.frr;
    let d_hi = hi.far - hi.frr;
    let t = d_lo / (d_lo - d_hi);
    let rate = lo.far + t * (hi.far - lo.far);
    let threshold = if hi.threshold.is_finite() {
        lo.threshold + t * (hi.threshold - lo.threshold)
    } else {
        lo.threshold
    };
    Ok(Eer { rate, threshold })
}

/// Mean and sample covariance (denominator `count - 1`) of a set of frames.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianStats {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub count: usize,
}

impl GaussianStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Wraps explicit parameters; the covariance is symmetrized.
    pub fn from_parts(
        mean: Vec<f64>,
        covariance: DMatrix<f64>,
        count: usize,
    ) -> Result<Self, OtError> {
        let d = mean.len();
        if covariance.nrows() != d || covariance.ncols() != d {
            return Err(OtError::DimMismatch {
                left: d,
                right: covariance.nrows(),
            });
        }
        if count < 2 {
            return Err(OtError::TooFewFrames(count));
        }
        let covariance = (&covariance + covariance.transpose()) * 0.5;
        Ok(GaussianStats {
            mean: DVector::from_vec(mean),
            covariance,
            count,
        })
    }
}

pub fn gaussian_stats(embeddings: &EmbeddingSequence) -> Result<GaussianStats, OtError> {
    let n = embeddings.len();
    if n < 2 {
        return Err(OtError::TooFewFrames(n));
    }
    let d = embeddings.dim();
    let mut mean = vec![0.0; d];
    for frame in embeddings.frames() {
        for (m, v) in mean.iter_mut().zip(frame) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    // Centered data as a d x n matrix; covariance = X Xᵀ / (n - 1).
    let mut centered = DMatrix::<f64>::zeros(d, n);
    for (c, frame) in embeddings.frames().enumerate() {
        for r in 0..d {
            centered[(r, c)] = frame[r] - mean[r];
        }
    }
    let cov = (&centered * centered.transpose()) / (n - 1) as f64;
    GaussianStats::from_parts(mean, cov, n)
}

fn symmetric_eigen(m: DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>, OtError> {
    SymmetricEigen::try_new(m, f64::EPSILON, 0).ok_or(OtError::EigenFailure)
}

/// Eigenvalues at or below `1e-12 * max` (or negative) become zero.
fn clamp_eigenvalues(values: &mut DVector<f64>) {
    let max = values.iter().cloned().fold(0.0, f64::max);
    let floor = 1e-12 * max;
    for v in values.iter_mut() {
        if *v <= floor {
            *v = 0.0;
        }
    }
}

fn psd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>, OtError> {
    let mut eig = symmetric_eigen(m.clone())?;
    clamp_eigenvalues(&mut eig.eigenvalues);
    let roots = eig.eigenvalues.map(f64::sqrt);
    let v = &eig.eigenvectors;
    Ok(v * DMatrix::from_diagonal(&roots) * v.transpose())
}

/// `|mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a^½ S_b S_a^½)^½)`, clamped at 0.
pub fn frechet_distance(a: &GaussianStats, b: &GaussianStats) -> Result<f64, OtError> {
    if a.dim() != b.dim() {
        return Err(OtError::DimMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let mean_term = (&a.mean - &b.mean).norm_squared();
    let root_a = psd_sqrt(&a.covariance)?;
    let inner = &root_a * &b.covariance * &root_a;
    let inner = (&inner + inner.transpose()) * 0.5;
    let mut eig = symmetric_eigen(inner)?;
    clamp_eigenvalues(&mut eig.eigenvalues);
    let cross: f64 = eig.eigenvalues.iter().map(|v| v.sqrt()).sum();
    let value = mean_term + a.covariance.trace() + b.covariance.trace() - 2.0 * cross;
    Ok(value.max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairingMode {
    /// Each `a` frame against its closest `b` frame.
    Nearest,
    /// Frame `i` of `a` against frame `i` of `b`.
    Framewise,
}

/// Mean cosine cost between two sequences.
pub fn mean_pairwise_cost(
    a: &EmbeddingSequence,
    b: &EmbeddingSequence,
    mode: PairingMode,
) -> Result<f64, OtError> {
    if a.dim() != b.dim() {
        return Err(OtError::DimMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let total: f64 = match mode {
        PairingMode::Framewise => {
            if a.len() != b.len() {
                return Err(OtError::CountMismatch {
                    left: a.len(),
                    right: b.len(),
                });
            }
            a.frames()
                .zip(b.frames())
                .map(|(x, y)| cosine_distance(x, y))
                .sum()
        }
        PairingMode::Nearest => a
            .frames()
            .map(|x| {
                b.frames()
                    .map(|y| cosine_distance(x, y))
                    .fold(f64::INFINITY, f64::min)
            })
            .sum(),
    };
    Ok(total / a.len() as f64)
}
