//! Seeded Gaussian cluster clouds standing in for real embedding sets, and
//! a before/after alignment experiment over them.
//!
//! The generator is xoshiro256++ seeded from a `u64` through SplitMix64.
//! A uniform draw is `(next_u64 >> 11) * 2^-53`; normals come from the
//! Box-Muller pair `sqrt(-2 ln(1 - u1)) * (cos, sin)(2 pi u2)`, cosine first.
//! Frame `f` is centered on `centers[f % centers.len()]`, components filled
//! in order. Frames whose `f32` image has zero norm are redrawn.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::embedio::{EmbeddingSequence, TargetPool};
use crate::error::OtError;
use crate::metrics::{frechet_distance, gaussian_stats, mean_pairwise_cost, PairingMode};
use crate::otcore::{SinkhornConfig, SinkhornDiagnostics};
use crate::transport::{align, ProjectionConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSpec {
    pub dim: usize,
    pub centers: Vec<Vec<f64>>,
    /// Isotropic standard deviation around each center.
    pub spread: f64,
    pub frames_per_center: usize,
    pub seed: u64,
}

impl ClusterSpec {
    pub fn validate(&self) -> Result<(), OtError> {
        let bad = |msg: String| Err(OtError::InvalidClusterSpec(msg));
        if self.dim == 0 {
            return bad("dim must be at least 1".into());
        }
        if self.centers.is_empty() {
            return bad("no centers".into());
        }
        if let Some(c) = self.centers.iter().find(|c| c.len() != self.dim) {
            return bad(format!("center of length {} in dim {}", c.len(), self.dim));
        }
        if self.centers.iter().flatten().any(|v| !v.is_finite()) {
            return bad("non-finite center".into());
        }
        if !(self.spread > 0.0 && self.spread.is_finite()) {
            return bad(format!("spread must be positive, got {}", self.spread));
        }
        if self.frames_per_center == 0 {
            return bad("frames_per_center must be at least 1".into());
        }
        Ok(())
    }

    pub fn frame_count(&self) -> usize {
        self.centers.len() * self.frames_per_center
    }
}

struct NormalStream {
    rng: Xoshiro256PlusPlus,
    spare: Option<f64>,
}

impl NormalStream {
    fn new(seed: u64) -> Self {
        NormalStream {
            rng: Xoshiro256PlusPlus::seed_from_u64(seed),
            spare: None,
        }
    }

    fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn next(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let r = (-2.0 * (1.0 - self.uniform()).ln()).sqrt();
        let theta = std::f64::consts::TAU * self.uniform();
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }
}

pub fn generate(spec: &ClusterSpec) -> Result<EmbeddingSequence, OtError> {
    spec.validate()?;
    let mut normals = NormalStream::new(spec.seed);
    let mut data = Vec::with_capacity(spec.frame_count() * spec.dim);
    let mut frame = vec![0.0; spec.dim];
    for f in 0..spec.frame_count() {
        let center = &spec.centers[f % spec.centers.len()];
        loop {
            for (v, c) in frame.iter_mut().zip(center) {
                *v = c + spec.spread * normals.next();
            }
            if frame.iter().any(|&v| v as f32 != 0.0) {
                break;
            }
        }
        data.extend_from_slice(&frame);
    }
    EmbeddingSequence::new(spec.dim, data, format!("synth-{}", spec.seed))
}

/// Distances to the target before and after transport.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentReport {
    pub dim: usize,
    pub source_frames: usize,
    pub target_frames: usize,
    pub nearest_cost_before: f64,
    pub nearest_cost_after: f64,
    pub fad_before: f64,
    pub fad_after: f64,
    pub diagnostics: SinkhornDiagnostics,
}

impl AlignmentReport {
    /// Flat `key=value` block, one entry per line.
    pub fn to_kv(&self) -> String {
        let d = &self.diagnostics;
        [
            format!("dim={}", self.dim),
            format!("source_frames={}", self.source_frames),
            format!("target_frames={}", self.target_frames),
            format!("nearest_cost_before={:.6}", self.nearest_cost_before),
            format!("nearest_cost_after={:.6}", self.nearest_cost_after),
            format!("fad_before={:.6}", self.fad_before),
            format!("fad_after={:.6}", self.fad_after),
            format!("iterations_used={}", d.iterations_used),
            format!("final_violation={:e}", d.final_violation),
            format!("converged={}", d.converged()),
        ]
        .join("\n")
            + "\n"
    }
}

/// Transports a synthetic source cloud onto a synthetic target cloud and
/// measures nearest-neighbor cosine cost and FAD to the target, before and after.
pub fn alignment_experiment(
    source_spec: &ClusterSpec,
    target_spec: &ClusterSpec,
    sinkhorn_cfg: &SinkhornConfig,
    proj_cfg: &ProjectionConfig,
) -> Result<AlignmentReport, OtError> {
    if source_spec.dim != target_spec.dim {
        return Err(OtError::DimMismatch {
            left: source_spec.dim,
            right: target_spec.dim,
        });
    }
    let source = generate(source_spec)?;
    let target = generate(target_spec)?;
    let pool = TargetPool::from_sequence(target);
    let result = align(&source, &pool, sinkhorn_cfg, proj_cfg)?;
    let target = &pool.sequence;
    let moved = &result.transported;

    let target_stats = gaussian_stats(target)?;
    Ok(AlignmentReport {
        dim: source.dim(),
        source_frames: source.len(),
        target_frames: target.len(),
        nearest_cost_before: mean_pairwise_cost(&source, target, PairingMode::Nearest)?,
        nearest_cost_after: mean_pairwise_cost(moved, target, PairingMode::Nearest)?,
        fad_before: frechet_distance(&gaussian_stats(&source)?, &target_stats)?,
        fad_after: frechet_distance(&gaussian_stats(moved)?, &target_stats)?,
        diagnostics: result.diagnostics,
    })
}
