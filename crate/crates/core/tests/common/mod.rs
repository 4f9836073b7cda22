//! Test-only generators and brute-force oracles. Nothing here calls into the
//! library routine it is used to check.
#![allow(dead_code, clippy::needless_range_loop)]

use otalign::{CostMatrix, EmbeddingSequence, Label, ScoreSet};
use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

pub struct SeededRng(Xoshiro256PlusPlus);

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng(Xoshiro256PlusPlus::seed_from_u64(seed))
    }

    pub fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn int(&mut self, lo: usize, hi_inclusive: usize) -> usize {
        lo + (self.0.next_u64() % (hi_inclusive - lo + 1) as u64) as usize
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }
}

pub fn random_sequence(rng: &mut SeededRng, frames: usize, dim: usize) -> EmbeddingSequence {
    let data: Vec<f64> = (0..frames * dim).map(|_| rng.normal()).collect();
    EmbeddingSequence::new(dim, data, "rand").unwrap()
}

/// Same as [`random_sequence`] but every value is exactly representable in f32.
pub fn random_f32_sequence(rng: &mut SeededRng, frames: usize, dim: usize) -> EmbeddingSequence {
    let data: Vec<f64> = (0..frames * dim)
        .map(|_| rng.normal() as f32 as f64)
        .collect();
    EmbeddingSequence::new(dim, data, "rand").unwrap()
}

pub fn random_cost(rng: &mut SeededRng, rows: usize, cols: usize, lo: f64, hi: f64) -> CostMatrix {
    let v = (0..rows * cols).map(|_| rng.range(lo, hi)).collect();
    CostMatrix::from_vec(rows, cols, v).unwrap()
}

/// Cosine cost by direct formula, for checking `cosine_cost`.
pub fn naive_cosine(x: &[f64], y: &[f64]) -> f64 {
    let mut xy = 0.0;
    let mut xx = 0.0;
    let mut yy = 0.0;
    for k in 0..x.len() {
        xy += x[k] * y[k];
        xx += x[k] * x[k];
        yy += y[k] * y[k];
    }
    1.0 - xy / (xx.sqrt() * yy.sqrt())
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Exact OT value for square uniform problems: min over permutations of
/// `(1/n) * sum_i c[i, perm[i]]`.
pub fn brute_force_assignment(cost: &CostMatrix) -> f64 {
    let n = cost.rows();
    assert_eq!(n, cost.cols());
    permutations(n)
        .into_iter()
        .map(|p| {
            p.iter()
                .enumerate()
                .map(|(i, &j)| cost.get(i, j))
                .sum::<f64>()
                / n as f64
        })
        .fold(f64::INFINITY, f64::min)
}

/// Plain double loop.
pub fn naive_transport_cost(gamma: &[f64], cost: &CostMatrix) -> f64 {
    let mut total = 0.0;
    for i in 0..cost.rows() {
        for j in 0..cost.cols() {
            total += gamma[i * cost.cols() + j] * cost.get(i, j);
        }
    }
    total
}

/// Top-k projection by fully sorting each row with a stable sort.
pub fn sort_select_project(
    gamma: &[f64],
    rows: usize,
    cols: usize,
    target: &EmbeddingSequence,
    k: usize,
) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for i in 0..rows {
        let row = &gamma[i * cols..(i + 1) * cols];
        let mut order: Vec<usize> = (0..cols).collect();
        order.sort_by(|&a, &b| row[b].partial_cmp(&row[a]).unwrap());
        let top = &order[..k.min(cols)];
        let z: f64 = top.iter().map(|&j| row[j]).sum();
        let mut y = vec![0.0; target.dim()];
        for &j in top {
            for d in 0..target.dim() {
                y[d] += row[j] / z * target.frame(j)[d];
            }
        }
        out.push(y);
    }
    out
}

/// Full barycentric map by direct weighted sum with weights gamma_ij * M.
pub fn naive_full_project(
    gamma: &[f64],
    rows: usize,
    cols: usize,
    target: &EmbeddingSequence,
) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|i| {
            let mut y = vec![0.0; target.dim()];
            for j in 0..cols {
                for d in 0..target.dim() {
                    y[d] += gamma[i * cols + j] * rows as f64 * target.frame(j)[d];
                }
            }
            y
        })
        .collect()
}

/// EER by brute force: at each candidate threshold count accepted spoofs and
/// rejected bonafides directly, then interpolate across the first sign change
/// of `far - frr`.
pub fn brute_force_eer(bona: &[f64], spoof: &[f64]) -> f64 {
    let mut thresholds: Vec<f64> = bona.iter().chain(spoof).copied().collect();
    thresholds.sort_by(|a, b| a.partial_cmp(b).unwrap());
    thresholds.dedup();
    let rates = |t: f64| {
        let far = spoof.iter().filter(|&&s| s >= t).count() as f64 / spoof.len() as f64;
        let frr = bona.iter().filter(|&&s| s < t).count() as f64 / bona.len() as f64;
        (far, frr)
    };
    let mut pts: Vec<(f64, f64)> = thresholds.iter().map(|&t| rates(t)).collect();
    pts.push((0.0, 1.0));
    for w in pts.windows(2) {
        let (f0, r0) = w[0];
        let (f1, r1) = w[1];
        if f0 == r0 {
            return f0;
        }
        if f1 == r1 {
            return f1;
        }
        if (f0 - r0) > 0.0 && (f1 - r1) < 0.0 {
            // Solve f0 + t (f1 - f0) = r0 + t (r1 - r0).
            let t = (f0 - r0) / ((f0 - r0) - (f1 - r1));
            return f0 + t * (f1 - f0);
        }
    }
    unreachable!("no crossing")
}

pub fn score_set(bona: &[f64], spoof: &[f64]) -> ScoreSet {
    ScoreSet::from_pairs(
        bona.iter()
            .map(|&s| (Label::Bonafide, s))
            .chain(spoof.iter().map(|&s| (Label::Spoof, s))),
    )
}

/// Random score set with distinct scores, at least one trial per class.
pub fn random_scores(rng: &mut SeededRng, max_trials: usize) -> (Vec<f64>, Vec<f64>) {
    let n = rng.int(2, max_trials);
    let n_bona = rng.int(1, n - 1);
    let mut all: Vec<f64> = Vec::with_capacity(n);
    while all.len() < n {
        let s = rng.range(-3.0, 3.0);
        if !all.contains(&s) {
            all.push(s);
        }
    }
    let spoof = all.split_off(n_bona);
    (all, spoof)
}

/// Minimum and maximum over the selected targets, per component.
pub fn hull_bounds(target: &EmbeddingSequence, idx: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let d = target.dim();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for &j in idx {
        for c in 0..d {
            lo[c] = lo[c].min(target.frame(j)[c]);
            hi[c] = hi[c].max(target.frame(j)[c]);
        }
    }
    (lo, hi)
}
