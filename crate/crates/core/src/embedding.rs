//! Prompt embeddings conditioning the regularizer networks: a statistical
//! pattern embedding computed from the sampling mask, and a trainable
//! contrast embedding table.
//!
//! The pattern embedding splits the mask in two halves along kx, projects
//! each half along kx and along ky, and takes mean/variance of the per-bin
//! sample counts and of the spacings between nonzero bins, plus the global
//! sampling density. Counts are normalized by the projected extent and
//! spacings by the axis extent, so entries stay in [0, 1] across grid sizes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::sampling::SamplingMask;
use crate::tensor::RealTensor;

pub const PATTERN_EMBED_LEN: usize = 17;

/// 17-entry pattern descriptor: [half in {low-kx, high-kx}] x
/// [projection in {kx, ky}] x [count-mean, count-var, spacing-mean,
/// spacing-var], then the global density.
#[derive(Clone, Debug, PartialEq)]
pub struct PatternEmbedding {
    pub v: [f32; PATTERN_EMBED_LEN],
}

impl PatternEmbedding {
    pub fn density(&self) -> f32 {
        self.v[PATTERN_EMBED_LEN - 1]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.v
    }
}

/// mean/var of counts (normalized by `norm_count`), mean/var of gaps between
/// consecutive nonzero bins (normalized by the full axis extent `gap_norm`,
/// population variance in both cases).
fn profile_stats(profile: &[u32], norm_count: f64, gap_norm: f64) -> [f64; 4] {
    let n = profile.len() as f64;
    let counts: Vec<f64> = profile.iter().map(|&c| c as f64 / norm_count).collect();
    let mean = counts.iter().sum::<f64>() / n;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / n;

    let nz: Vec<usize> = profile
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(i, _)| i)
        .collect();
    let (smean, svar) = if nz.len() < 2 {
        // empty or single-bin profile: spacing stats flagged as zero
        (0.0, 0.0)
    } else {
        let gaps: Vec<f64> = nz
            .windows(2)
            .map(|w| (w[1] - w[0]) as f64 / gap_norm)
            .collect();
        let m = gaps.iter().sum::<f64>() / gaps.len() as f64;
        let v = gaps.iter().map(|g| (g - m).powi(2)).sum::<f64>() / gaps.len() as f64;
        (m, v)
    };
    [mean, var, smean, svar]
}

/// Stats of one mask half with the split along the given axis
/// (0 = kx i.e. rows, 1 = ky i.e. columns). Returns the 8 entries
/// [axis-0-projection stats, axis-1-projection stats] for that half.
fn half_stats(mask: &SamplingMask, split_axis: usize, high: bool) -> [f64; 8] {
    let (nx, ny) = (mask.nx, mask.ny);
    let ext = if split_axis == 0 { nx } else { ny };
    let half = ext / 2;
    let range = if high { half..ext } else { 0..half };

    // profile over ky (summed along kx within the half) and over kx
    let mut over_y = vec![0u32; ny];
    let mut over_x = vec![0u32; nx];
    for x in 0..nx {
        for y in 0..ny {
            let in_half = if split_axis == 0 {
                range.contains(&x)
            } else {
                range.contains(&y)
            };
            if in_half && mask.at(x, y) {
                over_y[y] += 1;
                over_x[x] += 1;
            }
        }
    }
    // bins orthogonal to the split keep full extent; bins along the split
    // axis are restricted to the half. Gaps always normalize by the full
    // axis extent so half-profiles stay comparable with full ones.
    let (a, b) = if split_axis == 0 {
        // kx-projection -> profile over ky, counts normalized by rows summed
        let over_x_half: Vec<u32> = over_x[range].to_vec();
        (
            profile_stats(&over_y, half as f64, ny as f64),
            profile_stats(&over_x_half, ny as f64, nx as f64),
        )
    } else {
        let over_y_half: Vec<u32> = over_y[range].to_vec();
        (
            profile_stats(&over_y_half, nx as f64, ny as f64),
            profile_stats(&over_x, half as f64, nx as f64),
        )
    };
    [a[0], a[1], a[2], a[3], b[0], b[1], b[2], b[3]]
}

/// Pattern embedding with a configurable split axis; the public entry point
/// fixes the split along kx. Exposed within the crate so the definitional
/// symmetry (transpose + swap split axis + swap axis-labeled entries) can be
/// tested directly.
pub(crate) fn pattern_embedding_split(mask: &SamplingMask, split_axis: usize) -> Result<PatternEmbedding> {
    let ones = mask.ones();
    if ones == 0 {
        return Err(Error::Degenerate("all-zero mask".into()));
    }
    let lo = half_stats(mask, split_axis, false);
    let hi = half_stats(mask, split_axis, true);
    let mut v = [0.0f32; PATTERN_EMBED_LEN];
    for i in 0..8 {
        v[i] = lo[i] as f32;
        v[8 + i] = hi[i] as f32;
    }
    v[16] = (ones as f64 / (mask.nx * mask.ny) as f64) as f32;
    Ok(PatternEmbedding { v })
}

/// Fig.-style statistical embedding of a sampling mask (split along kx).
pub fn pattern_embedding(mask: &SamplingMask) -> Result<PatternEmbedding> {
    pattern_embedding_split(mask, 0)
}

/// Trainable `C x d_c` contrast embedding table, rows initialized from a
/// fixed-seed standard normal scaled by 0.02.
#[derive(Clone, Debug)]
pub struct ContrastTable {
    pub table: RealTensor<f32>,
}

impl ContrastTable {
    pub fn new(n_contrasts: usize, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f32> = (0..n_contrasts * dim)
            .map(|_| {
                let z: f32 = StandardNormal.sample(&mut rng);
                0.02 * z
            })
            .collect();
        Self {
            table: RealTensor::new(vec![n_contrasts, dim], data).expect("sized"),
        }
    }

    pub fn n_contrasts(&self) -> usize {
        self.table.shape()[0]
    }

    pub fn dim(&self) -> usize {
        self.table.shape()[1]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContrastEmbedding {
    pub contrast_id: usize,
    pub v: Vec<f32>,
}

/// Row lookup in the contrast table.
pub fn contrast_embedding(contrast_id: usize, table: &ContrastTable) -> Result<ContrastEmbedding> {
    if contrast_id >= table.n_contrasts() {
        return Err(Error::InvalidArg(format!(
            "contrast_id {contrast_id} out of range [0, {})",
            table.n_contrasts()
        )));
    }
    let d = table.dim();
    let row = &table.table.data()[contrast_id * d..(contrast_id + 1) * d];
    Ok(ContrastEmbedding {
        contrast_id,
        v: row.to_vec(),
    })
}

/// Nearest-centroid classifier over embeddings, used by the separability
/// check: returns the fraction of points whose nearest kind-centroid matches
/// their own kind.
pub fn nearest_centroid_accuracy(embeddings: &[(usize, PatternEmbedding)], n_classes: usize) -> f64 {
    let dim = PATTERN_EMBED_LEN;
    let mut centroids = vec![vec![0.0f64; dim]; n_classes];
    let mut counts = vec![0usize; n_classes];
    for (k, e) in embeddings {
        counts[*k] += 1;
        for (c, &x) in centroids[*k].iter_mut().zip(e.v.iter()) {
            *c += x as f64;
        }
    }
    for (c, &n) in centroids.iter_mut().zip(&counts) {
        for v in c.iter_mut() {
            *v /= n.max(1) as f64;
        }
    }
    let mut hits = 0usize;
    for (k, e) in embeddings {
        let best = centroids
            .iter()
            .enumerate()
            .map(|(j, c)| {
                let d2: f64 = c
                    .iter()
                    .zip(e.v.iter())
                    .map(|(&ci, &xi)| (ci - xi as f64).powi(2))
                    .sum();
                (j, d2)
            })
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap()
            .0;
        if best == *k {
            hits += 1;
        }
    }
    hits as f64 / embeddings.len().max(1) as f64
}
