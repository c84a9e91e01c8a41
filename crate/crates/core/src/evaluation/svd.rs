use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{dot, norm};

pub const SVD_TOLERANCE: f64 = 1e-10;
pub const SVD_MAX_ITERATIONS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvdProjection {
    /// Row projections onto the two axes.
    pub coords: Vec<[f64; 2]>,
    /// Top-2 right singular vectors.
    pub axes: [Vec<f64>; 2],
    pub singular_values: [f64; 2],
    /// Column means removed before the decomposition.
    pub mean: Vec<f64>,
    pub iterations: usize,
}

impl SvdProjection {
    /// Rank-2 reconstruction `mean + coords * axes^T`.
    pub fn reconstruct(&self) -> Vec<Vec<f64>> {
        self.coords
            .iter()
            .map(|c| {
                self.mean
                    .iter()
                    .enumerate()
                    .map(|(j, m)| m + c[0] * self.axes[0][j] + c[1] * self.axes[1][j])
                    .collect()
            })
            .collect()
    }
}

struct Centered {
    rows: Vec<Vec<f64>>,
    d: usize,
}

impl Centered {
    /// `A^T (A x)`
    fn gram_apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        for row in &self.rows {
            let a = dot(row, x);
            for (o, r) in out.iter_mut().zip(row) {
                *o += a * r;
            }
        }
        out
    }
}

fn scale(v: &[f64], s: f64) -> Vec<f64> {
    v.iter().map(|x| x * s).collect()
}

fn axpy(a: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(x, y)| a * x + y).collect()
}

/// Orthonormalizes `w2` against unit `q1`; falls back to `fallback` (already
/// orthogonal to `q1`) when `w2` has collapsed into the span of `q1`.
fn orthonormal_pair(w1: &[f64], w2: &[f64], fallback: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
    let n1 = norm(w1);
    if n1 == 0.0 {
        return None;
    }
    let q1 = scale(w1, 1.0 / n1);
    let mut q2 = axpy(-dot(&q1, w2), &q1, w2);
    let mut n2 = norm(&q2);
    if n2 <= 1e-14 * n1 {
        q2 = axpy(-dot(&q1, fallback), &q1, fallback);
        n2 = norm(&q2);
    }
    if n2 == 0.0 {
        return None;
    }
    Some((q1, scale(&q2, 1.0 / n2)))
}

/// Eigen-decomposition of the symmetric 2x2 matrix `[[a, b], [b, c]]`:
/// eigenvalues descending and the rotation `(cos, sin)` of the first
/// eigenvector.
fn sym2_eigen(a: f64, b: f64, c: f64) -> (f64, f64, f64, f64) {
    let half_trace = (a + c) / 2.0;
    let disc = (((a - c) / 2.0).powi(2) + b * b).sqrt();
    let theta = 0.5 * (2.0 * b).atan2(a - c);
    (half_trace + disc, half_trace - disc, theta.cos(), theta.sin())
}

fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Top-2 truncated SVD of the column-centered matrix.
///
/// Two vectors are iterated under `A^T A`, the second Gram-Schmidt deflated
/// against the first, and a Rayleigh-Ritz rotation on their span separates
/// the two singular directions each step. Iteration stops when both Ritz
/// residuals fall below `tolerance` relative to the top eigenvalue.
pub fn truncated_svd_2d_with(
    vectors: &[Vec<f64>],
    seed: u64,
    tolerance: f64,
    max_iterations: usize,
) -> Result<SvdProjection> {
    let n = vectors.len();
    if n < 2 {
        return Err(Error::EmptyInput("SVD needs at least two rows".to_string()));
    }
    let d = vectors[0].len();
    if d < 2 {
        return Err(Error::EmptyInput("SVD needs at least two columns".to_string()));
    }
    if let Some(v) = vectors.iter().find(|v| v.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: v.len(),
        });
    }
    if vectors.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::EmptyInput("SVD input has non-finite values".to_string()));
    }
    let mean: Vec<f64> = (0..d)
        .map(|j| {
            let column: Vec<f64> = vectors.iter().map(|v| v[j]).collect();
            crate::numeric::pairwise_sum(&column) / n as f64
        })
        .collect();
    let a = Centered {
        rows: vectors
            .iter()
            .map(|v| v.iter().zip(&mean).map(|(x, m)| x - m).collect())
            .collect(),
        d,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut start = || -> Vec<f64> { (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect() };
    let s1 = start();
    let s2 = start();
    let (mut q1, mut q2) = orthonormal_pair(&s1, &s2, &s2)
        .ok_or_else(|| Error::EmptyInput("degenerate SVD start".to_string()))?;

    let mut residual = f64::INFINITY;
    for iteration in 1..=max_iterations {
        let z1 = a.gram_apply(&q1);
        let z2 = a.gram_apply(&q2);
        let (l1, l2, c, s) = sym2_eigen(dot(&q1, &z1), dot(&q1, &z2), dot(&q2, &z2));
        let v1 = axpy(s, &q2, &scale(&q1, c));
        let v2 = axpy(c, &q2, &scale(&q1, -s));
        let cv1 = axpy(s, &z2, &scale(&z1, c));
        let cv2 = axpy(c, &z2, &scale(&z1, -s));
        let r1 = norm(&axpy(-l1, &v1, &cv1));
        let r2 = norm(&axpy(-l2, &v2, &cv2));
        let top = l1.max(0.0);
        residual = if top > 0.0 { r1.max(r2) / top } else { 0.0 };
        if residual <= tolerance {
            let mut axes = [v1, v2];
            axes.iter_mut().for_each(|v| fix_sign(v));
            let coords = a
                .rows
                .iter()
                .map(|row| [dot(row, &axes[0]), dot(row, &axes[1])])
                .collect();
            return Ok(SvdProjection {
                coords,
                axes,
                singular_values: [l1.max(0.0).sqrt(), l2.max(0.0).sqrt()],
                mean,
                iterations: iteration,
            });
        }
        (q1, q2) = orthonormal_pair(&cv1, &cv2, &v2)
            .ok_or(Error::NonConvergence {
                iterations: iteration,
                residual,
            })?;
    }
    Err(Error::NonConvergence {
        iterations: max_iterations,
        residual,
    })
}

pub fn truncated_svd_2d(vectors: &[Vec<f64>], seed: u64) -> Result<SvdProjection> {
    truncated_svd_2d_with(vectors, seed, SVD_TOLERANCE, SVD_MAX_ITERATIONS)
}
