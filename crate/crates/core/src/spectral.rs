//! Affinity construction and normalized spectral clustering.
//!
//! Ng-Jordan-Weiss variant: bottom-`c` eigenvectors of
//! `I - D^{-1/2} A D^{-1/2}`, rows scaled to unit length, then k-means.

use nalgebra::SymmetricEigen;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::Matrix;

/// Degree assigned to isolated nodes.
pub const MIN_DEGREE: f64 = 1e-12;
pub const KMEANS_RESTARTS: usize = 10;
pub const KMEANS_MAX_ITER: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    pub a: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringResult {
    pub labels: Vec<usize>,
    /// `n x c`, rows unit-normalized.
    pub embedding: Matrix,
    pub kmeans_inertia: f64,
    pub seed: u64,
}

/// `A = |Z| + |Z^T|`.
pub fn affinity_from_z(z: &Matrix) -> Result<AffinityMatrix> {
    let (r, c) = z.shape();
    if r != c {
        return Err(Error::DimensionMismatch(format!("Z must be square, got {r}x{c}")));
    }
    if z.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("Z has non-finite entries".into()));
    }
    Ok(AffinityMatrix {
        a: Matrix::from_fn(r, r, |i, j| z[(i, j)].abs() + z[(j, i)].abs()),
    })
}

/// Row-normalized spectral embedding (`n x c`) of an affinity matrix.
pub fn spectral_embedding(a: &AffinityMatrix, c: usize) -> Result<Matrix> {
    let n = a.a.nrows();
    if c > n {
        return Err(Error::InvalidArgument(format!("c={c} exceeds n={n}")));
    }
    if a.a.iter().all(|&x| x == 0.0) {
        return Err(Error::ZeroAffinity);
    }
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|i| 1.0 / a.a.row(i).sum().max(MIN_DEGREE).sqrt())
        .collect();
    let l_sym = Matrix::from_fn(n, n, |i, j| {
        let off = a.a[(i, j)] * inv_sqrt[i] * inv_sqrt[j];
        if i == j {
            1.0 - off
        } else {
            -off
        }
    });
    let eig = SymmetricEigen::new(l_sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| {
        eig.eigenvalues[x]
            .total_cmp(&eig.eigenvalues[y])
            .then(x.cmp(&y))
    });
    let mut emb = Matrix::zeros(n, c);
    for (k, &idx) in order.iter().take(c).enumerate() {
        emb.set_column(k, &eig.eigenvectors.column(idx));
    }
    for mut row in emb.row_iter_mut() {
        let nrm = row.norm();
        if nrm > 0.0 {
            row /= nrm;
        }
    }
    Ok(emb)
}

pub fn spectral_cluster(a: &AffinityMatrix, c: usize, seed: u64) -> Result<ClusteringResult> {
    if c < 2 {
        return Err(Error::InvalidArgument(format!("need c >= 2, got {c}")));
    }
    let embedding = spectral_embedding(a, c)?;
    let km = kmeans(&embedding, c, KMEANS_RESTARTS, KMEANS_MAX_ITER, seed)?;
    Ok(ClusteringResult {
        labels: km.labels,
        embedding,
        kmeans_inertia: km.inertia,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    /// `c x dim`
    pub centers: Matrix,
    pub inertia: f64,
}

/// k-means with k-means++ seeding over the rows of `points`, best of
/// `restarts` by inertia. Restart seeds are drawn from `seed`, so the result
/// does not depend on how restarts are scheduled across threads.
pub fn kmeans(
    points: &Matrix,
    c: usize,
    restarts: usize,
    max_iter: usize,
    seed: u64,
) -> Result<KMeansResult> {
    let n = points.nrows();
    if c == 0 || c > n {
        return Err(Error::InvalidArgument(format!("k-means with c={c}, n={n}")));
    }
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<u64> = (0..restarts.max(1)).map(|_| master.random()).collect();
    let runs: Vec<KMeansResult> = seeds
        .par_iter()
        .map(|&s| lloyd(points, c, max_iter, &mut ChaCha8Rng::seed_from_u64(s)))
        .collect();
    let best = runs
        .into_iter()
        .enumerate()
        .min_by(|(i, a), (j, b)| a.inertia.total_cmp(&b.inertia).then(i.cmp(j)))
        .map(|(_, r)| r)
        .expect("at least one restart");
    Ok(best)
}

fn sq_dist_row(points: &Matrix, i: usize, centers: &Matrix, k: usize) -> f64 {
    (0..points.ncols())
        .map(|t| {
            let d = points[(i, t)] - centers[(k, t)];
            d * d
        })
        .sum()
}

fn plus_plus_init<R: Rng>(points: &Matrix, c: usize, rng: &mut R) -> Matrix {
    let (n, dim) = points.shape();
    let mut centers = Matrix::zeros(c, dim);
    let first = rng.random_range(0..n);
    centers.set_row(0, &points.row(first));
    let mut dmin: Vec<f64> = (0..n).map(|i| sq_dist_row(points, i, &centers, 0)).collect();
    for k in 1..c {
        let total: f64 = dmin.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in dmin.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.set_row(k, &points.row(pick));
        for (i, dm) in dmin.iter_mut().enumerate() {
            *dm = dm.min(sq_dist_row(points, i, &centers, k));
        }
    }
    centers
}

fn lloyd<R: Rng>(points: &Matrix, c: usize, max_iter: usize, rng: &mut R) -> KMeansResult {
    let (n, dim) = points.shape();
    let mut centers = plus_plus_init(points, c, rng);
    let mut labels = vec![usize::MAX; n];
    for _ in 0..max_iter.max(1) {
        let mut changed = false;
        for (i, label) in labels.iter_mut().enumerate() {
            let best = (0..c)
                .map(|k| (k, sq_dist_row(points, i, &centers, k)))
                .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
                .map(|(k, _)| k)
                .expect("c >= 1");
            if *label != best {
                *label = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = Matrix::zeros(c, dim);
        let mut counts = vec![0usize; c];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            for t in 0..dim {
                sums[(l, t)] += points[(i, t)];
            }
        }
        for k in 0..c {
            if counts[k] > 0 {
                for t in 0..dim {
                    centers[(k, t)] = sums[(k, t)] / counts[k] as f64;
                }
            } else {
                // Empty cluster: move it onto the worst-fit point.
                let far = (0..n)
                    .map(|i| (i, sq_dist_row(points, i, &centers, labels[i])))
                    .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
                    .map(|(i, _)| i)
                    .expect("n >= 1");
                centers.set_row(k, &points.row(far));
                labels[far] = k;
            }
        }
    }
    let inertia = (0..n).map(|i| sq_dist_row(points, i, &centers, labels[i])).sum();
    KMeansResult {
        labels,
        centers,
        inertia,
    }
}
