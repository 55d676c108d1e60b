//! Heat-kernel k-nearest-neighbor graphs and their Laplacians.
//!
//! `s_ij = exp(-||x_i - x_j||^2 / (2 sigma^2))` is kept when `j` is among the
//! `k` nearest neighbors of `i` or vice versa (union symmetrization); all other
//! entries, including the diagonal, are zero.

use crate::dataset::ViewMatrix;
use crate::error::{Error, Result};
use crate::Matrix;

/// Kernel width policy.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Sigma {
    #[default]
    /// Median Euclidean length of the retained k-NN edges.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub s: Matrix,
    pub kernel_width: f64,
    pub k: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaplacianSource {
    View(usize),
    Averaged,
    Latent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianMatrix {
    pub l: Matrix,
    pub source: LaplacianSource,
}

/// Squared Euclidean distances between the columns of `points`.
pub fn pairwise_sq_dists(points: &Matrix) -> Matrix {
    let n = points.ncols();
    let mut d = Matrix::zeros(n, n);
    for j in 0..n {
        for i in (j + 1)..n {
            let v = (points.column(i) - points.column(j)).norm_squared();
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    d
}

/// For each column, the indices of its `k` nearest other columns. Ties are
/// broken by index so the graph is deterministic.
fn knn_indices(dist: &Matrix, k: usize) -> Vec<Vec<usize>> {
    let n = dist.nrows();
    (0..n)
        .map(|i| {
            let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            others.sort_by(|&a, &b| dist[(i, a)].total_cmp(&dist[(i, b)]).then(a.cmp(&b)));
            others.truncate(k);
            others
        })
        .collect()
}

pub fn knn_heat_similarity(points: &Matrix, k: usize, sigma: Sigma) -> Result<SimilarityMatrix> {
    let n = points.ncols();
    if k == 0 || k >= n {
        return Err(Error::InvalidArgument(format!(
            "neighbor count k={k} must satisfy 1 <= k < n={n}"
        )));
    }
    if let Sigma::Fixed(s) = sigma {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidArgument(format!("kernel width must be > 0, got {s}")));
        }
    }
    if let Some((i, j)) = first_non_finite(points) {
        return Err(Error::NonFinite {
            what: "graph input".into(),
            row: i,
            col: j,
        });
    }

    let dist = pairwise_sq_dists(points);
    let mut adj = vec![false; n * n];
    for (i, nbrs) in knn_indices(&dist, k).into_iter().enumerate() {
        for j in nbrs {
            adj[i * n + j] = true;
            adj[j * n + i] = true;
        }
    }

    let width = match sigma {
        Sigma::Fixed(s) => s,
        Sigma::Auto => {
            let mut lens: Vec<f64> = Vec::new();
            for i in 0..n {
                for j in (i + 1)..n {
                    if adj[i * n + j] {
                        lens.push(dist[(i, j)].sqrt());
                    }
                }
            }
            auto_width(&mut lens)
        }
    };

    let denom = 2.0 * width * width;
    let s = Matrix::from_fn(n, n, |i, j| {
        if i != j && adj[i * n + j] {
            (-dist[(i, j)] / denom).exp()
        } else {
            0.0
        }
    });
    Ok(SimilarityMatrix {
        s,
        kernel_width: width,
        k,
    })
}

// Median edge length; falls back to the longest edge, then to 1, when the
// median is zero (coincident points) so the kernel stays well defined.
fn auto_width(lens: &mut [f64]) -> f64 {
    lens.sort_by(f64::total_cmp);
    let m = lens.len();
    let median = if m == 0 {
        0.0
    } else if m % 2 == 1 {
        lens[m / 2]
    } else {
        0.5 * (lens[m / 2 - 1] + lens[m / 2])
    };
    if median > 0.0 {
        median
    } else {
        match lens.last() {
            Some(&mx) if mx > 0.0 => mx,
            _ => 1.0,
        }
    }
}

/// `L = D - S` with `D_ii = sum_j s_ij`.
pub fn laplacian(s: &SimilarityMatrix) -> Matrix {
    let n = s.s.nrows();
    let mut l = -s.s.clone();
    for i in 0..n {
        l[(i, i)] += s.s.row(i).sum();
    }
    l
}

pub fn view_laplacian(view: &ViewMatrix, k: usize, sigma: Sigma) -> Result<LaplacianMatrix> {
    let s = knn_heat_similarity(&view.data, k, sigma)?;
    Ok(LaplacianMatrix {
        l: laplacian(&s),
        source: LaplacianSource::View(view.view_index),
    })
}

/// `(1/V) sum_v L^v` over the per-view graphs.
pub fn averaged_laplacian(views: &[ViewMatrix], k: usize, sigma: Sigma) -> Result<LaplacianMatrix> {
    let first = views
        .first()
        .ok_or_else(|| Error::InvalidArgument("no views".into()))?;
    let n = first.n_samples();
    let mut acc = Matrix::zeros(n, n);
    for v in views {
        if v.n_samples() != n {
            return Err(Error::DimensionMismatch(format!(
                "view {} has {} samples, expected {n}",
                v.view_index,
                v.n_samples()
            )));
        }
        acc += view_laplacian(v, k, sigma)?.l;
    }
    acc /= views.len() as f64;
    Ok(LaplacianMatrix {
        l: acc,
        source: LaplacianSource::Averaged,
    })
}

/// Laplacian of the k-NN heat-kernel graph on the columns of `Y`.
pub fn latent_laplacian(y: &Matrix, k: usize, sigma: Sigma) -> Result<LaplacianMatrix> {
    let s = knn_heat_similarity(y, k, sigma)?;
    Ok(LaplacianMatrix {
        l: laplacian(&s),
        source: LaplacianSource::Latent,
    })
}

/// `Tr(Y L Y^T)`.
pub fn trace_form(y: &Matrix, l: &Matrix) -> f64 {
    (y * l).component_mul(y).sum()
}

fn first_non_finite(m: &Matrix) -> Option<(usize, usize)> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if !m[(i, j)].is_finite() {
                return Some((i, j));
            }
        }
    }
    None
}
