//! Slow, direct reference computations for checking the fast paths.
//!
//! Nothing here shares code with the `dgrmsc` implementation: Sylvester
//! systems are solved through the Kronecker-vectorized dense system, graphs by
//! sorting every distance row, and clustering scores by enumerating sample
//! pairs or label permutations.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

pub type Matrix = DMatrix<f64>;

/// Solves `a X + X b = c` via `(I kron a + b^T kron I) vec(X) = vec(c)`.
pub fn kron_sylvester(a: &Matrix, b: &Matrix, c: &Matrix) -> Option<Matrix> {
    let (p, q) = c.shape();
    let big = Matrix::from_fn(p * q, p * q, |r, s| {
        // vec index r = i + p*j (column-major)
        let (i, j) = (r % p, r / p);
        let (k, l) = (s % p, s / p);
        let mut v = 0.0;
        if j == l {
            v += a[(i, k)];
        }
        if i == k {
            v += b[(l, j)];
        }
        v
    });
    let rhs = nalgebra::DVector::from_column_slice(c.as_slice());
    let sol = big.lu().solve(&rhs)?;
    Some(Matrix::from_column_slice(p, q, sol.as_slice()))
}

/// Heat-kernel k-NN similarity with union symmetrization, computed by fully
/// sorting each row of pairwise distances.
pub fn knn_heat_bruteforce(points: &Matrix, k: usize, sigma: f64) -> Matrix {
    let n = points.ncols();
    let d2 = |i: usize, j: usize| -> f64 {
        (0..points.nrows())
            .map(|r| (points[(r, i)] - points[(r, j)]).powi(2))
            .sum()
    };
    let mut keep = vec![vec![false; n]; n];
    for (i, _) in points.column_iter().enumerate() {
        let mut row: Vec<(f64, usize)> = (0..n).filter(|&j| j != i).map(|j| (d2(i, j), j)).collect();
        row.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for &(_, j) in row.iter().take(k) {
            keep[i][j] = true;
            keep[j][i] = true;
        }
    }
    Matrix::from_fn(n, n, |i, j| {
        if keep[i][j] {
            (-d2(i, j) / (2.0 * sigma * sigma)).exp()
        } else {
            0.0
        }
    })
}

/// `(1/2) sum_ij ||y_i - y_j||^2 s_ij`.
pub fn pairwise_smoothness(y: &Matrix, s: &Matrix) -> f64 {
    let n = y.ncols();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let d: f64 = (0..y.nrows()).map(|r| (y[(r, i)] - y[(r, j)]).powi(2)).sum();
            total += d * s[(i, j)];
        }
    }
    0.5 * total
}

/// Dense Gaussian matrix with orthonormalized columns (modified Gram-Schmidt).
pub fn gram_schmidt_orthonormal<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let mut m = Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal));
    for j in 0..cols {
        for k in 0..j {
            let proj = m.column(k).dot(&m.column(j));
            let ck = m.column(k).into_owned();
            let mut cj = m.column_mut(j);
            cj -= ck * proj;
        }
        let nrm = m.column(j).norm();
        m.column_mut(j).scale_mut(1.0 / nrm);
    }
    m
}

pub fn l21(m: &Matrix) -> f64 {
    (0..m.ncols())
        .map(|j| (0..m.nrows()).map(|i| m[(i, j)].powi(2)).sum::<f64>().sqrt())
        .sum()
}

pub fn nuclear(m: &Matrix) -> f64 {
    m.singular_values().sum()
}

/// `tau ||E||_{2,1} + 1/2 ||E - G||_F^2`
pub fn l21_prox_objective(e: &Matrix, g: &Matrix, tau: f64) -> f64 {
    tau * l21(e) + 0.5 * (e - g).norm_squared()
}

/// `tau ||Q||_* + 1/2 ||Q - M||_F^2`
pub fn nuclear_prox_objective(q: &Matrix, m: &Matrix, tau: f64) -> f64 {
    tau * nuclear(q) + 0.5 * (q - m).norm_squared()
}

/// Random matrix scaled to Frobenius norm `radius`.
pub fn random_direction<R: Rng>(rows: usize, cols: usize, radius: f64, rng: &mut R) -> Matrix {
    let d = Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal));
    let nrm = d.norm();
    d * (radius / nrm)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairTally {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

/// Classifies every unordered sample pair.
pub fn enumerate_pairs(truth: &[usize], pred: &[usize]) -> PairTally {
    let mut t = PairTally {
        tp: 0,
        fp: 0,
        fn_: 0,
        tn: 0,
    };
    for i in 0..truth.len() {
        for j in (i + 1)..truth.len() {
            match (truth[i] == truth[j], pred[i] == pred[j]) {
                (true, true) => t.tp += 1,
                (false, true) => t.fp += 1,
                (true, false) => t.fn_ += 1,
                (false, false) => t.tn += 1,
            }
        }
    }
    t
}

/// `(precision, recall, f)` with `0/0 = 0`.
pub fn pair_scores(truth: &[usize], pred: &[usize]) -> (f64, f64, f64) {
    let t = enumerate_pairs(truth, pred);
    let div = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
    let p = div(t.tp as f64, (t.tp + t.fp) as f64);
    let r = div(t.tp as f64, (t.tp + t.fn_) as f64);
    (p, r, div(2.0 * p * r, p + r))
}

/// Adjusted Rand index in pair-count form
/// `2(ad - bc) / ((a+b)(b+d) + (a+c)(c+d))`.
pub fn ari_from_pairs(truth: &[usize], pred: &[usize]) -> f64 {
    let t = enumerate_pairs(truth, pred);
    let (a, b, c, d) = (t.tp as f64, t.fn_ as f64, t.fp as f64, t.tn as f64);
    let den = (a + b) * (b + d) + (a + c) * (c + d);
    if den == 0.0 {
        return if t.fp == 0 && t.fn_ == 0 { 1.0 } else { 0.0 };
    }
    2.0 * (a * d - b * c) / den
}

fn distinct(labels: &[usize]) -> Vec<usize> {
    let mut v = labels.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

/// Accuracy maximized over every one-to-one relabeling of the predicted
/// clusters.
pub fn acc_by_permutation(truth: &[usize], pred: &[usize]) -> f64 {
    let tl = distinct(truth);
    let pl = distinct(pred);
    let k = tl.len().max(pl.len());
    let mut best = 0usize;
    for perm in permutations(k) {
        // pred cluster pl[i] -> truth slot perm[i]; slots beyond tl are unmatched.
        let map: HashMap<usize, Option<usize>> = pl
            .iter()
            .enumerate()
            .map(|(i, &p)| (p, tl.get(perm[i]).copied()))
            .collect();
        let hits = truth
            .iter()
            .zip(pred)
            .filter(|(t, p)| map[p] == Some(**t))
            .count();
        best = best.max(hits);
    }
    best as f64 / truth.len() as f64
}

/// NMI with geometric-mean normalization, from sample-level frequency counts.
pub fn nmi_direct(truth: &[usize], pred: &[usize]) -> f64 {
    let n = truth.len() as f64;
    let mut pu: HashMap<usize, f64> = HashMap::new();
    let mut pv: HashMap<usize, f64> = HashMap::new();
    let mut puv: HashMap<(usize, usize), f64> = HashMap::new();
    for (&u, &v) in truth.iter().zip(pred) {
        *pu.entry(u).or_default() += 1.0 / n;
        *pv.entry(v).or_default() += 1.0 / n;
        *puv.entry((u, v)).or_default() += 1.0 / n;
    }
    let h = |m: &HashMap<usize, f64>| -> f64 { m.values().map(|p| -p * p.ln()).sum() };
    let (hu, hv) = (h(&pu), h(&pv));
    if pu.len() == 1 && pv.len() == 1 {
        return 1.0;
    }
    if pu.len() == 1 || pv.len() == 1 {
        return 0.0;
    }
    let mi: f64 = puv
        .iter()
        .map(|(&(u, v), &p)| p * (p / (pu[&u] * pv[&v])).ln())
        .sum();
    mi / (hu * hv).sqrt()
}
