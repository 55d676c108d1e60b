//! External clustering metrics: NMI, ACC, pairwise F-measure / precision /
//! recall and the adjusted Rand index, plus mean/std aggregation over runs.
//!
//! Everything is computed from the contingency table. NMI uses natural logs
//! and the geometric-mean normalization `I(U;V) / sqrt(H(U) H(V))`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    /// `counts[i][j]`: samples with true class `i` and predicted cluster `j`
    /// (both re-indexed densely in increasing label order).
    pub counts: Vec<Vec<u64>>,
    pub n: u64,
}

impl ContingencyTable {
    pub fn new(truth: &[usize], pred: &[usize]) -> Result<Self> {
        if truth.len() != pred.len() {
            return Err(Error::DimensionMismatch(format!(
                "label vectors differ in length: {} vs {}",
                truth.len(),
                pred.len()
            )));
        }
        let ti = dense_index(truth);
        let pi = dense_index(pred);
        let mut counts = vec![vec![0u64; pi.len()]; ti.len()];
        for (t, p) in truth.iter().zip(pred) {
            counts[ti[t]][pi[p]] += 1;
        }
        Ok(Self {
            counts,
            n: truth.len() as u64,
        })
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        let cols = self.counts.first().map_or(0, Vec::len);
        (0..cols)
            .map(|j| self.counts.iter().map(|r| r[j]).sum())
            .collect()
    }

    /// Both partitions group the samples identically (up to renaming).
    pub fn partitions_identical(&self) -> bool {
        let rows_ok = self
            .counts
            .iter()
            .all(|r| r.iter().filter(|&&c| c > 0).count() == 1);
        let cols_ok = self
            .col_sums()
            .iter()
            .enumerate()
            .all(|(j, _)| self.counts.iter().filter(|r| r[j] > 0).count() == 1);
        rows_ok && cols_ok
    }
}

fn dense_index(labels: &[usize]) -> BTreeMap<usize, usize> {
    let mut map = BTreeMap::new();
    for &l in labels {
        map.entry(l).or_insert(0);
    }
    for (i, v) in map.values_mut().enumerate() {
        *v = i;
    }
    map
}

fn entropy(counts: &[u64], n: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

pub fn nmi(truth: &[usize], pred: &[usize]) -> Result<f64> {
    let t = ContingencyTable::new(truth, pred)?;
    if t.n == 0 {
        return Err(Error::InvalidArgument("empty label vectors".into()));
    }
    let n = t.n as f64;
    let a = t.row_sums();
    let b = t.col_sums();
    let hu = entropy(&a, n);
    let hv = entropy(&b, n);
    if hu == 0.0 && hv == 0.0 {
        return Ok(1.0);
    }
    if hu == 0.0 || hv == 0.0 {
        return Ok(0.0);
    }
    let mut mi = 0.0;
    for (i, row) in t.counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c > 0 {
                let c = c as f64;
                mi += c / n * (n * c / (a[i] as f64 * b[j] as f64)).ln();
            }
        }
    }
    Ok((mi / (hu * hv).sqrt()).clamp(0.0, 1.0))
}

/// Best-matching accuracy: the fraction of samples on the diagonal after the
/// optimal one-to-one mapping of predicted clusters onto classes.
pub fn acc(truth: &[usize], pred: &[usize]) -> Result<f64> {
    let t = ContingencyTable::new(truth, pred)?;
    if t.n == 0 {
        return Err(Error::InvalidArgument("empty label vectors".into()));
    }
    let size = t.counts.len().max(t.counts.first().map_or(0, Vec::len));
    let mut weight = vec![vec![0i64; size]; size];
    for (i, row) in t.counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            weight[i][j] = c as i64;
        }
    }
    let assignment = max_weight_assignment(&weight);
    let matched: i64 = assignment.iter().enumerate().map(|(i, &j)| weight[i][j]).sum();
    Ok(matched as f64 / t.n as f64)
}

/// Hungarian algorithm (shortest augmenting path form) maximizing total
/// weight on a square matrix. Returns `col` assigned to each row.
pub fn max_weight_assignment(weight: &[Vec<i64>]) -> Vec<usize> {
    let n = weight.len();
    if n == 0 {
        return Vec::new();
    }
    let max = weight.iter().flatten().copied().max().unwrap_or(0);
    let cost = |i: usize, j: usize| max - weight[i][j];
    // 1-based potentials; p[j] = row matched to column j.
    let inf = i64::MAX / 4;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    row_to_col
}

fn choose2(x: u64) -> f64 {
    (x as f64) * (x as f64 - 1.0) / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairCounts {
    /// Pairs together in both partitions.
    pub tp: f64,
    /// Together in the prediction only.
    pub fp: f64,
    /// Together in the truth only.
    pub fn_: f64,
}

pub fn pair_counts(truth: &[usize], pred: &[usize]) -> Result<PairCounts> {
    let t = ContingencyTable::new(truth, pred)?;
    let tp: f64 = t.counts.iter().flatten().map(|&c| choose2(c)).sum();
    let same_pred: f64 = t.col_sums().into_iter().map(choose2).sum();
    let same_true: f64 = t.row_sums().into_iter().map(choose2).sum();
    Ok(PairCounts {
        tp,
        fp: same_pred - tp,
        fn_: same_true - tp,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairScores {
    pub f_measure: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Pairwise precision, recall and F-measure; `0/0` is taken as 0.
pub fn pair_metrics(truth: &[usize], pred: &[usize]) -> Result<PairScores> {
    let pc = pair_counts(truth, pred)?;
    let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
    let precision = ratio(pc.tp, pc.tp + pc.fp);
    let recall = ratio(pc.tp, pc.tp + pc.fn_);
    let f_measure = ratio(2.0 * precision * recall, precision + recall);
    Ok(PairScores {
        f_measure,
        precision,
        recall,
    })
}

/// Adjusted Rand index. When the chance-corrected denominator vanishes the
/// value is 1 for identical partitions and 0 otherwise.
pub fn adjusted_rand(truth: &[usize], pred: &[usize]) -> Result<f64> {
    let t = ContingencyTable::new(truth, pred)?;
    if t.n < 2 {
        return Err(Error::InvalidArgument("adjusted Rand index needs n >= 2".into()));
    }
    let index: f64 = t.counts.iter().flatten().map(|&c| choose2(c)).sum();
    let sa: f64 = t.row_sums().into_iter().map(choose2).sum();
    let sb: f64 = t.col_sums().into_iter().map(choose2).sum();
    let expected = sa * sb / choose2(t.n);
    let max_index = 0.5 * (sa + sb);
    let den = max_index - expected;
    if den == 0.0 {
        return Ok(if t.partitions_identical() { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricValues {
    pub nmi: f64,
    pub acc: f64,
    pub f_measure: f64,
    pub ar: f64,
    pub recall: f64,
    pub precision: f64,
}

impl MetricValues {
    pub const NAMES: [&'static str; 6] = ["nmi", "acc", "f_measure", "ar", "recall", "precision"];

    pub fn as_array(&self) -> [f64; 6] {
        [
            self.nmi,
            self.acc,
            self.f_measure,
            self.ar,
            self.recall,
            self.precision,
        ]
    }

    fn from_array(v: [f64; 6]) -> Self {
        Self {
            nmi: v[0],
            acc: v[1],
            f_measure: v[2],
            ar: v[3],
            recall: v[4],
            precision: v[5],
        }
    }
}

/// All six metrics for one prediction.
pub fn evaluate(truth: &[usize], pred: &[usize]) -> Result<MetricValues> {
    let pair = pair_metrics(truth, pred)?;
    Ok(MetricValues {
        nmi: nmi(truth, pred)?,
        acc: acc(truth, pred)?,
        f_measure: pair.f_measure,
        ar: adjusted_rand(truth, pred)?,
        recall: pair.recall,
        precision: pair.precision,
    })
}

/// Standard deviation convention used by [`aggregate`].
pub const STD_CONVENTION: &str = "sample (ddof=1); 0 for a single run";

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub runs: Vec<MetricValues>,
    pub mean: MetricValues,
    pub std: MetricValues,
}

pub fn aggregate(runs: &[MetricValues]) -> Result<MetricReport> {
    if runs.is_empty() {
        return Err(Error::InvalidArgument("cannot aggregate zero runs".into()));
    }
    let k = runs.len() as f64;
    let mut mean = [0.0; 6];
    for r in runs {
        for (m, v) in mean.iter_mut().zip(r.as_array()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= k);
    let mut std = [0.0; 6];
    if runs.len() > 1 {
        for r in runs {
            for ((s, m), v) in std.iter_mut().zip(mean).zip(r.as_array()) {
                *s += (v - m) * (v - m);
            }
        }
        std.iter_mut().for_each(|s| *s = (*s / (k - 1.0)).sqrt());
    }
    Ok(MetricReport {
        runs: runs.to_vec(),
        mean: MetricValues::from_array(mean),
        std: MetricValues::from_array(std),
    })
}

impl MetricReport {
    /// `run,seed,nmi,acc,f,ar,recall,precision` rows followed by `mean` and
    /// `std` summary rows.
    pub fn to_csv(&self, seeds: &[u64]) -> String {
        let mut out = String::from("run,seed,nmi,acc,f,ar,recall,precision\n");
        for (i, r) in self.runs.iter().enumerate() {
            let seed = seeds.get(i).map_or(String::new(), u64::to_string);
            let _ = writeln!(out, "{i},{seed},{}", join(&r.as_array()));
        }
        let _ = writeln!(out, "mean,,{}", join(&self.mean.as_array()));
        let _ = writeln!(out, "std,,{}", join(&self.std.as_array()));
        out
    }

    /// Human-readable `mean +- std` table.
    pub fn table(&self, title: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{title} ({} runs, std: {STD_CONVENTION})", self.runs.len());
        let _ = writeln!(out, "{:<10} {:>8} {:>8}", "metric", "mean", "std");
        for ((name, m), s) in MetricValues::NAMES
            .iter()
            .zip(self.mean.as_array())
            .zip(self.std.as_array())
        {
            let _ = writeln!(out, "{name:<10} {m:>8.4} {s:>8.4}");
        }
        out
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",")
}
