//! Multi-view dataset model, directory format and synthetic generator.
//!
//! Views are stored columns-as-samples: view `v` is a `d_v x n` matrix. On
//! disk a dataset is a directory holding `view_1.csv`, `view_2.csv`, ...,
//! an optional `labels.csv` and an optional `meta.json` manifest.

use std::fs;
use std::path::Path;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matrix_io;
use crate::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct ViewMatrix {
    /// `d_v x n`, one column per sample.
    pub data: Matrix,
    /// 1-based view index.
    pub view_index: usize,
}

impl ViewMatrix {
    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.data.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewDataset {
    views: Vec<ViewMatrix>,
    labels: Option<Vec<usize>>,
}

impl MultiViewDataset {
    /// Validates and wraps per-view feature matrices (each `d_v x n`).
    pub fn new(views: Vec<Matrix>, labels: Option<Vec<usize>>) -> Result<Self> {
        if views.is_empty() {
            return Err(Error::InvalidArgument("dataset needs at least one view".into()));
        }
        let n = views[0].ncols();
        if n < 2 {
            return Err(Error::DimensionMismatch(format!(
                "need at least 2 samples, view 1 has {n}"
            )));
        }
        for (i, v) in views.iter().enumerate() {
            if v.nrows() == 0 {
                return Err(Error::DimensionMismatch(format!("view {} has no features", i + 1)));
            }
            if v.ncols() != n {
                return Err(Error::DimensionMismatch(format!(
                    "view {} has {} samples, view 1 has {n}",
                    i + 1,
                    v.ncols()
                )));
            }
            check_finite(v, &format!("view {}", i + 1))?;
        }
        if let Some(l) = &labels {
            validate_labels(l, n)?;
        }
        let views = views
            .into_iter()
            .enumerate()
            .map(|(i, data)| ViewMatrix {
                data,
                view_index: i + 1,
            })
            .collect();
        Ok(Self { views, labels })
    }

    pub fn views(&self) -> &[ViewMatrix] {
        &self.views
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn n_samples(&self) -> usize {
        self.views[0].n_samples()
    }

    pub fn n_views(&self) -> usize {
        self.views.len()
    }

    /// Total feature dimension `d = sum_v d_v`.
    pub fn total_dim(&self) -> usize {
        self.views.iter().map(ViewMatrix::dim).sum()
    }

    /// Number of ground-truth classes, if labels are present.
    pub fn n_classes(&self) -> Option<usize> {
        self.labels
            .as_ref()
            .map(|l| l.iter().copied().max().map_or(0, |m| m + 1))
    }

    /// All views stacked vertically into the `d x n` matrix `X`.
    pub fn stacked(&self) -> Matrix {
        let n = self.n_samples();
        let mut x = Matrix::zeros(self.total_dim(), n);
        let mut row = 0;
        for v in &self.views {
            x.view_mut((row, 0), (v.dim(), n)).copy_from(&v.data);
            row += v.dim();
        }
        x
    }

    /// Rescales every feature (row) of every view to `[0, 1]`. Constant
    /// features become 0.
    pub fn min_max_scaled(&self) -> Self {
        let views = self
            .views
            .iter()
            .map(|v| {
                let mut d = v.data.clone();
                for mut row in d.row_iter_mut() {
                    let lo = row.min();
                    let hi = row.max();
                    let span = hi - lo;
                    for x in row.iter_mut() {
                        *x = if span > 0.0 { (*x - lo) / span } else { 0.0 };
                    }
                }
                ViewMatrix {
                    data: d,
                    view_index: v.view_index,
                }
            })
            .collect();
        Self {
            views,
            labels: self.labels.clone(),
        }
    }

    /// Writes the dataset in the directory format, creating `dir` if needed.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for v in &self.views {
            let p = dir.join(format!("view_{}.csv", v.view_index));
            matrix_io::write_matrix(&p, &v.data)?;
        }
        if let Some(l) = &self.labels {
            matrix_io::write_labels(&dir.join("labels.csv"), l)?;
        }
        let meta = serde_json::json!({
            "n": self.n_samples(),
            "views": self.n_views(),
            "dims": self.views.iter().map(ViewMatrix::dim).collect::<Vec<_>>(),
        });
        matrix_io::write_atomic(&dir.join("meta.json"), format!("{meta}\n").as_bytes())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadOptions {
    /// Files are stored rows-as-samples and must be transposed on load.
    pub transpose: bool,
    /// Apply per-feature min-max scaling after loading.
    pub min_max_scale: bool,
}

/// Loads a dataset directory with default options (raw features, rows are
/// features).
pub fn load_dataset(dir: &Path) -> Result<MultiViewDataset> {
    load_dataset_with(dir, LoadOptions::default())
}

pub fn load_dataset_with(dir: &Path, opts: LoadOptions) -> Result<MultiViewDataset> {
    if !dir.is_dir() {
        return Err(Error::MissingFile(dir.to_path_buf()));
    }
    let mut views = Vec::new();
    loop {
        let p = dir.join(format!("view_{}.csv", views.len() + 1));
        if !p.exists() {
            break;
        }
        let m = matrix_io::read_matrix(&p)?;
        views.push(if opts.transpose { m.transpose() } else { m });
    }
    if views.is_empty() {
        return Err(Error::MissingFile(dir.join("view_1.csv")));
    }
    let labels_path = dir.join("labels.csv");
    let labels = if labels_path.exists() {
        Some(matrix_io::read_labels(&labels_path)?)
    } else {
        None
    };
    let ds = MultiViewDataset::new(views, labels)?;
    let meta_path = dir.join("meta.json");
    if meta_path.exists() {
        let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let meta: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: meta_path.clone(),
            line: e.line(),
            msg: e.to_string(),
        })?;
        check_manifest(&meta, &ds)?;
    }
    Ok(if opts.min_max_scale {
        ds.min_max_scaled()
    } else {
        ds
    })
}

// The manifest is advisory: only the keys it states are cross-checked.
fn check_manifest(meta: &serde_json::Value, ds: &MultiViewDataset) -> Result<()> {
    if let Some(n) = manifest_int(meta, "n") {
        if n != ds.n_samples() {
            return Err(Error::DimensionMismatch(format!(
                "meta.json declares n={n}, files have n={}",
                ds.n_samples()
            )));
        }
    }
    if let Some(v) = manifest_int(meta, "views") {
        if v != ds.n_views() {
            return Err(Error::DimensionMismatch(format!(
                "meta.json declares {v} views, found {}",
                ds.n_views()
            )));
        }
    }
    Ok(())
}

fn manifest_int(meta: &serde_json::Value, key: &str) -> Option<usize> {
    meta.get(key)?.as_u64().map(|v| v as usize)
}

fn check_finite(m: &Matrix, what: &str) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if !m[(i, j)].is_finite() {
                return Err(Error::NonFinite {
                    what: what.to_string(),
                    row: i,
                    col: j,
                });
            }
        }
    }
    Ok(())
}

fn validate_labels(labels: &[usize], n: usize) -> Result<()> {
    if labels.len() != n {
        return Err(Error::InvalidLabels(format!(
            "expected {n} labels, found {}",
            labels.len()
        )));
    }
    let c = labels.iter().copied().max().unwrap_or(0) + 1;
    if c < 2 {
        return Err(Error::InvalidLabels("labels must contain at least 2 classes".into()));
    }
    let mut seen = vec![false; c];
    for &l in labels {
        seen[l] = true;
    }
    if let Some(empty) = seen.iter().position(|s| !s) {
        return Err(Error::InvalidLabels(format!("class {empty} is empty")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_per_cluster: usize,
    pub c: usize,
    pub view_dims: Vec<usize>,
    pub latent_dim: usize,
    pub noise_sigma: f64,
    pub cluster_separation: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_per_cluster: 20,
            c: 3,
            view_dims: vec![12, 10, 8],
            latent_dim: 6,
            noise_sigma: 0.01,
            cluster_separation: 10.0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn n_views(&self) -> usize {
        self.view_dims.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.c < 2 {
            return bad(format!("need c >= 2, got {}", self.c));
        }
        if self.n_per_cluster < 1 {
            return bad("n_per_cluster must be positive".into());
        }
        if self.view_dims.is_empty() {
            return bad("need at least one view".into());
        }
        if self.latent_dim < self.c {
            return bad(format!(
                "latent_dim {} must be >= c {}",
                self.latent_dim, self.c
            ));
        }
        if let Some(d) = self.view_dims.iter().find(|&&d| d < self.latent_dim) {
            return bad(format!("view dim {d} smaller than latent_dim {}", self.latent_dim));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise_sigma must be >= 0, got {}", self.noise_sigma));
        }
        if !(self.cluster_separation > 0.0 && self.cluster_separation.is_finite()) {
            return bad(format!(
                "cluster_separation must be > 0, got {}",
                self.cluster_separation
            ));
        }
        Ok(())
    }
}

/// Half-length of each cluster's segment, as a fraction of the separation.
const SPREAD_FRACTION: f64 = 0.25;

/// Samples a dataset from a shared latent representation.
///
/// Cluster `k` has a latent center `c_k` (distinct orthonormal directions
/// scaled by the separation, so centers are `sqrt(2) * sep` apart) and a unit
/// direction `u_k`; its samples are `c_k + t u_k` with `t` uniform in
/// `[-sep/4, sep/4]`. Each view maps the latent points through its own random
/// column-orthonormal `d_v x latent_dim` matrix and adds i.i.d. Gaussian noise.
/// Samples are ordered by cluster.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<MultiViewDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let r = spec.latent_dim;
    let n = spec.n_per_cluster * spec.c;

    let basis = random_orthonormal(r, r, &mut rng);
    let mut latent = Matrix::zeros(r, n);
    let mut labels = Vec::with_capacity(n);
    let half = SPREAD_FRACTION * spec.cluster_separation;
    for k in 0..spec.c {
        let center = basis.column(k) * spec.cluster_separation;
        let mut dir = DVector::<f64>::from_fn(r, |_, _| rng.sample(StandardNormal));
        dir /= dir.norm();
        for s in 0..spec.n_per_cluster {
            let t = rng.random_range(-half..=half);
            latent.set_column(k * spec.n_per_cluster + s, &(&center + &dir * t));
            labels.push(k);
        }
    }

    let views = spec
        .view_dims
        .iter()
        .map(|&dv| {
            let map = random_orthonormal(dv, r, &mut rng);
            let mut x = map * &latent;
            if spec.noise_sigma > 0.0 {
                for e in x.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *e += spec.noise_sigma * z;
                }
            }
            x
        })
        .collect();
    MultiViewDataset::new(views, Some(labels))
}

/// `rows x cols` matrix with orthonormal columns, from the QR factor of a
/// Gaussian matrix with the sign convention `diag(R) > 0`.
pub fn random_orthonormal<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    assert!(cols <= rows);
    let g = Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let rdiag = qr.r().diagonal();
    for j in 0..cols {
        if rdiag[j] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}
