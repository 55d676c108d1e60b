//! ALM/ADM optimizer for the double-graph regularized model
//!
//! ```text
//! min ||E||_{2,1} + lambda ||Z||_* + beta Tr(Y L Y^T) + gamma Tr(Z L_Y Z^T)
//! s.t. X = W Y + E_L,  Y = Y Z + E_S,  E = [E_L; E_S],  W^T W = I
//! ```
//!
//! with the splitting `Q = Z` for the nuclear norm. Each iteration updates
//! `W, Y, Z, E, Q` in that order, then the multipliers and the penalty `mu`.
//! Convergence is declared when the three feasibility residuals drop below
//! `epsilon` in the max-abs norm.

use nalgebra::{DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dataset::MultiViewDataset;
use crate::error::{Error, Result};
use crate::graphs::{self, LaplacianMatrix, Sigma};
use crate::kernels::{self, SylvesterSystem};
use crate::Matrix;

/// When the latent-space Laplacian `L_Y` is rebuilt from the current `Y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LyRefresh {
    EveryIter,
    /// Rebuild on iterations 1, 1+t, 1+2t, ...
    EveryT(usize),
    /// Rebuild on every iteration up to and including `t`, then keep it.
    FrozenAfter(usize),
}

impl LyRefresh {
    fn due(self, iter: usize) -> bool {
        match self {
            LyRefresh::EveryIter => true,
            LyRefresh::EveryT(t) => (iter - 1).is_multiple_of(t.max(1)),
            LyRefresh::FrozenAfter(t) => iter <= t.max(1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Nuclear-norm weight.
    pub lambda: f64,
    /// Weight of the view-graph regularizer on `Y`.
    pub beta: f64,
    /// Weight of the latent-graph regularizer on `Z`.
    pub gamma: f64,
    /// Latent dimension; `None` picks `min(100, d - 1, n - 1)`.
    pub latent_dim: Option<usize>,
    /// Neighbor count for every k-NN graph.
    pub k: usize,
    pub sigma: Sigma,
    pub latent_sigma: Sigma,
    pub mu0: f64,
    pub rho: f64,
    pub mu_max: f64,
    pub epsilon: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub ly_refresh: LyRefresh,
    /// Pin `E_L` and `E_S` to zero (noiseless reconstruction experiments).
    pub zero_errors: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            beta: 0.1,
            gamma: 0.1,
            latent_dim: None,
            k: 5,
            sigma: Sigma::Auto,
            latent_sigma: Sigma::Auto,
            mu0: 1e-4,
            rho: 1.2,
            mu_max: 1e6,
            epsilon: 1e-6,
            max_iter: 300,
            seed: 0,
            ly_refresh: LyRefresh::EveryIter,
            zero_errors: false,
        }
    }
}

impl SolverConfig {
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // rejects NaN too
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        for (name, v) in [("lambda", self.lambda), ("beta", self.beta), ("gamma", self.gamma)] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be a finite nonnegative number, got {v}"));
            }
        }
        if !(self.rho > 1.0) {
            return bad(format!("rho must be > 1, got {}", self.rho));
        }
        if !(self.mu0 > 0.0) {
            return bad(format!("mu0 must be > 0, got {}", self.mu0));
        }
        if !(self.mu_max >= self.mu0) {
            return bad(format!("mu_max {} must be >= mu0 {}", self.mu_max, self.mu0));
        }
        if !(self.epsilon > 0.0) {
            return bad(format!("epsilon must be > 0, got {}", self.epsilon));
        }
        if self.latent_dim == Some(0) {
            return bad("latent dimension must be >= 1".into());
        }
        if self.max_iter == 0 {
            return bad("max_iter must be >= 1".into());
        }
        if self.k == 0 {
            return bad("k must be >= 1".into());
        }
        Ok(())
    }

    /// Latent dimension used for a dataset with `d` features and `n` samples.
    pub fn effective_latent_dim(&self, d: usize, n: usize) -> usize {
        self.latent_dim
            .unwrap_or_else(|| 100.min(d.saturating_sub(1)).min(n.saturating_sub(1)).max(1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    /// `d x m` stacked view maps.
    pub w: Matrix,
    /// `m x n` latent representation.
    pub y: Matrix,
    /// `n x n` self-representation.
    pub z: Matrix,
    /// `n x n` auxiliary copy of `Z` carrying the nuclear norm.
    pub q: Matrix,
    pub e_l: Matrix,
    pub e_s: Matrix,
    pub lambda1: Matrix,
    pub lambda2: Matrix,
    pub lambda3: Matrix,
    pub mu: f64,
    pub iter: usize,
}

impl SolverState {
    /// `[E_L; E_S]`, shape `(d + m) x n`.
    pub fn stacked_error(&self) -> Matrix {
        stack_rows(&self.e_l, &self.e_s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    /// `||X - W Y - E_L||_inf`
    pub r1: f64,
    /// `||Y - Y Z - E_S||_inf`
    pub r2: f64,
    /// `||Q - Z||_inf`
    pub r3: f64,
    /// Penalty used for this iteration's updates.
    pub mu: f64,
    pub objective: f64,
}

impl IterationRecord {
    pub fn max_residual(&self) -> f64 {
        self.r1.max(self.r2).max(self.r3)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTrace {
    pub records: Vec<IterationRecord>,
    pub epsilon: f64,
    /// `gamma` actually applied (0 for the GRMSC ablation).
    pub gamma_effective: f64,
}

impl ConvergenceTrace {
    pub fn converged(&self) -> bool {
        self.records
            .last()
            .is_some_and(|r| r.r1 < self.epsilon && r.r2 < self.epsilon && r.r3 < self.epsilon)
    }

    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    /// One line per iteration: `iter,r1,r2,r3,mu,objective`, with header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,r1,r2,r3,mu,objective\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{:?},{:?},{:?},{:?},{:?}\n",
                r.iter, r.r1, r.r2, r.r3, r.mu, r.objective
            ));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub state: SolverState,
    pub trace: ConvergenceTrace,
    /// Averaged view Laplacian `L`.
    pub laplacian: LaplacianMatrix,
    /// Most recent latent Laplacian `L_Y` (absent when `gamma = 0`).
    pub latent_laplacian: Option<LaplacianMatrix>,
}

/// Value of the unified objective at the current iterates.
pub fn objective(
    state: &SolverState,
    l: &Matrix,
    l_y: Option<&Matrix>,
    cfg: &SolverConfig,
) -> Result<f64> {
    let mut val = kernels::l21_norm(&state.stacked_error());
    if cfg.lambda != 0.0 {
        val += cfg.lambda * kernels::nuclear_norm(&state.z)?;
    }
    if cfg.beta != 0.0 {
        val += cfg.beta * graphs::trace_form(&state.y, l);
    }
    if cfg.gamma != 0.0 {
        if let Some(ly) = l_y {
            val += cfg.gamma * graphs::trace_form(&state.z, ly);
        }
    }
    Ok(val)
}

/// Stateful ALM/ADM iteration over one dataset.
pub struct Solver {
    cfg: SolverConfig,
    x: Matrix,
    l: LaplacianMatrix,
    l_y: Option<LaplacianMatrix>,
    state: SolverState,
    records: Vec<IterationRecord>,
}

impl Solver {
    pub fn new(dataset: &MultiViewDataset, cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let x = dataset.stacked();
        let (d, n) = x.shape();
        let m = cfg.effective_latent_dim(d, n);
        if m > d {
            return Err(Error::InvalidArgument(format!(
                "latent dimension m={m} exceeds total feature dimension d={d}"
            )));
        }
        if cfg.k >= n {
            return Err(Error::InvalidArgument(format!(
                "neighbor count k={} must be < n={n}",
                cfg.k
            )));
        }
        let l = graphs::averaged_laplacian(dataset.views(), cfg.k, cfg.sigma)?;

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let scale = 1.0 / (m as f64).sqrt();
        let y = Matrix::from_fn(m, n, |_, _| scale * rng.sample::<f64, _>(StandardNormal));

        let state = SolverState {
            w: Matrix::zeros(d, m),
            y,
            z: Matrix::zeros(n, n),
            q: Matrix::zeros(n, n),
            e_l: Matrix::zeros(d, n),
            e_s: Matrix::zeros(m, n),
            lambda1: Matrix::zeros(d, n),
            lambda2: Matrix::zeros(m, n),
            lambda3: Matrix::zeros(n, n),
            mu: cfg.mu0,
            iter: 0,
        };
        Ok(Self {
            cfg,
            x,
            l,
            l_y: None,
            state,
            records: Vec::new(),
        })
    }

    pub fn state(&self) -> &SolverState {
        &self.state
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn stacked_data(&self) -> &Matrix {
        &self.x
    }

    pub fn laplacian(&self) -> &LaplacianMatrix {
        &self.l
    }

    pub fn latent_laplacian(&self) -> Option<&LaplacianMatrix> {
        self.l_y.as_ref()
    }

    pub fn records(&self) -> &[IterationRecord] {
        &self.records
    }

    /// Input to the `W` update: `Y (Lambda1/mu + X - E_L)^T`, shape `m x d`.
    pub fn w_step_input(&self) -> Matrix {
        let s = &self.state;
        let p = &s.lambda1 / s.mu + &self.x - &s.e_l;
        &s.y * p.transpose()
    }

    /// `L1 Y + Y R1 = C1` for the current `W, Z, E, multipliers`.
    pub fn y_step_system(&self) -> SylvesterSystem {
        let s = &self.state;
        let mu = s.mu;
        let n = s.z.nrows();
        let wt = s.w.transpose();
        let z_minus_i = &s.z - Matrix::identity(n, n);
        let l = &self.l.l;
        let a = (&wt * &s.w) * mu;
        let b = (&z_minus_i * z_minus_i.transpose()) * mu + (l + l.transpose()) * self.cfg.beta;
        let c = &wt * &s.lambda1
            + &s.lambda2 * z_minus_i.transpose()
            + (&wt * &self.x + &s.e_s - &wt * &s.e_l - &s.e_s * s.z.transpose()) * mu;
        SylvesterSystem { a, b, c }
    }

    /// `L2 Z + Z R2 = C2` for the current `Y, Q, E_S, multipliers` and `L_Y`.
    pub fn z_step_system(&self) -> SylvesterSystem {
        let s = &self.state;
        let mu = s.mu;
        let n = s.z.nrows();
        let yty = s.y.transpose() * &s.y;
        let a = (&yty + Matrix::identity(n, n)) * mu;
        let b = match (&self.l_y, self.cfg.gamma) {
            (Some(ly), g) if g != 0.0 => (&ly.l + ly.l.transpose()) * g,
            _ => Matrix::zeros(n, n),
        };
        let c = (&yty + &s.q - s.y.transpose() * &s.e_s) * mu
            + &s.lambda3
            + s.y.transpose() * &s.lambda2;
        SylvesterSystem { a, b, c }
    }

    /// Runs one full iteration and returns its record.
    pub fn step(&mut self) -> Result<IterationRecord> {
        let iter = self.state.iter + 1;
        let mu = self.state.mu;
        let d = self.x.nrows();

        let w = kernels::procrustes(&self.w_step_input())?.w;
        self.state.w = w;
        check_block(&self.state.w, "W", iter)?;

        let y = kernels::solve_sylvester(&self.y_step_system())?;
        self.state.y = y;
        check_block(&self.state.y, "Y", iter)?;

        if self.cfg.gamma != 0.0 && (self.l_y.is_none() || self.cfg.ly_refresh.due(iter)) {
            self.l_y = Some(graphs::latent_laplacian(
                &self.state.y,
                self.cfg.k,
                self.cfg.latent_sigma,
            )?);
        }
        let z = kernels::solve_sylvester(&self.z_step_system())?;
        self.state.z = z;
        check_block(&self.state.z, "Z", iter)?;

        let s = &self.state;
        let wy = &s.w * &s.y;
        let yz = &s.y * &s.z;
        if self.cfg.zero_errors {
            self.state.e_l.fill(0.0);
            self.state.e_s.fill(0.0);
        } else {
            let g = stack_rows(
                &(&self.x - &wy + &s.lambda1 / mu),
                &(&s.y - &yz + &s.lambda2 / mu),
            );
            let e = kernels::prox_l21(&g, 1.0 / mu);
            check_block(&e, "E", iter)?;
            self.state.e_l = e.rows(0, d).into_owned();
            self.state.e_s = e.rows(d, e.nrows() - d).into_owned();
        }

        let q = kernels::svt(&(&self.state.z - &self.state.lambda3 / mu), self.cfg.lambda / mu)?;
        self.state.q = q;
        check_block(&self.state.q, "Q", iter)?;

        let s = &mut self.state;
        let res1 = &self.x - &wy - &s.e_l;
        let res2 = &s.y - &yz - &s.e_s;
        let res3 = &s.q - &s.z;
        s.lambda1 += &res1 * mu;
        s.lambda2 += &res2 * mu;
        s.lambda3 += &res3 * mu;
        check_block(&s.lambda1, "Lambda1", iter)?;
        check_block(&s.lambda2, "Lambda2", iter)?;
        check_block(&s.lambda3, "Lambda3", iter)?;
        s.mu = (self.cfg.rho * mu).min(self.cfg.mu_max);
        s.iter = iter;
        if !s.mu.is_finite() {
            return Err(Error::Diverged { block: "mu", iter });
        }

        let objective = objective(
            &self.state,
            &self.l.l,
            self.l_y.as_ref().map(|l| &l.l),
            &self.cfg,
        )?;
        let rec = IterationRecord {
            iter,
            r1: res1.amax(),
            r2: res2.amax(),
            r3: res3.amax(),
            mu,
            objective,
        };
        self.records.push(rec);
        Ok(rec)
    }

    /// Iterates until all residuals are below `epsilon` or `max_iter` is hit.
    pub fn run(mut self) -> Result<FitResult> {
        while self.state.iter < self.cfg.max_iter {
            let rec = self.step()?;
            if rec.max_residual() < self.cfg.epsilon {
                break;
            }
        }
        Ok(self.finish())
    }

    pub fn finish(self) -> FitResult {
        FitResult {
            trace: ConvergenceTrace {
                records: self.records,
                epsilon: self.cfg.epsilon,
                gamma_effective: self.cfg.gamma,
            },
            state: self.state,
            laplacian: self.l,
            latent_laplacian: self.l_y,
        }
    }
}

/// Fits the full model.
pub fn fit(dataset: &MultiViewDataset, cfg: &SolverConfig) -> Result<FitResult> {
    Solver::new(dataset, cfg.clone())?.run()
}

/// The ablation without the latent-graph term on `Z` (`gamma` forced to 0).
pub fn grmsc_fit(dataset: &MultiViewDataset, cfg: &SolverConfig) -> Result<FitResult> {
    let cfg = SolverConfig {
        gamma: 0.0,
        ..cfg.clone()
    };
    fit(dataset, &cfg)
}

fn stack_rows(top: &Matrix, bottom: &Matrix) -> Matrix {
    let n = top.ncols();
    let mut out = Matrix::zeros(top.nrows() + bottom.nrows(), n);
    out.rows_mut(0, top.nrows()).copy_from(top);
    out.rows_mut(top.nrows(), bottom.nrows()).copy_from(bottom);
    out
}

fn check_block(m: &Matrix, block: &'static str, iter: usize) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Diverged { block, iter })
    }
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &Matrix) -> f64 {
    let e: DVector<f64> = SymmetricEigen::new(m.clone()).eigenvalues;
    e.min()
}
