//! Subproblem solvers for the ALM/ADM iteration: orthogonal Procrustes,
//! Sylvester equations, column-wise `l2,1` shrinkage and singular value
//! thresholding.

use nalgebra::{Complex, DMatrix, Schur, SymmetricEigen, SVD};

use crate::error::{Error, Result};
use crate::Matrix;

type CMatrix = DMatrix<Complex<f64>>;

/// Minimum admissible `|alpha_i + beta_j|` over eigenvalue pairs.
pub const SYLVESTER_GAP: f64 = 1e-12;

const SVD_EPS: f64 = f64::EPSILON;
const SVD_MAX_ITER: usize = 100_000;

/// A `d x m` matrix with orthonormal columns (`W^T W = I_m`).
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalMap {
    pub w: Matrix,
}

/// `a X + X b = c` with `a: p x p`, `b: q x q`, `c: p x q`.
#[derive(Debug, Clone)]
pub struct SylvesterSystem {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
}

fn thin_svd(m: &Matrix) -> Result<SVD<f64, nalgebra::Dyn, nalgebra::Dyn>> {
    SVD::try_new(m.clone(), true, true, SVD_EPS, SVD_MAX_ITER)
        .ok_or_else(|| Error::Decomposition(format!("SVD of {}x{} did not converge", m.nrows(), m.ncols())))
}

fn ensure_finite(m: &Matrix, what: &str) -> Result<()> {
    if let Some(pos) = m.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite {
            what: what.to_string(),
            row: pos % m.nrows(),
            col: pos / m.nrows(),
        });
    }
    Ok(())
}

/// Solves `max_W Tr(W^T M^T)` over `d x m` column-orthonormal `W` for an
/// `m x d` input `M = U S V^T`: the maximizer is `W^T = U V^T`.
pub fn procrustes(m_mat: &Matrix) -> Result<OrthonormalMap> {
    let (m, d) = m_mat.shape();
    if m > d {
        return Err(Error::InvalidArgument(format!(
            "latent dimension m={m} exceeds feature dimension d={d}"
        )));
    }
    ensure_finite(m_mat, "procrustes input")?;
    let svd = thin_svd(m_mat)?;
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    Ok(OrthonormalMap {
        w: (u * v_t).transpose(),
    })
}

fn is_symmetric(m: &Matrix) -> bool {
    let scale = m.amax().max(1.0);
    (m - m.transpose()).amax() <= 1e-14 * scale
}

/// Solves `a X + X b = c`.
///
/// Symmetric coefficient pairs are diagonalized directly; everything else goes
/// through the complex Schur forms `a = U T U*`, `b = V S V*` and a
/// column-by-column triangular back-substitution (Bartels-Stewart).
pub fn solve_sylvester(sys: &SylvesterSystem) -> Result<Matrix> {
    let (p, q) = sys.c.shape();
    if sys.a.shape() != (p, p) || sys.b.shape() != (q, q) {
        return Err(Error::DimensionMismatch(format!(
            "Sylvester shapes a={:?} b={:?} c={:?}",
            sys.a.shape(),
            sys.b.shape(),
            sys.c.shape()
        )));
    }
    ensure_finite(&sys.a, "Sylvester a")?;
    ensure_finite(&sys.b, "Sylvester b")?;
    ensure_finite(&sys.c, "Sylvester c")?;
    if is_symmetric(&sys.a) && is_symmetric(&sys.b) {
        solve_symmetric(sys)
    } else {
        solve_schur(sys)
    }
}

fn solve_symmetric(sys: &SylvesterSystem) -> Result<Matrix> {
    let ea = SymmetricEigen::new(sys.a.clone());
    let eb = SymmetricEigen::new(sys.b.clone());
    let mut gap = f64::INFINITY;
    for &x in ea.eigenvalues.iter() {
        for &y in eb.eigenvalues.iter() {
            gap = gap.min((x + y).abs());
        }
    }
    if gap.is_nan() || gap <= SYLVESTER_GAP {
        return Err(Error::SingularSylvester { gap });
    }
    let mut ct = ea.eigenvectors.transpose() * &sys.c * &eb.eigenvectors;
    for j in 0..ct.ncols() {
        for i in 0..ct.nrows() {
            ct[(i, j)] /= ea.eigenvalues[i] + eb.eigenvalues[j];
        }
    }
    Ok(&ea.eigenvectors * ct * eb.eigenvectors.transpose())
}

fn complex_schur(m: &Matrix) -> Result<(CMatrix, CMatrix)> {
    let cm: CMatrix = m.map(|x| Complex::new(x, 0.0));
    Schur::try_new(cm, f64::EPSILON, SVD_MAX_ITER)
        .map(Schur::unpack)
        .ok_or_else(|| Error::Decomposition("Schur decomposition did not converge".into()))
}

fn solve_schur(sys: &SylvesterSystem) -> Result<Matrix> {
    let (p, q) = sys.c.shape();
    let (u, t) = complex_schur(&sys.a)?;
    let (v, s) = complex_schur(&sys.b)?;

    let mut gap = f64::INFINITY;
    for i in 0..p {
        for j in 0..q {
            gap = gap.min((t[(i, i)] + s[(j, j)]).norm());
        }
    }
    if gap.is_nan() || gap <= SYLVESTER_GAP {
        return Err(Error::SingularSylvester { gap });
    }

    let c: CMatrix = sys.c.map(|x| Complex::new(x, 0.0));
    let f = u.adjoint() * c * &v;
    // T X' + X' S = F with T, S upper triangular.
    let mut x = CMatrix::zeros(p, q);
    for j in 0..q {
        let mut rhs = f.column(j).into_owned();
        for k in 0..j {
            let skj = s[(k, j)];
            if skj != Complex::new(0.0, 0.0) {
                rhs -= x.column(k) * skj;
            }
        }
        let shift = s[(j, j)];
        for i in (0..p).rev() {
            let mut acc = rhs[i];
            for l in (i + 1)..p {
                acc -= t[(i, l)] * x[(l, j)];
            }
            x[(i, j)] = acc / (t[(i, i)] + shift);
        }
    }
    let sol = u * x * v.adjoint();
    Ok(sol.map(|z| z.re))
}

/// `argmin_E tau ||E||_{2,1} + 1/2 ||E - G||_F^2`, column by column:
/// `e_i = (1 - tau / ||g_i||) g_i` when `||g_i|| > tau`, else 0.
pub fn prox_l21(g: &Matrix, tau: f64) -> Matrix {
    assert!(tau >= 0.0, "prox_l21 threshold must be nonnegative");
    let mut e = g.clone();
    for mut col in e.column_iter_mut() {
        let nrm = col.norm();
        if nrm > tau {
            col *= (nrm - tau) / nrm;
        } else {
            col.fill(0.0);
        }
    }
    e
}

/// `argmin_Q tau ||Q||_* + 1/2 ||Q - M||_F^2 = U max(S - tau, 0) V^T`.
pub fn svt(m_mat: &Matrix, tau: f64) -> Result<Matrix> {
    assert!(tau >= 0.0, "svt threshold must be nonnegative");
    ensure_finite(m_mat, "svt input")?;
    let mut svd = thin_svd(m_mat)?;
    svd.singular_values.apply(|s| *s = (*s - tau).max(0.0));
    svd.recompose()
        .map_err(|e| Error::Decomposition(e.to_string()))
}

/// Sum of column Euclidean norms.
pub fn l21_norm(m: &Matrix) -> f64 {
    m.column_iter().map(|c| c.norm()).sum()
}

pub fn nuclear_norm(m: &Matrix) -> Result<f64> {
    Ok(thin_svd(m)?.singular_values.sum())
}
