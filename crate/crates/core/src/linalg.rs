//! Dense linear-algebra helpers shared by the geometric modules.
//!
//! Every rank decision in the crate goes through [`rank_tolerance`]: a
//! singular value `s` is treated as zero iff `s <= tol * max(1, s_max)`.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Default relative cutoff for singular values.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// Environment variable overriding [`DEFAULT_RANK_TOL`].
pub const RANK_TOL_ENV: &str = "SLICECERT_TOL";

/// Global relative rank tolerance (read once from `SLICECERT_TOL`).
pub fn rank_tolerance() -> f64 {
    static TOL: OnceLock<f64> = OnceLock::new();
    *TOL.get_or_init(|| {
        std::env::var(RANK_TOL_ENV)
            .ok()
            .and_then(|s| s.trim().parse::<f64>().ok())
            .filter(|t| t.is_finite() && *t > 0.0)
            .unwrap_or(DEFAULT_RANK_TOL)
    })
}

/// Singular values and the full right singular basis of `m`.
///
/// Returns `(sigma, v)` with `v` a `cols x cols` orthogonal matrix whose
/// column `j` pairs with `sigma[j]` (missing singular values are zero).
fn full_right_svd(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let (rows, cols) = m.shape();
    if cols == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    // Pad with zero rows so the thin SVD still yields a complete V.
    let padded = if rows < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let sigma: Vec<f64> = svd.singular_values.iter().copied().collect();
    (sigma, v_t.transpose())
}

fn cutoff(sigma: &[f64]) -> f64 {
    let smax = sigma.iter().copied().fold(0.0_f64, f64::max);
    rank_tolerance() * smax.max(1.0)
}

/// Orthonormal basis (as columns) of the nullspace of `m`.
pub fn nullspace(m: &DMatrix<f64>) -> DMatrix<f64> {
    let cols = m.ncols();
    let (sigma, v) = full_right_svd(m);
    let thr = cutoff(&sigma);
    let keep: Vec<usize> = (0..cols).filter(|&j| sigma[j] <= thr).collect();
    select_columns(&v, &keep, cols)
}

/// Orthonormal basis (as columns) of the column space of `m`.
pub fn range(m: &DMatrix<f64>) -> DMatrix<f64> {
    let rows = m.nrows();
    if m.ncols() == 0 || rows == 0 {
        return DMatrix::zeros(rows, 0);
    }
    // Column space of m is the row space of m^T.
    let (sigma, v) = full_right_svd(&m.transpose());
    let thr = cutoff(&sigma);
    let keep: Vec<usize> = (0..rows).filter(|&j| sigma[j] > thr).collect();
    select_columns(&v, &keep, rows)
}

/// Numerical rank under the global tolerance.
pub fn rank(m: &DMatrix<f64>) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sigma = m.singular_values();
    let s: Vec<f64> = sigma.iter().copied().collect();
    let thr = cutoff(&s);
    s.iter().filter(|&&x| x > thr).count()
}

/// Minimum-norm least-squares solution of `a x = b` under the rank tolerance.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    if n == 0 {
        return DVector::zeros(0);
    }
    let svd = a.clone().svd(true, true);
    let sigma: Vec<f64> = svd.singular_values.iter().copied().collect();
    let thr = cutoff(&sigma);
    let u = svd.u.as_ref().expect("U");
    let v_t = svd.v_t.as_ref().expect("V^T");
    let mut x = DVector::zeros(n);
    for (k, &s) in sigma.iter().enumerate() {
        if s > thr {
            let coef = u.column(k).dot(b) / s;
            x += v_t.row(k).transpose() * coef;
        }
    }
    x
}

fn select_columns(v: &DMatrix<f64>, keep: &[usize], rows: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(rows, keep.len());
    for (c, &j) in keep.iter().enumerate() {
        out.set_column(c, &v.column(j));
    }
    out
}

/// Modified Gram-Schmidt with one reorthogonalization pass under the inner
/// product `<u, v> = u^T g v`. Vectors whose residual falls below the rank
/// tolerance (relative to their original norm) are dropped.
pub fn gram_schmidt(vectors: &[DVector<f64>], g: &DMatrix<f64>) -> Vec<DVector<f64>> {
    let tol = rank_tolerance();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for v in vectors {
        let norm0 = v.dot(&(g * v)).max(0.0).sqrt();
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&(g * &w));
                w -= q * c;
            }
        }
        let norm = w.dot(&(g * &w)).max(0.0).sqrt();
        if norm > tol * norm0.max(1.0) {
            basis.push(w / norm);
        }
    }
    basis
}

/// Stack column vectors into a matrix with `rows` rows.
pub fn columns(vectors: &[DVector<f64>], rows: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows, vectors.len());
    for (j, v) in vectors.iter().enumerate() {
        m.set_column(j, v);
    }
    m
}

/// Eigenvalues of a symmetric matrix in ascending order, with matching
/// eigenvectors as columns.
pub fn sym_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = select_columns(&eig.eigenvectors, &order, n);
    (values, vectors)
}

/// Largest absolute entry.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |a, x| a.max(x.abs()))
}

/// Lower Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky_lower(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if m.nrows() == 0 {
        return Some(DMatrix::zeros(0, 0));
    }
    m.clone().cholesky().map(|c| c.l())
}

/// Solve `l^T x = b` for lower-triangular `l`.
pub fn solve_lower_transpose(l: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    if l.nrows() == 0 {
        return b.clone();
    }
    l.transpose()
        .solve_upper_triangular(b)
        .expect("Cholesky factor is nonsingular")
}

/// Solve `l x = b` for lower-triangular `l`.
pub fn solve_lower(l: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    if l.nrows() == 0 {
        return b.clone();
    }
    l.solve_lower_triangular(b)
        .expect("Cholesky factor is nonsingular")
}
