//! Small dense helpers shared by the modules. Everything here works on
//! `nalgebra` dynamic matrices; singular value decompositions go through
//! `faer`, whose bidiagonal solver keeps full accuracy on clustered
//! spectra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Thin SVD `a = u diag(s) vᵀ` with `s` sorted largest first.
pub(crate) struct Svd {
    pub u: DMatrix<f64>,
    pub s: Vec<f64>,
    pub v: DMatrix<f64>,
}

pub(crate) fn svd(a: &DMatrix<f64>) -> Svd {
    let (rows, cols) = a.shape();
    let r = rows.min(cols);
    if r == 0 {
        return Svd { u: DMatrix::zeros(rows, 0), s: Vec::new(), v: DMatrix::zeros(cols, 0) };
    }
    let fa = faer::Mat::<f64>::from_fn(rows, cols, |i, j| a[(i, j)]);
    let (mut u, mut s, mut v) = match fa.thin_svd() {
        Ok(d) => {
            let (fu, fs, fv) = (d.U(), d.S(), d.V());
            (
                DMatrix::from_fn(rows, r, |i, j| fu[(i, j)]),
                (0..r).map(|k| fs[k]).collect::<Vec<f64>>(),
                DMatrix::from_fn(cols, r, |i, j| fv[(i, j)]),
            )
        }
        Err(_) => {
            let d = a.clone().svd(true, true);
            (d.u.expect("u requested"), d.singular_values.iter().copied().collect(), d.v_t.expect("v_t requested").transpose())
        }
    };
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&x, &y| s[y].total_cmp(&s[x]));
    if order.iter().enumerate().any(|(i, &o)| i != o) {
        u = DMatrix::from_fn(rows, r, |i, j| u[(i, order[j])]);
        v = DMatrix::from_fn(cols, r, |i, j| v[(i, order[j])]);
        s = order.iter().map(|&o| s[o]).collect();
    }
    Svd { u, s, v }
}

/// Singular values of `a`, largest first.
pub(crate) fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    svd(a).s
}

/// Operator norm of a symmetric matrix, via its eigenvalues.
pub(crate) fn sym_op_norm(a: &DMatrix<f64>) -> f64 {
    let sym = (a + a.transpose()) * 0.5;
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Principal square root of a symmetric positive semidefinite matrix.
/// Negative eigenvalues produced by rounding are clamped to zero.
pub(crate) fn sym_sqrt(a: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// Inverse of a symmetric positive definite matrix; `None` if not PD.
pub(crate) fn spd_inverse(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let sym = (a + a.transpose()) * 0.5;
    sym.cholesky().map(|c| c.inverse())
}

/// Orthonormal basis of the column space of `a`, with rank decided by
/// singular values above `rel_tol * sigma_max`.
pub(crate) fn column_space(a: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let d = svd(a);
    let smax = d.s.first().copied().unwrap_or(0.0);
    let keep = d.s.iter().filter(|&&s| smax > 0.0 && s > rel_tol * smax).count();
    d.u.columns(0, keep).into_owned()
}

/// Numerical rank with a relative singular-value threshold.
pub(crate) fn rank(a: &DMatrix<f64>, rel_tol: f64) -> usize {
    let sv = singular_values(a);
    match sv.first() {
        Some(&smax) if smax > 0.0 => sv.iter().filter(|&&s| s > rel_tol * smax).count(),
        _ => 0,
    }
}

/// Matrix whose columns are the given vectors.
pub(crate) fn columns_to_matrix(rows: usize, cols: &[DVector<f64>]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows, cols.len());
    for (j, c) in cols.iter().enumerate() {
        m.set_column(j, c);
    }
    m
}

/// Product of squared singular values, i.e. `det(AᵀA)` for a tall `a`.
pub(crate) fn gram_determinant(a: &DMatrix<f64>) -> f64 {
    if a.nrows() < a.ncols() {
        return 0.0;
    }
    singular_values(a).iter().map(|s| s * s).product()
}
