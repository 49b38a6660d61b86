//! Dense symmetric eigendecomposition.
//!
//! Two solvers share one output contract: cyclic Jacobi rotations, and
//! Householder tridiagonalization followed by implicit QL iterations. The
//! automatic choice uses Jacobi up to [`JACOBI_MAX_AUTO`] rows. Results are
//! sorted by descending eigenvalue and each eigenvector gets a canonical sign
//! (first non-negligible component positive), so every decomposition is
//! bitwise reproducible.

use ndarray::{Array1, Array2};

use crate::error::{FineError, Result};

const MAX_SWEEPS: usize = 100;
const MAX_QL_ITERS: usize = 60;

/// Largest matrix the automatic solver choice sends to Jacobi.
pub const JACOBI_MAX_AUTO: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EigenMethod {
    #[default]
    Auto,
    Jacobi,
    TridiagonalQl,
}

/// Off-diagonal Frobenius norm must fall below this fraction of ‖A‖_F.
pub const JACOBI_REL_TOL: f64 = 1e-14;

/// Components with magnitude at or below this are skipped when choosing the
/// sign of a unit eigenvector.
const SIGN_EPS: f64 = 1e-12;

/// Eigenpairs of a real symmetric matrix, sorted by descending eigenvalue.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Array1<f64>,
    /// Eigenvectors stored as columns, aligned with `values`.
    pub vectors: Array2<f64>,
    pub sweeps: usize,
}

impl SymmetricEigen {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Indices of the eigenpairs in ascending eigenvalue order.
    pub fn ascending(&self) -> impl Iterator<Item = usize> {
        (0..self.len()).rev()
    }
}

/// Decomposes a symmetric matrix `a = V diag(λ) Vᵀ` with the automatic
/// solver choice.
pub fn symmetric_eigen(a: &Array2<f64>) -> Result<SymmetricEigen> {
    symmetric_eigen_with(a, EigenMethod::Auto)
}

/// Decomposes a symmetric matrix with an explicit solver.
///
/// The input must be square and symmetric up to `1e-12·max|a|`; the upper
/// triangle is mirrored before iterating so tiny asymmetries do not leak into
/// the result.
pub fn symmetric_eigen_with(a: &Array2<f64>, method: EigenMethod) -> Result<SymmetricEigen> {
    let (rows, cols) = a.dim();
    if rows != cols {
        return Err(FineError::Dimension {
            expected: rows,
            got: cols,
        });
    }
    let n = rows;
    if a.iter().any(|x| !x.is_finite()) {
        return Err(FineError::InvalidParameter(
            "matrix contains non-finite entries".into(),
        ));
    }
    let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    for i in 0..n {
        for j in (i + 1)..n {
            if (a[[i, j]] - a[[j, i]]).abs() > 1e-12 * scale.max(1.0) {
                return Err(FineError::InvalidParameter(format!(
                    "matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }

    let method = match method {
        EigenMethod::Auto if n <= JACOBI_MAX_AUTO => EigenMethod::Jacobi,
        EigenMethod::Auto => EigenMethod::TridiagonalQl,
        m => m,
    };
    let (diag, vt, sweeps) = match method {
        EigenMethod::TridiagonalQl => {
            let (d, vt) = tridiagonal_ql(a)?;
            (d, vt, 0)
        }
        _ => jacobi(a),
    };

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diag[j].total_cmp(&diag[i]).then(i.cmp(&j)));

    let mut values = Array1::zeros(n);
    let mut vectors = Array2::zeros((n, n));
    for (col, &src) in order.iter().enumerate() {
        values[col] = diag[src];
        let row = &vt[src * n..(src + 1) * n];
        let sign = canonical_sign(row);
        for k in 0..n {
            vectors[[k, col]] = sign * row[k];
        }
    }
    Ok(SymmetricEigen {
        values,
        vectors,
        sweeps,
    })
}

/// Returns (eigenvalues, eigenvectors as rows of a row-major buffer, sweeps).
fn jacobi(a: &Array2<f64>) -> (Vec<f64>, Vec<f64>, usize) {
    let n = a.nrows();
    // `vt` holds eigenvectors as rows so each rotation touches two
    // contiguous rows.
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            m[i * n + j] = a[[i, j]];
            m[j * n + i] = a[[i, j]];
        }
    }
    let mut vt = vec![0.0; n * n];
    for i in 0..n {
        vt[i * n + i] = 1.0;
    }

    let frob = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = JACOBI_REL_TOL * frob;
    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS {
        if off_diagonal_norm(&m, n) <= tol {
            break;
        }
        sweeps += 1;
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                rotate(&mut m, &mut vt, n, p, q);
            }
        }
    }
    if sweeps == MAX_SWEEPS && off_diagonal_norm(&m, n) > tol {
        log::warn!("jacobi did not reach tolerance after {MAX_SWEEPS} sweeps");
    }
    let diag = (0..n).map(|i| m[i * n + i]).collect();
    (diag, vt, sweeps)
}

fn off_diagonal_norm(m: &[f64], n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            s += m[i * n + j] * m[i * n + j];
        }
    }
    (2.0 * s).sqrt()
}

fn rotate(m: &mut [f64], vt: &mut [f64], n: usize, p: usize, q: usize) {
    let apq = m[p * n + q];
    if apq == 0.0 {
        return;
    }
    let app = m[p * n + p];
    let aqq = m[q * n + q];
    let theta = (aqq - app) / (2.0 * apq);
    let t = if theta.is_infinite() {
        0.0
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    if t == 0.0 {
        // |apq| is negligible next to the diagonal gap.
        m[p * n + q] = 0.0;
        m[q * n + p] = 0.0;
        return;
    }
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let akp = m[p * n + k];
        let akq = m[q * n + k];
        let new_p = c * akp - s * akq;
        let new_q = s * akp + c * akq;
        m[p * n + k] = new_p;
        m[q * n + k] = new_q;
        m[k * n + p] = new_p;
        m[k * n + q] = new_q;
    }
    m[p * n + p] = app - t * apq;
    m[q * n + q] = aqq + t * apq;
    m[p * n + q] = 0.0;
    m[q * n + p] = 0.0;

    let (head, tail) = vt.split_at_mut(q * n);
    let row_p = &mut head[p * n..(p + 1) * n];
    let row_q = &mut tail[..n];
    for (vp, vq) in row_p.iter_mut().zip(row_q.iter_mut()) {
        let a = *vp;
        let b = *vq;
        *vp = c * a - s * b;
        *vq = s * a + c * b;
    }
}

/// Householder reduction to tridiagonal form followed by implicit QL with
/// Wilkinson-style shifts (the EISPACK tred2/tql2 pair).
fn tridiagonal_ql(a: &Array2<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = a.nrows();
    if n == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if j >= i { a[[i, j]] } else { a[[j, i]] })
                .collect()
        })
        .collect();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];

    // Householder tridiagonalization.
    d.copy_from_slice(&v[n - 1]);
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for dk in d.iter().take(i) {
            scale += dk.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[i - 1][j];
                v[i][j] = 0.0;
                v[j][i] = 0.0;
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[j][i] = f;
                g = e[j] + v[j][j] * f;
                for k in (j + 1)..i {
                    g += v[k][j] * d[k];
                    e[k] += v[k][j] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[k][j] -= f * e[k] + g * d[k];
                }
                d[j] = v[i - 1][j];
                v[i][j] = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..(n - 1) {
        v[n - 1][i] = v[i][i];
        v[i][i] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[k][i + 1] / h;
            }
            for j in 0..=i {
                let g: f64 = v[..=i].iter().map(|r| r[i + 1] * r[j]).sum();
                for k in 0..=i {
                    v[k][j] -= g * d[k];
                }
            }
        }
        for row in v.iter_mut().take(i + 1) {
            row[i + 1] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[n - 1][j];
        v[n - 1][j] = 0.0;
    }
    v[n - 1][n - 1] = 1.0;
    e[0] = 0.0;

    // Implicit QL on the tridiagonal (d, e).
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_QL_ITERS {
                    return Err(FineError::InvalidParameter(
                        "tridiagonal QL failed to converge".into(),
                    ));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for row in v.iter_mut() {
                        let h = row[i + 1];
                        row[i + 1] = s * row[i] + c * h;
                        row[i] = c * row[i] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }

    // Column j of `v` is the eigenvector for d[j]; emit as rows.
    let mut vt = vec![0.0; n * n];
    for (k, row) in v.iter().enumerate() {
        for (j, x) in row.iter().enumerate() {
            vt[j * n + k] = *x;
        }
    }
    Ok((d, vt))
}

/// +1 or −1 so that the first component with magnitude above `SIGN_EPS`
/// becomes positive.
pub fn canonical_sign(v: &[f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let thresh = SIGN_EPS * norm.max(f64::MIN_POSITIVE);
    match v.iter().find(|x| x.abs() > thresh) {
        Some(x) if *x < 0.0 => -1.0,
        _ => 1.0,
    }
}

/// Flips columns of `m` in place so each satisfies [`canonical_sign`].
pub fn canonicalize_columns(m: &mut Array2<f64>) {
    for mut col in m.columns_mut() {
        let v: Vec<f64> = col.iter().copied().collect();
        if canonical_sign(&v) < 0.0 {
            col.mapv_inplace(|x| -x);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(n: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = Array2::zeros((n, n));
        for i in 0..n {
            for j in i..n {
                let x: f64 = rng.random_range(-1.0..1.0);
                a[[i, j]] = x;
                a[[j, i]] = x;
            }
        }
        a
    }

    fn residuals(a: &Array2<f64>, e: &SymmetricEigen) -> (f64, f64) {
        let n = a.nrows();
        let lam = Array2::from_diag(&e.values);
        let recon = e.vectors.dot(&lam).dot(&e.vectors.t());
        let r = (a - &recon).iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let vtv = e.vectors.t().dot(&e.vectors) - Array2::<f64>::eye(n);
        let o = vtv.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        (r, o)
    }

    #[test]
    fn two_by_two() {
        let a = array![[2.0, 1.0], [1.0, 2.0]];
        let e = symmetric_eigen(&a).unwrap();
        assert!((e.values[0] - 3.0).abs() < 1e-14);
        assert!((e.values[1] - 1.0).abs() < 1e-14);
        let s = 1.0 / 2f64.sqrt();
        assert!((e.vectors[[0, 0]] - s).abs() < 1e-14);
        assert!((e.vectors[[1, 0]] - s).abs() < 1e-14);
    }

    #[test]
    fn diagonal_input_is_sorted() {
        let a = array![[1.0, 0.0, 0.0], [0.0, 5.0, 0.0], [0.0, 0.0, -2.0]];
        let e = symmetric_eigen(&a).unwrap();
        assert_eq!(e.values.to_vec(), vec![5.0, 1.0, -2.0]);
        assert_eq!(e.sweeps, 0);
    }

    #[test]
    fn random_residuals() {
        for (n, seed) in [(1, 1), (5, 2), (30, 3), (80, 4)] {
            let a = random_symmetric(n, seed);
            let e = symmetric_eigen(&a).unwrap();
            let (r, o) = residuals(&a, &e);
            assert!(r < 1e-12, "n={n} recon {r}");
            assert!(o < 1e-12, "n={n} ortho {o}");
            for w in e.values.windows(2) {
                assert!(w[0] >= w[1]);
            }
        }
    }

    #[test]
    fn tridiagonal_ql_residuals_and_agreement() {
        for (n, seed) in [(1, 11), (2, 12), (7, 13), (60, 14), (250, 15)] {
            let a = random_symmetric(n, seed);
            let ql = symmetric_eigen_with(&a, EigenMethod::TridiagonalQl).unwrap();
            let (r, o) = residuals(&a, &ql);
            assert!(r < 1e-11, "n={n} recon {r}");
            assert!(o < 1e-11, "n={n} ortho {o}");
            if n <= 60 {
                let jac = symmetric_eigen_with(&a, EigenMethod::Jacobi).unwrap();
                for (x, y) in ql.values.iter().zip(jac.values.iter()) {
                    assert!((x - y).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn tridiagonal_ql_handles_repeated_eigenvalues() {
        let a = Array2::<f64>::eye(5) * 3.0;
        let e = symmetric_eigen_with(&a, EigenMethod::TridiagonalQl).unwrap();
        assert!(e.values.iter().all(|x| (x - 3.0).abs() < 1e-15));
        let (r, o) = residuals(&a, &e);
        assert!(r < 1e-14 && o < 1e-14);
    }

    #[test]
    fn signs_are_canonical() {
        let a = random_symmetric(12, 9);
        let e = symmetric_eigen(&a).unwrap();
        for col in e.vectors.columns() {
            let first = col.iter().find(|x| x.abs() > 1e-12).unwrap();
            assert!(*first > 0.0);
        }
    }

    #[test]
    fn rejects_asymmetric() {
        let a = array![[1.0, 2.0], [0.0, 1.0]];
        assert!(symmetric_eigen(&a).is_err());
    }

    #[test]
    fn empty_matrix() {
        let a = Array2::<f64>::zeros((0, 0));
        assert!(symmetric_eigen(&a).unwrap().is_empty());
    }
}
