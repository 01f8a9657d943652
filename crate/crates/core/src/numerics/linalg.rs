use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{ComplexMatrix, NumericsError};

/// Eigen-decomposition of a Hermitian matrix: ascending eigenvalues and
/// unitary eigenvectors stored as columns.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HermitianEigen {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: ComplexMatrix,
}

/// Cholesky factor `L` (lower triangular, positive real diagonal) with `G = L L*`.
pub fn cholesky(g: &ComplexMatrix) -> Result<ComplexMatrix, NumericsError> {
    if !g.is_square() {
        return Err(NumericsError::NotSquare { rows: g.rows(), cols: g.cols() });
    }
    let n = g.rows();
    let mut l = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        let mut pivot = g[(j, j)].re;
        for k in 0..j {
            pivot -= l[(j, k)].norm_sqr();
        }
        if !(pivot > 0.0) || !pivot.is_finite() {
            return Err(NumericsError::NotPositiveDefinite(j));
        }
        let d = pivot.sqrt();
        l[(j, j)] = Complex64::new(d, 0.0);
        for i in (j + 1)..n {
            let mut s = g[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// Solves `conj(L) x = b` by forward substitution; equivalently `x^T = b^T (L*)^{-1}`.
///
/// This maps a row of raw basis values to the matching row of orthonormal
/// basis values.
pub fn solve_conj_lower(l: &ComplexMatrix, b: &[Complex64]) -> Vec<Complex64> {
    let n = l.rows();
    assert_eq!(b.len(), n);
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for i in 0..n {
        let row = l.row(i);
        let mut s = b[i];
        for k in 0..i {
            s -= row[k].conj() * x[k];
        }
        x[i] = s / row[i].conj();
    }
    x
}

/// Reduces a Hermitian matrix to real symmetric tridiagonal form `A = W T W*`.
///
/// Returns `(diag, offdiag, W)` with `offdiag[k] = T[k+1][k] >= 0` and
/// `offdiag[n-1] = 0`.
fn tridiagonalize(a: &ComplexMatrix) -> (Vec<f64>, Vec<f64>, ComplexMatrix) {
    let n = a.rows();
    let mut a = a.clone();
    let mut q = ComplexMatrix::identity(n);
    let zero = Complex64::new(0.0, 0.0);

    for k in 0..n.saturating_sub(2) {
        let alpha = ((k + 1)..n).map(|i| a[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if alpha == 0.0 {
            continue;
        }
        let x0 = a[(k + 1, k)];
        let phase = if x0.norm() > 0.0 { x0 / x0.norm() } else { Complex64::new(1.0, 0.0) };
        let len = n - k - 1;
        let mut v: Vec<Complex64> = ((k + 1)..n).map(|i| a[(i, k)]).collect();
        v[0] += phase * alpha;
        let vnorm2: f64 = v.iter().map(|c| c.norm_sqr()).sum();
        let beta = 2.0 / vnorm2;

        // p = beta * B v on the trailing block B = a[k+1.., k+1..]
        let mut p = vec![zero; len];
        for (ii, pi) in p.iter_mut().enumerate() {
            let row = &a.row(k + 1 + ii)[k + 1..];
            *pi = beta * row.iter().zip(&v).map(|(b, vj)| b * vj).sum::<Complex64>();
        }
        let kappa = 0.5 * beta * v.iter().zip(&p).map(|(vi, pi)| vi.conj() * pi).sum::<Complex64>();
        let w: Vec<Complex64> = p.iter().zip(&v).map(|(pi, vi)| pi - kappa * vi).collect();
        for ii in 0..len {
            let row = a.row_mut(k + 1 + ii);
            for jj in 0..len {
                row[k + 1 + jj] -= v[ii] * w[jj].conj() + w[ii] * v[jj].conj();
            }
        }
        for i in (k + 1)..n {
            a[(i, k)] = zero;
            a[(k, i)] = zero;
        }
        a[(k + 1, k)] = -phase * alpha;
        a[(k, k + 1)] = (-phase * alpha).conj();

        // Q <- Q H
        for r in 0..n {
            let row = &mut q.row_mut(r)[k + 1..];
            let s: Complex64 = row.iter().zip(&v).map(|(qij, vj)| qij * vj).sum::<Complex64>() * beta;
            for (qij, vj) in row.iter_mut().zip(&v) {
                *qij -= s * vj.conj();
            }
        }
    }

    // Make the off-diagonal real and non-negative by a diagonal unitary.
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n];
    let mut delta = vec![Complex64::new(1.0, 0.0); n];
    for k in 0..n {
        diag[k] = a[(k, k)].re;
        if k + 1 < n {
            let e = a[(k + 1, k)];
            let mag = e.norm();
            off[k] = mag;
            delta[k + 1] = if mag > 0.0 { delta[k] * (e / mag) } else { delta[k] };
        }
    }
    for r in 0..n {
        let row = q.row_mut(r);
        for (c, d) in row.iter_mut().zip(&delta) {
            *c *= d;
        }
    }
    (diag, off, q)
}

/// Implicit-shift QL on a real symmetric tridiagonal matrix, rotating the
/// columns of `vecs` along. Based on the EISPACK `tql2` procedure.
fn tridiagonal_ql(d: &mut [f64], e: &mut [f64], vecs: &mut ComplexMatrix) -> Result<(), NumericsError> {
    let n = d.len();
    let eps = f64::EPSILON;
    let max_iter = 100 * n.max(1);
    let mut iterations = 0usize;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;

    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m == n {
            m = n - 1;
        }
        if m > l {
            loop {
                iterations += 1;
                if iterations > max_iter {
                    return Err(NumericsError::NoConvergence { iterations: max_iter });
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let (mut c, mut c2, mut c3) = (1.0, 1.0, 1.0);
                let el1 = e[l + 1];
                let (mut s, mut s2) = (0.0, 0.0);
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    let h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..vecs.rows() {
                        let row = vecs.row_mut(k);
                        let hk = row[i + 1];
                        row[i + 1] = s * row[i] + c * hk;
                        row[i] = c * row[i] - s * hk;
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
    Ok(())
}

/// Eigen-decomposition of a Hermitian matrix by Householder
/// tridiagonalization followed by implicit-shift QL.
///
/// The input is symmetrized first; a Hermitian defect above `1e-10·max|A|`
/// is rejected.
pub fn hermitian_eig(a: &ComplexMatrix) -> Result<HermitianEigen, NumericsError> {
    if !a.is_square() {
        return Err(NumericsError::NotSquare { rows: a.rows(), cols: a.cols() });
    }
    let scale = a.max_abs();
    let defect = a.hermitian_defect();
    if defect > 1e-10 * scale {
        return Err(NumericsError::NotHermitian { defect, scale });
    }
    let n = a.rows();
    let h = a.hermitian_part();
    let (mut d, mut e, mut vecs) = tridiagonalize(&h);
    tridiagonal_ql(&mut d, &mut e, &mut vecs)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
    let eigenvalues = order.iter().map(|&i| d[i]).collect();
    let eigenvectors = ComplexMatrix::from_fn(n, n, |r, c| vecs[(r, order[c])]);
    Ok(HermitianEigen { eigenvalues, eigenvectors })
}

/// Operator 2-norm. Hermitian inputs use `max |λ|`; general inputs use the
/// square root of the top eigenvalue of `A*A`.
pub fn spectral_norm(a: &ComplexMatrix) -> Result<f64, NumericsError> {
    let scale = a.max_abs();
    if scale == 0.0 {
        return Ok(0.0);
    }
    if a.is_square() && a.hermitian_defect() <= 1e-12 * scale {
        let eig = hermitian_eig(a)?;
        return Ok(eig.eigenvalues.iter().fold(0.0f64, |acc, l| acc.max(l.abs())));
    }
    let gram = a.adjoint().matmul(a).hermitian_part();
    let eig = hermitian_eig(&gram)?;
    let top = eig.eigenvalues.last().copied().unwrap_or(0.0);
    Ok(top.max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn cholesky_identity_and_diagonal() {
        let l = cholesky(&ComplexMatrix::identity(3)).unwrap();
        assert!(l.max_abs_diff(&ComplexMatrix::identity(3)) == 0.0);

        let g = ComplexMatrix::from_real_rows(&[&[4.0, 0.0], &[0.0, 9.0]]);
        let l = cholesky(&g).unwrap();
        assert!(l.max_abs_diff(&ComplexMatrix::from_real_rows(&[&[2.0, 0.0], &[0.0, 3.0]])) < 1e-15);
    }

    #[test]
    fn cholesky_hand_factorization() {
        let g = ComplexMatrix::from_real_rows(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let l = cholesky(&g).unwrap();
        let expect = ComplexMatrix::from_real_rows(&[&[2f64.sqrt(), 0.0], &[1.0 / 2f64.sqrt(), 1.5f64.sqrt()]]);
        assert!(l.max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let g = ComplexMatrix::from_real_rows(&[&[1.0, 2.0], &[2.0, 1.0]]);
        assert_eq!(cholesky(&g), Err(NumericsError::NotPositiveDefinite(1)));
        let g = ComplexMatrix::from_real_rows(&[&[0.0, 0.0], &[0.0, 1.0]]);
        assert_eq!(cholesky(&g), Err(NumericsError::NotPositiveDefinite(0)));
    }

    #[test]
    fn conj_lower_solve_inverts_adjoint_factor() {
        let g = ComplexMatrix::from_fn(3, 3, |i, j| {
            if i == j {
                c(4.0 + i as f64, 0.0)
            } else if i < j {
                c(0.5, 0.25 * (j - i) as f64)
            } else {
                c(0.5, -0.25 * (i - j) as f64)
            }
        });
        let l = cholesky(&g).unwrap();
        let b = vec![c(1.0, 2.0), c(-0.5, 0.1), c(0.3, -0.7)];
        let x = solve_conj_lower(&l, &b);
        // x^T L* = b^T
        let lstar = l.adjoint();
        for j in 0..3 {
            let v: Complex64 = (0..3).map(|i| x[i] * lstar[(i, j)]).sum();
            assert!((v - b[j]).norm() < 1e-14);
        }
    }

    #[test]
    fn eig_diagonal_and_swap() {
        let e = hermitian_eig(&ComplexMatrix::diag_real(&[3.0, 1.0, 2.0])).unwrap();
        assert_eq!(e.eigenvalues, vec![1.0, 2.0, 3.0]);

        let e = hermitian_eig(&ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap();
        assert!((e.eigenvalues[0] + 1.0).abs() < 1e-15 && (e.eigenvalues[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eig_complex_hermitian_reconstructs() {
        let n = 7;
        let a = ComplexMatrix::from_fn(n, n, |i, j| {
            let (x, y) = (i as f64, j as f64);
            if i == j {
                c((x * 1.3).sin() * 3.0, 0.0)
            } else {
                let v = c((x + 2.0 * y).cos(), (x - y) * 0.3);
                if i < j {
                    v
                } else {
                    c((y + 2.0 * x).cos(), (y - x) * 0.3).conj()
                }
            }
        });
        let e = hermitian_eig(&a).unwrap();
        let v = &e.eigenvectors;
        let av = a.matmul(v);
        let vl = ComplexMatrix::from_fn(n, n, |r, k| v[(r, k)] * e.eigenvalues[k]);
        assert!(av.max_abs_diff(&vl) < 1e-12 * a.max_abs());
        let vv = v.adjoint().matmul(v);
        assert!(vv.max_abs_diff(&ComplexMatrix::identity(n)) < 1e-12);
        assert!(e.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let a = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(matches!(hermitian_eig(&a), Err(NumericsError::NotHermitian { .. })));
    }

    #[test]
    fn spectral_norm_examples() {
        assert_eq!(spectral_norm(&ComplexMatrix::zeros(3, 3)).unwrap(), 0.0);
        assert!((spectral_norm(&ComplexMatrix::diag_real(&[-5.0, 2.0])).unwrap() - 5.0).abs() < 1e-14);
        // nilpotent Jordan block has norm 1
        let j = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!((spectral_norm(&j).unwrap() - 1.0).abs() < 1e-14);
        // rectangular
        let r = ComplexMatrix::from_real_rows(&[&[3.0, 0.0, 4.0]]);
        assert!((spectral_norm(&r).unwrap() - 5.0).abs() < 1e-14);
    }
}
