//! Dense complex linear algebra, quadrature rules and deterministic reductions.

mod linalg;
mod matrix;
mod quadrature;
mod reduce;

pub use linalg::{cholesky, hermitian_eig, solve_conj_lower, spectral_norm, HermitianEigen};
pub use matrix::ComplexMatrix;
pub use quadrature::{gauss_legendre, periodic_trapezoid, QuadratureDomain, QuadratureRule1D, MAX_GAUSS_LEGENDRE};
pub use reduce::{tree_reduce, tree_sum, tree_sum_real, weighted_gram};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("quadrature order {order} out of range 1..={max}")]
    OrderOutOfRange { order: usize, max: usize },
    #[error("matrix is not positive definite (pivot {0} non-positive)")]
    NotPositiveDefinite(usize),
    #[error("eigensolver did not converge within {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian (defect {defect:e} at scale {scale:e})")]
    NotHermitian { defect: f64, scale: f64 },
}

#[cfg(test)]
mod proptests {
    use super::*;
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn complex_entries(n: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n * n)
    }

    fn hermitian_from(n: usize, raw: &[(f64, f64)]) -> ComplexMatrix {
        let b = ComplexMatrix::from_fn(n, n, |i, j| Complex64::new(raw[i * n + j].0, raw[i * n + j].1));
        b.hermitian_part()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn gauss_legendre_exact_on_max_degree(n in 1usize..40, coeffs in prop::collection::vec(-1.0f64..1.0, 80)) {
            let rule = gauss_legendre(n).unwrap();
            let deg = 2 * n - 1;
            let c = &coeffs[..=deg];
            let p = |x: f64| c.iter().rev().fold(0.0, |acc, a| acc * x + a);
            let exact: f64 = c.iter().enumerate()
                .map(|(k, a)| if k % 2 == 0 { 2.0 * a / (k as f64 + 1.0) } else { 0.0 })
                .sum();
            let scale: f64 = c.iter().map(|a| a.abs()).sum::<f64>().max(1.0);
            prop_assert!((rule.integrate(p) - exact).abs() <= 1e-12 * scale);
        }

        #[test]
        fn cholesky_reconstructs((n, raw) in (1usize..50).prop_flat_map(|n| (Just(n), complex_entries(n)))) {
            let b = ComplexMatrix::from_fn(n, n, |i, j| Complex64::new(raw[i * n + j].0, raw[i * n + j].1));
            let g = &b.adjoint().matmul(&b) + &ComplexMatrix::identity(n).scale_real(n as f64 * 0.1);
            let l = cholesky(&g).unwrap();
            let back = l.matmul(&l.adjoint());
            prop_assert!(back.max_abs_diff(&g) <= 1e-11 * g.max_abs());
            for i in 0..n {
                prop_assert!(l[(i, i)].im == 0.0 && l[(i, i)].re > 0.0);
                for j in (i + 1)..n {
                    prop_assert!(l[(i, j)].norm() == 0.0);
                }
            }
        }

        #[test]
        fn eig_trace_and_unitarity((n, raw) in (1usize..30).prop_flat_map(|n| (Just(n), complex_entries(n)))) {
            let a = hermitian_from(n, &raw);
            let e = hermitian_eig(&a).unwrap();
            let scale = a.max_abs().max(1e-300);
            let tr: f64 = e.eigenvalues.iter().sum();
            prop_assert!((tr - a.trace().re).abs() <= 1e-10 * scale * n as f64);
            let v = &e.eigenvectors;
            prop_assert!(v.adjoint().matmul(v).max_abs_diff(&ComplexMatrix::identity(n)) <= 1e-10);
            let av = a.matmul(v);
            let vl = ComplexMatrix::from_fn(n, n, |r, k| v[(r, k)] * e.eigenvalues[k]);
            prop_assert!(av.max_abs_diff(&vl) <= 1e-10 * scale);
        }

        #[test]
        fn norm_invariant_under_adjoint((r, c, raw) in (1usize..12, 1usize..12).prop_flat_map(|(r, c)| (Just(r), Just(c), prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), r * c)))) {
            let a = ComplexMatrix::from_fn(r, c, |i, j| Complex64::new(raw[i * c + j].0, raw[i * c + j].1));
            let n1 = spectral_norm(&a).unwrap();
            let n2 = spectral_norm(&a.adjoint()).unwrap();
            prop_assert!((n1 - n2).abs() <= 1e-10 * n1.max(1e-300));
        }
    }
}
