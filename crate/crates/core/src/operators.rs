//! Toeplitz operators `T_f^(m)` and the quantities built from them.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec;
use crate::geometry::Observable;
use crate::hilbert::QuantumLevel;
use crate::numerics::{hermitian_eig, spectral_norm, tree_sum, ComplexMatrix, NumericsError};

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OperatorsError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("observable `{0}` has no analytic derivatives")]
    MissingDerivatives(String),
    #[error("observable `{0}` is not real")]
    NotReal(String),
}

/// Matrix of `T_f^(m)` in the orthonormal basis of a level.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ToeplitzOp {
    pub m: usize,
    pub source: String,
    /// `matrix[j][k] = ⟨f u_k, u_j⟩`.
    pub matrix: ComplexMatrix,
    /// `max |A − A*|` before symmetrization (zero for complex symbols, which
    /// are not symmetrized).
    pub hermiticity_defect: f64,
    /// The operator is `i·matrix` rather than `matrix`.
    pub i_prefactor: bool,
}

impl ToeplitzOp {
    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    /// The operator including the `i` prefactor, if any.
    pub fn full_matrix(&self) -> ComplexMatrix {
        if self.i_prefactor {
            self.matrix.scale(I)
        } else {
            self.matrix.clone()
        }
    }
}

/// `T_f^(m)`, assembled by quadrature: `Σ_i w_i f(pt_i) conj(U_ij) U_ik`.
pub fn toeplitz(level: &QuantumLevel, f: &Observable) -> ToeplitzOp {
    let grid = level.grid();
    let weights = exec::map_range(grid.len(), |i| grid.weights[i] * f.value(&grid.points[i]));
    let raw = level.weighted(&weights);
    let (matrix, hermiticity_defect) = if f.is_real() {
        let defect = raw.hermitian_defect();
        (raw.hermitian_part(), defect)
    } else {
        (raw, 0.0)
    };
    ToeplitzOp { m: level.m(), source: f.name().to_string(), matrix, hermiticity_defect, i_prefactor: false }
}

/// Toeplitz matrix of a symbol given only by its values at the grid nodes
/// of `level`. No symmetrization is applied.
pub fn toeplitz_from_values(level: &QuantumLevel, name: &str, values: &[Complex64]) -> ToeplitzOp {
    assert_eq!(values.len(), level.grid().len(), "one value per grid node");
    let grid = level.grid();
    let weights: Vec<Complex64> = values.iter().zip(&grid.weights).map(|(v, w)| v * w).collect();
    ToeplitzOp {
        m: level.m(),
        source: name.to_string(),
        matrix: level.weighted(&weights),
        hermiticity_defect: 0.0,
        i_prefactor: false,
    }
}

/// Operator norm `‖T‖`.
pub fn op_norm(t: &ToeplitzOp) -> Result<f64, OperatorsError> {
    Ok(spectral_norm(&t.matrix)?)
}

/// Ascending eigenvalues of a Hermitian operator.
pub fn eigenvalues(t: &ToeplitzOp) -> Result<Vec<f64>, OperatorsError> {
    Ok(hermitian_eig(&t.matrix)?.eigenvalues)
}

fn require_derivatives(f: &Observable) -> Result<(), OperatorsError> {
    if f.has_derivatives() {
        Ok(())
    } else {
        Err(OperatorsError::MissingDerivatives(f.name().to_string()))
    }
}

fn require_real(f: &Observable) -> Result<(), OperatorsError> {
    if f.is_real() {
        Ok(())
    } else {
        Err(OperatorsError::NotReal(f.name().to_string()))
    }
}

/// `‖m i [T_f, T_g] − T_{{f,g}}‖`.
pub fn dirac_defect(level: &QuantumLevel, f: &Observable, g: &Observable) -> Result<f64, OperatorsError> {
    require_derivatives(f)?;
    require_derivatives(g)?;
    let tf = toeplitz(level, f);
    let tg = toeplitz(level, g);
    let tb = toeplitz(level, &level.model().poisson_observable(f, g));
    let mut d = tf.matrix.commutator(&tg.matrix).scale(Complex64::new(0.0, level.m() as f64));
    d.add_assign_scaled(&tb.matrix, Complex64::new(-1.0, 0.0));
    Ok(spectral_norm(&d)?)
}

/// `‖T_f T_g − T_{fg}‖`.
pub fn product_defect(level: &QuantumLevel, f: &Observable, g: &Observable) -> Result<f64, OperatorsError> {
    let tf = toeplitz(level, f);
    let tg = toeplitz(level, g);
    let tfg = toeplitz(level, &f.mul(g));
    Ok(spectral_norm(&(&tf.matrix.matmul(&tg.matrix) - &tfg.matrix))?)
}

/// `Q_f^(m) = i·T_{f − Δf/(2m)}`, returned with `i_prefactor` set and the
/// Toeplitz matrix of the corrected symbol stored.
pub fn tuynman_gq(level: &QuantumLevel, f: &Observable) -> Result<ToeplitzOp, OperatorsError> {
    require_derivatives(f)?;
    let lap = level.model().laplacian_observable(f);
    let corrected = f.sub(&lap.scale(Complex64::new(1.0 / (2.0 * level.m() as f64), 0.0)));
    let mut op = toeplitz(level, &corrected);
    op.i_prefactor = true;
    Ok(op)
}

/// `Tr T_f − (m/2π) ∫_M f Ω`.
pub fn trace_gap(level: &QuantumLevel, f: &Observable) -> Result<f64, OperatorsError> {
    require_real(f)?;
    let t = toeplitz(level, f);
    let integral = level.grid().integrate(f).re;
    let vol = level.model().volume();
    Ok(t.matrix.trace().re - level.m() as f64 / vol * integral)
}

/// `|(1/m) Σ g(λ_i) − (1/2π) ∫ g(f) Ω|` with `λ_i` the spectrum of `T_f`.
pub fn spectral_measure_gap(
    level: &QuantumLevel,
    f: &Observable,
    g: &(dyn Fn(f64) -> f64 + Sync),
) -> Result<f64, OperatorsError> {
    require_real(f)?;
    let lambdas = eigenvalues(&toeplitz(level, f))?;
    let quantum = lambdas.iter().map(|&l| g(l)).sum::<f64>() / level.m() as f64;
    let grid = level.grid();
    let terms: Vec<Complex64> =
        exec::map_range(grid.len(), |i| Complex64::new(grid.weights[i] * g(f.value(&grid.points[i]).re), 0.0));
    let classical = tree_sum(&terms).re / level.model().volume();
    Ok((quantum - classical).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{parse_observable, sup_norm, KahlerModel};
    use crate::hilbert::{build_level, Resolution};

    fn sphere_level(m: usize) -> QuantumLevel {
        build_level(&KahlerModel::round_sphere(), m, Resolution::Auto).unwrap()
    }

    fn obs(level: &QuantumLevel, expr: &str) -> Observable {
        parse_observable(level.model(), expr).unwrap()
    }

    /// Diagonal of `T_{x3²}` from Beta integrals.
    fn x3sq_diag(m: usize, k: usize) -> f64 {
        let (m, k) = (m as f64, k as f64);
        ((k + 2.0) * (k + 1.0) - 2.0 * (k + 1.0) * (m + 1.0 - k) + (m + 2.0 - k) * (m + 1.0 - k))
            / ((m + 3.0) * (m + 2.0))
    }

    #[test]
    fn identity_symbol() {
        for model in [KahlerModel::deformed_sphere(0.2).unwrap(), KahlerModel::torus(Complex64::new(0.3, 0.9)).unwrap()]
        {
            let level = build_level(&model, 7, Resolution::Auto).unwrap();
            let t = toeplitz(&level, &Observable::one());
            assert!(t.matrix.max_abs_diff(&ComplexMatrix::identity(level.dim())) <= 1e-10);
            assert!((op_norm(&t).unwrap() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn x3_is_the_fuzzy_sphere_ladder() {
        let level = sphere_level(2);
        let t = toeplitz(&level, &obs(&level, "x3"));
        assert!(t.matrix.max_abs_diff(&ComplexMatrix::diag_real(&[-0.5, 0.0, 0.5])) <= 1e-12);
        for m in [2, 8, 32] {
            let level = sphere_level(m);
            let t = toeplitz(&level, &obs(&level, "x3"));
            let mf = m as f64;
            assert!((op_norm(&t).unwrap() - mf / (mf + 2.0)).abs() < 1e-10);
            let ev = eigenvalues(&t).unwrap();
            for (k, l) in ev.iter().enumerate() {
                assert!((l - (2.0 * k as f64 - mf) / (mf + 2.0)).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn torus_fourier_mode_shifts_theta_index() {
        let model = KahlerModel::torus(Complex64::new(0.0, 1.0)).unwrap();
        let m = 4;
        let level = build_level(&model, m, Resolution::Auto).unwrap();
        let t = toeplitz(&level, &model.observable("f_1_0").unwrap());
        // Gaussian oracle: ⟨f_{1,0} u_k, u_{k+1}⟩ = exp(−π/(2m)) for τ = i
        let shifted = (-std::f64::consts::PI / (2.0 * m as f64)).exp();
        for j in 0..m {
            for k in 0..m {
                let v = t.matrix[(j, k)];
                if j == (k + 1) % m {
                    assert!((v - shifted).norm() < 1e-10);
                } else {
                    assert!(v.norm() <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn norm_bounded_by_sup() {
        for m in [1, 4, 12, 32] {
            let level = sphere_level(m);
            let f = obs(&level, "x1 + x3^2");
            let sup = sup_norm(level.model(), &f, level.grid());
            assert!(op_norm(&toeplitz(&level, &f)).unwrap() <= sup + 1e-9);
        }
    }

    #[test]
    fn dirac_defect_examples() {
        let level = sphere_level(8);
        let (x1, x2) = (obs(&level, "x1"), obs(&level, "x2"));
        assert!(dirac_defect(&level, &x1, &x1).unwrap() <= 1e-10);
        let c = Observable::constant(Complex64::new(2.5, 0.0));
        assert!(dirac_defect(&level, &c, &x2).unwrap() <= 1e-10);
        let d8 = dirac_defect(&level, &x1, &x2).unwrap();
        let d16 = dirac_defect(&sphere_level(16), &x1, &x2).unwrap();
        assert!(d16 < d8);
        // closed form from the su(2) ladder: 4m/(m+2)²
        for (m, d) in [(8.0, d8), (16.0, d16)] {
            assert!((d - 4.0 * m / ((m + 2.0) * (m + 2.0))).abs() < 1e-10, "{d}");
        }
        let value_only = Observable::from_values("v", true, |_| Complex64::new(1.0, 0.0));
        assert!(matches!(dirac_defect(&level, &value_only, &x1), Err(OperatorsError::MissingDerivatives(_))));
    }

    #[test]
    fn product_defect_examples() {
        let level = sphere_level(4);
        let x3 = obs(&level, "x3");
        assert!(product_defect(&level, &x3, &Observable::one()).unwrap() <= 1e-10);
        let mut last = f64::INFINITY;
        for m in [4, 8, 16] {
            let level = sphere_level(m);
            let d = product_defect(&level, &x3, &x3).unwrap();
            let mf = m as f64;
            let oracle = (0..=m)
                .map(|k| (((2.0 * k as f64 - mf) / (mf + 2.0)).powi(2) - x3sq_diag(m, k)).abs())
                .fold(0.0, f64::max);
            assert!((d - oracle).abs() < 1e-10);
            assert!(d > 0.0 && d < last);
            last = d;
        }
        let torus = KahlerModel::torus(Complex64::new(0.0, 1.0)).unwrap();
        let level = build_level(&torus, 8, Resolution::Auto).unwrap();
        let (f, fbar) = (torus.observable("f_1_0").unwrap(), torus.observable("f_m1_0").unwrap());
        let expected = 1.0 - (-std::f64::consts::PI / 8.0).exp();
        assert!((product_defect(&level, &f, &fbar).unwrap() - expected).abs() < 1e-10);
    }

    #[test]
    fn tuynman_examples() {
        let level = sphere_level(4);
        let c = Observable::constant(Complex64::new(0.7, 0.0));
        let q = tuynman_gq(&level, &c).unwrap();
        assert!(q.i_prefactor);
        assert!(q.full_matrix().max_abs_diff(&ComplexMatrix::identity(5).scale(Complex64::new(0.0, 0.7))) < 1e-10);
        let q = tuynman_gq(&level, &obs(&level, "x3")).unwrap();
        let expect: Vec<f64> = (0..5).map(|k| 1.25 * (2.0 * k as f64 - 4.0) / 6.0).collect();
        assert!(q.matrix.max_abs_diff(&ComplexMatrix::diag_real(&expect)) < 1e-10);

        let mut prev = f64::INFINITY;
        for m in [8, 16, 32] {
            let level = sphere_level(m);
            let x1 = obs(&level, "x1");
            let gap =
                spectral_norm(&(&tuynman_gq(&level, &x1).unwrap().matrix - &toeplitz(&level, &x1).matrix)).unwrap();
            // Δx1 = −2x1, so the gap is ‖T_x1‖/m = 1/(m+2)
            assert!((gap - 1.0 / (m as f64 + 2.0)).abs() < 1e-10);
            assert!(gap < prev);
            prev = gap;
        }
    }

    #[test]
    fn trace_gap_examples() {
        for m in [3, 10] {
            let level = sphere_level(m);
            assert!((trace_gap(&level, &Observable::one()).unwrap() - 1.0).abs() < 1e-10);
            assert!(trace_gap(&level, &obs(&level, "x3")).unwrap().abs() < 1e-10);
        }
        let mut gaps = Vec::new();
        for m in [8, 16, 32] {
            let level = sphere_level(m);
            let gap = trace_gap(&level, &obs(&level, "x3^2")).unwrap();
            let oracle = (0..=m).map(|k| x3sq_diag(m, k)).sum::<f64>() - m as f64 / 3.0;
            assert!((gap - oracle).abs() < 1e-9);
            assert!(gap.abs() <= 1.0);
            gaps.push(gap);
        }
        assert!((gaps[2] - gaps[1]).abs() < (gaps[1] - gaps[0]).abs());
        let level = sphere_level(2);
        assert!(matches!(trace_gap(&level, &obs(&level, "x1 + i*x2")), Err(OperatorsError::NotReal(_))));
    }

    #[test]
    fn spectral_measure_examples() {
        for m in [4, 9] {
            let level = sphere_level(m);
            let g = spectral_measure_gap(&level, &obs(&level, "x3"), &|_| 1.0).unwrap();
            assert!((g - 1.0 / m as f64).abs() < 1e-10);
            assert!(spectral_measure_gap(&level, &obs(&level, "x3"), &|l| l).unwrap() < 1e-10);
        }
        let level = sphere_level(32);
        let gap = spectral_measure_gap(&level, &obs(&level, "x3"), &|l| l * l).unwrap();
        let closed = (0..=32).map(|k| ((2.0 * k as f64 - 32.0) / 34.0).powi(2)).sum::<f64>() / 32.0;
        assert!((gap - (closed - 1.0 / 3.0).abs()).abs() < 1e-10);
        assert!(gap <= 0.05);
    }

    #[test]
    fn adjoint_of_complex_symbol() {
        for model in [KahlerModel::deformed_sphere(0.25).unwrap(), KahlerModel::round_sphere()] {
            let level = build_level(&model, 11, Resolution::Auto).unwrap();
            let f = parse_observable(&model, "x1 + i*x2").unwrap();
            let t = toeplitz(&level, &f);
            let tbar = toeplitz(&level, &f.conj());
            assert!(t.matrix.adjoint().max_abs_diff(&tbar.matrix) <= 1e-10 * t.matrix.max_abs().max(1.0));
        }
    }

    #[test]
    fn real_symbols_are_hermitian() {
        let model = KahlerModel::deformed_sphere(-0.2).unwrap();
        let level = build_level(&model, 20, Resolution::Auto).unwrap();
        for f in model.builtin_observables() {
            let t = toeplitz(&level, &f);
            assert!(t.hermiticity_defect <= 1e-10 * t.matrix.max_abs().max(1e-300));
        }
    }

    #[test]
    fn norm_sandwich_with_uniform_constant() {
        for m in [4, 8, 16, 32, 64] {
            let level = sphere_level(m);
            for name in ["x1", "x3", "x3^2"] {
                let f = obs(&level, name);
                let sup = sup_norm(level.model(), &f, level.grid());
                let n = op_norm(&toeplitz(&level, &f)).unwrap();
                assert!(n <= sup + 1e-9, "{name} m={m}");
                assert!(n >= sup - 4.0 / m as f64, "{name} m={m}");
            }
        }
    }

    #[test]
    fn positivity_of_nonnegative_symbols() {
        let model = KahlerModel::deformed_sphere(0.1).unwrap();
        let level = build_level(&model, 15, Resolution::Auto).unwrap();
        for expr in ["x3^2", "(x1 + 1)^2", "1 - x3", "x1^2 * x2^2"] {
            let ev = eigenvalues(&toeplitz(&level, &parse_observable(&model, expr).unwrap())).unwrap();
            assert!(ev[0] >= -1e-10, "{expr}");
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn linearity(a in -3.0f64..3.0, b in -3.0f64..3.0, ia in 0usize..24, ib in 0usize..24) {
                let model = KahlerModel::round_sphere();
                let level = build_level(&model, 6, Resolution::Auto).unwrap();
                let obs = model.builtin_observables();
                let (f, g) = (&obs[ia], &obs[ib]);
                let comb = f.scale(Complex64::new(a, 0.0)).add(&g.scale(Complex64::new(b, 0.0)));
                let mut lin = toeplitz(&level, f).matrix.scale_real(a);
                lin.add_assign_scaled(&toeplitz(&level, g).matrix, Complex64::new(b, 0.0));
                prop_assert!(toeplitz(&level, &comb).matrix.max_abs_diff(&lin) <= 1e-12 * (1.0 + a.abs() + b.abs()));
            }
        }
    }
}
