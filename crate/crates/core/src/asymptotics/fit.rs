use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::AsymptoticsError;
use crate::numerics::{hermitian_eig, ComplexMatrix};

/// Largest accepted 2-norm condition number of the Vandermonde matrix.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitForm {
    /// `value(m) ≈ Σ_{j≤J} c_j m^{-j}`.
    InverseSeries,
    /// `value(m) ≈ c_0 m^{-rate}`.
    PowerLaw,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticFit {
    pub form: FitForm,
    pub samples: Vec<(usize, f64)>,
    pub order: usize,
    pub coefficients: Vec<f64>,
    /// `max |value(m) − fitted(m)|` over the samples.
    pub residual: f64,
    /// Log-log slope, present when every sample is positive.
    pub rate: Option<f64>,
    pub condition: f64,
}

impl AsymptoticFit {
    pub fn fitted(&self, m: usize) -> f64 {
        let x = 1.0 / m as f64;
        match self.form {
            FitForm::InverseSeries => self.coefficients.iter().rev().fold(0.0, |acc, c| acc * x + c),
            FitForm::PowerLaw => self.coefficients[0] * x.powf(self.rate.unwrap_or(0.0)),
        }
    }

    pub fn c0(&self) -> f64 {
        self.coefficients[0]
    }
}

fn check_ladder(ms: &[usize], needed: usize) -> Result<(), AsymptoticsError> {
    if ms.len() < needed {
        return Err(AsymptoticsError::TooFewSamples { needed, got: ms.len() });
    }
    if ms[0] == 0 || ms.windows(2).any(|w| w[1] <= w[0]) {
        return Err(AsymptoticsError::LadderNotIncreasing);
    }
    Ok(())
}

/// Least-squares coefficients of `Σ_j c_j m^{-j}` for several right-hand
/// sides at once, by Householder QR of the Vandermonde matrix in `1/m`.
/// Returns the coefficient vectors and the condition number.
#[allow(clippy::needless_range_loop)]
fn vandermonde_lsq(ms: &[usize], rhs: &[Vec<f64>], order: usize) -> Result<(Vec<Vec<f64>>, f64), AsymptoticsError> {
    let n = ms.len();
    let p = order + 1;
    let mut a: Vec<Vec<f64>> = ms.iter().map(|&m| (0..p).map(|j| (m as f64).powi(-(j as i32))).collect()).collect();

    let ata = ComplexMatrix::from_fn(p, p, |i, j| Complex64::new((0..n).map(|r| a[r][i] * a[r][j]).sum(), 0.0));
    let ev =
        hermitian_eig(&ata).map_err(|_| AsymptoticsError::IllConditioned { condition: f64::INFINITY })?.eigenvalues;
    let condition = if ev[0] > 0.0 { (ev[p - 1] / ev[0]).sqrt() } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(AsymptoticsError::IllConditioned { condition });
    }

    let mut b: Vec<Vec<f64>> = rhs.to_vec();
    for k in 0..p {
        let norm = (k..n).map(|r| a[r][k] * a[r][k]).sum::<f64>().sqrt();
        let alpha = if a[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..n).map(|r| a[r][k]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        for col in k..p {
            let s = 2.0 * (k..n).map(|r| v[r - k] * a[r][col]).sum::<f64>() / vnorm2;
            for r in k..n {
                a[r][col] -= s * v[r - k];
            }
        }
        for y in b.iter_mut() {
            let s = 2.0 * (k..n).map(|r| v[r - k] * y[r]).sum::<f64>() / vnorm2;
            for r in k..n {
                y[r] -= s * v[r - k];
            }
        }
    }
    let coeffs = b
        .iter()
        .map(|y| {
            let mut c = vec![0.0; p];
            for i in (0..p).rev() {
                let s: f64 = ((i + 1)..p).map(|j| a[i][j] * c[j]).sum();
                c[i] = (y[i] - s) / a[i][i];
            }
            c
        })
        .collect();
    Ok((coeffs, condition))
}

/// Least-squares fit of `value(m) ≈ Σ_{j≤J} c_j m^{-j}`.
pub fn richardson_fit(samples: &[(usize, f64)], order: usize) -> Result<AsymptoticFit, AsymptoticsError> {
    let ms: Vec<usize> = samples.iter().map(|s| s.0).collect();
    check_ladder(&ms, order + 2)?;
    let ys: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let (mut coeffs, condition) = vandermonde_lsq(&ms, &[ys], order)?;
    let mut fit = AsymptoticFit {
        form: FitForm::InverseSeries,
        samples: samples.to_vec(),
        order,
        coefficients: coeffs.remove(0),
        residual: 0.0,
        rate: decay_rate(samples).ok(),
        condition,
    };
    fit.residual = samples.iter().map(|&(m, v)| (v - fit.fitted(m)).abs()).fold(0.0, f64::max);
    Ok(fit)
}

/// Fit of complex samples, real and imaginary parts separately. Returns the
/// coefficients and the max modulus residual.
pub fn richardson_fit_complex(
    samples: &[(usize, Complex64)],
    order: usize,
) -> Result<(Vec<Complex64>, f64), AsymptoticsError> {
    let ms: Vec<usize> = samples.iter().map(|s| s.0).collect();
    check_ladder(&ms, order + 2)?;
    let re: Vec<f64> = samples.iter().map(|s| s.1.re).collect();
    let im: Vec<f64> = samples.iter().map(|s| s.1.im).collect();
    let (c, _) = vandermonde_lsq(&ms, &[re, im], order)?;
    let coeffs: Vec<Complex64> = c[0].iter().zip(&c[1]).map(|(a, b)| Complex64::new(*a, *b)).collect();
    let residual = samples
        .iter()
        .map(|&(m, v)| {
            let x = 1.0 / m as f64;
            let f = coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * x + c);
            (v - f).norm()
        })
        .fold(0.0, f64::max);
    Ok((coeffs, residual))
}

/// Slope of the least-squares line through `(log(1/m), log value)`.
pub fn decay_rate(samples: &[(usize, f64)]) -> Result<f64, AsymptoticsError> {
    let ms: Vec<usize> = samples.iter().map(|s| s.0).collect();
    check_ladder(&ms, 2)?;
    if let Some(&(m, value)) = samples.iter().find(|s| !(s.1 > 0.0)) {
        return Err(AsymptoticsError::NonPositiveSample { m, value });
    }
    let xs: Vec<f64> = samples.iter().map(|s| -(s.0 as f64).ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.1.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}

/// `value(m) ≈ A m^{-rate}` with `rate` from [`decay_rate`].
pub fn power_law_fit(samples: &[(usize, f64)]) -> Result<AsymptoticFit, AsymptoticsError> {
    let rate = decay_rate(samples)?;
    let n = samples.len() as f64;
    let log_a = samples.iter().map(|&(m, v)| v.ln() + rate * (m as f64).ln()).sum::<f64>() / n;
    let mut fit = AsymptoticFit {
        form: FitForm::PowerLaw,
        samples: samples.to_vec(),
        order: 1,
        coefficients: vec![log_a.exp()],
        residual: 0.0,
        rate: Some(rate),
        condition: 1.0,
    };
    fit.residual = samples.iter().map(|&(m, v)| (v - fit.fitted(m)).abs()).fold(0.0, f64::max);
    Ok(fit)
}

/// Local exponent `log(v_a/v_b)/log(m_b/m_a)` between the last two samples.
pub fn tail_rate(samples: &[(usize, f64)]) -> Option<f64> {
    let [.., (ma, va), (mb, vb)] = samples else { return None };
    (*va > 0.0 && *vb > 0.0).then(|| (va / vb).ln() / (*mb as f64 / *ma as f64).ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(ms: &[usize], f: impl Fn(f64) -> f64) -> Vec<(usize, f64)> {
        ms.iter().map(|&m| (m, f(m as f64))).collect()
    }

    #[test]
    fn inverse_shift_series() {
        // 1/(m+2) on a short ladder is far from its series; the
        // least-squares answer is pinned by an independent normal-equation solve
        let fit = richardson_fit(&sample(&[4, 8, 16, 32, 64], |m| 1.0 / (m + 2.0)), 2).unwrap();
        let expect = [0.00138758, 0.92343399, -1.05031443];
        for (c, e) in fit.coefficients.iter().zip(expect) {
            assert!((c - e).abs() < 1e-7, "{:?}", fit.coefficients);
        }
        assert!((fit.condition - 196.0).abs() < 1.0, "{}", fit.condition);
    }

    #[test]
    fn constant_samples() {
        let fit = richardson_fit(&sample(&[4, 8, 16, 32], |_| 7.0), 2).unwrap();
        assert!((fit.c0() - 7.0).abs() < 1e-12);
        assert!(fit.coefficients[1..].iter().all(|c| c.abs() < 1e-10));
    }

    #[test]
    fn rates() {
        let fit = richardson_fit(&sample(&[4, 8, 16, 32, 64], |m| 3.0 / m), 2).unwrap();
        assert!((fit.rate.unwrap() - 1.0).abs() < 0.05);
        assert!((decay_rate(&sample(&[8, 16, 32], |m| 1.0 / m)).unwrap() - 1.0).abs() < 1e-12);
        assert!((decay_rate(&sample(&[8, 16, 32, 64], |m| 5.0 / (m * m))).unwrap() - 2.0).abs() < 0.01);
        let p = power_law_fit(&sample(&[8, 16, 32, 64], |m| 5.0 / (m * m))).unwrap();
        assert!((p.fitted(20) - 5.0 / 400.0).abs() < 1e-12);
        assert!((tail_rate(&sample(&[8, 16, 32], |m| 2.0 / m)).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert!(matches!(decay_rate(&[(8, 1.0), (16, 0.0)]), Err(AsymptoticsError::NonPositiveSample { m: 16, .. })));
        assert!(matches!(
            richardson_fit(&[(8, 1.0), (16, 0.5), (32, 0.1)], 2),
            Err(AsymptoticsError::TooFewSamples { .. })
        ));
        assert!(matches!(
            richardson_fit(&[(8, 1.0), (8, 0.5), (32, 0.1)], 1),
            Err(AsymptoticsError::LadderNotIncreasing)
        ));
        let close = sample(&[1000, 1001, 1002, 1003, 1004, 1005], |m| 1.0 / m);
        assert!(matches!(richardson_fit(&close, 3), Err(AsymptoticsError::IllConditioned { .. })));
    }

    #[test]
    fn complex_fit() {
        let s: Vec<(usize, Complex64)> =
            [8usize, 12, 16, 24].iter().map(|&m| (m, Complex64::new(1.0 - 2.0 / m as f64, 3.0 / m as f64))).collect();
        let (c, r) = richardson_fit_complex(&s, 2).unwrap();
        assert!((c[0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert!((c[1] - Complex64::new(-2.0, 3.0)).norm() < 1e-10);
        assert!(r < 1e-12);
    }

    proptest! {
        #[test]
        fn exact_on_matching_order(c in prop::collection::vec(-5.0f64..5.0, 3), extra in 0usize..3) {
            let ms = [8usize, 12, 16, 24, 32, 48, 64];
            let s = sample(&ms[..4 + extra], |m| c[0] + c[1] / m + c[2] / (m * m));
            let fit = richardson_fit(&s, 2).unwrap();
            prop_assert!(fit.residual <= 1e-10);
            prop_assert!((fit.c0() - c[0]).abs() <= 1e-9);
        }
    }
}
