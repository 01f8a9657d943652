use std::f64::consts::PI;

use num_complex::Complex64;

/// Half-width of the lattice window around the Gaussian centre:
/// `⌈sqrt(40/(π m Im τ))⌉ + 2`, which puts the neglected tail below `e^{-40}`.
pub(crate) fn theta_cutoff(m: usize, tau_im: f64) -> i64 {
    (40.0 / (PI * m as f64 * tau_im)).sqrt().ceil() as i64 + 2
}

/// Unit-frame values of the level-`m` theta basis at a point `z` of the
/// covering plane:
///
/// `η_k(z) = Σ_n exp(πiτm ν² + 2πi m ν z − π m (Im z)²/Im τ)`, `ν = n + k/m`.
///
/// Each term has modulus `exp(−π m Im τ (ν + Im z/Im τ)²)`, so the sum is taken
/// over a window centred on `ν = −Im z/Im τ`. This keeps the evaluation valid
/// for any lift of the point.
pub(crate) fn theta_row(m: usize, tau: Complex64, z: Complex64) -> Vec<Complex64> {
    let mf = m as f64;
    let b = z.im / tau.im;
    let ncut = theta_cutoff(m, tau.im);
    let i = Complex64::new(0.0, 1.0);
    let frame = -PI * mf * z.im * z.im / tau.im;
    (0..m)
        .map(|k| {
            let shift = k as f64 / mf;
            let centre = (-b - shift).round() as i64;
            let mut acc = Complex64::new(0.0, 0.0);
            for n in (centre - ncut)..=(centre + ncut) {
                let nu = n as f64 + shift;
                let expo = PI * i * tau * mf * nu * nu + 2.0 * PI * i * mf * nu * z + frame;
                acc += expo.exp();
            }
            acc
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_tail_is_negligible() {
        for m in [1, 2, 5, 32] {
            for tau_im in [0.2, 1.0, 3.0] {
                let n = theta_cutoff(m, tau_im) as f64 - 2.0;
                assert!((-PI * m as f64 * tau_im * n * n).exp() < 1e-16);
            }
        }
    }

    #[test]
    fn lifted_points_agree_in_modulus() {
        let tau = Complex64::new(0.3, 0.9);
        let z = Complex64::new(0.27, 0.0) + 0.61 * tau;
        for m in [1, 3, 7] {
            let base = theta_row(m, tau, z);
            for lift in [z + 1.0, z + tau, z - tau + 2.0, z + 3.0 * tau] {
                let other = theta_row(m, tau, lift);
                for (a, b) in base.iter().zip(&other) {
                    assert!((a.norm_sqr() - b.norm_sqr()).abs() < 1e-12, "m={m}");
                }
            }
        }
    }
}
