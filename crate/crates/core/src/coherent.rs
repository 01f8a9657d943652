//! Coherent vectors, Bergman kernel functions, covariant symbols, the Berezin
//! transform and the Fubini–Study pullback density.
//!
//! Coherent vectors are held only as coefficient vectors in the orthonormal
//! basis of a level, so every exposed quantity is independent of the unit
//! frame used to evaluate sections.

use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec;
use crate::geometry::{mixed_derivative_fd, ChartPoint, KahlerModel, Observable};
use crate::hilbert::{build_level, QuantumLevel, Resolution};
use crate::numerics::{tree_sum, ComplexMatrix};
use crate::operators::toeplitz;

/// Finite-difference half-width for `∂∂̄ log u_m`.
pub const FS_STEP: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoherentError {
    #[error("coherent vector vanishes at {0:?} (u = {1:e})")]
    DegenerateFrame(ChartPoint, f64),
    #[error("expected a {expected}x{expected} matrix, got {rows}x{cols}")]
    DimensionMismatch { expected: usize, rows: usize, cols: usize },
    #[error("finite-difference stencil at {0:?} leaves the region where u_m is representable")]
    StencilOutOfDomain(ChartPoint),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoherentVector {
    pub pt: ChartPoint,
    /// `coeffs[j] = conj(u_j(pt))` in the unit frame.
    pub coeffs: Vec<Complex64>,
    /// `Σ |coeffs_j|²`, equal to `u_m(pt)`.
    pub u: f64,
}

fn from_row(pt: ChartPoint, row: &[Complex64]) -> Result<CoherentVector, CoherentError> {
    let coeffs: Vec<Complex64> = row.iter().map(|v| v.conj()).collect();
    let u: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
    if !(u >= 1e-280) {
        return Err(CoherentError::DegenerateFrame(pt, u));
    }
    Ok(CoherentVector { pt, coeffs, u })
}

pub fn coherent_vector(level: &QuantumLevel, pt: &ChartPoint) -> Result<CoherentVector, CoherentError> {
    from_row(*pt, &level.ortho_row(pt))
}

/// Coherent vector at grid node `i`, taken from the stored basis values.
pub fn coherent_vector_at_node(level: &QuantumLevel, i: usize) -> Result<CoherentVector, CoherentError> {
    from_row(level.grid().points[i], level.ortho_evals().row(i))
}

/// `u_m(pt) = Σ_j |u_j(pt)|²`.
pub fn bergman_diag(level: &QuantumLevel, pt: &ChartPoint) -> f64 {
    level.ortho_row(pt).iter().map(|v| v.norm_sqr()).sum()
}

/// `B_m(x, y) = Σ_j u_j(x) conj(u_j(y))` in the unit frames at `x` and `y`.
pub fn bergman_kernel(level: &QuantumLevel, x: &ChartPoint, y: &ChartPoint) -> Complex64 {
    let (rx, ry) = (level.ortho_row(x), level.ortho_row(y));
    rx.iter().zip(&ry).map(|(a, b)| a * b.conj()).sum()
}

/// `v_m(x, y) = |B_m(x, y)|²`.
pub fn bergman_two_point(level: &QuantumLevel, x: &ChartPoint, y: &ChartPoint) -> f64 {
    bergman_kernel(level, x, y).norm_sqr()
}

/// `(c* A c)/(c* c)` for the coherent vector `c`.
pub fn symbol_of(cv: &CoherentVector, a: &ComplexMatrix) -> Result<Complex64, CoherentError> {
    let n = cv.coeffs.len();
    if a.rows() != n || a.cols() != n {
        return Err(CoherentError::DimensionMismatch { expected: n, rows: a.rows(), cols: a.cols() });
    }
    let ac = a.matvec(&cv.coeffs);
    let num: Complex64 = cv.coeffs.iter().zip(&ac).map(|(c, x)| c.conj() * x).sum();
    Ok(num / cv.u)
}

/// Covariant Berezin symbol `σ(A)(pt)`.
pub fn covariant_symbol(level: &QuantumLevel, a: &ComplexMatrix, pt: &ChartPoint) -> Result<Complex64, CoherentError> {
    symbol_of(&coherent_vector(level, pt)?, a)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BerezinRoute {
    /// `σ(T_f)(x)`.
    Symbolic,
    /// `(1/u_m(x)) ∫ v_m(x, y) f(y) Ω(y)` by quadrature.
    Integral,
}

/// Berezin transform `I^(m) f` at the given points.
pub fn berezin_transform(
    level: &QuantumLevel,
    f: &Observable,
    pts: &[ChartPoint],
    route: BerezinRoute,
) -> Result<Vec<Complex64>, CoherentError> {
    match route {
        BerezinRoute::Symbolic => {
            let t = toeplitz(level, f);
            exec::map(pts, |pt| covariant_symbol(level, &t.matrix, pt)).into_iter().collect()
        }
        BerezinRoute::Integral => {
            let grid = level.grid();
            let fvals = exec::map(&grid.points, |p| f.value(p));
            let u_nodes = level.ortho_evals();
            exec::map(pts, |x| {
                let cv = coherent_vector(level, x)?;
                let terms: Vec<Complex64> = (0..grid.len())
                    .map(|i| {
                        let b: Complex64 = cv.coeffs.iter().zip(u_nodes.row(i)).map(|(c, u)| c * u).sum();
                        grid.weights[i] * b.norm_sqr() * fvals[i]
                    })
                    .collect();
                Ok(tree_sum(&terms) / cv.u)
            })
            .into_iter()
            .collect()
        }
    }
}

fn log_u_fd(level: &QuantumLevel, pt: &ChartPoint, extra: impl Fn(&ChartPoint) -> f64) -> Result<f64, CoherentError> {
    let bad = std::cell::Cell::new(false);
    let d = mixed_derivative_fd(
        |q| {
            let u = bergman_diag(level, q);
            if !(u > 1e-280 && u.is_finite()) {
                bad.set(true);
            }
            u.ln() + extra(q)
        },
        pt,
        FS_STEP,
    );
    if bad.get() || !d.is_finite() {
        return Err(CoherentError::StencilOutOfDomain(*pt));
    }
    Ok(d)
}

/// `∂∂̄ log u_m` by the 5-point stencil, without sign.
fn ddbar_log_u(level: &QuantumLevel, pt: &ChartPoint) -> Result<f64, CoherentError> {
    log_u_fd(level, pt, |_| 0.0)
}

/// Direct pullback of the Fubini–Study form, `∂∂̄ log Σ_j |ŝ_j|²` with `ŝ_j` the
/// orthonormal sections in the holomorphic chart frame. Used to calibrate
/// the sign of the correction term.
pub fn fs_pullback_direct(level: &QuantumLevel, pt: &ChartPoint) -> Result<f64, CoherentError> {
    let m = level.m() as f64;
    let model = *level.model();
    // |ŝ_j|² = |u_j|² exp(mΦ)
    log_u_fd(level, pt, move |q| m * model.potential(q))
}

/// Sign `s` in `m g + s ∂∂̄ log u_m`, calibrated once per process on
/// `DeformedSphere(0.1)` at `m = 16`: among the signs giving a positive density
/// at the probe points, the one closest to the direct pullback wins.
pub fn fs_sign() -> f64 {
    static SIGN: OnceLock<f64> = OnceLock::new();
    *SIGN.get_or_init(|| {
        let model = KahlerModel::deformed_sphere(0.1).expect("valid epsilon");
        let level = build_level(&model, 16, Resolution::Auto).expect("level builds");
        let probes: Vec<ChartPoint> = (0..6).map(|i| model.point_at(-0.8 + 0.3 * i as f64, 0.7 * i as f64)).collect();
        let mut best = (f64::INFINITY, 1.0);
        for s in [1.0, -1.0] {
            let mut positive = true;
            let mut err = 0.0f64;
            for pt in &probes {
                let corr = ddbar_log_u(&level, pt).expect("probe inside domain");
                let dens = 16.0 * model.metric_density(pt) + s * corr;
                positive &= dens > 0.0;
                err = err.max((dens - fs_pullback_direct(&level, pt).expect("probe inside domain")).abs());
            }
            if positive && err < best.0 {
                best = (err, s);
            }
        }
        best.1
    })
}

/// Correction term `s ∂∂̄ log u_m(pt)` of the pullback density.
pub fn fs_correction(level: &QuantumLevel, pt: &ChartPoint) -> Result<f64, CoherentError> {
    Ok(fs_sign() * ddbar_log_u(level, pt)?)
}

/// Pullback density `m g(pt) + s ∂∂̄ log u_m(pt)`.
pub fn fs_pullback_density(level: &QuantumLevel, pt: &ChartPoint) -> Result<f64, CoherentError> {
    Ok(level.m() as f64 * level.model().metric_density(pt) + fs_correction(level, pt)?)
}
