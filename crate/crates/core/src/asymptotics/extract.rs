use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{richardson_fit_complex, AsymptoticsError};
use crate::coherent::{coherent_vector, symbol_of};
use crate::exec;
use crate::geometry::{ChartPoint, Observable};
use crate::hilbert::QuantumLevel;
use crate::numerics::{spectral_norm, ComplexMatrix};
use crate::operators::{toeplitz, toeplitz_from_values};

/// Extraction order for `C₁`.
pub const C1_ORDER: usize = 2;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PointC1 {
    pub pt: ChartPoint,
    /// Extrapolated `C₁(f, g)(pt)`.
    pub value: Complex64,
    /// Fit residual of the `C₁` extraction.
    pub residual: f64,
    /// Extrapolated leading coefficient of `σ(T_f T_g)(pt)`.
    pub c0_product: Complex64,
    /// `f(pt)·g(pt)`.
    pub fg: Complex64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct C1Extraction {
    pub f: String,
    pub g: String,
    pub ms: Vec<usize>,
    pub points: Vec<PointC1>,
    /// `[point][level]` covariant symbols of `m(T_f T_g − T_{fg})` and
    /// `T_f T_g`.
    #[serde(skip)]
    table: Vec<Vec<(Complex64, Complex64)>>,
}

impl C1Extraction {
    /// `max |c0_product − fg| / max(|fg|, 1)` over the points.
    pub fn c0_error(&self) -> f64 {
        self.points.iter().map(|p| (p.c0_product - p.fg).norm() / p.fg.norm().max(1.0)).fold(0.0, f64::max)
    }

    /// Re-extracts `C₁` from the levels selected by `keep` (indices into `ms`).
    pub fn refit(&self, keep: &[usize]) -> Result<Vec<Complex64>, AsymptoticsError> {
        self.table
            .iter()
            .map(|row| {
                let d: Vec<(usize, Complex64)> = keep.iter().map(|&i| (self.ms[i], row[i].0)).collect();
                Ok(richardson_fit_complex(&d, C1_ORDER)?.0[0])
            })
            .collect()
    }

    /// Largest ratio `|C₁(subset) − C₁(full)| / residual(full)` over all
    /// sub-ladders with at least `min_levels` levels and all points.
    pub fn ladder_consistency(&self, min_levels: usize) -> Result<f64, AsymptoticsError> {
        let n = self.ms.len();
        let mut worst = 0.0f64;
        for mask in 1u32..(1 << n) {
            if (mask.count_ones() as usize) < min_levels || mask.count_ones() as usize == n {
                continue;
            }
            let keep: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            for (v, p) in self.refit(&keep)?.iter().zip(&self.points) {
                worst = worst.max((v - p.value).norm() / p.residual);
            }
        }
        Ok(worst)
    }
}

/// Per-level matrices `m(T_f T_g − T_{fg})` and `T_f T_g`.
fn product_matrices(levels: &[QuantumLevel], f: &Observable, g: &Observable) -> Vec<(ComplexMatrix, ComplexMatrix)> {
    let fg = f.mul(g);
    exec::map(levels, |lv| {
        let p = toeplitz(lv, f).matrix.matmul(&toeplitz(lv, g).matrix);
        let d = (&p - &toeplitz(lv, &fg).matrix).scale_real(lv.m() as f64);
        (d, p)
    })
}

fn symbol_row(
    levels: &[QuantumLevel],
    mats: &[(ComplexMatrix, ComplexMatrix)],
    pt: &ChartPoint,
) -> Result<Vec<(Complex64, Complex64)>, AsymptoticsError> {
    levels
        .iter()
        .zip(mats)
        .map(|(lv, (dm, pm))| {
            let cv = coherent_vector(lv, pt)?;
            Ok((symbol_of(&cv, dm)?, symbol_of(&cv, pm)?))
        })
        .collect()
}

fn fit_row(ms: &[usize], row: &[(Complex64, Complex64)]) -> Result<(Complex64, f64, Complex64), AsymptoticsError> {
    let d: Vec<(usize, Complex64)> = ms.iter().zip(row).map(|(&m, s)| (m, s.0)).collect();
    let p: Vec<(usize, Complex64)> = ms.iter().zip(row).map(|(&m, s)| (m, s.1)).collect();
    let (c1, residual) = richardson_fit_complex(&d, C1_ORDER)?;
    let (c0, _) = richardson_fit_complex(&p, C1_ORDER)?;
    Ok((c1[0], residual, c0[0]))
}

/// `C₁(f, g)` at `pts` from covariant symbols of `m(T_f T_g − T_{fg})` over
/// the ladder of `levels`, extrapolated to `m → ∞`.
pub fn extract_c1(
    levels: &[QuantumLevel],
    f: &Observable,
    g: &Observable,
    pts: &[ChartPoint],
) -> Result<C1Extraction, AsymptoticsError> {
    let ms: Vec<usize> = levels.iter().map(|l| l.m()).collect();
    let mats = product_matrices(levels, f, g);
    let table: Vec<Vec<(Complex64, Complex64)>> =
        exec::map(pts, |pt| symbol_row(levels, &mats, pt)).into_iter().collect::<Result<_, _>>()?;
    let points = pts
        .iter()
        .zip(&table)
        .map(|(pt, row)| {
            let (value, residual, c0_product) = fit_row(&ms, row)?;
            Ok(PointC1 { pt: *pt, value, residual, c0_product, fg: f.value(pt) * g.value(pt) })
        })
        .collect::<Result<_, AsymptoticsError>>()?;
    Ok(C1Extraction { f: f.name().to_string(), g: g.name().to_string(), ms, points, table })
}

/// Order-two remainder `‖T_f T_g − T_{fg} − (1/m) T_{Ĉ₁}‖` at each level of
/// `targets`, with `Ĉ₁` extracted over `ladder` directly at the target
/// level's grid nodes.
pub fn star_remainder(
    ladder: &[QuantumLevel],
    targets: &[&QuantumLevel],
    f: &Observable,
    g: &Observable,
) -> Result<Vec<(usize, f64)>, AsymptoticsError> {
    let ms: Vec<usize> = ladder.iter().map(|l| l.m()).collect();
    let mats = product_matrices(ladder, f, g);
    let mut out = Vec::with_capacity(targets.len());
    for lv in targets {
        let c1: Vec<Complex64> = exec::map(&lv.grid().points, |pt| {
            let row = symbol_row(ladder, &mats, pt)?;
            Ok(fit_row(&ms, &row)?.0)
        })
        .into_iter()
        .collect::<Result<_, AsymptoticsError>>()?;
        let tc1 = toeplitz_from_values(lv, "c1", &c1);
        let p = toeplitz(lv, f).matrix.matmul(&toeplitz(lv, g).matrix);
        let mut r = &p - &toeplitz(lv, &f.mul(g)).matrix;
        r.add_assign_scaled(&tc1.matrix, Complex64::new(-1.0 / lv.m() as f64, 0.0));
        out.push((lv.m(), spectral_norm(&r)?));
    }
    Ok(out)
}
