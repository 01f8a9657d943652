//! The quantum Hilbert space `Γ_hol(M, L^m)` at a level `m`.
//!
//! A level stores the raw section values on a quadrature grid, their Gram
//! matrix under `⟨φ, ψ⟩ = ∫ h(φ, ψ) Ω`, its Cholesky factor and the values of
//! the resulting orthonormal basis.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec;
use crate::geometry::{ChartPoint, GeometryError, KahlerModel, QuadratureGrid};
use crate::numerics::{cholesky, solve_conj_lower, weighted_gram, ComplexMatrix, NumericsError};

/// Allowed scaled Gram change under the resolution audit.
pub const GRAM_AUDIT_TOL: f64 = 1e-9;
/// Allowed orthonormality defect `‖U* W U − I‖_max`.
pub const ORTHONORMALITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HilbertError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("expected {expected} coefficients, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Quadrature resolution for a level.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resolution {
    /// `max(24, 2m + 16)` on the sphere, `max(24, 4m)` on the torus.
    #[default]
    Auto,
    Fixed(usize),
}

impl Resolution {
    pub fn n_res(self, model: &KahlerModel, m: usize) -> usize {
        match self {
            Resolution::Fixed(n) => n,
            Resolution::Auto if model.is_sphere() => (2 * m + 16).max(24),
            Resolution::Auto => (4 * m).max(24),
        }
    }
}

/// Quadrature fidelity record of a level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolutionAudit {
    pub n_res: usize,
    /// Resolution of the comparison grid (50% finer), if the audit ran.
    pub audit_n_res: Option<usize>,
    /// `max_jk |G_jk − G'_jk| / sqrt(G_jj G_kk)` between the two grids.
    pub max_gram_change: Option<f64>,
    /// Whether the first Cholesky attempt failed and the grid was doubled.
    pub retried: bool,
    pub orthonormality_defect: f64,
}

impl ResolutionAudit {
    pub fn passed(&self) -> bool {
        self.max_gram_change.is_none_or(|d| d <= GRAM_AUDIT_TOL) && self.orthonormality_defect <= ORTHONORMALITY_TOL
    }
}

#[derive(Clone, Debug)]
pub struct QuantumLevel {
    model: KahlerModel,
    m: usize,
    dim: usize,
    grid: QuadratureGrid,
    raw_evals: ComplexMatrix,
    gram: ComplexMatrix,
    chol: ComplexMatrix,
    ortho_evals: ComplexMatrix,
    audit: ResolutionAudit,
}

fn raw_matrix(model: &KahlerModel, m: usize, grid: &QuadratureGrid) -> ComplexMatrix {
    let rows = exec::map(&grid.points, |pt| model.basis_row(m, pt));
    let dim = model.dim(m);
    ComplexMatrix::from_row_major(grid.len(), dim, rows.into_iter().flatten().collect())
}

fn gram_of(raw: &ComplexMatrix, grid: &QuadratureGrid) -> ComplexMatrix {
    let w: Vec<Complex64> = grid.weights.iter().map(|&w| Complex64::new(w, 0.0)).collect();
    weighted_gram(raw, &w).hermitian_part()
}

fn scaled_change(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let n = a.rows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for k in 0..n {
            let scale = (a[(j, j)].re * a[(k, k)].re).sqrt();
            worst = worst.max((a[(j, k)] - b[(j, k)]).norm() / scale);
        }
    }
    worst
}

/// Builds level `m` of `model`.
///
/// If the Gram matrix fails to factor the grid is doubled once. The stored
/// audit compares the Gram matrix against a 50% finer grid.
pub fn build_level(model: &KahlerModel, m: usize, resolution: Resolution) -> Result<QuantumLevel, HilbertError> {
    if m == 0 {
        return Err(GeometryError::ZeroLevel.into());
    }
    let n_res = resolution.n_res(model, m);
    let attempt = |n: usize| -> Result<QuantumLevel, HilbertError> {
        let grid = model.quadrature_grid(n)?;
        let raw = raw_matrix(model, m, &grid);
        QuantumLevel::from_raw_evals(*model, m, grid, raw)
    };
    let (mut level, retried) = match attempt(n_res) {
        Ok(level) => (level, false),
        Err(HilbertError::Numerics(NumericsError::NotPositiveDefinite(_))) => (attempt(2 * n_res)?, true),
        Err(e) => return Err(e),
    };
    let fine_n = level.grid.n_res + level.grid.n_res.div_ceil(2);
    let fine_grid = model.quadrature_grid(fine_n)?;
    let fine_gram = gram_of(&raw_matrix(model, m, &fine_grid), &fine_grid);
    level.audit.audit_n_res = Some(fine_n);
    level.audit.max_gram_change = Some(scaled_change(&level.gram, &fine_gram));
    level.audit.retried = retried;
    Ok(level)
}

/// Builds several levels, in parallel across the ladder.
pub fn build_ladder(
    model: &KahlerModel,
    ms: &[usize],
    resolution: Resolution,
) -> Result<Vec<QuantumLevel>, HilbertError> {
    exec::map(ms, |&m| build_level(model, m, resolution)).into_iter().collect()
}

/// Memo of built levels keyed by model, level and resolution. Lookups are
/// locked; builds are not, so distinct levels build concurrently.
#[derive(Default)]
pub struct LevelCache {
    levels: Mutex<HashMap<(String, usize, Resolution), Arc<QuantumLevel>>>,
}

impl LevelCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_build(
        &self,
        model: &KahlerModel,
        m: usize,
        resolution: Resolution,
    ) -> Result<Arc<QuantumLevel>, HilbertError> {
        let key = (format!("{:?}", model.kind()), m, resolution);
        if let Some(level) = self.levels.lock().expect("cache lock").get(&key) {
            return Ok(Arc::clone(level));
        }
        let level = Arc::new(build_level(model, m, resolution)?);
        Ok(Arc::clone(self.levels.lock().expect("cache lock").entry(key).or_insert(level)))
    }

    pub fn len(&self) -> usize {
        self.levels.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl QuantumLevel {
    /// Assembles a level from given raw section values on `grid`. The
    /// resolution audit is left unset.
    pub fn from_raw_evals(
        model: KahlerModel,
        m: usize,
        grid: QuadratureGrid,
        raw_evals: ComplexMatrix,
    ) -> Result<Self, HilbertError> {
        let dim = model.dim(m);
        if raw_evals.cols() != dim || raw_evals.rows() != grid.len() {
            return Err(HilbertError::DimensionMismatch { expected: dim, got: raw_evals.cols() });
        }
        let gram = gram_of(&raw_evals, &grid);
        let chol = cholesky(&gram)?;
        let rows = exec::map_range(grid.len(), |i| solve_conj_lower(&chol, raw_evals.row(i)));
        let ortho_evals = ComplexMatrix::from_row_major(grid.len(), dim, rows.into_iter().flatten().collect());
        let mut level = Self {
            model,
            m,
            dim,
            audit: ResolutionAudit {
                n_res: grid.n_res,
                audit_n_res: None,
                max_gram_change: None,
                retried: false,
                orthonormality_defect: 0.0,
            },
            grid,
            raw_evals,
            gram,
            chol,
            ortho_evals,
        };
        level.audit.orthonormality_defect = level.orthonormality_defect();
        Ok(level)
    }

    pub fn model(&self) -> &KahlerModel {
        &self.model
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid(&self) -> &QuadratureGrid {
        &self.grid
    }

    pub fn raw_evals(&self) -> &ComplexMatrix {
        &self.raw_evals
    }

    pub fn gram(&self) -> &ComplexMatrix {
        &self.gram
    }

    pub fn chol(&self) -> &ComplexMatrix {
        &self.chol
    }

    pub fn ortho_evals(&self) -> &ComplexMatrix {
        &self.ortho_evals
    }

    pub fn audit(&self) -> &ResolutionAudit {
        &self.audit
    }

    /// `‖U* diag(w) U − I‖_max`.
    pub fn orthonormality_defect(&self) -> f64 {
        let u = self.weighted(&self.grid.weights.iter().map(|&w| Complex64::new(w, 0.0)).collect::<Vec<_>>());
        u.max_abs_diff(&ComplexMatrix::identity(self.dim))
    }

    /// `Σ_i c_i conj(U_ij) U_ik` for per-node weights `c`.
    pub(crate) fn weighted(&self, node_weights: &[Complex64]) -> ComplexMatrix {
        weighted_gram(&self.ortho_evals, node_weights)
    }

    /// Orthonormal basis values at an arbitrary point.
    pub fn ortho_row(&self, pt: &ChartPoint) -> Vec<Complex64> {
        solve_conj_lower(&self.chol, &self.model.basis_row(self.m, pt))
    }

    /// Unit-frame value of the section `Σ_j c_j u_j` at `pt`.
    pub fn section_eval(&self, coeffs: &[Complex64], pt: &ChartPoint) -> Result<Complex64, HilbertError> {
        self.check_dim(coeffs)?;
        Ok(self.ortho_row(pt).iter().zip(coeffs).map(|(u, c)| u * c).sum())
    }

    /// Values of `Σ_j c_j u_j` at every grid node.
    pub fn section_on_grid(&self, coeffs: &[Complex64]) -> Result<Vec<Complex64>, HilbertError> {
        self.check_dim(coeffs)?;
        Ok(self.ortho_evals.matvec(coeffs))
    }

    fn check_dim(&self, coeffs: &[Complex64]) -> Result<(), HilbertError> {
        if coeffs.len() != self.dim {
            return Err(HilbertError::DimensionMismatch { expected: self.dim, got: coeffs.len() });
        }
        Ok(())
    }
}
