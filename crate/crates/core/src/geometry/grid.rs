use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{ChartPoint, GeometryError, KahlerModel, ModelKind, Observable};
use crate::numerics::{gauss_legendre, periodic_trapezoid};

/// Product quadrature on `M`: `Σ w_i f(pt_i) ≈ ∫_M f Ω`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QuadratureGrid {
    pub points: Vec<ChartPoint>,
    pub weights: Vec<f64>,
    /// Natural parameters of each node, see [`KahlerModel::point_at`].
    pub params: Vec<(f64, f64)>,
    pub n_res: usize,
    /// Node spacing in each parameter direction, used for sup refinement.
    spacing: (f64, f64),
}

impl QuadratureGrid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        crate::numerics::tree_sum_real(&self.weights)
    }

    pub fn integrate(&self, f: &Observable) -> Complex64 {
        let terms: Vec<Complex64> = crate::exec::map_range(self.len(), |i| self.weights[i] * f.value(&self.points[i]));
        crate::numerics::tree_sum(&terms)
    }
}

impl KahlerModel {
    /// Quadrature grid at resolution `n_res >= 8`.
    ///
    /// Sphere: Gauss–Legendre in `u = (|z|²−1)/(|z|²+1)` times a `2·n_res`
    /// point trapezoid in `arg z`, all nodes in the southern chart. In these
    /// variables `Ω = ½(1 − 2ε u) du dφ`. Torus: `n_res × n_res` trapezoid in
    /// `(a, b)` with `Ω = 2π da db`.
    pub fn quadrature_grid(&self, n_res: usize) -> Result<QuadratureGrid, GeometryError> {
        if n_res < 8 {
            return Err(GeometryError::ResolutionTooLow(n_res));
        }
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let mut params = Vec::new();
        let spacing = match self.kind() {
            ModelKind::Torus { tau_re, tau_im } => {
                let tau = Complex64::new(tau_re, tau_im);
                let h = 1.0 / n_res as f64;
                let w = self.volume() * h * h;
                for i in 0..n_res {
                    for j in 0..n_res {
                        let (a, b) = (i as f64 * h, j as f64 * h);
                        points.push(ChartPoint::torus(Complex64::new(a, 0.0) + b * tau));
                        weights.push(w);
                        params.push((a, b));
                    }
                }
                (h, h)
            }
            _ => {
                let eps = self.epsilon();
                let gl = gauss_legendre(n_res).expect("n_res within range");
                let tr = periodic_trapezoid(2 * n_res).expect("n_res positive");
                for (u, wu) in gl.nodes.iter().zip(&gl.weights) {
                    let r = ((1.0 + u) / (1.0 - u)).sqrt();
                    for (phi, wphi) in tr.nodes.iter().zip(&tr.weights) {
                        points.push(ChartPoint::south(Complex64::from_polar(r, *phi)));
                        weights.push(0.5 * (1.0 - 2.0 * eps * u) * wu * wphi);
                        params.push((*u, *phi));
                    }
                }
                (2.0 / n_res as f64, tr.nodes[1] - tr.nodes[0])
            }
        };
        Ok(QuadratureGrid { points, weights, params, n_res, spacing })
    }
}

/// Approximate `sup_M |f|`: grid maximum followed by a shrinking 3×3
/// pattern search in the natural parameters around the best nodes.
pub fn sup_norm(model: &KahlerModel, f: &Observable, grid: &QuadratureGrid) -> f64 {
    let abs_at = |s: f64, t: f64| f.value(&model.point_at(s, t)).norm();
    let vals: Vec<f64> = crate::exec::map_range(grid.len(), |i| f.value(&grid.points[i]).norm());
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]).then(a.cmp(&b)));
    let mut best = vals.iter().copied().fold(0.0, f64::max);
    for &start in order.iter().take(8) {
        let (mut s, mut t) = grid.params[start];
        let mut cur = abs_at(s, t);
        let (mut hs, mut ht) = grid.spacing;
        while hs > 1e-12 || ht > 1e-12 {
            let mut moved = false;
            for ds in [-1.0, 0.0, 1.0] {
                for dt in [-1.0, 0.0, 1.0] {
                    let (cs, ct) = clamp_params(model, s + ds * hs, t + dt * ht);
                    let v = abs_at(cs, ct);
                    if v > cur {
                        cur = v;
                        s = cs;
                        t = ct;
                        moved = true;
                    }
                }
            }
            if !moved {
                hs *= 0.5;
                ht *= 0.5;
            }
        }
        best = best.max(cur);
    }
    best
}

fn clamp_params(model: &KahlerModel, s: f64, t: f64) -> (f64, f64) {
    if model.is_sphere() {
        (s.clamp(-1.0, 1.0), t)
    } else {
        (s, t)
    }
}
