use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::NumericsError;

/// Largest supported Gauss–Legendre order.
pub const MAX_GAUSS_LEGENDRE: usize = 4096;

const NEWTON_TOL: f64 = 1e-15;
const NEWTON_MAX_ITER: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuadratureDomain {
    /// `[-1, 1]`
    Interval,
    /// `[0, 2π)`
    Periodic,
}

/// One-dimensional quadrature rule with strictly increasing nodes and positive weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule1D {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub domain: QuadratureDomain,
}

impl QuadratureRule1D {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        let terms: Vec<f64> = self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(*x)).collect();
        super::tree_sum_real(&terms)
    }
}

/// Evaluates `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Gauss–Legendre rule with `n` nodes on `[-1, 1]`.
///
/// Nodes are Newton-polished roots of `P_n` started from Chebyshev-like
/// guesses; the rule is mirrored so it is exactly symmetric.
pub fn gauss_legendre(n: usize) -> Result<QuadratureRule1D, NumericsError> {
    if n == 0 || n > MAX_GAUSS_LEGENDRE {
        return Err(NumericsError::OrderOutOfRange { order: n, max: MAX_GAUSS_LEGENDRE });
    }
    if n == 1 {
        return Ok(QuadratureRule1D { nodes: vec![0.0], weights: vec![2.0], domain: QuadratureDomain::Interval });
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = n.div_ceil(2);
    for i in 0..half {
        // i-th largest root
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..NEWTON_MAX_ITER {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= NEWTON_TOL {
                dp = legendre_with_derivative(n, x).1;
                break;
            }
        }
        if n % 2 == 1 && i == half - 1 {
            x = 0.0;
            dp = legendre_with_derivative(n, 0.0).1;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = w;
        nodes[i] = -x;
        weights[i] = w;
    }
    Ok(QuadratureRule1D { nodes, weights, domain: QuadratureDomain::Interval })
}

/// Equispaced trapezoid rule on the circle: `θ_j = 2πj/n`, weights `2π/n`.
pub fn periodic_trapezoid(n: usize) -> Result<QuadratureRule1D, NumericsError> {
    if n == 0 {
        return Err(NumericsError::OrderOutOfRange { order: n, max: usize::MAX });
    }
    let h = 2.0 * PI / n as f64;
    Ok(QuadratureRule1D {
        nodes: (0..n).map(|j| h * j as f64).collect(),
        weights: vec![h; n],
        domain: QuadratureDomain::Periodic,
    })
}
