//! Concrete compact Kähler curves with their quantum line bundles.
//!
//! Three models are supported, all normalized to total volume `2π`:
//!
//! * the round sphere `ω = i dz∧dz̄ / (1+|z|²)²` with the hyperplane bundle,
//! * the same sphere with potential `log(1+|z|²) + ε·x3`, which keeps the
//!   bundle and deforms the metric,
//! * the torus `ℂ/(ℤ + τℤ)` with `ω = (iπ/Im τ) dz∧dz̄` and the degree-one
//!   theta bundle.
//!
//! Everything is expressed through a chart coordinate `z`; `g` always denotes
//! the coefficient of `i dz∧dz̄` in `ω`.

mod grid;
mod observable;
mod parse;
mod theta;

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use grid::{sup_norm, QuadratureGrid};
pub use observable::{AmbientPolynomial, Jet, Observable};
pub use parse::parse_observable;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Largest admissible deformation amplitude.
pub const MAX_EPSILON: f64 = 0.3;
/// Smallest admissible `Im τ`.
pub const MIN_IM_TAU: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("deformation epsilon = {epsilon} violates metric positivity (|epsilon| <= {MAX_EPSILON} required)")]
    PositivityViolation { epsilon: f64 },
    #[error("torus modulus tau has Im tau = {im}, need Im tau >= {MIN_IM_TAU}")]
    BadModulus { im: f64 },
    #[error("basis index {k} out of range for dimension {dim}")]
    IndexOutOfRange { k: usize, dim: usize },
    #[error("quadrature resolution {0} below minimum 8")]
    ResolutionTooLow(usize),
    #[error("level must be positive")]
    ZeroLevel,
    #[error("unknown observable `{0}`")]
    UnknownObservable(String),
    #[error("cannot parse observable expression `{expr}`: {reason}")]
    BadExpression { expr: String, reason: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChartId {
    SphereSouth,
    SphereNorth,
    TorusFundamental,
}

/// A point of `M` given by a chart and a coordinate in it.
///
/// On the sphere the two charts are related by `w = 1/z`. On the torus `z` is a
/// point of the covering plane; any lift is accepted.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint {
    pub chart: ChartId,
    pub z: Complex64,
}

impl ChartPoint {
    pub fn south(z: Complex64) -> Self {
        Self { chart: ChartId::SphereSouth, z }
    }

    pub fn north(w: Complex64) -> Self {
        Self { chart: ChartId::SphereNorth, z: w }
    }

    pub fn torus(z: Complex64) -> Self {
        Self { chart: ChartId::TorusFundamental, z }
    }

    /// Same point with the chart coordinate moved by `dz`.
    pub fn shifted(self, dz: Complex64) -> Self {
        Self { chart: self.chart, z: self.z + dz }
    }

    /// Re-expresses a sphere point in the other chart. Returns `None` at the
    /// pole the other chart cannot reach.
    pub fn other_sphere_chart(self) -> Option<Self> {
        if self.z == Complex64::new(0.0, 0.0) {
            return None;
        }
        match self.chart {
            ChartId::SphereSouth => Some(Self::north(1.0 / self.z)),
            ChartId::SphereNorth => Some(Self::south(1.0 / self.z)),
            ChartId::TorusFundamental => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    RoundSphere,
    DeformedSphere { epsilon: f64 },
    Torus { tau_re: f64, tau_im: f64 },
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::RoundSphere => "round_sphere",
            ModelKind::DeformedSphere { .. } => "deformed_sphere",
            ModelKind::Torus { .. } => "torus",
        }
    }
}

/// Names of the supported model families.
pub const MODEL_NAMES: [&str; 3] = ["round_sphere", "deformed_sphere", "torus"];

/// A compact Kähler curve `(M, ω)` with quantum line bundle `(L, h)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KahlerModel {
    kind: ModelKind,
}

/// Jets of the ambient coordinates `x1, x2, x3` of the sphere.
pub(crate) fn ambient_jets(pt: &ChartPoint) -> [Jet; 3] {
    let z = pt.z;
    let t = z.norm_sqr();
    let s = 1.0 + t;
    let s2 = s * s;
    let s3 = s2 * s;
    let one = Complex64::new(1.0, 0.0);
    let x1 = (z + z.conj()) / s;
    let x2 = -I * (z - z.conj()) / s;
    let x3 = Complex64::new((t - 1.0) / s, 0.0);
    let mut jets = [
        Jet {
            value: x1,
            dz: (one - z.conj() * z.conj()) / s2,
            dzbar: (one - z * z) / s2,
            dzdzbar: -2.0 * (z + z.conj()) / s3,
        },
        Jet {
            value: x2,
            dz: -I * (one + z.conj() * z.conj()) / s2,
            dzbar: I * (one + z * z) / s2,
            dzdzbar: -2.0 * x2 / s2,
        },
        Jet { value: x3, dz: 2.0 * z.conj() / s2, dzbar: 2.0 * z / s2, dzdzbar: -2.0 * x3 / s2 },
    ];
    for j in jets.iter_mut() {
        j.value.im = 0.0;
    }
    if pt.chart == ChartId::SphereNorth {
        // (x1, x2, x3)(1/w) = (X1, -X2, -X3)(w)
        jets[1] = jets[1].scale(-one);
        jets[2] = jets[2].scale(-one);
    }
    jets
}

fn ambient_x3(pt: &ChartPoint) -> f64 {
    let t = pt.z.norm_sqr();
    let x = (t - 1.0) / (1.0 + t);
    if pt.chart == ChartId::SphereNorth {
        -x
    } else {
        x
    }
}

impl KahlerModel {
    /// Validates parameters and builds the model.
    pub fn new(kind: ModelKind) -> Result<Self, GeometryError> {
        match kind {
            ModelKind::RoundSphere => {}
            ModelKind::DeformedSphere { epsilon } => {
                // g_eps = g_round * (1 - 2 eps x3) > 0 needs |eps| < 1/2; the
                // admissible range is the tighter |eps| <= MAX_EPSILON.
                if !epsilon.is_finite() || epsilon.abs() > MAX_EPSILON {
                    return Err(GeometryError::PositivityViolation { epsilon });
                }
            }
            ModelKind::Torus { tau_im, tau_re } => {
                if !(tau_im >= MIN_IM_TAU) || !tau_re.is_finite() || !tau_im.is_finite() {
                    return Err(GeometryError::BadModulus { im: tau_im });
                }
            }
        }
        Ok(Self { kind })
    }

    pub fn round_sphere() -> Self {
        Self { kind: ModelKind::RoundSphere }
    }

    pub fn deformed_sphere(epsilon: f64) -> Result<Self, GeometryError> {
        Self::new(ModelKind::DeformedSphere { epsilon })
    }

    pub fn torus(tau: Complex64) -> Result<Self, GeometryError> {
        Self::new(ModelKind::Torus { tau_re: tau.re, tau_im: tau.im })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn is_sphere(&self) -> bool {
        !matches!(self.kind, ModelKind::Torus { .. })
    }

    pub fn epsilon(&self) -> f64 {
        match self.kind {
            ModelKind::DeformedSphere { epsilon } => epsilon,
            _ => 0.0,
        }
    }

    pub fn tau(&self) -> Option<Complex64> {
        match self.kind {
            ModelKind::Torus { tau_re, tau_im } => Some(Complex64::new(tau_re, tau_im)),
            _ => None,
        }
    }

    /// Total volume `∫_M Ω`.
    pub fn volume(&self) -> f64 {
        2.0 * PI
    }

    /// `dim Γ_hol(M, L^m)`.
    pub fn dim(&self, m: usize) -> usize {
        if self.is_sphere() {
            m + 1
        } else {
            m
        }
    }

    /// Kähler potential `Φ` in the chart of `pt`; the bundle metric in the
    /// chart frame is `ĥ = exp(-Φ)`.
    pub fn potential(&self, pt: &ChartPoint) -> f64 {
        match self.kind {
            ModelKind::Torus { tau_im, .. } => 2.0 * PI * pt.z.im * pt.z.im / tau_im,
            _ => (1.0 + pt.z.norm_sqr()).ln() + self.epsilon() * ambient_x3(pt),
        }
    }

    /// Metric density `g`, the coefficient of `i dz∧dz̄` in `ω`.
    pub fn metric_density(&self, pt: &ChartPoint) -> f64 {
        match self.kind {
            ModelKind::Torus { tau_im, .. } => PI / tau_im,
            _ => {
                let s = 1.0 + pt.z.norm_sqr();
                (1.0 - 2.0 * self.epsilon() * ambient_x3(pt)) / (s * s)
            }
        }
    }

    /// `{f, g} = (i/g)(∂̄f ∂g − ∂f ∂̄g)`.
    pub fn poisson_bracket(&self, f: &Observable, g: &Observable, pt: &ChartPoint) -> Complex64 {
        let (jf, jg) = (f.jet(pt), g.jet(pt));
        I / self.metric_density(pt) * (jf.dzbar * jg.dz - jf.dz * jg.dzbar)
    }

    /// `Δf = (1/g) ∂∂̄ f`, normalized so that `Δx3 = −2·x3` on the round sphere.
    pub fn laplacian(&self, f: &Observable, pt: &ChartPoint) -> Complex64 {
        f.dzdzbar(pt) / self.metric_density(pt)
    }

    /// `{f, g}` as a value-only observable.
    pub fn poisson_observable(&self, f: &Observable, g: &Observable) -> Observable {
        let (model, f2, g2) = (*self, f.clone(), g.clone());
        Observable::from_values(format!("{{{},{}}}", f.name(), g.name()), f.is_real() && g.is_real(), move |pt| {
            model.poisson_bracket(&f2, &g2, pt)
        })
    }

    /// `Δf` as a value-only observable.
    pub fn laplacian_observable(&self, f: &Observable) -> Observable {
        let (model, f2) = (*self, f.clone());
        Observable::from_values(format!("lap({})", f.name()), f.is_real(), move |pt| model.laplacian(&f2, pt))
    }

    /// Unit-frame value `η_k(pt) = ŝ_k(pt)·exp(−mΦ(pt)/2)` of the `k`-th raw section.
    pub fn basis_eval(&self, m: usize, k: usize, pt: &ChartPoint) -> Result<Complex64, GeometryError> {
        if m == 0 {
            return Err(GeometryError::ZeroLevel);
        }
        let dim = self.dim(m);
        if k >= dim {
            return Err(GeometryError::IndexOutOfRange { k, dim });
        }
        Ok(self.basis_row(m, pt)[k])
    }

    /// All raw unit-frame section values at `pt`, index `k = 0..dim(m)`.
    ///
    /// Sphere: `z^k` in the southern frame. Values are computed from
    /// `p = |z|²/(1+|z|²)` and `q = 1/(1+|z|²)` so both poles are regular; the
    /// phase convention is always that of the southern chart.
    pub fn basis_row(&self, m: usize, pt: &ChartPoint) -> Vec<Complex64> {
        match self.kind {
            ModelKind::Torus { tau_re, tau_im } => theta::theta_row(m, Complex64::new(tau_re, tau_im), pt.z),
            _ => {
                let r2 = pt.z.norm_sqr();
                let (p, q, phase) = match pt.chart {
                    ChartId::SphereNorth => {
                        let ph = if r2 > 0.0 { pt.z.conj() / r2.sqrt() } else { Complex64::new(1.0, 0.0) };
                        (1.0 / (1.0 + r2), r2 / (1.0 + r2), ph)
                    }
                    _ => {
                        let ph = if r2 > 0.0 { pt.z / r2.sqrt() } else { Complex64::new(1.0, 0.0) };
                        (r2 / (1.0 + r2), 1.0 / (1.0 + r2), ph)
                    }
                };
                let x3 = ambient_x3(pt);
                let damp = (-(m as f64) * self.epsilon() * x3 / 2.0).exp();
                let (sp, sq) = (p.sqrt(), q.sqrt());
                let arg = phase.arg();
                (0..=m)
                    .map(|k| {
                        let mag = sp.powi(k as i32) * sq.powi((m - k) as i32) * damp;
                        Complex64::from_polar(mag, k as f64 * arg)
                    })
                    .collect()
            }
        }
    }

    /// Built-in observables with analytic derivatives.
    ///
    /// Sphere: `x1, x2, x3`, real spherical harmonics `y{l}_{m}` of degree
    /// 2..=4 and `one`. Torus: Fourier modes `f_{p}_{q} = exp(2πi(pa+qb))` for
    /// `|p|, |q| <= 3` (negative indices written `m1`, ...) and `one`.
    pub fn builtin_observables(&self) -> Vec<Observable> {
        let mut out = Vec::new();
        if self.is_sphere() {
            for (i, name) in ["x1", "x2", "x3"].into_iter().enumerate() {
                out.push(ambient_observable(name, AmbientPolynomial::coordinate(i)));
            }
            for (name, _, poly) in observable::spherical_harmonics() {
                out.push(ambient_observable(&name, poly));
            }
        } else {
            let tau = self.tau().expect("torus");
            for p in -3i32..=3 {
                for q in -3i32..=3 {
                    out.push(fourier_mode(tau, p, q));
                }
            }
        }
        out.push(Observable::one());
        out
    }

    pub fn observable(&self, name: &str) -> Result<Observable, GeometryError> {
        self.builtin_observables()
            .into_iter()
            .find(|o| o.name() == name)
            .ok_or_else(|| GeometryError::UnknownObservable(name.to_string()))
    }

    /// Chart point for natural parameters: `(u, φ)` with `u = x3` on the
    /// sphere (northern chart for `u > 0`), `(a, b)` with `z = a + bτ` on the
    /// torus.
    pub fn point_at(&self, s: f64, t: f64) -> ChartPoint {
        match self.kind {
            ModelKind::Torus { tau_re, tau_im } => {
                ChartPoint::torus(Complex64::new(s, 0.0) + t * Complex64::new(tau_re, tau_im))
            }
            _ => {
                let u = s.clamp(-1.0, 1.0);
                if u > 0.0 {
                    ChartPoint::north(Complex64::from_polar(((1.0 - u) / (1.0 + u)).sqrt(), -t))
                } else {
                    ChartPoint::south(Complex64::from_polar(((1.0 + u) / (1.0 - u)).sqrt(), t))
                }
            }
        }
    }

    /// Finite-difference residual of the quantization condition
    /// `∂∂̄Φ = g` at `pt` (5-point stencils, step `1e-3`).
    pub fn quantization_residual(&self, pt: &ChartPoint) -> f64 {
        let lap = mixed_derivative_fd(|q| self.potential(q), pt, 1e-3);
        (lap - self.metric_density(pt)).abs()
    }
}

/// `∂_z∂_z̄ F = ¼(F_xx + F_yy)` by fourth-order central differences in the
/// chart of `pt`.
pub fn mixed_derivative_fd(f: impl Fn(&ChartPoint) -> f64, pt: &ChartPoint, h: f64) -> f64 {
    let c0 = f(pt);
    let mut total = 0.0;
    for dir in [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)] {
        let fp1 = f(&pt.shifted(dir * h));
        let fm1 = f(&pt.shifted(-dir * h));
        let fp2 = f(&pt.shifted(dir * (2.0 * h)));
        let fm2 = f(&pt.shifted(-dir * (2.0 * h)));
        total += (-fp2 + 16.0 * fp1 - 30.0 * c0 + 16.0 * fm1 - fm2) / (12.0 * h * h);
    }
    total / 4.0
}

fn ambient_observable(name: &str, poly: AmbientPolynomial) -> Observable {
    Observable::new(name, true, move |pt| poly.jet(&ambient_jets(pt)))
}

fn fourier_name(p: i32, q: i32) -> String {
    let idx = |v: i32| if v < 0 { format!("m{}", -v) } else { v.to_string() };
    format!("f_{}_{}", idx(p), idx(q))
}

/// `exp(2πi(pa + qb))` where `z = a + bτ`.
fn fourier_mode(tau: Complex64, p: i32, q: i32) -> Observable {
    // a = x - y·Re τ/Im τ, b = y/Im τ; ∂_z = (∂_x − i∂_y)/2
    let da = 0.5 * Complex64::new(1.0, tau.re / tau.im);
    let db = Complex64::new(0.0, -0.5 / tau.im);
    let dpsi = 2.0 * PI * (p as f64 * da + q as f64 * db);
    Observable::new(fourier_name(p, q), false, move |pt| {
        let b = pt.z.im / tau.im;
        let a = pt.z.re - b * tau.re;
        let v = Complex64::from_polar(1.0, 2.0 * PI * (p as f64 * a + q as f64 * b));
        Jet { value: v, dz: I * dpsi * v, dzbar: I * dpsi.conj() * v, dzdzbar: -dpsi.norm_sqr() * v }
    })
}
