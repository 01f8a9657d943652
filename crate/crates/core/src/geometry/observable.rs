use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use super::ChartPoint;

/// Value of a function together with its first and mixed second chart
/// derivatives at a point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet {
    pub value: Complex64,
    pub dz: Complex64,
    pub dzbar: Complex64,
    pub dzdzbar: Complex64,
}

impl Jet {
    pub fn constant(c: Complex64) -> Self {
        Self { value: c, ..Self::default() }
    }

    /// A jet whose derivative slots are unknown.
    pub fn value_only(v: Complex64) -> Self {
        let nan = Complex64::new(f64::NAN, f64::NAN);
        Self { value: v, dz: nan, dzbar: nan, dzdzbar: nan }
    }

    pub fn scale(self, s: Complex64) -> Self {
        Self { value: s * self.value, dz: s * self.dz, dzbar: s * self.dzbar, dzdzbar: s * self.dzdzbar }
    }

    pub fn conj(self) -> Self {
        Self { value: self.value.conj(), dz: self.dzbar.conj(), dzbar: self.dz.conj(), dzdzbar: self.dzdzbar.conj() }
    }
}

impl std::ops::Add for Jet {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            value: self.value + o.value,
            dz: self.dz + o.dz,
            dzbar: self.dzbar + o.dzbar,
            dzdzbar: self.dzdzbar + o.dzdzbar,
        }
    }
}

/// Leibniz rule through second order.
impl std::ops::Mul for Jet {
    type Output = Self;

    fn mul(self, o: Self) -> Self {
        Self {
            value: self.value * o.value,
            dz: self.dz * o.value + self.value * o.dz,
            dzbar: self.dzbar * o.value + self.value * o.dzbar,
            dzdzbar: self.dzdzbar * o.value + self.dz * o.dzbar + self.dzbar * o.dz + self.value * o.dzdzbar,
        }
    }
}

type JetFn = dyn Fn(&ChartPoint) -> Jet + Send + Sync;

/// A smooth complex-valued function on the model, evaluated in chart
/// coordinates.
#[derive(Clone)]
pub struct Observable {
    name: String,
    is_real: bool,
    has_derivatives: bool,
    eval: Arc<JetFn>,
}

impl Observable {
    /// An observable with analytic derivatives.
    pub fn new(
        name: impl Into<String>,
        is_real: bool,
        eval: impl Fn(&ChartPoint) -> Jet + Send + Sync + 'static,
    ) -> Self {
        Self { name: name.into(), is_real, has_derivatives: true, eval: Arc::new(eval) }
    }

    /// An observable known only through its values (e.g. a Poisson bracket
    /// materialized pointwise).
    pub fn from_values(
        name: impl Into<String>,
        is_real: bool,
        value: impl Fn(&ChartPoint) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            is_real,
            has_derivatives: false,
            eval: Arc::new(move |pt| Jet::value_only(value(pt))),
        }
    }

    pub fn constant(c: Complex64) -> Self {
        let name = if c.im == 0.0 { format!("{}", c.re) } else { format!("({c})") };
        Self::new(name, c.im == 0.0, move |_| Jet::constant(c))
    }

    pub fn one() -> Self {
        Self::new("one", true, |_| Jet::constant(Complex64::new(1.0, 0.0)))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_real(&self) -> bool {
        self.is_real
    }

    pub fn has_derivatives(&self) -> bool {
        self.has_derivatives
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn jet(&self, pt: &ChartPoint) -> Jet {
        let mut j = (self.eval)(pt);
        if self.is_real {
            j.value.im = 0.0;
        }
        j
    }

    pub fn value(&self, pt: &ChartPoint) -> Complex64 {
        self.jet(pt).value
    }

    pub fn dz(&self, pt: &ChartPoint) -> Complex64 {
        self.jet(pt).dz
    }

    pub fn dzbar(&self, pt: &ChartPoint) -> Complex64 {
        self.jet(pt).dzbar
    }

    pub fn dzdzbar(&self, pt: &ChartPoint) -> Complex64 {
        self.jet(pt).dzdzbar
    }

    pub fn add(&self, other: &Self) -> Self {
        self.combine(
            other,
            format!("({} + {})", self.name, other.name),
            self.is_real && other.is_real,
            std::ops::Add::add,
        )
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.combine(other, format!("({} - {})", self.name, other.name), self.is_real && other.is_real, |a, b| {
            a + b.scale(Complex64::new(-1.0, 0.0))
        })
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.combine(other, format!("{}*{}", self.name, other.name), self.is_real && other.is_real, std::ops::Mul::mul)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let f = self.eval.clone();
        Self {
            name: format!("{}*{}", fmt_scalar(s), self.name),
            is_real: self.is_real && s.im == 0.0,
            has_derivatives: self.has_derivatives,
            eval: Arc::new(move |pt| f(pt).scale(s)),
        }
    }

    pub fn conj(&self) -> Self {
        let f = self.eval.clone();
        Self {
            name: format!("conj({})", self.name),
            is_real: self.is_real,
            has_derivatives: self.has_derivatives,
            eval: Arc::new(move |pt| f(pt).conj()),
        }
    }

    pub fn real_part(&self) -> Self {
        let f = self.eval.clone();
        Self {
            name: format!("re({})", self.name),
            is_real: true,
            has_derivatives: self.has_derivatives,
            eval: Arc::new(move |pt| {
                let j = f(pt);
                (j + j.conj()).scale(Complex64::new(0.5, 0.0))
            }),
        }
    }

    pub fn imag_part(&self) -> Self {
        let f = self.eval.clone();
        Self {
            name: format!("im({})", self.name),
            is_real: true,
            has_derivatives: self.has_derivatives,
            eval: Arc::new(move |pt| {
                let j = f(pt);
                (j + j.conj().scale(Complex64::new(-1.0, 0.0))).scale(Complex64::new(0.0, -0.5))
            }),
        }
    }

    pub fn powi(&self, k: u32) -> Self {
        let f = self.eval.clone();
        Self {
            name: format!("{}^{k}", self.name),
            is_real: self.is_real,
            has_derivatives: self.has_derivatives,
            eval: Arc::new(move |pt| {
                let base = f(pt);
                (0..k).fold(Jet::constant(Complex64::new(1.0, 0.0)), |acc, _| acc * base)
            }),
        }
    }

    fn combine(&self, other: &Self, name: String, is_real: bool, op: fn(Jet, Jet) -> Jet) -> Self {
        let (f, g) = (self.eval.clone(), other.eval.clone());
        Self {
            name,
            is_real,
            has_derivatives: self.has_derivatives && other.has_derivatives,
            eval: Arc::new(move |pt| op(f(pt), g(pt))),
        }
    }
}

fn fmt_scalar(s: Complex64) -> String {
    if s.im == 0.0 {
        format!("{}", s.re)
    } else {
        format!("({}{:+}i)", s.re, s.im)
    }
}

impl fmt::Debug for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Observable")
            .field("name", &self.name)
            .field("is_real", &self.is_real)
            .field("has_derivatives", &self.has_derivatives)
            .finish()
    }
}

/// Real polynomial in the ambient coordinates `(x1, x2, x3)` of the sphere.
#[derive(Clone, Debug, PartialEq)]
pub struct AmbientPolynomial {
    terms: Vec<(f64, [u32; 3])>,
}

impl AmbientPolynomial {
    pub fn new(terms: &[(f64, [u32; 3])]) -> Self {
        Self { terms: terms.to_vec() }
    }

    pub fn coordinate(i: usize) -> Self {
        let mut e = [0; 3];
        e[i] = 1;
        Self::new(&[(1.0, e)])
    }

    /// Chain rule through the ambient coordinate jets.
    pub fn jet(&self, x: &[Jet; 3]) -> Jet {
        let v = [x[0].value.re, x[1].value.re, x[2].value.re];
        let mut value = 0.0;
        let mut grad = [0.0; 3];
        let mut hess = [[0.0; 3]; 3];
        for &(c, e) in &self.terms {
            value += c * mono(v, e);
            for i in 0..3 {
                if e[i] == 0 {
                    continue;
                }
                let mut ei = e;
                ei[i] -= 1;
                grad[i] += c * e[i] as f64 * mono(v, ei);
                for j in 0..3 {
                    if ei[j] == 0 {
                        continue;
                    }
                    let mut eij = ei;
                    eij[j] -= 1;
                    hess[i][j] += c * (e[i] as f64) * (ei[j] as f64) * mono(v, eij);
                }
            }
        }
        let mut out = Jet::constant(Complex64::new(value, 0.0));
        for i in 0..3 {
            out.dz += grad[i] * x[i].dz;
            out.dzbar += grad[i] * x[i].dzbar;
            out.dzdzbar += grad[i] * x[i].dzdzbar;
            for j in 0..3 {
                out.dzdzbar += hess[i][j] * x[i].dz * x[j].dzbar;
            }
        }
        out
    }
}

fn mono(v: [f64; 3], e: [u32; 3]) -> f64 {
    v[0].powi(e[0] as i32) * v[1].powi(e[1] as i32) * v[2].powi(e[2] as i32)
}

/// Real spherical harmonics of degree 2..=4 as ambient polynomials, named
/// `y{l}_{m}` with `m` written `m1`, `m2`, ... when negative.
pub(crate) fn spherical_harmonics() -> Vec<(String, u32, AmbientPolynomial)> {
    // (degree, order, [(coefficient, exponents of x1 x2 x3)])
    type Row = (u32, i32, &'static [(f64, [u32; 3])]);
    let table: &[Row] = &[
        (2, -2, &[(1.0, [1, 1, 0])]),
        (2, -1, &[(1.0, [0, 1, 1])]),
        (2, 0, &[(3.0, [0, 0, 2]), (-1.0, [0, 0, 0])]),
        (2, 1, &[(1.0, [1, 0, 1])]),
        (2, 2, &[(1.0, [2, 0, 0]), (-1.0, [0, 2, 0])]),
        (3, -3, &[(3.0, [2, 1, 0]), (-1.0, [0, 3, 0])]),
        (3, -2, &[(1.0, [1, 1, 1])]),
        (3, -1, &[(5.0, [0, 1, 2]), (-1.0, [0, 1, 0])]),
        (3, 0, &[(5.0, [0, 0, 3]), (-3.0, [0, 0, 1])]),
        (3, 1, &[(5.0, [1, 0, 2]), (-1.0, [1, 0, 0])]),
        (3, 2, &[(1.0, [2, 0, 1]), (-1.0, [0, 2, 1])]),
        (3, 3, &[(1.0, [3, 0, 0]), (-3.0, [1, 2, 0])]),
        (4, -4, &[(1.0, [3, 1, 0]), (-1.0, [1, 3, 0])]),
        (4, -3, &[(3.0, [2, 1, 1]), (-1.0, [0, 3, 1])]),
        (4, -2, &[(7.0, [1, 1, 2]), (-1.0, [1, 1, 0])]),
        (4, -1, &[(7.0, [0, 1, 3]), (-3.0, [0, 1, 1])]),
        (4, 0, &[(35.0, [0, 0, 4]), (-30.0, [0, 0, 2]), (3.0, [0, 0, 0])]),
        (4, 1, &[(7.0, [1, 0, 3]), (-3.0, [1, 0, 1])]),
        (4, 2, &[(7.0, [2, 0, 2]), (-1.0, [2, 0, 0]), (-7.0, [0, 2, 2]), (1.0, [0, 2, 0])]),
        (4, 3, &[(1.0, [3, 0, 1]), (-3.0, [1, 2, 1])]),
        (4, 4, &[(1.0, [4, 0, 0]), (-6.0, [2, 2, 0]), (1.0, [0, 4, 0])]),
    ];
    table
        .iter()
        .map(|&(l, m, terms)| {
            let mname = if m < 0 { format!("m{}", -m) } else { m.to_string() };
            (format!("y{l}_{mname}"), l, AmbientPolynomial::new(terms))
        })
        .collect()
}
