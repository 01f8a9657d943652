use num_complex::Complex64;

use super::{GeometryError, KahlerModel, Observable};

/// Parses an observable expression over the model's built-in names.
///
/// Grammar: sums and differences of products of factors, where a factor is a
/// number, `i`, a built-in name, `re(..)`, `im(..)`, `conj(..)`, a
/// parenthesized expression, optionally raised to a non-negative integer
/// power with `^`. Example: `x1 + x3^2`, `re(f_1_0)`, `x1 + i*x2`.
pub fn parse_observable(model: &KahlerModel, text: &str) -> Result<Observable, GeometryError> {
    let builtins = model.builtin_observables();
    let mut p = Parser { src: text, pos: 0, builtins: &builtins };
    let obs = p.expr()?;
    p.skip_ws();
    if p.pos != text.len() {
        return Err(p.fail("trailing input"));
    }
    Ok(obs.renamed(text.trim()))
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    builtins: &'a [Observable],
}

impl Parser<'_> {
    fn fail(&self, reason: &str) -> GeometryError {
        GeometryError::BadExpression { expr: self.src.to_string(), reason: format!("{reason} at offset {}", self.pos) }
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Observable, GeometryError> {
        let mut acc = self.term()?;
        loop {
            if self.eat('+') {
                acc = acc.add(&self.term()?);
            } else if self.eat('-') {
                acc = acc.sub(&self.term()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Observable, GeometryError> {
        let mut acc = self.unary()?;
        while self.eat('*') {
            acc = acc.mul(&self.unary()?);
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Observable, GeometryError> {
        if self.eat('-') {
            return Ok(self.unary()?.scale(Complex64::new(-1.0, 0.0)));
        }
        let base = self.atom()?;
        if self.eat('^') {
            self.skip_ws();
            let start = self.pos;
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.pos += 1;
            }
            let k: u32 = self.src[start..self.pos].parse().map_err(|_| self.fail("expected integer exponent"))?;
            return Ok(base.powi(k));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Observable, GeometryError> {
        self.skip_ws();
        let c = self.peek().ok_or_else(|| self.fail("unexpected end"))?;
        if c == '(' {
            self.pos += 1;
            let e = self.expr()?;
            if !self.eat(')') {
                return Err(self.fail("expected `)`"));
            }
            return Ok(e);
        }
        if c.is_ascii_digit() || c == '.' {
            let start = self.pos;
            while self.peek().is_some_and(|c| c.is_ascii_digit() || c == '.' || c == 'e') {
                self.pos += 1;
            }
            let v: f64 = self.src[start..self.pos].parse().map_err(|_| self.fail("bad number"))?;
            return Ok(Observable::constant(Complex64::new(v, 0.0)));
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = self.pos;
            while self.peek().is_some_and(|c| c.is_ascii_alphanumeric() || c == '_') {
                self.pos += 1;
            }
            let ident = &self.src[start..self.pos];
            if matches!(ident, "re" | "im" | "conj") && self.eat('(') {
                let inner = self.expr()?;
                if !self.eat(')') {
                    return Err(self.fail("expected `)`"));
                }
                return Ok(match ident {
                    "re" => inner.real_part(),
                    "im" => inner.imag_part(),
                    _ => inner.conj(),
                });
            }
            if ident == "i" {
                return Ok(Observable::constant(Complex64::new(0.0, 1.0)));
            }
            return self
                .builtins
                .iter()
                .find(|o| o.name() == ident)
                .cloned()
                .ok_or_else(|| GeometryError::UnknownObservable(ident.to_string()));
        }
        Err(self.fail("unexpected character"))
    }
}
