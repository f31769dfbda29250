//! Symbolic coefficient expressions.
//!
//! Model matrices keep their entries as small symbolic expressions over named
//! parameters (element and coupling names), so that emitted matrices can be
//! compared structurally (entry `-K12` stays `-K12`) as well as numerically.
//! An expression is a canonical sum of monomials; a monomial is a numeric
//! coefficient times a product of parameters raised to (possibly negative)
//! integer powers.  This covers everything the block-scheme pipeline produces:
//! path gains are products of block gains and summation-node signs, matrix
//! entries are sums of path gains, and reductions divide by single-monomial
//! pivots.

use std::collections::BTreeMap;
use std::fmt;

/// `coeff * prod(param^exp)`.  Canonical form never stores a zero exponent.
#[derive(Clone, Debug, PartialEq)]
pub struct Monomial {
    pub coeff: f64,
    pub factors: BTreeMap<String, i32>,
}

impl Monomial {
    fn constant(c: f64) -> Self {
        Monomial {
            coeff: c,
            factors: BTreeMap::new(),
        }
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        let mut factors = self.factors.clone();
        for (name, exp) in &other.factors {
            let e = factors.entry(name.clone()).or_insert(0);
            *e += exp;
            if *e == 0 {
                factors.remove(name);
            }
        }
        Monomial {
            coeff: self.coeff * other.coeff,
            factors,
        }
    }
}

/// Canonical sum of monomials.  Terms are sorted by factor map and merged;
/// the zero expression has no terms.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Expr {
    terms: Vec<Monomial>,
}

/// Error raised when evaluating an expression with an unbound parameter.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unbound parameter `{0}` in expression")]
pub struct UnboundParam(pub String);

impl Expr {
    pub fn zero() -> Self {
        Expr { terms: Vec::new() }
    }

    pub fn one() -> Self {
        Expr::constant(1.0)
    }

    pub fn constant(c: f64) -> Self {
        if c == 0.0 {
            return Expr::zero();
        }
        Expr {
            terms: vec![Monomial::constant(c)],
        }
    }

    /// A single named parameter.
    pub fn param(name: &str) -> Self {
        Expr {
            terms: vec![Monomial {
                coeff: 1.0,
                factors: [(name.to_string(), 1)].into_iter().collect(),
            }],
        }
    }

    /// `1 / name`.
    pub fn recip_param(name: &str) -> Self {
        Expr {
            terms: vec![Monomial {
                coeff: 1.0,
                factors: [(name.to_string(), -1)].into_iter().collect(),
            }],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.terms.len() == 1 && self.terms[0].factors.is_empty() && self.terms[0].coeff == 1.0
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    /// True when the expression is a single monomial (required as a division
    /// pivot during degenerate-state elimination).
    pub fn as_monomial(&self) -> Option<&Monomial> {
        if self.terms.len() == 1 {
            Some(&self.terms[0])
        } else {
            None
        }
    }

    fn normalize(mut terms: Vec<Monomial>) -> Expr {
        terms.sort_by(|a, b| a.factors.cmp(&b.factors));
        let mut out: Vec<Monomial> = Vec::with_capacity(terms.len());
        for t in terms {
            if let Some(last) = out.last_mut() {
                if last.factors == t.factors {
                    last.coeff += t.coeff;
                    continue;
                }
            }
            out.push(t);
        }
        out.retain(|m| m.coeff != 0.0);
        Expr { terms: out }
    }

    pub fn add(&self, other: &Expr) -> Expr {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Expr::normalize(terms)
    }

    pub fn sub(&self, other: &Expr) -> Expr {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Expr {
        Expr {
            terms: self
                .terms
                .iter()
                .map(|m| Monomial {
                    coeff: -m.coeff,
                    factors: m.factors.clone(),
                })
                .collect(),
        }
    }

    pub fn mul(&self, other: &Expr) -> Expr {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                terms.push(a.mul(b));
            }
        }
        Expr::normalize(terms)
    }

    pub fn scale(&self, c: f64) -> Expr {
        self.mul(&Expr::constant(c))
    }

    /// Divide by a single monomial.  Returns `None` when `divisor` is zero or
    /// has more than one term.
    pub fn div_monomial(&self, divisor: &Expr) -> Option<Expr> {
        let m = divisor.as_monomial()?;
        if m.coeff == 0.0 {
            return None;
        }
        let inv = Monomial {
            coeff: 1.0 / m.coeff,
            factors: m.factors.iter().map(|(k, e)| (k.clone(), -e)).collect(),
        };
        Some(self.mul(&Expr { terms: vec![inv] }))
    }

    /// Numeric value under the given parameter bindings.
    pub fn eval(&self, params: &dyn Fn(&str) -> Option<f64>) -> Result<f64, UnboundParam> {
        let mut sum = 0.0;
        for t in &self.terms {
            let mut v = t.coeff;
            for (name, exp) in &t.factors {
                let p = params(name).ok_or_else(|| UnboundParam(name.clone()))?;
                v *= p.powi(*exp);
            }
            sum += v;
        }
        Ok(sum)
    }

    /// All parameter names appearing in the expression.
    pub fn params(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .terms
            .iter()
            .flat_map(|t| t.factors.keys().cloned())
            .collect();
        names.sort();
        names.dedup();
        names
    }

    /// Substitute a parameter with a fixed value.
    pub fn substitute(&self, name: &str, value: f64) -> Expr {
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let mut t = t.clone();
                if let Some(exp) = t.factors.remove(name) {
                    t.coeff *= value.powi(exp);
                }
                t
            })
            .collect();
        Expr::normalize(terms)
    }
}

fn fmt_coeff(c: f64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if c == c.trunc() && c.abs() < 1e15 {
        write!(f, "{}", c as i64)
    } else {
        write!(f, "{c}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, t) in self.terms.iter().enumerate() {
            let neg = t.coeff < 0.0;
            if i == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let mag = t.coeff.abs();
            let num: Vec<_> = t.factors.iter().filter(|(_, e)| **e > 0).collect();
            let den: Vec<_> = t.factors.iter().filter(|(_, e)| **e < 0).collect();
            let mut wrote_mag = false;
            if mag != 1.0 || num.is_empty() {
                fmt_coeff(mag, f)?;
                wrote_mag = true;
            }
            for (j, (name, exp)) in num.iter().enumerate() {
                if wrote_mag || j > 0 {
                    write!(f, "*")?;
                }
                write!(f, "{name}")?;
                if **exp != 1 {
                    write!(f, "^{exp}")?;
                }
            }
            for (name, exp) in den {
                write!(f, "/{name}")?;
                if *exp != -1 {
                    write!(f, "^{}", -exp)?;
                }
            }
        }
        Ok(())
    }
}

/// Parse a textual expression (used by model-JSON matrix entries).
///
/// Grammar: `expr := term (('+'|'-') term)*`, `term := unary (('*'|'/') unary)*`,
/// `unary := '-' unary | atom`, `atom := number | ident ('^' int)? | '(' expr ')'`.
pub fn parse_expr(src: &str) -> Result<Expr, String> {
    let mut p = Parser {
        chars: src.char_indices().peekable(),
        src,
    };
    let e = p.expr()?;
    p.skip_ws();
    if let Some(&(i, c)) = p.chars.peek() {
        return Err(format!("unexpected character `{c}` at offset {i} in `{src}`"));
    }
    Ok(e)
}

struct Parser<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    src: &'a str,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while matches!(self.chars.peek(), Some(&(_, c)) if c.is_whitespace()) {
            self.chars.next();
        }
    }

    fn eat(&mut self, want: char) -> bool {
        self.skip_ws();
        if matches!(self.chars.peek(), Some(&(_, c)) if c == want) {
            self.chars.next();
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, String> {
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

    fn term(&mut self) -> Result<Expr, String> {
        let mut acc = self.unary()?;
        loop {
            if self.eat('*') {
                acc = acc.mul(&self.unary()?);
            } else if self.eat('/') {
                let rhs = self.unary()?;
                acc = acc
                    .div_monomial(&rhs)
                    .ok_or_else(|| format!("cannot divide by `{rhs}` in `{}`", self.src))?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, String> {
        if self.eat('-') {
            return Ok(self.unary()?.neg());
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr, String> {
        self.skip_ws();
        match self.chars.peek() {
            Some(&(_, '(')) => {
                self.chars.next();
                let e = self.expr()?;
                if !self.eat(')') {
                    return Err(format!("missing `)` in `{}`", self.src));
                }
                Ok(e)
            }
            Some(&(_, c)) if c.is_ascii_digit() || c == '.' => {
                let start = self.chars.peek().unwrap().0;
                let mut end = start;
                let mut prev_exp = false;
                while let Some(&(i, c)) = self.chars.peek() {
                    let cont = c.is_ascii_digit()
                        || c == '.'
                        || c == 'e'
                        || c == 'E'
                        || ((c == '+' || c == '-') && prev_exp);
                    if !cont {
                        break;
                    }
                    prev_exp = c == 'e' || c == 'E';
                    end = i + c.len_utf8();
                    self.chars.next();
                }
                let text = &self.src[start..end];
                text.parse::<f64>()
                    .map(Expr::constant)
                    .map_err(|_| format!("bad number `{text}` in `{}`", self.src))
            }
            Some(&(_, c)) if c.is_alphabetic() || c == '_' => {
                let start = self.chars.peek().unwrap().0;
                let mut end = start;
                while let Some(&(i, c)) = self.chars.peek() {
                    if c.is_alphanumeric() || c == '_' {
                        end = i + c.len_utf8();
                        self.chars.next();
                    } else {
                        break;
                    }
                }
                let name = &self.src[start..end];
                if self.eat('^') {
                    self.skip_ws();
                    let neg = self.eat('-');
                    let dstart = match self.chars.peek() {
                        Some(&(i, c)) if c.is_ascii_digit() => i,
                        _ => return Err(format!("bad exponent in `{}`", self.src)),
                    };
                    let mut dend = dstart;
                    while let Some(&(i, c)) = self.chars.peek() {
                        if c.is_ascii_digit() {
                            dend = i + c.len_utf8();
                            self.chars.next();
                        } else {
                            break;
                        }
                    }
                    let mut exp: i32 = self.src[dstart..dend]
                        .parse()
                        .map_err(|_| format!("bad exponent in `{}`", self.src))?;
                    if neg {
                        exp = -exp;
                    }
                    let mut factors = BTreeMap::new();
                    if exp != 0 {
                        factors.insert(name.to_string(), exp);
                    }
                    Ok(Expr {
                        terms: vec![Monomial {
                            coeff: 1.0,
                            factors,
                        }],
                    })
                } else {
                    Ok(Expr::param(name))
                }
            }
            other => Err(format!("unexpected input {:?} in `{}`", other, self.src)),
        }
    }
}

/// Dense row-major matrix of symbolic expressions.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix {
    nrows: usize,
    ncols: usize,
    data: Vec<Expr>,
}

impl SymMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        SymMatrix {
            nrows,
            ncols,
            data: vec![Expr::zero(); nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = SymMatrix::zeros(n, n);
        for i in 0..n {
            *m.get_mut(i, i) = Expr::one();
        }
        m
    }

    pub fn from_fn(nrows: usize, ncols: usize, mut f: impl FnMut(usize, usize) -> Expr) -> Self {
        let mut m = SymMatrix::zeros(nrows, ncols);
        for i in 0..nrows {
            for j in 0..ncols {
                *m.get_mut(i, j) = f(i, j);
            }
        }
        m
    }

    pub fn from_numeric(m: &nalgebra::DMatrix<f64>) -> Self {
        SymMatrix::from_fn(m.nrows(), m.ncols(), |i, j| Expr::constant(m[(i, j)]))
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn get(&self, i: usize, j: usize) -> &Expr {
        &self.data[i * self.ncols + j]
    }

    pub fn get_mut(&mut self, i: usize, j: usize) -> &mut Expr {
        &mut self.data[i * self.ncols + j]
    }

    pub fn transpose(&self) -> SymMatrix {
        SymMatrix::from_fn(self.ncols, self.nrows, |i, j| self.get(j, i).clone())
    }

    pub fn matmul(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.ncols, other.nrows, "dimension mismatch in matmul");
        SymMatrix::from_fn(self.nrows, other.ncols, |i, j| {
            let mut acc = Expr::zero();
            for k in 0..self.ncols {
                acc = acc.add(&self.get(i, k).mul(other.get(k, j)));
            }
            acc
        })
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        SymMatrix::from_fn(self.nrows, self.ncols, |i, j| {
            self.get(i, j).add(other.get(i, j))
        })
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        SymMatrix::from_fn(self.nrows, self.ncols, |i, j| {
            self.get(i, j).sub(other.get(i, j))
        })
    }

    pub fn map(&self, mut f: impl FnMut(&Expr) -> Expr) -> SymMatrix {
        SymMatrix::from_fn(self.nrows, self.ncols, |i, j| f(self.get(i, j)))
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Expr::is_zero)
    }

    pub fn substitute(&self, name: &str, value: f64) -> SymMatrix {
        self.map(|e| e.substitute(name, value))
    }

    pub fn eval(
        &self,
        params: &dyn Fn(&str) -> Option<f64>,
    ) -> Result<nalgebra::DMatrix<f64>, UnboundParam> {
        let mut out = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for j in 0..self.ncols {
                out[(i, j)] = self.get(i, j).eval(params)?;
            }
        }
        Ok(out)
    }

    pub fn params(&self) -> Vec<String> {
        let mut names: Vec<String> = self.data.iter().flat_map(|e| e.params()).collect();
        names.sort();
        names.dedup();
        names
    }
}

impl fmt::Display for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cells: Vec<String> = self.data.iter().map(|e| e.to_string()).collect();
        let mut widths = vec![0usize; self.ncols];
        for i in 0..self.nrows {
            for j in 0..self.ncols {
                widths[j] = widths[j].max(cells[i * self.ncols + j].len());
            }
        }
        for i in 0..self.nrows {
            write!(f, "[ ")?;
            for j in 0..self.ncols {
                let cell = &cells[i * self.ncols + j];
                write!(f, "{cell:>width$}", width = widths[j])?;
                if j + 1 < self.ncols {
                    write!(f, "  ")?;
                }
            }
            writeln!(f, " ]")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bind<'a>(pairs: &'a [(&'a str, f64)]) -> impl Fn(&str) -> Option<f64> + 'a {
        move |name| pairs.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
    }

    #[test]
    fn canonical_merge_and_eval() {
        let e = Expr::param("a")
            .mul(&Expr::param("b"))
            .add(&Expr::param("b").mul(&Expr::param("a")))
            .sub(&Expr::constant(3.0));
        assert_eq!(e.terms().len(), 2);
        let v = e.eval(&bind(&[("a", 2.0), ("b", 5.0)])).unwrap();
        assert_eq!(v, 2.0 * 2.0 * 5.0 - 3.0);
    }

    #[test]
    fn subtraction_cancels_exactly() {
        let e = Expr::param("x").sub(&Expr::param("x"));
        assert!(e.is_zero());
    }

    #[test]
    fn division_by_monomial() {
        let num = Expr::param("A").mul(&Expr::param("A")).neg();
        let den = Expr::param("R_v").neg();
        let q = num.div_monomial(&den).unwrap();
        assert_eq!(q.to_string(), "A^2/R_v");
        let v = q.eval(&bind(&[("A", 3.0), ("R_v", 2.0)])).unwrap();
        assert_eq!(v, 4.5);
    }

    #[test]
    fn division_by_sum_fails() {
        let den = Expr::param("a").add(&Expr::param("b"));
        assert!(Expr::one().div_monomial(&den).is_none());
    }

    #[test]
    fn display_forms() {
        assert_eq!(Expr::zero().to_string(), "0");
        assert_eq!(Expr::param("K12").neg().to_string(), "-K12");
        assert_eq!(Expr::recip_param("K_m").to_string(), "1/K_m");
        let e = Expr::param("b_p")
            .neg()
            .sub(&Expr::param("A").mul(&Expr::param("A")).div_monomial(&Expr::param("R_v")).unwrap());
        assert_eq!(e.to_string(), "-A^2/R_v - b_p");
    }

    #[test]
    fn parse_round_trip() {
        for src in [
            "-K12",
            "1/K_m",
            "-b_p - A^2/R_v",
            "2.5*a*b/c",
            "3e-3",
            "-(a - b)*c",
            "x^2/y^3 + 4",
        ] {
            let e = parse_expr(src).unwrap();
            let back = parse_expr(&e.to_string()).unwrap();
            assert_eq!(e, back, "round trip failed for {src}");
        }
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(parse_expr("a +").is_err());
        assert!(parse_expr("(a").is_err());
        assert!(parse_expr("1..2").is_err());
    }

    #[test]
    fn substitution() {
        let e = Expr::param("C_m").mul(&Expr::param("k")).add(&Expr::param("k"));
        let s = e.substitute("C_m", 0.0);
        assert_eq!(s, Expr::param("k"));
    }

    #[test]
    fn matrix_product_transpose() {
        let t = SymMatrix::from_fn(2, 1, |i, _| {
            if i == 0 {
                Expr::param("a")
            } else {
                Expr::one()
            }
        });
        let l = SymMatrix::from_fn(2, 2, |i, j| {
            if i == j && i == 0 {
                Expr::param("m")
            } else if i == j {
                Expr::one()
            } else {
                Expr::zero()
            }
        });
        let r = t.transpose().matmul(&l).matmul(&t);
        assert_eq!(r.nrows(), 1);
        assert_eq!(r.get(0, 0).to_string(), "1 + a^2*m");
    }
}
