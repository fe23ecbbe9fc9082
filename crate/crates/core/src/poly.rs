//! Sparse multivariate polynomials with real coefficients.
//!
//! A [`Polynomial`] is a hash map from canonical [`Monomial`]s to `f64`
//! coefficients. Coefficients whose magnitude falls below
//! [`CLEANUP_THRESHOLD`] are dropped on every write, so two polynomials with
//! the same value compare equal regardless of how they were built (up to
//! float rounding). The hasher has fixed keys, so iteration order, and with
//! it the rounding of accumulated coefficients, is the same in every process.

use std::cmp::Ordering;
use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::BuildHasherDefault;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Coefficients with magnitude below this are never stored.
pub const CLEANUP_THRESHOLD: f64 = 1e-30;

type Factors = SmallVec<[(u32, u32); 4]>;

/// A product of variable powers, stored as `(variable, exponent)` pairs with
/// strictly increasing variable indices and exponents `>= 1`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Monomial {
    factors: Factors,
    degree: u32,
}

impl Monomial {
    /// The unit monomial `1`.
    pub fn unit() -> Self {
        Self::default()
    }

    pub fn var(v: u32) -> Self {
        Self::pow(v, 1)
    }

    pub fn pow(v: u32, e: u32) -> Self {
        if e == 0 {
            return Self::unit();
        }
        let mut factors = Factors::new();
        factors.push((v, e));
        Self { factors, degree: e }
    }

    /// Builds a monomial from arbitrary `(variable, exponent)` pairs, merging
    /// repeated variables and dropping zero exponents.
    pub fn from_pairs<I: IntoIterator<Item = (u32, u32)>>(pairs: I) -> Self {
        let mut factors: Factors = pairs.into_iter().filter(|&(_, e)| e > 0).collect();
        factors.sort_unstable_by_key(|&(v, _)| v);
        let mut merged = Factors::new();
        for (v, e) in factors {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += e,
                _ => merged.push((v, e)),
            }
        }
        let degree = merged.iter().map(|&(_, e)| e).sum();
        Self { factors: merged, degree }
    }

    /// Builds a monomial from a multiset of variable indices, e.g. `[1, 1, 2]`
    /// is `x1^2 x2`.
    pub fn from_vars(vars: &[u32]) -> Self {
        Self::from_pairs(vars.iter().map(|&v| (v, 1)))
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn is_unit(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn factors(&self) -> &[(u32, u32)] {
        &self.factors
    }

    /// Exponent of `v` (0 when absent).
    pub fn exponent(&self, v: u32) -> u32 {
        match self.factors.binary_search_by_key(&v, |&(var, _)| var) {
            Ok(i) => self.factors[i].1,
            Err(_) => 0,
        }
    }

    /// Largest variable index used, if any.
    pub fn max_var(&self) -> Option<u32> {
        self.factors.last().map(|&(v, _)| v)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let (a, b) = (&self.factors, &other.factors);
        let mut out = Factors::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((a[i].0, a[i].1 + b[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Monomial { factors: out, degree: self.degree + other.degree }
    }

    /// Returns this monomial with the exponent of `v` changed by `delta`.
    fn shift_exponent(&self, v: u32, delta: i64) -> Monomial {
        let mut factors = self.factors.clone();
        match factors.binary_search_by_key(&v, |&(var, _)| var) {
            Ok(i) => {
                let e = factors[i].1 as i64 + delta;
                debug_assert!(e >= 0);
                if e == 0 {
                    factors.remove(i);
                } else {
                    factors[i].1 = e as u32;
                }
            }
            Err(i) => {
                debug_assert!(delta > 0);
                factors.insert(i, (v, delta as u32));
            }
        }
        Monomial { factors, degree: (self.degree as i64 + delta) as u32 }
    }

    /// Removes every occurrence of `v`, returning the remaining monomial and
    /// the removed exponent.
    pub fn without(&self, v: u32) -> (Monomial, u32) {
        let e = self.exponent(v);
        if e == 0 {
            (self.clone(), 0)
        } else {
            (self.shift_exponent(v, -(e as i64)), e)
        }
    }

    /// Expanded variable sequence, e.g. `x1^2 x3` gives `[1, 1, 3]`.
    pub fn vars(&self) -> impl Iterator<Item = u32> + '_ {
        self.factors.iter().flat_map(|&(v, e)| std::iter::repeat(v).take(e as usize))
    }

    pub fn evaluate_unchecked(&self, x: &[f64]) -> f64 {
        self.factors.iter().fold(1.0, |acc, &(v, e)| acc * x[v as usize].powi(e as i32))
    }
}

/// Degree first, then lexicographic on the expanded variable sequence, so that
/// `x1^2 < x1 x2 < x2^2`.
impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree.cmp(&other.degree).then_with(|| self.vars().cmp(other.vars()))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_unit() {
            return write!(f, "1");
        }
        for (k, &(v, e)) in self.factors.iter().enumerate() {
            if k > 0 {
                write!(f, "*")?;
            }
            if e == 1 {
                write!(f, "x{v}")?;
            } else {
                write!(f, "x{v}^{e}")?;
            }
        }
        Ok(())
    }
}

/// Sparse polynomial over `f64`.
#[derive(Clone, Debug, Default)]
pub struct Polynomial {
    terms: HashMap<Monomial, f64, BuildHasherDefault<DefaultHasher>>,
    nvars: usize,
}

impl PartialEq for Polynomial {
    fn eq(&self, other: &Self) -> bool {
        self.terms == other.terms
    }
}

impl Polynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self::term(c, Monomial::unit())
    }

    pub fn var(v: u32) -> Self {
        Self::term(1.0, Monomial::var(v))
    }

    pub fn term(c: f64, m: Monomial) -> Self {
        let mut p = Self::zero();
        p.add_term(m, c);
        p
    }

    pub fn from_terms<I: IntoIterator<Item = (Monomial, f64)>>(terms: I) -> Self {
        let mut p = Self::zero();
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    /// Accumulates `c * m`, dropping the term if it cancels below the
    /// cleanup threshold.
    pub fn add_term(&mut self, m: Monomial, c: f64) {
        if let Some(v) = m.max_var() {
            self.nvars = self.nvars.max(v as usize + 1);
        }
        let entry = self.terms.entry(m);
        match entry {
            std::collections::hash_map::Entry::Occupied(mut o) => {
                let sum = *o.get() + c;
                if sum.abs() < CLEANUP_THRESHOLD {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
            std::collections::hash_map::Entry::Vacant(v) => {
                if c.abs() >= CLEANUP_THRESHOLD {
                    v.insert(c);
                }
            }
        }
    }

    /// Raises the variable-count hint; never lowers it.
    pub fn with_nvars(mut self, n: usize) -> Self {
        self.nvars = self.nvars.max(n);
        self
    }

    /// Variable-count hint: at least one more than the largest index used.
    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, m: &Monomial) -> f64 {
        self.terms.get(m).copied().unwrap_or(0.0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    /// Terms in canonical (degree, lex) order.
    pub fn sorted_terms(&self) -> Vec<(&Monomial, f64)> {
        let mut t: Vec<_> = self.terms().collect();
        t.sort_by(|a, b| a.0.cmp(b.0));
        t
    }

    /// Total degree; 0 for the zero polynomial.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    /// Largest variable index that actually appears.
    pub fn max_var(&self) -> Option<u32> {
        self.terms.keys().filter_map(Monomial::max_var).max()
    }

    /// `self + scale * other`.
    pub fn add_scaled(&self, other: &Polynomial, scale: f64) -> Polynomial {
        let mut out = self.clone();
        out.add_assign_scaled(other, scale);
        out
    }

    pub fn add_assign_scaled(&mut self, other: &Polynomial, scale: f64) {
        for (m, c) in other.terms() {
            self.add_term(m.clone(), scale * c);
        }
        self.nvars = self.nvars.max(other.nvars);
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        let mut out = Polynomial::zero().with_nvars(self.nvars);
        for (m, c) in self.terms() {
            out.add_term(m.clone(), s * c);
        }
        out
    }

    pub fn multiply(&self, other: &Polynomial) -> Polynomial {
        let mut out = Polynomial::zero().with_nvars(self.nvars.max(other.nvars));
        out.terms.reserve(self.len() * other.len());
        for (ma, ca) in self.terms() {
            for (mb, cb) in other.terms() {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }

    pub fn square(&self) -> Polynomial {
        self.multiply(self)
    }

    /// Partial derivative with respect to `x_v`.
    pub fn differentiate(&self, v: u32) -> Polynomial {
        let mut out = Polynomial::zero().with_nvars(self.nvars);
        for (m, c) in self.terms() {
            let e = m.exponent(v);
            if e > 0 {
                out.add_term(m.shift_exponent(v, -1), c * e as f64);
            }
        }
        out
    }

    /// Antiderivative in `x_v` with zero integration constant.
    pub fn integrate(&self, v: u32) -> Polynomial {
        let mut out = Polynomial::zero().with_nvars(self.nvars.max(v as usize + 1));
        for (m, c) in self.terms() {
            let e = m.exponent(v);
            out.add_term(m.shift_exponent(v, 1), c / (e + 1) as f64);
        }
        out
    }

    /// Evaluates at `x`, which must cover every variable index in use.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if let Some(v) = self.max_var() {
            if v as usize >= x.len() {
                return Err(Error::InputShape(format!(
                    "point has {} entries but polynomial uses x{v}",
                    x.len()
                )));
            }
        }
        Ok(self.evaluate_unchecked(x))
    }

    pub fn evaluate_unchecked(&self, x: &[f64]) -> f64 {
        self.terms().map(|(m, c)| c * m.evaluate_unchecked(x)).sum()
    }

    /// Partial derivatives with respect to `x_0 .. x_{n-1}`, where `n` is the
    /// variable-count hint.
    pub fn gradient(&self) -> Vec<Polynomial> {
        (0..self.nvars as u32).map(|v| self.differentiate(v)).collect()
    }

    /// Matrix of second partials over `x_0 .. x_{n-1}`. The upper triangle is
    /// differentiated and mirrored, so the result is exactly symmetric.
    pub fn hessian(&self) -> Vec<Vec<Polynomial>> {
        let n = self.nvars;
        let grad = self.gradient();
        let mut h = vec![vec![Polynomial::zero(); n]; n];
        for i in 0..n {
            for j in i..n {
                let hij = grad[i].differentiate(j as u32).with_nvars(n);
                if j != i {
                    h[j][i] = hij.clone();
                }
                h[i][j] = hij;
            }
        }
        h
    }

    /// Replaces `x_v` by the constant `value`.
    pub fn substitute(&self, v: u32, value: f64) -> Polynomial {
        let mut out = Polynomial::zero().with_nvars(self.nvars);
        for (m, c) in self.terms() {
            let (rest, e) = m.without(v);
            out.add_term(rest, c * value.powi(e as i32));
        }
        out
    }

    /// Term-by-term comparison within `tol` (absolute, on each coefficient).
    pub fn approx_eq(&self, other: &Polynomial, tol: f64) -> bool {
        let close = |a: &Polynomial, b: &Polynomial| {
            a.terms().all(|(m, c)| (c - b.coeff(m)).abs() <= tol)
        };
        close(self, other) && close(other, self)
    }

    /// Line-oriented text form: `coeff i^e j^e ...` per term, `coeff 1` for
    /// the constant term, canonical order. Coefficients use the shortest
    /// decimal that round-trips.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (m, c) in self.sorted_terms() {
            write_term(&mut s, m, c);
            s.push('\n');
        }
        s
    }

    /// Parses [`Polynomial::to_text`] output. Blank lines are ignored.
    pub fn from_text(text: &str) -> Result<Polynomial> {
        let mut p = Polynomial::zero();
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (m, c) = parse_term(line).map_err(|msg| Error::Parse { line: k + 1, msg })?;
            p.add_term(m, c);
        }
        Ok(p)
    }
}

pub(crate) fn write_term(s: &mut String, m: &Monomial, c: f64) {
    use std::fmt::Write;
    let _ = write!(s, "{c:?}");
    if m.is_unit() {
        s.push_str(" 1");
    }
    for &(v, e) in m.factors() {
        let _ = write!(s, " {v}^{e}");
    }
}

pub(crate) fn parse_term(line: &str) -> std::result::Result<(Monomial, f64), String> {
    let mut tokens = line.split_whitespace();
    let coeff: f64 = tokens
        .next()
        .ok_or("empty term")?
        .parse()
        .map_err(|e| format!("bad coefficient: {e}"))?;
    let mut pairs = Vec::new();
    let mut unit = false;
    for tok in tokens {
        if tok == "1" {
            unit = true;
            continue;
        }
        let (v, e) = tok.split_once('^').ok_or_else(|| format!("bad factor `{tok}`"))?;
        let v: u32 = v.parse().map_err(|_| format!("bad variable `{v}`"))?;
        let e: u32 = e.parse().map_err(|_| format!("bad exponent `{e}`"))?;
        if e == 0 {
            return Err(format!("zero exponent in `{tok}`"));
        }
        pairs.push((v, e));
    }
    if unit && !pairs.is_empty() {
        return Err("unit marker mixed with factors".into());
    }
    Ok((Monomial::from_pairs(pairs), coeff))
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms = self.sorted_terms();
        if terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (m, c)) in terms.into_iter().enumerate() {
            if k > 0 {
                write!(f, " {} ", if c < 0.0 { '-' } else { '+' })?;
            } else if c < 0.0 {
                write!(f, "-")?;
            }
            let a = c.abs();
            if m.is_unit() {
                write!(f, "{a}")?;
            } else if a == 1.0 {
                write!(f, "{m}")?;
            } else {
                write!(f, "{a}*{m}")?;
            }
        }
        Ok(())
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        self.add_scaled(rhs, 1.0)
    }
}

impl Add for Polynomial {
    type Output = Polynomial;
    fn add(mut self, rhs: Polynomial) -> Polynomial {
        self.add_assign_scaled(&rhs, 1.0);
        self
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self.add_scaled(rhs, -1.0)
    }
}

impl Sub for Polynomial {
    type Output = Polynomial;
    fn sub(mut self, rhs: Polynomial) -> Polynomial {
        self.add_assign_scaled(&rhs, -1.0);
        self
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        self.multiply(rhs)
    }
}

impl Mul for Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: Polynomial) -> Polynomial {
        self.multiply(&rhs)
    }
}

impl Mul<f64> for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: f64) -> Polynomial {
        self.scale(rhs)
    }
}

impl Mul<f64> for Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: f64) -> Polynomial {
        self.scale(rhs)
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

impl Neg for Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

/// A polynomial flattened into contiguous arrays for repeated evaluation.
#[derive(Clone, Debug, Default)]
pub struct CompiledPolynomial {
    coeffs: Vec<f64>,
    offsets: Vec<u32>,
    factors: Vec<(u32, u32)>,
    max_var: Option<u32>,
}

impl CompiledPolynomial {
    pub fn new(p: &Polynomial) -> Self {
        let mut out = Self { max_var: p.max_var(), ..Self::default() };
        out.offsets.push(0);
        for (m, c) in p.sorted_terms() {
            out.coeffs.push(c);
            out.factors.extend_from_slice(m.factors());
            out.offsets.push(out.factors.len() as u32);
        }
        out
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn max_var(&self) -> Option<u32> {
        self.max_var
    }

    /// Evaluates without bounds checks on the variable indices beyond the
    /// slice access itself.
    #[inline]
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        let mut sum = 0.0;
        for (k, &c) in self.coeffs.iter().enumerate() {
            let lo = self.offsets[k] as usize;
            let hi = self.offsets[k + 1] as usize;
            let mut t = c;
            for &(v, e) in &self.factors[lo..hi] {
                let xv = x[v as usize];
                t *= match e {
                    1 => xv,
                    2 => xv * xv,
                    _ => xv.powi(e as i32),
                };
            }
            sum += t;
        }
        sum
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(v: u32) -> Polynomial {
        Polynomial::var(v)
    }

    /// x0^2 + x0 x1 + x2^4
    fn worked_f() -> Polynomial {
        &(&x(0) * &x(0)) + &(&x(0) * &x(1)) + Polynomial::term(1.0, Monomial::pow(2, 4))
    }

    #[test]
    fn add_cancels_to_empty() {
        let p = x(1).add_scaled(&-x(1), 1.0);
        assert!(p.is_zero());
        assert_eq!(p.len(), 0);
    }

    #[test]
    fn add_disjoint_terms() {
        let p = (&x(0) * &x(0)).add_scaled(&(&x(0) * &x(1)), 1.0);
        assert_eq!(p.len(), 2);
        assert_eq!(p.coeff(&Monomial::pow(0, 2)), 1.0);
        assert_eq!(p.coeff(&Monomial::from_vars(&[0, 1])), 1.0);
    }

    #[test]
    fn add_scaled_coefficients() {
        let p = x(1).scale(2.0);
        let q = p.add_scaled(&p, 0.5);
        assert_eq!(q, x(1).scale(3.0));
    }

    #[test]
    fn mul_difference_of_squares() {
        let p = &x(1) + &Polynomial::constant(1.0);
        let q = &x(1) - &Polynomial::constant(1.0);
        let expected = &(&x(1) * &x(1)) - &Polynomial::constant(1.0);
        assert_eq!(&p * &q, expected);
    }

    #[test]
    fn derivative_of_lifted_worked_example() {
        let f1 = worked_f().integrate(1);
        // x1 x0^2 + 1/2 x0 x1^2 + x1 x2^4
        let expected = Polynomial::from_terms([
            (Monomial::from_pairs([(0, 2), (1, 1)]), 1.0),
            (Monomial::from_pairs([(0, 1), (1, 2)]), 0.5),
            (Monomial::from_pairs([(1, 1), (2, 4)]), 1.0),
        ]);
        assert_eq!(f1, expected);
        let d0 = Polynomial::from_terms([
            (Monomial::from_vars(&[0, 1]), 2.0),
            (Monomial::pow(1, 2), 0.5),
        ]);
        assert_eq!(f1.differentiate(0), d0);
        assert_eq!(f1.differentiate(1), worked_f());
        assert_eq!(
            f1.differentiate(2),
            Polynomial::term(4.0, Monomial::from_pairs([(1, 1), (2, 3)]))
        );
    }

    #[test]
    fn derivative_of_absent_variable_is_zero() {
        let p = Polynomial::term(1.0, Monomial::from_pairs([(1, 1), (0, 2)]));
        assert!(p.differentiate(2).is_zero());
    }

    #[test]
    fn integrate_zero_is_zero() {
        assert!(Polynomial::zero().integrate(1).is_zero());
    }

    #[test]
    fn evaluate_basic_points() {
        let f = worked_f();
        assert_eq!(f.evaluate(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(f.evaluate(&[1.0, 1.0, 1.0]).unwrap(), 3.0);
        assert!(matches!(f.evaluate(&[1.0, 1.0]), Err(Error::InputShape(_))));
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let c = Polynomial::constant(4.0).with_nvars(3);
        assert!(c.gradient().iter().all(Polynomial::is_zero));
        assert_eq!(c.gradient().len(), 3);
    }

    #[test]
    fn hessian_entries() {
        let h = (&x(0) * &x(0)).hessian();
        assert_eq!(h.len(), 1);
        assert_eq!(h[0][0], Polynomial::constant(2.0));

        let f1 = worked_f().integrate(1);
        let h = f1.hessian();
        let at = [1.0, 1.0, 1.0];
        assert_eq!(h[0][1].evaluate(&at).unwrap(), 3.0);
        assert_eq!(h[1][0], h[0][1]);
    }

    #[test]
    fn substitute_examples() {
        let p = &x(0) * &x(1);
        assert!(p.substitute(1, 0.0).is_zero());
        let q = &(&x(1) * &x(1)) + &x(0);
        assert_eq!(q.substitute(1, 2.0), &x(0) + &Polynomial::constant(4.0));
    }

    #[test]
    fn monomial_order_is_degree_then_lex() {
        let mut ms = vec![
            Monomial::pow(2, 2),
            Monomial::from_vars(&[1, 2]),
            Monomial::var(2),
            Monomial::unit(),
            Monomial::pow(1, 2),
            Monomial::var(1),
        ];
        ms.sort();
        let shown: Vec<String> = ms.iter().map(ToString::to_string).collect();
        assert_eq!(shown, ["1", "x1", "x2", "x1^2", "x1*x2", "x2^2"]);
    }

    #[test]
    fn text_form() {
        let p = &worked_f() - &Polynomial::constant(0.1);
        let text = p.to_text();
        assert_eq!(text, "-0.1 1\n1.0 0^2\n1.0 0^1 1^1\n1.0 2^4\n");
        assert_eq!(Polynomial::from_text(&text).unwrap(), p);
        assert!(Polynomial::from_text("1.0 3").is_err());
        assert!(Polynomial::from_text("abc 1").is_err());
    }

    #[test]
    fn compiled_matches_direct() {
        let f = worked_f().integrate(1);
        let c = CompiledPolynomial::new(&f);
        let pt = [0.3, -1.2, 0.7];
        assert!((c.evaluate(&pt) - f.evaluate(&pt).unwrap()).abs() < 1e-15);
    }
}
