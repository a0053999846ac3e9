//! Multivariate polynomials with exact rational coefficients.
//!
//! Coefficients are kept as arbitrary-precision rationals so that model files
//! round-trip losslessly. Evaluation happens in `f64`: every term caches the
//! nearest double of its coefficient, and [`Polynomial::evaluate`] and
//! [`CompiledPolynomial::eval`] sum the terms in the same order so they agree
//! bit for bit.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Rational = BigRational;

/// Whether a parameter is drawn from the distribution or chosen by the synthesizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParameterKind {
    Uncontrollable,
    ControllableCost,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub kind: ParameterKind,
}

impl Parameter {
    pub fn uncontrollable(name: impl Into<String>) -> Self {
        Parameter {
            name: name.into(),
            kind: ParameterKind::Uncontrollable,
        }
    }

    pub fn cost(name: impl Into<String>) -> Self {
        Parameter {
            name: name.into(),
            kind: ParameterKind::ControllableCost,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("parameter `{0}` has no value")]
    MissingParameter(String),
    #[error("at offset {offset}: {msg}")]
    Parse { offset: usize, msg: String },
}

fn parse_err<T>(offset: usize, msg: impl Into<String>) -> Result<T, PolyError> {
    Err(PolyError::Parse {
        offset,
        msg: msg.into(),
    })
}

/// A power product of parameters. Factors are sorted by name and every
/// exponent is positive; the empty product is the constant monomial.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Monomial(Vec<(Arc<str>, u32)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn var(name: &str) -> Self {
        Monomial(vec![(Arc::from(name), 1)])
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|(_, e)| e).sum()
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn factors(&self) -> &[(Arc<str>, u32)] {
        &self.0
    }

    pub fn exponent(&self, name: &str) -> u32 {
        self.0
            .iter()
            .find(|(n, _)| &**n == name)
            .map_or(0, |(_, e)| *e)
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        let mut out = Vec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].0.cmp(&other.0[j].0) {
                Ordering::Less => {
                    out.push(self.0[i].clone());
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(other.0[j].clone());
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((self.0[i].0.clone(), self.0[i].1 + other.0[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.0[i..]);
        out.extend_from_slice(&other.0[j..]);
        Monomial(out)
    }

    /// Removes the given variable, returning the remaining monomial and the
    /// exponent it had.
    fn without(&self, name: &str) -> (Monomial, u32) {
        let mut exp = 0;
        let rest = self
            .0
            .iter()
            .filter(|(n, e)| {
                if &**n == name {
                    exp = *e;
                    false
                } else {
                    true
                }
            })
            .cloned()
            .collect();
        (Monomial(rest), exp)
    }
}

impl Ord for Monomial {
    /// Graded lexicographic order, variables ordered by name.
    fn cmp(&self, other: &Self) -> Ordering {
        match self.degree().cmp(&other.degree()) {
            Ordering::Equal => {}
            ord => return ord,
        }
        for (a, b) in self.0.iter().zip(other.0.iter()) {
            match a.0.cmp(&b.0) {
                // the smaller name has a positive exponent here and zero in the other
                Ordering::Less => return Ordering::Greater,
                Ordering::Greater => return Ordering::Less,
                Ordering::Equal => match a.1.cmp(&b.1) {
                    Ordering::Equal => {}
                    ord => return ord,
                },
            }
        }
        self.0.len().cmp(&other.0.len())
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        for (k, (name, e)) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, "*")?;
            }
            if *e == 1 {
                write!(f, "{name}")?;
            } else {
                write!(f, "{name}^{e}")?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Term {
    coeff: Rational,
    approx: f64,
    mono: Monomial,
}

impl Term {
    fn new(coeff: Rational, mono: Monomial) -> Self {
        let approx = rational_to_f64(&coeff);
        Term {
            coeff,
            approx,
            mono,
        }
    }
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // to_f64 gives up on huge numerators/denominators; scale both down
        let n = r.numer().bits() as i64;
        let d = r.denom().bits() as i64;
        let shift = (n.max(d) - 1000).max(0) as usize;
        let num = (r.numer() >> shift).to_f64().unwrap_or(0.0);
        let den = (r.denom() >> shift).to_f64().unwrap_or(f64::INFINITY);
        num / den
    })
}

/// Exact conversion of a finite double into a rational.
pub fn f64_to_rational(x: f64) -> Rational {
    Rational::from_float(x).expect("finite float")
}

/// A normalized polynomial over named parameters: no duplicate monomials, no
/// zero coefficients, terms sorted by decreasing graded-lex order. The zero
/// polynomial has no terms.
#[derive(Debug, Clone, Default)]
pub struct Polynomial {
    terms: Vec<Term>,
}

impl PartialEq for Polynomial {
    fn eq(&self, other: &Self) -> bool {
        self.terms.len() == other.terms.len()
            && self
                .terms
                .iter()
                .zip(&other.terms)
                .all(|(a, b)| a.mono == b.mono && a.coeff == b.coeff)
    }
}

impl Eq for Polynomial {}

impl Hash for Polynomial {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.terms.len().hash(state);
        for t in &self.terms {
            t.mono.hash(state);
            t.coeff.hash(state);
        }
    }
}

impl Polynomial {
    pub fn zero() -> Self {
        Polynomial { terms: Vec::new() }
    }

    pub fn one() -> Self {
        Self::constant(Rational::one())
    }

    pub fn constant(c: Rational) -> Self {
        Self::from_terms([(c, Monomial::one())])
    }

    pub fn from_f64(c: f64) -> Self {
        Self::constant(f64_to_rational(c))
    }

    pub fn var(name: &str) -> Self {
        Self::from_terms([(Rational::one(), Monomial::var(name))])
    }

    /// Builds a normalized polynomial, merging equal monomials and dropping zeros.
    pub fn from_terms(terms: impl IntoIterator<Item = (Rational, Monomial)>) -> Self {
        let mut acc: BTreeMap<Monomial, Rational> = BTreeMap::new();
        for (c, m) in terms {
            if c.is_zero() {
                continue;
            }
            *acc.entry(m).or_insert_with(Rational::zero) += c;
        }
        let terms = acc
            .into_iter()
            .rev()
            .filter(|(_, c)| !c.is_zero())
            .map(|(m, c)| Term::new(c, m))
            .collect();
        Polynomial { terms }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Rational, &Monomial)> {
        self.terms.iter().map(|t| (&t.coeff, &t.mono))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .iter()
            .map(|t| t.mono.degree())
            .max()
            .unwrap_or(0)
    }

    /// The value of a parameter-free polynomial.
    pub fn is_constant(&self) -> Option<f64> {
        match self.terms.as_slice() {
            [] => Some(0.0),
            [t] if t.mono.is_one() => Some(t.approx),
            _ => None,
        }
    }

    pub fn constant_value(&self) -> Option<Rational> {
        match self.terms.as_slice() {
            [] => Some(Rational::zero()),
            [t] if t.mono.is_one() => Some(t.coeff.clone()),
            _ => None,
        }
    }

    pub fn parameters(&self) -> BTreeSet<String> {
        self.terms
            .iter()
            .flat_map(|t| t.mono.0.iter().map(|(n, _)| n.to_string()))
            .collect()
    }

    pub fn evaluate(&self, valuation: &HashMap<String, f64>) -> Result<f64, PolyError> {
        self.evaluate_with(|name| valuation.get(name).copied())
    }

    pub fn evaluate_with(&self, lookup: impl Fn(&str) -> Option<f64>) -> Result<f64, PolyError> {
        let mut acc = 0.0;
        for t in &self.terms {
            let mut m = t.approx;
            for (name, e) in &t.mono.0 {
                let x =
                    lookup(name).ok_or_else(|| PolyError::MissingParameter(name.to_string()))?;
                m *= x.powi(*e as i32);
            }
            acc += m;
        }
        Ok(acc)
    }

    /// Exact evaluation at a rational point.
    pub fn evaluate_exact(
        &self,
        valuation: &HashMap<String, Rational>,
    ) -> Result<Rational, PolyError> {
        let mut acc = Rational::zero();
        for t in &self.terms {
            let mut m = t.coeff.clone();
            for (name, e) in &t.mono.0 {
                let x = valuation
                    .get(&**name)
                    .ok_or_else(|| PolyError::MissingParameter(name.to_string()))?;
                m *= num_traits::pow(x.clone(), *e as usize);
            }
            acc += m;
        }
        Ok(acc)
    }

    /// Resolves parameter names to positions so evaluation is a slice lookup.
    pub fn compile(&self, index: &HashMap<String, usize>) -> Result<CompiledPolynomial, PolyError> {
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let factors = t
                    .mono
                    .0
                    .iter()
                    .map(|(n, e)| {
                        index
                            .get(&**n)
                            .map(|&i| (i as u32, *e as i32))
                            .ok_or_else(|| PolyError::MissingParameter(n.to_string()))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok((t.approx, factors))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(CompiledPolynomial { terms })
    }

    pub fn scale(&self, c: &Rational) -> Polynomial {
        if c.is_zero() {
            return Polynomial::zero();
        }
        Polynomial {
            terms: self
                .terms
                .iter()
                .map(|t| Term::new(&t.coeff * c, t.mono.clone()))
                .collect(),
        }
    }

    pub fn pow(&self, e: u32) -> Polynomial {
        let mut out = Polynomial::one();
        for _ in 0..e {
            out = &out * self;
        }
        out
    }

    /// Splits `self` as `base + Σ coeff_i · w_i` where `w_i` ranges over `vars`.
    /// Returns `None` when some monomial has total degree above one in `vars`.
    pub fn affine_split(&self, vars: &[&str]) -> Option<(Polynomial, Vec<Polynomial>)> {
        let mut base = Vec::new();
        let mut coeffs: Vec<Vec<(Rational, Monomial)>> = vec![Vec::new(); vars.len()];
        for t in &self.terms {
            let mut hit = None;
            let mut rest = t.mono.clone();
            for (k, v) in vars.iter().enumerate() {
                let (r, e) = rest.without(v);
                if e > 0 {
                    if e > 1 || hit.is_some() {
                        return None;
                    }
                    hit = Some(k);
                    rest = r;
                }
            }
            match hit {
                Some(k) => coeffs[k].push((t.coeff.clone(), rest)),
                None => base.push((t.coeff.clone(), rest)),
            }
        }
        Some((
            Polynomial::from_terms(base),
            coeffs.into_iter().map(Polynomial::from_terms).collect(),
        ))
    }

    pub fn parse(text: &str) -> Result<Polynomial, PolyError> {
        let mut p = Parser {
            src: text.as_bytes(),
            pos: 0,
        };
        p.skip_ws();
        if p.pos == p.src.len() {
            return parse_err(p.pos, "expected expression");
        }
        let poly = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return parse_err(p.pos, format!("unexpected `{}`", p.src[p.pos] as char));
        }
        Ok(poly)
    }
}

impl FromStr for Polynomial {
    type Err = PolyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Polynomial::parse(s)
    }
}

impl std::ops::Add for &Polynomial {
    type Output = Polynomial;

    fn add(self, rhs: &Polynomial) -> Polynomial {
        Polynomial::from_terms(
            self.terms
                .iter()
                .chain(&rhs.terms)
                .map(|t| (t.coeff.clone(), t.mono.clone())),
        )
    }
}

impl std::ops::Sub for &Polynomial {
    type Output = Polynomial;

    fn sub(self, rhs: &Polynomial) -> Polynomial {
        Polynomial::from_terms(
            self.terms
                .iter()
                .map(|t| (t.coeff.clone(), t.mono.clone()))
                .chain(rhs.terms.iter().map(|t| (-t.coeff.clone(), t.mono.clone()))),
        )
    }
}

impl std::ops::Mul for &Polynomial {
    type Output = Polynomial;

    fn mul(self, rhs: &Polynomial) -> Polynomial {
        Polynomial::from_terms(self.terms.iter().flat_map(|a| {
            rhs.terms
                .iter()
                .map(move |b| (&a.coeff * &b.coeff, a.mono.mul(&b.mono)))
        }))
    }
}

impl std::ops::Neg for &Polynomial {
    type Output = Polynomial;

    fn neg(self) -> Polynomial {
        self.scale(&-Rational::one())
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl std::ops::$tr for Polynomial {
            type Output = Polynomial;
            fn $m(self, rhs: Polynomial) -> Polynomial {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

fn fmt_rational(f: &mut fmt::Formatter<'_>, r: &Rational) -> fmt::Result {
    if r.denom().is_one() {
        write!(f, "{}", r.numer())
    } else {
        write!(f, "{}/{}", r.numer(), r.denom())
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, t) in self.terms.iter().enumerate() {
            let neg = t.coeff.is_negative();
            match (k, neg) {
                (0, true) => write!(f, "-")?,
                (0, false) => {}
                (_, true) => write!(f, " - ")?,
                (_, false) => write!(f, " + ")?,
            }
            let abs = t.coeff.abs();
            if t.mono.is_one() {
                fmt_rational(f, &abs)?;
            } else if abs.is_one() {
                write!(f, "{}", t.mono)?;
            } else {
                fmt_rational(f, &abs)?;
                write!(f, "*{}", t.mono)?;
            }
        }
        Ok(())
    }
}

impl Serialize for Polynomial {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Polynomial {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Polynomial::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// A polynomial with parameters resolved to slice positions.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledPolynomial {
    terms: Vec<(f64, Vec<(u32, i32)>)>,
}

impl CompiledPolynomial {
    #[inline]
    pub fn eval(&self, values: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (c, factors) in &self.terms {
            let mut m = *c;
            for &(i, e) in factors {
                m *= values[i as usize].powi(e);
            }
            acc += m;
        }
        acc
    }

    pub fn uses(&self, idx: usize) -> bool {
        self.terms
            .iter()
            .any(|(_, f)| f.iter().any(|&(i, _)| i as usize == idx))
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Polynomial, PolyError> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    acc = &acc + &self.term()?;
                }
                Some(b'-') => {
                    self.pos += 1;
                    acc = &acc - &self.term()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Polynomial, PolyError> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    acc = &acc * &self.unary()?;
                }
                Some(b'/') => {
                    self.pos += 1;
                    let at = self.pos;
                    let divisor = self.unary()?;
                    match divisor.constant_value() {
                        Some(c) if !c.is_zero() => acc = acc.scale(&c.recip()),
                        Some(_) => return parse_err(at, "division by zero"),
                        None => {
                            return parse_err(
                                at,
                                "division by a non-constant: only polynomials are supported",
                            )
                        }
                    }
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<Polynomial, PolyError> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(-&self.unary()?)
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Polynomial, PolyError> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            self.skip_ws();
            let start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if start == self.pos {
                return parse_err(start, "expected a nonnegative integer exponent");
            }
            let e: u32 = std::str::from_utf8(&self.src[start..self.pos])
                .unwrap()
                .parse()
                .map_err(|_| PolyError::Parse {
                    offset: start,
                    msg: "exponent too large".into(),
                })?;
            return Ok(base.pow(e));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Polynomial, PolyError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(b')') {
                    return parse_err(self.pos, "expected `)`");
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                Ok(Polynomial::var(
                    std::str::from_utf8(&self.src[start..self.pos]).unwrap(),
                ))
            }
            Some(c) => parse_err(self.pos, format!("unexpected `{}`", c as char)),
            None => parse_err(self.pos, "unexpected end of expression"),
        }
    }

    fn number(&mut self) -> Result<Polynomial, PolyError> {
        let start = self.pos;
        let mut int_part = String::new();
        let mut frac_part = String::new();
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            int_part.push(self.src[self.pos] as char);
            self.pos += 1;
        }
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                frac_part.push(self.src[self.pos] as char);
                self.pos += 1;
            }
        }
        if int_part.is_empty() && frac_part.is_empty() {
            return parse_err(start, "malformed number");
        }
        let digits = format!("{int_part}{frac_part}");
        let numer: BigInt = digits.parse().unwrap();
        let denom = num_traits::pow(BigInt::from(10), frac_part.len());
        Ok(Polynomial::constant(Rational::new(numer, denom)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(s: &str) -> Polynomial {
        Polynomial::parse(s).unwrap()
    }

    fn vals(pairs: &[(&str, f64)]) -> HashMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn evaluate_examples() {
        assert_eq!(p("v").evaluate(&vals(&[("v", 0.3)])).unwrap(), 0.3);
        assert_eq!(p("0.5*v^2").evaluate(&vals(&[("v", 1.0)])).unwrap(), 0.5);
        assert_eq!(
            p("1 - 0.5*v^2").evaluate(&vals(&[("v", 0.5)])).unwrap(),
            0.875
        );
    }

    #[test]
    fn missing_parameter() {
        assert_eq!(
            p("v + w").evaluate(&vals(&[("v", 0.3)])),
            Err(PolyError::MissingParameter("w".into()))
        );
    }

    #[test]
    fn constants_and_support() {
        assert_eq!(p("0.1").is_constant(), Some(0.1));
        assert_eq!(p("v").is_constant(), None);
        assert_eq!(p("v - v").is_constant(), Some(0.0));
        assert!(p("v - v").is_zero());
        let names = |s: &str| p(s).parameters().into_iter().collect::<Vec<_>>();
        assert_eq!(names("0.1*(1-v)"), vec!["v"]);
        assert!(names("3/10").is_empty());
        assert_eq!(names("w1 + 2*w2"), vec!["w1", "w2"]);
    }

    #[test]
    fn fraction_and_decimal_literals_are_exact() {
        assert_eq!(p("3/10"), p("0.3"));
        assert_eq!(p("1/2*v"), p("v/2"));
        assert_eq!(p("0.1*(1-v)"), p("1/10 - 1/10*v"));
    }

    #[test]
    fn rejects_rational_functions_and_junk() {
        assert!(matches!(
            Polynomial::parse("1/v"),
            Err(PolyError::Parse { .. })
        ));
        assert!(matches!(
            Polynomial::parse("v/(1-v)"),
            Err(PolyError::Parse { .. })
        ));
        assert!(matches!(
            Polynomial::parse("v^-1"),
            Err(PolyError::Parse { .. })
        ));
        assert!(matches!(
            Polynomial::parse(""),
            Err(PolyError::Parse { .. })
        ));
        assert!(matches!(
            Polynomial::parse("v +"),
            Err(PolyError::Parse { .. })
        ));
        assert!(matches!(
            Polynomial::parse("(v"),
            Err(PolyError::Parse { .. })
        ));
        assert!(matches!(
            Polynomial::parse("2/0"),
            Err(PolyError::Parse { .. })
        ));
    }

    #[test]
    fn display_is_graded_lex_and_reparses() {
        let q = p("1 + w*v + v^2 - 3/4*w");
        assert_eq!(q.to_string(), "v^2 + v*w - 3/4*w + 1");
        assert_eq!(p(&q.to_string()), q);
        assert_eq!(p("-v + 2").to_string(), "-v + 2");
        assert_eq!(Polynomial::zero().to_string(), "0");
    }

    #[test]
    fn affine_split_detects_nonlinear_cost_terms() {
        let (base, coeffs) = p("1 + 2*w1 + v*w2").affine_split(&["w1", "w2"]).unwrap();
        assert_eq!(base, p("1"));
        assert_eq!(coeffs, vec![p("2"), p("v")]);
        assert!(p("w1*w2").affine_split(&["w1", "w2"]).is_none());
        assert!(p("w1^2").affine_split(&["w1"]).is_none());
    }

    #[test]
    fn compiled_matches_bitwise() {
        let q = p("0.1*v^6*(1-v) + 0.5*v^3*(1-v) + 0.04 + w*v/3");
        let index: HashMap<String, usize> = [("v".to_string(), 0), ("w".to_string(), 1)].into();
        let c = q.compile(&index).unwrap();
        for &(v, w) in &[(0.3, 0.7), (0.123456789, 2.5), (0.999, 0.0)] {
            let a = q.evaluate(&vals(&[("v", v), ("w", w)])).unwrap();
            assert_eq!(a.to_bits(), c.eval(&[v, w]).to_bits());
        }
    }

    // Expand the polynomial into its dense coefficient table and evaluate the
    // monomials independently of the term representation.
    fn brute_force_eval(coeffs: &[(f64, [u32; 3])], x: [f64; 3]) -> f64 {
        coeffs
            .iter()
            .map(|(c, e)| c * (0..3).map(|k| x[k].powi(e[k] as i32)).product::<f64>())
            .sum()
    }

    fn poly_from_table(coeffs: &[(f64, [u32; 3])]) -> Polynomial {
        let names = ["a", "b", "c"];
        Polynomial::from_terms(coeffs.iter().map(|(c, e)| {
            let mono = (0..3)
                .filter(|&k| e[k] > 0)
                .fold(Polynomial::one(), |m, k| {
                    &m * &Polynomial::var(names[k]).pow(e[k])
                });
            let (_, mono) = mono
                .terms()
                .next()
                .map(|(c, m)| (c.clone(), m.clone()))
                .unwrap();
            (f64_to_rational(*c), mono)
        }))
    }

    fn small_rational() -> impl Strategy<Value = Rational> {
        (-20i64..20, 1i64..12).prop_map(|(n, d)| Rational::new(n.into(), d.into()))
    }

    fn small_poly() -> impl Strategy<Value = Polynomial> {
        prop::collection::vec((small_rational(), 0u32..3, 0u32..3), 0..5).prop_map(|ts| {
            Polynomial::from_terms(ts.into_iter().map(|(c, ea, eb)| {
                let m = (&Polynomial::var("a").pow(ea) * &Polynomial::var("b").pow(eb))
                    .terms()
                    .next()
                    .map(|(_, m)| m.clone())
                    .unwrap();
                (c, m)
            }))
        })
    }

    proptest! {
        #[test]
        fn evaluation_is_linear(pa in small_poly(), pb in small_poly(),
                                a in small_rational(), b in small_rational(),
                                x in 0.0f64..1.0, y in 0.0f64..1.0) {
            let u = vals(&[("a", x), ("b", y)]);
            let combo = &pa.scale(&a) + &pb.scale(&b);
            let lhs = combo.evaluate(&u).unwrap();
            let rhs = rational_to_f64(&a) * pa.evaluate(&u).unwrap()
                + rational_to_f64(&b) * pb.evaluate(&u).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-9);
            // exact version
            let ue: HashMap<String, Rational> =
                [("a".to_string(), f64_to_rational(x)), ("b".to_string(), f64_to_rational(y))].into();
            prop_assert_eq!(
                combo.evaluate_exact(&ue).unwrap(),
                a * pa.evaluate_exact(&ue).unwrap() + b * pb.evaluate_exact(&ue).unwrap()
            );
        }

        #[test]
        fn normalization_is_idempotent(pa in small_poly()) {
            let again = Polynomial::from_terms(pa.terms().map(|(c, m)| (c.clone(), m.clone())));
            prop_assert_eq!(&again, &pa);
            prop_assert_eq!(Polynomial::parse(&pa.to_string()).unwrap(), pa);
        }

        #[test]
        fn matches_brute_force_expansion(
            table in prop::collection::vec((-3.0f64..3.0, prop::array::uniform3(0u32..3)), 1..8),
            x in prop::array::uniform3(-1.5f64..1.5),
        ) {
            // total degree <= 6 with three variables
            let q = poly_from_table(&table);
            let got = q.evaluate(&vals(&[("a", x[0]), ("b", x[1]), ("c", x[2])])).unwrap();
            let want = brute_force_eval(&table, x);
            prop_assert!((got - want).abs() <= 1e-9 * (1.0 + want.abs()));
        }
    }
}
