//! Sparse exact-rational polynomials over edge variables.
//!
//! Two variable families exist: matching variables `x{u}_{v}` on the
//! complete graph (stored with `u < v`) and tour variables `y{i}_{j}` on the
//! complete bipartite graph (row `i`, column `j`). Terms are kept in a
//! `BTreeMap` keyed by monomials, so equal polynomials are structurally equal.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::perm::Permutation;
use crate::rational::{format_rational, parse_rational, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Kind {
    Match,
    Tour,
}

/// An edge variable. Matching pairs are normalised so that the first label
/// is the smaller one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    Match(u16, u16),
    Tour(u16, u16),
}

impl Var {
    /// Matching variable for the edge `{u, v}`; panics on a loop.
    pub fn edge(u: usize, v: usize) -> Var {
        assert!(u != v && u >= 1 && v >= 1, "invalid edge {u}-{v}");
        let (a, b) = if u < v { (u, v) } else { (v, u) };
        Var::Match(a as u16, b as u16)
    }

    pub fn tour(row: usize, col: usize) -> Var {
        assert!(row >= 1 && col >= 1, "invalid tour variable {row}_{col}");
        Var::Tour(row as u16, col as u16)
    }

    pub fn kind(&self) -> Kind {
        match self {
            Var::Match(..) => Kind::Match,
            Var::Tour(..) => Kind::Tour,
        }
    }

    /// The two indices as `usize` (endpoints, or row and column).
    pub fn ends(&self) -> (usize, usize) {
        match *self {
            Var::Match(a, b) | Var::Tour(a, b) => (a as usize, b as usize),
        }
    }

    pub fn touches(&self, vertex: usize) -> bool {
        match self {
            Var::Match(..) => {
                let (a, b) = self.ends();
                a == vertex || b == vertex
            }
            Var::Tour(..) => false,
        }
    }

    fn parse(tok: &str) -> Option<Var> {
        let (kind, rest) = tok.split_at(1);
        let (a, b) = rest.split_once('_')?;
        let a: usize = a.parse().ok()?;
        let b: usize = b.parse().ok()?;
        if a == 0 || b == 0 || a > u16::MAX as usize || b > u16::MAX as usize {
            return None;
        }
        match kind {
            "x" if a < b => Some(Var::Match(a as u16, b as u16)),
            "y" => Some(Var::Tour(a as u16, b as u16)),
            _ => None,
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::Match(a, b) => write!(f, "x{a}_{b}"),
            Var::Tour(a, b) => write!(f, "y{a}_{b}"),
        }
    }
}

/// A product of variables with positive exponents, strictly sorted.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Monomial(Vec<(Var, u32)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn var(v: Var) -> Self {
        Monomial(vec![(v, 1)])
    }

    /// Multilinear monomial from a set of variables (duplicates merge into
    /// higher powers).
    pub fn product<I: IntoIterator<Item = Var>>(vars: I) -> Self {
        let mut factors: Vec<(Var, u32)> = vars.into_iter().map(|v| (v, 1)).collect();
        factors.sort();
        Monomial(merge_sorted(factors))
    }

    pub fn from_factors(mut factors: Vec<(Var, u32)>) -> Self {
        factors.retain(|&(_, e)| e > 0);
        factors.sort();
        Monomial(merge_sorted(factors))
    }

    pub fn factors(&self) -> &[(Var, u32)] {
        &self.0
    }

    pub fn vars(&self) -> impl Iterator<Item = Var> + '_ {
        self.0.iter().map(|&(v, _)| v)
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|&(_, e)| e).sum()
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_multilinear(&self) -> bool {
        self.0.iter().all(|&(_, e)| e == 1)
    }

    pub fn contains(&self, v: Var) -> bool {
        self.0.binary_search_by(|(w, _)| w.cmp(&v)).is_ok()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut out = Vec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            let (a, ea) = self.0[i];
            let (b, eb) = other.0[j];
            match a.cmp(&b) {
                std::cmp::Ordering::Less => {
                    out.push((a, ea));
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push((b, eb));
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push((a, ea + eb));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.0[i..]);
        out.extend_from_slice(&other.0[j..]);
        Monomial(out)
    }

    /// Removes one factor of `v`; `None` if `v` does not divide the monomial.
    pub fn without(&self, v: Var) -> Option<Monomial> {
        let pos = self.0.iter().position(|&(w, _)| w == v)?;
        let mut out = self.0.clone();
        if out[pos].1 == 1 {
            out.remove(pos);
        } else {
            out[pos].1 -= 1;
        }
        Some(Monomial(out))
    }

    pub fn map_vars(&self, f: impl Fn(Var) -> Var) -> Monomial {
        Monomial::from_factors(self.0.iter().map(|&(v, e)| (f(v), e)).collect())
    }

    fn kind(&self) -> Result<Option<Kind>> {
        let mut kind = None;
        for v in self.vars() {
            match kind {
                None => kind = Some(v.kind()),
                Some(k) if k != v.kind() => return Err(Error::KindMismatch),
                _ => {}
            }
        }
        Ok(kind)
    }
}

fn merge_sorted(factors: Vec<(Var, u32)>) -> Vec<(Var, u32)> {
    let mut out: Vec<(Var, u32)> = Vec::with_capacity(factors.len());
    for (v, e) in factors {
        match out.last_mut() {
            Some((w, f)) if *w == v => *f += e,
            _ => out.push((v, e)),
        }
    }
    out
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        for (i, (v, e)) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            if *e == 1 {
                write!(f, "{v}")?;
            } else {
                write!(f, "{v}^{e}")?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Polynomial {
    terms: BTreeMap<Monomial, Rational>,
}

impl Polynomial {
    pub fn zero() -> Self {
        Polynomial::default()
    }

    pub fn one() -> Self {
        Polynomial::constant(Rational::one())
    }

    pub fn constant(c: Rational) -> Self {
        Polynomial::term(Monomial::one(), c)
    }

    pub fn var(v: Var) -> Self {
        Polynomial::term(Monomial::var(v), Rational::one())
    }

    pub fn term(m: Monomial, c: Rational) -> Self {
        let mut p = Polynomial::zero();
        p.add_term(m, c);
        p
    }

    pub fn from_terms<I: IntoIterator<Item = (Monomial, Rational)>>(terms: I) -> Self {
        let mut p = Polynomial::zero();
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    /// Adds `c·m`, dropping the term if it cancels.
    pub fn add_term(&mut self, m: Monomial, c: Rational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Rational)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coefficient(&self, m: &Monomial) -> Rational {
        self.terms.get(m).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn constant_term(&self) -> Rational {
        self.coefficient(&Monomial::one())
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(Monomial::is_one)
    }

    /// Total degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(Monomial::degree).max()
    }

    /// Degree as a signed integer with the zero polynomial at `-1`.
    pub fn degree_or_neg(&self) -> i64 {
        self.degree().map_or(-1, i64::from)
    }

    /// The variable family of the polynomial; `None` for constants.
    pub fn kind(&self) -> Result<Option<Kind>> {
        let mut kind = None;
        for m in self.terms.keys() {
            match (kind, m.kind()?) {
                (_, None) => {}
                (None, k) => kind = k,
                (Some(a), Some(b)) if a != b => return Err(Error::KindMismatch),
                _ => {}
            }
        }
        Ok(kind)
    }

    /// Largest vertex label used by any variable (0 for constants).
    pub fn max_label(&self) -> usize {
        self.terms
            .keys()
            .flat_map(|m| m.vars())
            .map(|v| {
                let (a, b) = v.ends();
                a.max(b)
            })
            .max()
            .unwrap_or(0)
    }

    pub fn checked_add(&self, other: &Polynomial) -> Result<Polynomial> {
        compatible(self, other)?;
        Ok(self + other)
    }

    pub fn checked_mul(&self, other: &Polynomial) -> Result<Polynomial> {
        compatible(self, other)?;
        Ok(self * other)
    }

    pub fn scale(&self, c: &Rational) -> Polynomial {
        if c.is_zero() {
            return Polynomial::zero();
        }
        Polynomial {
            terms: self.terms.iter().map(|(m, a)| (m.clone(), a * c)).collect(),
        }
    }

    pub fn mul_monomial(&self, m: &Monomial) -> Polynomial {
        Polynomial {
            terms: self.terms.iter().map(|(k, c)| (k.mul(m), c.clone())).collect(),
        }
    }

    pub fn add_scaled(&mut self, other: &Polynomial, c: &Rational) {
        if c.is_zero() {
            return;
        }
        for (m, a) in &other.terms {
            self.add_term(m.clone(), a * c);
        }
    }

    /// Exact evaluation; every variable must be assigned.
    pub fn evaluate(&self, point: &HashMap<Var, Rational>) -> Result<Rational> {
        self.evaluate_with(|v| point.get(&v).cloned())
    }

    pub fn evaluate_with(&self, value: impl Fn(Var) -> Option<Rational>) -> Result<Rational> {
        let mut total = Rational::zero();
        for (m, c) in &self.terms {
            let mut acc = c.clone();
            for &(v, e) in m.factors() {
                let x = value(v).ok_or_else(|| Error::UnboundVariable(v.to_string()))?;
                acc *= num_traits::pow(x, e as usize);
            }
            total += acc;
        }
        Ok(total)
    }

    /// Evaluation at a 0/1 point given by a membership test.
    pub fn evaluate_indicator(&self, present: impl Fn(Var) -> bool) -> Rational {
        let mut total = Rational::zero();
        for (m, c) in &self.terms {
            if m.vars().all(&present) {
                total += c;
            }
        }
        total
    }

    /// Group action of a vertex permutation: `x_{uv} -> x_{σ(u)σ(v)}` and
    /// `y_{ij} -> y_{σ(i)j}`.
    pub fn act(&self, sigma: &Permutation) -> Result<Polynomial> {
        let n = self.max_label_acted();
        if n > sigma.len() {
            return Err(Error::SizeMismatch {
                expected: n,
                found: sigma.len(),
            });
        }
        Ok(self.map_vars(|v| act_var(sigma, v)))
    }

    fn max_label_acted(&self) -> usize {
        self.terms
            .keys()
            .flat_map(|m| m.vars())
            .map(|v| match v {
                Var::Match(a, b) => a.max(b) as usize,
                Var::Tour(a, _) => a as usize,
            })
            .max()
            .unwrap_or(0)
    }

    /// Renames every variable (a ring endomorphism when `f` is injective).
    pub fn map_vars(&self, f: impl Fn(Var) -> Var) -> Polynomial {
        let mut out = Polynomial::zero();
        for (m, c) in &self.terms {
            out.add_term(m.map_vars(&f), c.clone());
        }
        out
    }

    /// Ring homomorphism sending each variable to a polynomial.
    pub fn substitute(&self, f: impl Fn(Var) -> Polynomial) -> Polynomial {
        let mut cache: HashMap<Var, Polynomial> = HashMap::new();
        let mut out = Polynomial::zero();
        for (m, c) in &self.terms {
            let mut acc = Polynomial::constant(c.clone());
            for &(v, e) in m.factors() {
                let image = cache.entry(v).or_insert_with(|| f(v)).clone();
                for _ in 0..e {
                    acc = &acc * &image;
                }
                if acc.is_zero() {
                    break;
                }
            }
            out = &out + &acc;
        }
        out
    }

    /// Parses the line-oriented text format: one term per line, coefficient
    /// first, `#` comments and blank lines ignored.
    pub fn parse(text: &str) -> Result<Polynomial> {
        Self::parse_lines(text.lines().enumerate().map(|(i, l)| (i + 1, l)))
    }

    pub(crate) fn parse_lines<'a, I>(lines: I) -> Result<Polynomial>
    where
        I: IntoIterator<Item = (usize, &'a str)>,
    {
        let mut p = Polynomial::zero();
        for (lineno, raw) in lines {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut toks = line.split_whitespace().peekable();
            let mut coeff = Rational::one();
            if let Some(first) = toks.peek() {
                if let Some(c) = parse_rational(first) {
                    coeff = c;
                    toks.next();
                }
            }
            let mut factors = Vec::new();
            for tok in toks {
                let (name, exp) = match tok.split_once('^') {
                    Some((n, e)) => (
                        n,
                        e.parse::<u32>()
                            .map_err(|_| Error::parse(lineno, format!("bad exponent in {tok}")))?,
                    ),
                    None => (tok, 1),
                };
                let v = Var::parse(name)
                    .ok_or_else(|| Error::parse(lineno, format!("bad variable {name}")))?;
                factors.push((v, exp));
            }
            p.add_term(Monomial::from_factors(factors), coeff);
        }
        p.kind().map_err(|_| Error::parse(0, "mixed matching and tour variables"))?;
        Ok(p)
    }

    /// Canonical text rendering; the zero polynomial is written as `0`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        if self.is_zero() {
            s.push_str("0\n");
        }
        for (m, c) in &self.terms {
            s.push_str(&format_rational(c));
            if !m.is_one() {
                s.push(' ');
                s.push_str(&m.to_string());
            }
            s.push('\n');
        }
        s
    }
}

pub(crate) fn act_var(sigma: &Permutation, v: Var) -> Var {
    match v {
        Var::Match(a, b) => Var::edge(sigma.apply(a as usize), sigma.apply(b as usize)),
        Var::Tour(i, j) => Var::tour(sigma.apply(i as usize), j as usize),
    }
}

fn compatible(p: &Polynomial, q: &Polynomial) -> Result<()> {
    match (p.kind()?, q.kind()?) {
        (Some(a), Some(b)) if a != b => Err(Error::KindMismatch),
        _ => Ok(()),
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            if m.is_one() {
                write!(f, "{}", format_rational(c))?;
            } else if c.is_one() {
                write!(f, "{m}")?;
            } else {
                write!(f, "({})·{}", format_rational(c), m.to_string().replace(' ', "·"))?;
            }
        }
        Ok(())
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        let (big, small) = if self.terms.len() >= rhs.terms.len() {
            (self, rhs)
        } else {
            (rhs, self)
        };
        let mut out = big.clone();
        for (m, c) in &small.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        let mut out = Polynomial::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &rhs.terms {
                out.add_term(m1.mul(m2), c1 * c2);
            }
        }
        out
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        Polynomial {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c.clone())).collect(),
        }
    }
}

macro_rules! forward_owned {
    ($tr:ident, $f:ident) => {
        impl $tr for Polynomial {
            type Output = Polynomial;
            fn $f(self, rhs: Polynomial) -> Polynomial {
                (&self).$f(&rhs)
            }
        }
        impl $tr<&Polynomial> for Polynomial {
            type Output = Polynomial;
            fn $f(self, rhs: &Polynomial) -> Polynomial {
                (&self).$f(rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        -&self
    }
}
