//! Derivation certificates: `source + Σ q(g)·g = result` with every product
//! of degree at most the stated bound.
//!
//! The same container serves both generator families through the
//! [`Generator`] trait. Certificates form a vector space (scaling and adding
//! certificates adds their cofactors), can be chained when the result of
//! one is the source of the next, and can be multiplied through by a
//! polynomial.

use std::collections::BTreeMap;
use std::fmt;
use std::hash::Hash;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::poly::Polynomial;
use crate::rational::Rational;

pub trait Generator: Clone + Ord + Hash + fmt::Debug + fmt::Display {
    /// Family tag used in the certificate header (`MATCH` or `TOUR`).
    const FAMILY: &'static str;

    fn expand(&self, n: usize) -> Polynomial;
    fn degree(&self) -> u32;
    fn valid_for(&self, n: usize) -> bool;
    fn parse_id(tokens: &[&str]) -> Option<Self>;
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Certificate<G: Generator> {
    pub n: usize,
    /// Claimed degree bound; `-1` means plain equality.
    pub degree: i64,
    pub source: Polynomial,
    pub result: Polynomial,
    pub cofactors: BTreeMap<G, Polynomial>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    InvalidGenerator(String),
    PolynomialMismatch { residual: Polynomial },
    DegreeViolation { generator: String, degree: i64, bound: i64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::InvalidGenerator(g) => write!(f, "generator {g} is not valid for this n"),
            Violation::PolynomialMismatch { residual } => write!(
                f,
                "source + Σ q·g differs from result ({} residual terms, e.g. {})",
                residual.num_terms(),
                residual
                    .terms()
                    .next()
                    .map(|(m, c)| format!("{}·{}", crate::rational::format_rational(c), m))
                    .unwrap_or_default()
            ),
            Violation::DegreeViolation {
                generator,
                degree,
                bound,
            } => write!(f, "product with {generator} has degree {degree} > bound {bound}"),
        }
    }
}

impl<G: Generator> Certificate<G> {
    /// `p ≡ p` with no cofactors.
    pub fn identity(n: usize, p: Polynomial) -> Self {
        Certificate {
            n,
            degree: -1,
            source: p.clone(),
            result: p,
            cofactors: BTreeMap::new(),
        }
    }

    pub fn add_cofactor(&mut self, g: G, q: &Polynomial) {
        if q.is_zero() {
            return;
        }
        match self.cofactors.get_mut(&g) {
            Some(existing) => {
                existing.add_scaled(q, &Rational::one());
                if existing.is_zero() {
                    self.cofactors.remove(&g);
                }
            }
            None => {
                self.cofactors.insert(g, q.clone());
            }
        }
    }

    /// Largest `deg(q·g)` over the cofactors, `-1` if there are none.
    pub fn max_product_degree(&self) -> i64 {
        self.cofactors
            .iter()
            .map(|(g, q)| q.degree_or_neg() + g.degree() as i64)
            .max()
            .unwrap_or(-1)
    }

    /// `Σ q·g` expanded over `n`.
    pub fn combination(&self) -> Polynomial {
        let mut total = Polynomial::zero();
        for (g, q) in &self.cofactors {
            total = &total + &(q * &g.expand(self.n));
        }
        total
    }

    /// Checks the identity and the degree bound, reporting the first failure.
    pub fn check(&self) -> std::result::Result<(), Violation> {
        for g in self.cofactors.keys() {
            if !g.valid_for(self.n) {
                return Err(Violation::InvalidGenerator(g.to_string()));
            }
        }
        let residual = &(&self.source + &self.combination()) - &self.result;
        if !residual.is_zero() {
            return Err(Violation::PolynomialMismatch { residual });
        }
        for (g, q) in &self.cofactors {
            let degree = q.degree_or_neg() + g.degree() as i64;
            if degree > self.degree {
                return Err(Violation::DegreeViolation {
                    generator: g.to_string(),
                    degree,
                    bound: self.degree,
                });
            }
        }
        Ok(())
    }

    pub fn verify(&self) -> bool {
        self.check().is_ok()
    }

    /// Sets the degree field to the actual maximum product degree.
    pub fn tighten(mut self) -> Self {
        self.degree = self.max_product_degree();
        self
    }

    pub fn with_degree(mut self, degree: i64) -> Self {
        self.degree = degree;
        self
    }

    pub fn scale(&self, c: &Rational) -> Self {
        Certificate {
            n: self.n,
            degree: self.degree,
            source: self.source.scale(c),
            result: self.result.scale(c),
            cofactors: self
                .cofactors
                .iter()
                .filter(|_| !c.is_zero())
                .map(|(g, q)| (g.clone(), q.scale(c)))
                .collect(),
        }
    }

    /// Adds `c·other` into `self` (sources, results and cofactors).
    pub fn add_scaled(&mut self, other: &Certificate<G>, c: &Rational) {
        debug_assert_eq!(self.n, other.n);
        if c.is_zero() {
            return;
        }
        self.source.add_scaled(&other.source, c);
        self.result.add_scaled(&other.result, c);
        for (g, q) in &other.cofactors {
            self.add_cofactor(g.clone(), &q.scale(c));
        }
        self.degree = self.degree.max(other.degree);
    }

    /// Adds `c·other`'s cofactors only, leaving source and result alone.
    pub fn absorb(&mut self, other: &Certificate<G>, c: &Rational) {
        if c.is_zero() {
            return;
        }
        for (g, q) in &other.cofactors {
            self.add_cofactor(g.clone(), &q.scale(c));
        }
        self.degree = self.degree.max(other.degree);
    }

    /// `0 ≡ 0` over `n`, a neutral element for [`Certificate::add_scaled`].
    pub fn empty(n: usize) -> Self {
        Certificate::identity(n, Polynomial::zero())
    }

    /// Swaps source and result.
    pub fn reversed(&self) -> Self {
        Certificate {
            n: self.n,
            degree: self.degree,
            source: self.result.clone(),
            result: self.source.clone(),
            cofactors: self
                .cofactors
                .iter()
                .map(|(g, q)| (g.clone(), -q))
                .collect(),
        }
    }

    /// Composes `self: F → G` with `next: G → H`.
    pub fn then(mut self, next: &Certificate<G>) -> Result<Self> {
        if self.result != next.source || self.n != next.n {
            return Err(Error::invariant(
                "chained certificates do not share the middle polynomial",
            ));
        }
        for (g, q) in &next.cofactors {
            self.add_cofactor(g.clone(), q);
        }
        self.result = next.result.clone();
        self.degree = self.degree.max(next.degree);
        Ok(self)
    }

    /// Multiplies the whole identity by `p`; the degree grows by `deg p`.
    pub fn multiply_by(&self, p: &Polynomial) -> Self {
        Certificate {
            n: self.n,
            degree: if self.degree < 0 {
                -1
            } else {
                self.degree + p.degree_or_neg().max(0)
            },
            source: &self.source * p,
            result: &self.result * p,
            cofactors: self
                .cofactors
                .iter()
                .map(|(g, q)| (g.clone(), q * p))
                .filter(|(_, q)| !q.is_zero())
                .collect(),
        }
    }

    /// Rewrites generators and variables simultaneously (used for group
    /// actions and relabelings that map the generator set into itself).
    pub fn map(
        &self,
        n: usize,
        gen_map: impl Fn(&G) -> G,
        poly_map: impl Fn(&Polynomial) -> Polynomial,
    ) -> Self {
        let mut out = Certificate {
            n,
            degree: self.degree,
            source: poly_map(&self.source),
            result: poly_map(&self.result),
            cofactors: BTreeMap::new(),
        };
        for (g, q) in &self.cofactors {
            out.add_cofactor(gen_map(g), &poly_map(q));
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("CERT {} n={} d={}\n", G::FAMILY, self.n, self.degree);
        s.push_str("SOURCE\n");
        s.push_str(&self.source.to_text());
        s.push_str("RESULT\n");
        s.push_str(&self.result.to_text());
        for (g, q) in &self.cofactors {
            s.push_str(&format!("COFACTOR {g} :\n"));
            s.push_str(&q.to_text());
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let lines: Vec<(usize, &str)> = text.lines().enumerate().map(|(i, l)| (i + 1, l)).collect();
        Self::parse_lines(&lines)
    }

    pub(crate) fn parse_lines(lines: &[(usize, &str)]) -> Result<Self> {
        let mut iter = lines
            .iter()
            .copied()
            .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        let (hline, header) = iter.next().ok_or_else(|| Error::parse(0, "empty certificate"))?;
        let toks: Vec<&str> = header.split_whitespace().collect();
        if toks.len() != 4 || toks[0] != "CERT" || toks[1] != G::FAMILY {
            return Err(Error::parse(hline, format!("expected `CERT {} n=… d=…`", G::FAMILY)));
        }
        let n: usize = header_field(toks[2], "n").ok_or_else(|| Error::parse(hline, "bad n"))?;
        let degree: i64 = header_field(toks[3], "d").ok_or_else(|| Error::parse(hline, "bad d"))?;

        enum Section<G> {
            None,
            Source,
            Result,
            Cofactor(G),
        }
        let mut blocks: Vec<(Section<G>, Vec<(usize, &str)>)> = Vec::new();
        for (lineno, line) in iter {
            let t = line.trim();
            if t == "SOURCE" {
                blocks.push((Section::Source, Vec::new()));
            } else if t == "RESULT" {
                blocks.push((Section::Result, Vec::new()));
            } else if let Some(rest) = t.strip_prefix("COFACTOR") {
                let rest = rest.trim().strip_suffix(':').unwrap_or(rest).trim();
                let id: Vec<&str> = rest.split_whitespace().collect();
                let g = G::parse_id(&id)
                    .ok_or_else(|| Error::parse(lineno, format!("unknown generator `{rest}`")))?;
                blocks.push((Section::Cofactor(g), Vec::new()));
            } else {
                match blocks.last_mut() {
                    Some((_, body)) => body.push((lineno, line)),
                    None => blocks.push((Section::None, vec![(lineno, line)])),
                }
            }
        }
        let mut cert = Certificate::identity(n, Polynomial::zero()).with_degree(degree);
        let (mut saw_source, mut saw_result) = (false, false);
        for (section, body) in blocks {
            let p = Polynomial::parse_lines(body)?;
            match section {
                Section::None => return Err(Error::parse(hline, "polynomial outside a block")),
                Section::Source => {
                    cert.source = p;
                    saw_source = true;
                }
                Section::Result => {
                    cert.result = p;
                    saw_result = true;
                }
                Section::Cofactor(g) => cert.add_cofactor(g, &p),
            }
        }
        if !saw_source || !saw_result {
            return Err(Error::parse(hline, "certificate needs SOURCE and RESULT blocks"));
        }
        Ok(cert)
    }
}

pub(crate) fn header_field<T: std::str::FromStr>(tok: &str, key: &str) -> Option<T> {
    tok.strip_prefix(key)?.strip_prefix('=')?.parse().ok()
}

/// `Σ c_i · cert_i` over a shared `n`.
pub fn linear_combination<'a, G: Generator + 'a>(
    n: usize,
    parts: impl IntoIterator<Item = (Rational, &'a Certificate<G>)>,
) -> Certificate<G> {
    let mut acc = Certificate::empty(n);
    for (c, cert) in parts {
        acc.add_scaled(cert, &c);
    }
    acc
}

/// Convenience for `1`.
pub(crate) fn one() -> Rational {
    Rational::one()
}
