//! The tour ideal `Q_n` on `K_{n,n}`: permutation matrices as solutions,
//! row/column generators, and the bipartite versions of the matching
//! lemmas and derivation engine.

mod derive;
mod lemmas;

pub use derive::{tour_derive_zero, tour_derive_zero_with_bound};
pub use lemmas::{
    appendix_closed_form, column_block, row_orbit_sum, tour_expand_vertex, tour_lift_generator,
    tour_lift_matching, tour_normal_form, tour_symmetric_to_constant, tour_symmetrize_constant,
};

use std::fmt;

use crate::cert::{Certificate, Generator};
use crate::error::{Error, Result};
use crate::limits::Limits;
use crate::perm::Permutation;
use crate::poly::{Kind, Monomial, Polynomial, Var};
use crate::rational::Rational;

/// A generator of `Q_n`. Rows index `U_n`, columns index `V_n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TourGen {
    /// `y_{ij}^2 - y_{ij}`.
    Rsq(usize, usize),
    /// `y_{ij} y_{ik}`, `j < k`.
    RowAdj(usize, usize, usize),
    /// `y_{ij} y_{kj}`, `i < k`.
    ColAdj(usize, usize, usize),
    /// `Σ_j y_{ij} - 1`.
    Row(usize),
    /// `Σ_i y_{ij} - 1`.
    Col(usize),
}

pub type TourCertificate = Certificate<TourGen>;

impl TourGen {
    pub fn row_adj(i: usize, j: usize, k: usize) -> Self {
        TourGen::RowAdj(i, j.min(k), j.max(k))
    }

    pub fn col_adj(i: usize, j: usize, k: usize) -> Self {
        TourGen::ColAdj(i.min(k), j, i.max(k))
    }

    /// Relabels rows by `rows` and columns by `cols`.
    pub fn relabel(&self, rows: &Permutation, cols: &Permutation) -> Self {
        let (r, c) = (|i| rows.apply(i), |j| cols.apply(j));
        match *self {
            TourGen::Rsq(i, j) => TourGen::Rsq(r(i), c(j)),
            TourGen::RowAdj(i, j, k) => TourGen::row_adj(r(i), c(j), c(k)),
            TourGen::ColAdj(i, j, k) => TourGen::col_adj(r(i), c(j), r(k)),
            TourGen::Row(i) => TourGen::Row(r(i)),
            TourGen::Col(j) => TourGen::Col(c(j)),
        }
    }

    /// Row action of `σ` (columns fixed).
    pub fn act(&self, sigma: &Permutation) -> Self {
        self.relabel(sigma, &Permutation::identity(0))
    }
}

impl fmt::Display for TourGen {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TourGen::Rsq(i, j) => write!(f, "RSQ {i} {j}"),
            TourGen::RowAdj(i, j, k) => write!(f, "ROWADJ {i} {j} {k}"),
            TourGen::ColAdj(i, j, k) => write!(f, "COLADJ {i} {j} {k}"),
            TourGen::Row(i) => write!(f, "ROW {i}"),
            TourGen::Col(j) => write!(f, "COL {j}"),
        }
    }
}

impl Generator for TourGen {
    const FAMILY: &'static str = "TOUR";

    fn expand(&self, n: usize) -> Polynomial {
        let y = |i, j| Var::tour(i, j);
        let one = crate::cert::one;
        match *self {
            TourGen::Rsq(i, j) => {
                let v = Polynomial::var(y(i, j));
                &(&v * &v) - &v
            }
            TourGen::RowAdj(i, j, k) => Polynomial::term(Monomial::product([y(i, j), y(i, k)]), one()),
            TourGen::ColAdj(i, j, k) => Polynomial::term(Monomial::product([y(i, j), y(k, j)]), one()),
            TourGen::Row(i) => {
                let mut p = Polynomial::constant(-one());
                for j in 1..=n {
                    p.add_term(Monomial::var(y(i, j)), one());
                }
                p
            }
            TourGen::Col(j) => {
                let mut p = Polynomial::constant(-one());
                for i in 1..=n {
                    p.add_term(Monomial::var(y(i, j)), one());
                }
                p
            }
        }
    }

    fn degree(&self) -> u32 {
        match self {
            TourGen::Row(_) | TourGen::Col(_) => 1,
            _ => 2,
        }
    }

    fn valid_for(&self, n: usize) -> bool {
        let ok = |x: usize| x >= 1 && x <= n;
        match *self {
            TourGen::Rsq(i, j) => ok(i) && ok(j),
            TourGen::RowAdj(i, j, k) | TourGen::ColAdj(i, j, k) => ok(i) && ok(j) && ok(k) && {
                if matches!(self, TourGen::RowAdj(..)) {
                    j < k
                } else {
                    i < k
                }
            },
            TourGen::Row(i) => ok(i),
            TourGen::Col(j) => ok(j),
        }
    }

    fn parse_id(tokens: &[&str]) -> Option<Self> {
        let nums: Option<Vec<usize>> = tokens[1..].iter().map(|t| t.parse().ok()).collect();
        let nums = nums?;
        match (tokens.first()?, nums.as_slice()) {
            (&"RSQ", &[i, j]) => Some(TourGen::Rsq(i, j)),
            (&"ROWADJ", &[i, j, k]) if j < k => Some(TourGen::RowAdj(i, j, k)),
            (&"COLADJ", &[i, j, k]) if i < k => Some(TourGen::ColAdj(i, j, k)),
            (&"ROW", &[i]) => Some(TourGen::Row(i)),
            (&"COL", &[j]) => Some(TourGen::Col(j)),
            _ => None,
        }
    }
}

fn check_size(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidSize(n));
    }
    Ok(())
}

/// The generator set `Q_n` in canonical order.
pub fn generators_q(n: usize) -> Result<Vec<TourGen>> {
    check_size(n)?;
    let mut gens = Vec::new();
    for i in 1..=n {
        for j in 1..=n {
            gens.push(TourGen::Rsq(i, j));
        }
    }
    for i in 1..=n {
        for j in 1..=n {
            for k in j + 1..=n {
                gens.push(TourGen::RowAdj(i, j, k));
            }
        }
    }
    for i in 1..=n {
        for j in 1..=n {
            for k in i + 1..=n {
                gens.push(TourGen::ColAdj(i, j, k));
            }
        }
    }
    gens.extend((1..=n).map(TourGen::Row));
    gens.extend((1..=n).map(TourGen::Col));
    Ok(gens)
}

/// A partial matching of `K_{n,n}`: `(row, column)` pairs, injective in
/// both coordinates, sorted by row.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BipartiteMatching {
    pairs: Vec<(usize, usize)>,
}

impl BipartiteMatching {
    pub fn empty() -> Self {
        BipartiteMatching::default()
    }

    pub fn new<I: IntoIterator<Item = (usize, usize)>>(pairs: I) -> Result<Self> {
        let mut pairs: Vec<(usize, usize)> = pairs.into_iter().collect();
        pairs.sort_unstable();
        let mut rows = std::collections::HashSet::new();
        let mut cols = std::collections::HashSet::new();
        for &(i, j) in &pairs {
            if i == 0 || j == 0 || !rows.insert(i) || !cols.insert(j) {
                return Err(Error::InvalidInput(format!(
                    "{pairs:?} is not a bipartite matching"
                )));
            }
        }
        Ok(BipartiteMatching { pairs })
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn col_of(&self, row: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.0 == row).map(|p| p.1)
    }

    pub fn row_of(&self, col: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.1 == col).map(|p| p.0)
    }

    pub fn covers_row(&self, row: usize) -> bool {
        self.col_of(row).is_some()
    }

    pub fn covers_col(&self, col: usize) -> bool {
        self.row_of(col).is_some()
    }

    pub fn max_label(&self) -> usize {
        self.pairs.iter().map(|&(i, j)| i.max(j)).max().unwrap_or(0)
    }

    pub fn columns(&self) -> Vec<usize> {
        let mut cols: Vec<usize> = self.pairs.iter().map(|p| p.1).collect();
        cols.sort_unstable();
        cols
    }

    /// Adds `(row, col)`; the caller guarantees both are uncovered.
    pub fn with_pair(&self, row: usize, col: usize) -> Self {
        let mut pairs = self.pairs.clone();
        let pos = pairs.binary_search(&(row, col)).unwrap_or_else(|p| p);
        pairs.insert(pos, (row, col));
        BipartiteMatching { pairs }
    }

    pub fn without_pair(&self, row: usize, col: usize) -> Self {
        BipartiteMatching {
            pairs: self.pairs.iter().copied().filter(|&p| p != (row, col)).collect(),
        }
    }

    pub fn monomial(&self) -> Monomial {
        Monomial::product(self.pairs.iter().map(|&(i, j)| Var::tour(i, j)))
    }

    pub fn poly(&self) -> Polynomial {
        Polynomial::term(self.monomial(), crate::cert::one())
    }

    pub fn from_monomial(m: &Monomial) -> Option<Self> {
        if !m.is_multilinear() {
            return None;
        }
        let mut pairs = Vec::new();
        for v in m.vars() {
            match v {
                Var::Tour(i, j) => pairs.push((i as usize, j as usize)),
                Var::Match(..) => return None,
            }
        }
        BipartiteMatching::new(pairs).ok()
    }
}

impl fmt::Display for BipartiteMatching {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.pairs.iter().map(|(i, j)| format!("({i},{j})")).collect();
        write!(f, "{}", parts.join(" "))
    }
}

/// All bipartite partial matchings of `K_{n,n}` with at most `max_size`
/// pairs, ordered by size and then lexicographically.
pub fn bipartite_matchings(n: usize, max_size: usize) -> Vec<BipartiteMatching> {
    let mut layers: Vec<Vec<BipartiteMatching>> = vec![vec![BipartiteMatching::empty()]];
    for size in 1..=max_size.min(n) {
        let mut next = Vec::new();
        for m in &layers[size - 1] {
            let last_row = m.pairs.last().map_or(0, |p| p.0);
            for i in last_row + 1..=n {
                for j in (1..=n).filter(|&j| !m.covers_col(j)) {
                    next.push(m.with_pair(i, j));
                }
            }
        }
        next.sort();
        layers.push(next);
    }
    layers.into_iter().flatten().collect()
}

/// All `n!` tours as permutations `σ` (row `i` is matched to column `σ(i)`).
pub fn enumerate_tours(n: usize, limits: &Limits) -> Result<Vec<Permutation>> {
    if n > limits.max_tour_oracle {
        return Err(Error::OracleTooLarge {
            n,
            bound: limits.max_tour_oracle,
        });
    }
    Ok(Permutation::all(n).collect())
}

pub fn evaluate_on_tour(f: &Polynomial, sigma: &Permutation) -> Rational {
    f.evaluate_indicator(|v| match v {
        Var::Tour(i, j) => sigma.apply(i as usize) == j as usize,
        Var::Match(..) => false,
    })
}

pub(crate) fn check_tour_poly(f: &Polynomial, n: usize) -> Result<()> {
    if f.kind()? == Some(Kind::Match) {
        return Err(Error::KindMismatch);
    }
    if f.max_label() > n {
        return Err(Error::SizeMismatch {
            expected: n,
            found: f.max_label(),
        });
    }
    Ok(())
}

/// The first tour where `f` is nonzero, with its value.
pub fn find_nonzero_tour(
    f: &Polynomial,
    n: usize,
    limits: &Limits,
) -> Result<Option<(Permutation, Rational)>> {
    check_tour_poly(f, n)?;
    for sigma in enumerate_tours(n, limits)? {
        let value = evaluate_on_tour(f, &sigma);
        if value != Rational::from_integer(0.into()) {
            return Ok(Some((sigma, value)));
        }
    }
    Ok(None)
}

pub fn is_zero_on_tours(f: &Polynomial, n: usize, limits: &Limits) -> Result<bool> {
    Ok(find_nonzero_tour(f, n, limits)?.is_none())
}
