//! The perfect-matching ideal on `K_n`: generators, partial matchings, the
//! enumeration oracle, the lemma-level congruences and the derivation
//! engine.

mod derive;
mod lemmas;

pub use derive::{derive_zero, derive_zero_with_bound, Method};
pub use lemmas::{
    expand_vertex, lift_generator, lift_matching, normal_form, orbit_sum, symmetric_to_constant,
    symmetrize_constant,
};

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use crate::cert::{Certificate, Generator};
use crate::error::{Error, Result};
use crate::limits::Limits;
use crate::perm::Permutation;
use crate::poly::{Kind, Monomial, Polynomial, Var};
use crate::rational::Rational;

/// A generator of the matching ideal `P_n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MatchGen {
    /// `x_{uv}^2 - x_{uv}`, `u < v`.
    Sq(usize, usize),
    /// `x_{uv} x_{uw}` with centre `u` and `v < w`.
    Adj(usize, usize, usize),
    /// `Σ_{u≠v} x_{uv} - 1`.
    Deg(usize),
}

pub type DerivationCertificate = Certificate<MatchGen>;

impl MatchGen {
    pub fn sq(u: usize, v: usize) -> Self {
        let (a, b) = if u < v { (u, v) } else { (v, u) };
        MatchGen::Sq(a, b)
    }

    pub fn adj(centre: usize, v: usize, w: usize) -> Self {
        let (a, b) = if v < w { (v, w) } else { (w, v) };
        MatchGen::Adj(centre, a, b)
    }

    pub fn act(&self, sigma: &Permutation) -> Self {
        match *self {
            MatchGen::Sq(u, v) => MatchGen::sq(sigma.apply(u), sigma.apply(v)),
            MatchGen::Adj(c, v, w) => MatchGen::adj(sigma.apply(c), sigma.apply(v), sigma.apply(w)),
            MatchGen::Deg(v) => MatchGen::Deg(sigma.apply(v)),
        }
    }
}

impl fmt::Display for MatchGen {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatchGen::Sq(u, v) => write!(f, "SQ {u} {v}"),
            MatchGen::Adj(c, v, w) => write!(f, "ADJ {c} {v} {w}"),
            MatchGen::Deg(v) => write!(f, "DEG {v}"),
        }
    }
}

impl Generator for MatchGen {
    const FAMILY: &'static str = "MATCH";

    fn expand(&self, n: usize) -> Polynomial {
        match *self {
            MatchGen::Sq(u, v) => {
                let x = Polynomial::var(Var::edge(u, v));
                &(&x * &x) - &x
            }
            MatchGen::Adj(c, v, w) => Polynomial::term(
                Monomial::product([Var::edge(c, v), Var::edge(c, w)]),
                crate::cert::one(),
            ),
            MatchGen::Deg(v) => {
                let mut p = Polynomial::constant(-crate::cert::one());
                for u in (1..=n).filter(|&u| u != v) {
                    p.add_term(Monomial::var(Var::edge(u, v)), crate::cert::one());
                }
                p
            }
        }
    }

    fn degree(&self) -> u32 {
        match self {
            MatchGen::Deg(_) => 1,
            _ => 2,
        }
    }

    fn valid_for(&self, n: usize) -> bool {
        let ok = |x: usize| x >= 1 && x <= n;
        match *self {
            MatchGen::Sq(u, v) => ok(u) && ok(v) && u < v,
            MatchGen::Adj(c, v, w) => ok(c) && ok(v) && ok(w) && v < w && c != v && c != w,
            MatchGen::Deg(v) => ok(v),
        }
    }

    fn parse_id(tokens: &[&str]) -> Option<Self> {
        let nums: Option<Vec<usize>> = tokens[1..].iter().map(|t| t.parse().ok()).collect();
        let nums = nums?;
        match (tokens.first()?, nums.as_slice()) {
            (&"SQ", &[u, v]) if u < v => Some(MatchGen::Sq(u, v)),
            (&"ADJ", &[c, v, w]) if v < w => Some(MatchGen::Adj(c, v, w)),
            (&"DEG", &[v]) => Some(MatchGen::Deg(v)),
            _ => None,
        }
    }
}

fn check_even(n: usize) -> Result<()> {
    if n < 2 || n % 2 == 1 {
        return Err(Error::InvalidSize(n));
    }
    Ok(())
}

/// The generator set `P_n` in canonical order.
pub fn generators_p(n: usize) -> Result<Vec<MatchGen>> {
    check_even(n)?;
    let mut gens = Vec::new();
    for u in 1..=n {
        for v in u + 1..=n {
            gens.push(MatchGen::Sq(u, v));
        }
    }
    for c in 1..=n {
        for v in 1..=n {
            for w in v + 1..=n {
                if v != c && w != c {
                    gens.push(MatchGen::Adj(c, v, w));
                }
            }
        }
    }
    gens.extend((1..=n).map(MatchGen::Deg));
    Ok(gens)
}

/// A set of vertex-disjoint edges, stored sorted with `u < v` in each edge.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PartialMatching {
    edges: Vec<(usize, usize)>,
}

impl PartialMatching {
    pub fn empty() -> Self {
        PartialMatching::default()
    }

    pub fn new<I: IntoIterator<Item = (usize, usize)>>(edges: I) -> Result<Self> {
        let mut out: Vec<(usize, usize)> = edges
            .into_iter()
            .map(|(u, v)| if u < v { (u, v) } else { (v, u) })
            .collect();
        out.sort_unstable();
        let mut seen = std::collections::HashSet::new();
        for &(u, v) in &out {
            if u == v || u == 0 || !seen.insert(u) || !seen.insert(v) {
                return Err(Error::InvalidInput(format!("{out:?} is not a matching")));
            }
        }
        Ok(PartialMatching { edges: out })
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn partner(&self, v: usize) -> Option<usize> {
        self.edges.iter().find_map(|&(a, b)| {
            if a == v {
                Some(b)
            } else if b == v {
                Some(a)
            } else {
                None
            }
        })
    }

    pub fn covers(&self, v: usize) -> bool {
        self.partner(v).is_some()
    }

    pub fn max_vertex(&self) -> usize {
        self.edges.iter().map(|&(_, b)| b).max().unwrap_or(0)
    }

    /// `M ∪ {uv}`; the caller guarantees both endpoints are uncovered.
    pub fn with_edge(&self, u: usize, v: usize) -> Self {
        let e = if u < v { (u, v) } else { (v, u) };
        let mut edges = self.edges.clone();
        let pos = edges.binary_search(&e).unwrap_or_else(|p| p);
        edges.insert(pos, e);
        PartialMatching { edges }
    }

    pub fn without_edge(&self, u: usize, v: usize) -> Self {
        let e = if u < v { (u, v) } else { (v, u) };
        PartialMatching {
            edges: self.edges.iter().copied().filter(|&f| f != e).collect(),
        }
    }

    /// `x_M`.
    pub fn monomial(&self) -> Monomial {
        Monomial::product(self.edges.iter().map(|&(u, v)| Var::edge(u, v)))
    }

    pub fn poly(&self) -> Polynomial {
        Polynomial::term(self.monomial(), crate::cert::one())
    }

    /// The matching whose product is `m`, if `m` is a multilinear matching
    /// monomial.
    pub fn from_monomial(m: &Monomial) -> Option<Self> {
        if !m.is_multilinear() {
            return None;
        }
        let mut edges = Vec::new();
        for v in m.vars() {
            match v {
                Var::Match(a, b) => edges.push((a as usize, b as usize)),
                Var::Tour(..) => return None,
            }
        }
        PartialMatching::new(edges).ok()
    }

    pub fn act(&self, sigma: &Permutation) -> Self {
        PartialMatching::new(self.edges.iter().map(|&(u, v)| (sigma.apply(u), sigma.apply(v))))
            .expect("permutations preserve disjointness")
    }

    /// Edges with both endpoints in `set`.
    pub fn restricted_to(&self, set: &[usize]) -> Self {
        PartialMatching {
            edges: self
                .edges
                .iter()
                .copied()
                .filter(|&(u, v)| set.contains(&u) && set.contains(&v))
                .collect(),
        }
    }
}

impl fmt::Display for PartialMatching {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.edges.iter().map(|(u, v)| format!("{u}-{v}")).collect();
        write!(f, "{}", parts.join(" "))
    }
}

/// A partial matching covering every vertex of `K_n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PerfectMatching {
    n: usize,
    matching: PartialMatching,
    partner: Vec<usize>,
}

impl PerfectMatching {
    pub fn new(n: usize, matching: PartialMatching) -> Result<Self> {
        if matching.len() * 2 != n || matching.max_vertex() > n {
            return Err(Error::InvalidInput(format!(
                "{matching} is not a perfect matching of K_{n}"
            )));
        }
        let mut partner = vec![0; n + 1];
        for &(u, v) in matching.edges() {
            partner[u] = v;
            partner[v] = u;
        }
        Ok(PerfectMatching {
            n,
            matching,
            partner,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matching(&self) -> &PartialMatching {
        &self.matching
    }

    pub fn partner(&self, v: usize) -> usize {
        self.partner[v]
    }

    pub fn contains(&self, u: usize, v: usize) -> bool {
        u <= self.n && v <= self.n && self.partner[u] == v
    }

    pub fn has_var(&self, var: Var) -> bool {
        match var {
            Var::Match(a, b) => self.contains(a as usize, b as usize),
            Var::Tour(..) => false,
        }
    }

    pub fn act(&self, sigma: &Permutation) -> Self {
        PerfectMatching::new(self.n, self.matching.act(sigma)).expect("image is perfect")
    }

    /// Parses `u-v` tokens.
    pub fn parse(n: usize, tokens: &[&str]) -> Result<Self> {
        let mut edges = Vec::new();
        for t in tokens {
            let (a, b) = t
                .split_once('-')
                .ok_or_else(|| Error::InvalidInput(format!("bad edge `{t}`")))?;
            let a = a.parse().map_err(|_| Error::InvalidInput(format!("bad edge `{t}`")))?;
            let b = b.parse().map_err(|_| Error::InvalidInput(format!("bad edge `{t}`")))?;
            edges.push((a, b));
        }
        PerfectMatching::new(n, PartialMatching::new(edges)?)
    }
}

impl fmt::Display for PerfectMatching {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.matching.fmt(f)
    }
}

type MatchingCache = Mutex<HashMap<usize, Arc<Vec<PerfectMatching>>>>;

fn cache() -> &'static MatchingCache {
    static CACHE: OnceLock<MatchingCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// All `(n-1)!!` perfect matchings of `K_n` in lexicographic order.
pub fn enumerate_perfect_matchings(n: usize, limits: &Limits) -> Result<Arc<Vec<PerfectMatching>>> {
    if n % 2 == 1 {
        return Err(Error::InvalidSize(n));
    }
    if n > limits.max_oracle {
        return Err(Error::OracleTooLarge {
            n,
            bound: limits.max_oracle,
        });
    }
    if let Some(hit) = cache().lock().expect("cache poisoned").get(&n) {
        return Ok(Arc::clone(hit));
    }
    let mut out = Vec::new();
    let mut current = Vec::new();
    let mut used = vec![false; n + 1];
    fill_matchings(n, &mut used, &mut current, &mut out);
    let list = Arc::new(
        out.into_iter()
            .map(|edges| {
                PerfectMatching::new(n, PartialMatching { edges }).expect("enumerated matching")
            })
            .collect::<Vec<_>>(),
    );
    cache()
        .lock()
        .expect("cache poisoned")
        .insert(n, Arc::clone(&list));
    Ok(list)
}

fn fill_matchings(
    n: usize,
    used: &mut [bool],
    current: &mut Vec<(usize, usize)>,
    out: &mut Vec<Vec<(usize, usize)>>,
) {
    let Some(first) = (1..=n).find(|&v| !used[v]) else {
        out.push(current.clone());
        return;
    };
    used[first] = true;
    for partner in first + 1..=n {
        if used[partner] {
            continue;
        }
        used[partner] = true;
        current.push((first, partner));
        fill_matchings(n, used, current, out);
        current.pop();
        used[partner] = false;
    }
    used[first] = false;
}

/// Every partial matching of `K_n` with at most `max_size` edges, ordered by
/// size and then lexicographically.
pub fn partial_matchings(n: usize, max_size: usize) -> Vec<PartialMatching> {
    let mut by_size: Vec<Vec<PartialMatching>> = vec![vec![PartialMatching::empty()]];
    for size in 1..=max_size.min(n / 2) {
        let mut next = Vec::new();
        for m in &by_size[size - 1] {
            let last = m.edges.last().copied();
            for u in 1..=n {
                for v in u + 1..=n {
                    if Some((u, v)) <= last || m.covers(u) || m.covers(v) {
                        continue;
                    }
                    next.push(m.with_edge(u, v));
                }
            }
        }
        next.sort();
        by_size.push(next);
    }
    by_size.into_iter().flatten().collect()
}

pub(crate) fn check_match_poly(f: &Polynomial, n: usize) -> Result<()> {
    if f.kind()? == Some(Kind::Tour) {
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

pub fn evaluate_on_matching(f: &Polynomial, m: &PerfectMatching) -> Rational {
    f.evaluate_indicator(|v| m.has_var(v))
}

/// The first perfect matching where `f` is nonzero, with its value.
pub fn find_nonzero(
    f: &Polynomial,
    n: usize,
    limits: &Limits,
) -> Result<Option<(PerfectMatching, Rational)>> {
    check_even(n)?;
    check_match_poly(f, n)?;
    let all = enumerate_perfect_matchings(n, limits)?;
    for m in all.iter() {
        let value = evaluate_on_matching(f, m);
        if value != Rational::from_integer(0.into()) {
            return Ok(Some((m.clone(), value)));
        }
    }
    Ok(None)
}

/// Ideal membership by evaluation: the ideal is radical, so vanishing on
/// every perfect matching is equivalent to membership.
pub fn is_zero_on_matchings(f: &Polynomial, n: usize, limits: &Limits) -> Result<bool> {
    Ok(find_nonzero(f, n, limits)?.is_none())
}
