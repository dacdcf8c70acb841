use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use num_traits::{One, Zero};

use super::lemmas::{expand_vertex_raw, normal_form, symmetric_to_constant};
use super::{
    check_even, check_match_poly, find_nonzero, partial_matchings, DerivationCertificate, MatchGen,
    PartialMatching,
};
use crate::cert::Certificate;
use crate::error::{Error, Result};
use crate::limits::Limits;
use crate::linsolve::{Echelon, SparseRow};
use crate::perm::Permutation;
use crate::poly::{act_var, Polynomial};
use crate::rational::{format_rational, int, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Direct,
    Inductive,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Method::Direct),
            "inductive" => Ok(Method::Inductive),
            other => Err(Error::InvalidInput(format!("unknown method `{other}`"))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Direct => "direct",
            Method::Inductive => "inductive",
        })
    }
}

/// Certifies `F ≡ 0` over `P_n` with degree at most `2·deg F - 1`.
pub fn derive_zero(
    f: &Polynomial,
    n: usize,
    method: Method,
    limits: &Limits,
) -> Result<DerivationCertificate> {
    check_even(n)?;
    check_match_poly(f, n)?;
    let witness = find_nonzero(f, n, limits).map_err(|e| match e {
        Error::OracleTooLarge { n, bound } => {
            Error::DerivationTooLarge(format!("membership oracle for n={n} exceeds bound {bound}"))
        }
        other => other,
    })?;
    if let Some((m, value)) = witness {
        return Err(Error::NotAMember {
            witness: m.to_string(),
            value: format_rational(&value),
        });
    }
    let bound = 2 * f.degree_or_neg() - 1;
    let cert = match method {
        Method::Direct => derive_direct(f, n, limits)?,
        Method::Inductive => {
            let d = f.degree().unwrap_or(0);
            if n > limits.max_inductive_n || d > limits.max_inductive_degree {
                return Err(Error::DerivationTooLarge(format!(
                    "inductive method is limited to n <= {} and degree <= {}",
                    limits.max_inductive_n, limits.max_inductive_degree
                )));
            }
            derive_inductive(f, n, limits)?
        }
    };
    let cert = cert.tighten();
    if cert.degree > bound.max(-1) {
        return Err(Error::invariant(format!(
            "derivation has degree {} above the bound {bound}",
            cert.degree
        )));
    }
    Ok(cert)
}

/// Searches for a certificate of `F ≡ 0` of degree at most `bound` without
/// consulting the oracle. `Ok(None)` means none exists at this degree.
pub fn derive_zero_with_bound(
    f: &Polynomial,
    n: usize,
    bound: usize,
    limits: &Limits,
) -> Result<Option<DerivationCertificate>> {
    check_match_poly(f, n)?;
    let (g, nf) = normal_form(f, n)?;
    if g.is_zero() {
        return Ok(Some(nf.tighten()));
    }
    let d = g.degree().unwrap_or(0) as usize;
    if bound < d.max(1) {
        return Ok(None);
    }
    match solve_reduced(&g, n, bound, limits)? {
        Some(c) => Ok(Some(nf.then(&c)?.tighten())),
        None => Ok(None),
    }
}

fn derive_direct(f: &Polynomial, n: usize, limits: &Limits) -> Result<DerivationCertificate> {
    let (g, nf) = normal_form(f, n)?;
    if g.is_zero() {
        return Ok(nf);
    }
    let d = g.degree().unwrap_or(0) as usize;
    for b in d.max(1)..=(2 * d - 1).max(1) {
        if let Some(c) = solve_reduced(&g, n, b, limits)? {
            return nf.then(&c);
        }
    }
    Err(Error::invariant(
        "no certificate within the degree bound for an ideal member",
    ))
}

/// Solves for multipliers `c_{v,M}` with
/// `nf(F) = Σ c_{v,M} · nf(x_M · DEG(v))`, `|M| < bound`, `v` uncovered.
/// Every degree-`bound` certificate of a normal-form polynomial projects
/// onto one of this shape, so the search is complete at each degree.
///
/// Unknowns and equations are merged along orbits of the vertex
/// permutations fixing `F`: averaging any solution over that group gives
/// one that is constant on orbits.
fn solve_reduced(
    g: &Polynomial,
    n: usize,
    bound: usize,
    limits: &Limits,
) -> Result<Option<DerivationCertificate>> {
    let blocks = vertex_blocks(g, n)?;
    let key = |m: &PartialMatching| -> Vec<(usize, usize)> {
        let mut k: Vec<(usize, usize)> = m
            .edges()
            .iter()
            .map(|&(u, v)| {
                let (a, b) = (blocks[u], blocks[v]);
                (a.min(b), a.max(b))
            })
            .collect();
        k.sort_unstable();
        k
    };
    let matchings = partial_matchings(n, bound);
    let mut row_of: HashMap<Vec<(usize, usize)>, usize> = HashMap::new();
    let mut reps: Vec<&PartialMatching> = Vec::new();
    let mut col_of: HashMap<(usize, Vec<(usize, usize)>), usize> = HashMap::new();
    let mut columns: Vec<(usize, &PartialMatching)> = Vec::new();
    for m in &matchings {
        let k = key(m);
        if !row_of.contains_key(&k) {
            row_of.insert(k.clone(), reps.len());
            reps.push(m);
        }
        if m.len() < bound {
            for v in (1..=n).filter(|&v| !m.covers(v)) {
                columns.push((v, m));
                let next = col_of.len();
                col_of.entry((blocks[v], k.clone())).or_insert(next);
            }
        }
    }
    if col_of.len() > limits.max_direct_unknowns {
        return Err(Error::DerivationTooLarge(format!(
            "{} unknowns exceed the cap {}",
            col_of.len(),
            limits.max_direct_unknowns
        )));
    }
    let mut rhs = vec![Rational::zero(); reps.len()];
    for (mono, c) in g.terms() {
        let m = PartialMatching::from_monomial(mono)
            .ok_or_else(|| Error::invariant("solver input not in normal form"))?;
        if m.len() > bound {
            return Err(Error::invariant("solver input exceeds the degree bound"));
        }
        let r = row_of[&key(&m)];
        if *reps[r] == m {
            rhs[r] = c.clone();
        }
    }
    let mut ech = Echelon::new();
    for (m, b) in reps.iter().zip(rhs) {
        let mut row: SparseRow = Vec::new();
        if m.len() < bound {
            let k = key(m);
            for v in (1..=n).filter(|&v| !m.covers(v)) {
                row.push((col_of[&(blocks[v], k.clone())], -Rational::one()));
            }
        }
        for &(u, w) in m.edges() {
            let k = key(&m.without_edge(u, w));
            for v in [u, w] {
                row.push((col_of[&(blocks[v], k.clone())], Rational::one()));
            }
        }
        if !ech.push(&row, b) {
            return Ok(None);
        }
    }
    let solution = ech.solution(col_of.len());
    let mut cert = Certificate::identity(n, g.clone());
    for &(v, m) in &columns {
        let c = &solution[col_of[&(blocks[v], key(m))]];
        if c.is_zero() {
            continue;
        }
        cert.add_cofactor(MatchGen::Deg(v), &m.poly().scale(&-c));
        for &(u, w) in m.edges() {
            let rest = m.without_edge(u, w).poly().scale(c);
            cert.add_cofactor(MatchGen::adj(u, v, w), &rest);
            cert.add_cofactor(MatchGen::adj(w, v, u), &rest);
        }
    }
    cert.result = Polynomial::zero();
    cert.degree = bound as i64;
    Ok(Some(cert))
}

/// Block index per vertex (1-based; entry 0 unused): the connected
/// components of the transpositions fixing `g`, whose product of symmetric
/// groups fixes `g`.
fn vertex_blocks(g: &Polynomial, n: usize) -> Result<Vec<usize>> {
    let mut block: Vec<usize> = (0..=n).collect();
    for u in 1..=n {
        if block[u] != u {
            continue;
        }
        for v in u + 1..=n {
            if block[v] == v && g.act(&Permutation::transposition(n, u, v))? == *g {
                block[v] = u;
            }
        }
    }
    Ok(block)
}

/// Follows the inductive proof: symmetrize through transposition claims,
/// then reduce the symmetric polynomial to its constant.
fn derive_inductive(f: &Polynomial, n: usize, limits: &Limits) -> Result<DerivationCertificate> {
    let (g, nf) = normal_form(f, n)?;
    if g.is_zero() {
        return Ok(nf);
    }
    let d = g.degree().unwrap_or(0);
    if d == 1 {
        let base = solve_reduced(&g, n, 1, limits)?
            .ok_or_else(|| Error::invariant("linear member without a degree-1 certificate"))?;
        return nf.then(&base);
    }
    let mut cert = Certificate::identity(n, g.clone());
    let mut h = g;
    for k in 2..=n {
        let weight = Rational::one() / int(k as i64);
        let mut next = h.clone();
        let mut step = Certificate::identity(n, h.clone());
        for j in 1..k {
            let tau = Permutation::transposition(n, j, k);
            let image = h.act(&tau)?;
            next.add_scaled(&image, &Rational::one());
            let diff = &h - &image;
            if diff.is_zero() {
                continue;
            }
            let claim = transposition_claim(&diff, j, k, n, limits)?;
            step.absorb(&claim, &weight);
        }
        let next = next.scale(&weight);
        step.result = next.clone();
        cert = cert.then(&step)?;
        h = next;
    }
    let (c, sym) = symmetric_to_constant(&h, n)?;
    if !c.is_zero() {
        return Err(Error::invariant(format!(
            "symmetrized member reduced to the nonzero constant {}",
            format_rational(&c)
        )));
    }
    let cert = cert.then(&sym)?;
    let total = nf.then(&cert)?;
    Ok(total.with_degree(2 * d as i64 - 1))
}

/// `D ≡ 0` for `D = F - (a u)F` with `F` a normal-form member.
fn transposition_claim(
    diff: &Polynomial,
    a: usize,
    u: usize,
    n: usize,
    limits: &Limits,
) -> Result<DerivationCertificate> {
    let d = diff.degree().unwrap_or(0) as i64;
    let mut cert = Certificate::identity(n, diff.clone());
    // (partner of a, partner of u) -> L with D ≡ Σ L · x_{a,pa} · x_{u,pu};
    // the key (u, a) collects the monomials containing the edge au itself.
    let mut groups: BTreeMap<(usize, usize), Polynomial> = BTreeMap::new();
    let mut add = |key: (usize, usize), m: &PartialMatching, c: &Rational| {
        let mut rest = m.without_edge(a, key.0);
        if key != (u, a) {
            rest = rest.without_edge(u, key.1);
        }
        groups
            .entry(key)
            .or_insert_with(Polynomial::zero)
            .add_term(rest.monomial(), c.clone());
    };
    for (mono, c) in diff.terms() {
        let m = PartialMatching::from_monomial(mono)
            .ok_or_else(|| Error::invariant("claim input not in normal form"))?;
        match (m.partner(a), m.partner(u)) {
            (Some(p), _) if p == u => add((u, a), &m, c),
            (Some(pa), Some(pu)) => add((pa, pu), &m, c),
            (Some(pa), None) => {
                let (rhs, e) = expand_vertex_raw(&m, u, n);
                cert.absorb(&e, c);
                for (big, _) in rhs.terms() {
                    let big = PartialMatching::from_monomial(big).expect("expansion is a matching");
                    add((pa, big.partner(u).expect("u covered")), &big, c);
                }
            }
            (None, Some(pu)) => {
                let (rhs, e) = expand_vertex_raw(&m, a, n);
                cert.absorb(&e, c);
                for (big, _) in rhs.terms() {
                    let big = PartialMatching::from_monomial(big).expect("expansion is a matching");
                    add((big.partner(a).expect("a covered"), pu), &big, c);
                }
            }
            (None, None) => {
                return Err(Error::invariant(
                    "monomial independent of the transposed vertices survived",
                ))
            }
        }
    }
    for ((b, v), l) in groups {
        if l.is_zero() {
            continue;
        }
        let special = (b, v) == (u, a);
        let removed: Vec<usize> = if special { vec![a, u] } else { vec![a, b, u, v] };
        let sub = sub_certificate(&l, &removed, n, limits)?;
        cert.absorb(&sub, &Rational::one());
    }
    cert.result = Polynomial::zero();
    cert.degree = 2 * d - 1;
    Ok(cert)
}

/// Certifies `L · Π x_{removed pair} ≡ 0` over `K_n` by recursing on the
/// complement of `removed` (pairs listed consecutively) and lifting back.
fn sub_certificate(
    l: &Polynomial,
    removed: &[usize],
    n: usize,
    limits: &Limits,
) -> Result<DerivationCertificate> {
    let rest: Vec<usize> = (1..=n).filter(|v| !removed.contains(v)).collect();
    let sub_n = rest.len();
    let mut images = rest.clone();
    images.extend_from_slice(removed);
    let pi = Permutation::from_images(images).expect("relabeling is a bijection");
    let inverse = pi.inverse();
    let local = l.map_vars(|v| act_var(&inverse, v));
    let mut cert = if sub_n == 0 {
        if !local.is_zero() {
            return Err(Error::invariant("nonzero constant left on an empty sub-instance"));
        }
        Certificate::empty(0)
    } else {
        if let Some((m, value)) = find_nonzero(&local, sub_n, limits)? {
            return Err(Error::invariant(format!(
                "sub-polynomial does not vanish on K_{sub_n} (value {} at {m})",
                format_rational(&value)
            )));
        }
        derive_inductive(&local, sub_n, limits)?
    };
    let mut top = sub_n;
    while top < n {
        cert = super::lemmas::lift_generator(&cert, top + 1, top + 2)?;
        top += 2;
    }
    Ok(cert.map(
        n,
        |g| g.act(&pi),
        |p| p.map_vars(|v| act_var(&pi, v)),
    ))
}
